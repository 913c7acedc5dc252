//! Signature dynamic program along a canonical tree extension.
//!
//! A table cell is a pair `(S, psi)`: a top-arc set `S` of the tree together
//! with the first network arc of each top arc's path. Tree arcs are named by
//! their head, so a cell is a list of `(tree head, network arc)` sorted by
//! tree head.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::sync::Arc;

use indexmap::IndexMap;
use thiserror::Error;

use crate::extension::TreeExtension;
use crate::graph::{ArcKey, Digraph, PhyloClass, VertexId};
use crate::reduction::AugmentedInstance;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SolveError {
    #[error("invalid solver input: {0}")]
    InvalidInput(String),
    #[error("embedding domain mismatch: {0}")]
    DomainMismatch(String),
    #[error("path of length zero")]
    ZeroLengthPath,
    #[error("no witness: the instance is a NO instance or tables were not kept")]
    NoWitness,
    #[error("internal invariant violated: {0}")]
    Internal(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Yes,
    No,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SolveOptions {
    /// Keep all tables and back-pointers and reconstruct a witness.
    pub witness: bool,
    /// Check every stored cell against the signature invariants.
    pub audit: bool,
}

/// Table sizes at one extension vertex.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VertexStats {
    pub vertex: VertexId,
    pub is_leaf: bool,
    pub gw: usize,
    pub hw: usize,
    pub gws: usize,
    pub hws: usize,
    /// Largest number of top arcs sharing one network arc, over all cells.
    pub max_preimage: usize,
    /// Smallest and largest GWS cell, in top arcs; zero when the table is empty.
    pub min_cell: usize,
    pub max_cell: usize,
}

/// A map from tree arcs to network paths (vertex sequences).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SoftPseudoEmbedding {
    pub phi: BTreeMap<ArcKey, Vec<VertexId>>,
}

impl SoftPseudoEmbedding {
    /// The last vertex of the path of the arc entering `y`.
    pub fn end_of(&self, y: &VertexId) -> Option<&VertexId> {
        self.phi.iter().find(|((_, h), _)| h == y).and_then(|(_, p)| p.last())
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub verdict: Verdict,
    pub stats: Vec<VertexStats>,
    pub witness: Option<SoftPseudoEmbedding>,
    /// Audit findings; empty unless auditing found a problem.
    pub audit_failures: Vec<String>,
}

type Cell = Vec<(u32, u32)>;

#[derive(Debug, Clone, Copy)]
enum Origin {
    Leaf,
    Copy(usize),
    Join(usize, usize),
    Carry(usize),
    Elongate { from: usize, u: u32 },
    Extend { from: usize, y: u32, u: u32 },
}

#[derive(Default)]
struct Table {
    cells: IndexMap<Cell, Origin>,
}

impl Table {
    fn add(&mut self, cell: Cell, origin: Origin) {
        self.cells.entry(cell).or_insert(origin);
    }
}

struct Dense {
    // network, indexed by extension preorder
    nv: Vec<VertexId>,
    arc_tail: Vec<u32>,
    arc_head: Vec<u32>,
    arc_id: HashMap<(u32, u32), u32>,
    out_arcs: Vec<Vec<u32>>,
    in_arcs: Vec<Vec<u32>>,
    gamma_children: Vec<Vec<u32>>,
    gamma_post: Vec<u32>,
    // tree
    tv: Vec<VertexId>,
    t_parent: Vec<Option<u32>>,
    t_children: Vec<Vec<u32>>,
    t_root: u32,
    t_leaf_of_taxon: HashMap<String, u32>,
}

fn dense(n: &Digraph, t: &Digraph, ext: &TreeExtension) -> Dense {
    let nv: Vec<VertexId> = ext.preorder().to_vec();
    let nidx: HashMap<VertexId, u32> = nv.iter().enumerate().map(|(i, v)| (v.clone(), i as u32)).collect();
    let mut arc_tail = Vec::new();
    let mut arc_head = Vec::new();
    let mut arc_id = HashMap::new();
    let mut out_arcs = vec![Vec::new(); nv.len()];
    let mut in_arcs = vec![Vec::new(); nv.len()];
    for (u, v) in n.arcs() {
        let (a, b) = (nidx[&u], nidx[&v]);
        let id = arc_tail.len() as u32;
        arc_tail.push(a);
        arc_head.push(b);
        arc_id.insert((a, b), id);
        out_arcs[a as usize].push(id);
        in_arcs[b as usize].push(id);
    }
    let gamma_children = nv.iter().map(|v| ext.gamma().children(v).iter().map(|c| nidx[c]).collect()).collect();
    let gamma_post = ext.postorder().iter().map(|v| nidx[v]).collect();

    let tv: Vec<VertexId> = t.vertices().cloned().collect();
    let tidx: HashMap<&VertexId, u32> = tv.iter().enumerate().map(|(i, v)| (v, i as u32)).collect();
    let t_parent = tv.iter().map(|v| t.parents(v).first().map(|p| tidx[p])).collect();
    let t_children = tv.iter().map(|v| t.children(v).iter().map(|c| tidx[c]).collect()).collect();
    let t_root = tidx[&t.root().unwrap()];
    let t_leaf_of_taxon = t.labels().iter().map(|(v, l)| (l.clone(), tidx[v])).collect();
    Dense {
        nv,
        arc_tail,
        arc_head,
        arc_id,
        out_arcs,
        in_arcs,
        gamma_children,
        gamma_post,
        tv,
        t_parent,
        t_children,
        t_root,
        t_leaf_of_taxon,
    }
}

fn validate(n: &Digraph, t: &Digraph, ext: &TreeExtension) -> Result<(), SolveError> {
    let bad = |m: String| Err(SolveError::InvalidInput(m));
    if n.classify() != PhyloClass::DegreeOneRoot {
        return bad(format!("network must be a network with an out-degree-1 root, got {:?}", n.classify()));
    }
    if !n.is_binary() {
        return bad("network is not binary".into());
    }
    if t.classify() != PhyloClass::DegreeOneRoot || !t.reticulations().is_empty() {
        return bad(format!("tree must be a tree with an out-degree-1 root, got {:?}", t.classify()));
    }
    if n.taxa() != t.taxa() {
        return bad("network and tree have different taxa".into());
    }
    if **ext.host() != *n {
        return bad("extension belongs to a different network".into());
    }
    let v = ext.canonicality_violations();
    if !v.is_empty() {
        return bad(format!("extension is not canonical: {v:?}"));
    }
    Ok(())
}

/// Decides whether the network of `inst` (minus its added root) softly
/// displays the tree of `inst` (minus its added root).
pub fn solve(inst: &AugmentedInstance, opts: SolveOptions) -> Result<SolveReport, SolveError> {
    solve_parts(&inst.network, &inst.tree, &inst.extension, opts)
}

/// As [`solve`], on an explicit network with degree-1 root, tree with
/// degree-1 root, and canonical extension of the network.
pub fn solve_parts(
    n: &Arc<Digraph>,
    t: &Digraph,
    ext: &TreeExtension,
    opts: SolveOptions,
) -> Result<SolveReport, SolveError> {
    validate(n, t, ext)?;
    let d = dense(n, t, ext);
    let nv = d.nv.len();
    let mut gws: Vec<Table> = (0..nv).map(|_| Table::default()).collect();
    let mut hws: Vec<Table> = (0..nv).map(|_| Table::default()).collect();

    let (gw_size, hw_size) = cut_sizes(&d);
    let gamma_root = 0u32;
    let mut stats = Vec::with_capacity(nv);
    let mut audit_failures = Vec::new();
    let auditor = opts.audit.then(|| Auditor::new(&d, ext));
    let above = |a: usize, b: usize| ext.above_or_equal(&d.nv[a], &d.nv[b]);

    for &v in &d.gamma_post {
        if v == gamma_root {
            continue;
        }
        let vi = v as usize;
        let kids = &d.gamma_children[vi];
        match kids.len() {
            0 => {
                let taxon = n
                    .label(&d.nv[vi])
                    .ok_or_else(|| SolveError::InvalidInput(format!("extension leaf {} is unlabeled", d.nv[vi])))?;
                let leaf = d.t_leaf_of_taxon[taxon];
                let a = d.in_arcs[vi][0];
                gws[vi].add(vec![(leaf, a)], Origin::Leaf);
            }
            1 => {
                let q = kids[0] as usize;
                let child = std::mem::take(&mut gws[q]);
                for (i, cell) in child.cells.keys().enumerate() {
                    hws[vi].add(cell.clone(), Origin::Copy(i));
                }
                if opts.witness {
                    gws[q] = child;
                }
            }
            2 => {
                let (q1, q2) = (kids[0] as usize, kids[1] as usize);
                let t1 = std::mem::take(&mut gws[q1]);
                let t2 = std::mem::take(&mut gws[q2]);
                for (i, c1) in t1.cells.keys().enumerate() {
                    for (j, c2) in t2.cells.keys().enumerate() {
                        let joined = merge_disjoint(c1, c2)
                            .ok_or_else(|| SolveError::Internal(format!("overlapping top arcs below {}", d.nv[vi])))?;
                        hws[vi].add(joined, Origin::Join(i, j));
                    }
                }
                if opts.witness {
                    gws[q1] = t1;
                    gws[q2] = t2;
                }
            }
            k => {
                return Err(SolveError::InvalidInput(format!(
                    "extension vertex {} has {k} children in a binary network",
                    d.nv[vi]
                )))
            }
        }
        if !kids.is_empty() {
            let h = std::mem::take(&mut hws[vi]);
            populate_gws(&d, vi, &h, &mut gws[vi]);
            hws[vi] = h;
        }
        if let Some(a) = &auditor {
            a.check(&d, &above, vi, &gws[vi], false, &mut audit_failures);
            a.check(&d, &above, vi, &hws[vi], true, &mut audit_failures);
        }
        stats.push(VertexStats {
            vertex: d.nv[vi].clone(),
            is_leaf: kids.is_empty(),
            gw: gw_size[vi],
            hw: hw_size[vi],
            gws: gws[vi].cells.len(),
            hws: hws[vi].cells.len(),
            max_preimage: max_preimage(&gws[vi]).max(max_preimage(&hws[vi])),
            min_cell: gws[vi].cells.keys().map(Vec::len).min().unwrap_or(0),
            max_cell: gws[vi].cells.keys().map(Vec::len).max().unwrap_or(0),
        });
        if !opts.witness {
            hws[vi] = Table::default();
        }
    }

    // the child of the network root, and the arc above the tree's root
    let top = d.gamma_children[gamma_root as usize]
        .first()
        .copied()
        .ok_or_else(|| SolveError::InvalidInput("extension root has no child".into()))?;
    let t_top = d.t_children[d.t_root as usize][0];
    let hit = gws[top as usize].cells.get_index_of(&vec![(t_top, d.arc_id[&(gamma_root, top)])]);
    let verdict = if hit.is_some() { Verdict::Yes } else { Verdict::No };
    let witness = match (hit, opts.witness) {
        (Some(i), true) => Some(reconstruct(&d, &gws, &hws, top, i)?),
        _ => None,
    };
    Ok(SolveReport { verdict, stats, witness, audit_failures })
}

fn merge_disjoint(a: &Cell, b: &Cell) -> Option<Cell> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => return None,
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    Some(out)
}

fn max_preimage(t: &Table) -> usize {
    let mut best = 0;
    let mut count: HashMap<u32, usize> = HashMap::new();
    for cell in t.cells.keys() {
        count.clear();
        for &(_, a) in cell {
            let c = count.entry(a).or_insert(0);
            *c += 1;
            best = best.max(*c);
        }
    }
    best
}

fn cut_sizes(d: &Dense) -> (Vec<usize>, Vec<usize>) {
    let n = d.nv.len();
    let mut parent = vec![u32::MAX; n];
    for (p, kids) in d.gamma_children.iter().enumerate() {
        for &c in kids {
            parent[c as usize] = p as u32;
        }
    }
    let mut gw = vec![0; n];
    let mut hw = vec![0; n];
    for (&u, &v) in d.arc_tail.iter().zip(&d.arc_head) {
        let mut t = v;
        while t != u {
            gw[t as usize] += 1;
            t = parent[t as usize];
        }
        let mut t = parent[v as usize];
        loop {
            hw[t as usize] += 1;
            if t == u {
                break;
            }
            t = parent[t as usize];
        }
    }
    (gw, hw)
}

/// Derives the GW table of `v` from its HW table: each cell either leaves the
/// in-arcs of `v` unused, elongates the paths through the out-arcs of `v`, or
/// embeds a new tree vertex at `v`.
fn populate_gws(d: &Dense, v: usize, hws: &Table, gws: &mut Table) {
    let outs = &d.out_arcs[v];
    let ins = &d.in_arcs[v];
    for (i, cell) in hws.cells.keys().enumerate() {
        let x: Vec<usize> = (0..cell.len()).filter(|&k| outs.contains(&cell[k].1)).collect();
        if x.is_empty() {
            gws.add(cell.clone(), Origin::Carry(i));
            continue;
        }
        let tail = d.t_parent[cell[x[0]].0 as usize];
        if x.iter().any(|&k| d.t_parent[cell[k].0 as usize] != tail) {
            continue;
        }
        let Some(y) = tail else { continue };
        for &a in ins {
            let mut next = cell.clone();
            for &k in &x {
                next[k].1 = a;
            }
            let u = d.arc_tail[a as usize];
            gws.add(next, Origin::Elongate { from: i, u });
        }
        if y != d.t_root && x.len() == d.t_children[y as usize].len() {
            for &a in ins {
                let mut next: Cell = (0..cell.len()).filter(|k| !x.contains(k)).map(|k| cell[k]).collect();
                let at = next.partition_point(|e| e.0 < y);
                next.insert(at, (y, a));
                let u = d.arc_tail[a as usize];
                gws.add(next, Origin::Extend { from: i, y, u });
            }
        }
    }
}

#[derive(Clone, Copy)]
enum Which {
    Gw,
    Hw,
}

// (extension vertex, table, cell index, vertex prefix per tree arc)
type Frame = (u32, Which, usize, HashMap<u32, Vec<u32>>);

fn reconstruct(
    d: &Dense,
    gws: &[Table],
    hws: &[Table],
    top: u32,
    idx: usize,
) -> Result<SoftPseudoEmbedding, SolveError> {
    let mut phi: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
    let mut stack: Vec<Frame> = vec![(top, Which::Gw, idx, HashMap::new())];
    let lost = || SolveError::Internal("back-pointer points to a missing cell".into());
    while let Some((v, which, i, mut prefix)) = stack.pop() {
        let vi = v as usize;
        let table = match which {
            Which::Gw => &gws[vi],
            Which::Hw => &hws[vi],
        };
        let (cell, origin) = table.cells.get_index(i).ok_or_else(lost)?;
        match *origin {
            Origin::Leaf => {
                let (t, a) = cell[0];
                let mut p = prefix.remove(&t).unwrap_or_default();
                p.extend([d.arc_tail[a as usize], v]);
                phi.insert(t, p);
            }
            Origin::Carry(j) => stack.push((v, Which::Hw, j, prefix)),
            Origin::Elongate { from, u } => {
                let a = d.arc_id[&(u, v)];
                for &(t, b) in cell {
                    if b == a {
                        prefix.entry(t).or_default().push(u);
                    }
                }
                stack.push((v, Which::Hw, from, prefix));
            }
            Origin::Extend { from, y, u } => {
                let mut p = prefix.remove(&y).unwrap_or_default();
                p.extend([u, v]);
                phi.insert(y, p);
                stack.push((v, Which::Hw, from, prefix));
            }
            Origin::Copy(j) => {
                let q = d.gamma_children[vi][0];
                stack.push((q, Which::Gw, j, prefix));
            }
            Origin::Join(j1, j2) => {
                let (q1, q2) = (d.gamma_children[vi][0], d.gamma_children[vi][1]);
                let c1 = gws[q1 as usize].cells.get_index(j1).ok_or_else(lost)?.0;
                let mut p1 = HashMap::new();
                for &(t, _) in c1 {
                    if let Some(p) = prefix.remove(&t) {
                        p1.insert(t, p);
                    }
                }
                stack.push((q1, Which::Gw, j1, p1));
                stack.push((q2, Which::Gw, j2, prefix));
            }
        }
    }
    let mut out = SoftPseudoEmbedding::default();
    for (t, path) in phi {
        let head = d.tv[t as usize].clone();
        let tail = d.tv[d.t_parent[t as usize].ok_or_else(|| SolveError::Internal("root has no arc".into()))? as usize]
            .clone();
        out.phi.insert((tail, head), path.into_iter().map(|x| d.nv[x as usize].clone()).collect());
    }
    if out.phi.len() + 1 != d.tv.len() {
        return Err(SolveError::Internal(format!("witness covers {} of {} tree arcs", out.phi.len(), d.tv.len() - 1)));
    }
    Ok(out)
}

struct Auditor {
    /// Taxa below each extension vertex.
    gamma_taxa: Vec<BTreeSet<u32>>,
    /// Tree leaves below each tree vertex.
    t_below: Vec<BTreeSet<u32>>,
    t_anc: Vec<HashSet<u32>>,
}

impl Auditor {
    fn new(d: &Dense, ext: &TreeExtension) -> Self {
        let n = d.nv.len();
        let mut gamma_taxa = vec![BTreeSet::new(); n];
        for &v in &d.gamma_post {
            let vi = v as usize;
            if d.gamma_children[vi].is_empty() {
                if let Some(l) = ext.host().label(&d.nv[vi]) {
                    gamma_taxa[vi].insert(d.t_leaf_of_taxon[l]);
                }
            }
            let kids = d.gamma_children[vi].clone();
            for c in kids {
                let add = gamma_taxa[c as usize].clone();
                gamma_taxa[vi].extend(add);
            }
        }
        let m = d.tv.len();
        let mut t_below = vec![BTreeSet::new(); m];
        let mut t_anc = vec![HashSet::new(); m];
        for x in 0..m as u32 {
            let mut a = Some(x);
            while let Some(y) = a {
                t_anc[x as usize].insert(y);
                a = d.t_parent[y as usize];
            }
            if d.t_children[x as usize].is_empty() {
                for &y in &t_anc[x as usize] {
                    t_below[y as usize].insert(x);
                }
            }
        }
        Auditor { gamma_taxa, t_below, t_anc }
    }

    fn check(
        &self,
        d: &Dense,
        above: &dyn Fn(usize, usize) -> bool,
        v: usize,
        table: &Table,
        hw: bool,
        out: &mut Vec<String>,
    ) {
        let name = if hw { "HWS" } else { "GWS" };
        for cell in table.cells.keys() {
            // antichain: no top arc lies below another
            for &(a, _) in cell {
                for &(b, _) in cell {
                    if a != b && self.t_anc[b as usize].contains(&a) {
                        out.push(format!("{name} at {}: top arcs not an antichain", d.nv[v]));
                    }
                }
            }
            let mut leaves = BTreeSet::new();
            for &(a, _) in cell {
                leaves.extend(self.t_below[a as usize].iter().copied());
            }
            if leaves != self.gamma_taxa[v] {
                out.push(format!("{name} at {}: top arcs cover the wrong leaves", d.nv[v]));
            }
            let mut tail_of: HashMap<u32, Option<u32>> = HashMap::new();
            for &(a, b) in cell {
                let t = d.t_parent[a as usize];
                if *tail_of.entry(b).or_insert(t) != t {
                    out.push(format!("{name} at {}: one network arc carries arcs of two tails", d.nv[v]));
                }
                let (u, w) = (d.arc_tail[b as usize] as usize, d.arc_head[b as usize] as usize);
                let in_cut =
                    if hw { above(u, v) && w != v && above(v, w) } else { u != v && above(u, v) && above(v, w) };
                if !in_cut {
                    out.push(format!("{name} at {}: assignment leaves the cut", d.nv[v]));
                }
            }
        }
    }
}

/// Whether two paths are eventually arc-disjoint: arc-disjoint, or starting
/// at the same vertex and eventually arc-disjoint once it is removed.
pub fn eventually_arc_disjoint(p: &[VertexId], q: &[VertexId]) -> Result<bool, SolveError> {
    if p.len() < 2 || q.len() < 2 {
        return Err(SolveError::ZeroLengthPath);
    }
    let (mut p, mut q) = (p, q);
    loop {
        if p.len() < 2 || q.len() < 2 {
            return Ok(false);
        }
        let arcs: HashSet<(&VertexId, &VertexId)> = p.windows(2).map(|w| (&w[0], &w[1])).collect();
        if q.windows(2).all(|w| !arcs.contains(&(&w[0], &w[1]))) {
            return Ok(true);
        }
        if p[0] != q[0] {
            return Ok(false);
        }
        p = &p[1..];
        q = &q[1..];
    }
}

/// Checks the four embedding conditions for `phi` on the forest with arc set
/// `forest` of tree `t` into network `n`: paths chain head to tail, arcs with
/// different tails get arc-disjoint paths, arcs with a shared tail get
/// eventually arc-disjoint paths, and leaf arcs end at their leaf.
pub fn check_spe(
    phi: &SoftPseudoEmbedding,
    forest: &BTreeSet<ArcKey>,
    n: &Digraph,
    t: &Digraph,
) -> Result<bool, SolveError> {
    let domain: BTreeSet<ArcKey> = phi.phi.keys().cloned().collect();
    if &domain != forest {
        return Err(SolveError::DomainMismatch(format!("{} mapped arcs, {} forest arcs", domain.len(), forest.len())));
    }
    for path in phi.phi.values() {
        if path.len() < 2 || path.windows(2).any(|w| !n.has_arc(&w[0], &w[1])) {
            return Ok(false);
        }
    }
    // chaining
    for ((_, y), p) in &phi.phi {
        for z in t.children(y) {
            if let Some(q) = phi.phi.get(&(y.clone(), z.clone())) {
                if p.last() != q.first() {
                    return Ok(false);
                }
            }
        }
    }
    // arc-disjointness across tails
    let mut users: HashMap<(&VertexId, &VertexId), Vec<&ArcKey>> = HashMap::new();
    for (ta, p) in &phi.phi {
        for w in p.windows(2) {
            users.entry((&w[0], &w[1])).or_default().push(ta);
        }
    }
    for list in users.values() {
        for a in list {
            for b in list {
                if a.0 != b.0 {
                    return Ok(false);
                }
            }
        }
    }
    // eventual arc-disjointness for shared tails
    let mut by_tail: BTreeMap<&VertexId, Vec<&Vec<VertexId>>> = BTreeMap::new();
    for ((x, _), p) in &phi.phi {
        by_tail.entry(x).or_default().push(p);
    }
    for paths in by_tail.values() {
        for i in 0..paths.len() {
            for j in 0..i {
                if !eventually_arc_disjoint(paths[i], paths[j])? {
                    return Ok(false);
                }
            }
        }
    }
    // leaf anchoring
    for ((_, y), p) in &phi.phi {
        if let Some(taxon) = t.label(y) {
            if n.vertex_of_taxon(taxon) != p.last() {
                return Ok(false);
            }
        }
    }
    Ok(true)
}
