//! Preprocessing that turns an arbitrary instance into a binary network with
//! degree-1 roots, carrying the tree extension along.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::sync::Arc;

use thiserror::Error;

use crate::extension::{ExtensionError, ExtensionStep, TreeExtension};
use crate::graph::{ArcKey, Digraph, InvalidReason, PhyloClass, Rewrite, RewriteError, VertexId};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReductionError {
    #[error("network is invalid: {0}")]
    NotNetwork(InvalidReason),
    #[error("tree is invalid: {0}")]
    NotTree(String),
    #[error("taxa of the tree missing from the network: {}", .0.join(", "))]
    TaxaNotContained(Vec<String>),
    #[error("need at least 2 taxa to keep, got {0}")]
    TooFewTaxa(usize),
    #[error("cannot stretch {vertex}: out-degree {degree} < 3")]
    DegreeTooSmall { vertex: VertexId, degree: usize },
    #[error("in-splitting requires out-degree at most 2, but {vertex} has {degree}")]
    OutDegreeTooLarge { vertex: VertexId, degree: usize },
    #[error("extension does not belong to this network")]
    ForeignExtension,
    #[error("trace replay diverged: {0}")]
    ReplayDiverged(String),
    #[error(transparent)]
    Rewrite(#[from] RewriteError),
    #[error(transparent)]
    Extension(#[from] ExtensionError),
}

/// The vertices added when stretching one vertex of out-degree `d >= 3`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StretchGadget {
    pub center: VertexId,
    pub d: usize,
    /// `(i, j)` for `i` in `2..=d-1`, `j` in `1..=i`.
    pub u: BTreeMap<(usize, usize), VertexId>,
    /// `(i, j)` for `i` in `3..=d-1`, `j` in `2..=i-1`.
    pub u_prime: BTreeMap<(usize, usize), VertexId>,
    /// `j` in `2..=d-1`.
    pub u_last: BTreeMap<usize, VertexId>,
    /// `(i, j, k)` for `i, j` in `1..=d-1`, `k` in `1..=4`.
    pub w: BTreeMap<(usize, usize, usize), VertexId>,
    /// `c_1..c_d`, in sorted order.
    pub children: Vec<VertexId>,
}

impl StretchGadget {
    fn with_ids(center: VertexId, children: Vec<VertexId>, mut fresh: impl FnMut() -> VertexId) -> Self {
        let d = children.len();
        let mut g = StretchGadget {
            center,
            d,
            u: BTreeMap::new(),
            u_prime: BTreeMap::new(),
            u_last: BTreeMap::new(),
            w: BTreeMap::new(),
            children,
        };
        for i in 2..d {
            for j in 1..=i {
                g.u.insert((i, j), fresh());
            }
            for j in 2..i {
                g.u_prime.insert((i, j), fresh());
            }
        }
        for j in 2..d {
            g.u_last.insert(j, fresh());
        }
        for i in 1..d {
            for j in 1..d {
                for k in 1..=4 {
                    g.w.insert((i, j, k), fresh());
                }
            }
        }
        g
    }

    /// New vertices in the order they are inserted below the center in the
    /// tree extension: row by row `u` then `u'`, then the last `u` row, then
    /// all `w` lexicographically.
    pub fn extension_path(&self) -> Vec<VertexId> {
        let d = self.d;
        let mut out = Vec::with_capacity(self.vertex_count());
        for i in 2..d {
            out.extend((1..=i).map(|j| self.u[&(i, j)].clone()));
            if i >= 3 {
                out.extend((2..i).map(|j| self.u_prime[&(i, j)].clone()));
            }
        }
        out.extend((2..d).map(|j| self.u_last[&j].clone()));
        out.extend(self.w.values().cloned());
        out
    }

    pub fn vertex_count(&self) -> usize {
        self.u.len() + self.u_prime.len() + self.u_last.len() + self.w.len()
    }

    /// The gadget's arcs, replacing the center's out-arcs.
    pub fn arcs(&self) -> Vec<ArcKey> {
        let d = self.d;
        let u = |i: usize, j: usize| self.u[&(i, j)].clone();
        let up = |i: usize, j: usize| self.u_prime[&(i, j)].clone();
        let ul = |j: usize| self.u_last[&j].clone();
        let w = |i: usize, j: usize, k: usize| self.w[&(i, j, k)].clone();
        let c = |j: usize| self.children[j - 1].clone();
        let mut a = vec![(self.center.clone(), u(2, 1)), (self.center.clone(), u(2, 2))];
        for i in 2..=d.saturating_sub(2) {
            a.push((u(i, 1), u(i + 1, 1)));
            a.push((u(i, 1), u(i + 1, 2)));
            a.push((u(i, i), u(i + 1, i)));
            a.push((u(i, i), u(i + 1, i + 1)));
        }
        for i in 3..d {
            for j in 2..i {
                a.push((u(i, j), up(i, j)));
                // the row below u_{d-1,*} is the u_last row
                let below = |jj: usize| if i + 1 == d { ul(jj) } else { u(i + 1, jj) };
                a.push((up(i, j), below(j)));
                a.push((up(i, j), below(j + 1)));
            }
        }
        a.push((u(d - 1, 1), w(1, 1, 1)));
        a.push((u(d - 1, 1), ul(2)));
        a.push((u(d - 1, d - 1), ul(d - 1)));
        a.push((u(d - 1, d - 1), w(1, d - 1, 2)));
        for j in 2..d {
            a.push((ul(j), w(1, j - 1, 2)));
        }
        for i in 1..d {
            for j in 1..d {
                a.push((w(i, j, 1), w(i, j, 3)));
                a.push((w(i, j, 1), w(i, j, 4)));
                a.push((w(i, j, 2), w(i, j, 3)));
                a.push((w(i, j, 2), w(i, j, 4)));
            }
        }
        for i in 1..d {
            for j in 1..d - 1 {
                a.push((w(i, j, 4), w(i, j + 1, 1)));
            }
        }
        for i in 1..d - 1 {
            a.push((w(i, 1, 3), w(i + 1, 1, 1)));
            a.push((w(i, d - 1, 4), w(i + 1, d - 1, 2)));
            for j in 2..d {
                a.push((w(i, j, 3), w(i + 1, j - 1, 2)));
            }
        }
        for j in 1..d {
            a.push((w(d - 1, j, 3), c(j)));
        }
        a.push((w(d - 1, d - 1, 4), c(d)));
        a.sort();
        a.dedup();
        a
    }
}

/// Which instance a root was attached to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Network,
    Tree,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TraceStep {
    Prune { taxa: BTreeSet<String>, removed: Vec<VertexId> },
    Stretch(StretchGadget),
    InSplit { parents: [VertexId; 2], vertex: VertexId, new: VertexId },
    AttachRoot { side: Side, root: VertexId },
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ReductionTrace {
    pub steps: Vec<TraceStep>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WidthStepKind {
    Prune,
    Stretch { degree: usize },
    InSplit,
    AttachRoot,
    Canonicalize,
}

/// Extension width before and after one pipeline step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WidthRecord {
    pub kind: WidthStepKind,
    pub before: usize,
    pub after: usize,
}

#[derive(Debug, Clone)]
pub struct AugmentedInstance {
    pub network: Arc<Digraph>,
    pub tree: Digraph,
    pub extension: TreeExtension,
    pub trace: ReductionTrace,
    pub widths: Vec<WidthRecord>,
    pub rho_n: VertexId,
    pub rho_t: VertexId,
}

fn require_network(n: &Digraph) -> Result<(), ReductionError> {
    match n.classify() {
        PhyloClass::Tree | PhyloClass::Network => Ok(()),
        PhyloClass::Invalid(r) => Err(ReductionError::NotNetwork(r)),
        PhyloClass::DegreeOneRoot => {
            Err(ReductionError::NotNetwork(InvalidReason::RootOutDegree { root: n.root().unwrap(), degree: 1 }))
        }
    }
}

/// Replaces the out-arcs of `v` by a stretch gadget.
pub fn stretch_vertex(n: &Digraph, v: &VertexId) -> Result<(Digraph, StretchGadget), ReductionError> {
    let mut out = n.clone();
    let gadget = stretch_in_place(&mut out, v)?;
    Ok((out, gadget))
}

fn stretch_in_place(n: &mut Digraph, v: &VertexId) -> Result<StretchGadget, ReductionError> {
    let degree = n.out_degree(v);
    if degree < 3 {
        return Err(ReductionError::DegreeTooSmall { vertex: v.clone(), degree });
    }
    let children: Vec<VertexId> = n.children(v).iter().cloned().collect();
    let gadget = StretchGadget::with_ids(v.clone(), children, || n.fresh_id());
    apply_gadget(n, &gadget);
    Ok(gadget)
}

fn apply_gadget(n: &mut Digraph, gadget: &StretchGadget) {
    for c in &gadget.children {
        n.remove_arc(&gadget.center, c);
    }
    for (a, b) in gadget.arcs() {
        n.insert_arc(&a, &b);
    }
}

/// Stretches every vertex of out-degree at least 3, in sorted order.
pub fn stretch_network(n: &Digraph) -> Result<(Digraph, Vec<StretchGadget>), ReductionError> {
    require_network(n)?;
    let mut out = n.clone();
    let targets: Vec<VertexId> = n.vertices().filter(|v| n.out_degree(v) >= 3).cloned().collect();
    let mut gadgets = Vec::with_capacity(targets.len());
    for v in targets {
        gadgets.push(stretch_in_place(&mut out, &v)?);
    }
    Ok((out, gadgets))
}

/// One in-split: `new` takes over `parents` of `vertex`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InSplitRecord {
    pub parents: [VertexId; 2],
    pub vertex: VertexId,
    pub new: VertexId,
}

/// Resolves every reticulation of in-degree `k >= 3` as a caterpillar: the two
/// smallest parents are split off first, then the previous new vertex is
/// paired with the next parent in sorted order.
pub fn make_binary_in(n: &Digraph) -> Result<(Digraph, Vec<InSplitRecord>), ReductionError> {
    let mut out = n.clone();
    let records = in_split_all(&mut out)?.into_iter().map(|(r, _)| r).collect();
    Ok((out, records))
}

/// Restricts `n` to the taxa in `keep`: repeatedly deletes vertices that reach
/// no kept leaf, suppresses in-1/out-1 vertices (collapsing duplicate arcs)
/// and drops an out-degree-1 root, until nothing changes.
pub fn prune_to_leafset(n: &Digraph, keep: &BTreeSet<String>) -> Result<(Digraph, Vec<VertexId>), ReductionError> {
    let taxa = n.taxa();
    let missing: Vec<String> = keep.difference(&taxa).cloned().collect();
    if !missing.is_empty() {
        return Err(ReductionError::TaxaNotContained(missing));
    }
    if keep.len() < 2 {
        return Err(ReductionError::TooFewTaxa(keep.len()));
    }
    let mut g = n.clone();
    let mut removed = Vec::new();
    loop {
        let mut changed = false;

        let mut alive: BTreeSet<VertexId> = BTreeSet::new();
        let mut queue: VecDeque<VertexId> = keep.iter().map(|t| g.vertex_of_taxon(t).unwrap().clone()).collect();
        alive.extend(queue.iter().cloned());
        while let Some(x) = queue.pop_front() {
            for p in g.parents(&x) {
                if alive.insert(p.clone()) {
                    queue.push_back(p.clone());
                }
            }
        }
        let dead: Vec<VertexId> = g.vertices().filter(|v| !alive.contains(*v)).cloned().collect();
        for v in dead {
            g.remove_vertex(&v);
            removed.push(v);
            changed = true;
        }

        let unary: Vec<VertexId> =
            g.vertices().filter(|v| g.in_degree(v) == 1 && g.out_degree(v) == 1).cloned().collect();
        for v in unary {
            // an earlier suppression in this pass may have changed degrees
            if g.in_degree(&v) == 1 && g.out_degree(&v) == 1 {
                g.apply(&Rewrite::Suppress(v.clone()))?;
                removed.push(v);
                changed = true;
            }
        }

        if let Some(r) = g.root() {
            if g.out_degree(&r) == 1 {
                g.remove_vertex(&r);
                removed.push(r);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    require_network(&g)?;
    Ok((g, removed))
}

fn log_width(widths: &mut Vec<WidthRecord>, kind: WidthStepKind, before: usize, ext: &TreeExtension) {
    widths.push(WidthRecord { kind, before, after: ext.width() });
}

/// Full preprocessing: prune to the tree's taxa, stretch, in-split, attach
/// degree-1 roots, and canonicalize the extension. Without a supplied
/// extension the default one is used.
pub fn preprocess(
    n: &Digraph,
    t: &Digraph,
    gamma: Option<&TreeExtension>,
) -> Result<AugmentedInstance, ReductionError> {
    require_network(n)?;
    if t.classify() != PhyloClass::Tree {
        let why = match t.classify() {
            PhyloClass::Invalid(r) => r.to_string(),
            other => format!("{other:?}"),
        };
        return Err(ReductionError::NotTree(why));
    }
    let keep = t.taxa();
    let missing: Vec<String> = keep.difference(&n.taxa()).cloned().collect();
    if !missing.is_empty() {
        return Err(ReductionError::TaxaNotContained(missing));
    }
    let mut ext = match gamma {
        Some(g) if **g.host() == *n => g.clone(),
        Some(_) => return Err(ReductionError::ForeignExtension),
        None => crate::extension::default_extension(Arc::new(n.clone()))?,
    };
    let mut trace = ReductionTrace::default();
    let mut widths = Vec::new();
    let mut net = n.clone();

    if keep != net.taxa() {
        let (pruned, removed) = prune_to_leafset(&net, &keep)?;
        net = pruned;
        let survivors: BTreeSet<VertexId> = net.vertices().cloned().collect();
        let before = ext.width();
        ext = ext.update_extension(&ExtensionStep::Restrict(survivors), Arc::new(net.clone()))?;
        log_width(&mut widths, WidthStepKind::Prune, before, &ext);
        trace.steps.push(TraceStep::Prune { taxa: keep.clone(), removed });
    }

    let targets: Vec<VertexId> = net.vertices().filter(|v| net.out_degree(v) >= 3).cloned().collect();
    for v in targets {
        let gadget = stretch_in_place(&mut net, &v)?;
        let before = ext.width();
        ext = ext.update_extension(
            &ExtensionStep::Stretch { center: v.clone(), path: gadget.extension_path() },
            Arc::new(net.clone()),
        )?;
        log_width(&mut widths, WidthStepKind::Stretch { degree: gadget.d }, before, &ext);
        trace.steps.push(TraceStep::Stretch(gadget));
    }

    for rec in in_split_all(&mut net)? {
        let before = ext.width();
        let snapshot = Arc::new(rec.1);
        ext = ext.update_extension(
            &ExtensionStep::InSplit { vertex: rec.0.vertex.clone(), new: rec.0.new.clone() },
            snapshot,
        )?;
        log_width(&mut widths, WidthStepKind::InSplit, before, &ext);
        trace.steps.push(TraceStep::InSplit {
            parents: rec.0.parents.clone(),
            vertex: rec.0.vertex.clone(),
            new: rec.0.new.clone(),
        });
    }

    let old_root = net.root().expect("network is rooted");
    let rho_n = net.fresh_id();
    net.insert_arc(&rho_n, &old_root);
    let before = ext.width();
    let net = Arc::new(net);
    ext = ext.update_extension(&ExtensionStep::AttachRoot(rho_n.clone()), net.clone())?;
    log_width(&mut widths, WidthStepKind::AttachRoot, before, &ext);
    trace.steps.push(TraceStep::AttachRoot { side: Side::Network, root: rho_n.clone() });

    let mut tree = t.clone();
    let t_root = tree.root().expect("tree is rooted");
    let rho_t = tree.fresh_id();
    tree.insert_arc(&rho_t, &t_root);
    trace.steps.push(TraceStep::AttachRoot { side: Side::Tree, root: rho_t.clone() });

    let before = ext.width();
    ext = ext.canonicalize()?;
    log_width(&mut widths, WidthStepKind::Canonicalize, before, &ext);

    Ok(AugmentedInstance { network: net, tree, extension: ext, trace, widths, rho_n, rho_t })
}

// In-splits one at a time, returning each record with the host right after it.
fn in_split_all(n: &mut Digraph) -> Result<Vec<(InSplitRecord, Digraph)>, ReductionError> {
    if let Some(v) = n.vertices().find(|v| n.out_degree(v) > 2) {
        return Err(ReductionError::OutDegreeTooLarge { vertex: v.clone(), degree: n.out_degree(v) });
    }
    let mut out = Vec::new();
    let targets: Vec<VertexId> = n.vertices().filter(|v| n.in_degree(v) >= 3).cloned().collect();
    for v in targets {
        let parents: Vec<VertexId> = n.parents(&v).iter().cloned().collect();
        let mut acc = parents[0].clone();
        for p in &parents[1..parents.len() - 1] {
            let pair = [acc.clone(), p.clone()];
            let new = n
                .apply(&Rewrite::InSplit { vertex: v.clone(), parents: pair.clone(), new: None })?
                .expect("in-split creates a vertex");
            out.push((InSplitRecord { parents: pair, vertex: v.clone(), new: new.clone() }, n.clone()));
            acc = new;
        }
    }
    Ok(out)
}

/// Replays `trace` on the original instance and returns the reduced network
/// and tree.
pub fn replay(trace: &ReductionTrace, n: &Digraph, t: &Digraph) -> Result<(Digraph, Digraph), ReductionError> {
    let mut net = n.clone();
    let mut tree = t.clone();
    for step in &trace.steps {
        match step {
            TraceStep::Prune { taxa, removed } => {
                let (pruned, again) = prune_to_leafset(&net, taxa)?;
                if &again != removed {
                    return Err(ReductionError::ReplayDiverged("pruning removed different vertices".into()));
                }
                net = pruned;
            }
            TraceStep::Stretch(g) => {
                let kids: Vec<VertexId> = net.children(&g.center).iter().cloned().collect();
                if kids != g.children {
                    return Err(ReductionError::ReplayDiverged(format!("children of {} differ", g.center)));
                }
                for v in g.extension_path() {
                    if net.contains_vertex(&v) {
                        return Err(ReductionError::ReplayDiverged(format!("{v} already present")));
                    }
                }
                apply_gadget(&mut net, g);
            }
            TraceStep::InSplit { parents, vertex, new } => {
                net.apply(&Rewrite::InSplit {
                    vertex: vertex.clone(),
                    parents: parents.clone(),
                    new: Some(new.clone()),
                })?;
            }
            TraceStep::AttachRoot { side, root } => {
                let g = match side {
                    Side::Network => &mut net,
                    Side::Tree => &mut tree,
                };
                let old = g.root().ok_or_else(|| ReductionError::ReplayDiverged("no unique root".into()))?;
                if g.contains_vertex(root) {
                    return Err(ReductionError::ReplayDiverged(format!("{root} already present")));
                }
                g.insert_arc(root, &old);
            }
        }
    }
    Ok((net, tree))
}
