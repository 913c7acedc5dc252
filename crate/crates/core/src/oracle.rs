//! Exhaustive reference answers for firm and soft display on small instances.

use std::collections::{BTreeSet, HashMap, HashSet};

use thiserror::Error;

use crate::canon::CodeBook;
use crate::graph::{ArcKey, Digraph, PhyloClass, VertexId};

/// Environment variable that overrides the default arc cap.
pub const CAP_ENV: &str = "STC_ORACLE_CAP";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleConfig {
    /// Largest network (in arcs) the oracle accepts.
    pub max_arcs: usize,
    /// Largest number of binary resolutions enumerated per graph.
    pub max_resolutions: u64,
    /// Largest number of partial switchings visited per resolved network.
    pub max_search_nodes: u64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig { max_arcs: 16, max_resolutions: 1 << 20, max_search_nodes: 1 << 24 }
    }
}

impl OracleConfig {
    /// Default caps, with the arc cap taken from `STC_ORACLE_CAP` if set.
    pub fn from_env() -> Self {
        let mut cfg = Self::default();
        if let Some(cap) = std::env::var(CAP_ENV).ok().and_then(|s| s.trim().parse().ok()) {
            cfg.max_arcs = cap;
        }
        cfg
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("oracle too large: {what} is {size}, cap is {cap}")]
    TooLarge { what: &'static str, size: u64, cap: u64 },
    #[error("not a network: {0}")]
    NotNetwork(String),
    #[error("not a tree: {0}")]
    NotTree(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResolutionMode {
    In,
    Out,
    Both,
}

fn require_network(n: &Digraph) -> Result<(), OracleError> {
    match n.classify() {
        PhyloClass::Invalid(r) => Err(OracleError::NotNetwork(r.to_string())),
        _ => Ok(()),
    }
}

fn require_tree(t: &Digraph) -> Result<(), OracleError> {
    match t.classify() {
        PhyloClass::Tree => Ok(()),
        PhyloClass::Invalid(r) => Err(OracleError::NotTree(r.to_string())),
        other => Err(OracleError::NotTree(format!("{other:?}"))),
    }
}

fn check_arcs(n: &Digraph, cfg: &OracleConfig) -> Result<(), OracleError> {
    if n.arc_count() > cfg.max_arcs {
        return Err(OracleError::TooLarge {
            what: "network arc count",
            size: n.arc_count() as u64,
            cap: cfg.max_arcs as u64,
        });
    }
    Ok(())
}

/// Dense view of a DAG for switching search.
struct Switchable {
    children: Vec<Vec<usize>>,
    /// Reticulations with their parents, deepest first.
    rets: Vec<(usize, Vec<usize>)>,
    /// `groups[k]` holds the vertices whose cluster is fixed once the first
    /// `k` reticulations have chosen a parent, deepest first.
    groups: Vec<Vec<usize>>,
    leaf_taxon: Vec<Option<String>>,
}

impl Switchable {
    fn new(n: &Digraph) -> Self {
        let order = n.topological_order().expect("acyclic");
        let idx: HashMap<&VertexId, usize> = order.iter().enumerate().map(|(i, v)| (v, i)).collect();
        let children: Vec<Vec<usize>> = order.iter().map(|v| n.children(v).iter().map(|c| idx[c]).collect()).collect();
        let mut rets: Vec<(usize, Vec<usize>)> = order
            .iter()
            .enumerate()
            .filter(|(_, v)| n.in_degree(v) >= 2)
            .map(|(i, v)| (i, n.parents(v).iter().map(|p| idx[p]).collect()))
            .collect();
        rets.reverse();
        let mut pos = vec![0usize; order.len()];
        for (k, (r, _)) in rets.iter().enumerate() {
            pos[*r] = k + 1;
        }
        let mut dep = vec![0usize; order.len()];
        let mut groups = vec![Vec::new(); rets.len() + 1];
        for v in (0..order.len()).rev() {
            dep[v] = children[v].iter().map(|&c| dep[c].max(pos[c])).max().unwrap_or(0);
            groups[dep[v]].push(v);
        }
        let leaf_taxon = order.iter().map(|v| n.label(v).map(str::to_string)).collect();
        Switchable { children, rets, groups, leaf_taxon }
    }

    /// Searches the switchings of the network for one whose tree, restricted
    /// to `taxa` with unary vertices passed through, has a root code accepted
    /// by `visit`. A partial switching is abandoned as soon as some vertex
    /// gets a nonempty cluster rejected by `cluster_ok`; every cluster of the
    /// restricted tree is such a vertex cluster.
    fn search(
        &self,
        taxa: &BTreeSet<String>,
        cluster_ok: &dyn Fn(u128) -> bool,
        book: &mut CodeBook,
        budget: u64,
        visit: &mut dyn FnMut(u32) -> bool,
    ) -> Result<bool, OracleError> {
        let bit: HashMap<&String, u128> = taxa.iter().enumerate().map(|(i, t)| (t, 1u128 << i)).collect();
        let n = self.children.len();
        let mut st = SearchState {
            leaf_mask: self
                .leaf_taxon
                .iter()
                .map(|t| t.as_ref().and_then(|t| bit.get(t)).copied().unwrap_or(0))
                .collect(),
            leaf_code: self
                .leaf_taxon
                .iter()
                .map(|t| t.as_ref().filter(|t| taxa.contains(*t)).map(|t| book.leaf(t)))
                .collect(),
            chosen: vec![usize::MAX; n],
            mask: vec![0; n],
            code: vec![None; n],
            nodes: 0,
            budget,
        };
        self.descend(0, &mut st, cluster_ok, book, visit)
    }

    fn descend(
        &self,
        k: usize,
        st: &mut SearchState,
        cluster_ok: &dyn Fn(u128) -> bool,
        book: &mut CodeBook,
        visit: &mut dyn FnMut(u32) -> bool,
    ) -> Result<bool, OracleError> {
        st.nodes += 1;
        if st.nodes > st.budget {
            return Err(OracleError::TooLarge { what: "switching search nodes", size: st.nodes, cap: st.budget });
        }
        for &v in &self.groups[k] {
            let mut m = st.leaf_mask[v];
            for &c in &self.children[v] {
                if st.chosen[c] == usize::MAX || st.chosen[c] == v {
                    m |= st.mask[c];
                }
            }
            if m != 0 && !cluster_ok(m) {
                return Ok(false);
            }
            st.mask[v] = m;
        }
        if k == self.rets.len() {
            return Ok(visit(self.root_code(st, book)?));
        }
        let (r, parents) = &self.rets[k];
        for &p in parents {
            st.chosen[*r] = p;
            if self.descend(k + 1, st, cluster_ok, book, visit)? {
                return Ok(true);
            }
        }
        st.chosen[*r] = usize::MAX;
        Ok(false)
    }

    fn root_code(&self, st: &mut SearchState, book: &mut CodeBook) -> Result<u32, OracleError> {
        let mut kids: Vec<u32> = Vec::new();
        for v in (0..self.children.len()).rev() {
            if self.children[v].is_empty() {
                st.code[v] = st.leaf_code[v];
                continue;
            }
            kids.clear();
            for &c in &self.children[v] {
                if st.chosen[c] != usize::MAX && st.chosen[c] != v {
                    continue;
                }
                if let Some(x) = st.code[c] {
                    kids.push(x);
                }
            }
            st.code[v] = match kids.len() {
                0 => None,
                1 => Some(kids[0]),
                _ => Some(book.inner(kids.clone())),
            };
        }
        Ok(st.code[0].unwrap_or(u32::MAX))
    }
}

struct SearchState {
    leaf_mask: Vec<u128>,
    leaf_code: Vec<Option<u32>>,
    chosen: Vec<usize>,
    mask: Vec<u128>,
    code: Vec<Option<u32>>,
    nodes: u64,
    budget: u64,
}

/// Leaf-set bitmasks of the clusters of `t`, with taxa numbered in sorted order.
fn tree_clusters(t: &Digraph, taxa: &BTreeSet<String>) -> Result<Vec<u128>, OracleError> {
    if taxa.len() > 128 {
        return Err(OracleError::TooLarge { what: "tree taxa", size: taxa.len() as u64, cap: 128 });
    }
    let bit: HashMap<&str, u128> = taxa.iter().enumerate().map(|(i, t)| (t.as_str(), 1u128 << i)).collect();
    let mut mask: HashMap<&VertexId, u128> = HashMap::new();
    let order = t.topological_order().expect("trees are acyclic");
    for v in order.iter().rev() {
        let m = t.label(v).map_or(0, |l| bit[l]) | t.children(v).iter().map(|c| mask[c]).fold(0, |a, b| a | b);
        mask.insert(v, m);
    }
    Ok(order.iter().map(|v| mask[v]).collect())
}

/// Whether `n` firmly displays `t`.
///
/// A subdivision of `t` inside `n` selects at most one in-arc per
/// reticulation, so it lives inside the tree of some switching; conversely
/// the switching tree restricted to the leaves of `t` with unary vertices
/// suppressed is such a subdivision. Each switching is checked by comparing
/// canonical codes.
pub fn firm_display(n: &Digraph, t: &Digraph, cfg: &OracleConfig) -> Result<bool, OracleError> {
    require_network(n)?;
    require_tree(t)?;
    check_arcs(n, cfg)?;
    let taxa = t.taxa();
    if !taxa.is_subset(&n.taxa()) {
        return Ok(false);
    }
    let clusters: HashSet<u128> = tree_clusters(t, &taxa)?.into_iter().collect();
    let mut book = CodeBook::new();
    let target = book.tree_code(t, &t.root().unwrap(), false);
    Switchable::new(n).search(&taxa, &|m| clusters.contains(&m), &mut book, cfg.max_search_nodes, &mut |c| c == target)
}

/// Literal search over arc subsets: some subset forms an out-tree whose leaves
/// are leaves of `n` carrying exactly the taxa of `t`, whose root branches,
/// and which becomes leaf-isomorphic to `t` after suppressing unary vertices.
pub fn firm_display_by_subsets(n: &Digraph, t: &Digraph, cfg: &OracleConfig) -> Result<bool, OracleError> {
    require_network(n)?;
    require_tree(t)?;
    check_arcs(n, cfg)?;
    let taxa = t.taxa();
    if !taxa.is_subset(&n.taxa()) {
        return Ok(false);
    }
    let arcs: Vec<ArcKey> = n.arcs().collect();
    let mut book = CodeBook::new();
    let target = book.tree_code(t, &t.root().unwrap(), false);
    let mut chosen = Vec::new();
    let mut indeg: HashMap<VertexId, usize> = HashMap::new();
    Ok(subset_dfs(n, &arcs, 0, &mut chosen, &mut indeg, &taxa, &mut book, target))
}

#[allow(clippy::too_many_arguments)]
fn subset_dfs(
    n: &Digraph,
    arcs: &[ArcKey],
    at: usize,
    chosen: &mut Vec<ArcKey>,
    indeg: &mut HashMap<VertexId, usize>,
    taxa: &BTreeSet<String>,
    book: &mut CodeBook,
    target: u32,
) -> bool {
    if at == arcs.len() {
        return subset_matches(n, chosen, taxa, book, target);
    }
    if subset_dfs(n, arcs, at + 1, chosen, indeg, taxa, book, target) {
        return true;
    }
    let (u, v) = &arcs[at];
    // a subdivided tree never gives a vertex two parents
    if indeg.get(v).copied().unwrap_or(0) == 0 {
        indeg.insert(v.clone(), 1);
        chosen.push((u.clone(), v.clone()));
        let hit = subset_dfs(n, arcs, at + 1, chosen, indeg, taxa, book, target);
        chosen.pop();
        indeg.insert(v.clone(), 0);
        if hit {
            return true;
        }
    }
    false
}

fn subset_matches(n: &Digraph, chosen: &[ArcKey], taxa: &BTreeSet<String>, book: &mut CodeBook, target: u32) -> bool {
    if chosen.is_empty() {
        return false;
    }
    let mut sub = Digraph::new();
    for (u, v) in chosen {
        sub.insert_arc(u, v);
    }
    let Some(root) = sub.root() else {
        return false;
    };
    if sub.arc_count() + 1 != sub.vertex_count() || sub.out_degree(&root) < 2 {
        return false;
    }
    let mut seen = BTreeSet::new();
    for leaf in sub.leaves() {
        match n.label(&leaf) {
            Some(t) if n.out_degree(&leaf) == 0 && taxa.contains(t) => {
                seen.insert(t.to_string());
                sub.set_label(leaf, t).unwrap();
            }
            _ => return false,
        }
    }
    if &seen != taxa {
        return false;
    }
    book.tree_code(&sub, &root, true) == target
}

/// A rooted binary tree over neighbour indices `0..d`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Shape {
    Leaf(usize),
    Node(Box<Shape>, Box<Shape>),
}

impl Shape {
    fn insert_everywhere(&self, k: usize, out: &mut Vec<Shape>) {
        out.push(Shape::Node(Box::new(self.clone()), Box::new(Shape::Leaf(k))));
        if let Shape::Node(a, b) = self {
            let mut left = Vec::new();
            a.insert_everywhere(k, &mut left);
            out.extend(left.into_iter().map(|x| Shape::Node(Box::new(x), b.clone())));
            let mut right = Vec::new();
            b.insert_everywhere(k, &mut right);
            out.extend(right.into_iter().map(|x| Shape::Node(a.clone(), Box::new(x))));
        }
    }
}

/// All `(2d-3)!!` distinct rooted binary shapes with leaves `0..d`, `d >= 2`.
pub fn binary_shapes(d: usize) -> Vec<Shape> {
    assert!(d >= 2);
    let mut shapes = vec![Shape::Node(Box::new(Shape::Leaf(0)), Box::new(Shape::Leaf(1)))];
    for k in 2..d {
        let mut next = Vec::new();
        for s in &shapes {
            s.insert_everywhere(k, &mut next);
        }
        shapes = next;
    }
    shapes
}

// Builds `shape` at `v`: the shape's root is `v`, its leaves are `nbrs`.
fn apply_shape(g: &mut Digraph, v: &VertexId, nbrs: &[VertexId], shape: &Shape, outward: bool) {
    for x in nbrs {
        if outward {
            g.remove_arc(v, x);
        } else {
            g.remove_arc(x, v);
        }
    }
    let mut stack = vec![(v.clone(), shape)];
    while let Some((at, s)) = stack.pop() {
        let Shape::Node(a, b) = s else { unreachable!() };
        for sub in [a.as_ref(), b.as_ref()] {
            let target = match sub {
                Shape::Leaf(i) => nbrs[*i].clone(),
                Shape::Node(..) => {
                    let x = g.fresh_id();
                    stack.push((x.clone(), sub));
                    x
                }
            };
            if outward {
                g.insert_arc(&at, &target);
            } else {
                g.insert_arc(&target, &at);
            }
        }
    }
}

struct Site {
    vertex: VertexId,
    nbrs: Vec<VertexId>,
    shapes: Vec<Shape>,
}

fn sites(g: &Digraph, outward: bool) -> Vec<Site> {
    g.vertices()
        .filter_map(|v| {
            let nbrs: Vec<VertexId> = if outward { g.children(v) } else { g.parents(v) }.iter().cloned().collect();
            (nbrs.len() >= 3).then(|| Site { vertex: v.clone(), shapes: binary_shapes(nbrs.len()), nbrs })
        })
        .collect()
}

fn count(sites: &[Site]) -> u64 {
    sites.iter().fold(1u64, |a, s| a.saturating_mul(s.shapes.len() as u64))
}

/// Iterates over every binary resolution of one mode.
struct OneMode {
    base: Digraph,
    sites: Vec<Site>,
    outward: bool,
    digits: Vec<usize>,
    done: bool,
}

impl OneMode {
    fn new(base: Digraph, outward: bool) -> Self {
        let sites = sites(&base, outward);
        OneMode { digits: vec![0; sites.len()], base, sites, outward, done: false }
    }
}

impl Iterator for OneMode {
    type Item = Digraph;

    fn next(&mut self) -> Option<Digraph> {
        if self.done {
            return None;
        }
        let mut g = self.base.clone();
        for (s, &d) in self.sites.iter().zip(&self.digits) {
            apply_shape(&mut g, &s.vertex, &s.nbrs, &s.shapes[d], self.outward);
        }
        let mut k = 0;
        loop {
            if k == self.digits.len() {
                self.done = true;
                break;
            }
            self.digits[k] += 1;
            if self.digits[k] < self.sites[k].shapes.len() {
                break;
            }
            self.digits[k] = 0;
            k += 1;
        }
        Some(g)
    }
}

/// Lazily enumerated binary resolutions.
pub struct Resolutions {
    outer: OneMode,
    inner: Option<OneMode>,
    mode: ResolutionMode,
}

impl Iterator for Resolutions {
    type Item = Digraph;

    fn next(&mut self) -> Option<Digraph> {
        match self.mode {
            ResolutionMode::In | ResolutionMode::Out => self.outer.next(),
            ResolutionMode::Both => loop {
                if let Some(g) = self.inner.as_mut().and_then(Iterator::next) {
                    return Some(g);
                }
                let in_res = self.outer.next()?;
                self.inner = Some(OneMode::new(in_res, true));
            },
        }
    }
}

/// Binary resolutions of `n`. For `Both`, every in-resolution is produced
/// first and then each of its out-resolutions is yielded.
pub fn enumerate_resolutions(
    n: &Digraph,
    mode: ResolutionMode,
    cfg: &OracleConfig,
) -> Result<Resolutions, OracleError> {
    require_network(n)?;
    let total = match mode {
        ResolutionMode::In => count(&sites(n, false)),
        ResolutionMode::Out => count(&sites(n, true)),
        // in-splitting leaves out-degrees untouched
        ResolutionMode::Both => count(&sites(n, false)).saturating_mul(count(&sites(n, true))),
    };
    if total > cfg.max_resolutions {
        return Err(OracleError::TooLarge { what: "resolution count", size: total, cap: cfg.max_resolutions });
    }
    let outer = OneMode::new(n.clone(), mode == ResolutionMode::Out);
    Ok(Resolutions { outer, inner: None, mode })
}

/// Whether some binary resolution of `n` firmly displays some binary
/// resolution of `t`. False when the taxa of `t` are not all in `n`.
pub fn soft_display(n: &Digraph, t: &Digraph, cfg: &OracleConfig) -> Result<bool, OracleError> {
    require_network(n)?;
    require_tree(t)?;
    check_arcs(n, cfg)?;
    let taxa = t.taxa();
    if !taxa.is_subset(&n.taxa()) {
        return Ok(false);
    }
    let mut book = CodeBook::new();
    let mut targets = HashSet::new();
    for tr in enumerate_resolutions(t, ResolutionMode::Out, cfg)? {
        targets.insert(book.tree_code(&tr, &tr.root().unwrap(), false));
    }
    // a cluster of a resolution of t is compatible with every cluster of t
    let clusters = tree_clusters(t, &taxa)?;
    let compatible = |m: u128| clusters.iter().all(|&c| m & c == 0 || m & c == m || m & c == c);
    for nr in enumerate_resolutions(n, ResolutionMode::Both, cfg)? {
        let hit = Switchable::new(&nr)
            .search(&taxa, &compatible, &mut book, cfg.max_search_nodes, &mut |c| targets.contains(&c))?;
        if hit {
            return Ok(true);
        }
    }
    Ok(false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{arc, tree_leaf_isomorphic};

    fn labeled(arcs: &[(&str, &str)]) -> Digraph {
        let mut g = Digraph::from_arcs(arcs.iter().map(|(a, b)| arc(*a, *b)), []).unwrap();
        for l in g.leaves() {
            let name = l.as_str().to_string();
            g.set_label(l, name).unwrap();
        }
        g
    }

    fn sample_net() -> Digraph {
        labeled(&[
            ("rho", "s"),
            ("rho", "t"),
            ("s", "p"),
            ("s", "r"),
            ("p", "a"),
            ("p", "b"),
            ("r", "c"),
            ("t", "r"),
            ("t", "d"),
        ])
    }

    fn t_b() -> Digraph {
        labeled(&[("R", "x1"), ("R", "d"), ("x1", "x2"), ("x1", "c"), ("x2", "a"), ("x2", "b")])
    }

    fn t_c() -> Digraph {
        labeled(&[("R", "y1"), ("R", "d"), ("y1", "a"), ("y1", "y2"), ("y2", "b"), ("y2", "c")])
    }

    fn t_d() -> Digraph {
        labeled(&[("R", "z"), ("R", "d"), ("z", "a"), ("z", "b"), ("z", "c")])
    }

    #[test]
    fn sample_network_firm() {
        let cfg = OracleConfig::default();
        assert!(firm_display(&sample_net(), &t_b(), &cfg).unwrap());
        assert!(!firm_display(&sample_net(), &t_c(), &cfg).unwrap());
        assert!(firm_display_by_subsets(&sample_net(), &t_b(), &cfg).unwrap());
        assert!(!firm_display_by_subsets(&sample_net(), &t_c(), &cfg).unwrap());
        let t = t_b();
        assert!(firm_display(&t, &t, &cfg).unwrap());
    }

    #[test]
    fn sample_network_soft() {
        let cfg = OracleConfig::default();
        assert!(soft_display(&sample_net(), &t_d(), &cfg).unwrap());
        assert!(!soft_display(&sample_net(), &t_c(), &cfg).unwrap());
        // T_D has a polytomy, so it is not firmly displayed by a binary network
        assert!(!firm_display(&sample_net(), &t_d(), &cfg).unwrap());
        let foreign = labeled(&[("R", "a"), ("R", "q")]);
        assert!(!soft_display(&sample_net(), &foreign, &cfg).unwrap());
    }

    #[test]
    fn shape_counts() {
        assert_eq!(binary_shapes(2).len(), 1);
        assert_eq!(binary_shapes(3).len(), 3);
        assert_eq!(binary_shapes(4).len(), 15);
        assert_eq!(binary_shapes(5).len(), 105);
    }

    #[test]
    fn out_resolutions_of_a_triple() {
        let cfg = OracleConfig::default();
        let res: Vec<_> = enumerate_resolutions(&t_d(), ResolutionMode::Out, &cfg).unwrap().collect();
        assert_eq!(res.len(), 3);
        for i in 0..3 {
            assert!(res[i].is_binary());
            for j in 0..i {
                assert!(!tree_leaf_isomorphic(&res[i], &res[j]).unwrap());
            }
        }
        assert!(res.iter().any(|r| tree_leaf_isomorphic(r, &t_b()).unwrap()));
        let single: Vec<_> = enumerate_resolutions(&sample_net(), ResolutionMode::Both, &cfg).unwrap().collect();
        assert_eq!(single, vec![sample_net()]);
    }

    #[test]
    fn caps_are_enforced() {
        let cfg = OracleConfig { max_arcs: 4, ..OracleConfig::default() };
        assert!(matches!(firm_display(&sample_net(), &t_b(), &cfg), Err(OracleError::TooLarge { .. })));
        let cfg = OracleConfig { max_resolutions: 2, ..OracleConfig::default() };
        assert!(enumerate_resolutions(&t_d(), ResolutionMode::Out, &cfg).is_err());
    }
}
