//! Tree extensions: validation, scan cuts, width and canonicalization.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::graph::{ArcKey, Digraph, VertexId};

/// One violated clause of the tree-extension definition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    MissingVertex(VertexId),
    ExtraVertex(VertexId),
    SeveralParents(VertexId),
    RootCount(usize),
    Unreachable(VertexId),
    ArcNotContained(VertexId, VertexId),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::MissingVertex(v) => write!(f, "host vertex {v} is missing from the extension"),
            Violation::ExtraVertex(v) => write!(f, "vertex {v} is not a host vertex"),
            Violation::SeveralParents(v) => write!(f, "not an out-tree: {v} has several parents"),
            Violation::RootCount(n) => write!(f, "not an out-tree: {n} roots"),
            Violation::Unreachable(v) => write!(f, "not an out-tree: {v} is not below the root"),
            Violation::ArcNotContained(u, v) => {
                write!(f, "host arc ({u}, {v}) is not contained in the extension's reachability")
            }
        }
    }
}

/// One violated canonicality clause.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CanonViolation {
    Invalid(Violation),
    Disconnected(VertexId),
    LeafMismatch(VertexId),
    OutDegree(VertexId),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExtensionError {
    #[error("unknown vertex {0}")]
    UnknownVertex(VertexId),
    #[error("host is not a rooted DAG")]
    HostNotRooted,
    #[error("invalid tree extension: {}", join(.0))]
    Invalid(Vec<Violation>),
    #[error("update step does not match the host: {0}")]
    MismatchedStep(String),
}

fn join(vs: &[Violation]) -> String {
    vs.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CutKind {
    /// Arcs cut right above the vertex.
    Gw,
    /// Arcs cut right below the vertex.
    Hw,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScanCut {
    pub at: VertexId,
    pub kind: CutKind,
    pub arcs: Vec<ArcKey>,
}

/// A rewrite of the host that the extension must follow.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExtensionStep {
    /// A new root was attached above the old root.
    AttachRoot(VertexId),
    /// `new` was in-split off `vertex`.
    InSplit { vertex: VertexId, new: VertexId },
    /// Gadget vertices inserted below `center`, in path order.
    Stretch { center: VertexId, path: Vec<VertexId> },
    /// The host was cut down to `survivors` (arcs may have been rerouted).
    Restrict(BTreeSet<VertexId>),
}

/// An out-tree on the host's vertices whose strict reachability contains
/// every host arc.
#[derive(Clone, Debug)]
pub struct TreeExtension {
    gamma: Digraph,
    host: Arc<Digraph>,
    root: VertexId,
    index: HashMap<VertexId, usize>,
    preorder: Vec<VertexId>,
    parent: Vec<Option<usize>>,
    tin: Vec<u32>,
    tout: Vec<u32>,
}

impl PartialEq for TreeExtension {
    fn eq(&self, other: &Self) -> bool {
        self.gamma == other.gamma && *self.host == *other.host
    }
}

/// Lists every violated clause; empty means `gamma` extends `host`.
pub fn validate_extension(gamma: &Digraph, host: &Digraph) -> Vec<Violation> {
    let mut out = Vec::new();
    for v in host.vertices() {
        if !gamma.contains_vertex(v) {
            out.push(Violation::MissingVertex(v.clone()));
        }
    }
    for v in gamma.vertices() {
        if !host.contains_vertex(v) {
            out.push(Violation::ExtraVertex(v.clone()));
        }
    }
    for v in gamma.vertices() {
        if gamma.in_degree(v) > 1 {
            out.push(Violation::SeveralParents(v.clone()));
        }
    }
    let roots = gamma.roots();
    if roots.len() != 1 {
        out.push(Violation::RootCount(roots.len()));
    }
    if !out.is_empty() {
        return out;
    }
    let below = gamma.descendants(&roots[0]);
    for v in gamma.vertices() {
        if !below.contains(v) {
            out.push(Violation::Unreachable(v.clone()));
        }
    }
    if !out.is_empty() {
        return out;
    }
    let euler = Euler::build(gamma, &roots[0]);
    for (u, v) in host.arcs() {
        if !euler.strictly_above(&u, &v) {
            out.push(Violation::ArcNotContained(u, v));
        }
    }
    out
}

struct Euler {
    index: HashMap<VertexId, usize>,
    preorder: Vec<VertexId>,
    parent: Vec<Option<usize>>,
    tin: Vec<u32>,
    tout: Vec<u32>,
}

impl Euler {
    fn build(gamma: &Digraph, root: &VertexId) -> Euler {
        let n = gamma.vertex_count();
        let mut e = Euler {
            index: HashMap::with_capacity(n),
            preorder: Vec::with_capacity(n),
            parent: Vec::with_capacity(n),
            tin: Vec::with_capacity(n),
            tout: Vec::with_capacity(n),
        };
        let mut clock = 0u32;
        // (vertex, parent index, exit marker)
        let mut stack: Vec<(VertexId, Option<usize>, bool)> = vec![(root.clone(), None, false)];
        while let Some((v, p, exit)) = stack.pop() {
            if exit {
                e.tout[e.index[&v]] = clock;
                clock += 1;
                continue;
            }
            let i = e.preorder.len();
            e.index.insert(v.clone(), i);
            e.preorder.push(v.clone());
            e.parent.push(p);
            e.tin.push(clock);
            e.tout.push(0);
            clock += 1;
            stack.push((v.clone(), p, true));
            for c in gamma.children(&v).iter().rev() {
                stack.push((c.clone(), Some(i), false));
            }
        }
        e
    }

    fn above_idx(&self, a: usize, b: usize) -> bool {
        self.tin[a] <= self.tin[b] && self.tout[b] <= self.tout[a]
    }

    fn strictly_above(&self, a: &VertexId, b: &VertexId) -> bool {
        match (self.index.get(a), self.index.get(b)) {
            (Some(&i), Some(&j)) => i != j && self.above_idx(i, j),
            _ => false,
        }
    }
}

impl TreeExtension {
    /// Validates `gamma` against `host`.
    pub fn new(gamma: Digraph, host: Arc<Digraph>) -> Result<Self, ExtensionError> {
        let violations = validate_extension(&gamma, &host);
        if !violations.is_empty() {
            return Err(ExtensionError::Invalid(violations));
        }
        Ok(Self::assemble(gamma, host))
    }

    fn assemble(gamma: Digraph, host: Arc<Digraph>) -> Self {
        let root = gamma.root().expect("validated out-tree");
        let e = Euler::build(&gamma, &root);
        TreeExtension {
            gamma,
            host,
            root,
            index: e.index,
            preorder: e.preorder,
            parent: e.parent,
            tin: e.tin,
            tout: e.tout,
        }
    }

    pub fn gamma(&self) -> &Digraph {
        &self.gamma
    }

    pub fn host(&self) -> &Arc<Digraph> {
        &self.host
    }

    pub fn root(&self) -> &VertexId {
        &self.root
    }

    /// Vertices in preorder (children visited in sorted order).
    pub fn preorder(&self) -> &[VertexId] {
        &self.preorder
    }

    /// Vertices in postorder (children visited in sorted order).
    pub fn postorder(&self) -> Vec<VertexId> {
        let mut idx: Vec<usize> = (0..self.preorder.len()).collect();
        idx.sort_by_key(|&i| self.tout[i]);
        idx.into_iter().map(|i| self.preorder[i].clone()).collect()
    }

    pub fn parent(&self, v: &VertexId) -> Option<&VertexId> {
        let i = *self.index.get(v)?;
        self.parent[i].map(|p| &self.preorder[p])
    }

    /// `a >=_Γ b`.
    pub fn above_or_equal(&self, a: &VertexId, b: &VertexId) -> bool {
        match (self.index.get(a), self.index.get(b)) {
            (Some(&i), Some(&j)) => self.tin[i] <= self.tin[j] && self.tout[j] <= self.tout[i],
            _ => false,
        }
    }

    /// `a >_Γ b`.
    pub fn strictly_above(&self, a: &VertexId, b: &VertexId) -> bool {
        a != b && self.above_or_equal(a, b)
    }

    pub fn scan_cut(&self, t: &VertexId, kind: CutKind) -> Result<ScanCut, ExtensionError> {
        if !self.index.contains_key(t) {
            return Err(ExtensionError::UnknownVertex(t.clone()));
        }
        let arcs = self
            .host
            .arcs()
            .filter(|(u, v)| match kind {
                CutKind::Gw => self.strictly_above(u, t) && self.above_or_equal(t, v),
                CutKind::Hw => self.above_or_equal(u, t) && self.strictly_above(t, v),
            })
            .collect();
        Ok(ScanCut { at: t.clone(), kind, arcs })
    }

    /// GW sets of all vertices, indexed like [`Self::preorder`]. Each host arc
    /// `(u, v)` belongs to GW of every vertex on the Γ-path from `v` up to, but
    /// excluding, `u`.
    pub fn gw_all(&self) -> Vec<Vec<ArcKey>> {
        let mut sets = vec![Vec::new(); self.preorder.len()];
        for (u, v) in self.host.arcs() {
            let stop = self.index[&u];
            let mut t = self.index[&v];
            while t != stop {
                sets[t].push((u.clone(), v.clone()));
                t = self.parent[t].expect("tail is a proper ancestor");
            }
        }
        sets
    }

    /// HW sets of all vertices, indexed like [`Self::preorder`].
    pub fn hw_all(&self) -> Vec<Vec<ArcKey>> {
        let mut sets = vec![Vec::new(); self.preorder.len()];
        for (u, v) in self.host.arcs() {
            let stop = self.index[&u];
            let mut t = self.parent[self.index[&v]].expect("head is not the root");
            loop {
                sets[t].push((u.clone(), v.clone()));
                if t == stop {
                    break;
                }
                t = self.parent[t].expect("tail is a proper ancestor");
            }
        }
        sets
    }

    pub fn width(&self) -> usize {
        let mut count = vec![0usize; self.preorder.len()];
        for (u, v) in self.host.arcs() {
            let stop = self.index[&u];
            let mut t = self.index[&v];
            while t != stop {
                count[t] += 1;
                t = self.parent[t].unwrap();
            }
        }
        count.into_iter().max().unwrap_or(0)
    }

    /// Every violated canonicality clause.
    pub fn canonicality_violations(&self) -> Vec<CanonViolation> {
        let mut out: Vec<CanonViolation> =
            validate_extension(&self.gamma, &self.host).into_iter().map(CanonViolation::Invalid).collect();
        for v in &self.preorder {
            if (self.gamma.out_degree(v) == 0) != (self.host.out_degree(v) == 0) {
                out.push(CanonViolation::LeafMismatch(v.clone()));
            }
            if self.gamma.out_degree(v) > self.host.out_degree(v) {
                out.push(CanonViolation::OutDegree(v.clone()));
            }
            // The induced subgraph below v is weakly connected iff every
            // Γ-child subtree contains a host child of v (inductively).
            for q in self.gamma.children(v) {
                if !self.host.children(v).iter().any(|c| self.above_or_equal(q, c)) {
                    out.push(CanonViolation::Disconnected(v.clone()));
                    break;
                }
            }
        }
        out
    }

    pub fn is_canonical(&self) -> bool {
        self.canonicality_violations().is_empty()
    }

    /// Rebuilds the extension with the forest procedure along a postorder of
    /// the current one.
    pub fn canonicalize(&self) -> Result<TreeExtension, ExtensionError> {
        forest_extension(self.host.clone(), self.postorder())
    }

    /// Carries the extension over a host rewrite. `new_host` is the host after
    /// the rewrite.
    pub fn update_extension(
        &self,
        step: &ExtensionStep,
        new_host: Arc<Digraph>,
    ) -> Result<TreeExtension, ExtensionError> {
        let mut g = self.gamma.clone();
        match step {
            ExtensionStep::AttachRoot(r) => {
                if g.contains_vertex(r) {
                    return Err(ExtensionError::MismatchedStep(format!("root {r} already present")));
                }
                g.insert_arc(r, &self.root);
            }
            ExtensionStep::InSplit { vertex, new } => {
                let Some(p) = self.parent(vertex).cloned() else {
                    return Err(ExtensionError::MismatchedStep(format!("{vertex} has no Γ-parent")));
                };
                if g.contains_vertex(new) {
                    return Err(ExtensionError::MismatchedStep(format!("{new} already present")));
                }
                g.remove_arc(&p, vertex);
                g.insert_arc(&p, new);
                g.insert_arc(new, vertex);
            }
            ExtensionStep::Stretch { center, path } => {
                if !g.contains_vertex(center) || path.is_empty() {
                    return Err(ExtensionError::MismatchedStep(format!("bad stretch at {center}")));
                }
                let kids: Vec<_> = g.children(center).iter().cloned().collect();
                for k in &kids {
                    g.remove_arc(center, k);
                }
                let mut prev = center.clone();
                for x in path {
                    if g.contains_vertex(x) {
                        return Err(ExtensionError::MismatchedStep(format!("{x} already present")));
                    }
                    g.insert_arc(&prev, x);
                    prev = x.clone();
                }
                for k in &kids {
                    g.insert_arc(&prev, k);
                }
            }
            ExtensionStep::Restrict(keep) => {
                g = self.restricted(keep);
            }
        }
        TreeExtension::new(g, new_host).map_err(|e| ExtensionError::MismatchedStep(e.to_string()))
    }

    /// Γ on `keep`, each survivor hung below its nearest surviving proper
    /// ancestor.
    fn restricted(&self, keep: &BTreeSet<VertexId>) -> Digraph {
        let mut g = Digraph::new();
        let mut anchor: Vec<Option<usize>> = vec![None; self.preorder.len()];
        for (i, v) in self.preorder.iter().enumerate() {
            // nearest surviving ancestor-or-self, computed top-down
            let up = self.parent[i].and_then(|p| anchor[p]);
            if keep.contains(v) {
                g.add_vertex(v.clone());
                if let Some(a) = up {
                    g.insert_arc(&self.preorder[a], v);
                }
                anchor[i] = Some(i);
            } else {
                anchor[i] = up;
            }
        }
        g
    }
}

/// Builds an extension by processing host vertices in `order` (every vertex
/// after all of its host descendants). Processing `v` hangs the current
/// component of each host child of `v` directly below `v`.
pub fn forest_extension(
    host: Arc<Digraph>,
    order: impl IntoIterator<Item = VertexId>,
) -> Result<TreeExtension, ExtensionError> {
    if host.root().is_none() || !host.is_acyclic() {
        return Err(ExtensionError::HostNotRooted);
    }
    let order: Vec<VertexId> = order.into_iter().collect();
    let pos: HashMap<&VertexId, usize> = order.iter().enumerate().map(|(i, v)| (v, i)).collect();
    if pos.len() != host.vertex_count() || order.iter().any(|v| !host.contains_vertex(v)) {
        return Err(ExtensionError::MismatchedStep("processing order is not a permutation of the host".into()));
    }
    let mut link: Vec<usize> = (0..order.len()).collect();
    fn find(link: &mut [usize], mut x: usize) -> usize {
        while link[x] != x {
            link[x] = link[link[x]];
            x = link[x];
        }
        x
    }
    let mut g = Digraph::new();
    for (i, v) in order.iter().enumerate() {
        g.add_vertex(v.clone());
        for c in host.children(v) {
            let ci = pos[c];
            if ci > i {
                return Err(ExtensionError::MismatchedStep(format!("{c} processed after its parent {v}")));
            }
            let r = find(&mut link, ci);
            if r != i {
                g.insert_arc(v, &order[r]);
                link[r] = i;
            }
        }
    }
    TreeExtension::new(g, host)
}

/// The canonical extension obtained from the reversed topological order.
pub fn default_extension(host: Arc<Digraph>) -> Result<TreeExtension, ExtensionError> {
    let mut order = host.topological_order().map_err(|_| ExtensionError::HostNotRooted)?;
    order.reverse();
    forest_extension(host, order)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::arc;

    fn sample_net() -> Arc<Digraph> {
        let arcs = [
            ("rho", "s"),
            ("rho", "t"),
            ("s", "p"),
            ("s", "r"),
            ("p", "a"),
            ("p", "b"),
            ("r", "c"),
            ("t", "r"),
            ("t", "d"),
        ];
        Arc::new(
            Digraph::from_arcs(
                arcs.iter().map(|(u, v)| arc(*u, *v)),
                ["a", "b", "c", "d"].iter().map(|l| (VertexId::new(l), l.to_string())),
            )
            .unwrap(),
        )
    }

    fn gamma() -> Digraph {
        let arcs = [("rho", "s"), ("s", "p"), ("s", "t"), ("p", "a"), ("p", "b"), ("t", "r"), ("t", "d"), ("r", "c")];
        Digraph::from_arcs(arcs.iter().map(|(u, v)| arc(*u, *v)), []).unwrap()
    }

    fn v(s: &str) -> VertexId {
        VertexId::new(s)
    }

    #[test]
    fn example_extension_cuts() {
        let ext = TreeExtension::new(gamma(), sample_net()).unwrap();
        let gw = |t: &str| ext.scan_cut(&v(t), CutKind::Gw).unwrap().arcs;
        assert_eq!(gw("r"), vec![arc("s", "r"), arc("t", "r")]);
        assert_eq!(gw("s"), vec![arc("rho", "s"), arc("rho", "t")]);
        assert_eq!(gw("t"), vec![arc("rho", "t"), arc("s", "r")]);
        assert!(gw("rho").is_empty());
        assert_eq!(ext.scan_cut(&v("r"), CutKind::Hw).unwrap().arcs, vec![arc("r", "c")]);
        assert_eq!(ext.width(), 2);
        assert!(ext.is_canonical());
        assert!(ext.scan_cut(&v("zz"), CutKind::Gw).is_err());
    }

    #[test]
    fn bulk_cuts_match_definition() {
        let ext = TreeExtension::new(gamma(), sample_net()).unwrap();
        let gws = ext.gw_all();
        let hws = ext.hw_all();
        for (i, t) in ext.preorder().iter().enumerate() {
            let mut a = gws[i].clone();
            a.sort();
            assert_eq!(a, ext.scan_cut(t, CutKind::Gw).unwrap().arcs);
            let mut b = hws[i].clone();
            b.sort();
            assert_eq!(b, ext.scan_cut(t, CutKind::Hw).unwrap().arcs);
        }
    }

    #[test]
    fn violations_reported() {
        let host = sample_net();
        let vs = validate_extension(&host, &host);
        assert!(vs.contains(&Violation::SeveralParents(v("r"))));

        let mut g = gamma();
        g.remove_vertex(&v("d"));
        assert_eq!(validate_extension(&g, &host), vec![Violation::MissingVertex(v("d"))]);

        // swap p and s: arc (s, p) is no longer downward
        let flipped = Digraph::from_arcs(
            [("rho", "p"), ("p", "s"), ("p", "a"), ("p", "b"), ("s", "t"), ("t", "r"), ("t", "d"), ("r", "c")]
                .iter()
                .map(|(a, b)| arc(*a, *b)),
            [],
        )
        .unwrap();
        let vs = validate_extension(&flipped, &host);
        assert_eq!(vs, vec![Violation::ArcNotContained(v("s"), v("p"))]);
    }

    #[test]
    fn path_extension_canonicalizes() {
        let host = sample_net();
        let order = ["a", "b", "p", "c", "r", "d", "t", "s", "rho"];
        let mut path = Digraph::new();
        for w in order.windows(2) {
            path.add_arc(v(w[1]), v(w[0])).unwrap();
        }
        let ext = TreeExtension::new(path, host).unwrap();
        assert!(!ext.is_canonical());
        let canon = ext.canonicalize().unwrap();
        assert!(canon.is_canonical(), "{:?}", canon.canonicality_violations());
        assert!(canon.width() <= ext.width());
    }

    #[test]
    fn canonical_input_is_fixed() {
        let ext = TreeExtension::new(gamma(), sample_net()).unwrap();
        assert_eq!(ext.canonicalize().unwrap(), ext);
    }

    #[test]
    fn default_extension_of_tree_is_tree() {
        let t = Arc::new(
            Digraph::from_arcs(
                [arc("r", "x"), arc("r", "c"), arc("x", "a"), arc("x", "b")],
                ["a", "b", "c"].iter().map(|l| (v(l), l.to_string())),
            )
            .unwrap(),
        );
        let ext = default_extension(t.clone()).unwrap();
        assert_eq!(ext.gamma().arcs().collect::<Vec<_>>(), t.arcs().collect::<Vec<_>>());
        let n = default_extension(sample_net()).unwrap();
        assert!(n.is_canonical());
        assert!(n.width() >= 2);
    }

    #[test]
    fn updates() {
        let ext = TreeExtension::new(gamma(), sample_net()).unwrap();
        // restrict to everything: identity
        let all: BTreeSet<_> = ext.preorder().iter().cloned().collect();
        let same = ext.update_extension(&ExtensionStep::Restrict(all), sample_net()).unwrap();
        assert_eq!(same, ext);

        let mut host = (*sample_net()).clone();
        host.add_arc(v("top"), v("rho")).unwrap();
        let up = ext.update_extension(&ExtensionStep::AttachRoot(v("top")), Arc::new(host)).unwrap();
        assert_eq!(up.root(), &v("top"));
        assert_eq!(up.width(), 2);

        let wrong = ext.update_extension(&ExtensionStep::AttachRoot(v("top")), sample_net());
        assert!(matches!(wrong, Err(ExtensionError::MismatchedStep(_))));
    }
}
