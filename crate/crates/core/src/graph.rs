//! Directed-graph substrate shared by every other module.
//!
//! A [`Digraph`] is a simple digraph (no self-loops, no parallel arcs) whose
//! out-degree-0 vertices may carry a taxon label. All iteration happens in
//! sorted [`VertexId`] order so that every derived result is reproducible.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

/// Opaque, totally ordered vertex identifier.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VertexId(Arc<str>);

impl VertexId {
    pub fn new(token: impl AsRef<str>) -> Self {
        VertexId(Arc::from(token.as_ref()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", &*self.0)
    }
}

impl From<&str> for VertexId {
    fn from(s: &str) -> Self {
        VertexId::new(s)
    }
}

impl From<String> for VertexId {
    fn from(s: String) -> Self {
        VertexId::new(s)
    }
}

/// An arc, written as `(tail, head)`.
pub type ArcKey = (VertexId, VertexId);

/// Convenience constructor for an [`ArcKey`].
pub fn arc(tail: impl Into<VertexId>, head: impl Into<VertexId>) -> ArcKey {
    (tail.into(), head.into())
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("unknown vertex {0}")]
    UnknownVertex(VertexId),
    #[error("unknown arc ({0}, {1})")]
    UnknownArc(VertexId, VertexId),
    #[error("self-loop on {0}")]
    SelfLoop(VertexId),
    #[error("duplicate arc ({0}, {1})")]
    DuplicateArc(VertexId, VertexId),
    #[error("label on non-leaf vertex {0}")]
    LabelOnNonLeaf(VertexId),
    #[error("taxon {taxon:?} is already used by vertex {holder}")]
    DuplicateTaxon { taxon: String, holder: VertexId },
    #[error("vertex {0} already carries a label")]
    AlreadyLabeled(VertexId),
    #[error("graph is not an out-tree: {0}")]
    NotOutTree(String),
    #[error("leaf {0} has no taxon label")]
    UnlabeledLeaf(VertexId),
}

/// Violated precondition of a local rewrite. Each variant names the rule.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RewriteError {
    #[error("subdivide: arc ({0}, {1}) does not exist")]
    SubdivideMissingArc(VertexId, VertexId),
    #[error("{rule}: vertex id {id} is already in use")]
    IdInUse { rule: &'static str, id: VertexId },
    #[error("suppress: {vertex} has in-degree {indeg} and out-degree {outdeg}, expected 1 and 1")]
    NotSuppressible { vertex: VertexId, indeg: usize, outdeg: usize },
    #[error("contract: arc ({0}, {1}) does not exist")]
    ContractMissingArc(VertexId, VertexId),
    #[error("contract: removing leaf {0} would drop its label while {1} keeps other children")]
    ContractDropsLabel(VertexId, VertexId),
    #[error("out-split: {vertex} has out-degree {degree}, expected at least 3")]
    OutDegreeTooSmall { vertex: VertexId, degree: usize },
    #[error("in-split: {vertex} has in-degree {degree}, expected at least 3")]
    InDegreeTooSmall { vertex: VertexId, degree: usize },
    #[error("{rule}: {first} and {second} must be two distinct neighbours of {vertex}")]
    BadNeighbours { rule: &'static str, vertex: VertexId, first: VertexId, second: VertexId },
    #[error("{rule}: unknown vertex {0}", rule = .1)]
    UnknownVertex(VertexId, &'static str),
}

/// A single local rewrite. `new` ids of `None` are drawn from the graph's
/// fresh-id counter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Rewrite {
    Subdivide { tail: VertexId, head: VertexId, new: Option<VertexId> },
    Suppress(VertexId),
    Contract { tail: VertexId, head: VertexId },
    OutSplit { vertex: VertexId, children: [VertexId; 2], new: Option<VertexId> },
    InSplit { vertex: VertexId, parents: [VertexId; 2], new: Option<VertexId> },
}

/// Why a digraph fails to be a phylogenetic network. Variant order is the
/// order in which [`Digraph::classify`] checks the rules.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InvalidReason {
    NoRoot,
    MultipleRoots(Vec<VertexId>),
    Cycle(VertexId),
    RootOutDegree { root: VertexId, degree: usize },
    DegreePattern { vertex: VertexId, indeg: usize, outdeg: usize },
    UnlabeledLeaf(VertexId),
    TooFewLeaves(usize),
}

impl fmt::Display for InvalidReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InvalidReason::NoRoot => write!(f, "no root"),
            InvalidReason::MultipleRoots(r) => write!(f, "multiple roots: {r:?}"),
            InvalidReason::Cycle(v) => write!(f, "directed cycle through {v}"),
            InvalidReason::RootOutDegree { root, degree } => {
                write!(f, "root {root} has out-degree {degree} < 2")
            }
            InvalidReason::DegreePattern { vertex, indeg, outdeg } => {
                write!(f, "vertex {vertex} has in-degree {indeg} and out-degree {outdeg}")
            }
            InvalidReason::UnlabeledLeaf(v) => write!(f, "leaf {v} has no label"),
            InvalidReason::TooFewLeaves(n) => write!(f, "only {n} leaf, need at least 2"),
        }
    }
}

/// Phylogenetic classification of a digraph, most specific first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PhyloClass {
    Tree,
    Network,
    /// A network with an extra out-degree-1 root attached above its root.
    DegreeOneRoot,
    Invalid(InvalidReason),
}

impl PhyloClass {
    pub fn is_network(&self) -> bool {
        matches!(self, PhyloClass::Tree | PhyloClass::Network)
    }
}

/// Vertex or arc operand of the extended reachability relation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Item {
    Vertex(VertexId),
    Arc(VertexId, VertexId),
}

#[derive(Clone, Debug, Default)]
pub struct Digraph {
    children: BTreeMap<VertexId, BTreeSet<VertexId>>,
    parents: BTreeMap<VertexId, BTreeSet<VertexId>>,
    labels: BTreeMap<VertexId, String>,
    by_taxon: BTreeMap<String, VertexId>,
    next_fresh: u64,
}

// The fresh-id counter is bookkeeping, not structure.
impl PartialEq for Digraph {
    fn eq(&self, other: &Self) -> bool {
        self.children == other.children && self.labels == other.labels
    }
}

impl Eq for Digraph {}

impl Digraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a graph from arcs and `(vertex, taxon)` labels.
    pub fn from_arcs<I, L>(arcs: I, labels: L) -> Result<Self, GraphError>
    where
        I: IntoIterator<Item = ArcKey>,
        L: IntoIterator<Item = (VertexId, String)>,
    {
        let mut g = Digraph::new();
        for (u, v) in arcs {
            g.add_arc(u, v)?;
        }
        for (v, taxon) in labels {
            g.set_label(v, taxon)?;
        }
        Ok(g)
    }

    pub fn add_vertex(&mut self, v: VertexId) -> bool {
        if self.children.contains_key(&v) {
            return false;
        }
        self.children.insert(v.clone(), BTreeSet::new());
        self.parents.insert(v, BTreeSet::new());
        true
    }

    pub fn add_arc(&mut self, u: VertexId, v: VertexId) -> Result<(), GraphError> {
        if u == v {
            return Err(GraphError::SelfLoop(u));
        }
        if self.has_arc(&u, &v) {
            return Err(GraphError::DuplicateArc(u, v));
        }
        if self.labels.contains_key(&u) {
            return Err(GraphError::LabelOnNonLeaf(u));
        }
        self.add_vertex(u.clone());
        self.add_vertex(v.clone());
        self.children.get_mut(&u).unwrap().insert(v.clone());
        self.parents.get_mut(&v).unwrap().insert(u);
        Ok(())
    }

    /// Inserts the arc unless it is already present; returns whether it was new.
    pub(crate) fn insert_arc(&mut self, u: &VertexId, v: &VertexId) -> bool {
        debug_assert_ne!(u, v);
        self.add_vertex(u.clone());
        self.add_vertex(v.clone());
        let fresh = self.children.get_mut(u).unwrap().insert(v.clone());
        self.parents.get_mut(v).unwrap().insert(u.clone());
        fresh
    }

    pub fn remove_arc(&mut self, u: &VertexId, v: &VertexId) -> bool {
        let removed = self.children.get_mut(u).is_some_and(|c| c.remove(v));
        if removed {
            self.parents.get_mut(v).unwrap().remove(u);
        }
        removed
    }

    /// Removes a vertex with all incident arcs and its label.
    pub fn remove_vertex(&mut self, v: &VertexId) -> bool {
        let Some(kids) = self.children.remove(v) else {
            return false;
        };
        let pars = self.parents.remove(v).unwrap_or_default();
        for c in kids {
            self.parents.get_mut(&c).unwrap().remove(v);
        }
        for p in pars {
            self.children.get_mut(&p).unwrap().remove(v);
        }
        if let Some(t) = self.labels.remove(v) {
            self.by_taxon.remove(&t);
        }
        true
    }

    pub fn set_label(&mut self, v: VertexId, taxon: impl Into<String>) -> Result<(), GraphError> {
        let taxon = taxon.into();
        if !self.contains_vertex(&v) {
            return Err(GraphError::UnknownVertex(v));
        }
        if self.out_degree(&v) > 0 {
            return Err(GraphError::LabelOnNonLeaf(v));
        }
        if self.labels.contains_key(&v) {
            return Err(GraphError::AlreadyLabeled(v));
        }
        if let Some(holder) = self.by_taxon.get(&taxon) {
            return Err(GraphError::DuplicateTaxon { taxon, holder: holder.clone() });
        }
        self.by_taxon.insert(taxon.clone(), v.clone());
        self.labels.insert(v, taxon);
        Ok(())
    }

    /// Returns a fresh `g<counter>` id and advances the counter.
    pub fn fresh_id(&mut self) -> VertexId {
        loop {
            let id = VertexId::new(format!("g{}", self.next_fresh));
            self.next_fresh += 1;
            if !self.contains_vertex(&id) {
                return id;
            }
        }
    }

    pub fn contains_vertex(&self, v: &VertexId) -> bool {
        self.children.contains_key(v)
    }

    pub fn has_arc(&self, u: &VertexId, v: &VertexId) -> bool {
        self.children.get(u).is_some_and(|c| c.contains(v))
    }

    pub fn vertex_count(&self) -> usize {
        self.children.len()
    }

    pub fn arc_count(&self) -> usize {
        self.children.values().map(BTreeSet::len).sum()
    }

    pub fn vertices(&self) -> impl Iterator<Item = &VertexId> + '_ {
        self.children.keys()
    }

    /// All arcs, sorted by `(tail, head)`.
    pub fn arcs(&self) -> impl Iterator<Item = ArcKey> + '_ {
        self.children.iter().flat_map(|(u, cs)| cs.iter().map(move |v| (u.clone(), v.clone())))
    }

    pub fn children(&self, v: &VertexId) -> &BTreeSet<VertexId> {
        static EMPTY: BTreeSet<VertexId> = BTreeSet::new();
        self.children.get(v).unwrap_or(&EMPTY)
    }

    pub fn parents(&self, v: &VertexId) -> &BTreeSet<VertexId> {
        static EMPTY: BTreeSet<VertexId> = BTreeSet::new();
        self.parents.get(v).unwrap_or(&EMPTY)
    }

    pub fn out_arcs(&self, v: &VertexId) -> Vec<ArcKey> {
        self.children(v).iter().map(|c| (v.clone(), c.clone())).collect()
    }

    pub fn in_arcs(&self, v: &VertexId) -> Vec<ArcKey> {
        self.parents(v).iter().map(|p| (p.clone(), v.clone())).collect()
    }

    pub fn in_degree(&self, v: &VertexId) -> usize {
        self.parents(v).len()
    }

    pub fn out_degree(&self, v: &VertexId) -> usize {
        self.children(v).len()
    }

    pub fn max_out_degree(&self) -> usize {
        self.children.values().map(BTreeSet::len).max().unwrap_or(0)
    }

    pub fn max_in_degree(&self) -> usize {
        self.parents.values().map(BTreeSet::len).max().unwrap_or(0)
    }

    /// Maximum in- and out-degree both at most 2.
    pub fn is_binary(&self) -> bool {
        self.max_in_degree() <= 2 && self.max_out_degree() <= 2
    }

    pub fn roots(&self) -> Vec<VertexId> {
        self.parents.iter().filter(|(_, p)| p.is_empty()).map(|(v, _)| v.clone()).collect()
    }

    /// The unique root, if there is exactly one.
    pub fn root(&self) -> Option<VertexId> {
        let mut it = self.parents.iter().filter(|(_, p)| p.is_empty());
        match (it.next(), it.next()) {
            (Some((r, _)), None) => Some(r.clone()),
            _ => None,
        }
    }

    pub fn leaves(&self) -> Vec<VertexId> {
        self.children.iter().filter(|(_, c)| c.is_empty()).map(|(v, _)| v.clone()).collect()
    }

    pub fn reticulations(&self) -> Vec<VertexId> {
        self.parents.iter().filter(|(_, p)| p.len() >= 2).map(|(v, _)| v.clone()).collect()
    }

    pub fn label(&self, v: &VertexId) -> Option<&str> {
        self.labels.get(v).map(String::as_str)
    }

    pub fn labels(&self) -> &BTreeMap<VertexId, String> {
        &self.labels
    }

    pub fn taxa(&self) -> BTreeSet<String> {
        self.by_taxon.keys().cloned().collect()
    }

    pub fn vertex_of_taxon(&self, taxon: &str) -> Option<&VertexId> {
        self.by_taxon.get(taxon)
    }

    /// Kahn's algorithm with smallest-id tie-breaking. On a cycle returns a
    /// vertex on (or below) it.
    pub fn topological_order(&self) -> Result<Vec<VertexId>, VertexId> {
        let mut indeg: BTreeMap<&VertexId, usize> = self.parents.iter().map(|(v, p)| (v, p.len())).collect();
        let mut ready: BTreeSet<&VertexId> = indeg.iter().filter(|(_, d)| **d == 0).map(|(v, _)| *v).collect();
        let mut order = Vec::with_capacity(self.vertex_count());
        while let Some(v) = ready.pop_first() {
            order.push(v.clone());
            for c in &self.children[v] {
                let d = indeg.get_mut(c).unwrap();
                *d -= 1;
                if *d == 0 {
                    ready.insert(c);
                }
            }
        }
        if order.len() == self.vertex_count() {
            Ok(order)
        } else {
            let stuck = indeg.into_iter().find(|(_, d)| *d > 0).unwrap().0;
            Err(stuck.clone())
        }
    }

    pub fn is_acyclic(&self) -> bool {
        self.topological_order().is_ok()
    }

    /// Vertices reachable from `v` by a path of length >= 0.
    pub fn descendants(&self, v: &VertexId) -> BTreeSet<VertexId> {
        let mut seen = BTreeSet::new();
        let mut queue = VecDeque::from([v.clone()]);
        seen.insert(v.clone());
        while let Some(x) = queue.pop_front() {
            for c in self.children(&x) {
                if seen.insert(c.clone()) {
                    queue.push_back(c.clone());
                }
            }
        }
        seen
    }

    /// `u >=_D v`: a directed path (possibly of length 0) leads from `u` to `v`.
    pub fn reaches_vertex(&self, u: &VertexId, v: &VertexId) -> bool {
        if u == v {
            return true;
        }
        let mut seen = BTreeSet::new();
        let mut stack = vec![u];
        while let Some(x) = stack.pop() {
            for c in self.children(x) {
                if c == v {
                    return true;
                }
                if seen.insert(c) {
                    stack.push(c);
                }
            }
        }
        false
    }

    /// The extended strict reachability relation over vertices and arcs.
    pub fn reaches(&self, a: &Item, b: &Item) -> Result<bool, GraphError> {
        self.check_item(a)?;
        self.check_item(b)?;
        Ok(match (a, b) {
            (Item::Vertex(u), Item::Vertex(v)) => u != v && self.reaches_vertex(u, v),
            (Item::Arc(_, x), Item::Arc(y, _)) => self.reaches_vertex(x, y),
            (Item::Vertex(u), Item::Arc(y, _)) => self.reaches_vertex(u, y),
            (Item::Arc(_, x), Item::Vertex(v)) => self.reaches_vertex(x, v),
        })
    }

    fn check_item(&self, item: &Item) -> Result<(), GraphError> {
        match item {
            Item::Vertex(v) if !self.contains_vertex(v) => Err(GraphError::UnknownVertex(v.clone())),
            Item::Arc(u, v) if !self.has_arc(u, v) => Err(GraphError::UnknownArc(u.clone(), v.clone())),
            _ => Ok(()),
        }
    }

    /// Whether the subgraph induced by `set` is weakly connected.
    pub fn induces_weakly_connected(&self, set: &BTreeSet<VertexId>) -> bool {
        let Some(start) = set.first() else {
            return false;
        };
        let mut seen = BTreeSet::from([start]);
        let mut stack = vec![start];
        while let Some(x) = stack.pop() {
            for y in self.children(x).iter().chain(self.parents(x)) {
                if set.contains(y) && seen.insert(y) {
                    stack.push(y);
                }
            }
        }
        seen.len() == set.len()
    }

    /// Classifies the graph, reporting the first violated rule in the order
    /// roots, cycle, root degree, degree pattern, leaf labels.
    pub fn classify(&self) -> PhyloClass {
        let roots = self.roots();
        let root = match roots.len() {
            0 if self.vertex_count() == 0 => return PhyloClass::Invalid(InvalidReason::NoRoot),
            0 => {
                let v = self.topological_order().unwrap_err();
                return PhyloClass::Invalid(InvalidReason::Cycle(v));
            }
            1 => roots[0].clone(),
            _ => return PhyloClass::Invalid(InvalidReason::MultipleRoots(roots)),
        };
        if let Err(v) = self.topological_order() {
            return PhyloClass::Invalid(InvalidReason::Cycle(v));
        }
        let root_deg = self.out_degree(&root);
        let mut degree_one_root = false;
        if root_deg == 1 {
            let child = self.children(&root).first().unwrap();
            if self.out_degree(child) >= 2 && self.in_degree(child) == 1 {
                degree_one_root = true;
            } else {
                return PhyloClass::Invalid(InvalidReason::RootOutDegree { root, degree: 1 });
            }
        } else if root_deg < 2 {
            return PhyloClass::Invalid(InvalidReason::RootOutDegree { root, degree: root_deg });
        }
        for v in self.vertices() {
            if *v == root {
                continue;
            }
            let (i, o) = (self.in_degree(v), self.out_degree(v));
            if (i == 1) == (o == 1) {
                return PhyloClass::Invalid(InvalidReason::DegreePattern { vertex: v.clone(), indeg: i, outdeg: o });
            }
        }
        let leaves = self.leaves();
        if let Some(v) = leaves.iter().find(|v| !self.labels.contains_key(*v)) {
            return PhyloClass::Invalid(InvalidReason::UnlabeledLeaf(v.clone()));
        }
        if leaves.len() < 2 {
            return PhyloClass::Invalid(InvalidReason::TooFewLeaves(leaves.len()));
        }
        if degree_one_root {
            PhyloClass::DegreeOneRoot
        } else if self.parents.values().all(|p| p.len() <= 1) {
            PhyloClass::Tree
        } else {
            PhyloClass::Network
        }
    }

    /// Applies `action` to a copy of the graph.
    pub fn rewrite(&self, action: &Rewrite) -> Result<Digraph, RewriteError> {
        let mut g = self.clone();
        g.apply(action)?;
        Ok(g)
    }

    /// Applies `action` in place and returns the id of the vertex it created,
    /// if any. On error the graph is left unchanged.
    pub fn apply(&mut self, action: &Rewrite) -> Result<Option<VertexId>, RewriteError> {
        match action {
            Rewrite::Subdivide { tail, head, new } => {
                if !self.has_arc(tail, head) {
                    return Err(RewriteError::SubdivideMissingArc(tail.clone(), head.clone()));
                }
                let w = self.take_new_id("subdivide", new)?;
                self.remove_arc(tail, head);
                self.insert_arc(tail, &w);
                self.insert_arc(&w, head);
                Ok(Some(w))
            }
            Rewrite::Suppress(w) => {
                if !self.contains_vertex(w) {
                    return Err(RewriteError::UnknownVertex(w.clone(), "suppress"));
                }
                let (i, o) = (self.in_degree(w), self.out_degree(w));
                if i != 1 || o != 1 {
                    return Err(RewriteError::NotSuppressible { vertex: w.clone(), indeg: i, outdeg: o });
                }
                let p = self.parents(w).first().unwrap().clone();
                let c = self.children(w).first().unwrap().clone();
                self.remove_vertex(w);
                self.insert_arc(&p, &c);
                Ok(None)
            }
            Rewrite::Contract { tail, head } => {
                if !self.has_arc(tail, head) {
                    return Err(RewriteError::ContractMissingArc(tail.clone(), head.clone()));
                }
                let label = self.labels.get(head).cloned();
                if label.is_some() && (self.out_degree(tail) > 1 || self.labels.contains_key(tail)) {
                    return Err(RewriteError::ContractDropsLabel(head.clone(), tail.clone()));
                }
                let pars: Vec<_> = self.parents(head).iter().filter(|p| *p != tail).cloned().collect();
                let kids: Vec<_> = self.children(head).iter().filter(|c| *c != tail).cloned().collect();
                self.remove_vertex(head);
                for p in &pars {
                    self.insert_arc(p, tail);
                }
                for c in &kids {
                    self.insert_arc(tail, c);
                }
                if let Some(t) = label {
                    self.by_taxon.insert(t.clone(), tail.clone());
                    self.labels.insert(tail.clone(), t);
                }
                Ok(None)
            }
            Rewrite::OutSplit { vertex, children: [a, b], new } => {
                if !self.contains_vertex(vertex) {
                    return Err(RewriteError::UnknownVertex(vertex.clone(), "out-split"));
                }
                let d = self.out_degree(vertex);
                if d < 3 {
                    return Err(RewriteError::OutDegreeTooSmall { vertex: vertex.clone(), degree: d });
                }
                if a == b || !self.has_arc(vertex, a) || !self.has_arc(vertex, b) {
                    return Err(RewriteError::BadNeighbours {
                        rule: "out-split",
                        vertex: vertex.clone(),
                        first: a.clone(),
                        second: b.clone(),
                    });
                }
                let x = self.take_new_id("out-split", new)?;
                self.remove_arc(vertex, a);
                self.remove_arc(vertex, b);
                self.insert_arc(vertex, &x);
                self.insert_arc(&x, a);
                self.insert_arc(&x, b);
                Ok(Some(x))
            }
            Rewrite::InSplit { vertex, parents: [a, b], new } => {
                if !self.contains_vertex(vertex) {
                    return Err(RewriteError::UnknownVertex(vertex.clone(), "in-split"));
                }
                let d = self.in_degree(vertex);
                if d < 3 {
                    return Err(RewriteError::InDegreeTooSmall { vertex: vertex.clone(), degree: d });
                }
                if a == b || !self.has_arc(a, vertex) || !self.has_arc(b, vertex) {
                    return Err(RewriteError::BadNeighbours {
                        rule: "in-split",
                        vertex: vertex.clone(),
                        first: a.clone(),
                        second: b.clone(),
                    });
                }
                let x = self.take_new_id("in-split", new)?;
                self.remove_arc(a, vertex);
                self.remove_arc(b, vertex);
                self.insert_arc(a, &x);
                self.insert_arc(b, &x);
                self.insert_arc(&x, vertex);
                Ok(Some(x))
            }
        }
    }

    fn take_new_id(&mut self, rule: &'static str, new: &Option<VertexId>) -> Result<VertexId, RewriteError> {
        match new {
            Some(id) if self.contains_vertex(id) => Err(RewriteError::IdInUse { rule, id: id.clone() }),
            Some(id) => Ok(id.clone()),
            None => Ok(self.fresh_id()),
        }
    }

    /// Checks that the graph is an out-tree whose leaves are all labeled and
    /// returns its root.
    pub fn labeled_out_tree_root(&self) -> Result<VertexId, GraphError> {
        let root = self.root().ok_or_else(|| GraphError::NotOutTree(format!("{} roots", self.roots().len())))?;
        if let Some((v, _)) = self.parents.iter().find(|(_, p)| p.len() > 1) {
            return Err(GraphError::NotOutTree(format!("vertex {v} has several parents")));
        }
        if self.arc_count() + 1 != self.vertex_count() {
            return Err(GraphError::NotOutTree("not connected".into()));
        }
        if let Some(v) = self.leaves().into_iter().find(|v| !self.labels.contains_key(v)) {
            return Err(GraphError::UnlabeledLeaf(v));
        }
        Ok(root)
    }
}

/// Whether a leaf-respecting isomorphism between two labeled out-trees exists.
///
/// Computed by comparing bottom-up canonical codes, where a leaf's code is
/// its taxon and an inner vertex's code is the sorted multiset of its
/// children's codes.
pub fn tree_leaf_isomorphic(t1: &Digraph, t2: &Digraph) -> Result<bool, GraphError> {
    let r1 = t1.labeled_out_tree_root()?;
    let r2 = t2.labeled_out_tree_root()?;
    if t1.taxa() != t2.taxa() {
        return Ok(false);
    }
    let mut codes = crate::canon::CodeBook::new();
    let c1 = codes.tree_code(t1, &r1, false);
    let c2 = codes.tree_code(t2, &r2, false);
    Ok(c1 == c2)
}
