//! Seeded random instances and the fixed ladder family.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::extension::{ExtensionError, TreeExtension};
use crate::graph::{Digraph, Rewrite, VertexId};
use crate::reduction::prune_to_leafset;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GenerateError {
    #[error("infeasible parameters: {0}")]
    Infeasible(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetAnswer {
    /// The tree is read off a random switching of the network, so it is
    /// displayed (firmly before contraction, softly after).
    YesBiased,
    /// As `YesBiased`, then the tree's labels are shuffled.
    Unlabeled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorParams {
    pub leaves: usize,
    pub reticulations: usize,
    /// Probability of contracting each inner tree arc.
    pub polytomy_rate: f64,
    /// Probability of contracting each eligible network arc.
    pub network_polytomy_rate: f64,
    /// Number of network taxa left out of the tree.
    pub drop_taxa: usize,
    /// Upper bound on tree out-degrees created by contraction.
    pub max_tree_out_degree: Option<usize>,
    pub target: TargetAnswer,
    /// Also draw a random linear extension of the network.
    pub extension: bool,
    pub seed: u64,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        GeneratorParams {
            leaves: 6,
            reticulations: 2,
            polytomy_rate: 0.0,
            network_polytomy_rate: 0.0,
            drop_taxa: 0,
            max_tree_out_degree: None,
            target: TargetAnswer::YesBiased,
            extension: false,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GeneratedInstance {
    pub network: Digraph,
    pub tree: Digraph,
    pub extension: Option<TreeExtension>,
}

const ATTEMPTS: usize = 200;

pub fn generate(params: &GeneratorParams) -> Result<GeneratedInstance, GenerateError> {
    let p = params;
    let bad = |m: String| Err(GenerateError::Infeasible(m));
    if p.leaves < 2 {
        return bad(format!("need at least 2 leaves, got {}", p.leaves));
    }
    for (name, r) in [("polytomy_rate", p.polytomy_rate), ("network_polytomy_rate", p.network_polytomy_rate)] {
        if !(0.0..=1.0).contains(&r) {
            return bad(format!("{name} {r} is outside [0, 1]"));
        }
    }
    if p.drop_taxa + 2 > p.leaves {
        return bad(format!("dropping {} of {} taxa leaves fewer than 2", p.drop_taxa, p.leaves));
    }
    if p.max_tree_out_degree.is_some_and(|d| d < 2) {
        return bad("max_tree_out_degree must be at least 2".into());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);

    let mut n = random_binary_tree(p.leaves, &mut rng);
    for k in 0..p.reticulations {
        if !add_reticulation(&mut n, &mut rng) {
            return bad(format!("could not place reticulation {k} without a cycle"));
        }
    }
    if p.network_polytomy_rate > 0.0 {
        contract_network(&mut n, p.network_polytomy_rate, &mut rng);
    }
    let n = rename_topological(&n, "v");

    let mut t = switching_tree(&n, &mut rng);
    let mut taxa: Vec<String> = n.taxa().into_iter().collect();
    taxa.shuffle(&mut rng);
    let keep: BTreeSet<String> = taxa[p.drop_taxa..].iter().cloned().collect();
    t = prune_to_leafset(&t, &keep).expect("switching trees restrict cleanly").0;
    if p.polytomy_rate > 0.0 {
        contract_tree(&mut t, p.polytomy_rate, p.max_tree_out_degree, &mut rng);
    }
    if p.target == TargetAnswer::Unlabeled {
        let labels: Vec<(VertexId, String)> = t.labels().iter().map(|(v, s)| (v.clone(), s.clone())).collect();
        let mut names: Vec<String> = labels.iter().map(|l| l.1.clone()).collect();
        names.shuffle(&mut rng);
        let mut fresh = Digraph::new();
        for (u, v) in t.arcs() {
            fresh.insert_arc(&u, &v);
        }
        for ((v, _), name) in labels.into_iter().zip(names) {
            fresh.set_label(v, name).expect("leaf");
        }
        t = fresh;
    }
    let t = rename_topological(&t, "u");

    let extension = if p.extension {
        Some(random_linear_extension(Arc::new(n.clone()), rng.gen()).expect("networks are rooted"))
    } else {
        None
    };
    Ok(GeneratedInstance { network: n, tree: t, extension })
}

/// Uniform random leaf insertion; leaves are labeled `x0, x1, ...`.
fn random_binary_tree(leaves: usize, rng: &mut ChaCha8Rng) -> Digraph {
    let mut g = Digraph::new();
    let mut next = 0usize;
    let mut fresh = || {
        next += 1;
        VertexId::new(format!("t{next}"))
    };
    let root = fresh();
    let (a, b) = (fresh(), fresh());
    g.insert_arc(&root, &a);
    g.insert_arc(&root, &b);
    let mut leaf_of: Vec<VertexId> = vec![a, b];
    for _ in 2..leaves {
        let arcs: Vec<_> = g.arcs().collect();
        let (u, v) = arcs.choose(rng).unwrap().clone();
        let (mid, leaf) = (fresh(), fresh());
        g.remove_arc(&u, &v);
        g.insert_arc(&u, &mid);
        g.insert_arc(&mid, &v);
        g.insert_arc(&mid, &leaf);
        leaf_of.push(leaf);
    }
    for (i, v) in leaf_of.into_iter().enumerate() {
        g.set_label(v, format!("x{i}")).expect("leaf");
    }
    g
}

/// Subdivides two distinct arcs and joins the new vertices when that keeps
/// the graph acyclic.
fn add_reticulation(g: &mut Digraph, rng: &mut ChaCha8Rng) -> bool {
    for _ in 0..ATTEMPTS {
        let arcs: Vec<_> = g.arcs().collect();
        let picked: Vec<_> = arcs.choose_multiple(rng, 2).cloned().collect();
        let (a, b) = (&picked[0], &picked[1]);
        let mut h = g.clone();
        let s = h.apply(&Rewrite::Subdivide { tail: a.0.clone(), head: a.1.clone(), new: None }).unwrap().unwrap();
        let r = h.apply(&Rewrite::Subdivide { tail: b.0.clone(), head: b.1.clone(), new: None }).unwrap().unwrap();
        if h.reaches_vertex(&r, &s) {
            continue;
        }
        h.insert_arc(&s, &r);
        *g = h;
        return true;
    }
    false
}

/// Contracts tree-tree and reticulation-reticulation arcs at `rate`, undoing
/// any contraction that breaks the network conditions.
fn contract_network(g: &mut Digraph, rate: f64, rng: &mut ChaCha8Rng) {
    let arcs: Vec<_> = g.arcs().collect();
    for (u, v) in arcs {
        if !g.has_arc(&u, &v) || g.out_degree(&v) == 0 || !rng.gen_bool(rate) {
            continue;
        }
        let tree_pair = g.in_degree(&u) <= 1 && g.in_degree(&v) == 1;
        let ret_pair = g.in_degree(&u) > 1 && g.in_degree(&v) > 1;
        if !tree_pair && !ret_pair {
            continue;
        }
        let Ok(h) = g.rewrite(&Rewrite::Contract { tail: u, head: v }) else { continue };
        if h.classify().is_network() {
            *g = h;
        }
    }
}

fn contract_tree(t: &mut Digraph, rate: f64, max_out: Option<usize>, rng: &mut ChaCha8Rng) {
    let arcs: Vec<_> = t.arcs().collect();
    for (u, v) in arcs {
        if !t.has_arc(&u, &v) || t.out_degree(&v) == 0 || !rng.gen_bool(rate) {
            continue;
        }
        if max_out.is_some_and(|d| t.out_degree(&u) + t.out_degree(&v) - 1 > d) {
            continue;
        }
        t.apply(&Rewrite::Contract { tail: u, head: v }).expect("inner tree arc");
    }
}

/// Keeps one uniformly chosen in-arc per reticulation.
fn switching_tree(n: &Digraph, rng: &mut ChaCha8Rng) -> Digraph {
    let mut g = n.clone();
    for r in n.reticulations() {
        let parents: Vec<VertexId> = n.parents(&r).iter().cloned().collect();
        let keep = parents.choose(rng).unwrap();
        for p in &parents {
            if p != keep {
                g.remove_arc(p, &r);
            }
        }
    }
    g
}

/// Renames vertices `<prefix>0, <prefix>1, ...` in topological order.
fn rename_topological(g: &Digraph, prefix: &str) -> Digraph {
    let order = g.topological_order().expect("acyclic");
    let name: BTreeMap<&VertexId, VertexId> =
        order.iter().enumerate().map(|(i, v)| (v, VertexId::new(format!("{prefix}{i}")))).collect();
    let mut out = Digraph::new();
    for v in &order {
        out.add_vertex(name[v].clone());
    }
    for (u, v) in g.arcs() {
        out.insert_arc(&name[&u], &name[&v]);
    }
    for (v, t) in g.labels() {
        out.set_label(name[v].clone(), t.clone()).expect("leaf");
    }
    out
}

/// A path extension following a uniformly drawn topological order.
pub fn random_linear_extension(host: Arc<Digraph>, seed: u64) -> Result<TreeExtension, ExtensionError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut indeg: BTreeMap<&VertexId, usize> = host.vertices().map(|v| (v, host.in_degree(v))).collect();
    let mut ready: Vec<&VertexId> = indeg.iter().filter(|(_, d)| **d == 0).map(|(v, _)| *v).collect();
    let mut order = Vec::with_capacity(indeg.len());
    while !ready.is_empty() {
        let v = ready.swap_remove(rng.gen_range(0..ready.len()));
        order.push(v.clone());
        for c in host.children(v) {
            let d = indeg.get_mut(c).unwrap();
            *d -= 1;
            if *d == 0 {
                ready.push(c);
            }
        }
    }
    let mut gamma = Digraph::new();
    gamma.add_vertex(order[0].clone());
    for w in order.windows(2) {
        gamma.insert_arc(&w[0], &w[1]);
    }
    TreeExtension::new(gamma, host.clone())
}

/// A chain of `blocks` gadgets with a canonical extension of width 2 and a
/// tree read off a random switching. Block `i` has
/// `s_i -> q_i, s_i -> p_i, q_i -> p_i, q_i -> m_i, p_i -> w_i, w_i -> l_i,
/// w_i -> s_{i+1}`, where `p_i` is a reticulation; the last `w` feeds leaf `e`.
/// Tree contraction uses `polytomy_rate` and keeps tree out-degrees at most 3.
pub fn ladder_instance(blocks: usize, polytomy_rate: f64, seed: u64) -> Result<GeneratedInstance, GenerateError> {
    if blocks == 0 {
        return Err(GenerateError::Infeasible("a ladder needs at least one block".into()));
    }
    if !(0.0..=1.0).contains(&polytomy_rate) {
        return Err(GenerateError::Infeasible(format!("polytomy_rate {polytomy_rate} is outside [0, 1]")));
    }
    let id = |s: &str, i: usize| VertexId::new(format!("{s}{i}"));
    let mut n = Digraph::new();
    let mut gamma = Digraph::new();
    for i in 0..blocks {
        let (s, q, p, w, l, m) = (id("s", i), id("q", i), id("p", i), id("w", i), id("l", i), id("m", i));
        let next = if i + 1 == blocks { VertexId::new("e") } else { id("s", i + 1) };
        for (a, b) in [(&s, &q), (&s, &p), (&q, &p), (&q, &m), (&p, &w), (&w, &l), (&w, &next)] {
            n.insert_arc(a, b);
        }
        for (a, b) in [(&s, &q), (&q, &m), (&q, &p), (&p, &w), (&w, &l), (&w, &next)] {
            gamma.insert_arc(a, b);
        }
        n.set_label(l, format!("a{i}")).unwrap();
        n.set_label(m, format!("b{i}")).unwrap();
    }
    n.set_label(VertexId::new("e"), "e").unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t = switching_tree(&n, &mut rng);
    let mut t = prune_to_leafset(&t, &n.taxa()).expect("switching trees restrict cleanly").0;
    if polytomy_rate > 0.0 {
        contract_tree(&mut t, polytomy_rate, Some(3), &mut rng);
    }
    let t = rename_topological(&t, "u");
    let host = Arc::new(n.clone());
    let ext = TreeExtension::new(gamma, host).expect("ladder extension is valid");
    Ok(GeneratedInstance { network: n, tree: t, extension: Some(ext) })
}
