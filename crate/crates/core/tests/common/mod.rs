#![allow(dead_code)]

use stc_core::generate::{generate, GeneratedInstance, GeneratorParams, TargetAnswer};
use stc_core::io::parse_edgelist;
use stc_core::Digraph;

/// Parameters of the `i`-th desk-scale instance: at most 12 network arcs and
/// 5 tree taxa, alternating yes-biased and unlabeled targets.
pub fn desk_params(i: u64) -> GeneratorParams {
    let leaves = 3 + (i % 3) as usize;
    let max_ret = match leaves {
        5 => 1,
        _ => 2,
    };
    GeneratorParams {
        leaves,
        reticulations: (i as usize / 3) % (max_ret + 1),
        polytomy_rate: if i.is_multiple_of(4) { 0.0 } else { 0.4 },
        network_polytomy_rate: if i.is_multiple_of(5) { 0.3 } else { 0.0 },
        drop_taxa: usize::from(leaves >= 4 && i.is_multiple_of(7)),
        max_tree_out_degree: None,
        target: if i.is_multiple_of(2) { TargetAnswer::YesBiased } else { TargetAnswer::Unlabeled },
        extension: i.is_multiple_of(3),
        seed: 0x5eed_0000 + i,
    }
}

pub fn desk_suite(count: u64) -> Vec<(GeneratorParams, GeneratedInstance)> {
    (0..count)
        .map(|i| {
            let p = desk_params(i);
            let g = generate(&p).expect("desk parameters are feasible");
            assert!(g.network.arc_count() <= 12 && g.tree.taxa().len() <= 5);
            (p, g)
        })
        .collect()
}

pub const SAMPLE_NET: &str = "network sample_net
A rho s
A rho t
A s p
A s r
A p a
A p b
A r c
A t r
A t d
L a a
L b b
L c c
L d d
";

/// ((a,b),(c,d))
pub const T_B: &str = "A u0 u1\nA u0 u2\nA u1 a\nA u1 b\nA u2 c\nA u2 d\nL a a\nL b b\nL c c\nL d d\n";
/// ((a,c),(b,d))
pub const T_C: &str = "A u0 u1\nA u0 u2\nA u1 a\nA u1 c\nA u2 b\nA u2 d\nL a a\nL b b\nL c c\nL d d\n";
/// (a,b,(c,d))
pub const T_D: &str = "A u0 a\nA u0 b\nA u0 u2\nA u2 c\nA u2 d\nL a a\nL b b\nL c c\nL d d\n";

pub fn doc(text: &str) -> Digraph {
    parse_edgelist(text).unwrap().graph
}
