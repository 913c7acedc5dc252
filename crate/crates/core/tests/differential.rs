mod common;

use stc_core::oracle::{soft_display, OracleConfig};
use stc_core::{preprocess, solve, SolveOptions, Verdict};

#[test]
fn solver_matches_oracle_on_desk_suite() {
    let cfg = OracleConfig::default();
    let mut bad = Vec::new();
    let (mut yes, mut no) = (0, 0);
    for (i, (_, g)) in common::desk_suite(120).into_iter().enumerate() {
        let truth = soft_display(&g.network, &g.tree, &cfg).unwrap();
        let inst = preprocess(&g.network, &g.tree, g.extension.as_ref()).unwrap();
        let got = solve(&inst, SolveOptions::default()).unwrap().verdict == Verdict::Yes;
        if truth {
            yes += 1
        } else {
            no += 1
        }
        if got != truth {
            bad.push(i);
        }
    }
    assert!(yes > 10 && no > 10, "yes {yes} no {no}");
    assert!(bad.is_empty(), "mismatches at {bad:?}");
}
