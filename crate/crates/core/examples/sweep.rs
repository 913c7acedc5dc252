use stc_core::generate::{generate, GeneratorParams, TargetAnswer};
use stc_core::oracle::{firm_display, soft_display, OracleConfig};
use stc_core::solver::check_spe;
use stc_core::{preprocess, solve, SolveOptions, Verdict};

fn main() {
    let cfg = OracleConfig { max_arcs: 40, ..Default::default() };
    let (mut yes, mut no, mut bad, mut skipped) = (0, 0, 0, 0);
    let n: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(2000);
    for i in 0..n {
        let p = GeneratorParams {
            leaves: 3 + (i % 5) as usize,
            reticulations: (i as usize / 5) % 4,
            polytomy_rate: [0.0, 0.3, 0.7][(i % 3) as usize],
            network_polytomy_rate: [0.0, 0.5][(i / 7 % 2) as usize],
            drop_taxa: (i / 11 % 2) as usize,
            max_tree_out_degree: None,
            target: if i % 2 == 0 { TargetAnswer::YesBiased } else { TargetAnswer::Unlabeled },
            extension: i % 3 == 0,
            seed: i,
        };
        let g = generate(&p).unwrap();
        let truth = match soft_display(&g.network, &g.tree, &cfg) {
            Ok(t) => t,
            Err(_) => {
                skipped += 1;
                continue;
            }
        };
        if p.target == TargetAnswer::YesBiased && !truth {
            println!("seed {i}: yes-biased instance is NO per oracle");
        }
        if p.target == TargetAnswer::YesBiased
            && p.polytomy_rate == 0.0
            && !firm_display(&g.network, &g.tree, &cfg).unwrap()
        {
            println!("seed {i}: uncontracted instance not firmly displayed");
        }
        let inst = preprocess(&g.network, &g.tree, g.extension.as_ref()).unwrap();
        let rep = solve(&inst, SolveOptions { witness: true, audit: true }).unwrap();
        let got = rep.verdict == Verdict::Yes;
        if let Some(w) = &rep.witness {
            let forest = inst.tree.arcs().collect();
            let ok = check_spe(w, &forest, &inst.network, &inst.tree).unwrap();
            let top = inst.tree.children(&inst.rho_t).first().unwrap().clone();
            let first = &w.phi[&(inst.rho_t.clone(), top)];
            if !ok || first[0] != inst.rho_n {
                println!("seed {i}: bad witness ok={ok} first={first:?}");
            }
        } else if got {
            println!("seed {i}: YES without witness");
        }
        if truth {
            yes += 1
        } else {
            no += 1
        }
        if !rep.audit_failures.is_empty() {
            println!("seed {i}: audit {:?}", rep.audit_failures);
        }
        if got != truth {
            bad += 1;
            println!("seed {i}: solver {got} oracle {truth} params {p:?}");
        }
    }
    println!("yes {yes} no {no} mismatches {bad} skipped {skipped}");
}
