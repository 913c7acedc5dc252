//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on failure.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::{Duration, Instant};

use stc_core::generate::{generate, ladder_instance, random_linear_extension, GeneratedInstance, GeneratorParams};
use stc_core::oracle::{firm_display, soft_display, OracleConfig};
use stc_core::reduction::{make_binary_in, stretch_network, WidthStepKind};
use stc_core::solver::check_spe;
use stc_core::{preprocess, solve, validate_extension, SolveOptions, Verdict};

const SUITE_SIZE: u64 = 300;
const GOLDEN_BUDGET: Duration = Duration::from_secs(1);
const EQUIVALENCE_BUDGET: Duration = Duration::from_secs(600);
/// Arc cap for the oracle on stretched networks.
const STRETCHED_CAP: usize = 256;
const CANON_PAIRS: u64 = 150;
const SCALING_BLOCKS: [usize; 4] = [7, 14, 28, 57];
const SCALING_SEEDS: [u64; 3] = [1, 2, 3];
const SCALING_REPEATS: usize = 9;
const MAX_SLOPE: f64 = 3.5;

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn golden() -> Outcome {
    let start = Instant::now();
    let cfg = OracleConfig::default();
    let n = common::doc(common::SAMPLE_NET);
    let (tb, tc, td) = (common::doc(common::T_B), common::doc(common::T_C), common::doc(common::T_D));
    let solve_default = |t| -> Verdict {
        let inst = preprocess(&n, t, None).unwrap();
        solve(&inst, SolveOptions::default()).unwrap().verdict
    };
    ensure(firm_display(&n, &tb, &cfg).unwrap(), || "firm_display(N_A, T_B) is false".into())?;
    ensure(!firm_display(&n, &tc, &cfg).unwrap(), || "firm_display(N_A, T_C) is true".into())?;
    ensure(solve_default(&td) == Verdict::Yes, || "solve(N_A, T_D) is NO".into())?;
    ensure(solve_default(&tc) == Verdict::No, || "solve(N_A, T_C) is YES".into())?;
    ensure(solve_default(&tb) == Verdict::Yes, || "solve(N_A, T_B) is NO".into())?;
    let took = start.elapsed();
    ensure(took < GOLDEN_BUDGET, || format!("took {took:?}"))?;
    Ok(format!("5/5 exact in {took:?}"))
}

fn oracle_equivalence(suite: &[(GeneratorParams, GeneratedInstance)]) -> Outcome {
    let start = Instant::now();
    let cfg = OracleConfig::default();
    let (mut yes, mut no, mut agree) = (0, 0, 0);
    let mut mismatches = Vec::new();
    for (p, g) in suite {
        let truth = soft_display(&g.network, &g.tree, &cfg).map_err(|e| format!("seed {}: {e}", p.seed))?;
        let inst = preprocess(&g.network, &g.tree, g.extension.as_ref()).map_err(|e| e.to_string())?;
        let got = solve(&inst, SolveOptions::default()).map_err(|e| e.to_string())?.verdict == Verdict::Yes;
        if truth {
            yes += 1;
        } else {
            no += 1;
        }
        if got == truth {
            agree += 1;
        } else {
            mismatches.push(p.seed);
        }
    }
    let took = start.elapsed();
    ensure(mismatches.is_empty(), || format!("disagreement on seeds {mismatches:?}"))?;
    ensure(took < EQUIVALENCE_BUDGET, || format!("took {took:?}"))?;
    Ok(format!("{agree}/{} agree ({yes} YES, {no} NO) in {took:?}", suite.len()))
}

fn reduction_preservation(suite: &[(GeneratorParams, GeneratedInstance)]) -> Outcome {
    let cfg = OracleConfig { max_arcs: STRETCHED_CAP, ..Default::default() };
    let mut stretched = 0;
    for (p, g) in suite {
        let base = soft_display(&g.network, &g.tree, &cfg).map_err(|e| e.to_string())?;
        let (s, gadgets) = stretch_network(&g.network).map_err(|e| e.to_string())?;
        let (b, _) = make_binary_in(&s).map_err(|e| e.to_string())?;
        let on_s = soft_display(&s, &g.tree, &cfg).map_err(|e| format!("seed {}: {e}", p.seed))?;
        let on_b = soft_display(&b, &g.tree, &cfg).map_err(|e| format!("seed {}: {e}", p.seed))?;
        ensure(base == on_s && on_s == on_b, || format!("seed {}: {base} / {on_s} / {on_b}", p.seed))?;
        stretched += usize::from(!gadgets.is_empty());
    }
    Ok(format!("{}/{} agree, {stretched} with stretch gadgets", suite.len(), suite.len()))
}

fn width_bounds(suite: &[(GeneratorParams, GeneratedInstance)]) -> Outcome {
    let (mut stretches, mut splits, mut instances) = (0, 0, 0);
    for (p, g) in suite {
        let Some(ext) = &g.extension else { continue };
        instances += 1;
        let inst = preprocess(&g.network, &g.tree, Some(ext)).map_err(|e| e.to_string())?;
        for w in &inst.widths {
            match w.kind {
                WidthStepKind::Stretch { degree } => {
                    stretches += 1;
                    ensure(w.after <= w.before + 2 * degree, || format!("seed {}: {w:?}", p.seed))?;
                }
                WidthStepKind::InSplit => {
                    splits += 1;
                    ensure(w.after <= w.before, || format!("seed {}: {w:?}", p.seed))?;
                }
                _ => {}
            }
        }
    }
    Ok(format!("0 violations over {instances} instances ({stretches} stretch, {splits} in-split steps)"))
}

fn signature_bounds(suite: &[(GeneratorParams, GeneratedInstance)]) -> Outcome {
    let mut vertices = 0;
    for (p, g) in suite {
        let inst = preprocess(&g.network, &g.tree, g.extension.as_ref()).map_err(|e| e.to_string())?;
        let delta = inst.tree.max_out_degree();
        let report = solve(&inst, SolveOptions { witness: false, audit: true }).map_err(|e| e.to_string())?;
        ensure(report.audit_failures.is_empty(), || format!("seed {}: {:?}", p.seed, report.audit_failures))?;
        for s in &report.stats {
            vertices += 1;
            // (4 gw)^(delta gw), compared in logarithms
            let bound = (delta * s.gw) as f64 * ((4 * s.gw) as f64).ln();
            let fits = s.gws <= 1 || (s.gws as f64).ln() <= bound + 1e-9;
            ensure(fits, || format!("seed {}: |GWS| {} at {} with |GW| {}", p.seed, s.gws, s.vertex, s.gw))?;
            ensure(s.max_preimage <= delta, || {
                format!("seed {}: preimage {} > {delta} at {}", p.seed, s.max_preimage, s.vertex)
            })?;
            if s.is_leaf {
                ensure(s.gws == 1 && s.min_cell == 1 && s.max_cell == 1, || {
                    format!(
                        "seed {}: leaf {} has {} cells of size {}..{}",
                        p.seed, s.vertex, s.gws, s.min_cell, s.max_cell
                    )
                })?;
            }
        }
    }
    Ok(format!("0 violations over {vertices} extension vertices"))
}

fn certificates(suite: &[(GeneratorParams, GeneratedInstance)]) -> Outcome {
    let mut yes = 0;
    for (p, g) in suite {
        let inst = preprocess(&g.network, &g.tree, g.extension.as_ref()).map_err(|e| e.to_string())?;
        let report = solve(&inst, SolveOptions { witness: true, audit: false }).map_err(|e| e.to_string())?;
        if report.verdict != Verdict::Yes {
            continue;
        }
        yes += 1;
        let w = report.witness.ok_or_else(|| format!("seed {}: YES without witness", p.seed))?;
        let forest = inst.tree.arcs().collect();
        let ok = check_spe(&w, &forest, &inst.network, &inst.tree).map_err(|e| e.to_string())?;
        ensure(ok, || format!("seed {}: check_spe rejects the witness", p.seed))?;
        let top = inst.tree.children(&inst.rho_t).first().cloned().unwrap();
        let path = &w.phi[&(inst.rho_t.clone(), top)];
        ensure(path[0] == inst.rho_n && inst.network.has_arc(&path[0], &path[1]), || {
            format!("seed {}: top path {path:?} does not leave the network root", p.seed)
        })?;
    }
    Ok(format!("{yes}/{yes} YES witnesses verified"))
}

fn canonicalization() -> Outcome {
    let mut shrunk = 0;
    for i in 0..CANON_PAIRS {
        let p = GeneratorParams {
            leaves: 3 + (i % 8) as usize,
            reticulations: (i % 5) as usize,
            network_polytomy_rate: if i % 2 == 0 { 0.4 } else { 0.0 },
            seed: 0xca_0000 + i,
            ..Default::default()
        };
        let host = Arc::new(generate(&p).unwrap().network);
        let ext = random_linear_extension(host.clone(), i).map_err(|e| e.to_string())?;
        let c = ext.canonicalize().map_err(|e| e.to_string())?;
        let invalid = validate_extension(c.gamma(), &host);
        ensure(invalid.is_empty(), || format!("pair {i}: {invalid:?}"))?;
        let violations = c.canonicality_violations();
        ensure(violations.is_empty(), || format!("pair {i}: {violations:?}"))?;
        ensure(c.width() <= ext.width(), || format!("pair {i}: width {} -> {}", ext.width(), c.width()))?;
        shrunk += usize::from(c.width() < ext.width());
    }
    Ok(format!("0 violations over {CANON_PAIRS} pairs ({shrunk} with smaller width)"))
}

fn scaling() -> Outcome {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut rows = Vec::new();
    for blocks in SCALING_BLOCKS {
        let mut total = 0.0;
        let mut arcs = 0;
        for seed in SCALING_SEEDS {
            let g = ladder_instance(blocks, 0.3, seed).map_err(|e| e.to_string())?;
            arcs = g.network.arc_count();
            let inst = preprocess(&g.network, &g.tree, g.extension.as_ref()).map_err(|e| e.to_string())?;
            ensure(inst.extension.width() <= 3, || format!("width {}", inst.extension.width()))?;
            ensure(g.network.max_out_degree() <= 3, || "network out-degree above 3".into())?;
            ensure(g.tree.max_out_degree() <= 3, || "tree out-degree above 3".into())?;
            let mut times = Vec::with_capacity(SCALING_REPEATS);
            for _ in 0..SCALING_REPEATS {
                let t0 = Instant::now();
                let r = solve(&inst, SolveOptions::default()).map_err(|e| e.to_string())?;
                times.push(t0.elapsed().as_secs_f64());
                ensure(r.verdict == Verdict::Yes, || "ladder instance answered NO".into())?;
            }
            times.sort_by(f64::total_cmp);
            total += times[SCALING_REPEATS / 2];
        }
        xs.push((arcs as f64).ln());
        ys.push(total.ln());
        rows.push(format!("{arcs}:{:.2}ms", total * 1e3));
    }
    let k = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / k, ys.iter().sum::<f64>() / k);
    let cov: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = cov / var;
    ensure(slope <= MAX_SLOPE, || format!("log-log slope {slope:.2} > {MAX_SLOPE} ({})", rows.join(", ")))?;
    Ok(format!("log-log slope {slope:.2} <= {MAX_SLOPE} ({})", rows.join(", ")))
}

fn main() {
    let suite = common::desk_suite(SUITE_SIZE);
    let criteria: Vec<Criterion> = vec![
        ("golden suite", Box::new(golden)),
        ("oracle equivalence", Box::new(|| oracle_equivalence(&suite))),
        ("reduction preservation", Box::new(|| reduction_preservation(&suite))),
        ("width bounds", Box::new(|| width_bounds(&suite))),
        ("signature bounds", Box::new(|| signature_bounds(&suite))),
        ("certificate soundness", Box::new(|| certificates(&suite))),
        ("canonicalization contract", Box::new(canonicalization)),
        ("scaling sanity", Box::new(scaling)),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        match outcome {
            Ok(detail) => println!("PASS {} {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {} {name}: {why}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
