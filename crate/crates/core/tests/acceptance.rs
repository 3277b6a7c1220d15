//! End-to-end acceptance checks, one PASS/FAIL line per criterion.
//!
//! Each criterion returns a detail string on success and panics on failure.
//! A criterion whose stated target is known to be wrong reports FAIL against
//! that target and is checked against the corrected value instead; it does
//! not fail the run.

mod common;

use std::panic::{self, AssertUnwindSafe};
use std::process::Command;
use std::time::{Duration, Instant};

use common::interval::prop2_mismatches;
use common::{rand_sym, random_interval_problem, soundness_suite};
use pareto_robust::comb::{self, Evaluated};
use pareto_robust::eigen::{example2, nominal_lambda_max, EigenInstance};
use pareto_robust::linalg::{dot, sym_eig, SymMatrix};
use pareto_robust::maxcut::{self, Cut, UncertainGraph};
use pareto_robust::pro::{self, ParetoStatus, ProSettings, RobustSdpProblem, Spectrahedron};
use pareto_robust::uncertainty::MatrixBox;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

enum Outcome {
    Pass(String),
    /// Stated target missed, corrected target met.
    Deviation {
        detail: String,
        note: &'static str,
    },
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn example2_eigen() -> Outcome {
    let s = ProSettings::default();
    let prob = example2().problem();
    let ro = pro::solve_robust(&prob, &s).unwrap();
    assert!(
        close(ro.worst_case, 1.0, 1e-6),
        "robust value {}",
        ro.worst_case
    );

    let half = SymMatrix::identity(2).scaled(0.5);
    let v = pro::verify_pro(&prob, &half, &s).unwrap();
    assert_eq!(v.status, ParetoStatus::Dominated);
    assert!(close(prob.uncertainty().relint_mu()[0], 0.5, 1e-12));

    let (xp, _) = pro::improve_to_pro(&prob, &half, &s).unwrap();
    let want = SymMatrix::from_rows(&[vec![0.5, -0.5], vec![-0.5, 0.5]]).unwrap();
    assert!(xp.max_abs_diff(&want) < 1e-5, "{xp:?}");
    assert!(pro::verify_pro(&prob, &xp, &s).unwrap().is_pro());

    // The best gain over the robust-optimal face is attained at X', the
    // face's nominal maximizer: ⟨P(½), X' − I/2⟩ evaluated directly.
    let oracle = dot(&prob.uncertainty().at(&[0.5]), &(&want - &half));
    assert!(
        close(v.nominal_gain, oracle, 1e-4),
        "gain {} vs {oracle}",
        v.nominal_gain
    );
    let detail = format!(
        "value {:.6}, X' within 1e-5, X' PRO, nominal_gain {:.6} (stated 1.0, oracle {oracle:.6})",
        ro.worst_case, v.nominal_gain
    );
    if close(v.nominal_gain, 1.0, 1e-4) {
        Outcome::Pass(detail)
    } else {
        Outcome::Deviation {
            detail,
            note: "stated gain 1.0 is the gain at mu = 1; at the relative-interior point mu = 0.5 it is 0.5",
        }
    }
}

fn knapsack() -> Outcome {
    let prob = comb::knapsack_example(7);
    let part = comb::brute_force_pro(&prob).unwrap();
    assert_eq!(part.value, 25.0);
    let expected: Vec<Vec<u8>> = (0u32..1 << 7)
        .map(|m| (0..7).map(|k| (m >> k & 1) as u8).collect::<Vec<u8>>())
        .filter(|x| x.iter().map(|&v| u32::from(v)).sum::<u32>() == 5 && x[0] == 1 && x[1] == 1)
        .collect();
    let mut pro_set = part.pro.clone();
    pro_set.sort();
    let mut want = expected.clone();
    want.sort();
    assert_eq!(pro_set, want);

    // Exact with integer data: f(x, p) = p₁(x₁ + x₂) + p₂x₁x₂ + (1ᵀx)² − x₁ − x₂ − x₁x₂.
    let f = |x: &[u8], p: (i64, i64)| -> i64 {
        let (a, b) = (i64::from(x[0]), i64::from(x[1]));
        let s: i64 = x.iter().map(|&v| i64::from(v)).sum();
        p.0 * (a + b) + p.1 * a * b + s * s - a - b - a * b
    };
    let pro_vals: Vec<i64> = part.pro.iter().map(|x| f(x, (2, 4))).collect();
    let dom_vals: Vec<i64> = part.dominated.iter().map(|d| f(&d.x, (2, 4))).collect();
    assert!(pro_vals.iter().all(|&v| v == 30), "{pro_vals:?}");
    assert_eq!(dom_vals.iter().copied().min(), Some(25));
    let enumeration = prob.enumerate().unwrap();
    let at = |e: &Evaluated| e.coeff[0] * 2.0 + e.coeff[1] * 4.0 + e.constant;
    let zero_pair = enumeration.find(&[0, 0, 1, 1, 1, 1, 1]).unwrap();
    assert_eq!(at(zero_pair), 25.0);
    Outcome::Pass(format!(
        "RO value 25, PRO set = {{1'x = 5, x1 = x2 = 1}} ({} points), 30 vs 25 at p = (2,4)",
        part.pro.len()
    ))
}

fn triangle() -> Outcome {
    let g = UncertainGraph::triangle_example();
    let bf = maxcut::brute_force_maxcut(&g).unwrap();
    assert_eq!(bf.value, 4.0);
    let singles: Vec<Cut> = (0..3).map(|v| Cut::from_side(3, &[v])).collect();
    assert_eq!(bf.cuts.len(), 3);
    assert!(singles.iter().all(|c| bf.cuts.contains(c)));
    assert_eq!(bf.pro, vec![singles[0].clone()]);

    let graph = format!("{}/examples/ex3_maxcut.json", env!("CARGO_MANIFEST_DIR"));
    let out = Command::new(env!("CARGO_BIN_EXE_pareto-robust"))
        .args([
            "maxcut",
            "--graph",
            &graph,
            "--pro",
            "--samples",
            "10000",
            "--seed",
            "42",
        ])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let env: Value = serde_json::from_slice(&out.stdout).unwrap();
    let signs: Vec<i8> = serde_json::from_value(env["outputs"]["cut"]["signs"].clone()).unwrap();
    assert_eq!(Cut::new(signs), singles[0]);
    Outcome::Pass(
        "mc = 4, three single-vertex cuts optimal, delta(v1) unique PRO, CLI returns delta(v1)"
            .into(),
    )
}

fn gw_ratio() -> Outcome {
    let s = ProSettings::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst_ratio = f64::INFINITY;
    for case in 0..10 {
        let n = 5 + case % 2;
        let m = n * (n - 1) / 2;
        let lo: Vec<f64> = (0..m).map(|_| rng.gen_range(1.0..1.5)).collect();
        let hi: Vec<f64> = lo.iter().map(|&l| rng.gen_range(l..2.0)).collect();
        let dev: Vec<f64> = hi.iter().zip(&lo).map(|(h, l)| h - l).collect();
        let g = UncertainGraph::complete_box(n, &hi, &dev).unwrap();
        let mc = maxcut::brute_force_maxcut(&g).unwrap().value;
        let relax = maxcut::robust_maxcut_sdp(&g, &s).unwrap();
        assert!(
            mc <= relax.value + 1e-6,
            "case {case}: mc {mc} > sdp {}",
            relax.value
        );
        assert!(relax.value <= mc / 0.878 + 1e-6, "case {case}");
        let r = maxcut::gw_round(&g, &relax.y, 20_000, case as u64).unwrap();
        let ratio = r.mean_worst_case / relax.value;
        assert!(ratio >= 0.85, "case {case}: ratio {ratio}");
        worst_ratio = worst_ratio.min(ratio);
    }
    Outcome::Pass(format!(
        "10 instances, min mean/sdp ratio {worst_ratio:.4}, sandwich holds"
    ))
}

fn prop1_soundness() -> Outcome {
    let dominated = soundness_suite(7, 50);
    assert!(dominated >= 10);
    Outcome::Pass(format!(
        "50 instances, {dominated} dominated starts improved to verified PRO points"
    ))
}

fn prop2_and_corollary() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let (mut bad, mut positives, mut pairs) = (0, 0, 0);
    for _ in 0..500 {
        let n = rng.gen_range(1..=8);
        let prob = random_interval_problem(&mut rng, n, (0, 4), |r, _| r.gen_range(0..=2));
        let (b, p) = prop2_mismatches(&prob);
        bad += b;
        positives += p;
        pairs += common::interval::reference_ro(&prob).len() << n;
    }
    assert_eq!(bad, 0);
    for k in 0..200 {
        let n = rng.gen_range(1..=8);
        let prob = random_interval_problem(&mut rng, n, (2, 6), |r, p| r.gen_range(1..p));
        assert!(
            comb::corollary_check(&prob).unwrap(),
            "corollary instance {k}"
        );
    }
    Outcome::Pass(format!(
        "0 mismatches over {pairs} pairs ({positives} dominating moves); corollary holds on 200 instances"
    ))
}

fn solver_anchor() -> Outcome {
    let s = ProSettings::default();
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let mut err: f64 = 0.0;
    for case in 0..20 {
        let c = rand_sym(&mut rng, 10, 1.0);
        let r = nominal_lambda_max(&c, &s).unwrap();
        let top = sym_eig(&c).unwrap().max_value();
        assert!(
            close(r.value, top, 1e-6),
            "case {case}: {} vs {top}",
            r.value
        );
        assert!(close(r.value, r.dual_value, 1e-6), "case {case}");
        err = err
            .max((r.value - top).abs())
            .max((r.value - r.dual_value).abs());
    }
    Outcome::Pass(format!("20 matrices, max deviation {err:.2e}"))
}

fn all_pro() -> Outcome {
    let s = ProSettings::default();
    let rep = pro::check_all_pro(&example2().problem(), &s).unwrap();
    assert!(!rep.all_pro);
    assert!(close(rep.optimal_value, 1.0, 1e-4), "{}", rep.optimal_value);

    let u = MatrixBox::new(
        SymMatrix::diag(&[2.0, 1.0]),
        vec![SymMatrix::identity(2).scaled(0.5)],
        vec![0.0],
        vec![1.0],
    )
    .unwrap();
    let alpha = RobustSdpProblem::new(Spectrahedron::unit_trace(2), u.clone()).unwrap();
    assert_eq!(alpha, EigenInstance::new(u).problem());
    let rep2 = pro::check_all_pro(&alpha, &s).unwrap();
    assert!(rep2.all_pro);
    Outcome::Pass(format!(
        "example: false with value {:.6}; alpha*I instance: true",
        rep.optimal_value
    ))
}

type Criterion = (&'static str, Option<Duration>, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 8] = [
        (
            "robust eigenvalue example",
            Some(Duration::from_secs(1)),
            example2_eigen,
        ),
        (
            "robust quadratic knapsack",
            Some(Duration::from_secs(1)),
            knapsack,
        ),
        ("triangle max-cut", Some(Duration::from_secs(5)), triangle),
        ("GW rounding ratio", Some(Duration::from_secs(60)), gw_ratio),
        (
            "improvement soundness",
            Some(Duration::from_secs(120)),
            prop1_soundness,
        ),
        (
            "interval dominance oracle",
            Some(Duration::from_secs(60)),
            prop2_and_corollary,
        ),
        ("solver anchor", None, solver_anchor),
        ("all-PRO check", None, all_pro),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut hard_failures = 0;
    for (k, (name, limit, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let result = panic::catch_unwind(AssertUnwindSafe(f));
        let dt = t.elapsed();
        let slow = limit.is_some_and(|l| dt > l);
        let timing = match limit {
            Some(l) => format!("{:.2}s, limit {}s", dt.as_secs_f64(), l.as_secs()),
            None => format!("{:.2}s", dt.as_secs_f64()),
        };
        let line = match result {
            Ok(Outcome::Pass(d)) if !slow => {
                format!("PASS criterion {} ({name}): {d} [{timing}]", k + 1)
            }
            Ok(Outcome::Pass(d)) => {
                hard_failures += 1;
                format!(
                    "FAIL criterion {} ({name}): over time limit; {d} [{timing}]",
                    k + 1
                )
            }
            Ok(Outcome::Deviation { detail, note }) => {
                if slow {
                    hard_failures += 1;
                }
                format!(
                    "FAIL criterion {} ({name}): stated target not met, {note}; corrected check passes: {detail} [{timing}]",
                    k + 1
                )
            }
            Err(e) => {
                hard_failures += 1;
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                format!("FAIL criterion {} ({name}): {msg} [{timing}]", k + 1)
            }
        };
        println!("{line}");
    }
    if hard_failures > 0 {
        std::process::exit(1);
    }
}
