mod common;

use common::rand_sym;
use pareto_robust::conic::{LinExpr, ProgramBuilder, SolverSettings};
use pareto_robust::linalg::{dot, SymMatrix};
use pareto_robust::uncertainty::{IntervalUncertainty, KnapsackSoc, MatrixBox, Pairing};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_box(rng: &mut impl Rng, n: usize, k: usize) -> MatrixBox {
    let lo: Vec<f64> = (0..k).map(|_| rng.gen_range(-2.0..1.0)).collect();
    let hi = lo.iter().map(|l| l + rng.gen_range(0.1..2.0)).collect();
    MatrixBox::new(
        rand_sym(rng, n, 1.0),
        (0..k).map(|_| rand_sym(rng, n, 1.0)).collect(),
        lo,
        hi,
    )
    .unwrap()
}

/// Minimum of `⟨P(μ), X⟩` over a 101-point grid per coordinate.
fn grid_min(u: &MatrixBox, x: &SymMatrix) -> f64 {
    let base = dot(&u.at(&vec![0.0; u.lo().len()]), x);
    let t: Vec<f64> = u.directions().iter().map(|d| dot(d, x)).collect();
    let k = t.len();
    let mut best = f64::INFINITY;
    let total = 101usize.pow(k as u32);
    for idx in 0..total {
        let mut rem = idx;
        let mut v = base;
        for i in 0..k {
            let s = rem % 101;
            rem /= 101;
            let mu = u.lo()[i] + (u.hi()[i] - u.lo()[i]) * s as f64 / 100.0;
            v += mu * t[i];
        }
        best = best.min(v);
    }
    best
}

#[test]
fn box_inner_min_matches_grid() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..40 {
        let n = rng.gen_range(1..5);
        let k = rng.gen_range(1..=3);
        let u = random_box(&mut rng, n, k);
        let x = rand_sym(&mut rng, n, 1.0);
        let (v, mu) = u.inner_min(&x).unwrap();
        assert!((v - grid_min(&u, &x)).abs() < 1e-9);
        assert!((dot(&u.at(&mu), &x) - v).abs() < 1e-9);
    }
}

#[test]
fn relint_points_are_strict() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..50 {
        let u = random_box(&mut rng, 3, 3);
        let mu = u.relint_mu();
        for &i in u.active() {
            assert!(u.lo()[i] < mu[i] && mu[i] < u.hi()[i]);
        }
    }
    let p = KnapsackSoc.relint_point();
    assert!(p[0] > 1.0 && p[0] * p[0] < p[1] && p[1] < 4.0);
    let iv = IntervalUncertainty::new(vec![1.0, 2.0], vec![0.5, 0.0]).unwrap();
    let q = iv.relint_point();
    assert!(0.5 < q[0] && q[0] < 1.5 && q[1] == 2.0);
}

#[test]
fn interval_inner_min_matches_corners() {
    // The box is [p̄ − Δp, p̄].
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let n = rng.gen_range(1..6);
        let nominal: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let dev: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..2.0)).collect();
        let u = IntervalUncertainty::new(nominal.clone(), dev.clone()).unwrap();
        let c: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let corners = (0u32..1 << n).map(|m| {
            (0..n)
                .map(|i| c[i] * (nominal[i] - if m >> i & 1 == 1 { dev[i] } else { 0.0 }))
                .sum::<f64>()
        });
        let best = corners.fold(f64::INFINITY, f64::min);
        let v = u.inner_min(&c).unwrap().0;
        assert!(
            (v - best).abs() < 1e-12 * (1.0 + best.abs()) * 10.0,
            "{v} vs {best}"
        );
    }
}

#[test]
fn knapsack_inner_min_matches_dense_sampling() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let u = KnapsackSoc;
    for _ in 0..50 {
        let c = [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)];
        let (v, p) = u.inner_min(&c).unwrap();
        assert!(u.contains(&p, 1e-12));
        assert!((c[0] * p[0] + c[1] * p[1] - v).abs() < 1e-12);
        let mut sampled = f64::INFINITY;
        for a in 0..=400 {
            let p1 = 1.0 + a as f64 / 400.0;
            for b in 0..=400 {
                let p2 = p1 * p1 + (4.0 - p1 * p1) * b as f64 / 400.0;
                sampled = sampled.min(c[0] * p1 + c[1] * p2);
            }
        }
        assert!(v <= sampled + 1e-12);
        assert!(sampled - v < 1e-4, "{c:?}: {v} vs {sampled}");
    }
}

/// Maximizes the dual-cone lower bound for a fixed `Z`; LP duality makes the
/// optimum equal to `min_μ ⟨P(μ), Z⟩`, so satisfiability of the rows and the
/// sign of the inner minimum agree.
#[test]
fn dual_cone_rows_are_sound_and_complete() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let settings = SolverSettings::default();
    for case in 0..200 {
        let n = rng.gen_range(1..4);
        let k = rng.gen_range(1..=3);
        let u = random_box(&mut rng, n, k);
        let z = rand_sym(&mut rng, n, 1.0);
        let (v, _) = u.inner_min(&z).unwrap();
        let rows = u.dual_cone_rows();
        let mut pb = ProgramBuilder::new();
        let pair = |p: &Pairing| match p {
            Pairing::Matrix(m) => LinExpr::constant(dot(m, &z)),
            Pairing::Vector(_) => unreachable!(),
        };
        let bound = rows.append_lower_bound(&mut pb, &pair);
        pb.maximize(bound);
        let sol = pb.solve(&settings).unwrap();
        assert!(sol.solution.is_optimal(), "case {case}");
        assert!(
            (sol.objective() - v).abs() < 1e-6 * (1.0 + v.abs()),
            "case {case}: {} vs {v}",
            sol.objective()
        );
        // Membership rows: feasible exactly when the inner minimum is nonnegative.
        let mut pb = ProgramBuilder::new();
        rows.append_membership(&mut pb, &pair);
        let mut obj = LinExpr::new();
        obj.add_constant(0.0);
        pb.maximize(obj);
        let feasible = pb.solve(&settings).unwrap().solution.is_optimal();
        if v >= 1e-6 {
            assert!(feasible, "case {case}: v = {v}");
        }
        if feasible {
            assert!(v >= -1e-8, "case {case}: v = {v}");
        }
    }
}
