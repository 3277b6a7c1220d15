#![allow(dead_code)]

use pareto_robust::linalg::SymMatrix;
use pareto_robust::pro::{RobustSdpProblem, Spectrahedron};
use pareto_robust::uncertainty::MatrixBox;
use rand::Rng;

pub fn rand_sym(rng: &mut impl Rng, n: usize, scale: f64) -> SymMatrix {
    SymMatrix::from_upper_fn(n, |_, _| rng.gen_range(-scale..scale))
}

pub fn rand_psd(rng: &mut impl Rng, n: usize, rank: usize) -> SymMatrix {
    let mut m = SymMatrix::zeros(n);
    for _ in 0..rank {
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        m.axpy(1.0, &SymMatrix::outer(&v));
    }
    m
}

/// Uniform sample of the μ-box.
pub fn sample_mu(rng: &mut impl Rng, u: &MatrixBox) -> Vec<f64> {
    u.lo()
        .iter()
        .zip(u.hi())
        .map(|(&lo, &hi)| if hi > lo { rng.gen_range(lo..=hi) } else { lo })
        .collect()
}

/// Random bounded robust SDP. `family` 0 is generic; family 1 has
/// `P_0 = cI` and PSD directions with `μ ≥ 0` on the unit-trace set, so every
/// feasible point is robustly optimal; family 2 lives on the elliptope.
pub fn random_robust_sdp(rng: &mut impl Rng, family: usize) -> RobustSdpProblem {
    let n = rng.gen_range(2..=6);
    let k = rng.gen_range(1..=3);
    match family {
        0 => {
            let base = rand_sym(rng, n, 1.0);
            let dirs = (0..k).map(|_| rand_sym(rng, n, 1.0)).collect();
            let lo: Vec<f64> = (0..k).map(|_| rng.gen_range(-1.0..0.0)).collect();
            let hi = lo.iter().map(|l| l + rng.gen_range(0.1..1.5)).collect();
            let u = MatrixBox::new(base, dirs, lo, hi).unwrap();
            RobustSdpProblem::new(Spectrahedron::unit_trace(n), u).unwrap()
        }
        1 => {
            let c = rng.gen_range(0.5..2.0);
            let dirs = (0..k)
                .map(|_| {
                    let rank = rng.gen_range(1..n);
                    rand_psd(rng, n, rank)
                })
                .collect();
            let hi = (0..k).map(|_| rng.gen_range(0.5..1.5)).collect();
            let u =
                MatrixBox::new(SymMatrix::identity(n).scaled(c), dirs, vec![0.0; k], hi).unwrap();
            RobustSdpProblem::new(Spectrahedron::unit_trace(n), u).unwrap()
        }
        _ => {
            let base = rand_psd(rng, n, n);
            let dirs = (0..k).map(|_| rand_sym(rng, n, 0.5)).collect();
            let lo: Vec<f64> = (0..k).map(|_| rng.gen_range(-1.0..0.0)).collect();
            let hi = lo.iter().map(|l| l + rng.gen_range(0.1..1.0)).collect();
            let u = MatrixBox::new(base, dirs, lo, hi).unwrap();
            RobustSdpProblem::new(Spectrahedron::unit_diagonal(n), u).unwrap()
        }
    }
}

/// Linear binary problem over a random feasible list with integer interval
/// data `p̄ ∈ [pbar.0, pbar.1]`, `Δp ∈ [dev.0, dev.1]`.
pub fn random_interval_problem(
    rng: &mut impl Rng,
    n: usize,
    pbar: (i32, i32),
    dev: impl Fn(&mut dyn rand::RngCore, i32) -> i32,
) -> pareto_robust::comb::BinaryRobustProblem {
    use pareto_robust::comb::{BinaryRobustProblem, Feasible, Objective};
    use pareto_robust::uncertainty::{IntervalUncertainty, UncertaintySet};
    let nominal: Vec<i32> = (0..n).map(|_| rng.gen_range(pbar.0..=pbar.1)).collect();
    let mut deviation: Vec<i32> = nominal.iter().map(|&p| dev(rng, p)).collect();
    if deviation.iter().all(|&d| d == 0) {
        deviation[0] = 1;
    }
    let count = rng.gen_range(1..=(1usize << n).min(48));
    let points = (0..count)
        .map(|_| (0..n).map(|_| rng.gen_range(0..=1u8)).collect())
        .collect();
    BinaryRobustProblem {
        n,
        feasible: Feasible::List { points },
        objective: Objective::Linear,
        uncertainty: UncertaintySet::Interval(
            IntervalUncertainty::new(
                nominal.iter().map(|&v| v as f64).collect(),
                deviation.iter().map(|&v| v as f64).collect(),
            )
            .unwrap(),
        ),
    }
}

/// Brute-force references for linear binary problems over one-sided intervals.
pub mod interval {
    use pareto_robust::comb::{BinaryRobustProblem, Feasible};
    use pareto_robust::uncertainty::UncertaintySet;

    pub fn interval_data(prob: &BinaryRobustProblem) -> (Vec<f64>, Vec<f64>) {
        match &prob.uncertainty {
            UncertaintySet::Interval(u) => (u.nominal().to_vec(), u.deviation().to_vec()),
            _ => unreachable!(),
        }
    }

    /// `pᵀv` at every vertex of `[p̄ − Δp, p̄]`.
    pub fn vertex_values(nominal: &[f64], dev: &[f64], v: &[f64]) -> Vec<f64> {
        let n = nominal.len();
        (0u32..1 << n)
            .map(|m| {
                (0..n)
                    .map(|i| v[i] * (nominal[i] - if m >> i & 1 == 1 { dev[i] } else { 0.0 }))
                    .sum()
            })
            .collect()
    }

    pub fn diff(y: &[u8], x: &[u8]) -> Vec<f64> {
        y.iter()
            .zip(x)
            .map(|(&a, &b)| f64::from(a) - f64::from(b))
            .collect()
    }

    /// Reference dominance: `(y − x)ᵀp ≥ 0` at all vertices and `> 0` at one.
    pub fn dominates(nominal: &[f64], dev: &[f64], y: &[u8], x: &[u8]) -> bool {
        let vals = vertex_values(nominal, dev, &diff(y, x));
        vals.iter().all(|&v| v >= 0.0) && vals.iter().any(|&v| v > 0.0)
    }

    pub fn worst(nominal: &[f64], dev: &[f64], x: &[u8]) -> f64 {
        let v: Vec<f64> = x.iter().map(|&b| f64::from(b)).collect();
        vertex_values(nominal, dev, &v)
            .into_iter()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn feasible_points(prob: &BinaryRobustProblem) -> Vec<Vec<u8>> {
        match &prob.feasible {
            Feasible::List { points } => points.clone(),
            _ => unreachable!(),
        }
    }

    pub fn reference_ro(prob: &BinaryRobustProblem) -> Vec<Vec<u8>> {
        let (nom, dev) = interval_data(prob);
        let pts = feasible_points(prob);
        let best = pts
            .iter()
            .map(|x| worst(&nom, &dev, x))
            .fold(f64::NEG_INFINITY, f64::max);
        let mut ro: Vec<Vec<u8>> = pts
            .into_iter()
            .filter(|x| worst(&nom, &dev, x) == best)
            .collect();
        ro.sort();
        ro.dedup();
        ro
    }

    pub fn moves(x: &[u8]) -> Vec<Vec<i8>> {
        let n = x.len();
        (0u32..1 << n)
            .map(|m| {
                (0..n)
                    .map(|i| {
                        if m >> i & 1 == 1 {
                            1 - 2 * x[i] as i8
                        } else {
                            0
                        }
                    })
                    .collect()
            })
            .collect()
    }

    /// `(mismatches, positives)` of `prop2_check` against brute-force
    /// dominance over every move from every robust optimum.
    pub fn prop2_mismatches(prob: &BinaryRobustProblem) -> (usize, usize) {
        let (nom, dev) = interval_data(prob);
        let pts = feasible_points(prob);
        let (mut bad, mut positives) = (0, 0);
        for x in reference_ro(prob) {
            for z in moves(&x) {
                let y: Vec<u8> = x
                    .iter()
                    .zip(&z)
                    .map(|(&a, &d)| (a as i8 + d) as u8)
                    .collect();
                let expected = pts.contains(&y) && dominates(&nom, &dev, &y, &x);
                let got = pareto_robust::comb::prop2_check(prob, &x, &z).unwrap();
                bad += usize::from(got != expected);
                positives += usize::from(got);
            }
        }
        (bad, positives)
    }
}

/// Improves the robust optimum (and `I/n` for family 1) of `cases` random
/// robust SDPs, checks each output, and returns the number of dominated
/// starts.
pub fn soundness_suite(seed: u64, cases: usize) -> usize {
    use pareto_robust::linalg::dot;
    use pareto_robust::pro::{self, ProSettings};
    use rand::SeedableRng;
    let s = ProSettings::default();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut dominated = 0;
    for case in 0..cases {
        let prob = random_robust_sdp(&mut rng, case % 3);
        let ro = pro::solve_robust(&prob, &s).unwrap_or_else(|e| panic!("case {case}: {e}"));
        let n = prob.dim();
        let mut starts = vec![ro.x.clone()];
        if case % 3 == 1 {
            starts.push(SymMatrix::identity(n).scaled(1.0 / n as f64));
        }
        for x in starts {
            assert!(pro::verify_pro(&prob, &x, &s).unwrap().value >= ro.worst_case - 1e-6);
            let (y, first) =
                pro::improve_to_pro(&prob, &x, &s).unwrap_or_else(|e| panic!("case {case}: {e}"));
            if !first.is_pro() {
                dominated += 1;
            }
            let again =
                pro::verify_pro(&prob, &y, &s).unwrap_or_else(|e| panic!("case {case}: {e}"));
            assert!(again.is_pro(), "case {case}: {again:?}");
            assert!(
                (prob.worst_case(&y) - prob.worst_case(&x)).abs() < 1e-6,
                "case {case}"
            );
            let z = &y - &x;
            let u = prob.uncertainty();
            for _ in 0..1000 {
                let g = dot(&u.at(&sample_mu(&mut rng, u)), &z);
                assert!(g >= -1e-8, "case {case}: <P, Z> = {g}");
            }
            if let Some(d) = &first.direction {
                assert!(prob.nominal(d) > first.strict_tol);
            }
        }
    }
    dominated
}
