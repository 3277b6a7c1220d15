mod common;

use common::interval::{dominates, feasible_points, interval_data, prop2_mismatches, reference_ro};
use common::random_interval_problem;
use pareto_robust::comb::{self, BinaryRobustProblem, CombError, Feasible, Objective};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn prop2_agrees_with_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut positives = 0;
    for _ in 0..150 {
        let n = rng.gen_range(1..=8);
        let prob = random_interval_problem(&mut rng, n, (0, 4), |r, _| r.gen_range(0..=2));
        let (bad, pos) = prop2_mismatches(&prob);
        assert_eq!(bad, 0, "{prob:?}");
        positives += pos;
    }
    assert!(positives > 0);
}

#[test]
fn partition_is_consistent() {
    let mut rng = ChaCha8Rng::seed_from_u64(37);
    for _ in 0..100 {
        let n = rng.gen_range(1..=7);
        let prob = random_interval_problem(&mut rng, n, (-2, 4), |r, _| r.gen_range(0..=3));
        let (nom, dev) = interval_data(&prob);
        let pts = feasible_points(&prob);
        let part = comb::brute_force_pro(&prob).unwrap();
        let mut ro: Vec<Vec<u8>> = part
            .pro
            .iter()
            .cloned()
            .chain(part.dominated.iter().map(|d| d.x.clone()))
            .collect();
        ro.sort();
        assert_eq!(ro, reference_ro(&prob));
        for x in &part.pro {
            assert!(
                pts.iter().all(|y| !dominates(&nom, &dev, y, x)),
                "{x:?} is dominated"
            );
        }
        for d in &part.dominated {
            assert!(dominates(&nom, &dev, &d.witness, &d.x));
            assert!(part.pro.contains(&d.witness));
        }
    }
}

#[test]
fn ro_value_ignores_feasible_order() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for _ in 0..50 {
        let n = rng.gen_range(1..=8);
        let mut prob = random_interval_problem(&mut rng, n, (-3, 3), |r, _| r.gen_range(0..=2));
        let a = comb::enumerate_ro(&prob).unwrap();
        if let Feasible::List { points } = &mut prob.feasible {
            points.shuffle(&mut rng);
        }
        let b = comb::enumerate_ro(&prob).unwrap();
        assert_eq!(a.value, b.value);
        let (mut sa, mut sb) = (a.solutions, b.solutions);
        sa.sort();
        sb.sort();
        assert_eq!(sa, sb);
    }
}

#[test]
fn corollary_holds_with_positive_lower_corner() {
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    for _ in 0..200 {
        let n = rng.gen_range(1..=8);
        let prob = random_interval_problem(&mut rng, n, (2, 6), |r, p| r.gen_range(1..p));
        assert!(comb::corollary_check(&prob).unwrap(), "{prob:?}");
    }
}

#[test]
fn corollary_needs_nonnegative_lower_corner() {
    let mut rng = ChaCha8Rng::seed_from_u64(47);
    let mut violations = 0;
    for _ in 0..200 {
        let n = rng.gen_range(2..=6);
        let prob = random_interval_problem(&mut rng, n, (1, 3), |r, p| {
            let d = r.gen_range(1..=4);
            if d == p {
                d + 1
            } else {
                d
            }
        });
        let holds = comb::corollary_check(&prob).unwrap();
        let part = comb::brute_force_pro(&prob).unwrap();
        assert_eq!(holds, part.dominated.is_empty());
        violations += usize::from(!holds);
    }
    assert!(violations > 0);
}

#[test]
fn oracle_errors() {
    let mut rng = ChaCha8Rng::seed_from_u64(53);
    let prob = random_interval_problem(&mut rng, 3, (1, 2), |_, _| 0);
    assert!(matches!(
        comb::corollary_check(&prob),
        Err(CombError::Precondition(_))
    ));
    let knap = comb::knapsack_example(7);
    assert!(matches!(
        comb::prop2_check(&knap, &[0; 7], &[0; 7]),
        Err(CombError::Precondition(_))
    ));
    let big = BinaryRobustProblem {
        n: 30,
        feasible: Feasible::Knapsack {
            weights: vec![1.0; 30],
            capacity: 3.0,
        },
        objective: Objective::Linear,
        uncertainty: prob.uncertainty.clone(),
    };
    assert!(comb::brute_force_pro(&big).is_err());
}
