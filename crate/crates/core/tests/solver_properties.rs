mod common;

use common::{rand_psd, rand_sym};
use pareto_robust::conic::{LinExpr, ProgramBuilder, SolveStatus, SolverSettings};
use pareto_robust::eigen::nominal_lambda_max;
use pareto_robust::linalg::{dot, sym_eig, SymMatrix};
use pareto_robust::pro::ProSettings;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Instance built around a strictly feasible primal `X0, s0` and dual
/// `y0, S0`, so both sides are strictly feasible and an optimum exists.
#[test]
fn random_strictly_feasible_instances() {
    let settings = SolverSettings::default();
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    for case in 0..50 {
        let n = rng.gen_range(1..=8);
        let l = rng.gen_range(0..=3);
        let m = rng.gen_range(1..=10.min(n * (n + 1) / 2 + l));
        let mut x0 = rand_psd(&mut rng, n, n);
        x0.axpy(0.5, &SymMatrix::identity(n));
        let s0: Vec<f64> = (0..l).map(|_| rng.gen_range(0.5..2.0)).collect();
        let a: Vec<SymMatrix> = (0..m).map(|_| rand_sym(&mut rng, n, 1.0)).collect();
        let an: Vec<Vec<f64>> = (0..m)
            .map(|_| (0..l).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let y0: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut dual_slack = rand_psd(&mut rng, n, n);
        dual_slack.axpy(0.5, &SymMatrix::identity(n));
        let mut c = dual_slack.scaled(-1.0);
        for (yi, ai) in y0.iter().zip(&a) {
            c.axpy(*yi, ai);
        }
        let cn: Vec<f64> = (0..l)
            .map(|k| (0..m).map(|i| y0[i] * an[i][k]).sum::<f64>() - rng.gen_range(0.5..2.0))
            .collect();

        let mut pb = ProgramBuilder::new();
        let x = pb.add_psd(n);
        let s = pb.add_nonnegs(l);
        for i in 0..m {
            let mut row = LinExpr::new();
            row.add_pairing(x, &a[i]);
            for k in 0..l {
                row.add_scalar(s[k], an[i][k]);
            }
            let b = dot(&a[i], &x0) + (0..l).map(|k| an[i][k] * s0[k]).sum::<f64>();
            pb.eq(row, b);
        }
        let mut obj = LinExpr::new();
        obj.add_pairing(x, &c);
        for k in 0..l {
            obj.add_scalar(s[k], cn[k]);
        }
        pb.maximize(obj);
        let sol = pb.solve(&settings).unwrap();
        let r = &sol.solution;
        assert_eq!(r.status, SolveStatus::Optimal, "case {case}");
        assert!(
            r.iterations <= 100,
            "case {case}: {} iterations",
            r.iterations
        );
        assert!(r.gap <= 1e-6, "case {case}");
        assert!(
            sol.objective()
                <= sol.dual_objective()
                    + 10.0 * settings.gap_tol * (1.0 + sol.dual_objective().abs()),
            "case {case}"
        );

        // Independent checks from the data.
        let xs = sol.psd(x);
        let sv: Vec<f64> = s.iter().map(|&v| sol.scalar(v)).collect();
        assert!(sym_eig(xs).unwrap().min_value() >= -1e-7, "case {case}");
        assert!(sv.iter().all(|&v| v >= -1e-9), "case {case}");
        for i in 0..m {
            let b = dot(&a[i], &x0) + (0..l).map(|k| an[i][k] * s0[k]).sum::<f64>();
            let lhs = dot(&a[i], xs) + (0..l).map(|k| an[i][k] * sv[k]).sum::<f64>();
            assert!(
                (lhs - b).abs() < 1e-6 * (1.0 + b.abs()),
                "case {case} row {i}"
            );
        }
        let pobj = dot(&c, xs) + (0..l).map(|k| cn[k] * sv[k]).sum::<f64>();
        assert!(
            (pobj - sol.objective()).abs() < 1e-7 * (1.0 + pobj.abs()),
            "case {case}"
        );
        let y = &r.dual;
        let mut z = c.scaled(-1.0);
        for (yi, ai) in y.iter().zip(&a) {
            z.axpy(*yi, ai);
        }
        assert!(sym_eig(&z).unwrap().min_value() >= -1e-6, "case {case}");
    }
}

#[test]
fn lambda_max_matches_eigensolver() {
    let s = ProSettings::default();
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for case in 0..20 {
        let c = rand_sym(&mut rng, 10, 1.0);
        let r = nominal_lambda_max(&c, &s).unwrap();
        let top = sym_eig(&c).unwrap().max_value();
        assert!(
            (r.value - top).abs() < 1e-6,
            "case {case}: {} vs {top}",
            r.value
        );
        assert!((r.value - r.dual_value).abs() < 1e-6, "case {case}");
    }
}
