//! Largest-eigenvalue SDPs: the nominal problem `max ⟨C, X⟩, Tr X = 1` with
//! its dual `min y, yI − C ⪰ 0`, and the robust variant over a matrix box.

use serde::{Deserialize, Serialize};

use crate::conic::{LinExpr, MatrixExpr, ProgramBuilder};
use crate::linalg::{dot, sym_eig, SymMatrix};
use crate::pro::{
    self, ParetoVerdict, ProError, ProSettings, RobustSdpProblem, RobustSolution, Spectrahedron,
};
use crate::uncertainty::MatrixBox;

/// Grid points per coordinate used by scenario reports.
pub const DEFAULT_GRID: usize = 21;
/// At most this many box coordinates are swept; the rest sit at the center.
pub const MAX_GRID_COORDS: usize = 3;

/// `λ_top(X) ≥ 1 − RANK_ONE_TOL` certifies `X ≈ xxᵀ` on the unit-trace set.
const RANK_ONE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenInstance {
    pub uncertainty: MatrixBox,
}

impl EigenInstance {
    pub fn new(uncertainty: MatrixBox) -> Self {
        Self { uncertainty }
    }

    pub fn problem(&self) -> RobustSdpProblem {
        RobustSdpProblem::new(
            Spectrahedron::unit_trace(self.uncertainty.dim()),
            self.uncertainty.clone(),
        )
        .expect("unit-trace set matches the box dimension")
    }
}

fn solver_error(stage: &'static str, sol: &crate::conic::SolvedProgram) -> ProError {
    ProError::Solver {
        stage,
        status: sol.solution.status,
        certificate: sol.solution.certificate.clone(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaMax {
    /// Primal SDP value.
    pub value: f64,
    /// Optimal `y` of the dual SDP, solved separately.
    pub dual_value: f64,
    pub x: SymMatrix,
    /// Top eigenvector of `X` when `X` is certifiably rank one.
    pub vector: Option<Vec<f64>>,
}

/// Top eigenvector of a unit-trace `X` when its top eigenvalue is within
/// tolerance of 1.
pub fn rank_one_vector(x: &SymMatrix) -> Option<Vec<f64>> {
    let eig = sym_eig(x).ok()?;
    (eig.max_value() >= 1.0 - RANK_ONE_TOL).then(|| eig.eigenvector(0))
}

pub fn nominal_lambda_max(c: &SymMatrix, settings: &ProSettings) -> Result<LambdaMax, ProError> {
    let n = c.dim();
    let mut pb = ProgramBuilder::new();
    let xv = pb.add_psd(n);
    let xe = MatrixExpr::var(xv);
    pb.eq(xe.pair(&SymMatrix::identity(n)), 1.0);
    pb.maximize(xe.pair(c));
    let primal = pb.solve(&settings.solver)?;
    if !primal.solution.is_optimal() {
        return Err(solver_error("eigenvalue primal", &primal));
    }

    let mut db = ProgramBuilder::new();
    let s = db.add_psd(n);
    let y = db.add_free();
    for i in 0..n {
        for j in i..n {
            let mut row = LinExpr::new();
            row.add_pairing(s, &SymMatrix::basis(n, i, j).scaled(-1.0));
            if i == j {
                row.add_scalar(y, 1.0);
            }
            db.eq(row, c.get(i, j));
        }
    }
    let mut obj = LinExpr::new();
    obj.add_scalar(y, 1.0);
    db.minimize(obj);
    let dual = db.solve(&settings.solver)?;
    if !dual.solution.is_optimal() {
        return Err(solver_error("eigenvalue dual", &dual));
    }

    let x = primal.psd(xv).clone();
    Ok(LambdaMax {
        value: primal.objective(),
        dual_value: dual.scalar(y),
        vector: rank_one_vector(&x),
        x,
    })
}

pub fn robust_lambda_max(
    inst: &EigenInstance,
    settings: &ProSettings,
) -> Result<RobustSolution, ProError> {
    pro::solve_robust(&inst.problem(), settings)
}

/// Grid over the first [`MAX_GRID_COORDS`] active box coordinates, with
/// `points` values per coordinate from lower to upper bound.
pub fn mu_grid(u: &MatrixBox, points: usize) -> Vec<Vec<f64>> {
    let center = u.relint_mu();
    let swept: Vec<usize> = u.active().iter().copied().take(MAX_GRID_COORDS).collect();
    let points = points.max(1);
    let mut grid = vec![center];
    for &k in &swept {
        let (lo, hi) = (u.lo()[k], u.hi()[k]);
        grid = grid
            .into_iter()
            .flat_map(|mu| {
                (0..points).map(move |t| {
                    let mut m = mu.clone();
                    m[k] = if points == 1 {
                        0.5 * (lo + hi)
                    } else {
                        lo + (hi - lo) * t as f64 / (points - 1) as f64
                    };
                    m
                })
            })
            .collect();
    }
    grid
}

/// Outer minimization over the grid: `min_μ λ_max(P(μ))`, an upper bound on
/// the robust value that is tight when the minimizing `μ` is on the grid.
pub fn grid_min_lambda_max(u: &MatrixBox, points: usize) -> Result<f64, ProError> {
    mu_grid(u, points)
        .iter()
        .map(|mu| {
            sym_eig(&u.at(mu))
                .map(|e| e.max_value())
                .map_err(|e| ProError::Invalid(e.to_string()))
        })
        .try_fold(f64::INFINITY, |m, v| v.map(|v| m.min(v)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridReport {
    pub mu: Vec<Vec<f64>>,
    pub input: Vec<f64>,
    pub output: Vec<f64>,
}

impl GridReport {
    pub fn new(u: &MatrixBox, before: &SymMatrix, after: &SymMatrix, points: usize) -> Self {
        let mu = mu_grid(u, points);
        let input = mu.iter().map(|m| dot(&u.at(m), before)).collect();
        let output = mu.iter().map(|m| dot(&u.at(m), after)).collect();
        Self { mu, input, output }
    }

    /// `min_k (output_k − input_k)`.
    pub fn min_gain(&self) -> f64 {
        self.output
            .iter()
            .zip(&self.input)
            .map(|(a, b)| a - b)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_gain(&self) -> f64 {
        self.output
            .iter()
            .zip(&self.input)
            .map(|(a, b)| a - b)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProEigenReport {
    pub robust_value: f64,
    pub input: SymMatrix,
    pub x: SymMatrix,
    pub vector: Option<Vec<f64>>,
    pub verdict: ParetoVerdict,
    pub grid: GridReport,
}

/// Improves `start` (default: the solver's robust optimum) to a PRO solution
/// and compares both on the scenario grid.
pub fn robust_lambda_max_pro(
    inst: &EigenInstance,
    start: Option<&SymMatrix>,
    grid_points: usize,
    settings: &ProSettings,
) -> Result<ProEigenReport, ProError> {
    let prob = inst.problem();
    let (ro, face) = pro::solve_robust_face(&prob, settings)?;
    let input = start.cloned().unwrap_or_else(|| ro.x.clone());
    let (verdict, y) = pro::verify_pro_with(&prob, &input, ro.worst_case, &face, settings)?;
    let x = if verdict.is_pro() { input.clone() } else { y };
    Ok(ProEigenReport {
        robust_value: ro.worst_case,
        grid: GridReport::new(&inst.uncertainty, &input, &x, grid_points),
        vector: rank_one_vector(&x),
        input,
        x,
        verdict,
    })
}

/// Box `P(μ) = I + μ M` with `M = [[1, −1], [−1, 1]]`, `μ ∈ [0, 1]`.
pub fn example2() -> EigenInstance {
    let m = SymMatrix::from_rows(&[vec![1.0, -1.0], vec![-1.0, 1.0]]).expect("symmetric");
    EigenInstance::new(
        MatrixBox::new(SymMatrix::identity(2), vec![m], vec![0.0], vec![1.0]).expect("valid box"),
    )
}
