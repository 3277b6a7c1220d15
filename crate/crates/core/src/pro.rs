//! Robust SDPs with matrix-box objective uncertainty: the robust counterpart,
//! verification and improvement of Pareto robust optimality, and the
//! decision whether every robustly optimal solution is Pareto robustly
//! optimal.
//!
//! All programs share one ingredient: the worst-case value
//! `min_μ ⟨P(μ), Z⟩` of an affine matrix expression `Z`, written through the
//! box's dual-cone rows as the maximum of a linear function of auxiliary
//! nonnegative variables.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conic::{
    Basis, Certificate, ConicError, LinExpr, MatrixExpr, ProgramBuilder, PsdVar, ScalarVar,
    SolveStatus, SolvedProgram, SolverSettings,
};
use nalgebra::DMatrix;

use crate::linalg::{dot, sym_eig, SymMatrix};
use crate::uncertainty::{MatrixBox, Pairing, RowKind, UncertaintyError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProError {
    #[error(transparent)]
    Uncertainty(#[from] UncertaintyError),
    #[error(transparent)]
    Conic(#[from] ConicError),
    #[error("invalid problem: {0}")]
    Invalid(String),
    #[error("candidate is not feasible: {0}")]
    NotFeasible(String),
    #[error("candidate is not robustly optimal: worst case {value} < robust value {robust_value}")]
    NotRobustOptimal { value: f64, robust_value: f64 },
    #[error("{stage}: solver returned {status:?}")]
    Solver {
        stage: &'static str,
        status: SolveStatus,
        certificate: Option<Certificate>,
    },
}

impl ProError {
    /// True for infeasible or unbounded programs (as opposed to malformed
    /// input or numerical trouble).
    pub fn is_infeasible(&self) -> bool {
        matches!(
            self,
            ProError::Solver {
                status: SolveStatus::PrimalInfeasible | SolveStatus::DualInfeasible,
                ..
            }
        )
    }
}

/// `{X ⪰ 0 : ⟨A_j, X⟩ = b_j}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpectrahedronRaw", into = "SpectrahedronRaw")]
pub struct Spectrahedron {
    dim: usize,
    rows: Vec<(SymMatrix, f64)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SpectrahedronRaw {
    rows: Vec<SpectrahedronRow>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SpectrahedronRow {
    a: SymMatrix,
    b: f64,
}

impl TryFrom<SpectrahedronRaw> for Spectrahedron {
    type Error = ProError;
    fn try_from(r: SpectrahedronRaw) -> Result<Self, ProError> {
        Spectrahedron::new(r.rows.into_iter().map(|row| (row.a, row.b)).collect())
    }
}

impl From<Spectrahedron> for SpectrahedronRaw {
    fn from(s: Spectrahedron) -> Self {
        SpectrahedronRaw {
            rows: s
                .rows
                .into_iter()
                .map(|(a, b)| SpectrahedronRow { a, b })
                .collect(),
        }
    }
}

impl Spectrahedron {
    pub fn new(rows: Vec<(SymMatrix, f64)>) -> Result<Self, ProError> {
        let Some(first) = rows.first() else {
            return Err(ProError::Invalid(
                "spectrahedron needs at least one row".into(),
            ));
        };
        let dim = first.0.dim();
        for (j, (a, b)) in rows.iter().enumerate() {
            if a.dim() != dim {
                return Err(ProError::Invalid(format!(
                    "row {j} has dimension {}, expected {dim}",
                    a.dim()
                )));
            }
            if !b.is_finite() || a.as_slice().iter().any(|v| !v.is_finite()) {
                return Err(ProError::Invalid(format!("row {j} is not finite")));
            }
        }
        Ok(Self { dim, rows })
    }

    /// `{X ⪰ 0 : Tr X = 1}`.
    pub fn unit_trace(dim: usize) -> Self {
        Self {
            dim,
            rows: vec![(SymMatrix::identity(dim), 1.0)],
        }
    }

    /// `{X ⪰ 0 : X_ii = 1}`.
    pub fn unit_diagonal(dim: usize) -> Self {
        Self {
            dim,
            rows: (0..dim)
                .map(|i| (SymMatrix::basis(dim, i, i), 1.0))
                .collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> &[(SymMatrix, f64)] {
        &self.rows
    }

    /// `max_j |⟨A_j, X⟩ − b_j| / (1 + |b_j|)`.
    pub fn residual(&self, x: &SymMatrix) -> f64 {
        self.rows
            .iter()
            .map(|(a, b)| (dot(a, x) - b).abs() / (1.0 + b.abs()))
            .fold(0.0, f64::max)
    }

    /// Checks rows and positive semidefiniteness with tolerance `tol`
    /// (relative to `max(1, ‖X‖_F)` for the eigenvalue test).
    pub fn check_member(&self, x: &SymMatrix, tol: f64) -> Result<(), ProError> {
        if x.dim() != self.dim {
            return Err(ProError::NotFeasible(format!(
                "dimension {} does not match {}",
                x.dim(),
                self.dim
            )));
        }
        let r = self.residual(x);
        if r > tol {
            return Err(ProError::NotFeasible(format!(
                "constraint residual {r:.3e}"
            )));
        }
        let eig = sym_eig(x).map_err(|e| ProError::NotFeasible(e.to_string()))?;
        let lmin = eig.min_value();
        if lmin < -tol * x.frobenius_norm().max(1.0) {
            return Err(ProError::NotFeasible(format!(
                "smallest eigenvalue {lmin:.3e}"
            )));
        }
        Ok(())
    }

    fn append(&self, pb: &mut ProgramBuilder, x: &MatrixExpr) {
        for (a, b) in &self.rows {
            pb.eq(x.pair(a), *b);
        }
    }
}

/// `max_{X ∈ feasible} min_{P ∈ uncertainty} ⟨P, X⟩`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RobustSdpRaw", into = "RobustSdpRaw")]
pub struct RobustSdpProblem {
    feasible: Spectrahedron,
    uncertainty: MatrixBox,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RobustSdpRaw {
    feasible: Spectrahedron,
    uncertainty: MatrixBox,
}

impl TryFrom<RobustSdpRaw> for RobustSdpProblem {
    type Error = ProError;
    fn try_from(r: RobustSdpRaw) -> Result<Self, ProError> {
        RobustSdpProblem::new(r.feasible, r.uncertainty)
    }
}

impl From<RobustSdpProblem> for RobustSdpRaw {
    fn from(p: RobustSdpProblem) -> Self {
        RobustSdpRaw {
            feasible: p.feasible,
            uncertainty: p.uncertainty,
        }
    }
}

impl RobustSdpProblem {
    pub fn new(feasible: Spectrahedron, uncertainty: MatrixBox) -> Result<Self, ProError> {
        if feasible.dim() != uncertainty.dim() {
            return Err(ProError::Invalid(format!(
                "feasible set has dimension {}, uncertainty {}",
                feasible.dim(),
                uncertainty.dim()
            )));
        }
        Ok(Self {
            feasible,
            uncertainty,
        })
    }

    pub fn feasible(&self) -> &Spectrahedron {
        &self.feasible
    }

    pub fn uncertainty(&self) -> &MatrixBox {
        &self.uncertainty
    }

    pub fn dim(&self) -> usize {
        self.feasible.dim()
    }

    /// `min_μ ⟨P(μ), X⟩`.
    pub fn worst_case(&self, x: &SymMatrix) -> f64 {
        self.uncertainty
            .inner_min(x)
            .expect("dimension checked at construction")
            .0
    }

    /// `⟨P(μ̂), X⟩` at the relative-interior scenario.
    pub fn nominal(&self, x: &SymMatrix) -> f64 {
        dot(&self.uncertainty.relint_point(), x)
    }

    fn pairing<'a>(z: &'a MatrixExpr) -> impl Fn(&Pairing) -> LinExpr + 'a {
        move |p| match p {
            Pairing::Matrix(m) => z.pair(m),
            Pairing::Vector(_) => unreachable!("matrix box pairs with matrices"),
        }
    }

    fn worst_case_expr(&self, pb: &mut ProgramBuilder, z: &MatrixExpr) -> LinExpr {
        self.uncertainty
            .dual_cone_rows()
            .append_lower_bound(pb, &Self::pairing(z))
    }

    /// Conic form of the robust counterpart; also returns the auxiliary
    /// handles of the worst-case rows.
    pub fn robust_counterpart(&self) -> (ProgramBuilder, PsdVar, Vec<Option<ScalarVar>>) {
        let mut pb = ProgramBuilder::new();
        let x = pb.add_psd(self.dim());
        let xe = MatrixExpr::var(x);
        self.feasible.append(&mut pb, &xe);
        let (w, aux) = self.uncertainty.dual_cone_rows().append_lower_bound_with(
            &mut pb,
            &Self::pairing(&xe),
            &[],
        );
        pb.maximize(w);
        (pb, x, aux)
    }

    /// Adds `X = Q W Qᵀ` restricted to the robust-optimal set described by
    /// `face`, and `worst case ≥ floor` when a floor is given.
    fn append_robust_optimal(
        &self,
        pb: &mut ProgramBuilder,
        face: &RobustFace,
        floor: Option<f64>,
    ) -> MatrixExpr {
        let w = pb.add_psd(face.basis.rank());
        let xe = MatrixExpr::congruence(w, face.basis.clone());
        self.feasible.append(pb, &xe);
        let (wc, _) = self.uncertainty.dual_cone_rows().append_lower_bound_with(
            pb,
            &Self::pairing(&xe),
            &face.fixed_zero,
        );
        if let Some(v) = floor {
            pb.geq(wc, v);
        }
        xe
    }

    /// Conic form of the direction search from `x`: maximize the nominal gain
    /// `⟨P̂, Y − X⟩` over feasible `Y` on the robust-optimal face with
    /// `worst case of Y − X ≥ −slack`.
    pub fn direction_program(
        &self,
        x: &SymMatrix,
        face: &RobustFace,
        slack: f64,
    ) -> (ProgramBuilder, MatrixExpr) {
        let mut pb = ProgramBuilder::new();
        let w = pb.add_psd(face.basis.rank());
        let ye = MatrixExpr::congruence(w, face.basis.clone());
        self.feasible.append(&mut pb, &ye);
        let z = ye.clone().plus_constant(x, -1.0);
        let wz = self.worst_case_expr(&mut pb, &z);
        pb.geq(wz, -slack);
        pb.maximize(z.pair(&self.uncertainty.relint_point()));
        (pb, ye)
    }

    /// Nominal objective over the robustly optimal set.
    pub fn reopt_program(
        &self,
        face: &RobustFace,
        floor: Option<f64>,
    ) -> (ProgramBuilder, MatrixExpr) {
        let mut pb = ProgramBuilder::new();
        let xe = self.append_robust_optimal(&mut pb, face, floor);
        pb.maximize(xe.pair(&self.uncertainty.relint_point()));
        (pb, xe)
    }

    /// Joint program over a robustly optimal `X` and a feasible `Y`
    /// dominating it.
    pub fn all_pro_program(
        &self,
        face: &RobustFace,
        floor: Option<f64>,
    ) -> (ProgramBuilder, MatrixExpr, MatrixExpr) {
        let mut pb = ProgramBuilder::new();
        let xe = self.append_robust_optimal(&mut pb, face, floor);
        let w = pb.add_psd(face.basis.rank());
        let ye = MatrixExpr::congruence(w, face.basis.clone());
        self.feasible.append(&mut pb, &ye);
        let z = ye.clone().plus_expr(&xe, -1.0);
        self.uncertainty
            .dual_cone_rows()
            .append_membership(&mut pb, &Self::pairing(&z));
        pb.maximize(z.pair(&self.uncertainty.relint_point()));
        (pb, xe, ye)
    }
}

/// Smallest face containing the robustly optimal set, read off a maximally
/// complementary primal-dual pair of the robust counterpart.
///
/// Every robustly optimal `X` lies in `{Q W Qᵀ : W ⪰ 0}` and admits worst-case
/// auxiliaries vanishing on `fixed_zero`; conversely such a feasible point is
/// complementary to the dual optimum and hence robustly optimal.
#[derive(Debug, Clone, PartialEq)]
pub struct RobustFace {
    pub basis: Arc<Basis>,
    pub fixed_zero: Vec<bool>,
}

/// A direction is excluded when its dual slack exceeds both this multiple of
/// the primal value and [`FACE_ABS`] (relative to the slack scale).
const FACE_RATIO: f64 = 1e2;
const FACE_ABS: f64 = 1e-6;

impl RobustFace {
    fn from_solution(
        x: &SymMatrix,
        s: &SymMatrix,
        aux_x: &[f64],
        aux_s: &[f64],
    ) -> Result<Self, ProError> {
        let eig = sym_eig(s).map_err(|e| ProError::Invalid(e.to_string()))?;
        let scale = s.frobenius_norm().max(1.0);
        let n = x.dim();
        let mut cols = Vec::new();
        let mut best: Option<(f64, Vec<f64>)> = None;
        for k in 0..n {
            let q = eig.eigenvector(k);
            let sk = eig.values[k];
            let xk = x.quad_form(&q);
            if sk > FACE_RATIO * xk && sk > FACE_ABS * scale {
                let ratio = xk / sk;
                if best.as_ref().is_none_or(|(r, _)| ratio > *r) {
                    best = Some((ratio, q));
                }
            } else {
                cols.push(q);
            }
        }
        if cols.is_empty() {
            // Keep the least excluded direction rather than an empty face.
            cols.push(best.expect("dimension is positive").1);
        }
        let aux_scale = aux_s.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        let fixed_zero = aux_x
            .iter()
            .zip(aux_s)
            .map(|(&xv, &sv)| sv > FACE_RATIO * xv && sv > FACE_ABS * aux_scale)
            .collect();
        Ok(Self {
            basis: Arc::new(Basis::new(n, cols)),
            fixed_zero,
        })
    }

    /// The whole cone, with no auxiliary fixed.
    pub fn full(dim: usize) -> Self {
        let cols = (0..dim)
            .map(|k| (0..dim).map(|i| if i == k { 1.0 } else { 0.0 }).collect())
            .collect();
        Self {
            basis: Arc::new(Basis::new(dim, cols)),
            fixed_zero: Vec::new(),
        }
    }

    pub fn rank(&self) -> usize {
        self.basis.rank()
    }

    /// Descriptions of the robust-optimal set to try in order: the face
    /// itself, then with every auxiliary free plus a worst-case floor, then
    /// the whole cone with a looser floor. The fallbacks cover faces that
    /// were read off an inaccurate solution.
    fn attempts(&self, v_star: f64) -> Vec<(RobustFace, Option<f64>)> {
        let s = v_star.abs().max(1.0);
        let mut out = vec![(self.clone(), None)];
        if self.fixed_zero.iter().any(|&f| f) {
            let free = Self {
                basis: self.basis.clone(),
                fixed_zero: Vec::new(),
            };
            out.push((free, Some(v_star - 1e-9 * s)));
        }
        out.push((Self::full(self.basis.dim()), Some(v_star - 1e-8 * s)));
        out
    }

    /// True when the face admits at most one robustly optimal point: the
    /// linear map sending `W` to the feasible-set rows and to the dual-cone
    /// equalities left without a free auxiliary is injective on symmetric
    /// `W`. The reduced programs have no interior then and are skipped.
    pub fn is_point(&self, prob: &RobustSdpProblem) -> bool {
        let r = self.rank();
        let cols = r * (r + 1) / 2;
        let dual = prob.uncertainty.dual_cone_rows();
        let forced = dual
            .rows
            .iter()
            .filter_map(|row| match (&row.pairing, row.kind) {
                (Some(Pairing::Matrix(a)), RowKind::Eq)
                    if row
                        .aux
                        .iter()
                        .all(|&(k, _)| self.fixed_zero.get(k).copied().unwrap_or(false)) =>
                {
                    Some(a)
                }
                _ => None,
            });
        let rows: Vec<&SymMatrix> = prob
            .feasible
            .rows()
            .iter()
            .map(|(a, _)| a)
            .chain(forced)
            .collect();
        if rows.len() < cols {
            return false;
        }
        let mut m = DMatrix::zeros(rows.len(), cols);
        for (j, a) in rows.iter().enumerate() {
            let c = self.basis.compress(a);
            let mut k = 0;
            for p in 0..r {
                for q in p..r {
                    m[(j, k)] = if p == q {
                        c.get(p, p)
                    } else {
                        2.0 * c.get(p, q)
                    };
                    k += 1;
                }
            }
        }
        let sv = m.singular_values();
        let top = sv.iter().fold(0.0_f64, |a, &b| a.max(b));
        top > 0.0 && sv.iter().all(|&v| v > 1e-9 * top)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProSettings {
    pub solver: SolverSettings,
    /// Relative threshold for a strict nominal improvement.
    pub strict_rel: f64,
    /// Relative tolerance of the robust-optimality test.
    pub eq_tol: f64,
    /// Feasibility tolerance for candidate matrices.
    pub member_tol: f64,
}

impl Default for ProSettings {
    fn default() -> Self {
        Self {
            solver: SolverSettings::default(),
            strict_rel: 1e-7,
            eq_tol: 1e-6,
            member_tol: 1e-6,
        }
    }
}

impl ProSettings {
    pub fn strict_tol(&self, nominal: f64) -> f64 {
        self.strict_rel * nominal.abs().max(1.0)
    }

    fn eq_slack(&self, value: f64) -> f64 {
        self.eq_tol * value.abs().max(1.0)
    }

    /// Slack ladder for the dominance constraint of the direction search:
    /// exact first, then the solver's feasibility scale. A candidate that is
    /// only numerically on the robust-optimal face can leave the exact
    /// program without a feasible point.
    fn direction_slacks(&self, value: f64) -> [f64; 5] {
        let s = value.abs().max(1.0);
        [0.0, 1e-9 * s, 1e-8 * s, 1e-7 * s, 1e-6 * s]
    }
}

/// Runs `build_and_solve` over [`RobustFace::attempts`] until one is optimal.
fn first_optimal<T>(
    stage: &'static str,
    face: &RobustFace,
    v_star: f64,
    mut build_and_solve: impl FnMut(&RobustFace, Option<f64>) -> Result<(SolvedProgram, T), ProError>,
) -> Result<(SolvedProgram, T), ProError> {
    let mut last = None;
    for (f, floor) in face.attempts(v_star) {
        let (sol, t) = build_and_solve(&f, floor)?;
        if sol.solution.is_optimal() {
            return Ok((sol, t));
        }
        log::debug!("{stage} on rank {}: {:?}", f.rank(), sol.solution.status);
        last = Some(sol);
    }
    Err(require_optimal(stage, last.expect("at least one attempt")).unwrap_err())
}

fn require_optimal(stage: &'static str, sol: SolvedProgram) -> Result<SolvedProgram, ProError> {
    if sol.solution.is_optimal() {
        Ok(sol)
    } else {
        Err(ProError::Solver {
            stage,
            status: sol.solution.status,
            certificate: sol.solution.certificate,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustSolution {
    pub x: SymMatrix,
    /// Optimal value reported by the solver.
    pub value: f64,
    /// Closed-form worst case of the returned `x`.
    pub worst_case: f64,
    pub dual_value: f64,
    pub iterations: usize,
}

pub fn solve_robust(
    prob: &RobustSdpProblem,
    settings: &ProSettings,
) -> Result<RobustSolution, ProError> {
    solve_robust_face(prob, settings).map(|(r, _)| r)
}

/// Robust solution together with the face of the robustly optimal set.
pub fn solve_robust_face(
    prob: &RobustSdpProblem,
    settings: &ProSettings,
) -> Result<(RobustSolution, RobustFace), ProError> {
    let (pb, x, aux) = prob.robust_counterpart();
    let sol = require_optimal("robust counterpart", pb.solve(&settings.solver)?)?;
    let xm = sol.psd(x).clone();
    let aux: Vec<ScalarVar> = aux.into_iter().flatten().collect();
    let aux_x: Vec<f64> = aux.iter().map(|&v| sol.scalar(v)).collect();
    let aux_s: Vec<f64> = aux.iter().map(|&v| sol.dual_scalar(v)).collect();
    let face = RobustFace::from_solution(&xm, sol.dual_psd(x), &aux_x, &aux_s)?;
    log::debug!(
        "robust-optimal face: rank {} of {}, {} of {} auxiliaries fixed",
        face.rank(),
        prob.dim(),
        face.fixed_zero.iter().filter(|&&b| b).count(),
        face.fixed_zero.len()
    );
    let ro = RobustSolution {
        worst_case: prob.worst_case(&xm),
        value: sol.objective(),
        dual_value: sol.dual_objective(),
        iterations: sol.solution.iterations,
        x: xm,
    };
    Ok((ro, face))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParetoStatus {
    Pro,
    Dominated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoVerdict {
    pub status: ParetoStatus,
    /// `Z = Y − X` for a dominated candidate.
    pub direction: Option<SymMatrix>,
    /// `⟨P̂, Z⟩` of the best direction found (0 for a PRO candidate's zero
    /// direction up to solver accuracy).
    pub nominal_gain: f64,
    /// Scenario `μ̂` where the improvement is strict.
    pub certificate_scenario: Option<Vec<f64>>,
    /// Worst-case value of the candidate.
    pub value: f64,
    pub robust_value: f64,
    pub strict_tol: f64,
}

impl ParetoVerdict {
    pub fn is_pro(&self) -> bool {
        self.status == ParetoStatus::Pro
    }
}

fn check_candidate(
    prob: &RobustSdpProblem,
    x: &SymMatrix,
    v_star: f64,
    settings: &ProSettings,
) -> Result<f64, ProError> {
    prob.feasible.check_member(x, settings.member_tol)?;
    let value = prob.worst_case(x);
    if value < v_star - settings.eq_slack(v_star) {
        return Err(ProError::NotRobustOptimal {
            value,
            robust_value: v_star,
        });
    }
    Ok(value)
}

/// Decides Pareto robust optimality of a robustly optimal `x`.
pub fn verify_pro(
    prob: &RobustSdpProblem,
    x: &SymMatrix,
    settings: &ProSettings,
) -> Result<ParetoVerdict, ProError> {
    let (ro, face) = solve_robust_face(prob, settings)?;
    verify_pro_with(prob, x, ro.worst_case, &face, settings).map(|(v, _)| v)
}

/// As [`verify_pro`] with a known robust value and face; also returns the
/// maximizer `Y` of the direction search.
pub fn verify_pro_with(
    prob: &RobustSdpProblem,
    x: &SymMatrix,
    v_star: f64,
    face: &RobustFace,
    settings: &ProSettings,
) -> Result<(ParetoVerdict, SymMatrix), ProError> {
    let value = check_candidate(prob, x, v_star, settings)?;
    let strict_tol = settings.strict_tol(prob.nominal(x));
    if face.is_point(prob) {
        log::debug!("robust face is a single point");
        let verdict = ParetoVerdict {
            status: ParetoStatus::Pro,
            direction: None,
            nominal_gain: 0.0,
            certificate_scenario: None,
            value,
            robust_value: v_star,
            strict_tol,
        };
        return Ok((verdict, x.clone()));
    }
    let mut last = None;
    let mut found = None;
    // The direction search ignores the auxiliary mask, so only distinct bases matter.
    let bases: Vec<RobustFace> = face
        .attempts(v_star)
        .into_iter()
        .map(|(f, _)| f)
        .filter(|f| f.fixed_zero.is_empty() || f == face)
        .collect();
    'search: for f in &bases {
        for slack in settings.direction_slacks(v_star) {
            let (pb, ye) = prob.direction_program(x, f, slack);
            let sol = pb.solve(&settings.solver)?;
            if sol.solution.is_optimal() {
                found = Some(sol.eval_matrix(&ye));
                break 'search;
            }
            log::debug!(
                "direction search on rank {} with slack {slack:.1e}: {:?}",
                f.rank(),
                sol.solution.status
            );
            last = Some(sol);
        }
    }
    let y = match found {
        Some(y) => y,
        None => {
            return Err(
                require_optimal("direction search", last.expect("ladder is nonempty")).unwrap_err(),
            )
        }
    };
    let z = &y - x;
    let gain = prob.nominal(&z);
    let dominated = gain > strict_tol;
    let verdict = ParetoVerdict {
        status: if dominated {
            ParetoStatus::Dominated
        } else {
            ParetoStatus::Pro
        },
        direction: dominated.then_some(z),
        nominal_gain: gain,
        certificate_scenario: dominated.then(|| prob.uncertainty.relint_mu()),
        value,
        robust_value: v_star,
        strict_tol,
    };
    Ok((verdict, y))
}

/// Moves a robustly optimal `x` to a Pareto robustly optimal solution that
/// is at least as good in every scenario.
pub fn improve_to_pro(
    prob: &RobustSdpProblem,
    x: &SymMatrix,
    settings: &ProSettings,
) -> Result<(SymMatrix, ParetoVerdict), ProError> {
    let (ro, face) = solve_robust_face(prob, settings)?;
    let (verdict, y) = verify_pro_with(prob, x, ro.worst_case, &face, settings)?;
    let out = if verdict.is_pro() { x.clone() } else { y };
    Ok((out, verdict))
}

/// Maximizes the nominal objective over every feasible `Y` that is at least
/// as good as `x` in all scenarios, for any feasible `x`. The maximizer is
/// undominated; it is robustly optimal only if `x` is.
pub fn pareto_improve(
    prob: &RobustSdpProblem,
    x: &SymMatrix,
    settings: &ProSettings,
) -> Result<(SymMatrix, f64), ProError> {
    prob.feasible.check_member(x, settings.member_tol)?;
    let face = RobustFace::full(prob.dim());
    let mut last = None;
    for slack in settings.direction_slacks(prob.worst_case(x)) {
        let (pb, ye) = prob.direction_program(x, &face, slack);
        let sol = pb.solve(&settings.solver)?;
        if sol.solution.is_optimal() {
            let y = sol.eval_matrix(&ye);
            let gain = prob.nominal(&(&y - x));
            return Ok((y, gain));
        }
        last = Some(sol);
    }
    Err(require_optimal("direction search", last.expect("ladder is nonempty")).unwrap_err())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReoptSolution {
    pub x: SymMatrix,
    pub nominal_value: f64,
    pub worst_case: f64,
    pub robust_value: f64,
    /// Rank of the robust-optimal face the search ran on.
    pub face_rank: usize,
}

/// Maximizes the nominal objective over the robustly optimal set.
pub fn pro_via_reopt(
    prob: &RobustSdpProblem,
    settings: &ProSettings,
) -> Result<ReoptSolution, ProError> {
    let (ro, face) = solve_robust_face(prob, settings)?;
    let v_star = ro.worst_case;
    let x = if face.is_point(prob) {
        ro.x.clone()
    } else {
        first_optimal("re-optimization", &face, v_star, |f, floor| {
            let (pb, xe) = prob.reopt_program(f, floor);
            Ok((pb.solve(&settings.solver)?, xe))
        })
        .map(|(sol, xe)| sol.eval_matrix(&xe))?
    };
    let worst_case = prob.worst_case(&x);
    if worst_case < v_star - settings.eq_slack(v_star) {
        return Err(ProError::NotRobustOptimal {
            value: worst_case,
            robust_value: v_star,
        });
    }
    Ok(ReoptSolution {
        nominal_value: prob.nominal(&x),
        worst_case,
        robust_value: v_star,
        face_rank: face.rank(),
        x,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllProReport {
    pub all_pro: bool,
    pub optimal_value: f64,
    /// Dominated robust-optimal `X` and its dominator `Y` when not all
    /// robustly optimal solutions are PRO.
    pub witness: Option<(SymMatrix, SymMatrix)>,
    pub robust_value: f64,
    pub strict_tol: f64,
    pub face_rank: usize,
}

/// Decides whether every robustly optimal solution is Pareto robustly
/// optimal.
pub fn check_all_pro(
    prob: &RobustSdpProblem,
    settings: &ProSettings,
) -> Result<AllProReport, ProError> {
    let (ro, face) = solve_robust_face(prob, settings)?;
    let v_star = ro.worst_case;
    let strict_tol = settings.strict_tol(prob.nominal(&ro.x));
    if face.is_point(prob) {
        return Ok(AllProReport {
            all_pro: true,
            optimal_value: 0.0,
            witness: None,
            robust_value: v_star,
            strict_tol,
            face_rank: face.rank(),
        });
    }
    let (x, y) = first_optimal("joint dominance program", &face, v_star, |f, floor| {
        let (pb, xe, ye) = prob.all_pro_program(f, floor);
        Ok((pb.solve(&settings.solver)?, (xe, ye)))
    })
    .map(|(sol, (xe, ye))| (sol.eval_matrix(&xe), sol.eval_matrix(&ye)))?;
    let value = prob.nominal(&(&y - &x));
    let all_pro = value <= strict_tol;
    Ok(AllProReport {
        all_pro,
        optimal_value: value,
        witness: (!all_pro).then_some((x, y)),
        robust_value: v_star,
        strict_tol,
        face_rank: face.rank(),
    })
}
