//! Infeasible-start primal-dual path-following method with Nesterov–Todd
//! scaling and Mehrotra predictor-corrector steps.
//!
//! Internally the program is handled in minimization form
//! `min cᵀx  s.t. Ax = b, x ∈ K` with dual `max bᵀy  s.t. c − Aᵀy = s ∈ K`
//! (`s = 0` on free coordinates). Each PSD block is scaled by `G` with
//! `Gᵀ S G = G⁻¹ X G⁻ᵀ = Λ` diagonal, and the linearized complementarity
//! condition `Λ ∘ (ΔX̃ + ΔS̃) = R` is solved in that frame. Free variables
//! enter the Newton system through an augmented block
//! `[[M, A_f], [A_fᵀ, 0]]`, solved densely by LU.

use log::{debug, warn};
use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen, LU};

use crate::linalg::SymMatrix;

use super::{
    BlockVector, Certificate, ConeProgram, ConicError, ConicSolution, Sense, SolveStatus,
    SolverSettings,
};

const STEP_FRACTION: f64 = 0.98;
const DEPENDENT_ROW_TOL: f64 = 1e-14;
const INFEAS_TOL: f64 = 1e-8;
const INFEAS_MAGNITUDE: f64 = 1e4;
const MAX_STALLS: usize = 8;
const REFINE_STEPS: usize = 3;

struct Data {
    blocks: Vec<usize>,
    nl: usize,
    nf: usize,
    m: usize,
    /// `[row][block]`, `None` for structurally zero blocks.
    a_psd: Vec<Vec<Option<DMatrix<f64>>>>,
    a_lin: DMatrix<f64>,
    a_free: DMatrix<f64>,
    c_psd: Vec<DMatrix<f64>>,
    c_lin: DVector<f64>,
    c_free: DVector<f64>,
    b: DVector<f64>,
    /// Factor of the row Gram matrix `AAᵀ`, used to project primal
    /// directions back onto the linearized constraints.
    gram: Option<Cholesky<f64, nalgebra::Dyn>>,
}

struct Iterate {
    x: Vec<DMatrix<f64>>,
    s: Vec<DMatrix<f64>>,
    xl: DVector<f64>,
    sl: DVector<f64>,
    xf: DVector<f64>,
    y: DVector<f64>,
}

struct Residuals {
    rp: DVector<f64>,
    rd: Vec<DMatrix<f64>>,
    rdl: DVector<f64>,
    rdf: DVector<f64>,
}

struct NtScaling {
    g: DMatrix<f64>,
    g_inv: DMatrix<f64>,
    lambda: DVector<f64>,
}

/// Direction expressed in the scaled frame (PSD and orthant parts).
struct Direction {
    dx: Vec<DMatrix<f64>>,
    ds: Vec<DMatrix<f64>>,
    dxl: DVector<f64>,
    dsl: DVector<f64>,
    dxf: DVector<f64>,
    dy: DVector<f64>,
}

enum Presolved {
    Ok { kept: Vec<usize> },
    Inconsistent { y: Vec<f64> },
}

fn to_dmatrix(m: &SymMatrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.dim(), m.dim(), m.as_slice())
}

fn to_sym(m: &DMatrix<f64>) -> SymMatrix {
    SymMatrix::from_upper_fn(m.nrows(), |i, j| 0.5 * (m[(i, j)] + m[(j, i)]))
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in i + 1..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

/// Largest `α` with `Λ + α D ⪰ 0`.
fn psd_step(lambda: &DVector<f64>, d: &DMatrix<f64>) -> f64 {
    let n = lambda.len();
    let isq: Vec<f64> = lambda.iter().map(|l| 1.0 / l.sqrt()).collect();
    let mut t = d.clone();
    for i in 0..n {
        for j in 0..n {
            t[(i, j)] *= isq[i] * isq[j];
        }
    }
    symmetrize(&mut t);
    let e = min_eigenvalue(&t);
    if e >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / e
    }
}

fn lin_step(x: &DVector<f64>, d: &DVector<f64>) -> f64 {
    x.iter()
        .zip(d.iter())
        .filter(|(_, &di)| di < 0.0)
        .map(|(&xi, &di)| -xi / di)
        .fold(f64::INFINITY, f64::min)
}

fn nt_scaling(x: &DMatrix<f64>, s: &DMatrix<f64>) -> Option<NtScaling> {
    let l = Cholesky::new(x.clone())?.l();
    let r = Cholesky::new(s.clone())?.l();
    let svd = (r.transpose() * &l).svd(true, true);
    let v_t = svd.v_t?;
    let sigma = svd.singular_values;
    if sigma.iter().any(|&v| v <= 0.0 || !v.is_finite()) {
        return None;
    }
    let n = x.nrows();
    let l_inv = l.solve_lower_triangular(&DMatrix::identity(n, n))?;
    let mut g = &l * v_t.transpose();
    let mut g_inv = &v_t * l_inv;
    for k in 0..n {
        let root = sigma[k].sqrt();
        g.column_mut(k).scale_mut(1.0 / root);
        g_inv.row_mut(k).scale_mut(root);
    }
    Some(NtScaling {
        g,
        g_inv,
        lambda: sigma,
    })
}

impl Data {
    fn from_program(p: &ConeProgram, rows: &[usize], scale: &[f64], sign: f64) -> Self {
        let blocks = p.cone.psd_blocks.clone();
        let nl = p.cone.nonneg_dim;
        let nf = p.cone.free_dim;
        let m = rows.len();
        let mut a_psd: Vec<Vec<Option<DMatrix<f64>>>> = Vec::with_capacity(m);
        let mut a_lin = DMatrix::zeros(m, nl);
        let mut a_free = DMatrix::zeros(m, nf);
        let mut b = DVector::zeros(m);
        for (r, (&i, &d)) in rows.iter().zip(scale).enumerate() {
            let row = &p.constraints[i];
            a_psd.push(
                row.coeffs
                    .psd
                    .iter()
                    .map(|mat| {
                        if mat.is_zero() {
                            None
                        } else {
                            Some(to_dmatrix(mat) * d)
                        }
                    })
                    .collect(),
            );
            for j in 0..nl {
                a_lin[(r, j)] = d * row.coeffs.nonneg[j];
            }
            for j in 0..nf {
                a_free[(r, j)] = d * row.coeffs.free[j];
            }
            b[r] = d * row.rhs;
        }
        let c_psd = p
            .objective
            .psd
            .iter()
            .map(|c| to_dmatrix(c) * sign)
            .collect();
        let c_lin = DVector::from_iterator(nl, p.objective.nonneg.iter().map(|v| sign * v));
        let c_free = DVector::from_iterator(nf, p.objective.free.iter().map(|v| sign * v));
        let mut gram = &a_lin * a_lin.transpose() + &a_free * a_free.transpose();
        for i in 0..m {
            for j in i..m {
                let v: f64 = a_psd[i]
                    .iter()
                    .zip(&a_psd[j])
                    .map(|(a, b)| match (a, b) {
                        (Some(a), Some(b)) => a.dot(b),
                        _ => 0.0,
                    })
                    .sum();
                gram[(i, j)] += v;
                if j != i {
                    gram[(j, i)] += v;
                }
            }
        }
        let gram = Cholesky::new(gram);
        Data {
            blocks,
            nl,
            nf,
            m,
            a_psd,
            a_lin,
            a_free,
            c_psd,
            c_lin,
            c_free,
            b,
            gram,
        }
    }

    fn degree(&self) -> f64 {
        (self.blocks.iter().sum::<usize>() + self.nl) as f64
    }

    fn row_norm(&self, i: usize) -> f64 {
        let psd: f64 = self.a_psd[i]
            .iter()
            .flatten()
            .map(|a| a.norm_squared())
            .sum();
        (psd + self.a_lin.row(i).norm_squared() + self.a_free.row(i).norm_squared()).sqrt()
    }

    fn c_norm(&self) -> f64 {
        let psd: f64 = self.c_psd.iter().map(|c| c.norm_squared()).sum();
        (psd + self.c_lin.norm_squared() + self.c_free.norm_squared()).sqrt()
    }

    fn apply_a(&self, x: &[DMatrix<f64>], xl: &DVector<f64>, xf: &DVector<f64>) -> DVector<f64> {
        let mut out = &self.a_lin * xl + &self.a_free * xf;
        for i in 0..self.m {
            for (k, a) in self.a_psd[i].iter().enumerate() {
                if let Some(a) = a {
                    out[i] += a.dot(&x[k]);
                }
            }
        }
        out
    }

    fn primal_objective(&self, it: &Iterate) -> f64 {
        let psd: f64 = self.c_psd.iter().zip(&it.x).map(|(c, x)| c.dot(x)).sum();
        psd + self.c_lin.dot(&it.xl) + self.c_free.dot(&it.xf)
    }

    fn residuals(&self, it: &Iterate) -> Residuals {
        let rp = &self.b - self.apply_a(&it.x, &it.xl, &it.xf);
        let mut rd: Vec<DMatrix<f64>> = self.c_psd.iter().zip(&it.s).map(|(c, s)| c - s).collect();
        for i in 0..self.m {
            for (k, a) in self.a_psd[i].iter().enumerate() {
                if let Some(a) = a {
                    rd[k] -= a * it.y[i];
                }
            }
        }
        let rdl = &self.c_lin - self.a_lin.transpose() * &it.y - &it.sl;
        let rdf = &self.c_free - self.a_free.transpose() * &it.y;
        Residuals { rp, rd, rdl, rdf }
    }

    fn initial_point(&self) -> Iterate {
        let nu = self.degree();
        let bmax = (0..self.m)
            .map(|i| (1.0 + self.b[i].abs()) / (1.0 + self.row_norm(i)))
            .fold(0.0, f64::max);
        let xi = (10.0_f64).max(nu.sqrt()).max(nu * bmax);
        let amax = (0..self.m).map(|i| self.row_norm(i)).fold(0.0, f64::max);
        let eta = (10.0_f64).max(nu.sqrt()).max(self.c_norm()).max(amax);
        Iterate {
            x: self
                .blocks
                .iter()
                .map(|&n| DMatrix::identity(n, n) * xi)
                .collect(),
            s: self
                .blocks
                .iter()
                .map(|&n| DMatrix::identity(n, n) * eta)
                .collect(),
            xl: DVector::from_element(self.nl, xi),
            sl: DVector::from_element(self.nl, eta),
            xf: DVector::zeros(self.nf),
            y: DVector::zeros(self.m),
        }
    }
}

/// Greedy detection of linearly dependent constraint rows through an
/// incremental Cholesky factorization of the row Gram matrix.
fn presolve(p: &ConeProgram) -> Presolved {
    let m = p.constraints.len();
    let gram = |i: usize, j: usize| p.constraints[i].coeffs.dot(&p.constraints[j].coeffs);
    let mut kept: Vec<usize> = Vec::new();
    // Rows of the lower-triangular factor over kept rows.
    let mut factor: Vec<Vec<f64>> = Vec::new();
    for i in 0..m {
        let gii = gram(i, i);
        let g: Vec<f64> = kept.iter().map(|&k| gram(k, i)).collect();
        let mut l = vec![0.0; kept.len()];
        for r in 0..kept.len() {
            let s: f64 = (0..r).map(|c| factor[r][c] * l[c]).sum();
            l[r] = (g[r] - s) / factor[r][r];
        }
        let d = gii - l.iter().map(|v| v * v).sum::<f64>();
        if gii > 0.0 && d > DEPENDENT_ROW_TOL * gii {
            let mut row = l;
            row.push(d.sqrt());
            factor.push(row);
            kept.push(i);
            continue;
        }
        // a_i ≈ Σ coef_k a_{kept_k}; back-substitute Lᵀ coef = l.
        let mut coef = vec![0.0; kept.len()];
        for r in (0..kept.len()).rev() {
            let s: f64 = (r + 1..kept.len()).map(|c| factor[c][r] * coef[c]).sum();
            coef[r] = (l[r] - s) / factor[r][r];
        }
        let predicted: f64 = coef
            .iter()
            .zip(&kept)
            .map(|(c, &k)| c * p.constraints[k].rhs)
            .sum();
        let mismatch = p.constraints[i].rhs - predicted;
        let scale = 1.0
            + p.constraints[i].rhs.abs()
            + coef
                .iter()
                .zip(&kept)
                .map(|(c, &k)| (c * p.constraints[k].rhs).abs())
                .sum::<f64>();
        if mismatch.abs() > 1e-8 * scale {
            let unit = mismatch.signum() / mismatch.abs();
            let mut y = vec![0.0; m];
            y[i] = unit;
            for (c, &k) in coef.iter().zip(&kept) {
                y[k] = -c * unit;
            }
            return Presolved::Inconsistent { y };
        }
        warn!("dropping linearly dependent constraint row {i}");
    }
    Presolved::Ok { kept }
}

/// Solves a conic program.
///
/// Malformed programs are rejected with [`ConicError`]; every other outcome,
/// including stalls and the iteration cap, is reported through
/// [`ConicSolution::status`].
pub fn solve(
    program: &ConeProgram,
    settings: &SolverSettings,
) -> Result<ConicSolution, ConicError> {
    program.validate()?;
    let sign = match program.sense {
        Sense::Maximize => -1.0,
        Sense::Minimize => 1.0,
    };

    let kept = match presolve(program) {
        Presolved::Ok { kept } => kept,
        Presolved::Inconsistent { y } => {
            let mut sol = empty_solution(program, SolveStatus::PrimalInfeasible);
            sol.certificate = Some(Certificate::PrimalInfeasible { y });
            return Ok(sol);
        }
    };
    let scale: Vec<f64> = kept
        .iter()
        .map(|&i| 1.0 / program.constraints[i].coeffs.norm())
        .collect();
    let data = Data::from_program(program, &kept, &scale, sign);
    let mut it = data.initial_point();
    let nu = data.degree();
    let b_norm = data.b.norm();
    let c_norm = data.c_norm();

    let mut status = SolveStatus::NumericalFailure;
    let mut certificate = None;
    let mut iterations = 0;
    let mut stalls = 0;
    let (mut relp, mut reld, mut relgap);

    loop {
        let res = data.residuals(&it);
        let pobj = data.primal_objective(&it);
        let dobj = data.b.dot(&it.y);
        let compl: f64 =
            it.x.iter().zip(&it.s).map(|(x, s)| x.dot(s)).sum::<f64>() + it.xl.dot(&it.sl);
        let mu = compl / nu;
        let rd_norm = (res.rd.iter().map(|r| r.norm_squared()).sum::<f64>()
            + res.rdl.norm_squared()
            + res.rdf.norm_squared())
        .sqrt();
        relp = res.rp.norm() / (1.0 + b_norm);
        reld = rd_norm / (1.0 + c_norm);
        let denom = 1.0 + pobj.abs() + dobj.abs();
        relgap = (pobj - dobj).abs() / denom;
        let relcompl = compl.abs() / denom;
        debug!(
            "ipm it {iterations:3}: pobj {pobj:+.9e} dobj {dobj:+.9e} relp {relp:.2e} reld {reld:.2e} gap {relgap:.2e} mu {mu:.2e}"
        );

        if relp <= settings.feas_tol
            && reld <= settings.feas_tol
            && relgap <= settings.gap_tol
            && relcompl <= settings.gap_tol
        {
            status = SolveStatus::Optimal;
            break;
        }

        // Farkas-type tests on diverging iterates.
        let aty_s_norm = {
            // c − rd = Aᵀy + s
            let psd: f64 = data
                .c_psd
                .iter()
                .zip(&res.rd)
                .map(|(c, r)| (c - r).norm_squared())
                .sum();
            (psd + (&data.c_lin - &res.rdl).norm_squared()
                + (&data.c_free - &res.rdf).norm_squared())
            .sqrt()
        };
        if dobj > INFEAS_MAGNITUDE * (1.0 + c_norm) && aty_s_norm <= INFEAS_TOL * dobj {
            status = SolveStatus::PrimalInfeasible;
            let y: Vec<f64> = (0..program.constraints.len())
                .map(|i| match kept.iter().position(|&k| k == i) {
                    Some(r) => it.y[r] * scale[r] / dobj,
                    None => 0.0,
                })
                .collect();
            certificate = Some(Certificate::PrimalInfeasible { y });
            break;
        }
        let ax_norm = (&data.b - &res.rp).norm();
        if -pobj > INFEAS_MAGNITUDE * (1.0 + b_norm) && ax_norm <= INFEAS_TOL * (-pobj) {
            status = SolveStatus::DualInfeasible;
            let mut x = primal_block(&it);
            let t = 1.0 / (-pobj);
            x.psd.iter_mut().for_each(|m| *m = m.scaled(t));
            x.nonneg.iter_mut().for_each(|v| *v *= t);
            x.free.iter_mut().for_each(|v| *v *= t);
            certificate = Some(Certificate::DualInfeasible { x });
            break;
        }

        if iterations >= settings.iter_cap {
            debug!("ipm: iteration cap {} reached", settings.iter_cap);
            break;
        }
        iterations += 1;

        let Some(step) = newton_step(&data, &it, &res, mu) else {
            debug!("ipm: scaling or KKT factorization failed");
            break;
        };
        let (dxs, dss, dxl, dsl, dxf, dy, ap, ad) = step;
        debug!("ipm step: primal {ap:.3e} dual {ad:.3e}");
        if ap.min(ad) < 1e-10 {
            stalls += 1;
            if stalls >= MAX_STALLS {
                debug!("ipm: stalled");
                break;
            }
        } else {
            stalls = 0;
        }
        for k in 0..it.x.len() {
            it.x[k] += &dxs[k] * ap;
            it.s[k] += &dss[k] * ad;
            symmetrize(&mut it.x[k]);
            symmetrize(&mut it.s[k]);
        }
        it.xl += &dxl * ap;
        it.sl += &dsl * ad;
        it.xf += &dxf * ap;
        it.y += &dy * ad;
    }

    let primal = primal_block(&it);
    let mut y_out = vec![0.0; program.constraints.len()];
    for (r, &i) in kept.iter().enumerate() {
        y_out[i] = sign * it.y[r] * scale[r];
    }
    let dual_slack = BlockVector {
        psd: it.s.iter().map(to_sym).collect(),
        nonneg: it.sl.iter().cloned().collect(),
        free: vec![0.0; program.cone.free_dim],
    };
    let objective_value = program.objective.dot(&primal);
    let dual_value: f64 = program
        .constraints
        .iter()
        .zip(&y_out)
        .map(|(row, y)| row.rhs * y)
        .sum();
    let gap =
        (objective_value - dual_value).abs() / (1.0 + objective_value.abs() + dual_value.abs());
    Ok(ConicSolution {
        status,
        primal,
        dual: y_out,
        dual_slack,
        objective_value,
        dual_value,
        gap,
        primal_residual: relp,
        dual_residual: reld,
        iterations,
        certificate,
    })
}

fn primal_block(it: &Iterate) -> BlockVector {
    BlockVector {
        psd: it.x.iter().map(to_sym).collect(),
        nonneg: it.xl.iter().cloned().collect(),
        free: it.xf.iter().cloned().collect(),
    }
}

fn empty_solution(program: &ConeProgram, status: SolveStatus) -> ConicSolution {
    ConicSolution {
        status,
        primal: BlockVector::zeros(&program.cone),
        dual: vec![0.0; program.constraints.len()],
        dual_slack: BlockVector::zeros(&program.cone),
        objective_value: f64::NAN,
        dual_value: f64::NAN,
        gap: f64::NAN,
        primal_residual: f64::NAN,
        dual_residual: f64::NAN,
        iterations: 0,
        certificate: None,
    }
}

type Step = (
    Vec<DMatrix<f64>>,
    Vec<DMatrix<f64>>,
    DVector<f64>,
    DVector<f64>,
    DVector<f64>,
    DVector<f64>,
    f64,
    f64,
);

/// One Mehrotra predictor-corrector step. Returns unscaled directions and the
/// primal/dual step lengths.
fn newton_step(data: &Data, it: &Iterate, res: &Residuals, mu: f64) -> Option<Step> {
    let nb = data.blocks.len();
    let m = data.m;
    let nf = data.nf;

    let scal: Vec<NtScaling> = (0..nb)
        .map(|k| nt_scaling(&it.x[k], &it.s[k]))
        .collect::<Option<_>>()?;
    let w: DVector<f64> = it.xl.zip_map(&it.sl, |x, s| (x / s).sqrt());
    let lam_l: DVector<f64> = it.xl.zip_map(&it.sl, |x, s| (x * s).sqrt());

    // Scaled constraint data.
    let at: Vec<Vec<Option<DMatrix<f64>>>> = data
        .a_psd
        .iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .map(|(k, a)| {
                    a.as_ref().map(|a| {
                        let mut t = scal[k].g.transpose() * a * &scal[k].g;
                        symmetrize(&mut t);
                        t
                    })
                })
                .collect()
        })
        .collect();
    let mut atl = data.a_lin.clone();
    for j in 0..data.nl {
        atl.column_mut(j).scale_mut(w[j]);
    }

    let mut kkt = DMatrix::zeros(m + nf, m + nf);
    for i in 0..m {
        for j in i..m {
            let mut v = atl.row(i).dot(&atl.row(j));
            for k in 0..nb {
                if let (Some(a), Some(b)) = (&at[i][k], &at[j][k]) {
                    v += a.dot(b);
                }
            }
            kkt[(i, j)] = v;
            kkt[(j, i)] = v;
        }
        for j in 0..nf {
            kkt[(i, m + j)] = data.a_free[(i, j)];
            kkt[(m + j, i)] = data.a_free[(i, j)];
        }
    }
    let diag_max = (0..m).map(|i| kkt[(i, i)]).fold(0.0, f64::max);
    let lu = LU::new(kkt.clone());
    let lu = if lu.is_invertible() {
        lu
    } else {
        let mut reg = kkt;
        for i in 0..m {
            reg[(i, i)] += 1e-14 * diag_max.max(1.0);
        }
        LU::new(reg)
    };

    let rd_t: Vec<DMatrix<f64>> = (0..nb)
        .map(|k| {
            let mut t = scal[k].g.transpose() * &res.rd[k] * &scal[k].g;
            symmetrize(&mut t);
            t
        })
        .collect();
    let rdl_t = res.rdl.component_mul(&w);

    let solve_dir = |t_psd: &[DMatrix<f64>], t_lin: &DVector<f64>| -> Option<Direction> {
        let mut rhs = DVector::zeros(m + nf);
        let diff_l = t_lin - &rdl_t;
        let diffs: Vec<DMatrix<f64>> = (0..nb).map(|k| &t_psd[k] - &rd_t[k]).collect();
        for i in 0..m {
            let mut v = res.rp[i] - atl.row(i).transpose().dot(&diff_l);
            for k in 0..nb {
                if let Some(a) = &at[i][k] {
                    v -= a.dot(&diffs[k]);
                }
            }
            rhs[i] = v;
        }
        for j in 0..nf {
            rhs[m + j] = res.rdf[j];
        }
        let sol = lu.solve(&rhs)?;
        if sol.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let mut dy = sol.rows(0, m).into_owned();
        let mut dxf = sol.rows(m, nf).into_owned();
        let mut ds: Vec<DMatrix<f64>> = rd_t.clone();
        for i in 0..m {
            for k in 0..nb {
                if let Some(a) = &at[i][k] {
                    ds[k] -= a * dy[i];
                }
            }
        }
        let mut dx: Vec<DMatrix<f64>> = (0..nb).map(|k| &t_psd[k] - &ds[k]).collect();
        let mut dsl = &rdl_t - atl.transpose() * &dy;
        let mut dxl = t_lin - &dsl;

        // Iterative refinement against the forward-evaluated equations
        // A Δx = r_p and A_fᵀ Δy = r_f; the complementarity and dual
        // equations hold by construction.
        let residual =
            |dx: &[DMatrix<f64>], dxl: &DVector<f64>, dxf: &DVector<f64>, dy: &DVector<f64>| {
                let mut e = DVector::zeros(m + nf);
                for i in 0..m {
                    let mut v =
                        atl.row(i).transpose().dot(dxl) + data.a_free.row(i).transpose().dot(dxf);
                    for k in 0..nb {
                        if let Some(a) = &at[i][k] {
                            v += a.dot(&dx[k]);
                        }
                    }
                    e[i] = res.rp[i] - v;
                }
                for j in 0..nf {
                    e[m + j] = res.rdf[j] - data.a_free.column(j).dot(dy);
                }
                e
            };
        let mut err = residual(&dx, &dxl, &dxf, &dy);
        for _ in 0..REFINE_STEPS {
            let scale = 1.0 + res.rp.norm() + res.rdf.norm();
            if err.norm() <= 1e-15 * scale {
                break;
            }
            let Some(corr) = lu.solve(&err) else { break };
            if corr.iter().any(|v| !v.is_finite()) {
                break;
            }
            let cy = corr.rows(0, m).into_owned();
            let cf = corr.rows(m, nf).into_owned();
            let mut tdx = dx.clone();
            let mut tds = ds.clone();
            for i in 0..m {
                for k in 0..nb {
                    if let Some(a) = &at[i][k] {
                        tds[k] -= a * cy[i];
                        tdx[k] += a * cy[i];
                    }
                }
            }
            let lin = atl.transpose() * &cy;
            let tdsl = &dsl - &lin;
            let tdxl = &dxl + &lin;
            let tdy = &dy + &cy;
            let tdxf = &dxf + &cf;
            let new_err = residual(&tdx, &tdxl, &tdxf, &tdy);
            if new_err.norm() >= err.norm() {
                break;
            }
            (dx, ds, dxl, dsl, dy, dxf, err) = (tdx, tds, tdxl, tdsl, tdy, tdxf, new_err);
        }
        Some(Direction {
            dx,
            ds,
            dxl,
            dsl,
            dxf,
            dy,
        })
    };

    let step_lengths = |d: &Direction| -> (f64, f64) {
        let mut ap = lin_step(&lam_l, &d.dxl);
        let mut ad = lin_step(&lam_l, &d.dsl);
        for k in 0..nb {
            ap = ap.min(psd_step(&scal[k].lambda, &d.dx[k]));
            ad = ad.min(psd_step(&scal[k].lambda, &d.ds[k]));
        }
        (ap, ad)
    };

    // Predictor.
    let t_aff: Vec<DMatrix<f64>> = scal
        .iter()
        .map(|sc| DMatrix::from_diagonal(&(-&sc.lambda)))
        .collect();
    let tl_aff = -&lam_l;
    let aff = solve_dir(&t_aff, &tl_aff)?;
    let (ap, ad) = step_lengths(&aff);
    let (ap, ad) = (ap.min(1.0), ad.min(1.0));
    let mut compl_aff = 0.0;
    for k in 0..nb {
        let lam = DMatrix::from_diagonal(&scal[k].lambda);
        compl_aff += (&lam + &aff.dx[k] * ap).dot(&(&lam + &aff.ds[k] * ad));
    }
    compl_aff += (&lam_l + &aff.dxl * ap).dot(&(&lam_l + &aff.dsl * ad));
    let mu_aff = compl_aff / data.degree();
    let sigma = if mu > 0.0 {
        (mu_aff / mu).clamp(0.0, 1.0).powi(3)
    } else {
        0.0
    };

    // Corrector.
    let target = sigma * mu;
    let t_cor: Vec<DMatrix<f64>> = (0..nb)
        .map(|k| {
            let lam = &scal[k].lambda;
            let n = lam.len();
            let prod = &aff.dx[k] * &aff.ds[k];
            let mut t = DMatrix::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    let jordan = 0.5 * (prod[(i, j)] + prod[(j, i)]);
                    let mut r = -jordan;
                    if i == j {
                        r += target - lam[i] * lam[i];
                    }
                    t[(i, j)] = 2.0 * r / (lam[i] + lam[j]);
                }
            }
            t
        })
        .collect();
    let tl_cor = DVector::from_iterator(
        data.nl,
        (0..data.nl).map(|j| (target - lam_l[j] * lam_l[j] - aff.dxl[j] * aff.dsl[j]) / lam_l[j]),
    );
    let mut cor = solve_dir(&t_cor, &tl_cor)?;

    // Back to the original frame.
    let mut dxs: Vec<DMatrix<f64>> = (0..nb)
        .map(|k| &scal[k].g * &cor.dx[k] * scal[k].g.transpose())
        .collect();
    let dss: Vec<DMatrix<f64>> = (0..nb)
        .map(|k| scal[k].g_inv.transpose() * &cor.ds[k] * &scal[k].g_inv)
        .collect();
    let mut dxl = cor.dxl.component_mul(&w);
    let dsl = cor.dsl.component_div(&w);
    let mut dxf = cor.dxf.clone();

    // Unscaling loses accuracy when the scaling is badly conditioned; a
    // least-norm correction restores A Δx = r_p in the original frame.
    if let Some(gram) = &data.gram {
        let e = &res.rp - data.apply_a(&dxs, &dxl, &dxf);
        if e.norm() > 1e-15 * (1.0 + res.rp.norm()) {
            let c = gram.solve(&e);
            for i in 0..m {
                for (k, a) in data.a_psd[i].iter().enumerate() {
                    if let Some(a) = a {
                        dxs[k] += a * c[i];
                    }
                }
            }
            dxl += data.a_lin.transpose() * &c;
            dxf += data.a_free.transpose() * &c;
            for k in 0..nb {
                let mut t = &scal[k].g_inv * &dxs[k] * scal[k].g_inv.transpose();
                symmetrize(&mut t);
                cor.dx[k] = t;
            }
            cor.dxl = dxl.component_div(&w);
        }
    }
    if log::log_enabled!(log::Level::Trace) {
        let e = &res.rp - data.apply_a(&dxs, &dxl, &dxf);
        log::trace!(
            "primal direction error {:.3e} (rp {:.3e})",
            e.norm(),
            res.rp.norm()
        );
    }

    let (ap, ad) = step_lengths(&cor);
    let ap = (STEP_FRACTION * ap).min(1.0);
    let ad = (STEP_FRACTION * ad).min(1.0);
    Some((dxs, dss, dxl, dsl, dxf, cor.dy, ap, ad))
}
