use std::sync::Arc;

use crate::linalg::{dot, SymMatrix};

use super::{
    BlockVector, ConeProgram, ConeSpec, ConicError, ConicSolution, Constraint, Sense,
    SolverSettings,
};

/// Handle to a PSD block variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PsdVar {
    index: usize,
    dim: usize,
}

impl PsdVar {
    pub fn dim(&self) -> usize {
        self.dim
    }
}

/// Handle to a scalar variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScalarVar {
    NonNeg(usize),
    Free(usize),
}

/// Affine scalar expression over builder variables.
#[derive(Debug, Clone, Default)]
pub struct LinExpr {
    psd: Vec<(PsdVar, SymMatrix)>,
    scalars: Vec<(ScalarVar, f64)>,
    constant: f64,
}

impl LinExpr {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self {
            constant: c,
            ..Self::default()
        }
    }

    /// Adds `⟨coeff, X⟩`.
    pub fn add_pairing(&mut self, var: PsdVar, coeff: &SymMatrix) -> &mut Self {
        assert_eq!(var.dim, coeff.dim(), "pairing dimension mismatch");
        self.psd.push((var, coeff.clone()));
        self
    }

    pub fn add_scalar(&mut self, var: ScalarVar, coeff: f64) -> &mut Self {
        self.scalars.push((var, coeff));
        self
    }

    pub fn add_constant(&mut self, c: f64) -> &mut Self {
        self.constant += c;
        self
    }

    pub fn add_expr(&mut self, other: &LinExpr, scale: f64) -> &mut Self {
        self.psd
            .extend(other.psd.iter().map(|(v, m)| (*v, m.scaled(scale))));
        self.scalars
            .extend(other.scalars.iter().map(|(v, c)| (*v, c * scale)));
        self.constant += scale * other.constant;
        self
    }

    pub fn get_constant(&self) -> f64 {
        self.constant
    }
}

/// Orthonormal columns `Q ∈ R^{n×r}` used to restrict a matrix variable to
/// the face `{Q W Qᵀ : W ⪰ 0}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Basis {
    dim: usize,
    cols: Vec<Vec<f64>>,
}

impl Basis {
    pub fn new(dim: usize, cols: Vec<Vec<f64>>) -> Self {
        assert!(
            cols.iter().all(|c| c.len() == dim),
            "basis column length mismatch"
        );
        Self { dim, cols }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank(&self) -> usize {
        self.cols.len()
    }

    /// `Qᵀ P Q`.
    pub fn compress(&self, p: &SymMatrix) -> SymMatrix {
        let pq: Vec<Vec<f64>> = self.cols.iter().map(|q| p.mul_vec(q)).collect();
        SymMatrix::from_upper_fn(self.rank(), |a, b| {
            self.cols[a].iter().zip(&pq[b]).map(|(x, y)| x * y).sum()
        })
    }

    /// `Q W Qᵀ`.
    pub fn expand(&self, w: &SymMatrix) -> SymMatrix {
        let r = self.rank();
        SymMatrix::from_upper_fn(self.dim, |i, j| {
            let mut v = 0.0;
            for a in 0..r {
                for b in 0..r {
                    v += self.cols[a][i] * w.get(a, b) * self.cols[b][j];
                }
            }
            v
        })
    }
}

#[derive(Debug, Clone)]
struct MatrixTerm {
    var: PsdVar,
    scale: f64,
    basis: Option<Arc<Basis>>,
}

/// Affine matrix expression `Σ_k α_k Q_k X_k Q_kᵀ + C` used to describe
/// directions such as `Z = Y − X` inside a program (`Q_k = I` when no basis
/// is attached).
#[derive(Debug, Clone)]
pub struct MatrixExpr {
    terms: Vec<MatrixTerm>,
    constant: SymMatrix,
}

impl MatrixExpr {
    pub fn var(var: PsdVar) -> Self {
        Self {
            terms: vec![MatrixTerm {
                var,
                scale: 1.0,
                basis: None,
            }],
            constant: SymMatrix::zeros(var.dim),
        }
    }

    /// `Q W Qᵀ` for a variable `W` of dimension `basis.rank()`.
    pub fn congruence(var: PsdVar, basis: Arc<Basis>) -> Self {
        assert_eq!(var.dim, basis.rank(), "basis rank mismatch");
        Self {
            constant: SymMatrix::zeros(basis.dim()),
            terms: vec![MatrixTerm {
                var,
                scale: 1.0,
                basis: Some(basis),
            }],
        }
    }

    pub fn constant(m: SymMatrix) -> Self {
        Self {
            terms: Vec::new(),
            constant: m,
        }
    }

    pub fn plus_var(mut self, var: PsdVar, scale: f64) -> Self {
        assert_eq!(var.dim, self.constant.dim());
        self.terms.push(MatrixTerm {
            var,
            scale,
            basis: None,
        });
        self
    }

    pub fn plus_expr(mut self, other: &MatrixExpr, scale: f64) -> Self {
        assert_eq!(other.dim(), self.dim());
        self.terms.extend(other.terms.iter().map(|t| MatrixTerm {
            scale: t.scale * scale,
            ..t.clone()
        }));
        self.constant.axpy(scale, &other.constant);
        self
    }

    pub fn plus_constant(mut self, m: &SymMatrix, scale: f64) -> Self {
        self.constant.axpy(scale, m);
        self
    }

    pub fn dim(&self) -> usize {
        self.constant.dim()
    }

    /// `⟨P, self⟩` as a scalar expression.
    pub fn pair(&self, p: &SymMatrix) -> LinExpr {
        let mut e = LinExpr::constant(dot(&self.constant, p));
        for t in &self.terms {
            let coeff = match &t.basis {
                Some(q) => q.compress(p),
                None => p.clone(),
            };
            e.add_pairing(t.var, &coeff.scaled(t.scale));
        }
        e
    }
}

/// Incrementally assembles an equality-form [`ConeProgram`].
#[derive(Debug, Clone, Default)]
pub struct ProgramBuilder {
    psd_dims: Vec<usize>,
    nonneg: usize,
    free: usize,
    rows: Vec<(LinExpr, f64)>,
    objective: LinExpr,
    sense: Sense,
}

impl ProgramBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_psd(&mut self, dim: usize) -> PsdVar {
        self.psd_dims.push(dim);
        PsdVar {
            index: self.psd_dims.len() - 1,
            dim,
        }
    }

    pub fn add_nonneg(&mut self) -> ScalarVar {
        self.nonneg += 1;
        ScalarVar::NonNeg(self.nonneg - 1)
    }

    pub fn add_nonnegs(&mut self, count: usize) -> Vec<ScalarVar> {
        (0..count).map(|_| self.add_nonneg()).collect()
    }

    pub fn add_free(&mut self) -> ScalarVar {
        self.free += 1;
        ScalarVar::Free(self.free - 1)
    }

    /// `expr = rhs`.
    pub fn eq(&mut self, expr: LinExpr, rhs: f64) {
        let c = expr.constant;
        self.rows.push((expr, rhs - c));
    }

    /// `expr ≥ rhs` via a fresh nonnegative surplus variable, which is returned.
    pub fn geq(&mut self, mut expr: LinExpr, rhs: f64) -> ScalarVar {
        let s = self.add_nonneg();
        expr.add_scalar(s, -1.0);
        self.eq(expr, rhs);
        s
    }

    /// `expr ≤ rhs` via a fresh nonnegative slack variable, which is returned.
    pub fn leq(&mut self, mut expr: LinExpr, rhs: f64) -> ScalarVar {
        let s = self.add_nonneg();
        expr.add_scalar(s, 1.0);
        self.eq(expr, rhs);
        s
    }

    pub fn maximize(&mut self, expr: LinExpr) {
        self.objective = expr;
        self.sense = Sense::Maximize;
    }

    pub fn minimize(&mut self, expr: LinExpr) {
        self.objective = expr;
        self.sense = Sense::Minimize;
    }

    pub fn cone(&self) -> ConeSpec {
        ConeSpec {
            psd_blocks: self.psd_dims.clone(),
            nonneg_dim: self.nonneg,
            free_dim: self.free,
        }
    }

    fn dense(&self, cone: &ConeSpec, expr: &LinExpr) -> BlockVector {
        let mut v = BlockVector::zeros(cone);
        for (var, m) in &expr.psd {
            v.psd[var.index] += m;
        }
        for (var, c) in &expr.scalars {
            match *var {
                ScalarVar::NonNeg(i) => v.nonneg[i] += c,
                ScalarVar::Free(i) => v.free[i] += c,
            }
        }
        v
    }

    /// Dense program; the objective constant is dropped (see [`SolvedProgram`]).
    pub fn build(&self) -> ConeProgram {
        let cone = self.cone();
        let objective = self.dense(&cone, &self.objective);
        let constraints = self
            .rows
            .iter()
            .map(|(e, rhs)| Constraint {
                coeffs: self.dense(&cone, e),
                rhs: *rhs,
            })
            .collect();
        ConeProgram {
            cone,
            sense: self.sense,
            objective,
            constraints,
        }
    }

    pub fn solve(&self, settings: &SolverSettings) -> Result<SolvedProgram, ConicError> {
        let program = self.build();
        let solution = super::solve(&program, settings)?;
        Ok(SolvedProgram {
            solution,
            objective_constant: self.objective.constant,
        })
    }
}

/// Solver output with accessors keyed by builder handles.
#[derive(Debug, Clone)]
pub struct SolvedProgram {
    pub solution: ConicSolution,
    objective_constant: f64,
}

impl SolvedProgram {
    pub fn psd(&self, var: PsdVar) -> &SymMatrix {
        &self.solution.primal.psd[var.index]
    }

    pub fn scalar(&self, var: ScalarVar) -> f64 {
        match var {
            ScalarVar::NonNeg(i) => self.solution.primal.nonneg[i],
            ScalarVar::Free(i) => self.solution.primal.free[i],
        }
    }

    /// Dual slack of a PSD block.
    pub fn dual_psd(&self, var: PsdVar) -> &SymMatrix {
        &self.solution.dual_slack.psd[var.index]
    }

    /// Dual slack of a scalar (0 for free variables).
    pub fn dual_scalar(&self, var: ScalarVar) -> f64 {
        match var {
            ScalarVar::NonNeg(i) => self.solution.dual_slack.nonneg[i],
            ScalarVar::Free(_) => 0.0,
        }
    }

    pub fn eval_matrix(&self, expr: &MatrixExpr) -> SymMatrix {
        let mut m = expr.constant.clone();
        for t in &expr.terms {
            let v = self.psd(t.var);
            match &t.basis {
                Some(q) => m.axpy(t.scale, &q.expand(v)),
                None => m.axpy(t.scale, v),
            }
        }
        m
    }

    pub fn eval(&self, expr: &LinExpr) -> f64 {
        let psd: f64 = expr.psd.iter().map(|(v, m)| dot(self.psd(*v), m)).sum();
        let sc: f64 = expr.scalars.iter().map(|(v, c)| c * self.scalar(*v)).sum();
        psd + sc + expr.constant
    }

    /// Primal objective including the expression constant.
    pub fn objective(&self) -> f64 {
        self.solution.objective_value + self.objective_constant
    }

    /// Dual objective including the expression constant.
    pub fn dual_objective(&self) -> f64 {
        self.solution.dual_value + self.objective_constant
    }
}
