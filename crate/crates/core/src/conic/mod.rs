//! Dense primal-dual interior-point solver for conic programs over products of
//! PSD blocks, the nonnegative orthant and free scalars.
//!
//! Programs are stated in equality form
//!
//! ```text
//! maximize    ⟨c, x⟩
//! subject to  ⟨a_i, x⟩ = b_i        i = 1..m
//!             x ∈ S^{n_1}_+ × … × S^{n_k}_+ × R^l_+ × R^f
//! ```
//!
//! and the dual multipliers `y` reported in [`ConicSolution`] satisfy
//! `Σ y_i a_i − c ∈ K*` with dual objective `bᵀy` (for [`Sense::Maximize`]).
//! Inequalities are expressed by the caller through explicit nonnegative
//! slacks; [`ProgramBuilder`] does that bookkeeping.

mod builder;
mod ipm;

pub use builder::{Basis, LinExpr, MatrixExpr, ProgramBuilder, PsdVar, ScalarVar, SolvedProgram};
pub use ipm::solve;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{dot, SymMatrix};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConicError {
    #[error("cone has no conic (PSD or nonnegative) variables")]
    NoConicVariables,
    #[error("block dimension must be positive")]
    EmptyBlock,
    #[error("{what}: expected shape {expected}, got {got}")]
    ShapeMismatch {
        what: String,
        expected: String,
        got: String,
    },
    #[error("non-finite data in {0}")]
    NonFinite(String),
}

/// Product-cone layout.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConeSpec {
    pub psd_blocks: Vec<usize>,
    pub nonneg_dim: usize,
    pub free_dim: usize,
}

impl ConeSpec {
    /// Barrier parameter `Σ n_k + l`.
    pub fn degree(&self) -> usize {
        self.psd_blocks.iter().sum::<usize>() + self.nonneg_dim
    }

    pub fn validate(&self) -> Result<(), ConicError> {
        if self.psd_blocks.contains(&0) {
            return Err(ConicError::EmptyBlock);
        }
        if self.degree() == 0 {
            return Err(ConicError::NoConicVariables);
        }
        Ok(())
    }
}

/// One value per cone block: a matrix per PSD block, then scalar parts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockVector {
    pub psd: Vec<SymMatrix>,
    pub nonneg: Vec<f64>,
    pub free: Vec<f64>,
}

impl BlockVector {
    pub fn zeros(cone: &ConeSpec) -> Self {
        Self {
            psd: cone
                .psd_blocks
                .iter()
                .map(|&n| SymMatrix::zeros(n))
                .collect(),
            nonneg: vec![0.0; cone.nonneg_dim],
            free: vec![0.0; cone.free_dim],
        }
    }

    pub fn dot(&self, other: &BlockVector) -> f64 {
        let psd: f64 = self
            .psd
            .iter()
            .zip(&other.psd)
            .map(|(a, b)| dot(a, b))
            .sum();
        let lin: f64 = self
            .nonneg
            .iter()
            .zip(&other.nonneg)
            .map(|(a, b)| a * b)
            .sum();
        let free: f64 = self.free.iter().zip(&other.free).map(|(a, b)| a * b).sum();
        psd + lin + free
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    fn check_shape(&self, cone: &ConeSpec, what: &str) -> Result<(), ConicError> {
        let dims: Vec<usize> = self.psd.iter().map(|m| m.dim()).collect();
        if dims != cone.psd_blocks
            || self.nonneg.len() != cone.nonneg_dim
            || self.free.len() != cone.free_dim
        {
            return Err(ConicError::ShapeMismatch {
                what: what.to_string(),
                expected: format!(
                    "psd {:?}, nonneg {}, free {}",
                    cone.psd_blocks, cone.nonneg_dim, cone.free_dim
                ),
                got: format!(
                    "psd {:?}, nonneg {}, free {}",
                    dims,
                    self.nonneg.len(),
                    self.free.len()
                ),
            });
        }
        let finite = self
            .psd
            .iter()
            .all(|m| m.as_slice().iter().all(|v| v.is_finite()))
            && self.nonneg.iter().chain(&self.free).all(|v| v.is_finite());
        if !finite {
            return Err(ConicError::NonFinite(what.to_string()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub coeffs: BlockVector,
    pub rhs: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Sense {
    #[default]
    Maximize,
    Minimize,
}

/// Equality-form conic program.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeProgram {
    pub cone: ConeSpec,
    #[serde(default)]
    pub sense: Sense,
    pub objective: BlockVector,
    pub constraints: Vec<Constraint>,
}

impl ConeProgram {
    pub fn validate(&self) -> Result<(), ConicError> {
        self.cone.validate()?;
        self.objective.check_shape(&self.cone, "objective")?;
        for (i, row) in self.constraints.iter().enumerate() {
            row.coeffs
                .check_shape(&self.cone, &format!("constraint {i}"))?;
            if !row.rhs.is_finite() {
                return Err(ConicError::NonFinite(format!("rhs of constraint {i}")));
            }
        }
        Ok(())
    }

    /// `max_i |⟨a_i, x⟩ − b_i|`.
    pub fn primal_residual(&self, x: &BlockVector) -> f64 {
        self.constraints
            .iter()
            .map(|row| (row.coeffs.dot(x) - row.rhs).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    PrimalInfeasible,
    DualInfeasible,
    NumericalFailure,
}

/// Farkas-type evidence attached to an infeasible status.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Certificate {
    /// `y` with `−Σ y_i a_i ∈ K` (zero on free parts) and `bᵀy > 0`,
    /// normalized to `bᵀy = 1`.
    PrimalInfeasible { y: Vec<f64> },
    /// `x ∈ K` with `⟨a_i, x⟩ = 0` for all `i` that improves the objective
    /// without bound, normalized to unit objective improvement.
    DualInfeasible { x: BlockVector },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConicSolution {
    pub status: SolveStatus,
    pub primal: BlockVector,
    pub dual: Vec<f64>,
    pub dual_slack: BlockVector,
    pub objective_value: f64,
    pub dual_value: f64,
    /// Relative duality gap `|pobj − dobj| / (1 + |pobj| + |dobj|)`.
    pub gap: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub iterations: usize,
    pub certificate: Option<Certificate>,
}

impl ConicSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    pub gap_tol: f64,
    pub feas_tol: f64,
    pub iter_cap: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            gap_tol: 1e-8,
            feas_tol: 1e-8,
            iter_cap: 200,
        }
    }
}
