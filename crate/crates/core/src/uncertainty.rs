//! Objective uncertainty sets: affine matrix boxes, coordinate intervals and
//! the fixed SOC-bounded set of the quadratic knapsack study.
//!
//! Each set provides a relative-interior scenario, an exact inner
//! minimization of a linear functional, and (for boxes and intervals) a
//! linear description of its dual cone that can be appended to a conic
//! program.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conic::{LinExpr, ProgramBuilder, ScalarVar};
use crate::linalg::{dot, SymMatrix};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum UncertaintyError {
    #[error("{what}: expected length {expected}, got {got}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("matrix dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("μ bound {index}: lo = {lo} exceeds hi = {hi}")]
    InvertedBounds { index: usize, lo: f64, hi: f64 },
    #[error("deviation {index} is negative ({value})")]
    NegativeDeviation { index: usize, value: f64 },
    #[error("uncertainty set is a singleton")]
    Singleton,
    #[error("matrix box needs at least one direction")]
    NoDirections,
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("{0} is not supported for this uncertainty set")]
    Unsupported(&'static str),
}

/// `{ P_0 + Σ μ_i P_i : lo ≤ μ ≤ hi }`.
///
/// Coordinates with `lo_i = hi_i` or `P_i = 0` do not move the set; they are
/// folded into an effective base matrix at construction, and the remaining
/// coordinates are the *active* ones. The original data is kept for
/// serialization and scenario reporting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixBoxRaw", into = "MatrixBoxRaw")]
pub struct MatrixBox {
    base: SymMatrix,
    directions: Vec<SymMatrix>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    effective_base: SymMatrix,
    active: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct MatrixBoxRaw {
    base: SymMatrix,
    directions: Vec<SymMatrix>,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl TryFrom<MatrixBoxRaw> for MatrixBox {
    type Error = UncertaintyError;
    fn try_from(r: MatrixBoxRaw) -> Result<Self, Self::Error> {
        MatrixBox::new(r.base, r.directions, r.lo, r.hi)
    }
}

impl From<MatrixBox> for MatrixBoxRaw {
    fn from(b: MatrixBox) -> Self {
        MatrixBoxRaw {
            base: b.base,
            directions: b.directions,
            lo: b.lo,
            hi: b.hi,
        }
    }
}

impl MatrixBox {
    pub fn new(
        base: SymMatrix,
        directions: Vec<SymMatrix>,
        lo: Vec<f64>,
        hi: Vec<f64>,
    ) -> Result<Self, UncertaintyError> {
        let n = directions.len();
        if n == 0 {
            return Err(UncertaintyError::NoDirections);
        }
        for (what, v) in [("lo", &lo), ("hi", &hi)] {
            if v.len() != n {
                return Err(UncertaintyError::LengthMismatch {
                    what,
                    expected: n,
                    got: v.len(),
                });
            }
        }
        let dim = base.dim();
        for d in &directions {
            if d.dim() != dim {
                return Err(UncertaintyError::DimMismatch {
                    expected: dim,
                    got: d.dim(),
                });
            }
        }
        let finite = |m: &SymMatrix| m.as_slice().iter().all(|v| v.is_finite());
        if !finite(&base) || !directions.iter().all(finite) {
            return Err(UncertaintyError::NonFinite("matrices"));
        }
        if !lo.iter().chain(&hi).all(|v| v.is_finite()) {
            return Err(UncertaintyError::NonFinite("bounds"));
        }
        for i in 0..n {
            if lo[i] > hi[i] {
                return Err(UncertaintyError::InvertedBounds {
                    index: i,
                    lo: lo[i],
                    hi: hi[i],
                });
            }
        }
        let mut effective_base = base.clone();
        let mut active = Vec::new();
        for i in 0..n {
            if lo[i] < hi[i] && !directions[i].is_zero() {
                active.push(i);
            } else {
                effective_base.axpy(lo[i], &directions[i]);
            }
        }
        if active.is_empty() {
            return Err(UncertaintyError::Singleton);
        }
        Ok(Self {
            base,
            directions,
            lo,
            hi,
            effective_base,
            active,
        })
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    /// Number of parameters `N` as given (including folded ones).
    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    pub fn base(&self) -> &SymMatrix {
        &self.base
    }

    pub fn directions(&self) -> &[SymMatrix] {
        &self.directions
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    /// Indices of the coordinates that actually move the set.
    pub fn active(&self) -> &[usize] {
        &self.active
    }

    /// `P(μ)`.
    pub fn at(&self, mu: &[f64]) -> SymMatrix {
        assert_eq!(mu.len(), self.len(), "parameter length mismatch");
        let mut p = self.base.clone();
        for (d, &m) in self.directions.iter().zip(mu) {
            p.axpy(m, d);
        }
        p
    }

    pub fn contains_mu(&self, mu: &[f64], tol: f64) -> bool {
        mu.len() == self.len()
            && mu
                .iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(&m, (&l, &h))| m >= l - tol && m <= h + tol)
    }

    /// Midpoint `μ̂` (folded coordinates sit at their fixed value).
    pub fn relint_mu(&self) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| 0.5 * (l + h))
            .collect()
    }

    pub fn relint_point(&self) -> SymMatrix {
        self.at(&self.relint_mu())
    }

    /// `min_μ ⟨P(μ), X⟩` in closed form, with a minimizing `μ`.
    pub fn inner_min(&self, x: &SymMatrix) -> Result<(f64, Vec<f64>), UncertaintyError> {
        if x.dim() != self.dim() {
            return Err(UncertaintyError::DimMismatch {
                expected: self.dim(),
                got: x.dim(),
            });
        }
        let mut value = dot(&self.effective_base, x);
        let mut mu = self.lo.clone();
        for &i in &self.active {
            let t = dot(&self.directions[i], x);
            if t < 0.0 {
                mu[i] = self.hi[i];
            }
            value += (mu[i] * t).min(self.lo[i] * t);
        }
        Ok((value, mu))
    }

    /// Dual-cone description over the active coordinates. Auxiliary
    /// variables are `(v, u) ∈ R^{2N'}_+` with `⟨P_i, Z⟩ = u_i − v_i` and the
    /// bound `⟨P_0, Z⟩ + loᵀu − hiᵀv ≥ 0`.
    pub fn dual_cone_rows(&self) -> DualConeRows {
        let k = self.active.len();
        let mut rows = Vec::with_capacity(k);
        let mut bound_aux = Vec::with_capacity(2 * k);
        for (r, &i) in self.active.iter().enumerate() {
            rows.push(DualRow {
                pairing: Some(Pairing::Matrix(self.directions[i].clone())),
                aux: vec![(r, 1.0), (k + r, -1.0)],
                kind: RowKind::Eq,
                rhs: 0.0,
            });
            bound_aux.push((r, -self.hi[i]));
            bound_aux.push((k + r, self.lo[i]));
        }
        DualConeRows {
            aux_dim: 2 * k,
            rows,
            bound: DualRow {
                pairing: Some(Pairing::Matrix(self.effective_base.clone())),
                aux: bound_aux,
                kind: RowKind::Geq,
                rhs: 0.0,
            },
        }
    }
}

/// `[p̄ − Δp, p̄]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "IntervalRaw", into = "IntervalRaw")]
pub struct IntervalUncertainty {
    nominal: Vec<f64>,
    deviation: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct IntervalRaw {
    nominal: Vec<f64>,
    deviation: Vec<f64>,
}

impl TryFrom<IntervalRaw> for IntervalUncertainty {
    type Error = UncertaintyError;
    fn try_from(r: IntervalRaw) -> Result<Self, Self::Error> {
        IntervalUncertainty::new(r.nominal, r.deviation)
    }
}

impl From<IntervalUncertainty> for IntervalRaw {
    fn from(u: IntervalUncertainty) -> Self {
        IntervalRaw {
            nominal: u.nominal,
            deviation: u.deviation,
        }
    }
}

impl IntervalUncertainty {
    pub fn new(nominal: Vec<f64>, deviation: Vec<f64>) -> Result<Self, UncertaintyError> {
        if nominal.len() != deviation.len() {
            return Err(UncertaintyError::LengthMismatch {
                what: "deviation",
                expected: nominal.len(),
                got: deviation.len(),
            });
        }
        if !nominal.iter().chain(&deviation).all(|v| v.is_finite()) {
            return Err(UncertaintyError::NonFinite("interval data"));
        }
        if let Some((index, &value)) = deviation.iter().enumerate().find(|(_, &d)| d < 0.0) {
            return Err(UncertaintyError::NegativeDeviation { index, value });
        }
        if deviation.iter().all(|&d| d == 0.0) {
            return Err(UncertaintyError::Singleton);
        }
        Ok(Self { nominal, deviation })
    }

    pub fn dim(&self) -> usize {
        self.nominal.len()
    }

    pub fn nominal(&self) -> &[f64] {
        &self.nominal
    }

    pub fn deviation(&self) -> &[f64] {
        &self.deviation
    }

    pub fn lower(&self) -> Vec<f64> {
        self.nominal
            .iter()
            .zip(&self.deviation)
            .map(|(p, d)| p - d)
            .collect()
    }

    pub fn contains(&self, p: &[f64], tol: f64) -> bool {
        p.len() == self.dim()
            && p.iter()
                .zip(self.nominal.iter().zip(&self.deviation))
                .all(|(&x, (&nom, &dev))| x >= nom - dev - tol && x <= nom + tol)
    }

    pub fn relint_point(&self) -> Vec<f64> {
        self.nominal
            .iter()
            .zip(&self.deviation)
            .map(|(p, d)| p - 0.5 * d)
            .collect()
    }

    /// `min_p cᵀp` with minimizer.
    pub fn inner_min(&self, c: &[f64]) -> Result<(f64, Vec<f64>), UncertaintyError> {
        if c.len() != self.dim() {
            return Err(UncertaintyError::LengthMismatch {
                what: "coefficient",
                expected: self.dim(),
                got: c.len(),
            });
        }
        let p: Vec<f64> = c
            .iter()
            .zip(self.nominal.iter().zip(&self.deviation))
            .map(|(&ci, (&nom, &dev))| if ci >= 0.0 { nom - dev } else { nom })
            .collect();
        let value = c.iter().zip(&p).map(|(a, b)| a * b).sum();
        Ok((value, p))
    }

    /// Auxiliary `y ∈ R^n_+` with `y ≥ z` and the bound `p̄ᵀz − Δpᵀy ≥ 0`.
    pub fn dual_cone_rows(&self) -> DualConeRows {
        let n = self.dim();
        let rows = (0..n)
            .map(|i| {
                let mut e = vec![0.0; n];
                e[i] = -1.0;
                DualRow {
                    pairing: Some(Pairing::Vector(e)),
                    aux: vec![(i, 1.0)],
                    kind: RowKind::Geq,
                    rhs: 0.0,
                }
            })
            .collect();
        DualConeRows {
            aux_dim: n,
            rows,
            bound: DualRow {
                pairing: Some(Pairing::Vector(self.nominal.clone())),
                aux: self
                    .deviation
                    .iter()
                    .enumerate()
                    .map(|(i, &d)| (i, -d))
                    .collect(),
                kind: RowKind::Geq,
                rhs: 0.0,
            },
        }
    }
}

/// `{p ∈ R² : p_1 ≥ 1, p_1² ≤ p_2 ≤ 4}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct KnapsackSoc;

impl KnapsackSoc {
    pub fn contains(&self, p: &[f64], tol: f64) -> bool {
        p.len() == 2 && p[0] >= 1.0 - tol && p[0] * p[0] <= p[1] + tol && p[1] <= 4.0 + tol
    }

    pub fn contains_strictly(&self, p: &[f64]) -> bool {
        p.len() == 2 && p[0] > 1.0 && p[0] * p[0] < p[1] && p[1] < 4.0
    }

    pub fn relint_point(&self) -> Vec<f64> {
        vec![1.2, 2.0]
    }

    /// `min_p cᵀp`: the three corners and, when the objective is convex along
    /// the curved edge `p_2 = p_1²`, its stationary point.
    pub fn inner_min(&self, c: &[f64]) -> Result<(f64, Vec<f64>), UncertaintyError> {
        if c.len() != 2 {
            return Err(UncertaintyError::LengthMismatch {
                what: "coefficient",
                expected: 2,
                got: c.len(),
            });
        }
        let mut candidates = vec![[1.0, 1.0], [1.0, 4.0], [2.0, 4.0]];
        if c[1] > 0.0 {
            let t = -c[0] / (2.0 * c[1]);
            if (1.0..=2.0).contains(&t) {
                candidates.push([t, t * t]);
            }
        }
        let (value, p) = candidates
            .iter()
            .map(|p| (c[0] * p[0] + c[1] * p[1], p))
            .fold((f64::INFINITY, &candidates[0]), |best, cur| {
                if cur.0 < best.0 {
                    cur
                } else {
                    best
                }
            });
        Ok((value, p.to_vec()))
    }
}

/// Tagged union used by problem files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum UncertaintySet {
    MatrixBox(MatrixBox),
    Interval(IntervalUncertainty),
    KnapsackSoc(KnapsackSoc),
}

/// A point of the uncertainty set or a coefficient of the pairing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Pairing {
    Matrix(SymMatrix),
    Vector(Vec<f64>),
}

impl Pairing {
    pub fn pair(&self, other: &Pairing) -> Option<f64> {
        match (self, other) {
            (Pairing::Matrix(a), Pairing::Matrix(b)) if a.dim() == b.dim() => Some(dot(a, b)),
            (Pairing::Vector(a), Pairing::Vector(b)) if a.len() == b.len() => {
                Some(a.iter().zip(b).map(|(x, y)| x * y).sum())
            }
            _ => None,
        }
    }
}

impl UncertaintySet {
    pub fn relint_point(&self) -> Pairing {
        match self {
            UncertaintySet::MatrixBox(b) => Pairing::Matrix(b.relint_point()),
            UncertaintySet::Interval(u) => Pairing::Vector(u.relint_point()),
            UncertaintySet::KnapsackSoc(k) => Pairing::Vector(k.relint_point()),
        }
    }

    /// Minimum of the pairing with `coeff` over the set, and a minimizer.
    /// Matrix boxes return the minimizing scenario matrix `P(μ*)`.
    pub fn inner_min(&self, coeff: &Pairing) -> Result<(f64, Pairing), UncertaintyError> {
        match (self, coeff) {
            (UncertaintySet::MatrixBox(b), Pairing::Matrix(x)) => {
                let (v, mu) = b.inner_min(x)?;
                Ok((v, Pairing::Matrix(b.at(&mu))))
            }
            (UncertaintySet::Interval(u), Pairing::Vector(c)) => {
                let (v, p) = u.inner_min(c)?;
                Ok((v, Pairing::Vector(p)))
            }
            (UncertaintySet::KnapsackSoc(k), Pairing::Vector(c)) => {
                let (v, p) = k.inner_min(c)?;
                Ok((v, Pairing::Vector(p)))
            }
            _ => Err(UncertaintyError::Unsupported("this coefficient kind")),
        }
    }

    pub fn dual_cone_rows(&self) -> Result<DualConeRows, UncertaintyError> {
        match self {
            UncertaintySet::MatrixBox(b) => Ok(b.dual_cone_rows()),
            UncertaintySet::Interval(u) => Ok(u.dual_cone_rows()),
            UncertaintySet::KnapsackSoc(_) => Err(UncertaintyError::Unsupported("dual cone rows")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowKind {
    Eq,
    Geq,
}

/// `⟨pairing, Z⟩ + Σ aux_coef · w_aux  (= | ≥)  rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualRow {
    pub pairing: Option<Pairing>,
    pub aux: Vec<(usize, f64)>,
    pub kind: RowKind,
    pub rhs: f64,
}

/// Linear description of `Z ∈ U*` through nonnegative auxiliary variables:
/// `Z` is in the dual cone iff some auxiliary vector satisfies all `rows`
/// and the `bound` row. The bound row's left-hand side, maximized over the
/// auxiliaries subject to `rows`, equals the inner minimum of `⟨·, Z⟩`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualConeRows {
    pub aux_dim: usize,
    pub rows: Vec<DualRow>,
    pub bound: DualRow,
}

impl DualConeRows {
    /// Adds the auxiliaries and structural rows to `pb` and returns the bound
    /// row's left-hand side. `pair` maps a pairing coefficient to the
    /// expression `⟨coefficient, Z⟩` in terms of `pb`'s variables.
    pub fn append_lower_bound(
        &self,
        pb: &mut ProgramBuilder,
        pair: &dyn Fn(&Pairing) -> LinExpr,
    ) -> LinExpr {
        self.append_lower_bound_with(pb, pair, &[]).0
    }

    /// As [`append_lower_bound`](Self::append_lower_bound), with auxiliaries
    /// flagged in `fixed_zero` substituted by 0 instead of being created.
    /// Also returns the auxiliary handles.
    pub fn append_lower_bound_with(
        &self,
        pb: &mut ProgramBuilder,
        pair: &dyn Fn(&Pairing) -> LinExpr,
        fixed_zero: &[bool],
    ) -> (LinExpr, Vec<Option<ScalarVar>>) {
        let aux: Vec<Option<ScalarVar>> = (0..self.aux_dim)
            .map(|k| {
                if fixed_zero.get(k).copied().unwrap_or(false) {
                    None
                } else {
                    Some(pb.add_nonneg())
                }
            })
            .collect();
        let lhs = |row: &DualRow| {
            let mut e = match &row.pairing {
                Some(p) => pair(p),
                None => LinExpr::new(),
            };
            for &(k, c) in &row.aux {
                if let Some(v) = aux[k] {
                    e.add_scalar(v, c);
                }
            }
            e
        };
        for row in &self.rows {
            let e = lhs(row);
            match row.kind {
                RowKind::Eq => pb.eq(e, row.rhs),
                RowKind::Geq => {
                    pb.geq(e, row.rhs);
                }
            }
        }
        (lhs(&self.bound), aux)
    }

    /// Appends the full membership constraint `Z ∈ U*`.
    pub fn append_membership(&self, pb: &mut ProgramBuilder, pair: &dyn Fn(&Pairing) -> LinExpr) {
        let e = self.append_lower_bound(pb, pair);
        pb.geq(e, self.bound.rhs);
    }
}
