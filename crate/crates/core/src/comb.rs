//! Exhaustive oracle for binary robust problems `max_{x ∈ X} min_{p ∈ U} f(x, p)`
//! with objectives affine in `p`: robust optimum, Pareto dominance among all
//! feasible points, and the interval-uncertainty characterizations.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::uncertainty::{IntervalUncertainty, Pairing, UncertaintyError, UncertaintySet};

/// Largest dimension accepted for enumeration.
pub const MAX_DIM: usize = 24;

/// Threshold for `≥ 0` and strict `> 0` comparisons of objective differences.
pub const DOMINANCE_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CombError {
    #[error(transparent)]
    Uncertainty(#[from] UncertaintyError),
    #[error("invalid problem: {0}")]
    Invalid(String),
    #[error("dimension {0} exceeds the enumeration limit {MAX_DIM}")]
    TooLarge(usize),
    #[error("feasible set is empty")]
    Empty,
    #[error("point {0:?} is not feasible")]
    NotFeasible(Vec<u8>),
    #[error("point {0:?} is not robustly optimal")]
    NotRobustOptimal(Vec<u8>),
    #[error("invalid move: {0}")]
    InvalidMove(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
}

/// An edge of a cut objective with weight `base + coeffsᵀp`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineEdge {
    pub i: usize,
    pub j: usize,
    pub base: f64,
    pub coeffs: Vec<f64>,
}

/// `f(x, p) = f̄(x)ᵀp + g(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Objective {
    /// `pᵀx`.
    Linear,
    /// `xᵀR(p)x` with `R(p) = 11ᵀ + (p_1 − 1)(E_ii + E_jj) + (p_2 − 1)E_ij`,
    /// where `E_ij` is the symmetrized unit matrix.
    QuadraticKnapsack { i: usize, j: usize },
    /// Total weight of the edges crossing `{v : x_v = 1}`.
    CutWeight { edges: Vec<AffineEdge> },
}

impl Objective {
    /// `(f̄(x), g(x))`.
    pub fn coefficients(&self, x: &[u8], param_dim: usize) -> (Vec<f64>, f64) {
        match self {
            Objective::Linear => (x.iter().map(|&v| f64::from(v)).collect(), 0.0),
            Objective::QuadraticKnapsack { i, j } => {
                let (xi, xj) = (f64::from(x[*i]), f64::from(x[*j]));
                let s: f64 = x.iter().map(|&v| f64::from(v)).sum();
                (vec![xi + xj, xi * xj], s * s - xi - xj - xi * xj)
            }
            Objective::CutWeight { edges } => {
                let mut c = vec![0.0; param_dim];
                let mut g = 0.0;
                for e in edges.iter().filter(|e| x[e.i] != x[e.j]) {
                    g += e.base;
                    for (ck, ek) in c.iter_mut().zip(&e.coeffs) {
                        *ck += ek;
                    }
                }
                (c, g)
            }
        }
    }

    fn validate(&self, n: usize, param_dim: usize) -> Result<(), CombError> {
        match self {
            Objective::Linear if param_dim != n => Err(CombError::Invalid(format!(
                "linear objective needs {n} parameters, uncertainty has {param_dim}"
            ))),
            Objective::QuadraticKnapsack { i, j } => {
                if param_dim != 2 {
                    return Err(CombError::Invalid(
                        "quadratic knapsack needs 2 parameters".into(),
                    ));
                }
                if *i >= n || *j >= n || i == j {
                    return Err(CombError::Invalid(format!("bad index pair ({i}, {j})")));
                }
                Ok(())
            }
            Objective::CutWeight { edges } => {
                for e in edges {
                    if e.i >= n || e.j >= n || e.i == e.j {
                        return Err(CombError::Invalid(format!("bad edge ({}, {})", e.i, e.j)));
                    }
                    if e.coeffs.len() != param_dim {
                        return Err(CombError::Invalid(format!(
                            "edge ({}, {}) has {} coefficients, expected {param_dim}",
                            e.i,
                            e.j,
                            e.coeffs.len()
                        )));
                    }
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// Feasible subset of `{0,1}^n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Feasible {
    List {
        points: Vec<Vec<u8>>,
    },
    /// `{x : wᵀx ≤ capacity}`.
    Knapsack {
        weights: Vec<f64>,
        capacity: f64,
    },
}

impl Feasible {
    fn points(&self, n: usize) -> Result<Vec<Vec<u8>>, CombError> {
        match self {
            Feasible::List { points } => {
                for p in points {
                    if p.len() != n || p.iter().any(|&v| v > 1) {
                        return Err(CombError::Invalid(format!(
                            "{p:?} is not a binary {n}-vector"
                        )));
                    }
                }
                let mut out: Vec<Vec<u8>> = Vec::with_capacity(points.len());
                for p in points {
                    if !out.contains(p) {
                        out.push(p.clone());
                    }
                }
                Ok(out)
            }
            Feasible::Knapsack { weights, capacity } => {
                if weights.len() != n {
                    return Err(CombError::Invalid(format!(
                        "{} weights for dimension {n}",
                        weights.len()
                    )));
                }
                Ok((0u32..1 << n)
                    .into_par_iter()
                    .filter_map(|mask| {
                        let load: f64 = (0..n)
                            .filter(|k| mask >> k & 1 == 1)
                            .map(|k| weights[k])
                            .sum();
                        (load <= *capacity).then(|| unpack(mask, n))
                    })
                    .collect())
            }
        }
    }
}

fn unpack(mask: u32, n: usize) -> Vec<u8> {
    (0..n).map(|k| (mask >> k & 1) as u8).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryRobustProblem {
    pub n: usize,
    pub feasible: Feasible,
    pub objective: Objective,
    pub uncertainty: UncertaintySet,
}

/// A feasible point with its objective representation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluated {
    pub x: Vec<u8>,
    pub coeff: Vec<f64>,
    pub constant: f64,
    pub worst_case: f64,
    pub nominal: f64,
}

/// The feasible set evaluated once, shared by all queries.
#[derive(Debug, Clone)]
pub struct Enumeration {
    uncertainty: UncertaintySet,
    p_hat: Vec<f64>,
    points: Vec<Evaluated>,
    value: f64,
}

fn param_dim(u: &UncertaintySet) -> Result<usize, CombError> {
    match u {
        UncertaintySet::Interval(i) => Ok(i.dim()),
        UncertaintySet::KnapsackSoc(_) => Ok(2),
        UncertaintySet::MatrixBox(_) => Err(CombError::Invalid(
            "binary problems take interval or knapsack uncertainty".into(),
        )),
    }
}

fn min_over(u: &UncertaintySet, c: &[f64]) -> Result<f64, CombError> {
    Ok(u.inner_min(&Pairing::Vector(c.to_vec()))?.0)
}

impl BinaryRobustProblem {
    pub fn enumerate(&self) -> Result<Enumeration, CombError> {
        if self.n == 0 {
            return Err(CombError::Invalid("dimension must be positive".into()));
        }
        if self.n > MAX_DIM {
            return Err(CombError::TooLarge(self.n));
        }
        let d = param_dim(&self.uncertainty)?;
        self.objective.validate(self.n, d)?;
        let p_hat = match self.uncertainty.relint_point() {
            Pairing::Vector(v) => v,
            Pairing::Matrix(_) => unreachable!("vector uncertainty"),
        };
        let points = self.feasible.points(self.n)?;
        if points.is_empty() {
            return Err(CombError::Empty);
        }
        let points = points
            .into_par_iter()
            .map(|x| {
                let (coeff, constant) = self.objective.coefficients(&x, d);
                let worst_case = min_over(&self.uncertainty, &coeff)? + constant;
                let nominal = dot(&coeff, &p_hat) + constant;
                Ok(Evaluated {
                    x,
                    coeff,
                    constant,
                    worst_case,
                    nominal,
                })
            })
            .collect::<Result<Vec<_>, CombError>>()?;
        let value = points
            .iter()
            .map(|e| e.worst_case)
            .fold(f64::NEG_INFINITY, f64::max);
        Ok(Enumeration {
            uncertainty: self.uncertainty.clone(),
            p_hat,
            points,
            value,
        })
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoResult {
    pub value: f64,
    pub solutions: Vec<Vec<u8>>,
}

/// A dominated robust solution and a PRO point dominating it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominatedPoint {
    pub x: Vec<u8>,
    pub witness: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProPartition {
    pub value: f64,
    pub pro: Vec<Vec<u8>>,
    pub dominated: Vec<DominatedPoint>,
}

impl Enumeration {
    pub fn points(&self) -> &[Evaluated] {
        &self.points
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn p_hat(&self) -> &[f64] {
        &self.p_hat
    }

    pub fn find(&self, x: &[u8]) -> Option<&Evaluated> {
        self.points.iter().find(|e| e.x == x)
    }

    pub fn is_ro(&self, e: &Evaluated) -> bool {
        e.worst_case >= self.value - DOMINANCE_TOL
    }

    pub fn ro(&self) -> RoResult {
        RoResult {
            value: self.value,
            solutions: self
                .points
                .iter()
                .filter(|e| self.is_ro(e))
                .map(|e| e.x.clone())
                .collect(),
        }
    }

    /// `y` dominates `x`: never worse on `U` and strictly better at `p̂`,
    /// which for a never-worse `y` is equivalent to being strictly better
    /// somewhere.
    pub fn dominates(&self, y: &Evaluated, x: &Evaluated) -> bool {
        let c: Vec<f64> = y.coeff.iter().zip(&x.coeff).map(|(a, b)| a - b).collect();
        let g = y.constant - x.constant;
        if dot(&c, &self.p_hat) + g <= DOMINANCE_TOL {
            return false;
        }
        min_over(&self.uncertainty, &c).expect("dimensions validated") + g >= -DOMINANCE_TOL
    }

    /// Best dominator of `x` by nominal value; such a maximizer is itself
    /// undominated.
    pub fn best_dominator(&self, x: &Evaluated) -> Option<&Evaluated> {
        self.points.iter().filter(|y| self.dominates(y, x)).fold(
            None,
            |best: Option<&Evaluated>, y| match best {
                Some(b) if b.nominal >= y.nominal => Some(b),
                _ => Some(y),
            },
        )
    }

    pub fn pro_partition(&self) -> ProPartition {
        let ro: Vec<&Evaluated> = self.points.iter().filter(|e| self.is_ro(e)).collect();
        let verdicts: Vec<Option<Vec<u8>>> = ro
            .par_iter()
            .map(|x| self.best_dominator(x).map(|y| y.x.clone()))
            .collect();
        let mut pro = Vec::new();
        let mut dominated = Vec::new();
        for (x, w) in ro.into_iter().zip(verdicts) {
            match w {
                None => pro.push(x.x.clone()),
                Some(witness) => dominated.push(DominatedPoint {
                    x: x.x.clone(),
                    witness,
                }),
            }
        }
        ProPartition {
            value: self.value,
            pro,
            dominated,
        }
    }
}

pub fn enumerate_ro(prob: &BinaryRobustProblem) -> Result<RoResult, CombError> {
    Ok(prob.enumerate()?.ro())
}

pub fn brute_force_pro(prob: &BinaryRobustProblem) -> Result<ProPartition, CombError> {
    Ok(prob.enumerate()?.pro_partition())
}

fn interval_linear(prob: &BinaryRobustProblem) -> Result<&IntervalUncertainty, CombError> {
    match (&prob.uncertainty, &prob.objective) {
        (UncertaintySet::Interval(u), Objective::Linear) => Ok(u),
        _ => Err(CombError::Precondition(
            "needs interval uncertainty and a linear objective".into(),
        )),
    }
}

/// The three-condition test for `x* + z` dominating `x*` under interval
/// uncertainty with a linear objective.
pub fn prop2_check(prob: &BinaryRobustProblem, x_star: &[u8], z: &[i8]) -> Result<bool, CombError> {
    let u = interval_linear(prob)?;
    let en = prob.enumerate()?;
    prop2_check_in(&en, u, x_star, z)
}

/// As [`prop2_check`] on a precomputed enumeration.
pub fn prop2_check_in(
    en: &Enumeration,
    u: &IntervalUncertainty,
    x_star: &[u8],
    z: &[i8],
) -> Result<bool, CombError> {
    let n = u.dim();
    if x_star.len() != n || z.len() != n {
        return Err(CombError::InvalidMove(format!("expected length {n}")));
    }
    let xe = en
        .find(x_star)
        .ok_or_else(|| CombError::NotFeasible(x_star.to_vec()))?;
    if !en.is_ro(xe) {
        return Err(CombError::NotRobustOptimal(x_star.to_vec()));
    }
    let mut y = Vec::with_capacity(n);
    for (&x, &d) in x_star.iter().zip(z) {
        let v = i16::from(x) + i16::from(d);
        if !(-1..=1).contains(&d) || !(0..=1).contains(&v) {
            return Err(CombError::InvalidMove(format!(
                "{z:?} leaves the cube at {x_star:?}"
            )));
        }
        y.push(v as u8);
    }
    let dev = u.deviation();
    let first = en.find(&y).is_some_and(|e| en.is_ro(e));
    let second = z.iter().zip(dev).all(|(&d, &dp)| d != -1 || dp == 0.0);
    let third = z.iter().zip(dev).any(|(&d, &dp)| d == 1 && dp > 0.0);
    Ok(first && second && third)
}

/// Brute-force `X^RO = X^PRO`.
pub fn ro_equals_pro(prob: &BinaryRobustProblem) -> Result<bool, CombError> {
    Ok(brute_force_pro(prob)?.dominated.is_empty())
}

/// [`ro_equals_pro`] for interval instances with `Δp > 0` and `Δp_i ≠ p̄_i`.
pub fn corollary_check(prob: &BinaryRobustProblem) -> Result<bool, CombError> {
    let u = interval_linear(prob)?;
    for (i, (&p, &d)) in u.nominal().iter().zip(u.deviation()).enumerate() {
        if d <= 0.0 {
            return Err(CombError::Precondition(format!(
                "deviation {i} is not positive"
            )));
        }
        if d == p {
            return Err(CombError::Precondition(format!(
                "deviation {i} equals the nominal value"
            )));
        }
    }
    ro_equals_pro(prob)
}

/// The robust quadratic knapsack instance with `n` items, budget `1ᵀx ≤ 5`
/// and uncertain rewards on the pair `(0, 1)`.
pub fn knapsack_example(n: usize) -> BinaryRobustProblem {
    BinaryRobustProblem {
        n,
        feasible: Feasible::Knapsack {
            weights: vec![1.0; n],
            capacity: 5.0,
        },
        objective: Objective::QuadraticKnapsack { i: 0, j: 1 },
        uncertainty: UncertaintySet::KnapsackSoc(crate::uncertainty::KnapsackSoc),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn interval(
        nominal: Vec<f64>,
        deviation: Vec<f64>,
        points: Vec<Vec<u8>>,
    ) -> BinaryRobustProblem {
        BinaryRobustProblem {
            n: nominal.len(),
            feasible: Feasible::List { points },
            objective: Objective::Linear,
            uncertainty: UncertaintySet::Interval(
                IntervalUncertainty::new(nominal, deviation).unwrap(),
            ),
        }
    }

    #[test]
    fn knapsack_ro_and_pro() {
        let p = knapsack_example(7);
        let ro = enumerate_ro(&p).unwrap();
        assert_eq!(ro.value, 25.0);
        assert_eq!(ro.solutions.len(), 21);
        assert!(ro
            .solutions
            .iter()
            .all(|x| x.iter().map(|&v| v as u32).sum::<u32>() == 5));
        let part = brute_force_pro(&p).unwrap();
        assert_eq!(part.pro.len(), 10);
        assert!(part.pro.iter().all(|x| x[0] == 1 && x[1] == 1));
        assert_eq!(part.dominated.len(), 11);
    }

    #[test]
    fn knapsack_gain_at_corner() {
        let p = knapsack_example(7);
        let pro = vec![1, 1, 1, 1, 1, 0, 0];
        let dom = vec![0, 0, 1, 1, 1, 1, 1];
        let val = |x: &[u8]| {
            let (c, g) = p.objective.coefficients(x, 2);
            dot(&c, &[2.0, 4.0]) + g
        };
        assert_eq!(val(&pro), 30.0);
        assert_eq!(val(&dom), 25.0);
    }

    #[test]
    fn symmetric_interval() {
        let p = interval(vec![1.0, 1.0], vec![1.0, 1.0], vec![vec![1, 0], vec![0, 1]]);
        let ro = enumerate_ro(&p).unwrap();
        assert_eq!(ro.value, 0.0);
        assert_eq!(ro.solutions.len(), 2);
        assert!(!prop2_check(&p, &[1, 0], &[-1, 1]).unwrap());
        assert!(ro_equals_pro(&p).unwrap());
    }

    #[test]
    fn triangle_cut_selection() {
        let e = |i, j, base, slope| AffineEdge {
            i,
            j,
            base,
            coeffs: vec![slope],
        };
        let p = BinaryRobustProblem {
            n: 3,
            feasible: Feasible::List {
                points: vec![vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 1]],
            },
            objective: Objective::CutWeight {
                edges: vec![e(0, 1, 4.0, 2.0), e(0, 2, 4.0, 2.0), e(1, 2, 3.0, 1.0)],
            },
            uncertainty: UncertaintySet::Interval(
                IntervalUncertainty::new(vec![1.0], vec![2.0]).unwrap(),
            ),
        };
        let ro = enumerate_ro(&p).unwrap();
        assert_eq!(ro.value, 4.0);
        assert_eq!(ro.solutions.len(), 3);
        let part = brute_force_pro(&p).unwrap();
        assert_eq!(part.pro, vec![vec![1, 0, 0]]);
        assert!(part.dominated.iter().all(|d| d.witness == vec![1, 0, 0]));
    }

    #[test]
    fn prop2_move_errors() {
        let p = interval(vec![1.0, 1.0], vec![1.0, 0.0], vec![vec![1, 0], vec![1, 1]]);
        assert!(matches!(
            prop2_check(&p, &[0, 1], &[0, 0]),
            Err(CombError::NotFeasible(_))
        ));
        assert!(matches!(
            prop2_check(&p, &[1, 0], &[0, 1]),
            Err(CombError::NotRobustOptimal(_))
        ));
        assert!(matches!(
            prop2_check(&p, &[1, 1], &[1, 0]),
            Err(CombError::InvalidMove(_))
        ));
        // z = 0 never improves.
        assert!(!prop2_check(&p, &[1, 1], &[0, 0]).unwrap());
    }

    #[test]
    fn corollary_preconditions() {
        let p = interval(vec![1.0, 1.0], vec![1.0, 1.0], vec![vec![1, 0], vec![1, 1]]);
        assert!(matches!(
            corollary_check(&p),
            Err(CombError::Precondition(_))
        ));
        // Both points have worst case 0, and the superset gains at p̂.
        assert!(!ro_equals_pro(&p).unwrap());
        let q = interval(vec![1.0], vec![0.5], vec![vec![0], vec![1]]);
        assert_eq!(enumerate_ro(&q).unwrap().solutions, vec![vec![1]]);
        assert!(corollary_check(&q).unwrap());
    }

    #[test]
    fn corollary_needs_nonnegative_lower_bounds() {
        // p̄ − Δp = (1, −1): the lower corner is not nonnegative, and the
        // superset {1, 2} dominates ∅ although Δp > 0 and Δp ≠ p̄.
        let p = interval(vec![2.0, 1.0], vec![1.0, 2.0], vec![vec![0, 0], vec![1, 1]]);
        assert!(!corollary_check(&p).unwrap());
    }

    #[test]
    fn rejects_bad_instances() {
        let mut p = interval(vec![1.0], vec![1.0], vec![]);
        assert_eq!(enumerate_ro(&p).unwrap_err(), CombError::Empty);
        p.n = 25;
        assert!(matches!(enumerate_ro(&p), Err(CombError::TooLarge(25))));
        let q = BinaryRobustProblem {
            objective: Objective::QuadraticKnapsack { i: 0, j: 0 },
            ..knapsack_example(3)
        };
        assert!(matches!(enumerate_ro(&q), Err(CombError::Invalid(_))));
    }
}
