//! Robust max-cut with weight uncertainty: Laplacians, exact enumeration,
//! the robust SDP relaxation and Goemans-Williamson hyperplane rounding.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::comb::{self, AffineEdge, BinaryRobustProblem, CombError, Feasible, Objective};
use crate::conic::{MatrixExpr, ProgramBuilder};
use crate::linalg::{psd_factor, LinalgError, SymMatrix};
use crate::pro::{self, ProError, ProSettings, RobustSdpProblem, Spectrahedron};
use crate::uncertainty::{IntervalUncertainty, MatrixBox, UncertaintyError, UncertaintySet};

/// Enumeration limit for [`brute_force_maxcut`].
pub const MAX_BRUTE_FORCE: usize = 20;

const TIE_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MaxCutError {
    #[error("invalid graph: {0}")]
    Invalid(String),
    #[error(transparent)]
    Uncertainty(#[from] UncertaintyError),
    #[error(transparent)]
    Pro(#[from] ProError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Comb(#[from] CombError),
    #[error("{0} vertices exceed the enumeration limit {MAX_BRUTE_FORCE}")]
    TooLarge(usize),
}

/// Edge weights as a function of a parameter box.
#[derive(Debug, Clone, PartialEq)]
pub enum Weights {
    /// `w_e ∈ [nominal_e − deviation_e, nominal_e]`.
    Box {
        nominal: Vec<f64>,
        deviation: Vec<f64>,
    },
    /// `w_e(μ) = w0_e + w_mu_eᵀμ` with `μ ∈ [lo, hi]`.
    Affine {
        w0: Vec<f64>,
        w_mu: Vec<Vec<f64>>,
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
}

/// Weights `base + Σ_k θ_k dirs[k]`, `θ ∈ [lo, hi]`, covering both forms.
#[derive(Debug, Clone, PartialEq)]
struct Parametric {
    base: Vec<f64>,
    dirs: Vec<Vec<f64>>,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl Parametric {
    fn weights(&self, theta: &[f64]) -> Vec<f64> {
        let mut w = self.base.clone();
        for (d, t) in self.dirs.iter().zip(theta) {
            for (we, de) in w.iter_mut().zip(d) {
                *we += t * de;
            }
        }
        w
    }

    fn midpoint(&self) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| 0.5 * (a + b))
            .collect()
    }

    /// Minimizes `Σ_e c_e w_e(θ)` for `c ≥ 0` or any `c` coordinate-wise.
    fn min_linear(&self, c: &[f64]) -> (f64, Vec<f64>) {
        let theta: Vec<f64> = self
            .dirs
            .iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(d, (&lo, &hi))| {
                let slope: f64 = d.iter().zip(c).map(|(a, b)| a * b).sum();
                if slope >= 0.0 {
                    lo
                } else {
                    hi
                }
            })
            .collect();
        let w = self.weights(&theta);
        (w.iter().zip(c).map(|(a, b)| a * b).sum(), w)
    }

    fn is_certain(&self) -> bool {
        self.dirs
            .iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(d, (lo, hi))| lo == hi || d.iter().all(|&v| v == 0.0))
    }
}

/// Graph with uncertain edge weights. Vertices are 0-based in the API and
/// 1-based in JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GraphRaw", into = "GraphRaw")]
pub struct UncertainGraph {
    n: usize,
    edges: Vec<(usize, usize)>,
    weights: Weights,
    param: Parametric,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    One(f64),
    Many(Vec<f64>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum MuBox {
    One([f64; 2]),
    Many(Vec<[f64; 2]>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeRaw {
    i: usize,
    j: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    w: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dev: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    w0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    w_mu: Option<OneOrMany>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphRaw {
    n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mu_box: Option<MuBox>,
    edges: Vec<EdgeRaw>,
}

impl TryFrom<GraphRaw> for UncertainGraph {
    type Error = MaxCutError;
    fn try_from(r: GraphRaw) -> Result<Self, MaxCutError> {
        let mut edges = Vec::with_capacity(r.edges.len());
        for e in &r.edges {
            if e.i == 0 || e.j == 0 {
                return Err(MaxCutError::Invalid(format!(
                    "edge ({}, {}): vertices are numbered from 1",
                    e.i, e.j
                )));
            }
            edges.push((e.i - 1, e.j - 1));
        }
        let weights = match r.mu_box {
            None => {
                let mut nominal = Vec::new();
                let mut deviation = Vec::new();
                for e in &r.edges {
                    let w = e.w.ok_or_else(|| {
                        MaxCutError::Invalid(format!("edge ({}, {}) needs a weight `w`", e.i, e.j))
                    })?;
                    if e.w0.is_some() || e.w_mu.is_some() {
                        return Err(MaxCutError::Invalid(
                            "`w0`/`w_mu` edges need a `mu_box`".into(),
                        ));
                    }
                    nominal.push(w);
                    deviation.push(e.dev.unwrap_or(0.0));
                }
                Weights::Box { nominal, deviation }
            }
            Some(mb) => {
                let bounds = match mb {
                    MuBox::One(b) => vec![b],
                    MuBox::Many(v) => v,
                };
                let mut w0 = Vec::new();
                let mut w_mu = Vec::new();
                for e in &r.edges {
                    if e.w.is_some() || e.dev.is_some() {
                        return Err(MaxCutError::Invalid(
                            "affine graphs take `w0`/`w_mu`, not `w`/`dev`".into(),
                        ));
                    }
                    w0.push(e.w0.unwrap_or(0.0));
                    w_mu.push(match &e.w_mu {
                        None => vec![0.0; bounds.len()],
                        Some(OneOrMany::One(v)) => vec![*v],
                        Some(OneOrMany::Many(v)) => v.clone(),
                    });
                }
                Weights::Affine {
                    w0,
                    w_mu,
                    lo: bounds.iter().map(|b| b[0]).collect(),
                    hi: bounds.iter().map(|b| b[1]).collect(),
                }
            }
        };
        UncertainGraph::new(r.n, edges, weights)
    }
}

impl From<UncertainGraph> for GraphRaw {
    fn from(g: UncertainGraph) -> Self {
        let blank = |(i, j): (usize, usize)| EdgeRaw {
            i: i + 1,
            j: j + 1,
            w: None,
            dev: None,
            w0: None,
            w_mu: None,
        };
        match g.weights {
            Weights::Box { nominal, deviation } => GraphRaw {
                n: g.n,
                mu_box: None,
                edges: g
                    .edges
                    .into_iter()
                    .zip(nominal.into_iter().zip(deviation))
                    .map(|(e, (w, d))| EdgeRaw {
                        w: Some(w),
                        dev: (d != 0.0).then_some(d),
                        ..blank(e)
                    })
                    .collect(),
            },
            Weights::Affine { w0, w_mu, lo, hi } => {
                let single = lo.len() == 1;
                let bounds: Vec<[f64; 2]> = lo.iter().zip(&hi).map(|(&a, &b)| [a, b]).collect();
                GraphRaw {
                    n: g.n,
                    mu_box: Some(if single {
                        MuBox::One(bounds[0])
                    } else {
                        MuBox::Many(bounds)
                    }),
                    edges: g
                        .edges
                        .into_iter()
                        .zip(w0.into_iter().zip(w_mu))
                        .map(|(e, (a, m))| EdgeRaw {
                            w0: Some(a),
                            w_mu: Some(if single {
                                OneOrMany::One(m[0])
                            } else {
                                OneOrMany::Many(m)
                            }),
                            ..blank(e)
                        })
                        .collect(),
                }
            }
        }
    }
}

impl UncertainGraph {
    /// `edges` are 0-based `(i, j)` pairs with `i ≠ j`.
    pub fn new(
        n: usize,
        edges: Vec<(usize, usize)>,
        weights: Weights,
    ) -> Result<Self, MaxCutError> {
        if n == 0 {
            return Err(MaxCutError::Invalid(
                "graph needs at least one vertex".into(),
            ));
        }
        let mut seen = std::collections::BTreeSet::new();
        for &(i, j) in &edges {
            if i == j || i >= n || j >= n {
                return Err(MaxCutError::Invalid(format!(
                    "edge ({}, {}) is not between distinct vertices of 1..{n}",
                    i + 1,
                    j + 1
                )));
            }
            if !seen.insert((i.min(j), i.max(j))) {
                return Err(MaxCutError::Invalid(format!(
                    "duplicate edge ({}, {})",
                    i + 1,
                    j + 1
                )));
            }
        }
        let m = edges.len();
        let param = match &weights {
            Weights::Box { nominal, deviation } => {
                if nominal.len() != m || deviation.len() != m {
                    return Err(MaxCutError::Invalid(
                        "one weight and deviation per edge".into(),
                    ));
                }
                if let Some(k) = deviation.iter().position(|&d| d < 0.0) {
                    return Err(UncertaintyError::NegativeDeviation {
                        index: k,
                        value: deviation[k],
                    }
                    .into());
                }
                let uncertain: Vec<usize> = (0..m).filter(|&k| deviation[k] > 0.0).collect();
                Parametric {
                    base: nominal.clone(),
                    dirs: uncertain
                        .iter()
                        .map(|&k| (0..m).map(|e| if e == k { 1.0 } else { 0.0 }).collect())
                        .collect(),
                    lo: uncertain.iter().map(|&k| -deviation[k]).collect(),
                    hi: vec![0.0; uncertain.len()],
                }
            }
            Weights::Affine { w0, w_mu, lo, hi } => {
                let k = lo.len();
                if w0.len() != m || w_mu.len() != m {
                    return Err(MaxCutError::Invalid("one `w0` and `w_mu` per edge".into()));
                }
                if hi.len() != k || k == 0 {
                    return Err(MaxCutError::Invalid(
                        "`mu_box` needs one [lo, hi] per parameter".into(),
                    ));
                }
                if let Some(e) = w_mu.iter().position(|v| v.len() != k) {
                    return Err(MaxCutError::Invalid(format!(
                        "edge {} has {} slopes for {k} parameters",
                        e + 1,
                        w_mu[e].len()
                    )));
                }
                if let Some(i) = (0..k).find(|&i| lo[i] > hi[i]) {
                    return Err(UncertaintyError::InvertedBounds {
                        index: i,
                        lo: lo[i],
                        hi: hi[i],
                    }
                    .into());
                }
                Parametric {
                    base: w0.clone(),
                    dirs: (0..k)
                        .map(|p| w_mu.iter().map(|v| v[p]).collect())
                        .collect(),
                    lo: lo.clone(),
                    hi: hi.clone(),
                }
            }
        };
        let finite = param
            .base
            .iter()
            .chain(param.dirs.iter().flatten())
            .chain(&param.lo)
            .chain(&param.hi)
            .all(|v| v.is_finite());
        if !finite {
            return Err(UncertaintyError::NonFinite("edge weights").into());
        }
        Ok(Self {
            n,
            edges,
            weights,
            param,
        })
    }

    /// Box weights `[w_e − dev_e, w_e]`.
    pub fn with_box(n: usize, edges: &[(usize, usize, f64, f64)]) -> Result<Self, MaxCutError> {
        Self::new(
            n,
            edges.iter().map(|e| (e.0, e.1)).collect(),
            Weights::Box {
                nominal: edges.iter().map(|e| e.2).collect(),
                deviation: edges.iter().map(|e| e.3).collect(),
            },
        )
    }

    /// Complete graph with box weights.
    pub fn complete_box(n: usize, nominal: &[f64], deviation: &[f64]) -> Result<Self, MaxCutError> {
        let edges: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .collect();
        Self::new(
            n,
            edges,
            Weights::Box {
                nominal: nominal.to_vec(),
                deviation: deviation.to_vec(),
            },
        )
    }

    /// Triangle with `w_12 = w_13 = 4 + 2μ`, `w_23 = 3 + μ`, `μ ∈ [−1, 1]`.
    pub fn triangle_example() -> Self {
        Self::new(
            3,
            vec![(0, 1), (0, 2), (1, 2)],
            Weights::Affine {
                w0: vec![4.0, 4.0, 3.0],
                w_mu: vec![vec![2.0], vec![2.0], vec![1.0]],
                lo: vec![-1.0],
                hi: vec![1.0],
            },
        )
        .expect("valid instance")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn weights(&self) -> &Weights {
        &self.weights
    }

    /// Number of uncertain parameters (one per uncertain edge for boxes).
    pub fn param_dim(&self) -> usize {
        self.param.dirs.len()
    }

    pub fn param_bounds(&self) -> (&[f64], &[f64]) {
        (&self.param.lo, &self.param.hi)
    }

    /// Edge weights at parameter `theta`.
    pub fn weights_at(&self, theta: &[f64]) -> Vec<f64> {
        self.param.weights(theta)
    }

    /// Weights at the center of the parameter box.
    pub fn nominal_weights(&self) -> Vec<f64> {
        self.param.weights(&self.param.midpoint())
    }

    pub fn is_certain(&self) -> bool {
        self.param.is_certain()
    }

    /// `w ≥ 0` over the whole parameter box.
    pub fn is_nonnegative(&self) -> bool {
        (0..self.edges.len()).all(|e| {
            let mut c = vec![0.0; self.edges.len()];
            c[e] = 1.0;
            self.param.min_linear(&c).0 >= 0.0
        })
    }

    /// `Σ_e w_e (E_ii + E_jj − 2E_ij)`.
    pub fn laplacian(&self, w: &[f64]) -> Result<SymMatrix, MaxCutError> {
        if w.len() != self.edges.len() {
            return Err(MaxCutError::Invalid(format!(
                "{} weights for {} edges",
                w.len(),
                self.edges.len()
            )));
        }
        let mut l = SymMatrix::zeros(self.n);
        for (&(i, j), &we) in self.edges.iter().zip(w) {
            l.add_to(i, i, we);
            l.add_to(j, j, we);
            l.add_to(i, j, -we);
        }
        Ok(l)
    }

    fn crossing(&self, cut: &Cut) -> Vec<f64> {
        self.edges
            .iter()
            .map(|&(i, j)| {
                if cut.signs[i] != cut.signs[j] {
                    1.0
                } else {
                    0.0
                }
            })
            .collect()
    }

    pub fn cut_value(&self, cut: &Cut, w: &[f64]) -> f64 {
        self.crossing(cut).iter().zip(w).map(|(a, b)| a * b).sum()
    }

    /// Minimum cut weight over the parameter box and the minimizing weights.
    pub fn worst_case_cut_value(&self, cut: &Cut) -> (f64, Vec<f64>) {
        self.param.min_linear(&self.crossing(cut))
    }

    pub fn nominal_cut_value(&self, cut: &Cut) -> f64 {
        self.cut_value(cut, &self.nominal_weights())
    }

    fn quarter_laplacian(&self, w: &[f64]) -> SymMatrix {
        self.laplacian(w).expect("edge count matches").scaled(0.25)
    }

    /// The relaxation as a robust SDP over `{Y ⪰ 0 : Y_ii = 1}` with
    /// uncertainty `{L(w)/4}`.
    pub fn robust_problem(&self) -> Result<RobustSdpProblem, MaxCutError> {
        let zero = vec![0.0; self.edges.len()];
        let dirs = self
            .param
            .dirs
            .iter()
            .map(|d| self.laplacian(d).map(|l| l.scaled(0.25)))
            .collect::<Result<Vec<_>, _>>()?;
        let dirs = if dirs.is_empty() {
            vec![self.quarter_laplacian(&zero)]
        } else {
            dirs
        };
        let (lo, hi) = if self.param.dirs.is_empty() {
            (vec![0.0], vec![0.0])
        } else {
            (self.param.lo.clone(), self.param.hi.clone())
        };
        let u = MatrixBox::new(self.quarter_laplacian(&self.param.base), dirs, lo, hi)?;
        Ok(RobustSdpProblem::new(
            Spectrahedron::unit_diagonal(self.n),
            u,
        )?)
    }
}

/// Sign vector of a cut, normalized so that vertex 0 has sign `+1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Cut {
    pub signs: Vec<i8>,
}

impl Cut {
    pub fn new(mut signs: Vec<i8>) -> Self {
        if signs.first() == Some(&-1) {
            for s in &mut signs {
                *s = -*s;
            }
        }
        Self { signs }
    }

    /// Cut `δ(S)` for a vertex set `S`.
    pub fn from_side(n: usize, side: &[usize]) -> Self {
        Self::new(
            (0..n)
                .map(|v| if side.contains(&v) { -1 } else { 1 })
                .collect(),
        )
    }

    /// Vertices on the side not containing vertex 0.
    pub fn side(&self) -> Vec<usize> {
        (0..self.signs.len())
            .filter(|&v| self.signs[v] == -1)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Relaxation {
    pub y: SymMatrix,
    /// Worst case of `⟨L(w)/4, Y⟩` at the returned `Y`.
    pub value: f64,
}

/// Robust SDP relaxation `max_Y min_w ⟨L(w)/4, Y⟩` over `Y ⪰ 0, Y_ii = 1`.
pub fn robust_maxcut_sdp(
    g: &UncertainGraph,
    settings: &ProSettings,
) -> Result<Relaxation, MaxCutError> {
    if g.is_certain() {
        let l = g.quarter_laplacian(&g.param.base);
        let mut pb = ProgramBuilder::new();
        let y = pb.add_psd(g.n);
        let ye = MatrixExpr::var(y);
        for i in 0..g.n {
            pb.eq(ye.pair(&SymMatrix::basis(g.n, i, i)), 1.0);
        }
        pb.maximize(ye.pair(&l));
        let sol = pb.solve(&settings.solver).map_err(ProError::from)?;
        if !sol.solution.is_optimal() {
            return Err(ProError::Solver {
                stage: "max-cut relaxation",
                status: sol.solution.status,
                certificate: sol.solution.certificate,
            }
            .into());
        }
        let ym = sol.psd(y).clone();
        return Ok(Relaxation {
            value: crate::linalg::dot(&l, &ym),
            y: ym,
        });
    }
    let prob = g.robust_problem()?;
    let ro = pro::solve_robust(&prob, settings)?;
    Ok(Relaxation {
        value: ro.worst_case,
        y: ro.x,
    })
}

/// PRO improvement of a robustly optimal relaxation solution.
pub fn pro_improve_relaxation(
    g: &UncertainGraph,
    y: &SymMatrix,
    settings: &ProSettings,
) -> Result<SymMatrix, MaxCutError> {
    let prob = g.robust_problem()?;
    Ok(pro::improve_to_pro(&prob, y, settings)?.0)
}

/// `max_{x ∈ {±1}^n} min_w ¼xᵀL(w)x` by enumeration, with the PRO partition
/// of the optimal cuts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxCutEnumeration {
    pub value: f64,
    pub cuts: Vec<Cut>,
    pub pro: Vec<Cut>,
}

pub fn brute_force_maxcut(g: &UncertainGraph) -> Result<MaxCutEnumeration, MaxCutError> {
    if g.n > MAX_BRUTE_FORCE {
        return Err(MaxCutError::TooLarge(g.n));
    }
    let cuts: Vec<Cut> = (0u32..1 << (g.n - 1))
        .map(|mask| {
            Cut::new(
                (0..g.n)
                    .map(|v| {
                        if v > 0 && mask >> (v - 1) & 1 == 1 {
                            -1
                        } else {
                            1
                        }
                    })
                    .collect(),
            )
        })
        .collect();
    let worst: Vec<f64> = cuts
        .par_iter()
        .map(|c| g.worst_case_cut_value(c).0)
        .collect();
    let value = worst.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let optimal: Vec<Cut> = cuts
        .iter()
        .zip(&worst)
        .filter(|(_, &w)| w >= value - TIE_TOL)
        .map(|(c, _)| c.clone())
        .collect();
    let pro = if g.is_certain() {
        optimal.clone()
    } else {
        let bin = binary_problem(g, &cuts);
        comb::brute_force_pro(&bin)?
            .pro
            .into_iter()
            .map(|x| Cut::new(x.iter().map(|&b| if b == 1 { -1 } else { 1 }).collect()))
            .collect()
    };
    Ok(MaxCutEnumeration {
        value,
        cuts: optimal,
        pro,
    })
}

/// The cut problem over side indicators, with the parameter box as an
/// interval `[hi − (hi − lo), hi]`.
fn binary_problem(g: &UncertainGraph, cuts: &[Cut]) -> BinaryRobustProblem {
    let p = &g.param;
    let edges = g
        .edges
        .iter()
        .enumerate()
        .map(|(e, &(i, j))| AffineEdge {
            i,
            j,
            base: p.base[e],
            coeffs: p.dirs.iter().map(|d| d[e]).collect(),
        })
        .collect();
    BinaryRobustProblem {
        n: g.n,
        feasible: Feasible::List {
            points: cuts
                .iter()
                .map(|c| c.signs.iter().map(|&s| u8::from(s == -1)).collect())
                .collect(),
        },
        objective: Objective::CutWeight { edges },
        uncertainty: UncertaintySet::Interval(
            IntervalUncertainty::new(
                p.hi.clone(),
                p.hi.iter().zip(&p.lo).map(|(h, l)| h - l).collect(),
            )
            .expect("uncertain graph has a nondegenerate parameter"),
        ),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundingResult {
    pub best: Cut,
    pub best_worst_case: f64,
    pub best_nominal: f64,
    pub samples: usize,
    pub mean_worst_case: f64,
    /// Sample standard deviation of the worst-case values.
    pub std_worst_case: f64,
    /// Number of distinct cuts drawn, by first appearance.
    pub distinct_cuts: Vec<(Cut, usize)>,
}

/// Two standard normals by the Box–Muller transform.
fn box_muller(rng: &mut impl Rng) -> (f64, f64) {
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen::<f64>();
    let r = (-2.0 * u1.ln()).sqrt();
    let t = std::f64::consts::TAU * u2;
    (r * t.cos(), r * t.sin())
}

fn hyperplane_cut(vectors: &[Vec<f64>], seed: u64, index: u64) -> Cut {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let d = vectors.first().map_or(0, Vec::len);
    let mut r = Vec::with_capacity(d + 1);
    while r.len() < d {
        let (a, b) = box_muller(&mut rng);
        r.push(a);
        r.push(b);
    }
    r.truncate(d);
    let norm = r
        .iter()
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt()
        .max(f64::MIN_POSITIVE);
    Cut::new(
        vectors
            .iter()
            .map(|y| {
                let s: f64 = y.iter().zip(&r).map(|(a, b)| a * b).sum::<f64>() / norm;
                if s >= 0.0 {
                    1
                } else {
                    -1
                }
            })
            .collect(),
    )
}

/// Goemans-Williamson rounding of `y` with `samples` random hyperplanes.
/// Sample `k` uses its own ChaCha stream `k` under `seed`, so the result does
/// not depend on scheduling. The best cut maximizes the worst case, with ties
/// broken by the nominal value.
pub fn gw_round(
    g: &UncertainGraph,
    y: &SymMatrix,
    samples: usize,
    seed: u64,
) -> Result<RoundingResult, MaxCutError> {
    if samples == 0 {
        return Err(MaxCutError::Invalid("need at least one sample".into()));
    }
    if y.dim() != g.n {
        return Err(MaxCutError::Invalid(format!(
            "matrix dimension {} for {} vertices",
            y.dim(),
            g.n
        )));
    }
    let vectors = psd_factor(y, 1e-6)?;
    let drawn: Vec<(Cut, f64, f64)> = (0..samples as u64)
        .into_par_iter()
        .map(|k| {
            let c = hyperplane_cut(&vectors, seed, k);
            let w = g.worst_case_cut_value(&c).0;
            let nom = g.nominal_cut_value(&c);
            (c, w, nom)
        })
        .collect();
    let mut best = 0;
    for (k, d) in drawn.iter().enumerate() {
        let b = &drawn[best];
        if d.1 > b.1 + TIE_TOL || (d.1 >= b.1 - TIE_TOL && d.2 > b.2 + TIE_TOL) {
            best = k;
        }
    }
    let count = drawn.len() as f64;
    let mean = drawn.iter().map(|d| d.1).sum::<f64>() / count;
    let var = if drawn.len() > 1 {
        drawn.iter().map(|d| (d.1 - mean).powi(2)).sum::<f64>() / (count - 1.0)
    } else {
        0.0
    };
    let mut distinct: Vec<(Cut, usize)> = Vec::new();
    for d in &drawn {
        match distinct.iter_mut().find(|(c, _)| *c == d.0) {
            Some((_, k)) => *k += 1,
            None => distinct.push((d.0.clone(), 1)),
        }
    }
    let (cut, w, nom) = drawn[best].clone();
    Ok(RoundingResult {
        best: cut,
        best_worst_case: w,
        best_nominal: nom,
        samples,
        mean_worst_case: mean,
        std_worst_case: var.sqrt(),
        distinct_cuts: distinct,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k3_unit() -> UncertainGraph {
        UncertainGraph::complete_box(3, &[1.0; 3], &[0.0; 3]).unwrap()
    }

    #[test]
    fn laplacian_examples() {
        let l = k3_unit().laplacian(&[1.0; 3]).unwrap();
        assert_eq!(
            l,
            SymMatrix::from_rows(&[
                vec![2.0, -1.0, -1.0],
                vec![-1.0, 2.0, -1.0],
                vec![-1.0, -1.0, 2.0]
            ])
            .unwrap()
        );
        let g = UncertainGraph::triangle_example();
        let l0 = g.laplacian(&g.weights_at(&[0.0])).unwrap();
        assert_eq!((l0.get(0, 0), l0.get(1, 1), l0.get(2, 2)), (8.0, 7.0, 7.0));
        assert_eq!(
            (l0.get(0, 1), l0.get(0, 2), l0.get(1, 2)),
            (-4.0, -4.0, -3.0)
        );
        let e = UncertainGraph::with_box(2, &[(0, 1, 2.0, 0.0)]).unwrap();
        assert_eq!(
            e.laplacian(&[2.0]).unwrap(),
            SymMatrix::from_rows(&[vec![2.0, -2.0], vec![-2.0, 2.0]]).unwrap()
        );
    }

    #[test]
    fn cut_values() {
        let g = UncertainGraph::triangle_example();
        let v1 = Cut::from_side(3, &[0]);
        let v2 = Cut::from_side(3, &[1]);
        for mu in [-1.0, -0.3, 0.0, 1.0] {
            let w = g.weights_at(&[mu]);
            assert!((g.cut_value(&v1, &w) - (8.0 + 4.0 * mu)).abs() < 1e-12);
            assert!((g.cut_value(&v2, &w) - (7.0 + 3.0 * mu)).abs() < 1e-12);
        }
        assert_eq!(
            g.cut_value(&Cut::new(vec![1, 1, 1]), &g.weights_at(&[0.5])),
            0.0
        );
        for c in [v1, v2, Cut::from_side(3, &[2])] {
            assert_eq!(g.worst_case_cut_value(&c).0, 4.0);
        }
    }

    #[test]
    fn worst_case_box() {
        let g = UncertainGraph::complete_box(5, &[2.0; 10], &[1.0; 10]).unwrap();
        assert_eq!(g.worst_case_cut_value(&Cut::from_side(5, &[0, 1])).0, 6.0);
        let c = UncertainGraph::complete_box(4, &[1.0; 6], &[0.0; 6]).unwrap();
        let cut = Cut::from_side(4, &[1, 3]);
        assert_eq!(c.worst_case_cut_value(&cut).0, c.cut_value(&cut, &[1.0; 6]));
    }

    #[test]
    fn json_forms() {
        let g: UncertainGraph = serde_json::from_str(
            r#"{"n": 3, "mu_box": [-1, 1], "edges": [
                {"i": 1, "j": 2, "w0": 4, "w_mu": 2},
                {"i": 1, "j": 3, "w0": 4, "w_mu": 2},
                {"i": 2, "j": 3, "w0": 3, "w_mu": 1}]}"#,
        )
        .unwrap();
        assert_eq!(g, UncertainGraph::triangle_example());
        let back: UncertainGraph =
            serde_json::from_str(&serde_json::to_string(&g).unwrap()).unwrap();
        assert_eq!(back, g);
        let b: UncertainGraph =
            serde_json::from_str(r#"{"n": 2, "edges": [{"i": 1, "j": 2, "w": 2.0, "dev": 1.0}]}"#)
                .unwrap();
        assert_eq!(b.param_dim(), 1);
        assert!(serde_json::from_str::<UncertainGraph>(
            r#"{"n": 2, "edges": [{"i": 0, "j": 1, "w": 1}]}"#
        )
        .is_err());
        assert!(serde_json::from_str::<UncertainGraph>(
            r#"{"n": 2, "edges": [{"i": 1, "j": 2, "w": 1}, {"i": 2, "j": 1, "w": 1}]}"#
        )
        .is_err());
    }

    #[test]
    fn brute_force_examples() {
        let t = brute_force_maxcut(&UncertainGraph::triangle_example()).unwrap();
        assert_eq!(t.value, 4.0);
        assert_eq!(t.cuts.len(), 3);
        assert_eq!(t.pro, vec![Cut::from_side(3, &[0])]);
        let e =
            brute_force_maxcut(&UncertainGraph::with_box(2, &[(0, 1, 2.0, 1.0)]).unwrap()).unwrap();
        assert_eq!(e.value, 1.0);
        assert_eq!(e.cuts, vec![Cut::new(vec![1, -1])]);
        let k4 =
            brute_force_maxcut(&UncertainGraph::complete_box(4, &[1.0; 6], &[0.0; 6]).unwrap())
                .unwrap();
        assert_eq!(k4.value, 4.0);
        assert_eq!(k4.cuts.len(), 3);
    }

    #[test]
    fn certain_triangle_relaxation() {
        let r = robust_maxcut_sdp(&k3_unit(), &ProSettings::default()).unwrap();
        // K_3: Y = (3/2)I − (1/2)11ᵀ gives ¼⟨L, Y⟩ = 9/4, matching n·λ_max(L)/4.
        assert!((r.value - 2.25).abs() < 1e-6, "{}", r.value);
        let zero = UncertainGraph::complete_box(3, &[0.0; 3], &[0.0; 3]).unwrap();
        assert!(
            robust_maxcut_sdp(&zero, &ProSettings::default())
                .unwrap()
                .value
                .abs()
                < 1e-7
        );
        assert!(matches!(
            pro_improve_relaxation(&k3_unit(), &r.y, &ProSettings::default()),
            Err(MaxCutError::Uncertainty(UncertaintyError::Singleton))
        ));
    }

    #[test]
    fn rounding_rank_one_and_determinism() {
        let g = UncertainGraph::triangle_example();
        let x = [1.0, -1.0, 1.0];
        let y = SymMatrix::outer(&x);
        let r = gw_round(&g, &y, 200, 7).unwrap();
        assert_eq!(r.distinct_cuts.len(), 1);
        assert_eq!(r.best, Cut::new(vec![1, -1, 1]));
        let relax = robust_maxcut_sdp(&g, &ProSettings::default()).unwrap();
        let a = gw_round(&g, &relax.y, 500, 42).unwrap();
        let b = gw_round(&g, &relax.y, 500, 42).unwrap();
        assert_eq!(a, b);
    }
}
