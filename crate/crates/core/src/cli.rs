//! Command-line front end. Every command prints a [`ResultEnvelope`] as JSON.
//!
//! Exit codes: 0 on success, 2 when a program is infeasible or unbounded,
//! 1 on any other error. Errors are written to stderr as
//! `{"error": {"code", "message", "pointer"}}`.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use crate::comb::{self, CombError};
use crate::eigen::{self, GridReport};
use crate::io::{self, IoError, Problem, ProblemKind, ResultEnvelope};
use crate::linalg::SymMatrix;
use crate::maxcut::{self, MaxCutError};
use crate::pro::{self, ProError, ProSettings, RobustSdpProblem};

#[derive(Debug, Parser)]
#[command(
    name = "pareto-robust",
    version,
    about = "Robust and Pareto robust optimization"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Write the result envelope here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Write the robust counterpart in conic form to this path.
    #[arg(long, global = true)]
    pub dump_conic: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 1e-8)]
    pub gap_tol: f64,
    #[arg(long, global = true, default_value_t = 1e-8)]
    pub feas_tol: f64,
    #[arg(long, global = true, default_value_t = 200)]
    pub iter_cap: usize,
    /// Relative threshold for a strict nominal improvement.
    #[arg(long, global = true, default_value_t = 1e-7)]
    pub strict_tol: f64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the robust counterpart.
    SolveRobust {
        #[arg(long)]
        problem: PathBuf,
    },
    /// Decide whether a robustly optimal candidate is Pareto robustly optimal.
    VerifyPro {
        #[arg(long)]
        problem: PathBuf,
        /// Candidate matrix; defaults to the solver's robust optimum.
        #[arg(long)]
        candidate: Option<PathBuf>,
    },
    /// Improve a robustly optimal candidate to a PRO solution.
    ImprovePro {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long)]
        candidate: Option<PathBuf>,
    },
    /// Decide whether every robustly optimal solution is PRO.
    CheckAllPro {
        #[arg(long)]
        problem: PathBuf,
    },
    /// Robust largest-eigenvalue problem over a matrix box.
    Eigenvalue {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        pro: bool,
        #[arg(long)]
        candidate: Option<PathBuf>,
        #[arg(long, default_value_t = eigen::DEFAULT_GRID)]
        grid: usize,
    },
    /// Robust max-cut relaxation and hyperplane rounding.
    Maxcut {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Improve the relaxation solution to a PRO one before rounding.
        #[arg(long)]
        pro: bool,
    },
    /// Exhaustive robust and Pareto analysis of a binary problem.
    CombPro {
        #[arg(long)]
        instance: PathBuf,
    },
    /// Run the built-in worked examples.
    Report {
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: &'static str,
    pub message: String,
    pub pointer: Option<String>,
    pub infeasible: bool,
}

impl CliError {
    fn new(code: &'static str, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
            pointer: None,
            infeasible: false,
        }
    }

    pub fn exit_code(&self) -> i32 {
        if self.infeasible {
            2
        } else {
            1
        }
    }

    pub fn to_json(&self) -> Value {
        json!({"error": {"code": self.code, "message": self.message, "pointer": self.pointer}})
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        let code = match e {
            IoError::Read { .. } | IoError::Write { .. } => "io",
            IoError::Schema { .. } => "schema",
            IoError::Version { .. } => "version",
            IoError::WrongKind { .. } => "wrong_kind",
        };
        Self {
            pointer: e.pointer().map(str::to_string),
            ..Self::new(code, e.to_string())
        }
    }
}

impl From<ProError> for CliError {
    fn from(e: ProError) -> Self {
        let code = match &e {
            ProError::Uncertainty(_) | ProError::Invalid(_) => "invalid_problem",
            ProError::Conic(_) => "conic",
            ProError::NotFeasible(_) => "candidate_not_feasible",
            ProError::NotRobustOptimal { .. } => "candidate_not_robust_optimal",
            ProError::Solver { .. } if e.is_infeasible() => "infeasible",
            ProError::Solver { .. } => "numerical_failure",
        };
        Self {
            infeasible: e.is_infeasible(),
            ..Self::new(code, e.to_string())
        }
    }
}

impl From<MaxCutError> for CliError {
    fn from(e: MaxCutError) -> Self {
        match e {
            MaxCutError::Pro(p) => p.into(),
            MaxCutError::Comb(c) => c.into(),
            other => Self::new("invalid_problem", other.to_string()),
        }
    }
}

impl From<CombError> for CliError {
    fn from(e: CombError) -> Self {
        Self::new("invalid_problem", e.to_string())
    }
}

fn settings(c: &Common) -> ProSettings {
    let mut s = ProSettings::default();
    s.solver.gap_tol = c.gap_tol;
    s.solver.feas_tol = c.feas_tol;
    s.solver.iter_cap = c.iter_cap;
    s.strict_rel = c.strict_tol;
    s
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("results serialize to JSON")
}

/// Robust SDP behind any SDP-shaped problem kind.
fn robust_sdp(problem: Problem) -> Result<RobustSdpProblem, CliError> {
    match problem {
        Problem::RobustSdp(p) => Ok(p),
        Problem::Eigen(e) => Ok(e.problem()),
        Problem::Maxcut(g) => Ok(g.robust_problem()?),
        Problem::Binary(_) => Err(IoError::WrongKind {
            expected: "robust_sdp, eigen or maxcut".into(),
            found: "binary".into(),
        }
        .into()),
    }
}

fn load(path: &Path, bare: Option<ProblemKind>) -> Result<(Problem, String), CliError> {
    let (f, d) = io::parse(path, bare)?;
    Ok((f.problem, d))
}

fn expect_kind(p: &Problem, kind: ProblemKind) -> Result<(), CliError> {
    if p.kind() == kind {
        Ok(())
    } else {
        Err(IoError::WrongKind {
            expected: kind.name().into(),
            found: p.kind().name().into(),
        }
        .into())
    }
}

fn dump_conic(common: &Common, prob: &RobustSdpProblem) -> Result<(), CliError> {
    if let Some(path) = &common.dump_conic {
        let program = prob.robust_counterpart().0.build();
        let text = serde_json::to_string_pretty(&program).expect("programs serialize");
        io::write_text(path, &text)?;
    }
    Ok(())
}

fn candidate(
    path: &Option<PathBuf>,
    prob: &RobustSdpProblem,
    s: &ProSettings,
) -> Result<SymMatrix, CliError> {
    match path {
        Some(p) => Ok(io::parse_value(p)?),
        None => Ok(pro::solve_robust(prob, s)?.x),
    }
}

/// Runs one command and returns its envelope (wall time included).
pub fn run(cli: &Cli) -> Result<ResultEnvelope, CliError> {
    let start = Instant::now();
    let s = settings(&cli.common);
    let common = &cli.common;
    let tolerances = json!({
        "gap_tol": s.solver.gap_tol,
        "feas_tol": s.solver.feas_tol,
        "iter_cap": s.solver.iter_cap,
        "strict_rel": s.strict_rel,
        "eq_tol": s.eq_tol,
    });
    let (name, digest, parameters, outputs) = match &cli.command {
        Command::SolveRobust { problem } => {
            let (p, d) = load(problem, None)?;
            let prob = robust_sdp(p)?;
            dump_conic(common, &prob)?;
            let ro = pro::solve_robust(&prob, &s)?;
            (
                "solve-robust",
                Some(d),
                json!({"tolerances": tolerances}),
                to_value(&ro),
            )
        }
        Command::VerifyPro {
            problem,
            candidate: c,
        } => {
            let (p, d) = load(problem, None)?;
            let prob = robust_sdp(p)?;
            dump_conic(common, &prob)?;
            let x = candidate(c, &prob, &s)?;
            let v = pro::verify_pro(&prob, &x, &s)?;
            let out = json!({
                "status": v.status,
                "value": v.value,
                "nominal_gain": v.nominal_gain,
                "direction": v.direction,
                "certificate_scenario": v.certificate_scenario,
                "robust_value": v.robust_value,
                "strict_tol": v.strict_tol,
            });
            (
                "verify-pro",
                Some(d),
                json!({"tolerances": tolerances}),
                out,
            )
        }
        Command::ImprovePro {
            problem,
            candidate: c,
        } => {
            let (p, d) = load(problem, None)?;
            let prob = robust_sdp(p)?;
            dump_conic(common, &prob)?;
            let x = candidate(c, &prob, &s)?;
            let (y, v) = pro::improve_to_pro(&prob, &x, &s)?;
            let out = json!({
                "x": y,
                "input_status": v.status,
                "nominal_gain": v.nominal_gain,
                "worst_case_before": prob.worst_case(&x),
                "worst_case_after": prob.worst_case(&y),
                "nominal_before": prob.nominal(&x),
                "nominal_after": prob.nominal(&y),
            });
            (
                "improve-pro",
                Some(d),
                json!({"tolerances": tolerances}),
                out,
            )
        }
        Command::CheckAllPro { problem } => {
            let (p, d) = load(problem, None)?;
            let prob = robust_sdp(p)?;
            dump_conic(common, &prob)?;
            let rep = pro::check_all_pro(&prob, &s)?;
            (
                "check-all-pro",
                Some(d),
                json!({"tolerances": tolerances}),
                to_value(&rep),
            )
        }
        Command::Eigenvalue {
            instance,
            pro: improve,
            candidate: c,
            grid,
        } => {
            let (p, d) = load(instance, Some(ProblemKind::Eigen))?;
            expect_kind(&p, ProblemKind::Eigen)?;
            let Problem::Eigen(inst) = p else {
                unreachable!()
            };
            let prob = inst.problem();
            dump_conic(common, &prob)?;
            let start_x = match c {
                Some(path) => Some(io::parse_value::<SymMatrix>(path)?),
                None => None,
            };
            let out = if *improve {
                let rep = eigen::robust_lambda_max_pro(&inst, start_x.as_ref(), *grid, &s)?;
                json!({
                    "robust_value": rep.robust_value,
                    "x": rep.x,
                    "vector": rep.vector,
                    "input": rep.input,
                    "status": rep.verdict.status,
                    "nominal_gain": rep.verdict.nominal_gain,
                    "grid_report": rep.grid,
                })
            } else {
                let ro = eigen::robust_lambda_max(&inst, &s)?;
                let x = start_x.unwrap_or(ro.x);
                json!({
                    "robust_value": ro.worst_case,
                    "x": x,
                    "vector": eigen::rank_one_vector(&x),
                    "grid_report": GridReport::new(&inst.uncertainty, &x, &x, *grid),
                })
            };
            (
                "eigenvalue",
                Some(d),
                json!({"pro": improve, "grid": grid, "tolerances": tolerances}),
                out,
            )
        }
        Command::Maxcut {
            graph,
            samples,
            seed,
            pro: improve,
        } => {
            let (p, d) = load(graph, Some(ProblemKind::Maxcut))?;
            expect_kind(&p, ProblemKind::Maxcut)?;
            let Problem::Maxcut(g) = p else {
                unreachable!()
            };
            if !g.is_certain() {
                dump_conic(common, &g.robust_problem()?)?;
            }
            let out = maxcut_outputs(&g, *samples, *seed, *improve, &s)?;
            (
                "maxcut",
                Some(d),
                json!({"samples": samples, "seed": seed, "pro": improve, "tolerances": tolerances}),
                out,
            )
        }
        Command::CombPro { instance } => {
            let (p, d) = load(instance, Some(ProblemKind::Binary))?;
            expect_kind(&p, ProblemKind::Binary)?;
            let Problem::Binary(b) = p else {
                unreachable!()
            };
            let part = comb::brute_force_pro(&b)?;
            let out = json!({
                "ro_value": part.value,
                "ro_count": part.pro.len() + part.dominated.len(),
                "pro": part.pro,
                "dominated": part.dominated,
            });
            (
                "comb-pro",
                Some(d),
                json!({"dominance_tol": comb::DOMINANCE_TOL}),
                out,
            )
        }
        Command::Report { samples, seed } => {
            let out = report(*samples, *seed, &s)?;
            (
                "report",
                None,
                json!({"samples": samples, "seed": seed, "tolerances": tolerances}),
                out,
            )
        }
    };
    Ok(ResultEnvelope {
        instance_digest: digest,
        command: name.to_string(),
        parameters,
        outputs,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

fn maxcut_outputs(
    g: &maxcut::UncertainGraph,
    samples: usize,
    seed: u64,
    improve: bool,
    s: &ProSettings,
) -> Result<Value, CliError> {
    let relax = maxcut::robust_maxcut_sdp(g, s)?;
    let y = if improve {
        maxcut::pro_improve_relaxation(g, &relax.y, s)?
    } else {
        relax.y.clone()
    };
    let r = maxcut::gw_round(g, &y, samples, seed)?;
    let ratio = (relax.value > 0.0).then(|| r.mean_worst_case / relax.value);
    Ok(json!({
        "sdp_value": relax.value,
        "cut": {
            "side": r.best.side().iter().map(|v| v + 1).collect::<Vec<_>>(),
            "signs": r.best.signs,
        },
        "worst_case": r.best_worst_case,
        "nominal_value": r.best_nominal,
        "empirical_ratio": ratio,
        "mean_worst_case": r.mean_worst_case,
        "std_worst_case": r.std_worst_case,
        "distinct_cuts": r.distinct_cuts.len(),
        "weights_nonnegative": g.is_nonnegative(),
    }))
}

fn report(samples: usize, seed: u64, s: &ProSettings) -> Result<Value, CliError> {
    let knap = comb::brute_force_pro(&comb::knapsack_example(7))?;
    let ex2 = eigen::example2();
    let prob = ex2.problem();
    let half = SymMatrix::identity(2).scaled(0.5);
    let verdict = pro::verify_pro(&prob, &half, s)?;
    let (improved, _) = pro::improve_to_pro(&prob, &half, s)?;
    let all = pro::check_all_pro(&prob, s)?;
    let tri = maxcut::UncertainGraph::triangle_example();
    let bf = maxcut::brute_force_maxcut(&tri)?;
    let mc = maxcut_outputs(&tri, samples, seed, true, s)?;
    Ok(json!({
        "knapsack": {
            "ro_value": knap.value,
            "pro_count": knap.pro.len(),
            "dominated_count": knap.dominated.len(),
        },
        "eigenvalue": {
            "robust_value": verdict.robust_value,
            "half_identity_status": verdict.status,
            "half_identity_gain": verdict.nominal_gain,
            "improved": improved,
            "all_pro": all.all_pro,
            "joint_value": all.optimal_value,
        },
        "maxcut": {
            "mc": bf.value,
            "optimal_cuts": bf.cuts.len(),
            "pro_cuts": bf.pro.iter().map(|c| c.side().iter().map(|v| v + 1).collect::<Vec<_>>()).collect::<Vec<_>>(),
            "rounding": mc,
        },
    }))
}

/// Parses arguments, runs, prints, and returns the process exit code.
pub fn main() -> i32 {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(env) => {
            let text = serde_json::to_string_pretty(&env).expect("envelope serializes");
            match &cli.common.out {
                Some(path) => {
                    if let Err(e) = io::write_text(path, &text) {
                        let e = CliError::from(e);
                        eprintln!("{}", e.to_json());
                        return e.exit_code();
                    }
                }
                None => println!("{text}"),
            }
            0
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            e.exit_code()
        }
    }
}
