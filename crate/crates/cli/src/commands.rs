use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use ordnorm::testkit::{random_instance_with, BetaKind, GenOptions};
use ordnorm::{
    check_characterization, parse_graph, parse_instance, project as entropy_project, solve_mcf,
    Decision, FlowReport, LogWeights, Mode, NormApprox, Outcome, SolveReport, SolverConfig,
    WeightVector,
};
use serde::{Deserialize, Serialize};

use crate::{BetaArg, GenArgs, GradArgs, McfArgs, ModeArg, ProjectArgs, SolveArgs};

/// Process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Solved = 0,
    Error = 1,
    OptGtGamma = 2,
    /// A fixed-Γ randomized run hit its iteration or oracle-call cap.
    Unfinished = 3,
}

/// Effective configuration of a `solve` call, defaults resolved.
#[derive(Debug, Serialize)]
struct SolveEcho {
    instance: PathBuf,
    mode: Mode,
    epsilon: f64,
    eta: f64,
    horizon: Option<u64>,
    gamma: Option<f64>,
    seed: u64,
    tau: f64,
    max_oracle_calls: Option<u64>,
    early_exit: bool,
}

#[derive(Debug, Serialize)]
struct McfEcho {
    graph: PathBuf,
    epsilon: f64,
    seed: u64,
}

/// The serialized output of `solve` and `mcf`. `wall_time_ms` is the only
/// field that varies between identical invocations.
#[derive(Debug, Serialize)]
struct ReportFile<C, R> {
    version: &'static str,
    command: &'static str,
    seed: u64,
    config: C,
    oracle_calls: u64,
    gradient_evals: u64,
    report: R,
    wall_time_ms: u64,
}

fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match out {
        Some(path) => std::fs::write(path, text)
            .with_context(|| format!("cannot write {}", path.display()))?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn vector(flag: &str, text: &str) -> Result<Vec<f64>> {
    serde_json::from_str(text).with_context(|| format!("--{flag} must be a JSON array of numbers"))
}

fn clamp_epsilon(epsilon: f64) -> Result<f64> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        bail!("--epsilon must be positive, got {epsilon}");
    }
    if epsilon > 1.0 {
        log::warn!("--epsilon {epsilon} clamped to 1");
        eprintln!("warning: --epsilon {epsilon} clamped to 1");
        return Ok(1.0);
    }
    Ok(epsilon)
}

fn mode(arg: ModeArg) -> Mode {
    match arg {
        ModeArg::Auto => Mode::Auto,
        ModeArg::Warmup => Mode::Warmup,
        ModeArg::Core => Mode::Core,
        ModeArg::Deterministic => Mode::Deterministic,
        ModeArg::Guaranteed => Mode::Guaranteed,
    }
}

fn status_of(report: &SolveReport) -> Status {
    match (report.decision, report.outcome) {
        (Decision::OptGtGamma, _) => Status::OptGtGamma,
        (_, Some(Outcome::CapExceeded | Outcome::Aborted)) => Status::Unfinished,
        _ => Status::Solved,
    }
}

pub fn solve(args: &SolveArgs) -> Result<Status> {
    let epsilon = clamp_epsilon(args.epsilon)?;
    let file = parse_instance(&read(&args.instance)?)
        .with_context(|| args.instance.display().to_string())?;
    let instance = file
        .build()
        .with_context(|| args.instance.display().to_string())?;
    let config = SolverConfig {
        mode: mode(args.mode),
        epsilon,
        eta: args.eta,
        horizon: args.horizon,
        gamma: args.gamma,
        seed: args.seed,
        max_oracle_calls: args.max_oracle_calls,
        tau: args.tau,
        early_exit: !args.no_early_exit,
    };
    let start = Instant::now();
    let report = ordnorm::solve(&instance, &config)?;
    let wall_time_ms = start.elapsed().as_millis() as u64;
    let status = status_of(&report);
    let file = ReportFile {
        version: env!("CARGO_PKG_VERSION"),
        command: "solve",
        seed: config.seed,
        config: SolveEcho {
            instance: args.instance.clone(),
            mode: config.mode,
            epsilon: config.epsilon,
            eta: config.eta,
            horizon: config.horizon.or(report.horizon),
            gamma: config.gamma,
            seed: config.seed,
            tau: config.tau,
            max_oracle_calls: config.max_oracle_calls,
            early_exit: config.early_exit,
        },
        oracle_calls: report.oracle_calls,
        gradient_evals: report.gradient_evals,
        report,
        wall_time_ms,
    };
    emit(&file, args.output.out.as_deref())?;
    Ok(status)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProjectInput {
    beta: Vec<f64>,
    #[serde(default)]
    p: Option<Vec<f64>>,
    #[serde(default)]
    log_p: Option<Vec<f64>>,
}

#[derive(Debug, Serialize)]
struct ProjectOutput {
    #[serde(flatten)]
    result: ordnorm::ProjectionResult,
    conjugate_value: f64,
    characterization: ordnorm::projection::CharacterizationReport,
}

pub fn project(args: &ProjectArgs) -> Result<Status> {
    let input = match &args.input {
        Some(path) => ordnorm::io::parse_json::<ProjectInput>(&read(path)?)?,
        None => ProjectInput {
            beta: vector("beta", args.beta.as_deref().unwrap_or_default())?,
            p: args.p.as_deref().map(|t| vector("p", t)).transpose()?,
            log_p: args
                .log_p
                .as_deref()
                .map(|t| vector("log-p", t))
                .transpose()?,
        },
    };
    let logs = match (input.p, input.log_p) {
        (Some(p), None) => LogWeights::from_weights(&p)?,
        (None, Some(l)) => LogWeights::new(l)?,
        _ => bail!("exactly one of p and log-p is required"),
    };
    let weights = WeightVector::new(input.beta)?;
    let result = entropy_project(&weights, &logs)?;
    let characterization = check_characterization(&weights, &logs, &result.y);
    let output = ProjectOutput {
        conjugate_value: result.conjugate_value(),
        result,
        characterization,
    };
    emit(&output, args.output.out.as_deref())?;
    Ok(Status::Solved)
}

#[derive(Debug, Serialize)]
struct GradOutput {
    eta: f64,
    psi: f64,
    gradient: Vec<f64>,
    zero_coordinates: usize,
    norm: f64,
    delta: f64,
}

pub fn grad(args: &GradArgs) -> Result<Status> {
    let weights = WeightVector::new(vector("beta", &args.beta)?)?;
    let x = vector("x", &args.x)?;
    let norm = weights.evaluate(&x)?;
    let approx = NormApprox::new(weights, args.eta)?;
    let eval = approx.evaluate(&x)?;
    let output = GradOutput {
        eta: args.eta,
        psi: eval.value,
        zero_coordinates: eval.gradient.zero_coordinates(),
        gradient: eval.gradient.into_inner(),
        norm,
        delta: approx.delta(),
    };
    emit(&output, args.output.out.as_deref())?;
    Ok(Status::Solved)
}

pub fn mcf(args: &McfArgs) -> Result<Status> {
    let epsilon = clamp_epsilon(args.epsilon)?;
    let file =
        parse_graph(&read(&args.graph)?).with_context(|| args.graph.display().to_string())?;
    let network = Arc::new(file.network()?);
    let weights = file.weights()?;
    let start = Instant::now();
    let report: FlowReport = solve_mcf(&network, weights, epsilon, args.seed)?;
    let wall_time_ms = start.elapsed().as_millis() as u64;
    let file = ReportFile {
        version: env!("CARGO_PKG_VERSION"),
        command: "mcf",
        seed: args.seed,
        config: McfEcho {
            graph: args.graph.clone(),
            epsilon,
            seed: args.seed,
        },
        oracle_calls: report.solve.oracle_calls,
        gradient_evals: report.solve.gradient_evals,
        report,
        wall_time_ms,
    };
    emit(&file, args.output.out.as_deref())?;
    Ok(Status::Solved)
}

pub fn generate(args: &GenArgs) -> Result<Status> {
    if args.n == 0 || args.d == 0 {
        bail!("--n and --d must be positive");
    }
    if !(0.0..=1.0).contains(&args.density) {
        bail!("--density must lie in [0, 1], got {}", args.density);
    }
    let options = GenOptions {
        density: args.density,
        beta: match args.beta {
            BetaArg::Mixed => BetaKind::Mixed,
            BetaArg::Dirichlet => BetaKind::Dirichlet,
            BetaArg::TopK => BetaKind::TopK,
        },
    };
    let file = random_instance_with(args.n, args.d, args.m, args.seed, &options);
    emit(&file, args.output.out.as_deref())?;
    Ok(Status::Solved)
}
