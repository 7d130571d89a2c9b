mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "ordnorm",
    version,
    about = "Minimize an ordered norm of summed customer loads"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve an instance file.
    Solve(SolveArgs),
    /// Entropy projection of weights onto the dual norm ball.
    Project(ProjectArgs),
    /// Value and gradient of the smooth norm approximation.
    Grad(GradArgs),
    /// Minimum-norm congestion routing on a graph file.
    Mcf(McfArgs),
    /// Generate a seeded random vertex-list instance.
    Gen(GenArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Auto,
    Warmup,
    Core,
    Deterministic,
    Guaranteed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BetaArg {
    Mixed,
    Dirichlet,
    TopK,
}

#[derive(Debug, Args)]
struct Output {
    /// Write JSON here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[arg(long)]
    instance: PathBuf,
    /// Target accuracy of the auto mode; values above 1 are clamped.
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = ModeArg::Auto)]
    mode: ModeArg,
    /// Fixed Γ for the core, deterministic and guaranteed modes.
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long, default_value_t = 0.2)]
    eta: f64,
    /// Horizon T; defaults depend on the mode.
    #[arg(long = "T", visible_alias = "horizon")]
    horizon: Option<u64>,
    /// Oracle approximation factor; above 1 wraps every oracle in a seeded test double.
    #[arg(long, default_value_t = 1.0)]
    tau: f64,
    #[arg(long)]
    max_oracle_calls: Option<u64>,
    /// Run every stage-2 level of the auto mode.
    #[arg(long)]
    no_early_exit: bool,
    #[command(flatten)]
    output: Output,
}

#[derive(Debug, Args)]
struct ProjectArgs {
    /// Weight vector as a JSON array.
    #[arg(long, required_unless_present = "input")]
    beta: Option<String>,
    /// Positive weights as a JSON array.
    #[arg(long, conflicts_with = "log_p")]
    p: Option<String>,
    /// Log-weights as a JSON array.
    #[arg(long)]
    log_p: Option<String>,
    /// JSON file with `beta` and one of `p` or `log_p`.
    #[arg(long, conflicts_with_all = ["beta", "p", "log_p"])]
    input: Option<PathBuf>,
    #[command(flatten)]
    output: Output,
}

#[derive(Debug, Args)]
struct GradArgs {
    #[arg(long)]
    beta: String,
    #[arg(long)]
    eta: f64,
    #[arg(long)]
    x: String,
    #[command(flatten)]
    output: Output,
}

#[derive(Debug, Args)]
struct McfArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    output: Output,
}

#[derive(Debug, Args)]
struct GenArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    d: usize,
    /// Maximum number of vertices per customer.
    #[arg(long, default_value_t = 3)]
    m: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = BetaArg::Mixed)]
    beta: BetaArg,
    /// Probability that a vertex entry is nonzero.
    #[arg(long, default_value_t = 1.0)]
    density: f64,
    #[command(flatten)]
    output: Output,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SOLVER_LOG", "off"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(args) => commands::solve(&args),
        Command::Project(args) => commands::project(&args),
        Command::Grad(args) => commands::grad(&args),
        Command::Mcf(args) => commands::mcf(&args),
        Command::Gen(args) => commands::generate(&args),
    };
    match result {
        Ok(status) => ExitCode::from(status as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::Status::Error as u8)
        }
    }
}
