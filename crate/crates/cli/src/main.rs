//! `fbmk`: simulate, inspect and certify Markovian approximations of
//! long-memory Gaussian processes.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "fbmk", version, about, args_override_self = true)]
#[command(after_help = "Flags may also come from `--config FILE` with one `key = value` per line \
(keys are long flag names); explicit flags take precedence.\n\
FBMK_THREADS sets the number of worker threads used for replicas.")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate paths of the approximating process on [0, T].
    #[command(args_override_self = true)]
    Simulate(SimulateArgs),
    /// Print the nodes and weights of a partition, or sweep its size over eps.
    #[command(args_override_self = true)]
    Partition(PartitionArgs),
    /// Certified L2 error of a partition on a grid of (0, T].
    #[command(name = "error-report", args_override_self = true)]
    ErrorReport(ErrorReportArgs),
    /// Ergodic time averages against their Gaussian limits.
    #[command(args_override_self = true)]
    Ergodic(ErgodicArgs),
}

/// Kernel and partition selection shared by all commands.
#[derive(Args, Debug, Clone)]
struct ModelArgs {
    /// Spectral measure: `power:ALPHA` or `atoms:X*M,X*M,...`.
    #[arg(long)]
    measure: Option<String>,
    /// Power-law exponent in (1/2, 1); default 0.75.
    #[arg(long)]
    alpha: Option<f64>,
    /// Hurst exponent in (0, 1/2), alpha = H + 1/2.
    #[arg(long = "hurst", short = 'H', alias = "H")]
    hurst: Option<f64>,
    /// Target precision of the partition, in (0, 1).
    #[arg(long, default_value_t = 1e-2)]
    eps: f64,
    /// Ratio constant: r = 1 + c_alpha * sqrt(eps).
    #[arg(long = "c-alpha", alias = "c_alpha", default_value_t = 1.0)]
    c_alpha: f64,
    /// Node placement inside each cell: barycenter, geometric_midpoint, left_edge.
    #[arg(long = "node-rule", alias = "node_rule", default_value = "barycenter")]
    node_rule: String,
    /// `exact` to use the atoms of an atomic measure, or a cell count for a
    /// fixed-size geometric partition.
    #[arg(long)]
    nodes: Option<String>,
    /// Lower end of the compact (overrides the eps-derived value).
    #[arg(long = "x-min", alias = "x_min")]
    x_min: Option<f64>,
    /// Upper end of the compact (overrides the eps-derived value).
    #[arg(long = "x-max", alias = "x_max")]
    x_max: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Csv,
    Binary,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Horizon T.
    #[arg(long = "T", alias = "horizon", default_value_t = 1.0)]
    horizon: f64,
    /// Time step; must divide T.
    #[arg(long, default_value_t = 0.00390625)]
    dt: f64,
    /// exact or euler.
    #[arg(long, default_value = "exact")]
    scheme: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Independent paths; with more than one, files are suffixed `_rK`.
    #[arg(long, default_value_t = 1)]
    replicas: usize,
    /// Record every k-th step (t = 0 and t = T are always kept).
    #[arg(long = "record-every", alias = "record_every", default_value_t = 1)]
    record_every: usize,
    /// Comma-separated starting vector, one entry per node.
    #[arg(long)]
    y0: Option<String>,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
    format: OutputFormat,
}

#[derive(Args, Debug)]
struct PartitionArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// `LO:HI`: report N, r and the compact for eps from HI down to LO.
    #[arg(long = "eps-sweep", alias = "eps_sweep")]
    eps_sweep: Option<String>,
    /// Sweep points per decade of eps.
    #[arg(long = "per-decade", alias = "per_decade", default_value_t = 4)]
    per_decade: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ErrorReportArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long = "T", alias = "horizon", default_value_t = 1.0)]
    horizon: f64,
    /// Grid points k T / n, k = 1..n.
    #[arg(long = "grid-points", alias = "grid_points", default_value_t = 64)]
    grid_points: usize,
    /// Search endpoints and node rule for the best partition with this many nodes.
    #[arg(long = "target-n", alias = "target_n")]
    target_n: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ErgodicArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// square, abs, positive_indicator, cos or threshold:C.
    #[arg(long, default_value = "square")]
    phi: String,
    #[arg(long = "T", alias = "horizon", default_value_t = 1e4)]
    horizon: f64,
    #[arg(long, default_value_t = 0.05)]
    dt: f64,
    #[arg(long, default_value_t = 8)]
    replicas: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "exact")]
    scheme: String,
    #[arg(long)]
    y0: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Whether subcommand `sub` has a long flag or alias named `key`.
fn accepts_flag(sub: &str, key: &str) -> bool {
    let cmd = Cli::command();
    let Some(sc) = cmd.find_subcommand(sub) else {
        return true;
    };
    let found = sc.get_arguments().any(|a| {
        a.get_long() == Some(key) || a.get_all_aliases().is_some_and(|al| al.contains(&key))
    });
    found
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = match config::expand_args(std::env::args_os().collect(), accepts_flag) {
        Ok(a) => a,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if let Err(e) = commands::configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(e.exit_code());
    }
    let result = match &cli.command {
        Command::Simulate(a) => commands::simulate(a),
        Command::Partition(a) => commands::partition(a),
        Command::ErrorReport(a) => commands::error_report(a),
        Command::Ergodic(a) => commands::ergodic(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        // A closed downstream pipe (`fbmk partition | head`) is not a failure.
        Err(commands::CliError::Run(fbmk::Error::Io(e))) if e.kind() == std::io::ErrorKind::BrokenPipe => {
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
