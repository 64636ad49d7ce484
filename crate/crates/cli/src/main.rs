use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;

use commands::CommandResult;

/// Thermodynamics of media with inner structure: invariant studies, state
/// equations, geometric identity checks and scenario runs.
#[derive(Debug, Parser)]
#[command(name = "inner-media", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Global {
    /// Seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Directory for artifacts; created when missing.
    #[arg(long, global = true, default_value = "inner-media-out")]
    pub out: PathBuf,
    /// Multiplier applied to every pass/fail tolerance.
    #[arg(long, global = true, default_value_t = 1.0)]
    pub tolerance_scale: f64,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Certify independent trace-word generators and test their invariance.
    Invariants(InvariantsArgs),
    /// Evaluate a free-energy model at a state point or over a lattice.
    Thermo(ThermoArgs),
    /// Check divergence, product-rule, torsion and compatibility identities on charts.
    GeomCheck(GeomCheckArgs),
    /// Run a scenario file and write diagnostics and snapshots.
    Simulate(SimulateArgs),
    /// Check involutivity of the state equations under the Poisson bracket.
    BracketCheck(BracketCheckArgs),
}

#[derive(Debug, Args)]
pub struct InvariantsArgs {
    /// Horizontal dimension.
    #[arg(long)]
    pub n: usize,
    /// Vertical dimension.
    #[arg(long, default_value_t = 0)]
    pub m: usize,
    #[arg(long, default_value_t = 4)]
    pub max_degree: usize,
    /// Random (A, Q) pairs in the invariance test.
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ConventionArg {
    Derived,
    Paper,
}

#[derive(Debug, Args)]
pub struct ThermoArgs {
    /// Model file (JSON).
    #[arg(long)]
    pub model: PathBuf,
    /// Temperature of the point.
    #[arg(long, conflicts_with = "eps")]
    pub theta: Option<f64>,
    /// Internal energy of the point; θ is recovered from it.
    #[arg(long)]
    pub eps: Option<f64>,
    /// Rate of deformation entries, row-major and comma separated; zero when absent.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub delta: Vec<f64>,
    /// Sweep θ over `lo:hi:count` instead of evaluating one point.
    #[arg(long, value_name = "LO:HI:COUNT")]
    pub sweep_theta: Option<String>,
    /// Scales of Δ in the sweep, `lo:hi:count`.
    #[arg(long, value_name = "LO:HI:COUNT", default_value = "1:1:1")]
    pub sweep_scale: String,
    /// Override the model file's energy convention.
    #[arg(long, value_enum)]
    pub energy_convention: Option<ConventionArg>,
}

#[derive(Debug, Args)]
pub struct GeomCheckArgs {
    /// Chart file (JSON).
    #[arg(long, required_unless_present = "builtin")]
    pub chart: Option<PathBuf>,
    /// Built-in chart name; may be repeated.
    #[arg(long)]
    pub builtin: Vec<String>,
    /// Random fields per identity.
    #[arg(long, default_value_t = 50)]
    pub trials: usize,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Scenario file (JSON).
    pub scenario: PathBuf,
}

#[derive(Debug, Args)]
pub struct BracketCheckArgs {
    /// Model file (JSON).
    #[arg(long)]
    pub model: PathBuf,
    /// On-manifold sample points.
    #[arg(long, default_value_t = 20)]
    pub samples: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let g = &cli.global;
    if !(g.tolerance_scale > 0.0 && g.tolerance_scale.is_finite()) {
        eprintln!("error: --tolerance-scale must be positive");
        return ExitCode::from(2);
    }
    let result = match &cli.command {
        Command::Invariants(a) => commands::invariants(g, a),
        Command::Thermo(a) => commands::thermo(g, a),
        Command::GeomCheck(a) => commands::geom_check(g, a),
        Command::Simulate(a) => commands::simulate(g, a),
        Command::BracketCheck(a) => commands::bracket_check(g, a),
    };
    let CommandResult {
        exit_code,
        artifacts,
        summary,
    } = result.unwrap_or_else(CommandResult::from_error);
    if exit_code == 0 {
        println!("{summary}");
    } else {
        eprintln!("{summary}");
    }
    for a in &artifacts {
        println!("wrote {}", a.display());
    }
    ExitCode::from(exit_code)
}
