//! `reach-codesign` command-line driver.

mod commands;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::CliError;

#[derive(Debug, Parser)]
#[command(name = "reach-codesign", version, about = "Reachability-based control co-design for longitudinal BWB dynamics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Tabulate the surrogate aerodynamics to a JSON file.
    GenAero(GenAeroArgs),
    /// Trim one design and print the equilibrium.
    Trim(TrimArgs),
    /// Sample the reachable set of the linearized model.
    Reach(ReachArgs),
    /// Volume and projection metrics of a stored reach set.
    Metrics(MetricsArgs),
    /// Optimize the planform against a reach metric.
    Optimize(OptimizeArgs),
    /// Simulate a tracking controller and write trajectory and report.
    Track(TrackArgs),
}

#[derive(Debug, Args)]
pub struct GenAeroArgs {
    #[arg(long)]
    pub out: String,
    /// Grid points per axis.
    #[arg(long, default_value_t = 6)]
    pub resolution: usize,
}

#[derive(Debug, Args, Clone)]
pub struct FlightArgs {
    #[arg(long)]
    pub table: String,
    /// Chord and span as `c,w` in meters.
    #[arg(long, default_value = "5,12")]
    pub design: String,
    #[arg(long, default_value_t = 200.0)]
    pub airspeed: f64,
    /// Flight-path angle [rad].
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub gamma: f64,
}

#[derive(Debug, Args)]
pub struct TrimArgs {
    #[command(flatten)]
    pub flight: FlightArgs,
    /// Also write the JSON here.
    #[arg(long)]
    pub out: Option<String>,
}

#[derive(Debug, Args, Clone, Copy)]
pub struct SamplingArgs {
    /// Reach horizon [s].
    #[arg(long, default_value_t = 2.0)]
    pub horizon: f64,
    /// Time steps on the horizon.
    #[arg(long, default_value_t = 200)]
    pub steps: usize,
    #[arg(long, default_value_t = 256)]
    pub directions: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ReachArgs {
    #[command(flatten)]
    pub flight: FlightArgs,
    #[command(flatten)]
    pub sampling: SamplingArgs,
    #[arg(long, default_value = "reach.json")]
    pub out: String,
    /// Write V-alpha and Q-theta vertex projections next to the output.
    #[arg(long)]
    pub emit_plot_data: bool,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    /// Reach set JSON.
    #[arg(long)]
    pub reach: String,
    #[arg(long)]
    pub volume: bool,
    /// Direction `a,b,c,d`; normalized before use.
    #[arg(long, allow_hyphen_values = true)]
    pub projection: Option<String>,
    /// Use the stored vertices instead of re-synthesizing extremes.
    #[arg(long)]
    pub from_vertices: bool,
    #[arg(long)]
    pub table: Option<String>,
    #[arg(long)]
    pub design: Option<String>,
    #[arg(long, default_value_t = 200.0)]
    pub airspeed: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub gamma: f64,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[arg(long)]
    pub table: String,
    /// vm, dm or vmdc.
    #[arg(long)]
    pub problem: String,
    /// Direction for dm/vmdc as `a,b,c,d`; normalized before use.
    #[arg(long, allow_hyphen_values = true)]
    pub v: Option<String>,
    #[arg(long)]
    pub kappa: Option<f64>,
    #[arg(long, default_value = "5,12")]
    pub d0: String,
    #[arg(long, default_value_t = 200.0)]
    pub airspeed: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub gamma: f64,
    #[command(flatten)]
    pub sampling: SamplingArgs,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long, default_value = "opt.json")]
    pub out: String,
}

#[derive(Debug, Args)]
pub struct TrackArgs {
    #[command(flatten)]
    pub flight: FlightArgs,
    /// lq, lqi or nonlinear.
    #[arg(long)]
    pub mode: String,
    /// `velocity=4` or `pitch=0.5`; not used by the nonlinear maneuver.
    #[arg(long = "ref")]
    pub reference: Option<String>,
    /// Weight preset name.
    #[arg(long)]
    pub weights: Option<String>,
    /// Diagonal of Q, overriding the preset.
    #[arg(long)]
    pub q: Option<String>,
    /// Diagonal of R, overriding the preset.
    #[arg(long)]
    pub r: Option<String>,
    /// Linear tasks: simulated time [s].
    #[arg(long, default_value_t = 30.0)]
    pub duration: f64,
    /// Linear tasks: number of time steps.
    #[arg(long, default_value_t = 3000)]
    pub steps: usize,
    /// Nonlinear maneuver time step [s].
    #[arg(long, default_value_t = 0.01)]
    pub dt: f64,
    /// Report of a reference run for percent-improvement fields.
    #[arg(long)]
    pub baseline: Option<String>,
    #[arg(long, default_value = "trajectory.csv")]
    pub csv: String,
    #[arg(long, default_value = "report.json")]
    pub report: String,
    /// Write V-alpha and Q-theta trajectory pairs next to the CSV.
    #[arg(long)]
    pub emit_plot_data: bool,
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("REACH_CODESIGN_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("REACH_CODESIGN_THREADS={raw:?} is not a count")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(format!("thread pool: {e}")))
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    match cli.command {
        Command::GenAero(a) => commands::gen_aero(&a),
        Command::Trim(a) => commands::trim(&a),
        Command::Reach(a) => commands::reach(&a),
        Command::Metrics(a) => commands::metrics(&a),
        Command::Optimize(a) => commands::optimize(&a),
        Command::Track(a) => commands::track(&a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
