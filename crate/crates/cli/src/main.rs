//! `jjfab`: batch front end for the junction variability toolkit.
//!
//! Every subcommand is deterministic: identical inputs and seed produce
//! byte-identical artifacts, and each run that writes files ends with a
//! `manifest.json` naming and hashing all of them.

mod commands;
mod config;
mod outputs;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "jjfab", version, about = "Josephson junction process variability toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a Monte Carlo junction ensemble for one scenario
    Simulate(SimulateArgs),
    /// Evaluate a scenario across the values of one parameter axis
    Sweep(SweepArgs),
    /// Grid-search process parameters for minimal Ic spread
    Optimize(OptimizeArgs),
    /// Statistics and reports from measured data files
    Analyze(AnalyzeArgs),
    /// Fit process models to reference data
    Calibrate(CalibrateArgs),
    /// Single-junction electrics, forward (Rn) or inverse (f01)
    Junction(JunctionArgs),
    /// Deterministic wafer maps for a scenario
    Report(ReportArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Run configuration (TOML)
    #[arg(long)]
    config: PathBuf,
    /// Where to write artifacts (overrides the config)
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Parameter axis to sweep, e.g. bottom_angle_deg
    #[arg(long)]
    axis: String,
    /// Comma-separated axis values; `static,dynamic` for the method axis
    #[arg(long)]
    values: String,
}

#[derive(Args)]
struct OptimizeArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Free parameter as axis=low..high; repeat for up to three axes
    #[arg(long = "param", required = true)]
    params: Vec<String>,
    /// Design whose Ic spread is minimized
    #[arg(long)]
    design: String,
    /// Grid points per axis
    #[arg(long, default_value_t = 7)]
    points: usize,
    /// Refinement rounds around the incumbent
    #[arg(long, default_value_t = 2)]
    rounds: usize,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Probe-station resistance table (CSV)
    #[arg(long)]
    measurements: Option<PathBuf>,
    /// Qubit table (CSV)
    #[arg(long)]
    qubits: Option<PathBuf>,
    #[arg(long, default_value = "analyze_out")]
    output_dir: PathBuf,
    /// Resistances below this are shorts, ohm
    #[arg(long, default_value_t = 100.0)]
    short_threshold_ohm: f64,
    /// Resistances above this are opens, ohm
    #[arg(long, default_value_t = 1e6)]
    open_threshold_ohm: f64,
    /// Robust rejection width in group MADs
    #[arg(long, default_value_t = 5.0)]
    mad_k: f64,
}

#[derive(Args)]
struct CalibrateArgs {
    #[command(subcommand)]
    what: CalibrateCommand,
}

#[derive(Subcommand)]
enum CalibrateCommand {
    /// Throw distance for a target thickness nonuniformity
    Throw {
        /// Stage tilt during deposition, deg
        #[arg(long)]
        tilt_deg: f64,
        /// Target (max-min)/(max+min) thickness nonuniformity, percent
        #[arg(long)]
        nonuniformity_percent: f64,
        #[arg(long, default_value_t = 1.0)]
        grid_step_mm: f64,
    },
    /// Throw distance for a target linewidth reduction at the wafer edge
    Linewidth {
        /// Target edge erosion as a fraction of the line, percent
        #[arg(long)]
        reduction_percent: f64,
        #[arg(long, default_value_t = 100.0)]
        line_width_nm: f64,
        /// Stage tilt the line was dosed for, deg
        #[arg(long, default_value_t = 0.0)]
        design_angle_deg: f64,
    },
    /// Barrier current-density law from (exposure, jc) pairs
    Oxidation {
        /// CSV with header exposure_mbar_s,jc_a_per_um2
        #[arg(long)]
        data: PathBuf,
        /// Exposure at which the prefactor is quoted, mbar*s
        #[arg(long, default_value_t = 30.0)]
        anchor_exposure_mbar_s: f64,
    },
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct JunctionInput {
    /// Invert a qubit frequency target (GHz) at T = 0
    #[arg(long)]
    f01_ghz: Option<f64>,
    /// Forward-solve from a measured normal resistance (ohm)
    #[arg(long)]
    rn_ohm: Option<f64>,
}

#[derive(Args)]
struct JunctionArgs {
    #[command(flatten)]
    input: JunctionInput,
    /// Charging energy EC/h, MHz
    #[arg(long, default_value_t = 250.0)]
    ec_mhz: f64,
    /// Superconducting gap, ueV
    #[arg(long, default_value_t = 180.0)]
    gap_uev: f64,
    /// Bath temperature for the forward direction, K
    #[arg(long, default_value_t = 0.0)]
    temperature_k: f64,
    /// Junction area for current-density output, um^2
    #[arg(long)]
    area_um2: Option<f64>,
    /// Conducting fraction of the nominal area
    #[arg(long, default_value_t = 0.10)]
    active_area_fraction: f64,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 2.0)]
    grid_step_mm: f64,
}

fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var("JJFAB_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .parse()
        .map_err(|_| format!("JJFAB_THREADS must be a positive integer, got {raw:?}"))?;
    if n == 0 {
        return Err("JJFAB_THREADS must be a positive integer, got 0".to_string());
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| format!("cannot configure {n} worker threads: {e}"))
}

fn run(cli: Cli) -> Result<(), String> {
    configure_threads()?;
    match cli.command {
        Command::Simulate(args) => commands::simulate(&args),
        Command::Sweep(args) => commands::sweep(&args),
        Command::Optimize(args) => commands::optimize(&args),
        Command::Analyze(args) => commands::analyze(&args),
        Command::Calibrate(args) => commands::calibrate(&args.what),
        Command::Junction(args) => commands::junction(&args),
        Command::Report(args) => commands::report(&args),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        // Clap exits 0 for --help/--version and 2 for usage errors.
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(message) => {
            eprintln!("error: {}", message.replace('\n', "; "));
            ExitCode::FAILURE
        }
    }
}
