//! `critflow`: stationary curves, stability diagrams, flow runs and
//! perturbation experiments from the command line.
//!
//! Exit codes: 0 clean finish, 2 usage or input error, 3 blowup detected,
//! 1 anything else (I/O).

mod commands;
mod manifest;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "critflow", version, about = "Scale-critical curve diffusion flow laboratory")]
pub struct Cli {
    /// Directory for every file the command writes.
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,

    /// Encoding of tabular outputs (curves, grids, time series).
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,

    /// Only print errors.
    #[arg(long, global = true)]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Build a closed super-lemniscate and write its curve and an SVG.
    Stationary(StationaryArgs),
    /// Spectral gap reports, stable turning numbers and stability diagrams.
    Stability(StabilityArgs),
    /// Integrate the flow from an initial curve.
    Flow(FlowArgs),
    /// Measure e'(0) for support-function perturbations of the ω-circle.
    Perturb(PerturbArgs),
    /// Write the standard set of figures.
    Figures(FiguresArgs),
}

#[derive(Args, Debug, serde::Serialize)]
#[command(allow_negative_numbers = true)]
pub struct StationaryArgs {
    /// Index j ≥ 1 of the super-lemniscate, c_j = 2/(4j − 1)².
    #[arg(long)]
    pub j: u32,
    /// Sample count; defaults to max(2048, 64(4j − 1)).
    #[arg(long)]
    pub samples: Option<usize>,
}

#[derive(Args, Debug, serde::Serialize)]
#[command(allow_negative_numbers = true)]
pub struct StabilityArgs {
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long)]
    pub omega: Option<i64>,
    /// Largest turning number for stable sets and grids.
    #[arg(long)]
    pub omega_max: Option<u64>,
    /// Grid in c as `cmin:cmax:steps`.
    #[arg(long, allow_hyphen_values = true)]
    pub grid: Option<String>,
    /// Write the stability diagram for the grid range to this file.
    #[arg(long)]
    pub svg: Option<String>,
    /// Extra dashed guide in the diagram, e.g. the c of a zoom.
    #[arg(long)]
    pub mark: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeArg {
    Unnormalised,
    LengthNormalised,
}

#[derive(Args, Debug, serde::Serialize)]
#[command(allow_negative_numbers = true)]
pub struct FlowArgs {
    #[arg(long)]
    pub c: f64,
    #[arg(long, value_enum, default_value_t = ModeArg::Unnormalised)]
    pub mode: ModeArg,
    /// `circle:ω`, `support:ω,n0,η`, `file:path` or `lemniscate:j`.
    #[arg(long)]
    pub init: String,
    #[arg(long, default_value_t = 128)]
    pub samples: usize,
    #[arg(long)]
    pub t_end: Option<f64>,
    #[arg(long, default_value_t = critflow::flow::DEFAULT_DT_SAFETY)]
    pub dt_safety: f64,
    #[arg(long, default_value_t = 10)]
    pub reparam_every: usize,
    /// Curvature ceiling that counts as blowup.
    #[arg(long, default_value_t = 1e4)]
    pub stop_kmax: f64,
    /// Stop (exit 0) once K_osc exceeds this value.
    #[arg(long)]
    pub stop_koscmax: Option<f64>,
    /// Stop once K_osc falls below this value. Without --t-end a
    /// non-round start defaults to 1e-8.
    #[arg(long)]
    pub stop_kosc_below: Option<f64>,
    #[arg(long, default_value_t = 1000)]
    pub record_every: usize,
    /// Step budget; without --t-end it defaults to 5e7.
    #[arg(long)]
    pub max_steps: Option<u64>,
    /// Time series file name inside the output directory.
    #[arg(long)]
    pub out: Option<String>,
    /// Directory (inside the output directory) for curve snapshots.
    #[arg(long)]
    pub snapshots: Option<String>,
    /// Keep a snapshot every this many records.
    #[arg(long, default_value_t = 10)]
    pub snapshot_every: usize,
    /// Write a filmstrip of rescaled snapshots to this SVG file.
    #[arg(long)]
    pub filmstrip: Option<String>,
}

#[derive(Args, Debug, serde::Serialize)]
#[command(allow_negative_numbers = true)]
pub struct PerturbArgs {
    #[arg(long)]
    pub c: f64,
    #[arg(long)]
    pub omega: i64,
    /// Perturbed mode; defaults to the minimiser of the spectral gap.
    #[arg(long)]
    pub n0: Option<i64>,
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.04, 0.02, 0.01])]
    pub eta: Vec<f64>,
    #[arg(long, default_value_t = critflow::perturbation::DEFAULT_EXPERIMENT_SAMPLES)]
    pub samples: usize,
    /// Report file name inside the output directory.
    #[arg(long, default_value = "perturb_report.json")]
    pub report: String,
}

#[derive(Args, Debug, serde::Serialize)]
pub struct FiguresArgs {
    /// Which figures to write: 1 (super-lemniscates), 2 (stability region),
    /// 3 (zoom near c = 1.001).
    #[arg(long, value_delimiter = ',', default_values_t = vec![1, 2, 3])]
    pub which: Vec<u8>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet { "error" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match commands::dispatch(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code_for(&e))
        }
    }
}
