//! `hwdetect`: generate constellations, simulate and analyse SEP, and run the
//! constellation optimiser. Every output begins with `#` lines describing the
//! run that produced it.

mod commands;
mod manifest;
mod source;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hwdetect_core::DetectorKind;

use crate::source::{ConstellationSource, SnrGrid};

#[derive(Parser, Debug)]
#[command(name = "hwdetect", version, about = "Detection and SEP analysis under amplitude and phase impairments")]
struct Cli {
    /// Worker threads for Monte Carlo runs; results do not depend on it.
    #[arg(long, global = true, env = "HWDETECT_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a unit-energy QAM or SAPSK constellation.
    Gen(GenArgs),
    /// Monte Carlo SEP over an SNR grid.
    Simulate(SimulateArgs),
    /// Closed-form SEP approximation (PAD-D) over an SNR grid, or its floor.
    Analyze(AnalyzeArgs),
    /// Optimise a constellation for one detector and operating point.
    Optimize(OptimizeArgs),
    /// Grid search over SAPSK ring counts and spacings.
    SearchSapsk(SearchSapskArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum GenType {
    Qam,
    Sapsk,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Objective {
    Mc,
    Analytic,
}

#[derive(Args, Debug)]
struct GenArgs {
    #[arg(long = "type", value_enum)]
    kind: GenType,
    #[arg(long)]
    order: usize,
    /// Number of SAPSK rings.
    #[arg(long)]
    gamma: Option<usize>,
    /// SAPSK ring spacing relative to the inner radius.
    #[arg(long)]
    rho: Option<f64>,
    /// Output file; stdout when omitted.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct ChannelArgs {
    /// Residual amplitude-gain variance σ_g².
    #[arg(long, default_value_t = 0.0)]
    sigma_g2: f64,
    /// Phase-noise variance σ_φ² in rad².
    #[arg(long, default_value_t = 0.0)]
    sigma_phi2: f64,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// File path, `qam:M` or `sapsk:M:GAMMA:RHO`.
    #[arg(long, short)]
    constellation: ConstellationSource,
    #[arg(long, short)]
    detector: DetectorKind,
    #[command(flatten)]
    channel: ChannelArgs,
    /// Inclusive grid `start:step:stop` in dB.
    #[arg(long)]
    snr: SnrGrid,
    #[arg(long, default_value_t = 1_000_000)]
    symbols: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct AnalyzeArgs {
    #[arg(long, short)]
    constellation: ConstellationSource,
    #[command(flatten)]
    channel: ChannelArgs,
    #[arg(long, required_unless_present = "floor", conflicts_with = "floor")]
    snr: Option<SnrGrid>,
    /// Report the noise-free error floor instead of an SNR sweep.
    #[arg(long)]
    floor: bool,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct OptimizeArgs {
    #[arg(long)]
    order: usize,
    #[arg(long, short)]
    detector: DetectorKind,
    #[command(flatten)]
    channel: ChannelArgs,
    #[arg(long)]
    snr_db: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Writes PREFIX.const, PREFIX.history.tsv and PREFIX.validation.tsv.
    #[arg(long)]
    out_prefix: PathBuf,
    #[arg(long, value_enum, default_value_t = Objective::Mc)]
    objective: Objective,
    /// Monte Carlo trials per objective evaluation.
    #[arg(long, default_value_t = 100_000)]
    n_eval: u64,
    #[arg(long, default_value_t = 1_000_000)]
    n_validation: u64,
    #[arg(long)]
    validation_seed: Option<u64>,
    /// Starting design (file or shorthand); QAM or best random set otherwise.
    #[arg(long)]
    start: Option<ConstellationSource>,
    /// Initial temperature; 10× the starting objective when omitted.
    #[arg(long)]
    t0: Option<f64>,
    #[arg(long, default_value_t = 0.95)]
    cooling: f64,
    #[arg(long, default_value_t = 50)]
    iters_per_temp: usize,
    #[arg(long, default_value_t = 0.1)]
    step: f64,
    #[arg(long, default_value_t = 1e-6)]
    t_min_ratio: f64,
    #[arg(long)]
    max_anneal_iters: Option<usize>,
    #[arg(long, default_value_t = 1e-3)]
    fd_step: f64,
    #[arg(long, default_value_t = 20)]
    refine_iters: usize,
    #[arg(long, default_value_t = 1e-6)]
    tolerance: f64,
    #[arg(long, default_value_t = 0.05)]
    line_step: f64,
}

#[derive(Args, Debug)]
struct SearchSapskArgs {
    #[arg(long)]
    order: usize,
    #[arg(long, short)]
    detector: DetectorKind,
    #[command(flatten)]
    channel: ChannelArgs,
    #[arg(long)]
    snr_db: f64,
    /// Ring counts to try, e.g. `2,3,4`.
    #[arg(long, default_value = "2,3,4,5,6")]
    gammas: String,
    /// Ring spacings to try, e.g. `0.5,1,1.5`.
    #[arg(long, default_value = "0.25,0.5,0.75,1,1.25,1.5,2")]
    rhos: String,
    #[arg(long, default_value_t = 100_000)]
    symbols: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = commands::thread_pool(cli.threads).and_then(|pool| {
        pool.install(|| match cli.command {
            Command::Gen(a) => commands::gen(a),
            Command::Simulate(a) => commands::simulate(a),
            Command::Analyze(a) => commands::analyze(a),
            Command::Optimize(a) => commands::optimize(a),
            Command::SearchSapsk(a) => commands::search_sapsk(a),
        })
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
