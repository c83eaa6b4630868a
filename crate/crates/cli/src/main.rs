//! `contract-synth`: synthesis, verification, benchmarks and plot data for
//! networks of coupled linear systems.
//!
//! Exit codes: 0 on success, 1 when synthesis or verification fails, 2 on usage,
//! configuration or I/O errors.

mod bench;
mod plot;
mod synth;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use contract_synth::sysmodel::{random_network_with, Mode, RandomNetworkParams};

/// Environment variable capping the worker pool size.
const THREADS_ENV: &str = "CONTRACT_SYNTH_THREADS";

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, unreadable or malformed inputs. Exit code 2.
    Usage(String),
    /// The run itself went wrong. Exit code 1.
    Run(String),
}

impl CliError {
    fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Usage(_) => ExitCode::from(2),
            CliError::Run(_) => ExitCode::from(1),
        }
    }
}

pub type CliResult = Result<ExitCode, CliError>;

#[derive(Debug, Parser)]
#[command(name = "contract-synth", version, about = "Decentralized controller synthesis with zonotopic contracts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Synthesize contracts and local controllers; writes a result directory.
    Synth(SynthArgs),
    /// Monte Carlo check of a result directory.
    Verify(VerifyArgs),
    /// Write a random benchmark network as JSON.
    GenRandom(GenRandomArgs),
    /// Time the three methods on random networks of increasing size.
    Bench(BenchArgs),
    /// Emit CSV data for viable-set polygons or potential slices.
    Plotdata(PlotArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Finite,
    Infinite,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Finite => Mode::Finite,
            ModeArg::Infinite => Mode::Infinite,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Centralized,
    Compositional,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Network JSON.
    #[arg(long)]
    pub config: PathBuf,
    /// Override the horizon mode of the config.
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// Horizon when switching to finite mode.
    #[arg(long)]
    pub horizon: Option<usize>,
    #[arg(long, value_enum, default_value = "compositional")]
    pub method: MethodArg,
    /// Tube columns.
    #[arg(long, default_value_t = 4)]
    pub k: usize,
    /// Invariant-set contraction factor; contract programs support only 0.
    #[arg(long, default_value_t = 0.0)]
    pub beta: f64,
    #[arg(long = "max-iter", default_value_t = 500)]
    pub max_iter: usize,
    /// Stop once the potential is at most this value.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    /// Initial step of each line search (or the fixed step without it).
    #[arg(long, default_value_t = 1.0)]
    pub step: f64,
    /// Boxing order for assumed disturbances; 0 keeps them exact.
    #[arg(long = "reduce-order", default_value_t = 1)]
    pub reduce_order: usize,
    /// Use fixed steps instead of backtracking.
    #[arg(long = "no-line-search")]
    pub no_line_search: bool,
    /// Random initial contract parameters instead of half the upper bounds.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Wall-clock budget in seconds.
    #[arg(long = "time-limit")]
    pub time_limit: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Result directory written by `synth`.
    #[arg(long)]
    pub result: PathBuf,
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    /// Steps per trajectory in infinite mode; finite runs cover the horizon.
    #[arg(long, default_value_t = 1000)]
    pub steps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write one sample trajectory as CSV.
    #[arg(long)]
    pub trajectory: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenRandomArgs {
    /// Total state dimension (a multiple of the subsystem dimension).
    #[arg(long)]
    pub size: usize,
    /// Coupling strength; defaults to the schedule entry for `--size`.
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Generator parameters (see configs/case3-template.json).
    #[arg(long)]
    pub params: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Total state dimensions, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "10,20,40,100")]
    pub sizes: Vec<usize>,
    /// One `λ` per size; defaults to the schedule in the generator parameters.
    #[arg(long = "lambda-schedule", value_delimiter = ',')]
    pub lambda_schedule: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Per-run budget in seconds; longer runs are recorded as "time out".
    #[arg(long, default_value_t = 600.0)]
    pub timeout: f64,
    #[arg(long, value_delimiter = ',', value_enum, default_value = "centralized-dense,centralized-decentralized,compositional")]
    pub methods: Vec<bench::BenchMethod>,
    #[arg(long, default_value_t = 4)]
    pub k: usize,
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// CSV file; rows are appended, the header is written once.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PlotWhat {
    ViableSets,
    PotentialSlice,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    #[arg(long)]
    pub result: PathBuf,
    #[arg(long, value_enum)]
    pub what: PlotWhat,
    /// viable-sets: two state coordinates `a,b`. potential-slice: two state
    /// parameters `i:r,j:s` (subsystem index or id, 0-based entry, optional `:t`).
    #[arg(long)]
    pub dims: Option<String>,
    /// Points per axis of the potential slice.
    #[arg(long, default_value_t = 21)]
    pub grid: usize,
    /// Output directory; defaults to `<result>/plot`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::Usage(format!("{THREADS_ENV} must be a positive integer, got `{value}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Usage(format!("thread pool: {e}")))
}

pub fn load_random_params(path: Option<&PathBuf>) -> Result<RandomNetworkParams, CliError> {
    match path {
        None => Ok(RandomNetworkParams::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))
        }
    }
}

/// Number of subsystems for a total state dimension.
pub fn subsystem_count(size: usize, params: &RandomNetworkParams) -> Result<usize, CliError> {
    let n = params.state_dim();
    if size == 0 || size % n != 0 {
        return Err(CliError::Usage(format!("size {size} is not a positive multiple of the subsystem dimension {n}")));
    }
    Ok(size / n)
}

fn gen_random(args: &GenRandomArgs) -> CliResult {
    let params = load_random_params(args.params.as_ref())?;
    let count = subsystem_count(args.size, &params)?;
    let lambda = args
        .lambda
        .or_else(|| params.lambda_for(args.size))
        .ok_or_else(|| CliError::Usage(format!("no λ given and size {} is not in the schedule", args.size)))?;
    let network = random_network_with(count, lambda, args.seed, &params).map_err(|e| CliError::Usage(e.to_string()))?;
    network.save(&args.out).map_err(|e| CliError::Usage(e.to_string()))?;
    println!("wrote {} subsystems (λ = {lambda}) to {}", count, args.out.display());
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = configure_threads().and_then(|()| match &cli.command {
        Command::Synth(a) => synth::run(a),
        Command::Verify(a) => verify::run(a),
        Command::GenRandom(a) => gen_random(a),
        Command::Bench(a) => bench::run(a),
        Command::Plotdata(a) => plot::run(a),
    });
    match outcome {
        Ok(code) => code,
        Err(e) => {
            match &e {
                CliError::Usage(m) | CliError::Run(m) => eprintln!("error: {m}"),
            }
            e.exit_code()
        }
    }
}
