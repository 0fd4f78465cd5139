use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use decorr::dataset::ExperimentScale;
use decorr::decorrelation::{AugmentMode, Compensation};
use serde::{Deserialize, Serialize};

mod commands;
mod output;

/// Label-decorrelating augmentation of synthetic bioprocess spectra.
///
/// Every subcommand writes its artifacts plus a `config-echo.json` into
/// `--out`; `decorr replay <echo>` reruns it.
#[derive(Parser, Debug)]
#[command(name = "decorr", version)]
struct Cli {
    /// Cap on worker threads [default: available cores].
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Fit the cultivation model to offline measurements.
    Fit(FitArgs),
    /// Integrate one cultivation and write its trajectory.
    Simulate(SimulateArgs),
    /// Build the component spectra library, or extract one from a dataset.
    Components(ComponentsArgs),
    /// Generate the eight experiment datasets.
    GenData(GenDataArgs),
    /// Rejection statistics of the augmentation over a dataset.
    AugmentStats(AugmentStatsArgs),
    /// Train the linear regressor on a dataset.
    Train(TrainArgs),
    /// Mean squared error of a trained model on datasets.
    Evaluate(EvaluateArgs),
    /// Generate data, train all four setups on three seeds and report.
    Reproduce(ReproduceArgs),
    /// Rerun a command from its config-echo.json.
    #[serde(skip)]
    Replay(ReplayArgs),
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct FitArgs {
    /// Observation CSV (`time_h` plus any of S_f,S_o,N,X_r,P_hb,P_hhx)
    /// [default: the committed reference observations].
    #[arg(long)]
    pub observations: Option<PathBuf>,
    /// Initial-guess parameter file [default: committed nominal set].
    #[arg(long)]
    pub fixture: Option<PathBuf>,
    /// Oil share of the carbon source, used for unmeasured initial substrates.
    #[arg(long, default_value_t = 50.0)]
    pub oil_pct: f64,
    #[arg(long, default_value_t = 200)]
    pub max_iters: usize,
    /// Weight of the log-space pull toward the initial guess (0 disables).
    #[arg(long, default_value_t = 1e-4)]
    pub prior_weight: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 50.0)]
    pub oil_pct: f64,
    #[arg(long)]
    pub fixture: Option<PathBuf>,
    /// Apply gamma perturbation to parameters and initial conditions.
    #[arg(long)]
    pub perturb: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 72.0)]
    pub horizon: f64,
    #[arg(long, default_value_t = 3.0)]
    pub interval: f64,
    #[arg(long, default_value_t = 0.01)]
    pub dt: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct ComponentsArgs {
    /// Peak table (TOML) [default: committed table].
    #[arg(long)]
    pub peaks: Option<PathBuf>,
    /// Seed of the peak-center jitter.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Extract components from this dataset directory by non-negative least squares.
    #[arg(long, value_name = "DIR")]
    pub extract_from: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    /// 2000 training and 400 validation cultivations.
    Full,
    /// 200 training and 40 validation cultivations.
    Reduced,
}

impl Scale {
    pub fn experiment(self) -> ExperimentScale {
        match self {
            Scale::Full => ExperimentScale::FULL,
            Scale::Reduced => ExperimentScale::REDUCED,
        }
    }
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct GenDataArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Scale::Full)]
    pub scale: Scale,
    /// Write only these datasets (train, val_0 … val_10, no_corr); repeatable.
    #[arg(long, value_name = "NAME")]
    pub only: Vec<String>,
    /// Noise standard deviation of the spectra.
    #[arg(long, default_value_t = decorr::spectra::DEFAULT_SIGMA)]
    pub sigma: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct AugmentArgs {
    /// variance_exact | paper_linear
    #[arg(long, default_value = "variance_exact")]
    pub compensation: Compensation,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    /// Noise standard deviation of the source spectra.
    #[arg(long, default_value_t = decorr::spectra::DEFAULT_SIGMA)]
    pub sigma: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct AugmentStatsArgs {
    /// Dataset directory.
    #[arg(long)]
    pub data: PathBuf,
    /// off | decorrelate | decorrelate_filter
    #[arg(long, default_value = "decorrelate_filter")]
    pub mode: AugmentMode,
    #[command(flatten)]
    pub augment: AugmentArgs,
    #[arg(long, default_value_t = 1)]
    pub epochs: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct TrainArgs {
    /// Dataset directory with normalized labels.
    #[arg(long)]
    pub data: PathBuf,
    /// off | decorrelate | decorrelate_filter
    #[arg(long, default_value = "off")]
    pub mode: AugmentMode,
    #[command(flatten)]
    pub augment: AugmentArgs,
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1e-2)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub l2: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct EvaluateArgs {
    /// Model file written by `train`.
    #[arg(long)]
    pub model: PathBuf,
    /// Dataset directory; repeatable.
    #[arg(long, required = true)]
    pub data: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct ReproduceArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Scale::Full)]
    pub scale: Scale,
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    #[arg(long, default_value = "variance_exact")]
    pub compensation: Compensation,
    #[arg(long, default_value_t = decorr::spectra::DEFAULT_SIGMA)]
    pub sigma: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone)]
pub struct ReplayArgs {
    /// A config-echo.json written by an earlier run.
    pub echo: PathBuf,
    /// Write to this directory instead of the recorded one.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Failure of a subcommand, mapped to the process exit code.
#[derive(Debug)]
pub enum Failure {
    /// Bad input or configuration (exit 1).
    Input(String),
    /// Numerical non-convergence or divergence (exit 2).
    Numerical(String),
}

impl From<decorr::Error> for Failure {
    fn from(e: decorr::Error) -> Self {
        match e {
            decorr::Error::NonFinite { .. } | decorr::Error::Diverged { .. } => Failure::Numerical(e.to_string()),
            _ => Failure::Input(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let _ = output::THREADS.set(cli.threads);
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
