//! `misuse-bench`: checkout, extraction, detection, experiments,
//! statistics and the review service.
//!
//! Exit codes: 0 success, 1 some runs failed or timed out, 2 invalid
//! invocation or dataset.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use misuse_core::bench::experiment::ExperimentKind;
use misuse_core::config::PartialConfig;

#[derive(Debug, Parser)]
#[command(name = "misuse-bench", version, about = "Static API-misuse detection benchmark")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// YAML config file; flags win over its values.
    #[arg(long, global = true, env = "MISUSE_CONFIG")]
    pub config: Option<PathBuf>,
    /// Dataset root holding index.yml and misuses/.
    #[arg(long, global = true, env = "MISUSE_DATASET")]
    pub dataset: Option<PathBuf>,
    /// Workspace for checkouts, facts, results and reviews [default: workspace].
    #[arg(long, global = true, env = "MISUSE_WORKSPACE")]
    pub workspace: Option<PathBuf>,
    /// Detector ids, comma separated, or `all`.
    #[arg(long = "detector", global = true, env = "MISUSE_DETECTOR", value_delimiter = ',')]
    pub detectors: Vec<String>,
    #[arg(long, global = true, env = "MISUSE_MIN_SUPPORT")]
    pub min_support: Option<usize>,
    /// Per-run timeout in seconds; fractions allowed [default: 7200].
    #[arg(long, global = true, env = "MISUSE_TIMEOUT")]
    pub timeout: Option<f64>,
    #[arg(long, global = true, env = "MISUSE_SEED")]
    pub seed: Option<u64>,
    /// Findings exported per detector and version [default: 20].
    #[arg(long, global = true, env = "MISUSE_TOP_N")]
    pub top_n: Option<usize>,
    /// Worker threads [default: number of processors].
    #[arg(long, global = true, env = "MISUSE_JOBS")]
    pub jobs: Option<usize>,
    /// Crafted-usage copies in experiment RUB [default: 50].
    #[arg(long, global = true, env = "MISUSE_COPIES")]
    pub copies: Option<usize>,
    /// Run everything on the calling thread.
    #[arg(long, global = true, env = "MISUSE_SEQUENTIAL")]
    pub sequential: bool,
}

impl GlobalArgs {
    pub fn partial(&self) -> PartialConfig {
        PartialConfig {
            dataset: self.dataset.clone(),
            workspace: self.workspace.clone(),
            detectors: (!self.detectors.is_empty()).then(|| self.detectors.clone()),
            min_support: self.min_support,
            timeout: self.timeout,
            seed: self.seed,
            top_n: self.top_n,
            jobs: self.jobs,
            copies: self.copies,
            overrides: Default::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Experiment {
    P,
    Rub,
    R,
}

impl From<Experiment> for ExperimentKind {
    fn from(e: Experiment) -> Self {
        match e {
            Experiment::P => ExperimentKind::P,
            Experiment::Rub => ExperimentKind::Rub,
            Experiment::R => ExperimentKind::R,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Materialize project versions in the workspace.
    Checkout {
        /// Version id or project/version; all versions when omitted.
        #[arg(long)]
        version: Option<String>,
    },
    /// Extract usage models, reusing cached facts.
    Extract {
        #[arg(long)]
        version: Option<String>,
        /// Also write the facts to this file (single version only).
        #[arg(long, env = "MISUSE_FACTS_OUT")]
        facts_out: Option<PathBuf>,
    },
    /// Run detectors on one version.
    Detect {
        #[arg(long)]
        version: String,
        /// Read models from this facts file instead of extracting.
        #[arg(long, env = "MISUSE_FACTS_IN")]
        facts_in: Option<PathBuf>,
    },
    /// Run an experiment and export its records.
    Exp {
        #[arg(value_enum)]
        experiment: Experiment,
        /// Experiment RUB only: run a single misuse.
        #[arg(long)]
        misuse: Option<String>,
    },
    /// Print review statistics and write summary.csv.
    Stats {
        #[arg(value_enum)]
        experiment: Experiment,
        /// The two reviewers whose first-round decisions enter kappa.
        #[arg(long, value_delimiter = ',')]
        primary: Vec<String>,
    },
    /// Serve the review API.
    Serve {
        #[arg(long, env = "MISUSE_PORT", default_value_t = 8080)]
        port: u16,
        #[arg(long, env = "MISUSE_HOST", default_value = "127.0.0.1")]
        host: std::net::IpAddr,
        /// Assessment log [default: <workspace>/review/store.jsonl].
        #[arg(long, env = "MISUSE_STORE")]
        store: Option<PathBuf>,
        /// JSON token table: [{"token", "reviewer", "primary"}].
        #[arg(long, env = "MISUSE_TOKENS")]
        tokens: PathBuf,
    },
    /// Check the dataset index and misuse files.
    ValidateDataset,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
