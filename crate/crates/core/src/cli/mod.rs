//! Command-line experiment runner.
//!
//! Every command builds a [`RunConfig`] from its flags, runs single-threaded
//! except for decoding (which fans out over `--workers`), and renders a CSV
//! string. Output depends only on the configuration, never on the worker
//! count.

mod commands;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::{cmd_diversity, cmd_oracle_check, cmd_sample, cmd_stepfn, cmd_variance, RewardSpec};

use crate::codebook::LatticeMode;
use crate::error::{Error, Result};
use crate::models::ModifierChain;
use crate::sampler::Method;

#[derive(Debug, Parser)]
#[command(name = "arith-sampling", version, about = "Arithmetic sampling experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Sample,
    Diversity,
    Variance,
    Stepfn,
    OracleCheck,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw one sample set and print every sample.
    Sample(RunArgs),
    /// Reward and n-gram diversity sweep over temperatures and sample sizes.
    Diversity(RunArgs),
    /// Standard deviation of the sample-mean estimator across repetitions.
    Variance(RunArgs),
    /// Shifted-lattice versus Monte Carlo variance on a step function.
    Stepfn(RunArgs),
    /// Compare the sampler against the brute-force oracle on a small model.
    OracleCheck(RunArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Model JSON file; repeat once per context for `diversity`.
    #[arg(long = "model")]
    pub models: Vec<PathBuf>,
    #[arg(long, default_value = "arithmetic")]
    pub method: String,
    /// Sample size(s), comma separated.
    #[arg(long = "n", value_delimiter = ',', default_value = "16")]
    pub n: Vec<usize>,
    /// `paper` or `uniform`; defaults to `uniform` for `stepfn`, `paper` otherwise.
    #[arg(long)]
    pub lattice_mode: Option<String>,
    /// Temperature(s), comma separated.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub temperature: Vec<f64>,
    #[arg(long)]
    pub top_k: Option<usize>,
    #[arg(long)]
    pub nucleus_p: Option<f64>,
    #[arg(long, env = "ARITH_DECODE_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Use this shift instead of deriving one from the seed.
    #[arg(long)]
    pub shift: Option<f64>,
    #[arg(long, default_value_t = 100)]
    pub reps: usize,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    /// Write CSV here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Reference corpus: one space-tokenized reference per line.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    /// Reward for `variance`: `length`, `bleu`, or `first:<symbol>`.
    #[arg(long, default_value = "length")]
    pub reward: String,
    /// Step-function file: lines of `lo hi coefficient`.
    #[arg(long)]
    pub stepfn: Option<PathBuf>,
}

/// Validated run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: CommandKind,
    pub models: Vec<PathBuf>,
    pub method: Method,
    pub num_samples: Vec<usize>,
    pub lattice_mode: LatticeMode,
    pub temperatures: Vec<f64>,
    pub top_k: Option<usize>,
    pub nucleus_p: Option<f64>,
    pub seed: u64,
    pub shift: Option<f64>,
    pub reps: usize,
    pub worker_count: usize,
    pub out: Option<PathBuf>,
    pub reference: Option<PathBuf>,
    pub reward: RewardSpec,
    pub stepfn: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_args(command: CommandKind, args: RunArgs) -> Result<Self> {
        let method: Method = args.method.parse().map_err(|e: Error| Error::input(e.to_string()))?;
        let lattice_mode = match (&args.lattice_mode, command) {
            (Some(m), _) => m.parse().map_err(|e: Error| Error::input(e.to_string()))?,
            (None, CommandKind::Stepfn) => LatticeMode::Uniform,
            (None, _) => LatticeMode::Paper,
        };
        if args.n.is_empty() || args.n.contains(&0) {
            return Err(Error::input("--n values must be at least 1"));
        }
        if args.reps == 0 {
            return Err(Error::input("--reps must be at least 1"));
        }
        if args.workers == 0 {
            return Err(Error::input("--workers must be at least 1"));
        }
        if args.temperature.is_empty() {
            return Err(Error::input("--temperature needs a value"));
        }
        let reward = args.reward.parse()?;
        let config = RunConfig {
            command,
            models: args.models,
            method,
            num_samples: args.n,
            lattice_mode,
            temperatures: args.temperature,
            top_k: args.top_k,
            nucleus_p: args.nucleus_p,
            seed: args.seed,
            shift: args.shift,
            reps: args.reps,
            worker_count: args.workers,
            out: args.out,
            reference: args.reference,
            reward,
            stepfn: args.stepfn,
        };
        for &t in &config.temperatures {
            config.chain(t).map_err(|e| Error::input(e.to_string()))?;
        }
        Ok(config)
    }

    /// The modifier chain at temperature `t`; temperature 1 is omitted.
    pub fn chain(&self, t: f64) -> Result<ModifierChain> {
        let temperature = if t == 1.0 { None } else { Some(t) };
        ModifierChain::standard(temperature, self.top_k, self.nucleus_p)
    }
}

/// Process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Success = 0,
    InputError = 1,
    PropertyFailure = 2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub csv: String,
    pub status: ExitStatus,
}

impl Outcome {
    fn ok(csv: String) -> Self {
        Outcome {
            csv,
            status: ExitStatus::Success,
        }
    }
}

impl Command {
    pub fn split(self) -> (CommandKind, RunArgs) {
        match self {
            Command::Sample(a) => (CommandKind::Sample, a),
            Command::Diversity(a) => (CommandKind::Diversity, a),
            Command::Variance(a) => (CommandKind::Variance, a),
            Command::Stepfn(a) => (CommandKind::Stepfn, a),
            Command::OracleCheck(a) => (CommandKind::OracleCheck, a),
        }
    }
}

/// Runs one command and returns its CSV; does not write the output file.
pub fn run(config: &RunConfig) -> Result<Outcome> {
    match config.command {
        CommandKind::Sample => cmd_sample(config).map(Outcome::ok),
        CommandKind::Diversity => cmd_diversity(config).map(Outcome::ok),
        CommandKind::Variance => cmd_variance(config).map(Outcome::ok),
        CommandKind::Stepfn => cmd_stepfn(config).map(Outcome::ok),
        CommandKind::OracleCheck => cmd_oracle_check(config),
    }
}
