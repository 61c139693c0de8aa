//! `besqlab`: sample the exact laws, simulate BESQ paths, run the local-time
//! embedding and the verification experiments.
//!
//! Exit codes: 0 success, 1 a verification test failed (or a run error),
//! 2 usage or parameter error.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};

use besqlab_core::verify::list_experiments;
use config::{FileConfig, Overrides, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "besqlab", version, about = "Squared Bessel processes and Brownian local-time embeddings")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Flat TOML file with any of: dt, horizon, n, seed, levels, output_dir,
    /// significance, tolerance_se. Flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for CSV and JSON output.
    #[arg(long, global = true, env = "BESQLAB_OUTPUT_DIR")]
    output_dir: Option<PathBuf>,
    /// Seed for every random stream of the run.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Number of samples or replicates.
    #[arg(long, global = true)]
    n: Option<usize>,
    /// Time (or level) step.
    #[arg(long, global = true)]
    dt: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum Law {
    /// Standard gamma variable with shape --r.
    Gamma,
    /// BESQ_0(δ) at level x: 2x·gamma(δ/2). Needs --delta, --x.
    Besq0,
    /// BESQ_y(δ) at time x. Needs --delta, --y, --x.
    BesqTransition,
    /// BESQ(−δ) at x from an exponential start of mean 1/μ. Needs --delta, --mu, --x.
    EntranceNegdim,
    /// Absorption time of BESQ_v(−δ). Needs --delta (> 0), --v.
    AbsorptionTime,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw samples from an exact law and write them as CSV.
    Sample {
        #[arg(value_enum)]
        law: Law,
        #[arg(long)]
        r: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        delta: Option<f64>,
        #[arg(long)]
        x: Option<f64>,
        #[arg(long)]
        y: Option<f64>,
        #[arg(long)]
        mu: Option<f64>,
        #[arg(long)]
        v: Option<f64>,
    },
    /// Simulate one BESQ(δ) Euler path (absorbed at 0 when δ ≤ 0).
    SimulatePath {
        #[arg(long, allow_hyphen_values = true)]
        delta: f64,
        /// Starting value.
        #[arg(long, default_value_t = 1.0)]
        y: f64,
        #[arg(long)]
        horizon: Option<f64>,
    },
    /// Split the local times of one Brownian path into BESQ(δ) and BESQ(−δ)
    /// profiles along the skew frontier (skewness 1/(1+δ)).
    Embed {
        #[arg(long)]
        delta: f64,
        /// Local time at 0 that ends the Brownian path.
        #[arg(long, default_value_t = 1.0)]
        v: f64,
        /// Comma-separated increasing positive levels.
        #[arg(long, value_delimiter = ',')]
        levels: Option<Vec<f64>>,
    },
    /// Check the closed-form identities against quadrature.
    Identity,
    /// Run one registry experiment and write its JSON report.
    Verify {
        /// Experiment id (see list-experiments).
        id: String,
        #[arg(long)]
        significance: Option<f64>,
        /// Tolerance of Monte Carlo mean checks, in standard errors.
        #[arg(long)]
        tolerance_se: Option<f64>,
    },
    /// List the registry experiments and what each one checks.
    ListExperiments {
        /// Print JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
}

fn experiments_help() -> String {
    let mut s = String::from("Experiments:\n");
    for e in list_experiments() {
        s.push_str(&format!("  {:<3} {}: {}\n", e.id, e.title, e.anchor));
    }
    s
}

/// An error that should exit with status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn exit_code_for(err: &anyhow::Error) -> u8 {
    use besqlab_core::Error as E;
    if err.downcast_ref::<UsageError>().is_some() {
        return 2;
    }
    match err.downcast_ref::<E>() {
        Some(
            E::InvalidParameter { .. }
            | E::UnknownExperiment(_)
            | E::TooFewSamples { .. }
            | E::Unsupported(_)
            | E::Precondition(_),
        ) => 2,
        _ => 1,
    }
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    let file = match &cli.common.config {
        Some(p) => FileConfig::load(p).map_err(|e| UsageError(format!("{e:#}")))?,
        None => FileConfig::default(),
    };
    let mut flags = Overrides {
        dt: cli.common.dt,
        n: cli.common.n,
        seed: cli.common.seed,
        output_dir: cli.common.output_dir.clone(),
        ..Overrides::default()
    };
    match &cli.command {
        Command::SimulatePath { horizon, .. } => flags.horizon = *horizon,
        Command::Embed { levels, .. } => flags.levels = levels.clone(),
        Command::Verify {
            significance,
            tolerance_se,
            ..
        } => {
            flags.significance = *significance;
            flags.tolerance_se = *tolerance_se;
        }
        _ => {}
    }
    let cfg = RunConfig::resolve(file, flags).map_err(|e| UsageError(format!("{e:#}")))?;

    match cli.command {
        Command::Sample { law, r, delta, x, y, mu, v } => {
            commands::sample(&cfg, law, commands::LawParams { r, delta, x, y, mu, v })?;
            Ok(true)
        }
        Command::SimulatePath { delta, y, .. } => {
            commands::simulate_path(&cfg, delta, y)?;
            Ok(true)
        }
        Command::Embed { delta, v, .. } => {
            commands::embed(&cfg, delta, v)?;
            Ok(true)
        }
        Command::Identity => commands::identity(),
        Command::Verify { id, .. } => commands::verify(&cfg, &id),
        Command::ListExperiments { json } => {
            commands::list(json)?;
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let matches = Cli::command().after_help(experiments_help()).get_matches();
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
