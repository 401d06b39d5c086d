//! `fraudlab`: generate synthetic applicant data, train and evaluate
//! per-scenario fraud models, explain them, and run the full comparison.
//!
//! Exit codes: 0 success, 1 runtime or data error, 2 usage or configuration
//! error.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fraudlab_core::dataset::Scenario;
use fraudlab_core::{Error, Result};
use toml::Value;

#[derive(Debug, Parser)]
#[command(name = "fraudlab", version, about = "Origination fraud models over alternative data sources")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic dataset CSV and its schema file.
    Generate(Common),
    /// Grid-search and fit one model per scenario.
    Train(Common),
    /// Re-score saved models on the test segment under the configured costs.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Model files; defaults to the configured scenarios' models in the output directory.
        #[arg(long = "model")]
        models: Vec<PathBuf>,
    },
    /// SHAP attributions for selected rows, or global importance.
    Explain {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: PathBuf,
        /// `all` for global importance, or comma-separated row indices.
        #[arg(long, default_value = "all")]
        rows: String,
        /// Which segment the rows are drawn from.
        #[arg(long, value_enum, default_value_t = commands::Segment::Test)]
        segment: commands::Segment,
    },
    /// Train, evaluate and explain every configured scenario and write the report.
    Compare(Common),
}

#[derive(Debug, Args)]
struct Common {
    #[arg(long, env = "FRAUDLAB_CONFIG")]
    config: Option<PathBuf>,
    /// Master seed (`generate`: the noise seed).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on this.
    #[arg(long)]
    threads: Option<usize>,
    /// Comma-separated scenario acronyms, e.g. `S+C,C`.
    #[arg(long)]
    scenarios: Option<String>,
    #[arg(long)]
    acl: Option<f64>,
    #[arg(long)]
    clv: Option<f64>,
    #[arg(long = "churn-prob")]
    churn_prob: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Config overrides, e.g. `experiment.n_bootstrap=50`.
    #[arg(value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl Common {
    fn load(&self, generate: bool) -> Result<config::CliConfig> {
        let path = self
            .config
            .as_ref()
            .ok_or_else(|| Error::Config("no config file: pass --config or set FRAUDLAB_CONFIG".into()))?;
        let table = config::read_table(path)?;

        let mut overrides = self
            .overrides
            .iter()
            .map(|o| config::parse_override(o))
            .collect::<Result<Vec<_>>>()?;
        let mut flag = |key: &str, value: Value| {
            overrides.push((key.split('.').map(str::to_string).collect(), value));
        };
        if let Some(seed) = self.seed {
            let seed = i64::try_from(seed).map_err(|_| Error::Argument("--seed must be below 2^63".into()))?;
            let key = if generate { "synth.noise_seed" } else { "experiment.master_seed" };
            flag(key, Value::Integer(seed));
        }
        if let Some(list) = &self.scenarios {
            let parsed = list
                .split(',')
                .map(|s| s.trim().parse::<Scenario>())
                .collect::<Result<Vec<_>>>()?;
            flag(
                "experiment.scenarios",
                Value::Array(parsed.iter().map(|s| Value::String(s.acronym().into())).collect()),
            );
        }
        for (key, v) in [
            ("experiment.costs.acl", self.acl),
            ("experiment.costs.clv", self.clv),
            ("experiment.costs.churn_given_reject", self.churn_prob),
        ] {
            if let Some(v) = v {
                flag(key, Value::Float(v));
            }
        }
        if let Some(out) = &self.out {
            let out = out.to_string_lossy().into_owned();
            if generate {
                flag("data.csv", Value::String(format!("{out}/dataset.csv")));
                flag("data.schema", Value::String(format!("{out}/schema.toml")));
            } else {
                flag("experiment.output_dir", Value::String(out));
            }
        }
        config::resolve(table, &overrides)
    }

    fn init_threads(&self) -> Result<()> {
        if let Some(n) = self.threads {
            if n == 0 {
                return Err(Error::Argument("--threads must be at least 1".into()));
            }
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| Error::Argument(format!("cannot start {n} worker threads: {e}")))?;
        }
        Ok(())
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate(c) => {
            c.init_threads()?;
            commands::generate(&c.load(true)?)
        }
        Command::Train(c) => {
            c.init_threads()?;
            commands::train(&c.load(false)?)
        }
        Command::Evaluate { common, models } => {
            common.init_threads()?;
            commands::evaluate(&common.load(false)?, &models)
        }
        Command::Explain { common, model, rows, segment } => {
            common.init_threads()?;
            let rows = commands::RowSelector::parse(&rows)?;
            commands::explain(&common.load(false)?, &model, &rows, segment)
        }
        Command::Compare(c) => {
            c.init_threads()?;
            commands::compare(&c.load(false)?)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let mut msg = e.to_string();
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                if !msg.contains(&s.to_string()) {
                    msg.push_str(&format!(": {s}"));
                }
                source = s.source();
            }
            eprintln!("fraudlab: {msg}");
            ExitCode::from(if e.is_usage() { 2 } else { 1 })
        }
    }
}
