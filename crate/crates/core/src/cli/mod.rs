//! The `icegnn` command-line workflow: generate, train, evaluate, benchmark.

mod commands;
mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use commands::{
    cmd_benchmark, cmd_evaluate, cmd_generate, cmd_train, load_model, metrics_table, timing_table,
    Artifacts, GenerateSummary, TrainSummary,
};
pub use config::{Overrides, RunConfig};

use crate::error::{Error, Result};
use crate::gnn::ModelKind;
use crate::icesim::ScenarioKind;

#[derive(Debug, Parser)]
#[command(name = "icegnn", version, about = "Graph neural network emulators for ice-flow simulations")]
pub struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory for all artifacts.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true)]
    pub model: Option<ModelKind>,
    /// Scenario preset, used when no config file is given.
    #[arg(long, global = true, value_parser = parse_scenario)]
    pub scenario: Option<ScenarioKind>,
    #[arg(long, global = true)]
    pub epochs: Option<usize>,
    /// Score every node instead of ice-covered nodes only.
    #[arg(long, global = true)]
    pub all_nodes: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Run the oracle sweep and write trajectories and the dataset.
    Generate,
    /// Train one model on the generated dataset.
    Train,
    /// Score trained models on the held-out parameters.
    Evaluate,
    /// Time the oracle against the trained models.
    Benchmark,
    /// Print the effective configuration.
    ShowConfig,
}

fn parse_scenario(s: &str) -> std::result::Result<ScenarioKind, String> {
    match s {
        "helheim" => Ok(ScenarioKind::Helheim),
        "pig" => Ok(ScenarioKind::Pig),
        _ => Err(format!("unknown scenario `{s}` (expected helheim or pig)")),
    }
}

impl Cli {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            out: self.out.clone(),
            threads: self.threads,
            model: self.model,
            scenario: self.scenario,
            epochs: self.epochs,
            all_nodes: self.all_nodes,
        }
    }

    /// Effective configuration: the file (or scenario preset) plus flags.
    pub fn run_config(&self) -> Result<RunConfig> {
        let mut config = match (&self.config, self.scenario) {
            (Some(path), _) => RunConfig::load(path)?,
            (None, Some(kind)) => RunConfig::preset(kind),
            (None, None) => {
                return Err(Error::InvalidConfig(
                    "give --config or --scenario".into(),
                ))
            }
        };
        config.apply(&self.overrides());
        config.validate()?;
        Ok(config)
    }
}

/// Runs one command and prints its summary.
pub fn run(cli: &Cli) -> Result<()> {
    let config = cli.run_config()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    pool.install(|| dispatch(cli, &config))
}

fn dispatch(cli: &Cli, config: &RunConfig) -> Result<()> {
    match cli.command {
        Command::Generate => {
            let s = cmd_generate(config)?;
            println!("scenarios  {}", s.n_scenarios);
            println!("nodes      {}", s.n_nodes);
            println!("samples    {}", s.n_samples);
            println!("dataset    {}", s.dataset.display());
        }
        Command::Train => {
            let every = (config.train.epochs / 20).max(1);
            let s = cmd_train(config, |r| {
                if r.epoch % every == 0 || r.epoch == config.train.epochs {
                    match r.val_loss {
                        Some(v) => eprintln!("epoch {:>4}  train {:.6e}  val {:.6e}", r.epoch, r.train_loss, v),
                        None => eprintln!("epoch {:>4}  train {:.6e}", r.epoch, r.train_loss),
                    }
                }
            })?;
            println!("model       {}", s.kind);
            println!("parameters  {}", s.n_parameters);
            println!("samples     {} train / {} val", s.n_train, s.n_val);
            println!("best epoch  {} (loss {:.6e})", s.history.best_epoch, s.history.best_loss);
            println!("checkpoint  {}", s.checkpoint.display());
        }
        Command::Evaluate => {
            let reports = cmd_evaluate(config, cli.model)?;
            print!("{}", metrics_table(&reports));
        }
        Command::Benchmark => {
            let report = cmd_benchmark(config, cli.model)?;
            print!("{}", timing_table(&report));
        }
        Command::ShowConfig => print!("{}", config.to_toml()?),
    }
    Ok(())
}

/// Parses `args` and runs; returns the process exit code (0 ok, 1 usage,
/// 2 data error, 3 numeric failure).
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::InvalidConfig(_) | Error::TomlDe(_) => 1,
                other => other.exit_code(),
            }
        }
    }
}
