//! `alterlink` command-line pipeline: synthesize, train, resolve, benchmark,
//! risk comparison, explanations and the review service.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use commands::{cmd_explain, cmd_resolve, cmd_risk, cmd_serve, cmd_simulate, cmd_synth, cmd_train, Output};
pub use config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    MissingInput(String),
    #[error(transparent)]
    Core(#[from] alterlink::Error),
    #[error(transparent)]
    Review(#[from] alterlink_review::ReviewError),
}

impl CliError {
    pub fn category(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::MissingInput(_) => "missing-input",
            CliError::Core(e) => e.category(),
            CliError::Review(alterlink_review::ReviewError::Core(e)) => e.category(),
            CliError::Review(_) => "review",
        }
    }

    /// Single-line form used on stderr.
    pub fn line(&self) -> String {
        let msg = self.to_string().replace('\n', " ");
        format!("error[{}]: {msg}", self.category())
    }
}

#[derive(Debug, Parser)]
#[command(name = "alterlink", version, about = "Resolve ambiguous links in survey network data")]
pub struct Cli {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override the global seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Override the output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Write a synthetic dataset with ground truth.
    Synth,
    /// Train the GAT on confident links and save a checkpoint.
    Train,
    /// Resolve ambiguity cases and write the disambiguated edge list.
    Resolve,
    /// Benchmark GAT, MLP and DT on simulated ambiguity.
    Simulate,
    /// Compare risk prediction on original and resolved edge lists.
    Risk,
    /// Explain the links behind each case.
    Explain,
    /// Run the review service until interrupted.
    Serve,
}

impl Cli {
    pub fn run_config(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.paths.out = std::path::absolute(o).unwrap_or_else(|_| o.clone());
        }
        Ok(cfg)
    }
}

pub fn run(command: Command, cfg: &RunConfig) -> Result<Output, CliError> {
    match command {
        Command::Synth => cmd_synth(cfg),
        Command::Train => cmd_train(cfg),
        Command::Resolve => cmd_resolve(cfg),
        Command::Simulate => cmd_simulate(cfg),
        Command::Risk => cmd_risk(cfg),
        Command::Explain => cmd_explain(cfg),
        Command::Serve => cmd_serve(cfg),
    }
}
