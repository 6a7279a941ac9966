use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::Document;
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "noisy-tunnel",
    version,
    about = "Coherence and non-Markovianity of a tunneling two-level system under telegraph and white noise"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: CliCommand,
}

#[derive(Debug, Subcommand)]
pub enum CliCommand {
    /// Time series of the Bloch vector and coherence measures.
    Evolve(CommonArgs),
    /// l1 coherence on a (parameters, t) grid.
    SweepCoherence(CommonArgs),
    /// Trace-distance non-Markovianity on a parameter grid.
    SweepNonmarkov(CommonArgs),
    /// Closed-form and Monte Carlo cross-checks with residual tables.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Config file, or a CSV previously written by this tool.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output CSV path.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (falls back to NOISY_TUNNEL_WORKERS).
    #[arg(long)]
    pub workers: Option<usize>,
    /// Treat horizon warnings as numerical failures.
    #[arg(long)]
    pub strict: bool,
    /// Fixed bias; removes any epsilon axis.
    #[arg(long, allow_negative_numbers = true)]
    pub epsilon: Option<f64>,
    /// Fixed white-noise strength; removes any kappa axis.
    #[arg(long)]
    pub kappa: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub delta0: Option<f64>,
    /// Fixed telegraph amplitude; removes any delta1 axis.
    #[arg(long)]
    pub delta1: Option<f64>,
    /// Fixed switching rate; removes any nu or K axis.
    #[arg(long)]
    pub nu: Option<f64>,
    /// Comma-separated initial states (rho1, rho2, rho3).
    #[arg(long)]
    pub states: Option<String>,
    /// rk45 or expm.
    #[arg(long)]
    pub backend: Option<String>,
    /// Any config key, as `section.key=value` (`[params]` if no section).
    /// `sweep.NAME=off` drops an axis.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub n_realizations: Option<usize>,
    /// Shift generator entry `row,col[,delta]` in the Monte Carlo references.
    #[arg(long, hide = true)]
    pub perturb_generator: Option<String>,
}

impl CommonArgs {
    /// Flag values as a document to merge over the config.
    pub fn overrides(&self) -> Result<Document, CliError> {
        let mut doc = Document::new();
        if let Some(seed) = self.seed {
            doc.set("run", "seed", &seed.to_string());
        }
        if let Some(s) = &self.states {
            doc.set("run", "states", s);
        }
        if let Some(b) = &self.backend {
            doc.set("run", "backend", b);
        }
        let fixed: [(&str, Option<f64>, &[&str]); 5] = [
            ("epsilon", self.epsilon, &["epsilon"]),
            ("kappa", self.kappa, &["kappa"]),
            ("delta0", self.delta0, &[]),
            ("delta1", self.delta1, &["delta1"]),
            ("nu", self.nu, &["nu", "K"]),
        ];
        for (key, value, axes) in fixed {
            if let Some(v) = value {
                doc.set("params", key, &v.to_string());
                for axis in axes {
                    doc.set("sweep", axis, "off");
                }
            }
        }
        for item in &self.set {
            let (key, value) = item
                .split_once('=')
                .ok_or_else(|| CliError::usage(format!("--set `{item}`: expected KEY=VALUE")))?;
            let (section, key) = key.trim().split_once('.').unwrap_or(("params", key.trim()));
            doc.set(section, key, value.trim());
        }
        Ok(doc)
    }

    /// `--workers`, then `NOISY_TUNNEL_WORKERS`, then all cores.
    pub fn worker_count(&self) -> Result<Option<usize>, CliError> {
        let n = match self.workers {
            Some(n) => Some(n),
            None => match std::env::var("NOISY_TUNNEL_WORKERS") {
                Ok(v) if !v.trim().is_empty() => Some(v.trim().parse().map_err(|_| {
                    CliError::usage(format!(
                        "NOISY_TUNNEL_WORKERS = `{v}` is not a positive integer"
                    ))
                })?),
                _ => None,
            },
        };
        match n {
            Some(0) => Err(CliError::usage("worker count must be at least 1")),
            n => Ok(n),
        }
    }
}
