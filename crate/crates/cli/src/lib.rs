//! Command-line front end for the `noisy_tunnel` library.
//!
//! Every output CSV starts with a `# `-prefixed manifest holding the fully
//! resolved configuration; passing that CSV back with `--config` reproduces
//! it byte for byte.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod args;
pub mod config;
pub mod error;
pub mod output;
pub mod run;
pub mod spec;
pub mod validate;

use std::path::PathBuf;

pub use args::{Cli, CliCommand, CommonArgs};
pub use error::{exit, CliError};

use config::Document;
use run::Columns;
use spec::{Command, SweepSpec};

/// What a successful or validation-failed run reports back to `main`.
#[derive(Debug)]
pub struct Outcome {
    pub out: PathBuf,
    pub rows: usize,
    pub report: Vec<String>,
    pub warnings: Vec<String>,
    pub exit_code: u8,
}

/// Resolves defaults, config file and flags into a spec. A manifest read
/// back from an output file is complete and replaces the defaults.
pub fn resolve(
    command: Command,
    common: &CommonArgs,
    extra: &Document,
) -> Result<SweepSpec, CliError> {
    let mut doc = spec::defaults(command);
    if let Some(path) = &common.config {
        let loaded = Document::load(path)?;
        if loaded.get("meta", "command").is_some() {
            doc = loaded;
        } else {
            spec::merge(&mut doc, &loaded);
        }
    }
    spec::merge(&mut doc, &common.overrides()?);
    spec::merge(&mut doc, extra);
    SweepSpec::from_document(command, &doc)
}

pub fn run(cli: Cli) -> Result<Outcome, CliError> {
    let (command, common, extra) = match &cli.command {
        CliCommand::Evolve(c) => (Command::Evolve, c, Document::new()),
        CliCommand::SweepCoherence(c) => (Command::SweepCoherence, c, Document::new()),
        CliCommand::SweepNonmarkov(c) => (Command::SweepNonmarkov, c, Document::new()),
        CliCommand::Validate(v) => {
            let mut extra = Document::new();
            if let Some(n) = v.n_realizations {
                extra.set("oracle", "n_realizations", &n.to_string());
            }
            if let Some(p) = &v.perturb_generator {
                extra.set("oracle", "perturb", p);
            }
            (Command::Validate, &v.common, extra)
        }
    };
    let spec = resolve(command, common, &extra)?;
    let out = common
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(command.default_output()));

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = common.worker_count()? {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::usage(format!("cannot start worker pool: {e}")))?;

    let (table, report, warnings, exit_code) = pool.install(|| -> Result<_, CliError> {
        Ok(match command {
            Command::Evolve | Command::SweepCoherence => {
                let columns = if command == Command::Evolve {
                    Columns::Full
                } else {
                    Columns::Coherence
                };
                let r = run::time_series(&spec, columns)?;
                (r.table, Vec::new(), r.warnings, exit::SUCCESS)
            }
            Command::SweepNonmarkov => {
                let r = run::nonmarkov_grid(&spec, common.strict)?;
                (r.table, Vec::new(), r.warnings, exit::SUCCESS)
            }
            Command::Validate => {
                let v = validate::validate(&spec)?;
                let code = if v.passed() {
                    exit::SUCCESS
                } else {
                    exit::VALIDATION
                };
                let report = v.checks.iter().map(ToString::to_string).collect();
                (v.residuals, report, v.warnings, code)
            }
        })
    })?;

    let rows = table.rows.len();
    output::write_atomic(&out, &table.render(&spec.to_document(rows)))?;
    Ok(Outcome {
        out,
        rows,
        report,
        warnings,
        exit_code,
    })
}
