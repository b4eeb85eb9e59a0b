//! Experiment harness: every verification suite of `stochlab-core` as a
//! seeded subcommand with JSON records, CSV tables and plot data.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::path::Path;

use clap::Parser;
use serde_json::{Map, Value};

pub use commands::{Context, Experiment, Report};
pub use config::{Cli, Command, Common};
pub use error::RunError;
pub use output::{emit_plotdata, to_json, Check, PlotPoint, Table};

use output::{ResolvedConfig, RunRecord};

/// Serialized artifacts of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub command: &'static str,
    pub json: String,
    pub table: Option<String>,
    pub plot: Option<String>,
    pub failed: Vec<Check>,
}

impl Outcome {
    pub fn pass(&self) -> bool {
        self.failed.is_empty()
    }

    pub fn exit_code(&self) -> i32 {
        if self.pass() {
            0
        } else {
            1
        }
    }

    pub fn failed_names(&self) -> Vec<&str> {
        self.failed.iter().map(|c| c.name.as_str()).collect()
    }

    pub fn record(&self) -> Value {
        serde_json::from_str(&self.json).expect("records are valid JSON")
    }

    /// Writes the requested output files.
    pub fn write_files(&self, common: &Common) -> Result<(), RunError> {
        let write = |path: &Path, text: &str| std::fs::write(path, text);
        if let Some(p) = &common.out {
            write(p, &format!("{}\n", self.json))?;
        }
        match (&common.csv, &self.table) {
            (Some(p), Some(t)) => write(p, t)?,
            (Some(_), None) => {
                return Err(RunError::usage(format!(
                    "{} produces no table",
                    self.command
                )))
            }
            _ => {}
        }
        match (&common.plot, &self.plot) {
            (Some(p), Some(t)) => write(p, t)?,
            (Some(_), None) => {
                return Err(RunError::usage(format!(
                    "{} produces no plot data",
                    self.command
                )))
            }
            _ => {}
        }
        Ok(())
    }
}

fn perform<E: Experiment>(
    params: &E,
    common: &Common,
    file: Option<&Map<String, Value>>,
) -> Result<Outcome, RunError> {
    let config: ResolvedConfig<E> = config::resolve(params, common, file)?;
    let ctx = Context::new(&config);
    let (report, checks) = match config.params.run(&ctx) {
        Ok(mut report) => {
            let checks = std::mem::take(&mut report.checks);
            (Some(report), checks)
        }
        Err(RunError::Failed { check, message }) => {
            (None, vec![Check::holds(check, false, message)])
        }
        Err(e) => return Err(e),
    };
    let failed: Vec<Check> = checks.iter().filter(|c| !c.pass).cloned().collect();
    let pass = failed.is_empty();
    let (json, table, plot) = match &report {
        Some(r) => (
            to_json(&RunRecord {
                command: E::NAME,
                config: &config,
                result: &r.result,
                checks: &checks,
                pass,
            })?,
            r.table.as_ref().map(Table::to_csv).transpose()?,
            r.plot.as_deref().map(emit_plotdata).transpose()?,
        ),
        None => (
            to_json(&RunRecord {
                command: E::NAME,
                config: &config,
                result: &Map::new(),
                checks: &checks,
                pass,
            })?,
            None,
            None,
        ),
    };
    Ok(Outcome {
        command: E::NAME,
        json,
        table,
        plot,
        failed,
    })
}

/// Resolves the configuration and runs the selected suite.
pub fn execute(cli: &Cli) -> Result<Outcome, RunError> {
    let file = cli
        .common
        .config
        .as_deref()
        .map(config::load_overrides)
        .transpose()?;
    let file = file.as_ref();
    let common = &cli.common;
    match &cli.command {
        Command::BesselDensity(p) => perform(p, common, file),
        Command::Cardy(p) => perform(p, common, file),
        Command::SleTrace(p) => perform(p, common, file),
        Command::SleSwallow(p) => perform(p, common, file),
        Command::DysonCompare(p) => perform(p, common, file),
        Command::KernelTable(p) => perform(p, common, file),
        Command::RelaxCurve(p) => perform(p, common, file),
        Command::Fredholm(p) => perform(p, common, file),
        Command::Extremes(p) => perform(p, common, file),
        Command::Charpoly(p) => perform(p, common, file),
        Command::Fomin(p) => perform(p, common, file),
    }
}

/// Parses an argument list (without the program name) and runs it.
pub fn run_args<I, S>(args: I) -> Result<Outcome, RunError>
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let argv = std::iter::once(std::ffi::OsString::from("stochlab"))
        .chain(args.into_iter().map(Into::into));
    let cli = Cli::try_parse_from(argv).map_err(|e| RunError::usage(e.to_string()))?;
    execute(&cli)
}
