//! Command-line surface and configuration resolution.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::{de::DeserializeOwned, Serialize};
use serde_json::{Map, Value};
use stochlab_core::Sharding;

use crate::commands::{
    bessel_density::BesselDensity, cardy::Cardy, charpoly::Charpoly, dyson_compare::DysonCompare,
    extremes::Extremes, fomin::Fomin, fredholm::Fredholm, kernel_table::KernelTable,
    relax_curve::RelaxCurve, sle_swallow::SleSwallow, sle_trace::SleTrace,
};
use crate::error::RunError;
use crate::output::ResolvedConfig;

#[derive(Debug, Clone, Parser)]
#[command(
    name = "stochlab",
    version,
    about = "Seeded verification suites for noncolliding diffusions, SLE and determinantal kernels"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

/// Options shared by every subcommand.
#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Master seed of every random stream
    #[arg(long, global = true, env = "STOCHLAB_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; results do not depend on this
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub workers: u64,
    /// Independent random streams a Monte Carlo run is split into
    #[arg(long, global = true, default_value_t = Sharding::DEFAULT_SHARDS, value_parser = clap::value_parser!(u32).range(1..))]
    pub shards: u32,
    /// JSON file whose keys override the flags
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Also write the JSON record here
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Write the run's table (trace, kernel values, ...) as CSV here
    #[arg(long, global = true)]
    pub csv: Option<PathBuf>,
    /// Write plot data (x, y, yerr) as CSV here
    #[arg(long, global = true)]
    pub plot: Option<PathBuf>,
}

impl Default for Common {
    fn default() -> Self {
        Self {
            seed: 0,
            workers: 1,
            shards: Sharding::DEFAULT_SHARDS,
            config: None,
            out: None,
            csv: None,
            plot: None,
        }
    }
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Bessel transition density: normalization and closed forms
    BesselDensity(BesselDensity),
    /// Simultaneous-hitting probability against flow-coupling Monte Carlo
    Cardy(Cardy),
    /// One SLE trace with its phase report
    SleTrace(SleTrace),
    /// Swallowing frequencies of test points
    SleSwallow(SleSwallow),
    /// Eigenvalues of Hermitian Brownian motion against the Dyson SDE
    DysonCompare(DysonCompare),
    /// Correlation kernel values with mass and agreement checks
    KernelTable(KernelTable),
    /// Relaxation of the lattice kernel to the extended sine kernel
    RelaxCurve(RelaxCurve),
    /// Fredholm determinant expansion under test-function scaling
    Fredholm(Fredholm),
    /// Maximum of Bessel bridges: series against Monte Carlo, moments
    Extremes(Extremes),
    /// Averaged characteristic polynomials of GUE
    Charpoly(Charpoly),
    /// Fomin's determinant against truncated loop-erased enumeration
    Fomin(Fomin),
}

/// Reads a JSON object of overrides. Either flat parameter keys or the
/// `config` object of an earlier run record are accepted.
pub fn load_overrides(path: &std::path::Path) -> Result<Map<String, Value>, RunError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| RunError::usage(format!("cannot read {}: {e}", path.display())))?;
    match serde_json::from_str(&text) {
        Ok(Value::Object(map)) => Ok(map),
        Ok(_) => Err(RunError::usage(format!(
            "{} must contain a JSON object",
            path.display()
        ))),
        Err(e) => Err(RunError::usage(format!("{}: {e}", path.display()))),
    }
}

fn integer(key: &str, v: &Value, min: u64) -> Result<u64, RunError> {
    v.as_u64()
        .filter(|&n| n >= min)
        .ok_or_else(|| RunError::usage(format!("{key} must be an integer >= {min}")))
}

/// Merges flags with file overrides; unknown keys are rejected.
pub fn resolve<P>(
    params: &P,
    common: &Common,
    file: Option<&Map<String, Value>>,
) -> Result<ResolvedConfig<P>, RunError>
where
    P: Serialize + DeserializeOwned,
{
    let mut seed = common.seed;
    let mut workers = common.workers;
    let mut shards = common.shards;
    let mut merged = serde_json::to_value(params)?;
    if let Some(file) = file {
        let obj = merged
            .as_object_mut()
            .expect("parameters serialize to an object");
        let mut apply = |key: &String, value: &Value| -> Result<(), RunError> {
            match key.as_str() {
                "seed" => seed = integer(key, value, 0)?,
                "workers" => workers = integer(key, value, 1)?,
                "shards" => {
                    shards = u32::try_from(integer(key, value, 1)?)
                        .map_err(|_| RunError::usage("shards out of range"))?
                }
                _ => {
                    obj.insert(key.clone(), value.clone());
                }
            }
            Ok(())
        };
        for (key, value) in file {
            if key == "params" {
                let Value::Object(inner) = value else {
                    return Err(RunError::usage("\"params\" must be an object"));
                };
                for (k, v) in inner {
                    if matches!(k.as_str(), "seed" | "workers" | "shards") {
                        return Err(RunError::usage(format!("{k} belongs outside \"params\"")));
                    }
                    apply(k, v)?;
                }
            } else {
                apply(key, value)?;
            }
        }
    }
    let params = serde_json::from_value(merged)
        .map_err(|e| RunError::usage(format!("configuration: {e}")))?;
    Ok(ResolvedConfig {
        seed,
        workers: workers as usize,
        shards,
        params,
    })
}
