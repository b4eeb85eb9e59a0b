//! One module per subcommand.

pub mod bessel_density;
pub mod cardy;
pub mod charpoly;
pub mod dyson_compare;
pub mod extremes;
pub mod fomin;
pub mod fredholm;
pub mod kernel_table;
pub mod relax_curve;
pub mod sle_swallow;
pub mod sle_trace;

use serde::{de::DeserializeOwned, Serialize};
use stochlab_core::numerics::rng::stream_id;
use stochlab_core::{RngStream, Sharding};

use crate::error::RunError;
use crate::output::{Check, PlotPoint, ResolvedConfig, Table};

/// Seed and stream layout of a run.
#[derive(Debug, Clone, Copy)]
pub struct Context {
    pub seed: u64,
    pub sharding: Sharding,
}

impl Context {
    pub fn new<P>(config: &ResolvedConfig<P>) -> Self {
        Self {
            seed: config.seed,
            sharding: Sharding::new(config.seed)
                .with_shards(config.shards)
                .with_workers(config.workers),
        }
    }

    /// A single stream for sequential work outside the sharded runs.
    pub fn stream(&self, family: u32, index: u32) -> RngStream {
        RngStream::new(self.seed, stream_id(family, index))
    }
}

/// What a suite hands back before serialization.
#[derive(Debug, Clone)]
pub struct Report<R> {
    pub result: R,
    pub checks: Vec<Check>,
    pub table: Option<Table>,
    pub plot: Option<Vec<PlotPoint>>,
}

impl<R> Report<R> {
    pub fn new(result: R, checks: Vec<Check>) -> Self {
        Self {
            result,
            checks,
            table: None,
            plot: None,
        }
    }

    pub fn with_table(mut self, table: Table) -> Self {
        self.table = Some(table);
        self
    }

    pub fn with_plot(mut self, plot: Vec<PlotPoint>) -> Self {
        self.plot = Some(plot);
        self
    }
}

/// A subcommand: its parameters are both clap flags and serde fields.
pub trait Experiment: Serialize + DeserializeOwned {
    const NAME: &'static str;
    type Output: Serialize;

    fn run(&self, ctx: &Context) -> Result<Report<Self::Output>, RunError>;
}

pub(crate) fn require(cond: bool, msg: impl Into<String>) -> Result<(), RunError> {
    if cond {
        Ok(())
    } else {
        Err(RunError::usage(msg))
    }
}

/// Standard error of a Bernoulli frequency.
pub(crate) fn binomial_stderr(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

/// n points from lo to hi inclusive.
pub(crate) fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}
