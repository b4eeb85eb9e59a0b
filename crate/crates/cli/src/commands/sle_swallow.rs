use clap::Args;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use stochlab_core::sle::{phase, swallow_refinement, Phase, SwallowRow, DEFAULT_EPS_SWALLOW};

use super::{require, Context, Experiment, Report};
use crate::error::{at, RunError};
use crate::output::{Check, Table};

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SleSwallow {
    #[arg(long = "D", default_value_t = 3.0)]
    #[serde(rename = "D")]
    pub dimension: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub dt: f64,
    #[arg(long, default_value_t = 1.0)]
    pub horizon: f64,
    /// Real parts of the test points
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_values_t = [0.5])]
    pub re: Vec<f64>,
    /// Imaginary parts of the test points
    #[arg(long, value_delimiter = ',', default_values_t = [0.5])]
    pub im: Vec<f64>,
    /// Sampled chains
    #[arg(long, default_value_t = 100)]
    pub chains: usize,
    #[arg(long, default_value_t = DEFAULT_EPS_SWALLOW)]
    pub eps_swallow: f64,
    /// Frequency bound for simple phases (strict)
    #[arg(long, default_value_t = 0.01)]
    pub max_frequency: f64,
}

/// What the phase implies for a fixed test point: rarely swallowed for simple
/// curves, swallowed with positive probability when the curve touches itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Expectation {
    Below,
    Positive,
    Reported,
}

#[derive(Debug, Clone, Serialize)]
pub struct SleSwallowOutput {
    pub phase: Phase,
    pub expectation: Expectation,
    pub rows: Vec<SwallowRow>,
    /// Same statistics with dt halved
    pub refined: Vec<SwallowRow>,
}

impl Experiment for SleSwallow {
    const NAME: &'static str = "sle-swallow";
    type Output = SleSwallowOutput;

    fn run(&self, ctx: &Context) -> Result<Report<Self::Output>, RunError> {
        require(
            self.re.len() == self.im.len(),
            "re and im need the same length",
        )?;
        require(!self.re.is_empty(), "at least one test point is required")?;
        require(self.chains >= 1, "chains must be at least 1")?;
        let phase = phase(self.dimension).map_err(at("sle-swallow.phase"))?;
        let points: Vec<Complex64> = self
            .re
            .iter()
            .zip(&self.im)
            .map(|(&r, &i)| Complex64::new(r, i))
            .collect();
        let [rows, refined] = swallow_refinement(
            self.dimension,
            self.dt,
            self.horizon,
            &points,
            self.chains,
            self.eps_swallow,
            &ctx.sharding,
        )
        .map_err(at("sle-swallow.statistics"))?;
        let expectation = match phase {
            Phase::Simple => Expectation::Below,
            Phase::SelfIntersecting => Expectation::Positive,
            Phase::SpaceFilling => Expectation::Reported,
        };
        let checks = rows
            .iter()
            .enumerate()
            .filter_map(|(k, r)| match expectation {
                Expectation::Below => Some(Check::below(
                    format!("sle-swallow.z{k}.below"),
                    r.frequency,
                    self.max_frequency,
                )),
                Expectation::Positive => Some(Check::above(
                    format!("sle-swallow.z{k}.positive"),
                    r.frequency,
                    0.0,
                )),
                Expectation::Reported => None,
            })
            .collect();
        let mut table = Table::new(vec!["dt", "re", "im", "frequency", "stderr"]);
        for (dt, rows) in [(self.dt, &rows), (self.dt / 2.0, &refined)] {
            for r in rows {
                table.push(vec![dt, r.z[0], r.z[1], r.frequency, r.stderr]);
            }
        }
        Ok(Report::new(
            SleSwallowOutput {
                phase,
                expectation,
                rows,
                refined,
            },
            checks,
        )
        .with_table(table))
    }
}
