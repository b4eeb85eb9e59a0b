use clap::Args;
use serde::{Deserialize, Serialize};
use stochlab_core::bessel::{bessel_density, BesselSpec};
use stochlab_core::dyson::{dyson_endpoint, hermitian_bm_eigenvalues_at, WeylPoint};
use stochlab_core::mc::family;
use stochlab_core::stats::{ks_statistic_density, ks_two_sample_vectors};

use super::{require, Context, Experiment, Report};
use crate::error::{at, RunError};
use crate::output::{Check, Table};

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DysonCompare {
    /// Number of particles
    #[arg(long = "N", default_value_t = 2)]
    #[serde(rename = "N")]
    pub n: usize,
    #[arg(long, default_value_t = 1.0)]
    pub t: f64,
    /// Spacing of the centred starting configuration
    #[arg(long, default_value_t = 1.0)]
    pub spacing: f64,
    /// Samples on each side
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    /// Euler step of the Dyson SDE
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    /// Level of the coordinatewise two-sample test
    #[arg(long, default_value_t = 0.01)]
    pub alpha: f64,
    /// Kolmogorov distance bound for the N = 2 gap against BES(3)
    #[arg(long, default_value_t = 0.015)]
    pub bes3_max: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GapTest {
    /// gap / sqrt(2) of the Dyson SDE against the BES(3) density
    pub sde_distance: f64,
    /// the same for the matrix eigenvalues
    pub matrix_distance: f64,
    pub start: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DysonCompareOutput {
    pub start: Vec<f64>,
    /// per-coordinate two-sample statistics
    pub statistics: Vec<f64>,
    /// largest statistic over its Bonferroni critical value
    pub ratio: f64,
    pub gap: Option<GapTest>,
}

impl Experiment for DysonCompare {
    const NAME: &'static str = "dyson-compare";
    type Output = DysonCompareOutput;

    fn run(&self, ctx: &Context) -> Result<Report<Self::Output>, RunError> {
        require(self.n >= 1, "N must be at least 1")?;
        require(self.samples >= 2, "samples must be at least 2")?;
        require(
            self.alpha > 0.0 && self.alpha < 1.0,
            "alpha must lie in (0, 1)",
        )?;
        require(self.spacing > 0.0, "spacing must be positive")?;
        let x = WeylPoint::spaced(self.n, self.spacing).map_err(at("dyson-compare.start"))?;
        let matrix: Vec<Vec<f64>> = ctx
            .sharding
            .samples(family::HERMITIAN_BM, self.samples, |rng| {
                hermitian_bm_eigenvalues_at(&x, self.t, rng)
            })
            .into_iter()
            .collect::<Result<_, _>>()
            .map_err(at("dyson-compare.matrix"))?;
        let sde: Vec<Vec<f64>> = ctx
            .sharding
            .samples(family::DYSON, self.samples, |rng| {
                dyson_endpoint(2.0, &x, self.dt, self.t, rng)
            })
            .into_iter()
            .collect::<Result<_, _>>()
            .map_err(at("dyson-compare.sde"))?;
        let (ratio, statistics) = ks_two_sample_vectors(&matrix, &sde, self.alpha);
        let mut checks = vec![
            Check::at_most("dyson-compare.marginals", ratio, 1.0).with_detail(format!(
                "coordinatewise two-sample KS at level {}",
                self.alpha
            )),
        ];
        let gap = if self.n == 2 {
            let start = (x[1] - x[0]) / 2f64.sqrt();
            let spec = BesselSpec::new(3.0, start).map_err(at("dyson-compare.gap"))?;
            let density = |r: f64| bessel_density(&spec, self.t, r).unwrap_or(0.0);
            let gaps = |v: &[Vec<f64>]| {
                v.iter()
                    .map(|p| (p[1] - p[0]) / 2f64.sqrt())
                    .collect::<Vec<_>>()
            };
            let sde_distance = ks_statistic_density(&gaps(&sde), 0.0, density);
            let matrix_distance = ks_statistic_density(&gaps(&matrix), 0.0, density);
            checks.push(Check::below(
                "dyson-compare.bes3_sde",
                sde_distance,
                self.bes3_max,
            ));
            checks.push(Check::below(
                "dyson-compare.bes3_matrix",
                matrix_distance,
                self.bes3_max,
            ));
            Some(GapTest {
                sde_distance,
                matrix_distance,
                start,
            })
        } else {
            None
        };
        let mut table = Table::new(vec!["coordinate", "ks_statistic"]);
        for (k, s) in statistics.iter().enumerate() {
            table.push(vec![k as f64, *s]);
        }
        Ok(Report::new(
            DysonCompareOutput {
                start: x.to_vec(),
                statistics,
                ratio,
                gap,
            },
            checks,
        )
        .with_table(table))
    }
}
