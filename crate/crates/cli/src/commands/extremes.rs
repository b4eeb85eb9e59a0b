use std::f64::consts::PI;

use clap::Args;
use serde::{Deserialize, Serialize};
use stochlab_core::extremes::{
    bridge_maxima, default_n_max, max_cdf_h1, max_cdf_hn, max_cdf_table, moment_report, MaxCdfRow,
    MomentReport,
};

use super::{require, Context, Experiment, Report};
use crate::error::{at, RunError};
use crate::output::{Check, PlotPoint, Table};

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Extremes {
    /// Levels h of P(H_1 <= h)
    #[arg(long, value_delimiter = ',', default_values_t = [0.8, 1.0, 1.5, 2.0])]
    pub levels: Vec<f64>,
    /// Bessel bridges sampled
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    /// Grid step of the bridges; must divide 1
    #[arg(long, default_value_t = 1e-4)]
    pub dt: f64,
    #[arg(long, default_value_t = 3.0)]
    pub sigmas: f64,
    /// Tolerance on the three evaluations of E[H_1^2] = pi^2/6
    #[arg(long, default_value_t = 1e-4)]
    pub moment_tol: f64,
    /// Tolerance on the N = 1 reduction of the determinant formula
    #[arg(long, default_value_t = 1e-12)]
    pub reduction_tol: f64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ReductionRow {
    pub h: f64,
    pub single: f64,
    pub determinant: f64,
    /// P(H_2 <= h), which must not exceed P(H_1 <= h)
    pub two_paths: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExtremesOutput {
    pub cdf: Vec<MaxCdfRow>,
    pub moment: MomentReport,
    pub moment_exact: f64,
    pub reduction: Vec<ReductionRow>,
}

impl Experiment for Extremes {
    const NAME: &'static str = "extremes";
    type Output = ExtremesOutput;

    fn run(&self, ctx: &Context) -> Result<Report<Self::Output>, RunError> {
        require(!self.levels.is_empty(), "at least one level is required")?;
        require(
            self.levels.iter().all(|&h| h > 0.0),
            "levels must be positive",
        )?;
        require(self.samples >= 2, "samples must be at least 2")?;
        let maxima =
            bridge_maxima(self.dt, self.samples, &ctx.sharding).map_err(at("extremes.bridges"))?;
        let cdf = max_cdf_table(&self.levels, &maxima, self.dt).map_err(at("extremes.cdf"))?;
        let mut checks: Vec<Check> = cdf
            .iter()
            .map(|r| {
                Check::at_most(
                    format!("extremes.cdf.h={}", r.h),
                    (r.cdf_exact - r.cdf_mc).abs(),
                    self.sigmas * r.stderr + r.bias_margin,
                )
            })
            .collect();
        let moment = moment_report(2.0, Some(&maxima)).map_err(at("extremes.moment"))?;
        let moment_exact = PI * PI / 6.0;
        checks.push(Check::at_most(
            "extremes.moment.stieltjes",
            (moment.stieltjes - moment_exact).abs(),
            self.moment_tol,
        ));
        checks.push(Check::at_most(
            "extremes.moment.theta",
            (moment.theta_form - moment_exact).abs(),
            self.moment_tol,
        ));
        if let Some(z) = moment.zeta_form {
            checks.push(Check::at_most(
                "extremes.moment.zeta",
                (z - moment_exact).abs(),
                self.moment_tol,
            ));
            checks.push(Check::at_most(
                "extremes.moment.two_forms",
                (z - moment.theta_form).abs(),
                self.moment_tol,
            ));
        }
        let mut reduction = Vec::with_capacity(self.levels.len());
        for &h in &self.levels {
            let n_max = default_n_max(h);
            let single = max_cdf_h1(h, n_max)
                .map_err(at("extremes.reduction"))?
                .value;
            let determinant = max_cdf_hn(1, h, n_max)
                .map_err(at("extremes.reduction"))?
                .value;
            checks.push(Check::at_most(
                format!("extremes.reduction.h={h}"),
                (single - determinant).abs(),
                self.reduction_tol,
            ));
            let two_paths = max_cdf_hn(2, h, n_max).ok().map(|v| v.value);
            reduction.push(ReductionRow {
                h,
                single,
                determinant,
                two_paths,
            });
        }
        let mut table = Table::new(vec!["h", "cdf_exact", "cdf_mc", "stderr", "bias_margin"]);
        for r in &cdf {
            table.push(vec![r.h, r.cdf_exact, r.cdf_mc, r.stderr, r.bias_margin]);
        }
        let plot = cdf
            .iter()
            .map(|r| PlotPoint {
                x: r.h,
                y: r.cdf_mc,
                yerr: r.stderr,
            })
            .collect();
        Ok(Report::new(
            ExtremesOutput {
                cdf,
                moment,
                moment_exact,
                reduction,
            },
            checks,
        )
        .with_table(table)
        .with_plot(plot))
    }
}
