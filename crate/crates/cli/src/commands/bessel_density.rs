use clap::Args;
use serde::{Deserialize, Serialize};
use stochlab_core::bessel::{bessel_cdf, bessel_density, density_d1, density_d3, BesselSpec};

use super::{linspace, require, Context, Experiment, Report};
use crate::error::{at, RunError};
use crate::output::{Check, PlotPoint, Table};

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BesselDensity {
    /// Dimension D
    #[arg(long = "D", default_value_t = 3.0)]
    #[serde(rename = "D")]
    pub dimension: f64,
    /// Starting point x >= 0
    #[arg(long, default_value_t = 1.0)]
    pub x: f64,
    /// Time t > 0
    #[arg(long, default_value_t = 1.0)]
    pub t: f64,
    /// Rows of the density table
    #[arg(long, default_value_t = 200)]
    pub points: usize,
    /// Tolerance on |1 - int p_t(y|x) dy|
    #[arg(long, default_value_t = 1e-10)]
    pub norm_tol: f64,
    /// Relative tolerance against the D = 1 and D = 3 closed forms
    #[arg(long, default_value_t = 1e-12)]
    pub closed_tol: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClosedForm {
    pub reference: &'static str,
    pub grid: usize,
    pub max_relative_deviation: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BesselDensityOutput {
    pub nu: f64,
    pub total_mass: f64,
    pub normalization_error: f64,
    pub closed_form: Option<ClosedForm>,
}

/// Largest |a - b| / max(|b|, 1e-3) over a 10 x 10 grid of (x, y).
fn closed_form_deviation(
    d: f64,
    t: f64,
    reference: fn(f64, f64, f64) -> f64,
) -> Result<f64, RunError> {
    let mut worst: f64 = 0.0;
    for i in 0..10 {
        for j in 0..10 {
            let x = 0.1 + 0.45 * i as f64;
            let y = 0.05 + 0.5 * j as f64;
            let spec = BesselSpec::new(d, x).map_err(at("bessel-density.closed_form"))?;
            let a = bessel_density(&spec, t, y).map_err(at("bessel-density.closed_form"))?;
            let b = reference(t, x, y);
            worst = worst.max((a - b).abs() / b.abs().max(1e-3));
        }
    }
    Ok(worst)
}

impl Experiment for BesselDensity {
    const NAME: &'static str = "bessel-density";
    type Output = BesselDensityOutput;

    fn run(&self, _ctx: &Context) -> Result<Report<Self::Output>, RunError> {
        require(self.points >= 2, "points must be at least 2")?;
        require(self.t > 0.0, "t must be positive")?;
        let spec = BesselSpec::new(self.dimension, self.x).map_err(at("bessel-density.spec"))?;
        let total_mass = bessel_cdf(&spec, self.t, self.x + 12.0 * self.t.sqrt())
            .map_err(at("bessel-density.normalization"))?;
        let normalization_error = (total_mass - 1.0).abs();
        let mut checks = vec![Check::at_most(
            "bessel-density.normalization",
            normalization_error,
            self.norm_tol,
        )];
        let reference = match self.dimension {
            3.0 => Some(("D=3", density_d3 as fn(f64, f64, f64) -> f64)),
            1.0 => Some(("D=1", density_d1 as fn(f64, f64, f64) -> f64)),
            _ => None,
        };
        let closed_form = match reference {
            Some((name, f)) => {
                let dev = closed_form_deviation(self.dimension, self.t, f)?;
                checks.push(Check::at_most(
                    "bessel-density.closed_form",
                    dev,
                    self.closed_tol,
                ));
                Some(ClosedForm {
                    reference: name,
                    grid: 100,
                    max_relative_deviation: dev,
                })
            }
            None => None,
        };
        let mut table = Table::new(vec!["y", "density", "cdf"]);
        let mut plot = Vec::with_capacity(self.points);
        for y in linspace(0.0, self.x + 8.0 * self.t.sqrt(), self.points) {
            let p = bessel_density(&spec, self.t, y).map_err(at("bessel-density.table"))?;
            let c = bessel_cdf(&spec, self.t, y).map_err(at("bessel-density.table"))?;
            table.push(vec![y, p, c]);
            plot.push(PlotPoint::exact(y, p));
        }
        Ok(Report::new(
            BesselDensityOutput {
                nu: spec.nu,
                total_mass,
                normalization_error,
                closed_form,
            },
            checks,
        )
        .with_table(table)
        .with_plot(plot))
    }
}
