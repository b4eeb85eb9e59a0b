use clap::Args;
use serde::{Deserialize, Serialize};
use stochlab_core::detkernels::{
    fredholm_generating, CorrelationKernel, SpaceTimeGrid, TestFunction,
};
use stochlab_core::dyson::PointConfiguration;
use stochlab_core::numerics::QuadratureRule;

use super::{require, Context, Experiment, Report};
use crate::error::{at, RunError};
use crate::output::{Check, PlotPoint, Table};

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fredholm {
    /// Points of the initial configuration
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_values_t = [-1.0, 0.5, 1.0])]
    pub xi: Vec<f64>,
    /// Observation times, increasing
    #[arg(long, value_delimiter = ',', default_values_t = [0.4, 0.9])]
    pub times: Vec<f64>,
    /// Left ends of the test-function supports, one per time
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_values_t = [-2.0, -0.5])]
    pub lower: Vec<f64>,
    /// Right ends of the test-function supports, one per time
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_values_t = [1.0, 2.5])]
    pub upper: Vec<f64>,
    /// Amplitudes eps of chi = eps on each support, decreasing
    #[arg(long, value_delimiter = ',', default_values_t = [0.02, 0.01, 0.005])]
    pub scales: Vec<f64>,
    /// Gauss-Legendre nodes per support
    #[arg(long, default_value_t = 48)]
    pub order: usize,
    /// Allowed relative deviation of each error ratio from (scale ratio)^2
    #[arg(long, default_value_t = 0.125)]
    pub falloff_tol: f64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ScaleRow {
    pub eps: f64,
    pub psi: f64,
    /// |Psi - 1 - eps int rho_1|
    pub remainder: f64,
    /// remainder ratio against the previous scale, divided by the squared scale ratio
    pub normalized_ratio: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FredholmOutput {
    /// sum over times of int rho_1 over the support
    pub first_order: f64,
    pub rows: Vec<ScaleRow>,
}

impl Experiment for Fredholm {
    const NAME: &'static str = "fredholm";
    type Output = FredholmOutput;

    fn run(&self, _ctx: &Context) -> Result<Report<Self::Output>, RunError> {
        let m = self.times.len();
        require(m >= 1, "at least one time is required")?;
        require(
            self.lower.len() == m && self.upper.len() == m,
            "one support per time is required",
        )?;
        require(
            self.scales.len() >= 2,
            "at least two scales are needed to measure the falloff",
        )?;
        require(
            self.scales.iter().all(|&e| e > 0.0) && self.scales.windows(2).all(|w| w[0] > w[1]),
            "scales must be positive and decreasing",
        )?;
        require(self.order >= 2, "order must be at least 2")?;
        let xi = PointConfiguration::finite(self.xi.clone()).map_err(at("fredholm.xi"))?;
        let radius = self.xi.iter().fold(0.0f64, |r, x| r.max(x.abs()));
        let kernel = CorrelationKernel::k1(xi).map_err(at("fredholm.kernel"))?;
        let t_max = self.times.iter().copied().fold(0.0, f64::max);
        let window = SpaceTimeGrid::default_window(radius, t_max);
        let supports: Vec<(f64, f64)> = self
            .lower
            .iter()
            .copied()
            .zip(self.upper.iter().copied())
            .collect();
        let grid = SpaceTimeGrid::on_intervals_with_order(
            self.times.clone(),
            window,
            &supports,
            self.order,
        )
        .map_err(at("fredholm.grid"))?;
        let rule = QuadratureRule::gauss_legendre(self.order);
        let mut first_order = 0.0;
        for (&t, &(a, b)) in self.times.iter().zip(&supports) {
            let mut failure = None;
            first_order += rule.integrate(
                |x| {
                    kernel.eval(t, x, t, x).unwrap_or_else(|e| {
                        failure.get_or_insert(e);
                        f64::NAN
                    })
                },
                a,
                b,
            );
            if let Some(e) = failure {
                return Err(at("fredholm.density")(e));
            }
        }
        let mut rows: Vec<ScaleRow> = Vec::with_capacity(self.scales.len());
        for &eps in &self.scales {
            let chi = move |_: f64| eps;
            let chis: Vec<TestFunction> = supports
                .iter()
                .map(|&support| TestFunction { support, chi: &chi })
                .collect();
            let psi =
                fredholm_generating(&kernel, &grid, &chis).map_err(at("fredholm.determinant"))?;
            let remainder = (psi - 1.0 - eps * first_order).abs();
            let normalized_ratio = rows.last().map(|prev| {
                let r = prev.eps / eps;
                prev.remainder / remainder / (r * r)
            });
            rows.push(ScaleRow {
                eps,
                psi,
                remainder,
                normalized_ratio,
            });
        }
        let checks = rows
            .iter()
            .filter_map(|r| r.normalized_ratio.map(|q| (r.eps, q)))
            .map(|(eps, q)| {
                Check::at_most(
                    format!("fredholm.quadratic_falloff.eps={eps}"),
                    (q - 1.0).abs(),
                    self.falloff_tol,
                )
                .with_detail(format!("remainder ratio / scale ratio^2 = {q}"))
            })
            .collect();
        let mut table = Table::new(vec!["eps", "psi", "remainder"]);
        for r in &rows {
            table.push(vec![r.eps, r.psi, r.remainder]);
        }
        let plot = rows
            .iter()
            .map(|r| PlotPoint::exact(r.eps, r.remainder))
            .collect();
        Ok(Report::new(FredholmOutput { first_order, rows }, checks)
            .with_table(table)
            .with_plot(plot))
    }
}
