use clap::Args;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use stochlab_core::mc::family;
use stochlab_core::sle::{
    hausdorff_dimension, kappa, phase, polyline_crossings, DrivingFunction, LoewnerChain, Phase,
    PointEvolution, DEFAULT_EPS_SWALLOW,
};

use super::{require, Context, Experiment, Report};
use crate::error::{at, RunError};
use crate::output::{Check, PlotPoint, Table};

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SleTrace {
    /// Dimension D > 1 of the driving Bessel process
    #[arg(long = "D", default_value_t = 3.0)]
    #[serde(rename = "D")]
    pub dimension: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub dt: f64,
    #[arg(long, default_value_t = 1.0)]
    pub horizon: f64,
    /// |z| at which the hydrodynamic normalization is measured
    #[arg(long, default_value_t = 1e3)]
    pub radius: f64,
    /// Bound on |g_t(z) - z - a(t)/z| at that radius
    #[arg(long, default_value_t = 1e-3)]
    pub normalization_tol: f64,
    /// Bound on |Re gamma| for the zero-driving trace
    #[arg(long, default_value_t = 1e-10)]
    pub zero_drive_tol: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SleTraceOutput {
    pub phase: Phase,
    pub kappa: f64,
    pub hausdorff_dimension: f64,
    pub steps: usize,
    pub capacity: f64,
    pub tip: [f64; 2],
    pub max_height: f64,
    pub min_imaginary: f64,
    /// proper crossings of the sampled polyline
    pub crossings: usize,
    pub normalization_residual: f64,
    pub zero_drive_max_real: f64,
}

/// max over eight directions of |g_t(z) - z - a/z| at |z| = r.
fn normalization_residual(chain: &LoewnerChain, r: f64) -> Result<f64, RunError> {
    let a = chain.capacity(chain.steps());
    let horizon = chain.driving.horizon();
    let mut worst: f64 = 0.0;
    for k in 0..8 {
        let z = Complex64::from_polar(r, 0.2 + 0.35 * k as f64);
        match chain
            .evolve_point(z, horizon, DEFAULT_EPS_SWALLOW)
            .map_err(at("sle-trace.normalization"))?
        {
            PointEvolution::Alive(g) => worst = worst.max((g - z - a / z).norm()),
            PointEvolution::Swallowed(_) => worst = f64::INFINITY,
        }
    }
    Ok(worst)
}

impl Experiment for SleTrace {
    const NAME: &'static str = "sle-trace";
    type Output = SleTraceOutput;

    fn run(&self, ctx: &Context) -> Result<Report<Self::Output>, RunError> {
        require(self.radius > 0.0, "radius must be positive")?;
        let mut rng = ctx.stream(family::SLE, 0);
        let driving = DrivingFunction::sample(self.dimension, self.dt, self.horizon, &mut rng)
            .map_err(at("sle-trace.driving"))?;
        let chain = LoewnerChain::new(driving).map_err(at("sle-trace.driving"))?;
        let trace = chain.trace().map_err(at("sle-trace.trace"))?;
        let zero = LoewnerChain::new(
            DrivingFunction::zero(self.dimension, self.dt, self.horizon)
                .map_err(at("sle-trace.zero_drive"))?,
        )
        .map_err(at("sle-trace.zero_drive"))?;
        let zero_drive_max_real = zero
            .trace()
            .map_err(at("sle-trace.zero_drive"))?
            .iter()
            .fold(0.0f64, |m, z| m.max(z.re.abs()));
        let normalization_residual = normalization_residual(&chain, self.radius)?;
        let min_imaginary = trace.iter().fold(f64::INFINITY, |m, z| m.min(z.im));
        let max_height = trace.iter().fold(0.0f64, |m, z| m.max(z.im));
        let tip = *trace.last().expect("trace includes the origin");
        let checks = vec![
            Check::at_least("sle-trace.half_plane", min_imaginary, 0.0),
            Check::at_most(
                "sle-trace.normalization",
                normalization_residual,
                self.normalization_tol,
            ),
            Check::at_most(
                "sle-trace.zero_drive",
                zero_drive_max_real,
                self.zero_drive_tol,
            ),
        ];
        let dt = chain.driving.dt;
        let mut table = Table::new(vec!["t", "re", "im"]);
        for (k, z) in trace.iter().enumerate() {
            table.push(vec![k as f64 * dt, z.re, z.im]);
        }
        // Hausdorff dimension against D, with the kink at D = 3/2
        let plot = (0..=59)
            .map(|k| {
                let d = 1.05 + 0.05 * k as f64;
                hausdorff_dimension(d).map(|h| PlotPoint::exact(d, h))
            })
            .collect::<Result<Vec<_>, _>>()
            .map_err(at("sle-trace.hausdorff"))?;
        Ok(Report::new(
            SleTraceOutput {
                phase: phase(self.dimension).map_err(at("sle-trace.phase"))?,
                kappa: kappa(self.dimension).map_err(at("sle-trace.phase"))?,
                hausdorff_dimension: hausdorff_dimension(self.dimension)
                    .map_err(at("sle-trace.phase"))?,
                steps: chain.steps(),
                capacity: chain.capacity(chain.steps()),
                tip: [tip.re, tip.im],
                max_height,
                min_imaginary,
                crossings: polyline_crossings(&trace),
                normalization_residual,
                zero_drive_max_real,
            },
            checks,
        )
        .with_table(table)
        .with_plot(plot))
    }
}
