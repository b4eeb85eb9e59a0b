use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use stochlab_core::detkernels::{
    extended_sine_kernel, kernel_k1, kernel_k2, sine_kernel, CorrelationKernel,
};
use stochlab_core::dyson::PointConfiguration;
use stochlab_core::numerics::QuadratureRule;

use super::{linspace, require, Context, Experiment, Report};
use crate::error::{at, RunError};
use crate::output::{Check, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelKind {
    K1,
    K2,
    Sine,
    ExtendedSine,
    Lattice,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelTable {
    #[arg(long, value_enum, default_value_t = KernelKind::K1)]
    pub kernel: KernelKind,
    /// Points of the initial configuration (K1, K2)
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_values_t = [-1.0, 0.2, 1.5])]
    pub xi: Vec<f64>,
    #[arg(long, default_value_t = 0.5)]
    pub s: f64,
    #[arg(long, default_value_t = 0.5)]
    pub t: f64,
    #[arg(long, default_value_t = -2.0, allow_hyphen_values = true)]
    pub lo: f64,
    #[arg(long, default_value_t = 2.0, allow_hyphen_values = true)]
    pub hi: f64,
    /// Grid points per axis
    #[arg(long, default_value_t = 9)]
    pub points: usize,
    /// Times at which int K(t,x;t,x) dx = xi(R) is checked (K1, K2)
    #[arg(long, value_delimiter = ',', default_values_t = [0.2, 0.5, 1.0])]
    pub mass_times: Vec<f64>,
    #[arg(long, default_value_t = 1e-6)]
    pub mass_tol: f64,
    /// Bound on |K1 - K2| over the table grid
    #[arg(long, default_value_t = 1e-8)]
    pub agree_tol: f64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct MassRow {
    pub t: f64,
    pub mass: f64,
    pub expected: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct KernelTableOutput {
    pub mass: Vec<MassRow>,
    /// max |K1 - K2| over the grid, for simple configurations
    pub k1_k2_deviation: Option<f64>,
    /// max |K_ext(t,x;t,y) - K_sin(x,y)| over the grid
    pub equal_time_deviation: Option<f64>,
    pub max_value: f64,
}

/// int K(t,x;t,x) dx with Gauss-Legendre panels of width sqrt(t)/2 reaching
/// 12 sqrt(t) beyond the configuration.
fn diagonal_mass(k: impl FnMut(f64) -> f64, lo: f64, hi: f64, t: f64) -> f64 {
    let a = lo - 12.0 * t.sqrt();
    let b = hi + 12.0 * t.sqrt();
    let panels = ((b - a) / (0.5 * t.sqrt())).ceil() as usize;
    QuadratureRule::gauss_legendre(20).integrate_panels(k, a, b, panels)
}

impl Experiment for KernelTable {
    const NAME: &'static str = "kernel-table";
    type Output = KernelTableOutput;

    fn run(&self, _ctx: &Context) -> Result<Report<Self::Output>, RunError> {
        require(self.points >= 1, "points must be at least 1")?;
        require(self.lo <= self.hi, "need lo <= hi")?;
        let needs_xi = matches!(self.kernel, KernelKind::K1 | KernelKind::K2);
        let xi = if needs_xi {
            require(!self.xi.is_empty(), "xi needs at least one point")?;
            Some(PointConfiguration::finite(self.xi.clone()).map_err(at("kernel-table.xi"))?)
        } else {
            None
        };
        let kernel = match (self.kernel, &xi) {
            (KernelKind::K1, Some(xi)) => {
                CorrelationKernel::k1(xi.clone()).map_err(at("kernel-table.kernel"))?
            }
            (KernelKind::K2, Some(xi)) => {
                CorrelationKernel::k2(xi.clone()).map_err(at("kernel-table.kernel"))?
            }
            (KernelKind::Sine, _) => CorrelationKernel::sine(),
            (KernelKind::ExtendedSine, _) => CorrelationKernel::extended_sine(),
            (KernelKind::Lattice, _) => CorrelationKernel::lattice(),
            _ => unreachable!("configurations exist for K1 and K2"),
        };
        let grid = linspace(self.lo, self.hi, self.points);
        let mut table = Table::new(vec!["x", "y", "kernel"]);
        let mut max_value: f64 = 0.0;
        for &x in &grid {
            for &y in &grid {
                let v = kernel
                    .eval(self.s, x, self.t, y)
                    .map_err(at("kernel-table.eval"))?;
                max_value = max_value.max(v.abs());
                table.push(vec![x, y, v]);
            }
        }
        let mut checks = Vec::new();
        let mut mass = Vec::new();
        let mut k1_k2_deviation = None;
        if let Some(xi) = &xi {
            let (lo, hi) = self
                .xi
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &p| {
                    (a.min(p), b.max(p))
                });
            for &t in &self.mass_times {
                require(t > 0.0, "mass times must be positive")?;
                let mut failure = None;
                let m = diagonal_mass(
                    |x| match kernel.eval(t, x, t, x) {
                        Ok(v) => v,
                        Err(e) => {
                            failure.get_or_insert(e);
                            f64::NAN
                        }
                    },
                    lo,
                    hi,
                    t,
                );
                if let Some(e) = failure {
                    return Err(at("kernel-table.mass")(e));
                }
                let expected = self.xi.len() as f64;
                checks.push(Check::at_most(
                    format!("kernel-table.mass.t={t}"),
                    (m - expected).abs(),
                    self.mass_tol,
                ));
                mass.push(MassRow {
                    t,
                    mass: m,
                    expected,
                });
            }
            let mut sorted = self.xi.clone();
            sorted.sort_by(f64::total_cmp);
            if sorted.windows(2).all(|w| w[0] != w[1]) {
                let mut worst: f64 = 0.0;
                for &x in &grid {
                    for &y in &grid {
                        let a = kernel_k1(xi, self.s, x, self.t, y)
                            .map_err(at("kernel-table.k1_k2"))?;
                        let b = kernel_k2(xi, self.s, x, self.t, y)
                            .map_err(at("kernel-table.k1_k2"))?;
                        worst = worst.max((a - b).abs());
                    }
                }
                checks.push(Check::at_most("kernel-table.k1_k2", worst, self.agree_tol));
                k1_k2_deviation = Some(worst);
            }
        }
        let equal_time_deviation = if self.kernel == KernelKind::ExtendedSine {
            let worst = grid.iter().fold(0.0f64, |m, &x| {
                grid.iter().fold(m, |m, &y| {
                    m.max((extended_sine_kernel(self.t, x, self.t, y) - sine_kernel(x, y)).abs())
                })
            });
            checks.push(Check::at_most("kernel-table.equal_time", worst, 1e-12));
            Some(worst)
        } else {
            None
        };
        Ok(Report::new(
            KernelTableOutput {
                mass,
                k1_k2_deviation,
                equal_time_deviation,
                max_value,
            },
            checks,
        )
        .with_table(table))
    }
}
