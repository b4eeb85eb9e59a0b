use clap::Args;
use serde::{Deserialize, Serialize};
use stochlab_core::detkernels::{
    extended_sine_kernel, lattice_kernel, lattice_n_max, LATTICE_TAIL_TOLERANCE,
};

use super::{require, Context, Experiment, Report};
use crate::error::{at, RunError};
use crate::output::{Check, PlotPoint, Table};

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelaxCurve {
    #[arg(long, default_value_t = 0.5)]
    pub s: f64,
    #[arg(long, default_value_t = 1.0)]
    pub t: f64,
    /// Time shifts u, increasing
    #[arg(long, value_delimiter = ',', default_values_t = [1.0, 2.0, 4.0, 8.0])]
    pub shifts: Vec<f64>,
    /// Grid of x and y values
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_values_t = [-1.0, -0.5, 0.0, 0.5, 1.0])]
    pub grid: Vec<f64>,
    /// The supremum at the last shift must fall below this
    #[arg(long, default_value_t = 1e-6)]
    pub target: f64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct RelaxRow {
    pub u: f64,
    /// sup over the grid of |K_lattice(u+s,x;u+t,y) - K_ext(s,x;t,y)|
    pub sup: f64,
    pub argmax: [f64; 2],
    pub tail_bound: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RelaxCurveOutput {
    pub rows: Vec<RelaxRow>,
}

impl Experiment for RelaxCurve {
    const NAME: &'static str = "relax-curve";
    type Output = RelaxCurveOutput;

    fn run(&self, _ctx: &Context) -> Result<Report<Self::Output>, RunError> {
        require(!self.shifts.is_empty(), "at least one shift is required")?;
        require(
            self.shifts.windows(2).all(|w| w[0] < w[1]),
            "shifts must be increasing",
        )?;
        require(!self.grid.is_empty(), "the grid needs at least one point")?;
        require(self.s > 0.0 && self.t > 0.0, "s and t must be positive")?;
        let mut rows = Vec::with_capacity(self.shifts.len());
        for &u in &self.shifts {
            require(u >= 0.0, "shifts must be non-negative")?;
            let n_max = lattice_n_max(u + self.s, u + self.t, LATTICE_TAIL_TOLERANCE);
            let mut row = RelaxRow {
                u,
                sup: 0.0,
                argmax: [f64::NAN; 2],
                tail_bound: 0.0,
            };
            for &x in &self.grid {
                for &y in &self.grid {
                    let k = lattice_kernel(u + self.s, x, u + self.t, y, n_max)
                        .map_err(at("relax-curve.lattice"))?;
                    let d = (k.value - extended_sine_kernel(self.s, x, self.t, y)).abs();
                    row.tail_bound = row.tail_bound.max(k.tail_bound);
                    if d.is_nan() || d > row.sup {
                        row.sup = d;
                        row.argmax = [x, y];
                    }
                }
            }
            rows.push(row);
        }
        let decreasing = rows.windows(2).all(|w| w[1].sup < w[0].sup);
        let last = rows.last().expect("at least one shift");
        let checks = vec![
            Check::holds(
                "relax-curve.decreasing",
                decreasing,
                "sup strictly decreasing in u",
            ),
            Check::below(
                format!("relax-curve.sup_at_u={}", last.u),
                last.sup,
                self.target,
            ),
        ];
        let mut table = Table::new(vec!["u", "sup", "tail_bound"]);
        for r in &rows {
            table.push(vec![r.u, r.sup, r.tail_bound]);
        }
        let plot = rows.iter().map(|r| PlotPoint::exact(r.u, r.sup)).collect();
        Ok(Report::new(RelaxCurveOutput { rows }, checks)
            .with_table(table)
            .with_plot(plot))
    }
}
