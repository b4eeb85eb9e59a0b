use clap::Args;
use serde::{Deserialize, Serialize};
use stochlab_core::bessel::{
    cardy_probability, flow_outcomes, FlowCoupling, FlowOutcome, FlowVerdict, DEFAULT_C_EQ,
};
use stochlab_core::mc::family;
use stochlab_core::Sharding;

use super::{binomial_stderr, require, Context, Experiment, Report};
use crate::error::{at, RunError};
use crate::output::{Check, PlotPoint, Table};

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Cardy {
    /// Dimension D in (3/2, 2)
    #[arg(long = "D", default_value_t = 5.0 / 3.0)]
    #[serde(rename = "D")]
    pub dimension: f64,
    #[arg(long, default_value_t = 0.5)]
    pub x: f64,
    #[arg(long, default_value_t = 1.0)]
    pub y: f64,
    /// Monte Carlo paths of the flow coupling
    #[arg(long, default_value_t = 200_000)]
    pub paths: usize,
    /// Real-time step at the start of each path
    #[arg(long, default_value_t = 1e-4)]
    pub dt: f64,
    /// Hitting thresholds of the refinement, coarse to fine
    #[arg(long, value_delimiter = ',', default_values_t = [1e-2, 3e-3, 1e-3])]
    pub eps: Vec<f64>,
    /// X^y <= c_eq eps at the first hit of eps counts as simultaneous
    #[arg(long, default_value_t = DEFAULT_C_EQ)]
    pub c_eq: f64,
    /// Standard errors allowed in the bracket
    #[arg(long, default_value_t = 3.0)]
    pub sigmas: f64,
    /// Step budget per path
    #[arg(long, default_value_t = 50_000_000)]
    pub max_steps: usize,
    /// Dimension of the control run, where simultaneity must vanish
    #[arg(long = "control-D", default_value_t = 1.2)]
    #[serde(rename = "control_D")]
    pub control_dimension: f64,
    /// Paths of the control run; 0 skips it
    #[arg(long, default_value_t = 20_000)]
    pub control_paths: usize,
    /// Control simultaneity frequency must stay below this
    #[arg(long, default_value_t = 0.01)]
    pub control_max: f64,
    /// Points of the exact curve written as plot data
    #[arg(long, default_value_t = 99)]
    pub curve_points: usize,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct RefinementRow {
    pub eps: f64,
    /// frequency of the ratio verdict "simultaneous"
    pub ratio_frequency: f64,
    pub ratio_stderr: f64,
    pub ratio_inconclusive: usize,
    /// frequency of the threshold verdict "simultaneous"
    pub threshold_frequency: f64,
    pub threshold_inconclusive: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ControlRun {
    #[serde(rename = "D")]
    pub dimension: f64,
    pub paths: usize,
    pub ratio_frequency: f64,
    pub threshold_frequency: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CardyOutput {
    pub exact: f64,
    pub mc: f64,
    pub stderr: f64,
    /// change of the estimate over the last refinement step
    pub discretization_margin: f64,
    pub deviation: f64,
    pub refinement: Vec<RefinementRow>,
    pub control: Option<ControlRun>,
}

fn refinement(
    p: &Cardy,
    dimension: f64,
    paths: usize,
    stream_family: u32,
    sharding: &Sharding,
) -> Result<Vec<RefinementRow>, RunError> {
    let cp = FlowCoupling::new(dimension, p.x, p.y).map_err(at("cardy.coupling"))?;
    let eps = &p.eps;
    let shards = sharding.run(stream_family, paths, |rng, n| {
        flow_outcomes(&cp, p.dt, eps, p.c_eq, n, p.max_steps, rng)
    });
    let outcomes: Vec<Vec<FlowOutcome>> = shards.into_iter().flatten().collect();
    let n = outcomes.len();
    Ok(eps
        .iter()
        .enumerate()
        .map(|(k, &e)| {
            let count = |pick: fn(&FlowOutcome) -> FlowVerdict, v: FlowVerdict| {
                outcomes.iter().filter(|o| pick(&o[k]) == v).count()
            };
            let ratio = count(|o| o.ratio, FlowVerdict::Simultaneous) as f64 / n as f64;
            RefinementRow {
                eps: e,
                ratio_frequency: ratio,
                ratio_stderr: binomial_stderr(ratio, n),
                ratio_inconclusive: count(|o| o.ratio, FlowVerdict::Inconclusive),
                threshold_frequency: count(|o| o.threshold, FlowVerdict::Simultaneous) as f64
                    / n as f64,
                threshold_inconclusive: count(|o| o.threshold, FlowVerdict::Inconclusive),
            }
        })
        .collect())
}

impl Experiment for Cardy {
    const NAME: &'static str = "cardy";
    type Output = CardyOutput;

    fn run(&self, ctx: &Context) -> Result<Report<Self::Output>, RunError> {
        require(self.paths >= 2, "paths must be at least 2")?;
        require(self.dt > 0.0, "dt must be positive")?;
        require(!self.eps.is_empty(), "eps needs at least one threshold")?;
        require(
            self.eps.windows(2).all(|w| w[0] > w[1]),
            "eps thresholds must be strictly decreasing",
        )?;
        require(
            self.eps.iter().all(|&e| e > 0.0 && e < self.x),
            "eps thresholds must lie in (0, x)",
        )?;
        require(self.c_eq >= 1.0, "c_eq must be at least 1")?;
        let exact = cardy_probability(self.dimension, self.x, self.y).map_err(at("cardy.exact"))?;
        let rows = refinement(
            self,
            self.dimension,
            self.paths,
            family::FLOW,
            &ctx.sharding,
        )?;
        let finest = *rows.last().expect("at least one threshold");
        let discretization_margin = match rows.len() {
            1 => 0.0,
            k => (finest.ratio_frequency - rows[k - 2].ratio_frequency).abs(),
        };
        let mc = finest.ratio_frequency;
        let stderr = finest.ratio_stderr;
        let deviation = (mc - exact).abs();
        let mut checks = vec![
            Check::at_most(
                "cardy.bracket",
                deviation,
                self.sigmas * stderr + discretization_margin,
            )
            .with_detail(format!(
                "|mc - exact| <= {} stderr + discretization margin",
                self.sigmas
            )),
            Check::at_most("cardy.decided", finest.ratio_inconclusive as f64, 0.0)
                .with_detail("paths that exhausted the step budget"),
        ];
        let control = if self.control_paths > 0 {
            let rows = refinement(
                self,
                self.control_dimension,
                self.control_paths,
                family::MISC,
                &ctx.sharding,
            )?;
            let last = *rows.last().expect("at least one threshold");
            checks.push(Check::below(
                "cardy.control",
                last.ratio_frequency,
                self.control_max,
            ));
            Some(ControlRun {
                dimension: self.control_dimension,
                paths: self.control_paths,
                ratio_frequency: last.ratio_frequency,
                threshold_frequency: last.threshold_frequency,
            })
        } else {
            None
        };
        let mut table = Table::new(vec![
            "eps",
            "ratio_frequency",
            "ratio_stderr",
            "threshold_frequency",
        ]);
        for r in &rows {
            table.push(vec![
                r.eps,
                r.ratio_frequency,
                r.ratio_stderr,
                r.threshold_frequency,
            ]);
        }
        // exact curve P against (y - x) / y at y = 1
        let plot = (1..=self.curve_points)
            .map(|k| {
                let z = k as f64 / (self.curve_points + 1) as f64;
                cardy_probability(self.dimension, 1.0 - z, 1.0).map(|p| PlotPoint::exact(z, p))
            })
            .collect::<Result<Vec<_>, _>>()
            .map_err(at("cardy.curve"))?;
        Ok(Report::new(
            CardyOutput {
                exact,
                mc,
                stderr,
                discretization_margin,
                deviation,
                refinement: rows,
                control,
            },
            checks,
        )
        .with_table(table)
        .with_plot(plot))
    }
}
