use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};
use stochlab_core::lerw::{
    brute_force_l_max, fomin_check, hitting_distribution, sample_lerw, Killing, WalkNetwork,
};
use stochlab_core::mc::family;

use super::{require, Context, Experiment, Report};
use crate::error::{at, RunError};
use crate::output::{Check, Table};

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fomin {
    /// Network file: lines "u v weight", "A: a1 a2 ..." and "B: b1 b2 ..."
    #[arg(long)]
    pub net: PathBuf,
    /// Longest walk enumerated; chosen from the tolerance when absent
    #[arg(long = "Lmax")]
    #[serde(rename = "Lmax")]
    pub l_max: Option<usize>,
    /// Largest acceptable Neumann tail bound
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    /// Loop-erased walks sampled from a_1 and killed on B; 0 skips sampling
    #[arg(long, default_value_t = 0)]
    pub lerw_samples: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct LerwSummary {
    pub samples: usize,
    pub start: String,
    pub targets: Vec<String>,
    pub endpoint_frequency: Vec<f64>,
    pub hitting_probability: Vec<f64>,
    pub mean_length: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FominOutput {
    pub vertices: usize,
    #[serde(rename = "N")]
    pub size: usize,
    pub max_row_sum: f64,
    pub det: f64,
    pub brute: f64,
    pub tail_bound: f64,
    #[serde(rename = "Lmax")]
    pub l_max: usize,
    pub difference: f64,
    pub lerw: Option<LerwSummary>,
}

impl Experiment for Fomin {
    const NAME: &'static str = "fomin";
    type Output = FominOutput;

    fn run(&self, ctx: &Context) -> Result<Report<Self::Output>, RunError> {
        require(self.tol > 0.0, "tol must be positive")?;
        let text = std::fs::read_to_string(&self.net)
            .map_err(|e| RunError::usage(format!("cannot read {}: {e}", self.net.display())))?;
        let net = WalkNetwork::parse(&text).map_err(at("fomin.network"))?;
        let q = net.max_row_sum();
        let l_max = match self.l_max {
            Some(l) => l,
            None => brute_force_l_max(q, net.a.len(), self.tol).map_err(at("fomin.l_max"))?,
        };
        let record = fomin_check(&net, l_max, self.tol).map_err(at("fomin.tail_bound"))?;
        let difference = (record.det - record.brute).abs();
        let checks = vec![
            Check::at_most("fomin.identity", difference, record.tail_bound)
                .with_detail("|det W_{A,B} - truncated enumeration| <= tail bound"),
        ];
        let lerw = if self.lerw_samples > 0 {
            let killing = Killing {
                targets: net.b.clone(),
                max_steps: 1_000_000,
            };
            let start = net.a[0];
            let mut rng = ctx.stream(family::LERW, 0);
            let mut counts = vec![0usize; net.b.len()];
            let mut total_len = 0usize;
            for _ in 0..self.lerw_samples {
                let walk =
                    sample_lerw(&net, start, &killing, &mut rng).map_err(at("fomin.lerw"))?;
                let end = *walk.vertices.last().expect("walks are nonempty");
                if let Some(k) = net.b.iter().position(|&b| b == end) {
                    counts[k] += 1;
                }
                total_len += walk.len();
            }
            let hitting_probability =
                hitting_distribution(&net, start, &net.b).map_err(at("fomin.lerw"))?;
            Some(LerwSummary {
                samples: self.lerw_samples,
                start: net.names[start].clone(),
                targets: net.b.iter().map(|&b| net.names[b].clone()).collect(),
                endpoint_frequency: counts
                    .iter()
                    .map(|&c| c as f64 / self.lerw_samples as f64)
                    .collect(),
                hitting_probability,
                mean_length: total_len as f64 / self.lerw_samples as f64,
            })
        } else {
            None
        };
        let mut table = Table::new(vec!["row", "column", "walk_weight"]);
        let w = stochlab_core::lerw::walk_matrix(&net).map_err(at("fomin.walk_matrix"))?;
        for i in 0..w.nrows() {
            for j in 0..w.ncols() {
                table.push(vec![i as f64, j as f64, w[(i, j)]]);
            }
        }
        Ok(Report::new(
            FominOutput {
                vertices: net.len(),
                size: net.a.len(),
                max_row_sum: q,
                det: record.det,
                brute: record.brute,
                tail_bound: record.tail_bound,
                l_max,
                difference,
                lerw,
            },
            checks,
        )
        .with_table(table))
    }
}
