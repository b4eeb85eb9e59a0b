use clap::Args;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use stochlab_core::charpoly::{
    ishikawa_random_check, mgue_block, mgue_det, mgue_mc, timeshift_equivalence_check,
    ComplexEstimate, GueSpec, TimeshiftReport,
};
use stochlab_core::mc::family;

use super::{require, Context, Experiment, Report};
use crate::error::{at, RunError};
use crate::output::{Check, Table};

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Charpoly {
    /// Matrix size N
    #[arg(long = "N", default_value_t = 2)]
    #[serde(rename = "N")]
    pub n: usize,
    /// GUE variance sigma^2
    #[arg(long, default_value_t = 1.0)]
    pub variance: f64,
    /// Real parts of the 2n arguments alpha
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_values_t = [0.3, -0.8])]
    pub alpha_re: Vec<f64>,
    /// Imaginary parts of the 2n arguments alpha
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_values_t = [0.0, 0.0])]
    pub alpha_im: Vec<f64>,
    /// GUE samples of the Monte Carlo average
    #[arg(long, default_value_t = 1_000_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 3.0)]
    pub sigmas: f64,
    /// Real parts of four arguments used to compare the 2n x 2n and n x n forms
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_values_t = [0.3, -0.8, 1.1, -0.4])]
    pub form_alpha_re: Vec<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_values_t = [0.2, -0.1, 0.0, 0.35])]
    pub form_alpha_im: Vec<f64>,
    /// Relative tolerance between the two closed forms
    #[arg(long, default_value_t = 1e-10)]
    pub forms_tol: f64,
    /// Random instances per n in {2, 3} of the Ishikawa identity
    #[arg(long, default_value_t = 100)]
    pub ishikawa_instances: usize,
    #[arg(long, default_value_t = 1e-10)]
    pub ishikawa_tol: f64,
    /// Samples per side of the time-shift comparison; 0 skips it
    #[arg(long, default_value_t = 100_000)]
    pub timeshift_samples: usize,
    #[arg(long, default_value_t = 1.0)]
    pub t: f64,
    #[arg(long, default_value_t = 2.0)]
    pub t2: f64,
    /// Level of the time-shift two-sample test
    #[arg(long, default_value_t = 0.01)]
    pub ks_alpha: f64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct FormsRow {
    #[serde(rename = "N")]
    pub size: usize,
    pub n: usize,
    pub full: [f64; 2],
    pub block: [f64; 2],
    pub relative_deviation: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CharpolyOutput {
    pub exact: [f64; 2],
    pub mc: ComplexEstimate,
    pub forms: Vec<FormsRow>,
    pub ishikawa_deviation: [f64; 2],
    pub timeshift: Option<TimeshiftReport>,
}

fn pair(z: Complex64) -> [f64; 2] {
    [z.re, z.im]
}

fn complexes(re: &[f64], im: &[f64], what: &str) -> Result<Vec<Complex64>, RunError> {
    require(
        re.len() == im.len(),
        format!("{what}: real and imaginary parts differ in length"),
    )?;
    Ok(re
        .iter()
        .zip(im)
        .map(|(&r, &i)| Complex64::new(r, i))
        .collect())
}

impl Experiment for Charpoly {
    const NAME: &'static str = "charpoly";
    type Output = CharpolyOutput;

    fn run(&self, ctx: &Context) -> Result<Report<Self::Output>, RunError> {
        let alpha = complexes(&self.alpha_re, &self.alpha_im, "alpha")?;
        require(
            !alpha.is_empty() && alpha.len() % 2 == 0,
            "alpha needs an even, positive number of entries",
        )?;
        let form_alpha = complexes(&self.form_alpha_re, &self.form_alpha_im, "form alpha")?;
        require(form_alpha.len() == 4, "form alpha needs four entries")?;
        require(self.samples >= 2, "samples must be at least 2")?;
        let spec = GueSpec::new(self.n, self.variance).map_err(at("charpoly.spec"))?;
        let exact = mgue_det(&alpha, spec).map_err(at("charpoly.exact"))?;
        let mc = mgue_mc(&alpha, spec, self.samples, &ctx.sharding).map_err(at("charpoly.mc"))?;
        let floor = 1e-12 * exact.norm();
        let mut checks = vec![
            Check::at_most(
                "charpoly.mc.re",
                (mc.re - exact.re).abs(),
                self.sigmas * mc.stderr_re + floor,
            ),
            Check::at_most(
                "charpoly.mc.im",
                (mc.im - exact.im).abs(),
                self.sigmas * mc.stderr_im + floor,
            ),
        ];
        let mut forms = Vec::new();
        for size in 1..=3 {
            for n in 1..=2 {
                let spec = GueSpec::new(size, self.variance).map_err(at("charpoly.forms"))?;
                let a = &form_alpha[..2 * n];
                let full = mgue_det(a, spec).map_err(at("charpoly.forms"))?;
                let block = mgue_block(a, spec).map_err(at("charpoly.forms"))?;
                forms.push(FormsRow {
                    size,
                    n,
                    full: pair(full),
                    block: pair(block),
                    relative_deviation: (full - block).norm() / full.norm().max(1.0),
                });
            }
        }
        let worst = forms
            .iter()
            .fold(0.0f64, |m, r| m.max(r.relative_deviation));
        checks.push(Check::at_most("charpoly.forms", worst, self.forms_tol));
        let mut rng = ctx.stream(family::MISC, 0);
        let mut ishikawa_deviation = [0.0; 2];
        for (slot, n) in ishikawa_deviation.iter_mut().zip([2, 3]) {
            *slot = ishikawa_random_check(n, self.ishikawa_instances, &mut rng)
                .map_err(at("charpoly.ishikawa"))?;
            checks.push(Check::below(
                format!("charpoly.ishikawa.n={n}"),
                *slot,
                self.ishikawa_tol,
            ));
        }
        let timeshift = if self.timeshift_samples > 0 {
            let report = timeshift_equivalence_check(
                spec,
                self.t,
                self.t2,
                self.timeshift_samples,
                self.ks_alpha,
                &ctx.sharding,
            )
            .map_err(at("charpoly.timeshift"))?;
            checks.push(Check::at_most(
                "charpoly.timeshift.single_time",
                report.single_time_ratio,
                1.0,
            ));
            checks.push(Check::at_most(
                "charpoly.timeshift.two_time",
                report.two_time_ratio,
                1.0,
            ));
            Some(report)
        } else {
            None
        };
        let mut table = Table::new(vec!["N", "n", "full_re", "full_im", "block_re", "block_im"]);
        for r in &forms {
            table.push(vec![
                r.size as f64,
                r.n as f64,
                r.full[0],
                r.full[1],
                r.block[0],
                r.block[1],
            ]);
        }
        Ok(Report::new(
            CharpolyOutput {
                exact: pair(exact),
                mc,
                forms,
                ishikawa_deviation,
                timeshift,
            },
            checks,
        )
        .with_table(table))
    }
}
