//! Maximum of the three-dimensional Bessel bridge of duration 1 and of the
//! top path of N noncolliding Bessel bridges, the zeta moment identity and
//! exact-bridge Monte Carlo.

use nalgebra::DMatrix;
use serde::Serialize;
use statrs::function::gamma::ln_gamma;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::mc::{family, Sharding};
use crate::numerics::linalg::det_real;
use crate::numerics::quadrature::QuadratureRule;
use crate::numerics::rng::RngStream;
use crate::numerics::special::{hermite, xi_from_zeta, xi_moment_function};
use crate::stats::MeanAccumulator;

/// Truncation plus rounding budget accepted by the single-path series.
pub const SERIES_TOLERANCE: f64 = 1e-12;
/// Budget for the N-path determinant, whose error estimate is first order
/// in the entry errors.
pub const DETERMINANT_TOLERANCE: f64 = 1e-9;
/// E[max of BM on a grid] falls short of the continuous maximum by about
/// this multiple of sqrt(dt): -zeta(1/2)/sqrt(2 pi).
pub const GRID_MAX_SHIFT: f64 = 0.582_597_157_939_010_6;

/// A series value with a bound on truncation and rounding error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesValue {
    pub value: f64,
    pub error_bound: f64,
    pub n_max: usize,
}

/// |H_k|(x) = sum of |coefficients| |2x|^{k-2j}, which dominates |H_k(x)|.
fn hermite_majorant(k: usize, x: f64) -> f64 {
    let x = x.abs();
    let mut coeff = 2f64.powi(k as i32);
    let mut sum = 0.0;
    let mut j = 0usize;
    loop {
        let power = k - 2 * j;
        sum += coeff * x.powi(power as i32);
        if power < 2 {
            break;
        }
        let p = power as f64;
        coeff *= p * (p - 1.0) / (4.0 * (j as f64 + 1.0));
        j += 1;
    }
    sum
}

/// sum_{n in Z} H_k(sqrt2 n h) e^{-2 n^2 h^2} for |n| <= n_max, with the
/// dropped tail and the rounding error bounded through `hermite_majorant`.
fn hermite_theta_sum(k: usize, h: f64, n_max: usize) -> (f64, f64) {
    let term = |n: f64| hermite(k, 2f64.sqrt() * n * h) * (-2.0 * n * n * h * h).exp();
    let majorant = |n: f64| hermite_majorant(k, 2f64.sqrt() * n * h) * (-2.0 * n * n * h * h).exp();
    let mut sum = term(0.0);
    let mut abs_sum = majorant(0.0);
    for n in 1..=n_max {
        let n = n as f64;
        sum += 2.0 * term(n);
        abs_sum += 2.0 * majorant(n);
    }
    // the majorant decreases geometrically once 2h^2(2n+1) exceeds the polynomial growth
    let mut tail = 0.0;
    let mut n = n_max as f64 + 1.0;
    loop {
        let m = 2.0 * majorant(n);
        tail += m;
        let next = 2.0 * majorant(n + 1.0);
        let ratio = next / m;
        if m == 0.0 || (ratio < 0.5 && next < 1e-300) {
            break;
        }
        if ratio < 0.5 {
            tail += next / (1.0 - ratio);
            break;
        }
        n += 1.0;
    }
    (
        sum,
        tail + 4.0 * f64::EPSILON * abs_sum * (n_max as f64 + 1.0),
    )
}

fn check_h(h: f64) -> Result<()> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::domain(format!(
            "the level h must be positive (got {h})"
        )));
    }
    Ok(())
}

fn clamp_probability(value: f64, bound: f64, n_max: usize) -> Result<SeriesValue> {
    let value = if (-SERIES_TOLERANCE..0.0).contains(&value) {
        0.0
    } else if value > 1.0 && value <= 1.0 + SERIES_TOLERANCE {
        1.0
    } else {
        value
    };
    if !(0.0..=1.0).contains(&value) {
        return Err(Error::numeric(
            format!("series gave {value}, outside [0, 1]"),
            Some(value),
        ));
    }
    Ok(SeriesValue {
        value,
        error_bound: bound,
        n_max,
    })
}

/// P(H_1 <= h) = -1/2 sum_n H_2(sqrt2 n h) e^{-2 h^2 n^2}.
pub fn max_cdf_h1(h: f64, n_max: usize) -> Result<SeriesValue> {
    check_h(h)?;
    let (sum, bound) = hermite_theta_sum(2, h, n_max);
    let bound = 0.5 * bound;
    if bound > SERIES_TOLERANCE {
        return Err(Error::numeric(
            format!(
                "h = {h} with n_max = {n_max}: error bound {bound:e} exceeds {SERIES_TOLERANCE:e}"
            ),
            Some(-0.5 * sum),
        ));
    }
    clamp_probability(-0.5 * sum, bound, n_max)
}

/// Smallest n_max for which the Gaussian factor e^{-2 n^2 h^2} at n_max + 1
/// is below 1e-40.
pub fn default_n_max(h: f64) -> usize {
    ((40.0 * 10f64.ln() / 2.0).sqrt() / h).ceil() as usize + 1
}

/// P(H_N <= h) = (-1)^N / (2^{N^2} prod Gamma(2i)) det[sum_n H_{2(i+j-1)}(sqrt2 n h) e^{-2n^2h^2}].
pub fn max_cdf_hn(n: usize, h: f64, n_max: usize) -> Result<SeriesValue> {
    check_h(h)?;
    if n == 0 {
        return Err(Error::domain("N must be at least 1"));
    }
    let mut a = DMatrix::zeros(n, n);
    let mut e = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let (s, b) = hermite_theta_sum(2 * (i + j + 1), h, n_max);
            a[(i, j)] = s;
            e[(i, j)] = b;
        }
    }
    let ln_prefactor =
        -((n * n) as f64) * 2f64.ln() - (1..=n).map(|i| ln_gamma(2.0 * i as f64)).sum::<f64>();
    let sign = if n.is_multiple_of(2) { 1.0 } else { -1.0 };
    let det = det_real(&a)?;
    // first order: |d det| <= sum |cof_ij| (E_ij + rounding of A_ij)
    let mut sensitivity = 0.0;
    for i in 0..n {
        for j in 0..n {
            let cof = if n == 1 {
                1.0
            } else {
                det_real(&a.clone().remove_row(i).remove_column(j))?.abs()
            };
            sensitivity +=
                cof * (e[(i, j)] + 8.0 * (n * n) as f64 * f64::EPSILON * a[(i, j)].abs());
        }
    }
    let scale = ln_prefactor.exp();
    let bound = scale * sensitivity;
    let value = sign * scale * det;
    if !(bound <= DETERMINANT_TOLERANCE) {
        return Err(Error::numeric(
            format!("N = {n}, h = {h}, n_max = {n_max}: error bound {bound:e} exceeds {DETERMINANT_TOLERANCE:e}"),
            Some(value),
        ));
    }
    clamp_probability(value, bound, n_max)
}

/// Density of H_1: 2 sum_{n>=1} (16 n^4 h^3 - 12 n^2 h) e^{-2 n^2 h^2}.
pub fn max_density_h1(h: f64) -> Result<f64> {
    check_h(h)?;
    let n_max = default_n_max(h);
    let sum: f64 = (1..=n_max)
        .map(|n| {
            let n2 = (n * n) as f64;
            (16.0 * n2 * n2 * h.powi(3) - 12.0 * n2 * h) * (-2.0 * n2 * h * h).exp()
        })
        .sum();
    Ok(2.0 * sum)
}

/// E[H_1^s] = 2 (pi/2)^{s/2} xi(s).
pub fn moment_h1(s: f64) -> Result<f64> {
    if !(s > 0.0) {
        return Err(Error::domain(format!(
            "moment order must be positive (got {s})"
        )));
    }
    Ok(2.0 * (PI / 2.0).powf(s / 2.0) * xi_moment_function(s)?)
}

/// Levels below which P(H_1 <= h) < 1e-30; the Stieltjes integral treats
/// the CDF as zero there.
const STIELTJES_LOWER: f64 = 0.2;
const STIELTJES_UPPER: f64 = 8.0;

/// E[H_1^s] = int_0^inf s h^{s-1} P(H_1 > h) dh from the series CDF.
pub fn stieltjes_moment_h1(s: f64) -> Result<f64> {
    if !(s > 0.0) {
        return Err(Error::domain(format!(
            "moment order must be positive (got {s})"
        )));
    }
    let rule = QuadratureRule::gauss_legendre(32);
    let head = STIELTJES_LOWER.powf(s);
    let mut failure = None;
    let body = rule.integrate_panels(
        |h| match max_cdf_h1(h, default_n_max(h)) {
            Ok(f) => s * h.powf(s - 1.0) * (1.0 - f.value),
            Err(e) => {
                failure = Some(e);
                0.0
            }
        },
        STIELTJES_LOWER,
        STIELTJES_UPPER,
        64,
    );
    match failure {
        Some(e) => Err(e),
        None => Ok(head + body),
    }
}

/// Norm of a three-dimensional Brownian bridge on a uniform grid of [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BridgePath {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl BridgePath {
    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }
}

fn grid_steps(dt: f64) -> Result<usize> {
    let k = (1.0 / dt).round();
    if !(dt > 0.0) || k < 1.0 || ((k * dt) - 1.0).abs() > 1e-9 {
        return Err(Error::argument(format!("dt = {dt} must divide 1")));
    }
    Ok(k as usize)
}

/// Squared norm of three independent Brownian bridges at the grid times,
/// written into `out` (length steps + 1); each bridge is W(t) - t W(1).
fn bridge_norm_sq(steps: usize, rng: &mut RngStream, walk: &mut [f64], out: &mut [f64]) {
    let sd = (1.0 / steps as f64).sqrt();
    out.iter_mut().for_each(|v| *v = 0.0);
    for _ in 0..3 {
        walk[0] = 0.0;
        for k in 1..=steps {
            walk[k] = walk[k - 1] + sd * rng.normal();
        }
        let end = walk[steps];
        for k in 0..=steps {
            let b = walk[k] - end * (k as f64 / steps as f64);
            out[k] += b * b;
        }
    }
    out[0] = 0.0;
    out[steps] = 0.0;
}

/// Three-dimensional Bessel bridge of duration 1 at the times k dt, exact in law.
pub fn simulate_bessel_bridge(dt: f64, rng: &mut RngStream) -> Result<BridgePath> {
    let steps = grid_steps(dt)?;
    let mut walk = vec![0.0; steps + 1];
    let mut sq = vec![0.0; steps + 1];
    bridge_norm_sq(steps, rng, &mut walk, &mut sq);
    Ok(BridgePath {
        times: (0..=steps).map(|k| k as f64 / steps as f64).collect(),
        values: sq.into_iter().map(f64::sqrt).collect(),
    })
}

/// Grid maxima of `samples` bridges at step dt, in shard order.
pub fn bridge_maxima(dt: f64, samples: usize, sharding: &Sharding) -> Result<Vec<f64>> {
    let steps = grid_steps(dt)?;
    Ok(sharding
        .run(family::BRIDGE, samples, |rng, n| {
            let mut walk = vec![0.0; steps + 1];
            let mut sq = vec![0.0; steps + 1];
            (0..n)
                .map(|_| {
                    bridge_norm_sq(steps, rng, &mut walk, &mut sq);
                    sq.iter().copied().fold(0.0, f64::max).sqrt()
                })
                .collect::<Vec<_>>()
        })
        .into_iter()
        .flatten()
        .collect())
}

/// Allowance for the grid maximum falling short of the true maximum:
/// 2 * GRID_MAX_SHIFT * sqrt(dt) * p_1(h).
pub fn grid_bias_margin(h: f64, dt: f64) -> Result<f64> {
    Ok(2.0 * GRID_MAX_SHIFT * dt.sqrt() * max_density_h1(h)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaxCdfRow {
    pub h: f64,
    pub cdf_exact: f64,
    pub cdf_mc: f64,
    pub stderr: f64,
    pub bias_margin: f64,
    pub pass: bool,
}

/// Compares the series CDF with the empirical CDF of the grid maxima:
/// |exact - mc| <= 3 stderr + bias margin.
pub fn max_cdf_table(levels: &[f64], maxima: &[f64], dt: f64) -> Result<Vec<MaxCdfRow>> {
    let n = maxima.len() as f64;
    levels
        .iter()
        .map(|&h| {
            let exact = max_cdf_h1(h, default_n_max(h))?.value;
            let mc = maxima.iter().filter(|&&m| m <= h).count() as f64 / n;
            let stderr = (mc * (1.0 - mc) / n).sqrt();
            let bias_margin = grid_bias_margin(h, dt)?;
            Ok(MaxCdfRow {
                h,
                cdf_exact: exact,
                cdf_mc: mc,
                stderr,
                bias_margin,
                pass: (exact - mc).abs() <= 3.0 * stderr + bias_margin,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentReport {
    pub s: f64,
    /// zeta form of xi, defined for s > 1
    pub zeta_form: Option<f64>,
    pub theta_form: f64,
    pub stieltjes: f64,
    pub mc_mean: Option<f64>,
    pub mc_stderr: Option<f64>,
}

/// E[H_1^s] from the theta and zeta forms of xi, Stieltjes integration of
/// the CDF and, when maxima are given, their empirical mean of H^s.
pub fn moment_report(s: f64, maxima: Option<&[f64]>) -> Result<MomentReport> {
    let zeta_form = if s > 1.0 {
        Some(2.0 * (PI / 2.0).powf(s / 2.0) * xi_from_zeta(s)?)
    } else {
        None
    };
    let acc = maxima.map(|m| m.iter().map(|h| h.powf(s)).collect::<MeanAccumulator>());
    Ok(MomentReport {
        s,
        zeta_form,
        theta_form: moment_h1(s)?,
        stieltjes: stieltjes_moment_h1(s)?,
        mc_mean: acc.map(|a| a.mean()),
        mc_stderr: acc.map(|a| a.stderr()),
    })
}
