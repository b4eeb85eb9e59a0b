//! Bessel processes BES^(D) of continuous dimension D > 0: transition
//! densities, Euler-Maruyama simulation, hitting times, the Bessel flow and
//! Cardy's formula.

use rand_distr::{ChiSquared, Distribution};
use serde::Serialize;
use statrs::function::gamma::{gamma, ln_gamma};

use crate::error::{Error, Result};
use crate::numerics::quadrature::QuadratureRule;
use crate::numerics::rng::RngStream;
use crate::numerics::special::{bessel_i_scaled, gauss_2f1, heat_kernel_unchecked};
use crate::path::ProcessPath;

pub const DEFAULT_EPS_HIT: f64 = 1e-3;
pub const DEFAULT_C_EQ: f64 = 10.0;
/// Step halving stops at dt / 2^MAX_HALVINGS.
pub const MAX_HALVINGS: u32 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BesselSpec {
    pub dimension: f64,
    pub nu: f64,
    pub x: f64,
}

impl BesselSpec {
    pub fn new(dimension: f64, x: f64) -> Result<Self> {
        if !(dimension > 0.0) || !dimension.is_finite() {
            return Err(Error::domain(format!(
                "dimension must be positive (got {dimension})"
            )));
        }
        if !(x >= 0.0) || !x.is_finite() {
            return Err(Error::domain(format!(
                "start must be nonnegative (got {x})"
            )));
        }
        Ok(Self {
            dimension,
            nu: (dimension - 2.0) / 2.0,
            x,
        })
    }

    pub fn from_index(nu: f64, x: f64) -> Result<Self> {
        Self::new(2.0 * (nu + 1.0), x)
    }

    /// Drift coefficient (D - 1) / 2.
    pub fn drift(&self) -> f64 {
        (self.dimension - 1.0) / 2.0
    }
}

/// Transition density p_t^{(D)}(y | x).
pub fn bessel_density(spec: &BesselSpec, t: f64, y: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::domain(format!(
            "bessel density needs t > 0 (got {t}); t = 0 is a point mass"
        )));
    }
    if !(y >= 0.0) {
        return Err(Error::domain(format!(
            "bessel density needs y >= 0 (got {y})"
        )));
    }
    let nu = spec.nu;
    let x = spec.x;
    if x == 0.0 {
        let log_norm = nu * 2f64.ln() + (nu + 1.0) * t.ln() + ln_gamma(nu + 1.0);
        return Ok(power(y, 2.0 * nu + 1.0) * (-y * y / (2.0 * t) - log_norm).exp());
    }
    if y == 0.0 {
        // y^{nu+1} I_nu(xy/t) ~ y^{2nu+1} (x/2t)^nu / Gamma(nu+1)
        let e = 2.0 * nu + 1.0;
        return Ok(if e > 0.0 {
            0.0
        } else if e == 0.0 {
            (2.0 * t).powf(-nu) * (-x * x / (2.0 * t)).exp() / (t * gamma(nu + 1.0))
        } else {
            f64::INFINITY
        });
    }
    let z = x * y / t;
    let scaled = bessel_i_scaled(nu, z)?;
    let d = x - y;
    Ok((y / x).powf(nu) * y / t * (-d * d / (2.0 * t)).exp() * scaled)
}

fn power(y: f64, e: f64) -> f64 {
    if y == 0.0 {
        if e > 0.0 {
            0.0
        } else if e == 0.0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        y.powf(e)
    }
}

/// P(X_t <= y) by Gauss-Legendre on a mesh graded geometrically towards the
/// origin, where the density behaves like y^{D-1}.
pub fn bessel_cdf(spec: &BesselSpec, t: f64, y: f64) -> Result<f64> {
    bessel_density(spec, t, 1.0)?;
    if y <= 0.0 {
        return Ok(0.0);
    }
    let rule = QuadratureRule::gauss_legendre(32);
    let f = |z: f64| bessel_density(spec, t, z).unwrap_or(0.0);
    let scale = t.sqrt().min(y);
    let mut total = 0.0;
    let mut hi = scale;
    for _ in 0..60 {
        let lo = 0.5 * hi;
        total += rule.integrate(f, lo, hi);
        hi = lo;
    }
    if y > scale {
        let panels = ((y - scale) / (0.25 * t.sqrt())).ceil().max(1.0) as usize;
        total += rule.integrate_panels(f, scale, y, panels);
    }
    Ok(total)
}

/// D = 3 closed form (y/x){p_t(y|x) - p_t(y|-x)}.
pub fn density_d3(t: f64, x: f64, y: f64) -> f64 {
    y / x * (heat_kernel_unchecked(t, x, y) - heat_kernel_unchecked(t, -x, y))
}

/// D = 1 closed form p_t(y|x) + p_t(y|-x).
pub fn density_d1(t: f64, x: f64, y: f64) -> f64 {
    heat_kernel_unchecked(t, x, y) + heat_kernel_unchecked(t, -x, y)
}

/// One reflected Euler-Maruyama step of dX = dB + c dt / X driven by the
/// increment `db`. For D >= 2 a step that would cross zero is split by
/// Brownian-bridge refinement before reflecting. Returns the new value and
/// the lowest unreflected value seen, which detects visits to the origin.
fn euler_step(
    spec: &BesselSpec,
    x: f64,
    dt: f64,
    db: f64,
    depth: u32,
    rng: &mut RngStream,
) -> (f64, f64) {
    let c = spec.drift();
    if x == 0.0 && spec.dimension > 1.0 {
        let next = from_origin(spec.dimension, dt, rng);
        return (next, 0.0);
    }
    let drift = if c == 0.0 { 0.0 } else { c * dt / x };
    let next = x + db + drift;
    if next > 0.0 || spec.dimension < 2.0 || depth >= MAX_HALVINGS {
        return (next.abs(), next);
    }
    let half = 0.5 * dt;
    let db1 = 0.5 * db + (0.5 * half).sqrt() * rng.normal();
    let (mid, low1) = euler_step(spec, x, half, db1, depth + 1, rng);
    let (end, low2) = euler_step(spec, mid, half, db - db1, depth + 1, rng);
    (end, low1.min(low2))
}

/// Exact BES^(D) position after time dt from the origin: sqrt(dt chi^2_D).
fn from_origin(dimension: f64, dt: f64, rng: &mut RngStream) -> f64 {
    let chi = ChiSquared::new(dimension).expect("positive dimension");
    (dt * chi.sample(rng)).sqrt()
}

fn check_grid(dt: f64, horizon: f64) -> Result<usize> {
    if !(dt > 0.0) || !(horizon > 0.0) {
        return Err(Error::argument("dt and horizon must be positive"));
    }
    if dt >= horizon {
        return Err(Error::argument(format!(
            "dt = {dt} must be below the horizon {horizon}"
        )));
    }
    Ok((horizon / dt).round() as usize)
}

/// Euler-Maruyama path of the BES(D) SDE with post-step reflection.
pub fn simulate_bessel(
    spec: &BesselSpec,
    dt: f64,
    horizon: f64,
    rng: &mut RngStream,
) -> Result<ProcessPath> {
    let steps = check_grid(dt, horizon)?;
    let sd = dt.sqrt();
    let mut path = ProcessPath::with_capacity(steps + 1);
    let mut x = spec.x;
    path.push(0.0, x);
    for k in 1..=steps {
        let db = sd * rng.normal();
        x = euler_step(spec, x, dt, db, 0, rng).0;
        path.push(k as f64 * dt, x);
    }
    Ok(path)
}

/// The same scheme driven by prescribed Brownian increments.
pub fn simulate_bessel_with_increments(
    spec: &BesselSpec,
    dt: f64,
    increments: &[f64],
    rng: &mut RngStream,
) -> ProcessPath {
    let mut path = ProcessPath::with_capacity(increments.len() + 1);
    let mut x = spec.x;
    path.push(0.0, x);
    for (k, &db) in increments.iter().enumerate() {
        x = euler_step(spec, x, dt, db, 0, rng).0;
        path.push((k + 1) as f64 * dt, x);
    }
    path
}

/// First grid time at which a path is at or below `eps_hit`.
pub fn first_hit(path: &ProcessPath, eps_hit: f64) -> Option<f64> {
    path.times
        .iter()
        .zip(&path.values)
        .skip(1)
        .find(|(_, &v)| v <= eps_hit)
        .map(|(&t, _)| t)
}

/// First grid time with X <= eps_hit, or None if the horizon is reached.
/// The unreflected Euler value is tested, so a step that jumps across the
/// origin counts as a visit.
pub fn hitting_time(
    spec: &BesselSpec,
    dt: f64,
    horizon: f64,
    eps_hit: f64,
    rng: &mut RngStream,
) -> Result<Option<f64>> {
    let steps = check_grid(dt, horizon)?;
    let sd = dt.sqrt();
    let mut x = spec.x;
    for k in 1..=steps {
        let (next, low) = euler_step(spec, x, dt, sd * rng.normal(), 0, rng);
        x = next;
        if low <= eps_hit {
            return Ok(Some(k as f64 * dt));
        }
    }
    Ok(None)
}

/// Cardy's formula: P(T^x = T^y) for 3/2 < D < 2.
pub fn cardy_probability(dimension: f64, x: f64, y: f64) -> Result<f64> {
    if !(dimension > 1.5 && dimension < 2.0) {
        return Err(Error::domain(format!(
            "Cardy's formula holds for 3/2 < D < 2 (got {dimension})"
        )));
    }
    if !(x > 0.0 && x < y) {
        return Err(Error::argument(format!(
            "need 0 < x < y (got x = {x}, y = {y})"
        )));
    }
    let d = dimension;
    let z = (y - x) / y;
    let prefactor = gamma(d - 1.0) / (gamma(2.0 * (d - 1.0)) * gamma(2.0 - d));
    let f = gauss_2f1(2.0 * d - 3.0, d - 1.0, 2.0 * (d - 1.0), z)?;
    Ok(1.0 - prefactor * z.powf(2.0 * d - 3.0) * f)
}

/// Two Bessel processes of one dimension started at 0 < x < y and driven by
/// a common Brownian motion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlowCoupling {
    pub dimension: f64,
    pub x: f64,
    pub y: f64,
}

impl FlowCoupling {
    pub fn new(dimension: f64, x: f64, y: f64) -> Result<Self> {
        BesselSpec::new(dimension, x)?;
        if !(x > 0.0 && x < y) {
            return Err(Error::argument(format!(
                "need 0 < x < y (got x = {x}, y = {y})"
            )));
        }
        Ok(Self { dimension, x, y })
    }

    fn c(&self) -> f64 {
        (self.dimension - 1.0) / 2.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowVerdict {
    Simultaneous,
    Separated,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlowConfig {
    /// Real-time step at the start; steps shrink with (X^x / x)^2.
    pub dt: f64,
    pub eps_hit: f64,
    pub c_eq: f64,
    pub max_steps: usize,
}

impl FlowConfig {
    pub fn new(dt: f64, eps_hit: f64) -> Self {
        Self {
            dt,
            eps_hit,
            c_eq: DEFAULT_C_EQ,
            max_steps: 50_000_000,
        }
    }

    /// Ratio bounds r_lo = eps^2, r_hi = eps^-2 for R = (X^y - X^x)/X^x.
    pub fn ratio_bounds(&self) -> (f64, f64) {
        let e2 = self.eps_hit * self.eps_hit;
        (e2, 1.0 / e2)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowRecord {
    pub t_x: Option<f64>,
    pub t_y: Option<f64>,
    /// Threshold rule: at the first X^x <= eps, is X^y <= c_eq eps?
    pub simultaneous: FlowVerdict,
    /// Whether R first leaves (r_lo, r_hi) downward or upward.
    pub ratio: FlowVerdict,
    pub steps: usize,
}

/// State of the coupled pair in the clock ds = dt / (X^x)^2, where
/// u = ln X^x is Brownian motion with drift nu and l = ln R solves
/// dl = -dW + (1/2 - c - c/(1+R)) ds with the same dW.
struct FlowState {
    u: f64,
    l: f64,
    t: f64,
}

impl FlowState {
    fn xy(&self) -> (f64, f64) {
        let x = self.u.exp();
        (x, x * (1.0 + self.l.exp()))
    }
}

/// Largest intrinsic step, bounding the overshoot of the hitting thresholds.
const MAX_INTRINSIC_STEP: f64 = 0.05;

/// Intrinsic step at log-ratio l. The nonlinear part of the l-drift varies
/// on the scale R/(1+R)^2, so the step grows like (1+R)^2/(4R) away from
/// comparable pairs.
#[inline]
fn intrinsic_step(base: f64, r: f64) -> f64 {
    (base * (1.0 + r) * (1.0 + r) / (4.0 * r)).min(MAX_INTRINSIC_STEP.max(base))
}

#[inline]
fn flow_step(c: f64, base: f64, s: &mut FlowState, track_time: bool, rng: &mut RngStream) {
    let r = s.l.exp();
    let ds = intrinsic_step(base, r);
    let dw = ds.sqrt() * rng.normal();
    let u0 = s.u;
    s.u += dw + (c - 0.5) * ds;
    s.l += -dw + (0.5 - c - c / (1.0 + r)) * ds;
    if track_time {
        // real time elapsed: integral of e^{2u} ds, trapezoid
        s.t += 0.5 * ((2.0 * u0).exp() + (2.0 * s.u).exp()) * ds;
    }
}

/// Advances the coupled pair until the threshold rule and the ratio rule
/// have both decided, then follows X^y alone to estimate T^y.
pub fn simulate_flow(cp: &FlowCoupling, cfg: &FlowConfig, rng: &mut RngStream) -> FlowRecord {
    let base = cfg.dt / (cp.x * cp.x);
    let (r_lo, r_hi) = cfg.ratio_bounds();
    let (ln_lo, ln_hi, ln_eps) = (r_lo.ln(), r_hi.ln(), cfg.eps_hit.ln());
    let mut s = FlowState {
        u: cp.x.ln(),
        l: ((cp.y - cp.x) / cp.x).ln(),
        t: 0.0,
    };
    let mut rec = FlowRecord {
        t_x: None,
        t_y: None,
        simultaneous: FlowVerdict::Inconclusive,
        ratio: FlowVerdict::Inconclusive,
        steps: 0,
    };
    let mut y_at_hit = None;
    while rec.steps < cfg.max_steps {
        flow_step(cp.c(), base, &mut s, true, rng);
        rec.steps += 1;
        if rec.t_x.is_none() && s.u <= ln_eps {
            let (_, y) = s.xy();
            rec.t_x = Some(s.t);
            rec.simultaneous = if y <= cfg.c_eq * cfg.eps_hit {
                FlowVerdict::Simultaneous
            } else {
                FlowVerdict::Separated
            };
            y_at_hit = Some((y, s.t));
        }
        if rec.ratio == FlowVerdict::Inconclusive {
            if s.l <= ln_lo {
                rec.ratio = FlowVerdict::Simultaneous;
            } else if s.l >= ln_hi {
                rec.ratio = FlowVerdict::Separated;
            }
        }
        if rec.t_x.is_some() && rec.ratio != FlowVerdict::Inconclusive {
            break;
        }
    }
    rec.t_y = match (rec.simultaneous, y_at_hit) {
        (FlowVerdict::Simultaneous, _) => rec.t_x,
        (FlowVerdict::Separated, Some((y, t))) => follow_to_threshold(
            cp,
            cfg,
            y,
            t,
            cfg.max_steps - rec.steps.min(cfg.max_steps),
            rng,
        ),
        _ => None,
    };
    rec
}

/// Runs a single BES^(D) from y (at real time t0) in its own clock
/// ds = dt/X^2 until it reaches eps_hit.
fn follow_to_threshold(
    cp: &FlowCoupling,
    cfg: &FlowConfig,
    y: f64,
    t0: f64,
    budget: usize,
    rng: &mut RngStream,
) -> Option<f64> {
    let nu = cp.c() - 0.5;
    if nu >= 0.0 {
        return None;
    }
    let ds = (cfg.dt / (cp.x * cp.x)).min(MAX_INTRINSIC_STEP);
    let ln_eps = cfg.eps_hit.ln();
    let mut v = y.ln();
    let mut t = t0;
    for _ in 0..budget {
        let v0 = v;
        v += ds.sqrt() * rng.normal() + nu * ds;
        t += 0.5 * ((2.0 * v0).exp() + (2.0 * v).exp()) * ds;
        if v <= ln_eps {
            return Some(t);
        }
    }
    None
}

/// Per-threshold outcome of one coupled path for a decreasing list of
/// eps values, sharing a single trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct FlowOutcome {
    pub threshold: FlowVerdict,
    pub ratio: FlowVerdict,
}

/// Number of paths advanced in lockstep by `flow_outcomes`; interleaving
/// independent paths hides the latency of each step's dependency chain.
const LANES: usize = 4;

#[derive(Clone)]
struct Lane {
    path: usize,
    u: f64,
    l: f64,
    iu: usize,
    ir: usize,
    steps: usize,
}

/// Runs `paths` coupled trajectories and reports, for each path and each
/// eps in the strictly decreasing list, the threshold-rule and ratio-rule
/// verdicts. Paths are advanced LANES at a time; normals are drawn in lane
/// order, so the output is a pure function of the stream.
pub fn flow_outcomes(
    cp: &FlowCoupling,
    dt: f64,
    eps: &[f64],
    c_eq: f64,
    paths: usize,
    max_steps: usize,
    rng: &mut RngStream,
) -> Vec<Vec<FlowOutcome>> {
    debug_assert!(eps.windows(2).all(|w| w[0] > w[1]));
    let base = dt / (cp.x * cp.x);
    let c = cp.c();
    let n_eps = eps.len();
    let ln_eps: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
    let ln_r: Vec<f64> = eps.iter().map(|e| 2.0 * e.ln()).collect();
    let undecided = FlowOutcome {
        threshold: FlowVerdict::Inconclusive,
        ratio: FlowVerdict::Inconclusive,
    };
    let mut out = vec![vec![undecided; n_eps]; paths];
    let fresh = |path: usize| Lane {
        path,
        u: cp.x.ln(),
        l: ((cp.y - cp.x) / cp.x).ln(),
        iu: 0,
        ir: 0,
        steps: 0,
    };
    let mut lanes: Vec<Option<Lane>> = vec![None; LANES];
    let mut next = 0;
    let mut z = [0.0; LANES];
    loop {
        for lane in lanes.iter_mut() {
            if lane.is_none() && next < paths {
                *lane = Some(fresh(next));
                next += 1;
            }
        }
        if lanes.iter().all(Option::is_none) {
            break;
        }
        for (zk, lane) in z.iter_mut().zip(&lanes) {
            if lane.is_some() {
                *zk = rng.normal();
            }
        }
        for (zk, slot) in z.iter().zip(lanes.iter_mut()) {
            let Some(lane) = slot else { continue };
            let r = lane.l.exp();
            let ds = intrinsic_step(base, r);
            let dw = ds.sqrt() * zk;
            lane.u += dw + (c - 0.5) * ds;
            lane.l += -dw + (0.5 - c - c / (1.0 + r)) * ds;
            lane.steps += 1;
            let rec = &mut out[lane.path];
            while lane.iu < n_eps && lane.u <= ln_eps[lane.iu] {
                let y = lane.u.exp() * (1.0 + lane.l.exp());
                rec[lane.iu].threshold = if y <= c_eq * eps[lane.iu] {
                    FlowVerdict::Simultaneous
                } else {
                    FlowVerdict::Separated
                };
                lane.iu += 1;
            }
            while lane.ir < n_eps && (lane.l <= ln_r[lane.ir] || lane.l >= -ln_r[lane.ir]) {
                rec[lane.ir].ratio = if lane.l <= ln_r[lane.ir] {
                    FlowVerdict::Simultaneous
                } else {
                    FlowVerdict::Separated
                };
                lane.ir += 1;
            }
            if (lane.iu == n_eps && lane.ir == n_eps) || lane.steps >= max_steps {
                *slot = None;
            }
        }
    }
    out
}

/// Coupled real-time Euler path with the scale-adaptive step
/// h = dt (X^x/x)^2, stopped at the first X^x <= eps_hit. Values are
/// (X^x, X^y - X^x); the gap is advanced multiplicatively so that it stays
/// resolvable when both paths are large.
pub fn flow_path(
    cp: &FlowCoupling,
    dt: f64,
    eps_hit: f64,
    max_steps: usize,
    rng: &mut RngStream,
) -> ProcessPath<[f64; 2]> {
    let c = cp.c();
    let mut path = ProcessPath::with_capacity(1024);
    let (mut x, mut gap, mut t) = (cp.x, cp.y - cp.x, 0.0);
    path.push(0.0, [x, gap]);
    for _ in 0..max_steps {
        let h = dt * (x / cp.x).powi(2);
        let db = h.sqrt() * rng.normal();
        let y = x + gap;
        // (y + db + c h/y) - (x + db + c h/x) = gap (1 - c h / (x y))
        gap *= 1.0 - c * h / (x * y);
        x = (x + db + c * h / x).abs();
        t += h;
        path.push(t, [x, gap]);
        if x <= eps_hit {
            path.absorbed_at = Some(t);
            break;
        }
    }
    path
}

/// Lamperti's relation: X(A_t) = exp(B_t + nu t) with
/// A_t = int_0^t exp(2(B_s + nu s)) ds. Returns the value of the
/// time-changed geometric BM at clock time `clock` (None if the clock is not
/// reached before the horizon) together with the A-path monotonicity flag.
pub fn lamperti_sample(
    nu: f64,
    y0: f64,
    clock: f64,
    dt: f64,
    horizon: f64,
    rng: &mut RngStream,
) -> (Option<f64>, bool) {
    let sd = dt.sqrt();
    let mut log_z = y0;
    let mut a = 0.0;
    let mut increasing = true;
    let steps = (horizon / dt).ceil() as usize;
    if clock <= 0.0 {
        return (Some(y0.exp()), true);
    }
    for _ in 0..steps {
        let prev_log = log_z;
        log_z += sd * rng.normal() + nu * dt;
        let da = 0.5 * ((2.0 * prev_log).exp() + (2.0 * log_z).exp()) * dt;
        increasing &= da > 0.0;
        if a + da >= clock {
            let frac = (clock - a) / da;
            return (
                Some((prev_log + frac * (log_z - prev_log)).exp()),
                increasing,
            );
        }
        a += da;
    }
    (None, increasing)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::rng::normal_cdf;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn integrate_density(spec: &BesselSpec, t: f64) -> f64 {
        bessel_cdf(spec, t, spec.x + 12.0 * t.sqrt()).unwrap()
    }

    #[test]
    fn closed_forms_d3_and_d1() {
        let s3 = BesselSpec::new(3.0, 0.7).unwrap();
        let s1 = BesselSpec::new(1.0, 0.7).unwrap();
        assert_relative_eq!(
            bessel_density(&s3, 1.0, 1.3).unwrap(),
            density_d3(1.0, 0.7, 1.3),
            max_relative = 1e-12
        );
        assert_relative_eq!(
            bessel_density(&s1, 1.0, 1.3).unwrap(),
            density_d1(1.0, 0.7, 1.3),
            max_relative = 1e-12
        );
        for i in 0..10 {
            for j in 0..10 {
                let x = 0.1 + 0.45 * i as f64;
                let y = 0.05 + 0.5 * j as f64;
                let s3 = BesselSpec::new(3.0, x).unwrap();
                let s1 = BesselSpec::new(1.0, x).unwrap();
                let (a, b) = (bessel_density(&s3, 0.8, y).unwrap(), density_d3(0.8, x, y));
                assert!(
                    (a - b).abs() <= 1e-12 * b.abs().max(1e-3),
                    "{x} {y} {a} {b}"
                );
                let (a, b) = (bessel_density(&s1, 0.8, y).unwrap(), density_d1(0.8, x, y));
                assert!(
                    (a - b).abs() <= 1e-12 * b.abs().max(1e-3),
                    "{x} {y} {a} {b}"
                );
            }
        }
    }

    #[test]
    fn densities_normalize() {
        for &d in &[1.4, 2.0, 2.5, 3.0] {
            let spec = BesselSpec::new(d, 0.5).unwrap();
            assert!((integrate_density(&spec, 1.0) - 1.0).abs() < 1e-10, "D={d}");
        }
        let from_zero = BesselSpec::new(2.5, 0.0).unwrap();
        assert!((integrate_density(&from_zero, 1.0) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn origin_branch_is_the_limit_of_the_general_branch() {
        let t = 0.7;
        for &d in &[1.5, 2.0, 3.0, 4.2] {
            let at0 = BesselSpec::new(d, 0.0).unwrap();
            let near = BesselSpec::new(d, 1e-7).unwrap();
            for &y in &[0.3, 1.0, 2.2] {
                let a = bessel_density(&at0, t, y).unwrap();
                let b = bessel_density(&near, t, y).unwrap();
                assert_relative_eq!(a, b, max_relative = 1e-6);
            }
        }
    }

    #[test]
    fn density_errors() {
        let spec = BesselSpec::new(3.0, 1.0).unwrap();
        assert!(matches!(
            bessel_density(&spec, 0.0, 1.0),
            Err(Error::Domain(_))
        ));
        assert!(BesselSpec::new(-1.0, 1.0).is_err());
        assert_eq!(BesselSpec::new(3.0, 1.0).unwrap().nu, 0.5);
    }

    #[test]
    fn backward_kolmogorov_residual_is_second_order() {
        let (t, y) = (0.8, 1.1);
        for &d in &[1.5, 2.0, 3.0] {
            let u = |x: f64, t: f64| bessel_density(&BesselSpec::new(d, x).unwrap(), t, y).unwrap();
            let residual = |h: f64| {
                let x = 0.9;
                let ut = (u(x, t + h) - u(x, t - h)) / (2.0 * h);
                let ux = (u(x + h, t) - u(x - h, t)) / (2.0 * h);
                let uxx = (u(x + h, t) - 2.0 * u(x, t) + u(x - h, t)) / (h * h);
                (ut - 0.5 * uxx - (d - 1.0) / (2.0 * x) * ux).abs()
            };
            let (r1, r2) = (residual(0.02), residual(0.01));
            assert!(r1 < 1e-2, "D={d} residual {r1}");
            let ratio = r1 / r2;
            assert!((3.0..5.0).contains(&ratio), "D={d} ratio {ratio}");
        }
    }

    #[test]
    fn chapman_kolmogorov_d25() {
        let rule = QuadratureRule::gauss_legendre(64);
        let (s, t, x, y) = (0.4, 0.6, 0.8, 1.2);
        let lhs = rule.integrate_panels(
            |z| {
                let a = bessel_density(&BesselSpec::new(2.5, x).unwrap(), s, z).unwrap();
                let b = bessel_density(&BesselSpec::new(2.5, z).unwrap(), t, y).unwrap();
                a * b
            },
            0.0,
            12.0,
            24,
        );
        let rhs = bessel_density(&BesselSpec::new(2.5, x).unwrap(), s + t, y).unwrap();
        assert_relative_eq!(lhs, rhs, max_relative = 1e-10);
    }

    proptest! {
        #[test]
        fn density_nonnegative(d in 0.3f64..5.0, x in 0.0f64..4.0, y in 0.0f64..6.0, t in 0.05f64..3.0) {
            let spec = BesselSpec::new(d, x).unwrap();
            let p = bessel_density(&spec, t, y).unwrap();
            prop_assert!(p >= 0.0);
        }
    }

    #[test]
    fn d1_from_origin_is_reflected_bm_pathwise() {
        let mut rng = RngStream::new(11, 0);
        let dt: f64 = 1e-3;
        let db: Vec<f64> = (0..2000).map(|_| dt.sqrt() * rng.normal()).collect();
        let mut b = 0.0f64;
        let mut driving = Vec::with_capacity(db.len());
        let mut abs_b = vec![0.0];
        for &inc in &db {
            // |B_{k+1}| = | |B_k| + sgn(B_k) dB_k |
            driving.push(if b < 0.0 { -inc } else { inc });
            b += inc;
            abs_b.push(b.abs());
        }
        let spec = BesselSpec::new(1.0, 0.0).unwrap();
        let path = simulate_bessel_with_increments(&spec, dt, &driving, &mut rng);
        for (a, e) in path.values.iter().zip(&abs_b) {
            assert!((a - e).abs() < 1e-12);
        }
    }

    #[test]
    fn paths_stay_nonnegative_and_replay() {
        for &d in &[0.5, 1.5, 2.0, 3.0] {
            let spec = BesselSpec::new(d, 0.2).unwrap();
            let p1 = simulate_bessel(&spec, 1e-3, 1.0, &mut RngStream::new(2, 0)).unwrap();
            let p2 = simulate_bessel(&spec, 1e-3, 1.0, &mut RngStream::new(2, 0)).unwrap();
            assert!(p1.values.iter().all(|&v| v >= 0.0));
            assert_eq!(p1, p2);
            assert_eq!(p1.len(), 1001);
        }
        let spec = BesselSpec::new(3.0, 0.2).unwrap();
        assert!(simulate_bessel(&spec, 1.0, 1.0, &mut RngStream::new(2, 0)).is_err());
        let origin = BesselSpec::new(2.5, 0.0).unwrap();
        let p = simulate_bessel(&origin, 1e-3, 0.1, &mut RngStream::new(2, 0)).unwrap();
        assert!(p.values[1..].iter().all(|&v| v > 0.0));
    }

    #[test]
    fn d1_hitting_frequency_matches_reflection_principle() {
        let spec = BesselSpec::new(1.0, 0.5).unwrap();
        let mut rng = RngStream::new(4, 0);
        let n = 4000;
        let hits = (0..n)
            .filter(|_| {
                hitting_time(&spec, 1e-3, 1.0, 1e-3, &mut rng)
                    .unwrap()
                    .is_some()
            })
            .count();
        let p = hits as f64 / n as f64;
        let exact = 2.0 * (1.0 - normal_cdf(0.5));
        let se = (exact * (1.0 - exact) / n as f64).sqrt();
        // discrete monitoring lowers the frequency by O(sqrt(dt))
        assert!((p - exact).abs() < 3.0 * se + 0.03, "p={p} exact={exact}");
    }

    #[test]
    fn halving_eps_does_not_shorten_the_hitting_time() {
        let spec = BesselSpec::new(1.3, 0.3).unwrap();
        for seed in 0..20 {
            let a = hitting_time(&spec, 1e-3, 5.0, 1e-2, &mut RngStream::new(seed, 0)).unwrap();
            let b = hitting_time(&spec, 1e-3, 5.0, 5e-3, &mut RngStream::new(seed, 0)).unwrap();
            if let (Some(a), Some(b)) = (a, b) {
                assert!(b >= a);
            }
            if a.is_none() {
                assert!(b.is_none());
            }
        }
    }

    #[test]
    fn cardy_values() {
        assert!(cardy_probability(1.2, 0.5, 1.0).is_err());
        assert!(cardy_probability(1.7, 1.0, 0.5).is_err());
        // symmetric case: the scale function of R gives exactly 1/2
        assert_relative_eq!(
            cardy_probability(5.0 / 3.0, 0.5, 1.0).unwrap(),
            0.5,
            max_relative = 1e-12
        );
        let near = cardy_probability(1.7, 0.999_999, 1.0).unwrap();
        assert!(near > 0.99);
        let mut prev = 1.0;
        for k in 0..=14 {
            let y = 0.6 + 0.1 * k as f64;
            let p = cardy_probability(1.7, 0.5, y).unwrap();
            assert!(p <= prev + 1e-15 && p > 0.0);
            prev = p;
        }
    }

    #[test]
    fn flow_pair_is_ordered_before_the_hit() {
        let cp = FlowCoupling::new(5.0 / 3.0, 0.5, 1.0).unwrap();
        for seed in 0..10 {
            let path = flow_path(&cp, 1e-4, 1e-3, 2_000_000, &mut RngStream::new(seed, 0));
            assert!(path.absorbed_at.is_some());
            for v in &path.values[..path.len() - 1] {
                assert!(v[0] > 0.0 && v[1] > 0.0);
            }
        }
    }

    #[test]
    fn flow_record_is_consistent() {
        let cp = FlowCoupling::new(5.0 / 3.0, 0.5, 1.0).unwrap();
        let cfg = FlowConfig::new(1e-3, 1e-2);
        for seed in 0..20 {
            let rec = simulate_flow(&cp, &cfg, &mut RngStream::new(seed, 3));
            let tx = rec.t_x.expect("x hits 0 for D < 2");
            assert_ne!(rec.ratio, FlowVerdict::Inconclusive);
            match rec.simultaneous {
                FlowVerdict::Simultaneous => assert_eq!(rec.t_y, Some(tx)),
                FlowVerdict::Separated => assert!(rec.t_y.is_none_or(|ty| ty > tx)),
                FlowVerdict::Inconclusive => unreachable!(),
            }
        }
    }

    #[test]
    fn lamperti_clock_start_and_monotone() {
        let mut rng = RngStream::new(8, 0);
        assert_eq!(
            lamperti_sample(0.3, 0.2, 0.0, 1e-3, 5.0, &mut rng).0,
            Some(0.2f64.exp())
        );
        let (v, inc) = lamperti_sample(0.5, 0.0, 1.0, 1e-3, 50.0, &mut rng);
        assert!(v.is_some() && inc);
    }
}
