//! Chordal Loewner evolution dg/dt = ((D-1)/2) / (g + B(t)) driven by a
//! sampled Brownian motion, discretized by exact vertical-slit maps.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mc::{family, Sharding};
use crate::numerics::rng::RngStream;
use crate::stats::MeanAccumulator;

pub const DEFAULT_EPS_SWALLOW: f64 = 1e-4;
pub const SELF_INTERSECTION_RESOLUTION: f64 = 1e-2;
/// Im(g + B) / |g + B| below this means the point sits on the real line to
/// working precision. Such a point is swallowed when g + B next crosses 0,
/// since exact slit maps carry enclosed points onto the real line rather
/// than to 0.
pub const COLLAPSE_RATIO: f64 = 1e-8;

fn check_dimension(d: f64) -> Result<()> {
    if !(d > 1.0) || !d.is_finite() {
        return Err(Error::domain(format!("SLE needs D > 1 (got {d})")));
    }
    Ok(())
}

/// kappa = 4 / (D - 1).
pub fn kappa(d: f64) -> Result<f64> {
    check_dimension(d)?;
    Ok(4.0 / (d - 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Simple,
    SelfIntersecting,
    SpaceFilling,
}

pub fn phase(d: f64) -> Result<Phase> {
    check_dimension(d)?;
    Ok(if d >= 2.0 {
        Phase::Simple
    } else if d > 1.5 {
        Phase::SelfIntersecting
    } else {
        Phase::SpaceFilling
    })
}

/// Hausdorff dimension of the SLE^(D) path: 1 + 1/(2(D-1)) for D >= 3/2,
/// and 2 below.
pub fn hausdorff_dimension(d: f64) -> Result<f64> {
    check_dimension(d)?;
    Ok(if d >= 1.5 {
        1.0 + 1.0 / (2.0 * (d - 1.0))
    } else {
        2.0
    })
}

/// One Brownian path B on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DrivingFunction {
    pub dimension: f64,
    pub dt: f64,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl DrivingFunction {
    pub fn sample(dimension: f64, dt: f64, horizon: f64, rng: &mut RngStream) -> Result<Self> {
        let steps = grid_steps(dimension, dt, horizon)?;
        let sd = dt.sqrt();
        let mut values = Vec::with_capacity(steps + 1);
        let mut b = 0.0;
        values.push(b);
        for _ in 0..steps {
            b += sd * rng.normal();
            values.push(b);
        }
        Ok(Self::on_grid(dimension, dt, values))
    }

    /// B identically zero.
    pub fn zero(dimension: f64, dt: f64, horizon: f64) -> Result<Self> {
        let steps = grid_steps(dimension, dt, horizon)?;
        Ok(Self::on_grid(dimension, dt, vec![0.0; steps + 1]))
    }

    pub fn from_values(dimension: f64, dt: f64, values: Vec<f64>) -> Result<Self> {
        check_dimension(dimension)?;
        if values.first() != Some(&0.0) {
            return Err(Error::argument("driving function must start at B(0) = 0"));
        }
        if !(dt > 0.0) {
            return Err(Error::argument("dt must be positive"));
        }
        Ok(Self::on_grid(dimension, dt, values))
    }

    fn on_grid(dimension: f64, dt: f64, values: Vec<f64>) -> Self {
        let times = (0..values.len()).map(|k| k as f64 * dt).collect();
        Self {
            dimension,
            dt,
            times,
            values,
        }
    }

    pub fn steps(&self) -> usize {
        self.values.len() - 1
    }

    pub fn horizon(&self) -> f64 {
        self.steps() as f64 * self.dt
    }
}

fn grid_steps(dimension: f64, dt: f64, horizon: f64) -> Result<usize> {
    check_dimension(dimension)?;
    if !(dt > 0.0) || !(horizon > 0.0) || dt > horizon {
        return Err(Error::argument(format!(
            "need 0 < dt <= horizon (got dt = {dt}, horizon = {horizon})"
        )));
    }
    Ok((horizon / dt).round() as usize)
}

/// Elementary slit map of the standard chordal parametrization:
/// g -> w + sqrt((g - w)^2 + 4 dt), root taken in the closed upper half-plane.
fn slit_forward(g_hat: Complex64, w_hat: f64, dt: f64) -> Complex64 {
    let h = g_hat - w_hat;
    w_hat + upper_sqrt_shifted(h, 4.0 * dt)
}

/// Inverse slit map: w + sqrt((g - w)^2 - 4 dt).
fn slit_inverse(g_hat: Complex64, w_hat: f64, dt: f64) -> Complex64 {
    let h = g_hat - w_hat;
    w_hat + upper_sqrt_shifted(h, -4.0 * dt)
}

/// sqrt(h^2 + c) on the branch continuing h: the root in the closed upper
/// half-plane, and for real results the one on the side of Re h. When the
/// root is close to h it is refined as h + c / (h + root) to avoid
/// cancellation at large |h|.
fn upper_sqrt_shifted(h: Complex64, c: f64) -> Complex64 {
    let mut s = (h * h + c).sqrt();
    if s.im < 0.0 || (s.im == 0.0 && s.re * h.re < 0.0) {
        s = -s;
    }
    let sum = h + s;
    if sum.norm() > h.norm() {
        s = h + c / sum;
        if s.im < 0.0 {
            s.im = 0.0;
        }
    }
    s
}

/// Loewner chain with piecewise-constant driving: on step k the driving
/// value is B(t_k) at the right end of the step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LoewnerChain {
    pub driving: DrivingFunction,
    /// kappa = 4/(D-1); the chain works with g_hat = sqrt(kappa) g and
    /// W_hat = -sqrt(kappa) B.
    pub kappa: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SwallowStatus {
    Alive,
    Swallowed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SwallowReport {
    pub z: [f64; 2],
    pub t_z: Option<f64>,
    pub status: SwallowStatus,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PointEvolution {
    Alive(Complex64),
    Swallowed(SwallowReport),
}

impl LoewnerChain {
    pub fn new(driving: DrivingFunction) -> Result<Self> {
        let kappa = kappa(driving.dimension)?;
        Ok(Self { driving, kappa })
    }

    pub fn dimension(&self) -> f64 {
        self.driving.dimension
    }

    pub fn steps(&self) -> usize {
        self.driving.steps()
    }

    /// Half-plane capacity a(t) = (D-1) t / 2 after `steps` steps.
    pub fn capacity(&self, steps: usize) -> f64 {
        0.5 * (self.dimension() - 1.0) * steps as f64 * self.driving.dt
    }

    fn w_hat(&self, k: usize) -> f64 {
        -self.kappa.sqrt() * self.driving.values[k]
    }

    fn steps_until(&self, t: f64) -> Result<usize> {
        let k = (t / self.driving.dt).round();
        if !(k >= 0.0) || k as usize > self.steps() {
            return Err(Error::argument(format!(
                "t = {t} outside the chain horizon {}",
                self.driving.horizon()
            )));
        }
        Ok(k as usize)
    }

    /// Applies steps `from+1 ..= to` to a point given in g-coordinates.
    /// Returns the image, or the step at which the point was swallowed.
    pub fn apply_steps(
        &self,
        g: Complex64,
        from: usize,
        to: usize,
        eps: f64,
    ) -> std::result::Result<Complex64, usize> {
        let sk = self.kappa.sqrt();
        let dt = self.driving.dt;
        let eps_hat = sk * eps;
        let mut g_hat = sk * g;
        let mut on_axis = g.im <= COLLAPSE_RATIO * g.norm();
        let mut last = g_hat - self.w_hat(from);
        for k in from + 1..=to {
            let w = self.w_hat(k);
            let before = g_hat - w;
            if before.norm() <= eps_hat || (on_axis && before.re * last.re <= 0.0) {
                return Err(k);
            }
            g_hat = slit_forward(g_hat, w, dt);
            last = g_hat - w;
            if last.norm() <= eps_hat {
                return Err(k);
            }
            on_axis = on_axis || last.im <= COLLAPSE_RATIO * last.norm();
        }
        Ok(g_hat / sk)
    }

    /// g_t(z), or a swallow report if z leaves H_t before t.
    pub fn evolve_point(&self, z: Complex64, t: f64, eps_swallow: f64) -> Result<PointEvolution> {
        if z == Complex64::new(0.0, 0.0) {
            return Err(Error::domain("z = 0 is the starting point of the curve"));
        }
        if z.im < 0.0 {
            return Err(Error::domain("z must lie in the closed upper half-plane"));
        }
        let k = self.steps_until(t)?;
        Ok(match self.apply_steps(z, 0, k, eps_swallow) {
            Ok(g) => PointEvolution::Alive(g),
            Err(step) => PointEvolution::Swallowed(SwallowReport {
                z: [z.re, z.im],
                t_z: Some(step as f64 * self.driving.dt),
                status: SwallowStatus::Swallowed,
            }),
        })
    }

    /// Swallow report for z over the whole chain.
    pub fn swallow_report(&self, z: Complex64, eps_swallow: f64) -> Result<SwallowReport> {
        Ok(
            match self.evolve_point(z, self.driving.horizon(), eps_swallow)? {
                PointEvolution::Alive(_) => SwallowReport {
                    z: [z.re, z.im],
                    t_z: None,
                    status: SwallowStatus::Alive,
                },
                PointEvolution::Swallowed(r) => r,
            },
        )
    }

    /// Tip of the curve after k steps: the preimage of -B(t_k) under the
    /// composed slit maps.
    pub fn tip(&self, k: usize) -> Result<Complex64> {
        if k == 0 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let sk = self.kappa.sqrt();
        let dt = self.driving.dt;
        let mut g_hat = Complex64::new(self.w_hat(k), 0.0);
        for j in (1..=k).rev() {
            g_hat = slit_inverse(g_hat, self.w_hat(j), dt);
            if !(g_hat.re.is_finite() && g_hat.im.is_finite()) || g_hat.im < 0.0 {
                return Err(Error::BranchCut { step: j });
            }
        }
        Ok(g_hat / sk)
    }

    /// gamma(t_k) for every grid time.
    pub fn trace(&self) -> Result<Vec<Complex64>> {
        (0..=self.steps()).map(|k| self.tip(k)).collect()
    }

    /// Chain restricted to the driving samples of steps `from ..= to`,
    /// re-based so that it starts at time 0 with the same increments.
    pub fn window(&self, from: usize, to: usize) -> LoewnerChain {
        let b0 = self.driving.values[from];
        let values = self.driving.values[from..=to]
            .iter()
            .map(|b| b - b0)
            .collect();
        LoewnerChain {
            driving: DrivingFunction::on_grid(self.dimension(), self.driving.dt, values),
            kappa: self.kappa,
        }
    }
}

/// Pairs of trace points closer than `resolution` although the trace left
/// the 2*resolution ball between them.
pub fn self_intersections(trace: &[Complex64], resolution: f64) -> usize {
    use std::collections::HashMap;
    let cell = |z: &Complex64| {
        (
            (z.re / resolution).floor() as i64,
            (z.im / resolution).floor() as i64,
        )
    };
    let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (i, z) in trace.iter().enumerate() {
        grid.entry(cell(z)).or_default().push(i);
    }
    let mut count = 0;
    for (i, z) in trace.iter().enumerate() {
        let (cx, cy) = cell(z);
        for dx in -1..=1 {
            for dy in -1..=1 {
                let Some(list) = grid.get(&(cx + dx, cy + dy)) else {
                    continue;
                };
                for &j in list.iter().filter(|&&j| j > i + 1) {
                    if (trace[j] - z).norm() >= resolution {
                        continue;
                    }
                    let left = trace[i + 1..j]
                        .iter()
                        .any(|w| (w - z).norm() > 2.0 * resolution);
                    if left {
                        count += 1;
                    }
                }
            }
        }
    }
    count
}

fn segments_cross(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> bool {
    let orient = |p: Complex64, q: Complex64, r: Complex64| ((q - p).conj() * (r - p)).im;
    let (o1, o2) = (orient(a, b, c), orient(a, b, d));
    let (o3, o4) = (orient(c, d, a), orient(c, d, b));
    o1 * o2 < 0.0 && o3 * o4 < 0.0
}

/// Number of proper crossings between non-adjacent segments of the polyline
/// through the trace points.
pub fn polyline_crossings(trace: &[Complex64]) -> usize {
    use std::collections::HashMap;
    if trace.len() < 4 {
        return 0;
    }
    let segs: Vec<(Complex64, Complex64)> = trace.windows(2).map(|w| (w[0], w[1])).collect();
    let size = segs
        .iter()
        .map(|(a, b)| (b - a).norm())
        .fold(0.0, f64::max)
        .max(1e-12);
    let cell = |z: Complex64| ((z.re / size).floor() as i64, (z.im / size).floor() as i64);
    let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (i, &(a, _)) in segs.iter().enumerate() {
        grid.entry(cell(a)).or_default().push(i);
    }
    let mut count = 0;
    for (i, &(a, b)) in segs.iter().enumerate() {
        let (cx, cy) = cell(a);
        for dx in -2..=2 {
            for dy in -2..=2 {
                let Some(list) = grid.get(&(cx + dx, cy + dy)) else {
                    continue;
                };
                for &j in list.iter().filter(|&&j| j > i + 1) {
                    if segments_cross(a, b, segs[j].0, segs[j].1) {
                        count += 1;
                    }
                }
            }
        }
    }
    count
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SwallowRow {
    pub z: [f64; 2],
    pub frequency: f64,
    pub stderr: f64,
    pub chains: usize,
}

/// Fraction of sampled chains that swallow each test point before the horizon.
pub fn swallow_statistics(
    dimension: f64,
    dt: f64,
    horizon: f64,
    points: &[Complex64],
    samples: usize,
    eps_swallow: f64,
    sharding: &Sharding,
) -> Result<Vec<SwallowRow>> {
    grid_steps(dimension, dt, horizon)?;
    if points
        .iter()
        .any(|z| z.im < 0.0 || *z == Complex64::new(0.0, 0.0))
    {
        return Err(Error::domain(
            "test points must lie in the closed upper half-plane minus 0",
        ));
    }
    let per_shard = sharding.run(family::SLE, samples, |rng, n| {
        let mut acc = vec![MeanAccumulator::new(); points.len()];
        for _ in 0..n {
            let driving =
                DrivingFunction::sample(dimension, dt, horizon, rng).expect("validated grid");
            let chain = LoewnerChain::new(driving).expect("validated dimension");
            for (a, &z) in acc.iter_mut().zip(points) {
                let hit = chain.apply_steps(z, 0, chain.steps(), eps_swallow).is_err();
                a.push(if hit { 1.0 } else { 0.0 });
            }
        }
        acc
    });
    let mut total = vec![MeanAccumulator::new(); points.len()];
    for shard in &per_shard {
        for (t, a) in total.iter_mut().zip(shard) {
            t.merge(a);
        }
    }
    Ok(points
        .iter()
        .zip(total)
        .map(|(z, a)| SwallowRow {
            z: [z.re, z.im],
            frequency: a.mean(),
            stderr: a.stderr(),
            chains: a.count as usize,
        })
        .collect())
}

/// Swallow frequencies at dt and at dt/2 on the same seeds, as a check that
/// the discrete first-hit has settled.
pub fn swallow_refinement(
    dimension: f64,
    dt: f64,
    horizon: f64,
    points: &[Complex64],
    samples: usize,
    eps_swallow: f64,
    sharding: &Sharding,
) -> Result<[Vec<SwallowRow>; 2]> {
    Ok([
        swallow_statistics(
            dimension,
            dt,
            horizon,
            points,
            samples,
            eps_swallow,
            sharding,
        )?,
        swallow_statistics(
            dimension,
            0.5 * dt,
            horizon,
            points,
            samples,
            eps_swallow,
            sharding,
        )?,
    ])
}
