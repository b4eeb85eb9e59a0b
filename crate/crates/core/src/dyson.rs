//! The Dyson model at beta = 2 in its two aspects: eigenvalues of a
//! Hermitian-matrix Brownian motion, and noncolliding Brownian motion as an
//! h-transform via the Karlin-McGregor determinant. Also the entire-function
//! weight Phi and a Monte Carlo check of the HCIZ integral.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;
use statrs::function::gamma::gamma;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::mc::{family, Sharding};
use crate::numerics::linalg::{det_real, hermitian_eigenvalues};
use crate::numerics::rng::RngStream;
use crate::numerics::special::heat_kernel_unchecked;
use crate::path::ProcessPath;
use crate::stats::MeanAccumulator;

pub const MAX_HALVINGS: u32 = 10;
pub const PHI_RELATIVE_TOLERANCE: f64 = 1e-10;
const PHI_MAX_WINDOW: f64 = 1e12;

/// A point of the Weyl chamber x_1 < x_2 < ... < x_N.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeylPoint {
    coordinates: Vec<f64>,
}

impl WeylPoint {
    pub fn new(coordinates: Vec<f64>) -> Result<Self> {
        if coordinates.is_empty() {
            return Err(Error::argument(
                "a Weyl point needs at least one coordinate",
            ));
        }
        if coordinates.iter().any(|x| !x.is_finite()) {
            return Err(Error::argument("coordinates must be finite"));
        }
        if coordinates.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::domain(format!(
                "{coordinates:?} is not strictly increasing"
            )));
        }
        Ok(Self { coordinates })
    }

    /// N equally spaced points centred at 0.
    pub fn spaced(n: usize, spacing: f64) -> Result<Self> {
        let mid = 0.5 * (n as f64 - 1.0);
        Self::new((0..n).map(|i| spacing * (i as f64 - mid)).collect())
    }

    pub fn len(&self) -> usize {
        self.coordinates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coordinates.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.coordinates
    }
}

impl std::ops::Deref for WeylPoint {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.coordinates
    }
}

/// A configuration xi = sum of delta measures: either finitely many points
/// (with multiplicity) or the integer lattice.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum PointConfiguration {
    Finite { points: Vec<f64> },
    IntegerLattice,
}

impl PointConfiguration {
    pub fn finite(mut points: Vec<f64>) -> Result<Self> {
        if points.iter().any(|x| !x.is_finite()) {
            return Err(Error::argument("points must be finite"));
        }
        points.sort_by(f64::total_cmp);
        Ok(Self::Finite { points })
    }

    /// xi(R), or None for the lattice.
    pub fn total_mass(&self) -> Option<usize> {
        match self {
            Self::Finite { points } => Some(points.len()),
            Self::IntegerLattice => None,
        }
    }

    /// Distinct support points with their multiplicities.
    pub fn support(&self) -> Option<Vec<(f64, usize)>> {
        let Self::Finite { points } = self else {
            return None;
        };
        let mut out: Vec<(f64, usize)> = Vec::new();
        for &x in points {
            match out.last_mut() {
                Some((y, m)) if *y == x => *m += 1,
                _ => out.push((x, 1)),
            }
        }
        Some(out)
    }

    pub fn contains(&self, u: f64) -> bool {
        match self {
            Self::Finite { points } => points.binary_search_by(|p| p.total_cmp(&u)).is_ok(),
            Self::IntegerLattice => u.fract() == 0.0 && u.is_finite(),
        }
    }

    /// Distinct support points in [lo, hi].
    pub fn support_in(&self, lo: f64, hi: f64) -> Vec<f64> {
        match self {
            Self::Finite { .. } => self
                .support()
                .unwrap_or_default()
                .into_iter()
                .map(|(x, _)| x)
                .filter(|&x| x >= lo && x <= hi)
                .collect(),
            Self::IntegerLattice => {
                let (a, b) = (lo.ceil() as i64, hi.floor() as i64);
                (a..=b).map(|n| n as f64).collect()
            }
        }
    }

    pub fn to_weyl(&self) -> Result<WeylPoint> {
        match self {
            Self::Finite { points } => WeylPoint::new(points.clone()),
            Self::IntegerLattice => Err(Error::domain("the lattice has infinitely many points")),
        }
    }
}

/// h_N(x) = prod_{i<j} (x_j - x_i).
pub fn vandermonde(x: &[f64]) -> f64 {
    let mut p = 1.0;
    for j in 0..x.len() {
        for i in 0..j {
            p *= x[j] - x[i];
        }
    }
    p
}

fn check_pair(t: f64, x: &[f64], y: &[f64]) -> Result<()> {
    if !(t > 0.0) {
        return Err(Error::domain(format!("t must be positive (got {t})")));
    }
    if x.len() != y.len() {
        return Err(Error::argument(format!(
            "size mismatch: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    Ok(())
}

/// det_{i,j} [p_t(y_i | x_j)].
pub fn km_determinant(t: f64, x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(t, x, y)?;
    let n = x.len();
    det_real(&DMatrix::from_fn(n, n, |i, j| {
        heat_kernel_unchecked(t, x[j], y[i])
    }))
}

/// Transition density of noncolliding Brownian motion,
/// (h_N(y) / h_N(x)) det[p_t(y_i | x_j)].
pub fn noncolliding_density(t: f64, x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(t, x, y)?;
    let hx = vandermonde(x);
    if hx == 0.0 {
        return Err(Error::domain("start point on the chamber wall"));
    }
    Ok(vandermonde(y) / hx * km_determinant(t, x, y)?)
}

fn ordered(x: &[f64]) -> bool {
    x.windows(2).all(|w| w[0] < w[1])
}

fn dyson_drift(beta: f64, x: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|d| *d = 0.0);
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            let f = 0.5 * beta / (x[i] - x[j]);
            out[i] += f;
            out[j] -= f;
        }
    }
}

/// Euler step with increments `dw`; on an ordering violation the step is
/// split along a Brownian bridge until `depth` reaches `MAX_HALVINGS`.
fn dyson_advance(
    beta: f64,
    x: &mut [f64],
    dt: f64,
    dw: &[f64],
    depth: u32,
    rng: &mut RngStream,
) -> bool {
    let mut drift = vec![0.0; x.len()];
    dyson_drift(beta, x, &mut drift);
    let trial: Vec<f64> = x
        .iter()
        .zip(&drift)
        .zip(dw)
        .map(|((xi, di), wi)| xi + di * dt + wi)
        .collect();
    if ordered(&trial) && trial.iter().all(|v| v.is_finite()) {
        x.copy_from_slice(&trial);
        return true;
    }
    if depth >= MAX_HALVINGS {
        return false;
    }
    let sd = (0.25 * dt).sqrt();
    let first: Vec<f64> = dw.iter().map(|w| 0.5 * w + sd * rng.normal()).collect();
    let second: Vec<f64> = dw.iter().zip(&first).map(|(w, a)| w - a).collect();
    dyson_advance(beta, x, 0.5 * dt, &first, depth + 1, rng)
        && dyson_advance(beta, x, 0.5 * dt, &second, depth + 1, rng)
}

fn check_dyson_args(beta: f64, dt: f64, horizon: f64) -> Result<()> {
    if !(beta > 0.0) {
        return Err(Error::domain(format!("beta must be positive (got {beta})")));
    }
    if !(dt > 0.0) || !(horizon >= 0.0) {
        return Err(Error::argument("need dt > 0 and horizon >= 0"));
    }
    Ok(())
}

/// Runs the Dyson SDE, calling `record` after every grid step. Returns the
/// collision time if the path had to stop.
fn run_dyson<F: FnMut(f64, &[f64])>(
    beta: f64,
    x: &WeylPoint,
    dt: f64,
    horizon: f64,
    rng: &mut RngStream,
    mut record: F,
) -> Result<Option<f64>> {
    check_dyson_args(beta, dt, horizon)?;
    let steps = (horizon / dt).round() as usize;
    let mut state = x.as_slice().to_vec();
    let mut dw = vec![0.0; state.len()];
    let sd = dt.sqrt();
    record(0.0, &state);
    for k in 1..=steps {
        dw.iter_mut().for_each(|w| *w = sd * rng.normal());
        if !dyson_advance(beta, &mut state, dt, &dw, 0, rng) {
            let time = k as f64 * dt;
            if beta < 1.0 {
                return Ok(Some(time));
            }
            return Err(Error::Collision {
                time,
                detail: format!("ordering violated below dt / 2^{MAX_HALVINGS}"),
            });
        }
        record(k as f64 * dt, &state);
    }
    Ok(None)
}

/// Euler-Maruyama for dX_i = dB_i + (beta/2) sum_{j != i} dt / (X_i - X_j).
/// For beta < 1 a collision stops the path and is recorded in `absorbed_at`.
pub fn simulate_dyson(
    beta: f64,
    x: &WeylPoint,
    dt: f64,
    horizon: f64,
    rng: &mut RngStream,
) -> Result<ProcessPath<Vec<f64>>> {
    let mut path = ProcessPath::with_capacity((horizon / dt).round() as usize + 1);
    let collision = run_dyson(beta, x, dt, horizon, rng, |t, v| path.push(t, v.to_vec()))?;
    path.absorbed_at = collision;
    Ok(path)
}

/// X(horizon) of the Dyson SDE without storing the path.
pub fn dyson_endpoint(
    beta: f64,
    x: &WeylPoint,
    dt: f64,
    horizon: f64,
    rng: &mut RngStream,
) -> Result<Vec<f64>> {
    let mut last = Vec::new();
    let collision = run_dyson(beta, x, dt, horizon, rng, |t, v| {
        if t >= horizon - 0.5 * dt {
            last = v.to_vec();
        }
    })?;
    match collision {
        Some(time) => Err(Error::Collision {
            time,
            detail: "path stopped before the horizon".into(),
        }),
        None => Ok(last),
    }
}

/// N^2 real Brownian drivers of a Hermitian-matrix Brownian motion started
/// at diag(x).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HermitianBmState {
    pub n: usize,
    pub time: f64,
    /// B_ii^{x_i}
    pub diagonal: Vec<f64>,
    /// B_ij and B~_ij for i < j, row-major over the upper triangle.
    pub off_real: Vec<f64>,
    pub off_imag: Vec<f64>,
}

impl HermitianBmState {
    pub fn new(x: &[f64]) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::argument("N must be at least 1"));
        }
        if x.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::domain("initial diagonal must be nondecreasing"));
        }
        let n = x.len();
        let m = n * (n - 1) / 2;
        Ok(Self {
            n,
            time: 0.0,
            diagonal: x.to_vec(),
            off_real: vec![0.0; m],
            off_imag: vec![0.0; m],
        })
    }

    pub fn step(&mut self, dt: f64, rng: &mut RngStream) {
        let sd = dt.sqrt();
        for v in self
            .diagonal
            .iter_mut()
            .chain(&mut self.off_real)
            .chain(&mut self.off_imag)
        {
            *v += sd * rng.normal();
        }
        self.time += dt;
    }

    pub fn matrix(&self) -> DMatrix<Complex64> {
        let n = self.n;
        let mut m = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
        let mut k = 0;
        for i in 0..n {
            m[(i, i)] = Complex64::new(self.diagonal[i], 0.0);
            for j in i + 1..n {
                let z = Complex64::new(self.off_real[k], self.off_imag[k]) / 2f64.sqrt();
                m[(i, j)] = z;
                m[(j, i)] = z.conj();
                k += 1;
            }
        }
        m
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        hermitian_eigenvalues(&self.matrix())
    }
}

/// Sorted eigenvalue path of the Hermitian-matrix Brownian motion.
pub fn simulate_hermitian_bm(
    state: &mut HermitianBmState,
    dt: f64,
    horizon: f64,
    rng: &mut RngStream,
) -> Result<ProcessPath<Vec<f64>>> {
    if !(dt > 0.0) || !(horizon >= 0.0) {
        return Err(Error::argument("need dt > 0 and horizon >= 0"));
    }
    let steps = (horizon / dt).round() as usize;
    let mut path = ProcessPath::with_capacity(steps + 1);
    path.push(state.time, state.eigenvalues()?);
    for _ in 0..steps {
        state.step(dt, rng);
        path.push(state.time, state.eigenvalues()?);
    }
    Ok(path)
}

/// Eigenvalues of the Hermitian-matrix Brownian motion at time t, sampled
/// in one exact Gaussian step.
pub fn hermitian_bm_eigenvalues_at(x: &[f64], t: f64, rng: &mut RngStream) -> Result<Vec<f64>> {
    let mut state = HermitianBmState::new(x)?;
    state.step(t, rng);
    state.eigenvalues()
}

fn phi_finite(support: impl Iterator<Item = f64>, u: f64, z: Complex64) -> Complex64 {
    support
        .filter(|&x| x != u)
        .fold(Complex64::new(1.0, 0.0), |p, x| {
            p * (1.0 - (z - u) / (x - u))
        })
}

/// Phi_xi^u(z) = prod_{x in supp xi, x != u} (1 - (z - u)/(x - u)). For the
/// lattice the product is taken over symmetric windows [u - L, u + L] with
/// L doubling until the extrapolated value changes by less than 1e-10
/// relative.
pub fn phi_weight(xi: &PointConfiguration, u: f64, z: Complex64) -> Result<Complex64> {
    if !xi.contains(u) {
        return Err(Error::domain(format!(
            "u = {u} is not in the support of xi"
        )));
    }
    match xi {
        PointConfiguration::Finite { .. } => {
            let support = xi.support().unwrap_or_default();
            Ok(phi_finite(support.into_iter().map(|(x, _)| x), u, z))
        }
        PointConfiguration::IntegerLattice => {
            // symmetric windows: P(L) = P(inf) (1 + a/L + b/L^2 + ...), so the
            // doubling sequence is accelerated by Richardson extrapolation
            let mut l = 8.0f64.max((4.0 * (z - u).norm()).ceil());
            let mut partial = phi_finite(xi.support_in(u - l, u + l).into_iter(), u, z);
            let mut table: Vec<Complex64> = vec![partial];
            while l < PHI_MAX_WINDOW {
                l *= 2.0;
                let shells = xi
                    .support_in(u - l, u - 0.5 * l - 0.5)
                    .into_iter()
                    .chain(xi.support_in(u + 0.5 * l + 0.5, u + l));
                partial *= phi_finite(shells, u, z);
                let mut row = vec![partial];
                for j in 1..=table.len() {
                    let f = 2f64.powi(j as i32);
                    row.push((f * row[j - 1] - table[j - 1]) / (f - 1.0));
                }
                let (best, prev) = (row[row.len() - 1], table[table.len() - 1]);
                table = row;
                if (best - prev).norm() <= PHI_RELATIVE_TOLERANCE * best.norm()
                    || partial.norm() == 0.0
                {
                    return Ok(if partial.norm() == 0.0 { partial } else { best });
                }
            }
            Err(Error::numeric(
                "lattice product did not settle",
                Some(partial.norm()),
            ))
        }
    }
}

/// det_{i,j} [Phi_xi^{x_i}(z_j)] for a finite simple configuration.
pub fn phi_determinant(xi: &PointConfiguration, z: &[Complex64]) -> Result<Complex64> {
    let x = xi.to_weyl()?;
    if x.len() != z.len() {
        return Err(Error::argument("need as many z as points"));
    }
    let n = x.len();
    let mut m = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = phi_weight(xi, x[i], z[j])?;
        }
    }
    crate::numerics::linalg::det_complex(&m)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MartingaleCheck {
    pub start: [f64; 2],
    pub mean_early: [f64; 2],
    pub mean_late: [f64; 2],
    pub stderr: f64,
    pub samples: usize,
}

/// Monte Carlo means of Phi_xi^u(Z(t)) and Phi_xi^u(Z(T)) for a complex
/// Brownian motion Z from z0; both should equal Phi_xi^u(z0).
pub fn phi_martingale_check(
    xi: &PointConfiguration,
    u: f64,
    z0: Complex64,
    t: f64,
    big_t: f64,
    samples: usize,
    sharding: &Sharding,
) -> Result<MartingaleCheck> {
    if !(t > 0.0 && big_t > t) {
        return Err(Error::argument("need 0 < t < T"));
    }
    let phi0 = phi_weight(xi, u, z0)?;
    let shards = sharding.run(family::MISC, samples, |rng, n| {
        let mut acc = [
            MeanAccumulator::new(),
            MeanAccumulator::new(),
            MeanAccumulator::new(),
            MeanAccumulator::new(),
        ];
        for _ in 0..n {
            let (s1, s2) = (t.sqrt(), (big_t - t).sqrt());
            let z1 = z0 + Complex64::new(s1 * rng.normal(), s1 * rng.normal());
            let z2 = z1 + Complex64::new(s2 * rng.normal(), s2 * rng.normal());
            let a = phi_weight(xi, u, z1).expect("u checked");
            let b = phi_weight(xi, u, z2).expect("u checked");
            acc[0].push(a.re);
            acc[1].push(a.im);
            acc[2].push(b.re);
            acc[3].push(b.im);
        }
        acc
    });
    let mut acc = [
        MeanAccumulator::new(),
        MeanAccumulator::new(),
        MeanAccumulator::new(),
        MeanAccumulator::new(),
    ];
    for s in &shards {
        for (a, b) in acc.iter_mut().zip(s) {
            a.merge(b);
        }
    }
    Ok(MartingaleCheck {
        start: [phi0.re, phi0.im],
        mean_early: [acc[0].mean(), acc[1].mean()],
        mean_late: [acc[2].mean(), acc[3].mean()],
        stderr: acc.iter().map(MeanAccumulator::stderr).fold(0.0, f64::max),
        samples,
    })
}

/// Haar unitary from Gram-Schmidt on a complex Gaussian matrix. The
/// triangular factor of Gram-Schmidt has a positive real diagonal, which is
/// the phase convention that makes the result exactly Haar.
pub fn haar_unitary(n: usize, rng: &mut RngStream) -> DMatrix<Complex64> {
    let mut q = DMatrix::from_fn(n, n, |_, _| Complex64::new(rng.normal(), rng.normal()));
    for j in 0..n {
        for k in 0..j {
            let proj: Complex64 = (0..n).map(|i| q[(i, k)].conj() * q[(i, j)]).sum();
            for i in 0..n {
                let v = q[(i, k)];
                q[(i, j)] -= proj * v;
            }
        }
        let norm = (0..n).map(|i| q[(i, j)].norm_sqr()).sum::<f64>().sqrt();
        for i in 0..n {
            q[(i, j)] /= norm;
        }
    }
    q
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HcizRecord {
    pub mc_estimate: f64,
    pub rhs: f64,
    pub stderr: f64,
    pub samples: usize,
    pub seed: u64,
    /// Identification of the heat-kernel time with the Gaussian width.
    pub time_identification: &'static str,
}

/// C_N = (2 pi)^{N/2} prod_{i=1}^N Gamma(i).
pub fn hciz_constant(n: usize) -> f64 {
    (2.0 * PI).powf(0.5 * n as f64) * (1..=n).map(|i| gamma(i as f64)).product::<f64>()
}

/// Right side C_N sigma^{N^2} / (h_N(x) h_N(y)) det[p_t(y_i | x_j)], t = sigma^2.
pub fn hciz_rhs(x: &WeylPoint, y: &WeylPoint, sigma2: f64) -> Result<f64> {
    let n = x.len();
    let km = km_determinant(sigma2, x, y)?;
    Ok(
        hciz_constant(n) * sigma2.powf(0.5 * (n * n) as f64) / (vandermonde(x) * vandermonde(y))
            * km,
    )
}

/// Monte Carlo of int_{U(N)} exp(-Tr(L_x - U* L_y U)^2 / (2 sigma^2)) dU.
pub fn hciz_check(
    x: &WeylPoint,
    y: &WeylPoint,
    sigma2: f64,
    samples: usize,
    sharding: &Sharding,
) -> Result<HcizRecord> {
    if x.len() != y.len() {
        return Err(Error::argument("x and y must have the same size"));
    }
    if !(sigma2 > 0.0) {
        return Err(Error::domain("sigma^2 must be positive"));
    }
    let n = x.len();
    let lx = DMatrix::from_fn(n, n, |i, j| {
        Complex64::new(if i == j { x[i] } else { 0.0 }, 0.0)
    });
    let ly = DMatrix::from_fn(n, n, |i, j| {
        Complex64::new(if i == j { y[i] } else { 0.0 }, 0.0)
    });
    let shards = sharding.run(family::HCIZ, samples, |rng, k| {
        let mut acc = MeanAccumulator::new();
        for _ in 0..k {
            let u = haar_unitary(n, rng);
            let d = &lx - u.adjoint() * &ly * &u;
            let tr: f64 = d.iter().map(Complex64::norm_sqr).sum();
            acc.push((-tr / (2.0 * sigma2)).exp());
        }
        acc
    });
    let mut acc = MeanAccumulator::new();
    shards.iter().for_each(|a| acc.merge(a));
    Ok(HcizRecord {
        mc_estimate: acc.mean(),
        rhs: hciz_rhs(x, y, sigma2)?,
        stderr: acc.stderr(),
        samples,
        seed: sharding.seed,
        time_identification: "t = sigma^2",
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bessel::{bessel_density, BesselSpec};
    use crate::numerics::quadrature::QuadratureRule;
    use crate::stats::{ks_critical_one_sample, ks_statistic_density};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn weyl_points() {
        assert!(WeylPoint::new(vec![0.0, 0.0]).is_err());
        assert!(WeylPoint::new(vec![1.0, 0.0]).is_err());
        assert!(WeylPoint::new(vec![]).is_err());
        assert_eq!(&*WeylPoint::spaced(3, 2.0).unwrap(), &[-2.0, 0.0, 2.0]);
    }

    #[test]
    fn configurations() {
        let xi = PointConfiguration::finite(vec![1.0, 0.0, 1.0]).unwrap();
        assert_eq!(xi.total_mass(), Some(3));
        assert_eq!(xi.support().unwrap(), vec![(0.0, 1), (1.0, 2)]);
        assert!(xi.to_weyl().is_err());
        assert!(PointConfiguration::IntegerLattice.contains(-3.0));
        assert!(!PointConfiguration::IntegerLattice.contains(0.5));
        assert_eq!(
            PointConfiguration::IntegerLattice.support_in(-1.5, 1.0),
            vec![-1.0, 0.0, 1.0]
        );
    }

    #[test]
    fn vandermonde_examples() {
        assert_eq!(vandermonde(&[3.0]), 1.0);
        assert_eq!(vandermonde(&[0.0, 1.0, 2.0]), 2.0);
        let mut rng = RngStream::new(1, 1);
        for n in 1..=6 {
            let x: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
            let m = DMatrix::from_fn(n, n, |i, j| x[i].powi(j as i32));
            assert!((det_real(&m).unwrap() - vandermonde(&x)).abs() < 1e-10);
        }
    }

    #[test]
    fn karlin_mcgregor() {
        let p = km_determinant(0.7, &[0.2], &[1.1]).unwrap();
        assert_relative_eq!(
            p,
            heat_kernel_unchecked(0.7, 0.2, 1.1),
            max_relative = 1e-15
        );
        assert!(km_determinant(0.1, &[-1.0, 1.0], &[-1.0, 1.0]).unwrap() > 0.0);
        let (x, y) = ([-1.0, 0.3, 2.0], [0.0, -0.5, 1.5]);
        let swapped = [y[1], y[0], y[2]];
        assert_relative_eq!(
            km_determinant(0.8, &x, &y).unwrap(),
            -km_determinant(0.8, &x, &swapped).unwrap(),
            max_relative = 1e-12
        );
        assert!(km_determinant(1.0, &[0.0], &[0.0, 1.0]).is_err());
        assert!(noncolliding_density(1.0, &[0.0, 0.0], &[0.0, 1.0]).is_err());
        assert_relative_eq!(
            noncolliding_density(0.3, &[0.5], &[-0.2]).unwrap(),
            heat_kernel_unchecked(0.3, 0.5, -0.2)
        );
    }

    #[test]
    fn noncolliding_density_integrates_to_one() {
        let (x, t) = ([-1.0, 1.0], 0.5);
        let rule = QuadratureRule::gauss_legendre(48);
        let (lo, hi) = (-9.0, 9.0);
        let total = rule.integrate_panels(
            |y1| {
                rule.integrate_panels(
                    |y2| noncolliding_density(t, &x, &[y1, y2]).unwrap(),
                    y1,
                    hi,
                    4,
                )
            },
            lo,
            hi,
            12,
        );
        assert!((total - 1.0).abs() < 1e-6, "{total}");
    }

    #[test]
    fn noncolliding_density_solves_backward_equation() {
        // du/dt = 1/2 Laplacian_x u + sum_i d_i log h(x) d_i u
        let (y, t) = ([-0.3, 0.9], 0.6);
        let u = |t: f64, x: [f64; 2]| noncolliding_density(t, &x, &y).unwrap();
        let residual = |h: f64| {
            let x = [-0.8, 0.7];
            let dt = (u(t + h, x) - u(t - h, x)) / (2.0 * h);
            let mut rhs = 0.0;
            for i in 0..2 {
                let mut p = x;
                let mut m = x;
                p[i] += h;
                m[i] -= h;
                let d2 = (u(t, p) - 2.0 * u(t, x) + u(t, m)) / (h * h);
                let d1 = (u(t, p) - u(t, m)) / (2.0 * h);
                let drift = 1.0 / (x[i] - x[1 - i]);
                rhs += 0.5 * d2 + drift * d1;
            }
            (dt - rhs).abs()
        };
        let (r1, r2) = (residual(1e-2), residual(5e-3));
        assert!(r1 < 1e-3);
        let ratio = r1 / r2;
        assert!((3.0..5.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn dyson_single_particle_is_brownian() {
        let x = WeylPoint::new(vec![0.4]).unwrap();
        let path = simulate_dyson(2.0, &x, 0.01, 1.0, &mut RngStream::new(3, 1)).unwrap();
        let mut rng = RngStream::new(3, 1);
        let mut b = 0.4;
        for v in path.values.iter().skip(1) {
            b += 0.1 * rng.normal();
            assert!((v[0] - b).abs() < 1e-12);
        }
    }

    #[test]
    fn dyson_gap_is_bessel_three() {
        let x = WeylPoint::new(vec![-1.0, 1.0]).unwrap();
        let n = 4000;
        let ends = Sharding::new(4).samples(family::DYSON, n, |rng| {
            dyson_endpoint(2.0, &x, 1e-3, 1.0, rng).unwrap()
        });
        let gaps: Vec<f64> = ends.iter().map(|v| (v[1] - v[0]) / 2f64.sqrt()).collect();
        let spec = BesselSpec::new(3.0, 2f64.sqrt()).unwrap();
        let ks = ks_statistic_density(&gaps, 0.0, |r| bessel_density(&spec, 1.0, r).unwrap());
        assert!(ks < ks_critical_one_sample(0.01, n), "ks {ks}");
        let com: MeanAccumulator = ends.iter().map(|v| 0.5 * (v[0] + v[1])).collect();
        let var = com.variance();
        assert!((var - 0.5).abs() < 0.05, "variance {var}");
    }

    #[test]
    fn dyson_collisions() {
        let x = WeylPoint::new(vec![-0.05, 0.05]).unwrap();
        let mut stopped = 0;
        let mut rng = RngStream::new(8, 1);
        for _ in 0..50 {
            let p = simulate_dyson(0.5, &x, 1e-2, 1.0, &mut rng).unwrap();
            stopped += usize::from(p.absorbed_at.is_some());
        }
        assert!(stopped > 0);
        assert!(simulate_dyson(0.0, &x, 1e-2, 1.0, &mut rng).is_err());
    }

    #[test]
    fn hermitian_bm_basics() {
        let mut rng = RngStream::new(5, 1);
        let mut one = HermitianBmState::new(&[0.3]).unwrap();
        let path = simulate_hermitian_bm(&mut one, 0.01, 0.5, &mut rng).unwrap();
        assert_eq!(path.values.last().unwrap()[0], one.diagonal[0]);
        let mut three = HermitianBmState::new(&[-1.0, 0.0, 1.0]).unwrap();
        assert_eq!(three.eigenvalues().unwrap(), vec![-1.0, 0.0, 1.0]);
        for _ in 0..200 {
            three.step(0.01, &mut rng);
            let m = three.matrix();
            assert!((m.clone() - m.adjoint()).norm() == 0.0);
            let ev = three.eigenvalues().unwrap();
            assert!(ev.windows(2).all(|w| w[0] <= w[1]));
            let tr: f64 = three.diagonal.iter().sum();
            assert!((ev.iter().sum::<f64>() - tr).abs() < 1e-12);
        }
    }

    #[test]
    fn phi_examples() {
        let xi = PointConfiguration::finite(vec![0.0, 1.0]).unwrap();
        let z = c(0.3, -1.2);
        assert!((phi_weight(&xi, 0.0, z).unwrap() - (1.0 - z)).norm() < 1e-15);
        assert!(phi_weight(&xi, 0.5, z).is_err());
        let pts = vec![-1.3, 0.2, 0.9, 2.4];
        let xi = PointConfiguration::finite(pts.clone()).unwrap();
        for (i, &u) in pts.iter().enumerate() {
            for (j, &v) in pts.iter().enumerate() {
                let val = phi_weight(&xi, u, c(v, 0.0)).unwrap();
                assert!((val - if i == j { 1.0 } else { 0.0 }).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn phi_lattice_is_sine() {
        for &(u, w) in &[
            (0.0, c(0.3, 0.2)),
            (3.0, c(-1.7, 0.5)),
            (-2.0, c(0.49, -0.1)),
        ] {
            let got = phi_weight(&PointConfiguration::IntegerLattice, u, w + u).unwrap();
            let exact = (w * PI).sin() / (w * PI);
            assert!((got - exact).norm() < 1e-9 * exact.norm(), "{got} {exact}");
        }
        assert!(phi_weight(&PointConfiguration::IntegerLattice, 0.5, c(0.0, 0.0)).is_err());
    }

    #[test]
    fn phi_is_a_polynomial() {
        let mut rng = RngStream::new(6, 1);
        for n in 2..=5 {
            let pts: Vec<f64> = (0..n).map(|k| k as f64 + 0.3 * rng.uniform()).collect();
            let xi = PointConfiguration::finite(pts.clone()).unwrap();
            let u = pts[0];
            // expand prod (1 - (z-u)/(x-u)) into coefficients of z
            let mut coef = vec![Complex64::new(1.0, 0.0)];
            for &x in pts.iter().filter(|&&x| x != u) {
                // factor (x - z)/(x - u) = a + b z
                let (a, b) = (x / (x - u), -1.0 / (x - u));
                let mut next = vec![Complex64::new(0.0, 0.0); coef.len() + 1];
                for (k, ck) in coef.iter().enumerate() {
                    next[k] += ck * a;
                    next[k + 1] += ck * b;
                }
                coef = next;
            }
            for _ in 0..50 {
                let z = c(4.0 * rng.normal(), 4.0 * rng.normal());
                let horner = coef
                    .iter()
                    .rev()
                    .fold(Complex64::new(0.0, 0.0), |acc, ck| acc * z + ck);
                let direct = phi_weight(&xi, u, z).unwrap();
                assert!((horner - direct).norm() <= 1e-10 * (1.0 + direct.norm()));
            }
        }
    }

    proptest! {
        #[test]
        fn phi_determinant_is_vandermonde_ratio(
            gaps in proptest::collection::vec(0.2f64..2.0, 3),
            start in -2.0f64..2.0,
            zs in proptest::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 3),
        ) {
            let x: Vec<f64> = gaps.iter().scan(start, |s, g| { *s += g; Some(*s) }).collect();
            let xi = PointConfiguration::finite(x.clone()).unwrap();
            let z: Vec<Complex64> = zs.iter().map(|&(a, b)| c(a, b)).collect();
            let det = phi_determinant(&xi, &z).unwrap();
            let mut hz = Complex64::new(1.0, 0.0);
            for j in 0..3 {
                for i in 0..j {
                    hz *= z[j] - z[i];
                }
            }
            let want = hz / vandermonde(&x);
            prop_assert!((det - want).norm() <= 1e-10 * (1.0 + want.norm()));
        }

        #[test]
        fn noncolliding_density_is_positive(a in -3.0f64..0.0, b in 0.01f64..3.0, c1 in -3.0f64..3.0, d in 0.01f64..3.0, t in 0.05f64..3.0) {
            let p = noncolliding_density(t, &[a, a + b], &[c1, c1 + d]).unwrap();
            prop_assert!(p >= 0.0);
        }
    }

    #[test]
    fn phi_martingale() {
        let xi = PointConfiguration::finite(vec![-1.0, 0.5, 2.0]).unwrap();
        let r = phi_martingale_check(&xi, 0.5, c(0.2, 0.3), 0.5, 1.5, 20000, &Sharding::new(9))
            .unwrap();
        for k in 0..2 {
            assert!((r.mean_early[k] - r.start[k]).abs() < 4.0 * r.stderr);
            assert!((r.mean_late[k] - r.start[k]).abs() < 4.0 * r.stderr);
        }
    }

    #[test]
    fn haar_unitaries_are_unitary() {
        let mut rng = RngStream::new(2, 2);
        for n in 1..=4 {
            let u = haar_unitary(n, &mut rng);
            let id = DMatrix::<Complex64>::identity(n, n);
            assert!((u.adjoint() * &u - id).norm() < 1e-12);
        }
    }

    #[test]
    fn hciz_one_dimensional_is_exact() {
        let x = WeylPoint::new(vec![0.3]).unwrap();
        let y = WeylPoint::new(vec![-0.9]).unwrap();
        let r = hciz_check(&x, &y, 0.7, 100, &Sharding::new(1)).unwrap();
        let exact = (-(1.2f64 * 1.2) / 1.4).exp();
        assert_relative_eq!(r.rhs, exact, max_relative = 1e-12);
        assert_relative_eq!(r.mc_estimate, exact, max_relative = 1e-12);
        assert_relative_eq!(hciz_constant(2), 2.0 * PI, max_relative = 1e-14);
    }

    #[test]
    fn hciz_two_by_two() {
        let x = WeylPoint::new(vec![-1.0, 1.0]).unwrap();
        let y = WeylPoint::new(vec![-0.5, 0.5]).unwrap();
        let r = hciz_check(&x, &y, 1.0, 50000, &Sharding::new(3)).unwrap();
        assert!(r.mc_estimate <= 1.0);
        assert!((r.mc_estimate - r.rhs).abs() < 3.0 * r.stderr, "{r:?}");
    }
}
