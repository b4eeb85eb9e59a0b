//! Correlation kernels of the Dyson model started from a configuration xi,
//! the sine and extended sine kernels, the kernel of the lattice start,
//! correlation functions, Fredholm generating functions and the growth
//! functionals M, M_alpha and M_1.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use crate::dyson::{phi_weight, PointConfiguration};
use crate::error::{Error, Result};
use crate::numerics::linalg::det_real;
use crate::numerics::quadrature::{
    CircleContour, QuadratureRule, DEFAULT_HERMITE_ORDER, DEFAULT_LEGENDRE_ORDER,
};
use crate::numerics::special::{heat_kernel_complex, heat_kernel_unchecked, theta3_with_bound};

pub const CONTOUR_NODES: usize = 256;
pub const LATTICE_TAIL_TOLERANCE: f64 = 1e-12;
const PANEL_ORDER: usize = 16;

fn hermite_rule() -> &'static QuadratureRule {
    static RULE: OnceLock<QuadratureRule> = OnceLock::new();
    RULE.get_or_init(|| QuadratureRule::gauss_hermite(DEFAULT_HERMITE_ORDER))
}

fn panel_rule() -> &'static QuadratureRule {
    static RULE: OnceLock<QuadratureRule> = OnceLock::new();
    RULE.get_or_init(|| QuadratureRule::gauss_legendre(PANEL_ORDER))
}

fn check_times(s: f64, t: f64) -> Result<()> {
    if !(s > 0.0 && t > 0.0) {
        return Err(Error::domain(format!(
            "kernel times must be positive (got s = {s}, t = {t})"
        )));
    }
    Ok(())
}

/// -1(s > t) p_{s-t}(x|y), the term that makes the kernels asymmetric.
fn time_order_term(s: f64, x: f64, t: f64, y: f64) -> f64 {
    if s > t {
        -heat_kernel_unchecked(s - t, x, y)
    } else {
        0.0
    }
}

fn simple_support(xi: &PointConfiguration) -> Result<Vec<f64>> {
    let support = xi
        .support()
        .ok_or_else(|| Error::domain("the kernel needs a finite configuration"))?;
    if support.iter().any(|&(_, m)| m > 1) {
        return Err(Error::domain(
            "configuration has multiple points; use kernel_k2",
        ));
    }
    Ok(support.into_iter().map(|(x, _)| x).collect())
}

/// K(s,x;t,y) = sum_{v in xi} p_s(x|v) E[Phi_xi^v(y + iW)] - 1(s>t) p_{s-t}(x|y),
/// with W ~ N(0, t) by Gauss-Hermite.
pub fn kernel_k1(xi: &PointConfiguration, s: f64, x: f64, t: f64, y: f64) -> Result<f64> {
    check_times(s, t)?;
    let support = simple_support(xi)?;
    let rule = hermite_rule();
    let mut total = 0.0;
    for &v in &support {
        let e: Complex64 = rule.gaussian_expectation(t, |w| {
            phi_weight(xi, v, Complex64::new(y, w)).expect("v in support")
        });
        total += heat_kernel_unchecked(s, x, v) * e.re;
    }
    Ok(total + time_order_term(s, x, t, y))
}

/// Contour radius used by `kernel_k2`: 1.5 times the support half-width plus 1.
pub fn default_contour(points: &[f64]) -> (f64, f64) {
    let (lo, hi) = (points[0], points[points.len() - 1]);
    let mid = 0.5 * (lo + hi);
    (mid, 1.5 * 0.5 * (hi - lo) + 1.0)
}

/// Q[zeta, z] = (Q(zeta) - Q(z)) / (zeta - z) for Q(u) = prod (x_i - u).
fn divided_difference(points: &[f64], zeta: Complex64, z: Complex64) -> Complex64 {
    let n = points.len();
    // suffix[i] = prod_{j >= i} (x_j - z)
    let mut suffix = vec![Complex64::new(1.0, 0.0); n + 1];
    for i in (0..n).rev() {
        suffix[i] = suffix[i + 1] * (points[i] - z);
    }
    let mut prefix = Complex64::new(1.0, 0.0);
    let mut sum = Complex64::new(0.0, 0.0);
    for i in 0..n {
        sum += prefix * suffix[i + 1];
        prefix *= points[i] - zeta;
    }
    -sum
}

/// Contour form of the kernel, valid for configurations with multiple
/// points: (1/2 pi i) oint dz p_s(x|z) E[Q[y + iW, z] / Q(z)] minus the
/// time-order term, where Q carries the multiplicities of xi.
pub fn kernel_k2(xi: &PointConfiguration, s: f64, x: f64, t: f64, y: f64) -> Result<f64> {
    let PointConfiguration::Finite { points } = xi else {
        return Err(Error::domain("kernel_k2 needs a finite configuration"));
    };
    if points.is_empty() {
        return Ok(time_order_term(s, x, t, y));
    }
    let (center, radius) = default_contour(points);
    kernel_k2_on_circle(xi, s, x, t, y, center, radius)
}

/// `kernel_k2` on a caller-chosen circle; the circle must enclose supp xi
/// with a margin.
pub fn kernel_k2_on_circle(
    xi: &PointConfiguration,
    s: f64,
    x: f64,
    t: f64,
    y: f64,
    center: f64,
    radius: f64,
) -> Result<f64> {
    check_times(s, t)?;
    let PointConfiguration::Finite { points } = xi else {
        return Err(Error::domain("kernel_k2 needs a finite configuration"));
    };
    let margin = points
        .iter()
        .map(|p| radius - (p - center).abs())
        .fold(f64::INFINITY, f64::min);
    if !(margin > 0.05 * radius) {
        return Err(Error::argument(format!(
            "contour of radius {radius} around {center} passes within {margin} of a pole"
        )));
    }
    let rule = hermite_rule();
    let scale = (2.0 * t).sqrt();
    let zetas: Vec<(Complex64, f64)> = rule
        .nodes
        .iter()
        .zip(&rule.weights)
        .map(|(&u, &w)| (Complex64::new(y, scale * u), w / PI.sqrt()))
        .collect();
    let contour = CircleContour::new(center, radius, CONTOUR_NODES);
    let value = contour.cauchy_integral(|z| {
        let q: Complex64 = points.iter().map(|&p| p - z).product();
        let e: Complex64 = zetas
            .iter()
            .map(|&(zeta, w)| divided_difference(points, zeta, z) * w)
            .sum();
        heat_kernel_complex(s, Complex64::new(x, 0.0), z) * e / q
    });
    Ok(value.re + time_order_term(s, x, t, y))
}

/// sin(pi (y - x)) / (pi (y - x)), equal to 1 on the diagonal.
pub fn sine_kernel(x: f64, y: f64) -> f64 {
    let d = PI * (y - x);
    if d.abs() < 1e-8 {
        1.0 - d * d / 6.0
    } else {
        d.sin() / d
    }
}

/// Composite Gauss-Legendre over [a, b] with roughly one panel per half
/// oscillation of cos(pi u d).
fn oscillatory_integral<F: FnMut(f64) -> f64>(f: F, a: f64, b: f64, d: f64) -> f64 {
    let panels = ((b - a) * (1.0 + d.abs()) * 2.0).ceil().max(1.0) as usize;
    panel_rule().integrate_panels(f, a, b, panels.min(100_000))
}

/// Extended sine kernel:
/// int_0^1 e^{pi^2 u^2 (t-s)/2} cos(pi u (y-x)) du for t > s, K_sin(x,y) for
/// t = s, and -int_1^inf e^{pi^2 u^2 (t-s)/2} cos(pi u (y-x)) du for t < s.
pub fn extended_sine_kernel(s: f64, x: f64, t: f64, y: f64) -> f64 {
    let d = y - x;
    let tau = t - s;
    if tau == 0.0 {
        return sine_kernel(x, y);
    }
    let f = |u: f64| (PI * PI * u * u * tau / 2.0).exp() * (PI * u * d).cos();
    if tau > 0.0 {
        oscillatory_integral(f, 0.0, 1.0, d)
    } else {
        // e^{-pi^2 u^2 |tau| / 2} < e^{-40} beyond this point
        let upper = (1.0f64).max((80.0 / (PI * PI * -tau)).sqrt()) + 1.0;
        -oscillatory_integral(f, 1.0, upper, d)
    }
}

/// Single-formula version int_0^1 e^{pi^2 u^2 (t-s)/2} cos(pi u (y-x)) du
/// - 1(s>t) p_{s-t}(x|y) of the extended sine kernel.
pub fn extended_sine_kernel_unified(s: f64, x: f64, t: f64, y: f64) -> f64 {
    let d = y - x;
    let tau = t - s;
    let f = |u: f64| (PI * PI * u * u * tau / 2.0).exp() * (PI * u * d).cos();
    oscillatory_integral(f, 0.0, 1.0, d) + time_order_term(s, x, t, y)
}

/// A kernel value with a bound on what the truncation dropped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelValue {
    pub value: f64,
    pub tail_bound: f64,
}

/// Graded Gauss-Legendre over [a, b] with breakpoints accumulating at b on
/// the scale `width`.
fn graded_toward_end<F: FnMut(f64) -> Complex64>(
    mut f: F,
    a: f64,
    b: f64,
    width: f64,
) -> Complex64 {
    let rule = panel_rule();
    let mut breaks = vec![b];
    let mut h = width.min(b - a) / 4.0;
    while b - h > a {
        breaks.push(b - h);
        h *= 2.0;
    }
    breaks.push(a);
    breaks.reverse();
    let mut acc = Complex64::new(0.0, 0.0);
    for w in breaks.windows(2) {
        for (u, wt) in rule.mapped(w[0], w[1]) {
            acc += f(u) * wt;
        }
    }
    acc
}

fn lattice_term(s: f64, x: f64, t: f64, y: f64, n: i64) -> Complex64 {
    let nf = n as f64;
    let d = y - x;
    let tau = t - s;
    let base = -2.0 * PI * PI * s * nf * nf;
    let b = 2.0 * PI * PI * s * nf;
    // cos(pi u d - i b u) = (e^{i pi u d + b u} + e^{-i pi u d - b u}) / 2
    let integrand = |u: f64| {
        let g = PI * PI * u * u * tau / 2.0 + base;
        let plus = Complex64::new(g + b * u, PI * u * d).exp();
        let minus = Complex64::new(g - b * u, -PI * u * d).exp();
        0.5 * (plus + minus)
    };
    let width = 1.0 / (1.0 + b.abs());
    let phase = Complex64::new(0.0, 2.0 * PI * x * nf).exp();
    phase * graded_toward_end(integrand, 0.0, 1.0, width)
}

/// Bound on |term_n| for the n-sum: e^{-2 pi^2 s (n^2 - |n|)} e^{pi^2 max(t-s, 0)/2}.
fn lattice_term_bound(s: f64, t: f64, n: f64) -> f64 {
    (-2.0 * PI * PI * s * (n * n - n.abs()) + PI * PI * (t - s).max(0.0) / 2.0).exp()
}

/// The n != 0 part of the lattice kernel in its n-sum form, |n| <= n_max.
pub fn lattice_correction(s: f64, x: f64, t: f64, y: f64, n_max: usize) -> Result<KernelValue> {
    check_times(s, t)?;
    let mut sum = Complex64::new(0.0, 0.0);
    for n in 1..=n_max as i64 {
        sum += lattice_term(s, x, t, y, n) + lattice_term(s, x, t, y, -n);
    }
    let first = n_max as f64 + 1.0;
    let ratio = (-2.0 * PI * PI * s * 2.0 * first).exp();
    let tail_bound = 2.0 * lattice_term_bound(s, t, first) / (1.0 - ratio);
    Ok(KernelValue {
        value: sum.re,
        tail_bound,
    })
}

/// Smallest n_max whose tail bound is below `tol`.
pub fn lattice_n_max(s: f64, t: f64, tol: f64) -> usize {
    let mut n = 1;
    while 2.0 * lattice_term_bound(s, t, n as f64 + 1.0) > tol && n < 10_000 {
        n += 1;
    }
    n
}

/// Kernel for the start from every integer: the extended sine kernel plus
/// the n != 0 series truncated at n_max.
pub fn lattice_kernel(s: f64, x: f64, t: f64, y: f64, n_max: usize) -> Result<KernelValue> {
    let corr = lattice_correction(s, x, t, y, n_max)?;
    if !(corr.tail_bound <= LATTICE_TAIL_TOLERANCE) {
        return Err(Error::numeric(
            format!(
                "lattice series truncated at n_max = {n_max} leaves a tail up to {:e}",
                corr.tail_bound
            ),
            Some(corr.tail_bound),
        ));
    }
    Ok(KernelValue {
        value: extended_sine_kernel(s, x, t, y) + corr.value,
        tail_bound: corr.tail_bound,
    })
}

/// The n != 0 part in theta form:
/// (1/2pi) int_{|k| <= pi} e^{k^2 (t-s)/2 + i k (y-x)} (theta3(x - i k s, 2 pi i s) - 1) dk.
pub fn lattice_correction_theta(s: f64, x: f64, t: f64, y: f64) -> Result<KernelValue> {
    check_times(s, t)?;
    let tau = Complex64::new(0.0, 2.0 * PI * s);
    let mut tail = 0.0f64;
    let mut failure = None;
    let mut integrand = |k: f64| {
        let th = match theta3_with_bound(Complex64::new(x, -k * s), tau) {
            Ok(v) => v,
            Err(e) => {
                failure = Some(e);
                return Complex64::new(0.0, 0.0);
            }
        };
        tail = tail.max(th.tail_bound);
        Complex64::new(k * k * (t - s) / 2.0, k * (y - x)).exp() * (th.value - 1.0)
    };
    // the n = +-1 terms peak at k = +-pi on the scale 1/(2 pi s)
    let width = 1.0 / (1.0 + 2.0 * PI * s);
    let right = graded_toward_end(&mut integrand, 0.0, PI, width);
    let left = graded_toward_end(|k| integrand(-k), 0.0, PI, width);
    if let Some(e) = failure {
        return Err(e);
    }
    let value = (right + left) / (2.0 * PI);
    Ok(KernelValue {
        value: value.re,
        tail_bound: tail * (PI * PI * (t - s).max(0.0) / 2.0).exp(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelTag {
    K1,
    K2,
    Sine,
    ExtendedSine,
    Lattice,
}

type Evaluator = dyn Fn(f64, f64, f64, f64) -> Result<f64> + Send + Sync;

/// A correlation kernel K(s,x;t,y) with its provenance.
#[derive(Clone)]
pub struct CorrelationKernel {
    pub tag: KernelTag,
    /// K(s,x;t,y) = K(s,y;t,x)
    pub symmetric: bool,
    eval: Arc<Evaluator>,
}

impl std::fmt::Debug for CorrelationKernel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CorrelationKernel")
            .field("tag", &self.tag)
            .field("symmetric", &self.symmetric)
            .finish()
    }
}

impl CorrelationKernel {
    pub fn k1(xi: PointConfiguration) -> Result<Self> {
        simple_support(&xi)?;
        Ok(Self {
            tag: KernelTag::K1,
            symmetric: false,
            eval: Arc::new(move |s, x, t, y| kernel_k1(&xi, s, x, t, y)),
        })
    }

    pub fn k2(xi: PointConfiguration) -> Result<Self> {
        if xi.total_mass().is_none() {
            return Err(Error::domain("kernel_k2 needs a finite configuration"));
        }
        Ok(Self {
            tag: KernelTag::K2,
            symmetric: false,
            eval: Arc::new(move |s, x, t, y| kernel_k2(&xi, s, x, t, y)),
        })
    }

    /// Single-time sine kernel; the times are ignored.
    pub fn sine() -> Self {
        Self {
            tag: KernelTag::Sine,
            symmetric: true,
            eval: Arc::new(|_, x, _, y| Ok(sine_kernel(x, y))),
        }
    }

    pub fn extended_sine() -> Self {
        Self {
            tag: KernelTag::ExtendedSine,
            symmetric: true,
            eval: Arc::new(|s, x, t, y| Ok(extended_sine_kernel(s, x, t, y))),
        }
    }

    /// Lattice-start kernel with n_max chosen from the tail bound.
    pub fn lattice() -> Self {
        Self {
            tag: KernelTag::Lattice,
            symmetric: false,
            eval: Arc::new(|s, x, t, y| {
                let n = lattice_n_max(s, t, LATTICE_TAIL_TOLERANCE);
                lattice_kernel(s, x, t, y, n).map(|v| v.value)
            }),
        }
    }

    pub fn eval(&self, s: f64, x: f64, t: f64, y: f64) -> Result<f64> {
        (self.eval)(s, x, t, y)
    }
}

/// rho(points) = det [K(t_i, x_i; t_j, x_j)] over space-time points (t, x).
pub fn correlation_function(kernel: &CorrelationKernel, points: &[(f64, f64)]) -> Result<f64> {
    let n = points.len();
    let mut m = DMatrix::zeros(n, n);
    for (i, &(s, x)) in points.iter().enumerate() {
        for (j, &(t, y)) in points.iter().enumerate() {
            m[(i, j)] = kernel.eval(s, x, t, y)?;
        }
    }
    det_real(&m)
}

/// Times with one Nystrom node set each, inside the window [-L, L].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpaceTimeGrid {
    pub times: Vec<f64>,
    pub window: f64,
    /// (node, weight) pairs per time
    pub nodes: Vec<Vec<(f64, f64)>>,
}

impl SpaceTimeGrid {
    /// L = max(5 sqrt(t_max), support radius + 5 sqrt(t_max)).
    pub fn default_window(support_radius: f64, t_max: f64) -> f64 {
        let spread = 5.0 * t_max.sqrt();
        spread.max(support_radius + spread)
    }

    /// Gauss-Legendre nodes of order 128 on each time's interval, which must
    /// lie in the window.
    pub fn on_intervals(times: Vec<f64>, window: f64, intervals: &[(f64, f64)]) -> Result<Self> {
        Self::on_intervals_with_order(times, window, intervals, DEFAULT_LEGENDRE_ORDER)
    }

    pub fn on_intervals_with_order(
        times: Vec<f64>,
        window: f64,
        intervals: &[(f64, f64)],
        order: usize,
    ) -> Result<Self> {
        if times.len() != intervals.len() {
            return Err(Error::argument("one interval per time is required"));
        }
        if times.windows(2).any(|w| w[0] >= w[1]) || times.iter().any(|&t| !(t > 0.0)) {
            return Err(Error::argument("times must be positive and increasing"));
        }
        let rule = QuadratureRule::gauss_legendre(order);
        let mut nodes = Vec::with_capacity(times.len());
        for &(a, b) in intervals {
            if !(a < b) || a < -window || b > window {
                return Err(Error::argument(format!(
                    "interval [{a}, {b}] is not inside the window [-{window}, {window}]"
                )));
            }
            nodes.push(rule.mapped(a, b).collect());
        }
        Ok(Self {
            times,
            window,
            nodes,
        })
    }

    /// Nodes spread over the whole window for every time.
    pub fn on_window(times: Vec<f64>, window: f64) -> Result<Self> {
        let intervals = vec![(-window, window); times.len()];
        Self::on_intervals(times, window, &intervals)
    }
}

/// A bounded test function chi = e^f - 1 with support in [a, b].
pub struct TestFunction<'a> {
    pub support: (f64, f64),
    pub chi: &'a dyn Fn(f64) -> f64,
}

/// Psi = Det[delta_{st} delta(x - y) + K(s,x;t,y) chi_t(y)] on the Nystrom
/// discretization of `grid`, blocks ordered by time.
pub fn fredholm_generating(
    kernel: &CorrelationKernel,
    grid: &SpaceTimeGrid,
    chis: &[TestFunction],
) -> Result<f64> {
    if chis.len() != grid.times.len() {
        return Err(Error::argument("one test function per time is required"));
    }
    for c in chis {
        let (a, b) = c.support;
        if a < -grid.window || b > grid.window {
            return Err(Error::argument(format!(
                "support [{a}, {b}] exceeds the window [-{0}, {0}]",
                grid.window
            )));
        }
    }
    let points: Vec<(usize, f64, f64)> = grid
        .nodes
        .iter()
        .enumerate()
        .flat_map(|(m, ns)| ns.iter().map(move |&(x, w)| (m, x, w)))
        .collect();
    let n = points.len();
    let mut mat = DMatrix::<f64>::identity(n, n);
    for (i, &(m, x, _)) in points.iter().enumerate() {
        for (j, &(k, y, w)) in points.iter().enumerate() {
            let c = (chis[k].chi)(y);
            if c != 0.0 {
                mat[(i, j)] += kernel.eval(grid.times[m], x, grid.times[k], y)? * c * w;
            }
        }
    }
    det_real(&mat)
}

/// Growth functionals of a configuration on [-L, L] \ {0}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConditionFunctionals {
    /// M(xi, L) = int xi(dx) / x
    pub m: f64,
    /// M_alpha(xi, L) = (int xi(dx) / |x|^alpha)^{1/alpha}
    pub m_alpha: f64,
    /// M_1(tau_{-a^2} xi^{<2>}, L)
    pub m1_shifted: f64,
    pub l: f64,
    pub alpha: f64,
    pub a: f64,
}

/// Points of xi (with multiplicity) in [-l, l].
fn points_in(xi: &PointConfiguration, lo: f64, hi: f64) -> Vec<f64> {
    match xi {
        PointConfiguration::Finite { points } => points
            .iter()
            .copied()
            .filter(|&x| x >= lo && x <= hi)
            .collect(),
        PointConfiguration::IntegerLattice => xi.support_in(lo, hi),
    }
}

/// M(xi, L), M_alpha(xi, L) and M_1 of xi^{<2>} = sum delta_{x^2} shifted by
/// -a^2, each summed over [-L, L] \ {0}.
pub fn condition_functionals(
    xi: &PointConfiguration,
    l: f64,
    alpha: f64,
    a: f64,
) -> Result<ConditionFunctionals> {
    if !(l > 0.0) {
        return Err(Error::argument("L must be positive"));
    }
    if !(alpha > 1.0 && alpha < 2.0) {
        return Err(Error::argument("alpha must lie in (1, 2)"));
    }
    let near = points_in(xi, -l, l);
    let m = near.iter().filter(|&&x| x != 0.0).map(|x| 1.0 / x).sum();
    let m_alpha = near
        .iter()
        .filter(|&&x| x != 0.0)
        .map(|x| x.abs().powf(-alpha))
        .sum::<f64>()
        .powf(1.0 / alpha);
    // |x^2 - a^2| <= L needs |x| <= sqrt(L + a^2)
    let reach = (l + a * a).sqrt();
    let m1_shifted = points_in(xi, -reach, reach)
        .iter()
        .map(|x| x * x - a * a)
        .filter(|&v| v != 0.0 && v.abs() <= l)
        .map(|v| 1.0 / v.abs())
        .sum();
    Ok(ConditionFunctionals {
        m,
        m_alpha,
        m1_shifted,
        l,
        alpha,
        a,
    })
}
