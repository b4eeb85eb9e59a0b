//! Gauss rules and the circle trapezoid rule used for contour integrals.

use gauss_quad::GaussLegendre;
use num_complex::Complex64;
use std::f64::consts::PI;
use std::num::NonZeroUsize;

pub const DEFAULT_LEGENDRE_ORDER: usize = 128;
pub const DEFAULT_HERMITE_ORDER: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadratureKind {
    GaussLegendre,
    GaussHermite,
    TrapezoidContour,
}

/// Nodes and weights of a real quadrature rule.
///
/// Gauss-Legendre rules live on [-1, 1]; Gauss-Hermite rules integrate
/// against exp(-w^2) on the real line.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub kind: QuadratureKind,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn gauss_legendre(order: usize) -> Self {
        let rule = GaussLegendre::new(NonZeroUsize::new(order).expect("order >= 1"));
        let (nodes, weights) = sorted_pairs(rule.as_node_weight_pairs());
        Self {
            kind: QuadratureKind::GaussLegendre,
            nodes,
            weights,
        }
    }

    /// Newton-refined roots of the orthonormal Hermite recurrence; weights
    /// from the derivative keep full relative accuracy in the tails.
    pub fn gauss_hermite(order: usize) -> Self {
        assert!(order >= 1);
        let n = order;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let pim4 = PI.powf(-0.25);
        let nf = n as f64;
        let mut z: f64 = 0.0;
        for i in 0..n.div_ceil(2) {
            // standard starting values for the largest roots, then previous-root extrapolation
            z = match i {
                0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
                1 => z - 1.14 * nf.powf(0.426) / z,
                2 => 1.86 * z - 0.86 * nodes[n - 1],
                3 => 1.91 * z - 0.91 * nodes[n - 2],
                _ => 2.0 * z - nodes[n - i + 1],
            };
            let mut pp = 0.0;
            for _ in 0..200 {
                let (p, d) = hermite_normalized_with_derivative(n, z, pim4);
                pp = d;
                let dz = p / d;
                z -= dz;
                if dz.abs() < 1e-15 * z.abs().max(1.0) {
                    break;
                }
            }
            let (_, d) = hermite_normalized_with_derivative(n, z, pim4);
            if d != 0.0 {
                pp = d;
            }
            nodes[n - 1 - i] = z;
            nodes[i] = -z;
            let w = 2.0 / (pp * pp);
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self {
            kind: QuadratureKind::GaussHermite,
            nodes,
            weights,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights mapped from [-1, 1] to [a, b].
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        debug_assert_eq!(self.kind, QuadratureKind::GaussLegendre);
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, half * w))
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F, a: f64, b: f64) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }

    /// Composite rule over `panels` equal sub-intervals.
    pub fn integrate_panels<F: FnMut(f64) -> f64>(
        &self,
        mut f: F,
        a: f64,
        b: f64,
        panels: usize,
    ) -> f64 {
        let h = (b - a) / panels as f64;
        (0..panels)
            .map(|k| {
                let lo = a + h * k as f64;
                self.integrate(&mut f, lo, lo + h)
            })
            .sum()
    }

    /// E[f(W)] for W ~ N(0, variance), using a Gauss-Hermite rule.
    pub fn gaussian_expectation<T, F>(&self, variance: f64, mut f: F) -> T
    where
        T: std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T> + Default,
        F: FnMut(f64) -> T,
    {
        debug_assert_eq!(self.kind, QuadratureKind::GaussHermite);
        let scale = (2.0 * variance).sqrt();
        let norm = 1.0 / PI.sqrt();
        let mut acc = T::default();
        for (&x, &w) in self.nodes.iter().zip(&self.weights) {
            acc = acc + f(scale * x) * (w * norm);
        }
        acc
    }
}

fn sorted_pairs(pairs: &[(f64, f64)]) -> (Vec<f64>, Vec<f64>) {
    let mut pairs = pairs.to_vec();
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    pairs.into_iter().unzip()
}

/// Orthonormal Hermite function recurrence; returns (p_n, p_n') scaled so
/// that weights are 2 / p_n'^2.
fn hermite_normalized_with_derivative(n: usize, z: f64, pim4: f64) -> (f64, f64) {
    let mut p1 = pim4;
    let mut p2 = 0.0;
    for j in 0..n {
        let p3 = p2;
        p2 = p1;
        let jf = j as f64;
        p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
    }
    let pp = (2.0 * n as f64).sqrt() * p2;
    (p1, pp)
}

/// Trapezoid rule on a circle, spectrally accurate for integrands analytic
/// in an annulus around it.
#[derive(Debug, Clone)]
pub struct CircleContour {
    pub center: Complex64,
    pub radius: f64,
    pub nodes: Vec<Complex64>,
}

impl CircleContour {
    pub fn new(center: f64, radius: f64, n: usize) -> Self {
        let c = Complex64::new(center, 0.0);
        let nodes = (0..n)
            .map(|k| {
                let theta = 2.0 * PI * (k as f64 + 0.5) / n as f64;
                c + Complex64::from_polar(radius, theta)
            })
            .collect();
        Self {
            center: c,
            radius,
            nodes,
        }
    }

    pub fn kind(&self) -> QuadratureKind {
        QuadratureKind::TrapezoidContour
    }

    /// (1 / 2 pi i) times the counter-clockwise contour integral of f.
    pub fn cauchy_integral<F: FnMut(Complex64) -> Complex64>(&self, mut f: F) -> Complex64 {
        let n = self.nodes.len() as f64;
        let mut acc = Complex64::new(0.0, 0.0);
        for &z in &self.nodes {
            // dz = i (z - c) dtheta, dtheta = 2 pi / n
            acc += f(z) * (z - self.center);
        }
        acc / n
    }
}
