//! GUE sampling, moments of products of characteristic polynomials, their
//! determinantal closed forms, the Ishikawa determinant identity and the
//! time-shift equivalence between a GUE start and the all-at-origin start.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use crate::dyson::{hermitian_bm_eigenvalues_at, WeylPoint};
use crate::error::{Error, Result};
use crate::mc::{family, Sharding};
use crate::numerics::linalg::det_complex;
use crate::numerics::rng::RngStream;
use crate::stats::{ks_critical_two_sample, ks_two_sample_vectors, MeanAccumulator};

/// GUE(N, sigma^2): real diagonal entries of variance sigma^2, complex
/// off-diagonal entries with variance sigma^2/2 per real component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GueSpec {
    pub n: usize,
    pub variance: f64,
}

impl GueSpec {
    pub fn new(n: usize, variance: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::argument("GUE size must be at least 1"));
        }
        if !(variance > 0.0) {
            return Err(Error::domain(format!(
                "GUE variance must be positive (got {variance})"
            )));
        }
        Ok(Self { n, variance })
    }
}

/// Sorted eigenvalues of one GUE matrix.
pub fn sample_gue(spec: GueSpec, rng: &mut RngStream) -> Result<WeylPoint> {
    let eig = hermitian_bm_eigenvalues_at(&vec![0.0; spec.n], spec.variance, rng)?;
    WeylPoint::new(eig).map_err(|_| Error::numeric("GUE sample has a repeated eigenvalue", None))
}

/// prod_n prod_i (alpha_n - lambda_i).
pub fn characteristic_product(alpha: &[Complex64], lambda: &[f64]) -> Complex64 {
    alpha
        .iter()
        .flat_map(|&a| lambda.iter().map(move |&l| a - l))
        .product()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComplexEstimate {
    pub re: f64,
    pub im: f64,
    pub stderr_re: f64,
    pub stderr_im: f64,
    pub samples: u64,
}

impl ComplexEstimate {
    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }

    /// |estimate - target| within k standard errors in each component.
    pub fn within(&self, target: Complex64, k: f64) -> bool {
        (self.re - target.re).abs() <= k * self.stderr_re
            && (self.im - target.im).abs() <= k * self.stderr_im
    }
}

/// Monte Carlo mean of prod_n det(alpha_n - H) over GUE(N, sigma^2).
pub fn mgue_mc(
    alpha: &[Complex64],
    spec: GueSpec,
    samples: usize,
    sharding: &Sharding,
) -> Result<ComplexEstimate> {
    if samples == 0 {
        return Err(Error::argument("need at least one sample"));
    }
    let parts = sharding.run(family::GUE, samples, |rng, n| {
        let mut re = MeanAccumulator::new();
        let mut im = MeanAccumulator::new();
        for _ in 0..n {
            let lambda = sample_gue(spec, rng)?;
            let p = characteristic_product(alpha, &lambda);
            re.push(p.re);
            im.push(p.im);
        }
        Ok::<_, Error>((re, im))
    });
    let mut re = MeanAccumulator::new();
    let mut im = MeanAccumulator::new();
    for part in parts {
        let (r, i) = part?;
        re.merge(&r);
        im.merge(&i);
    }
    Ok(ComplexEstimate {
        re: re.mean(),
        im: im.mean(),
        stderr_re: re.stderr(),
        stderr_im: im.stderr(),
        samples: re.count,
    })
}

/// Physicists' Hermite polynomial at a complex argument, by recurrence.
pub fn hermite_complex(i: usize, z: Complex64) -> Complex64 {
    let mut prev = Complex64::new(1.0, 0.0);
    if i == 0 {
        return prev;
    }
    let mut cur = 2.0 * z;
    for k in 1..i {
        let next = 2.0 * z * cur - 2.0 * k as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// H^_i(alpha; sigma^2) = (sigma^2/2)^{i/2} H_i(alpha / sqrt(2 sigma^2)).
pub fn scaled_hermite(i: usize, alpha: Complex64, variance: f64) -> Complex64 {
    (variance / 2.0).powf(i as f64 / 2.0) * hermite_complex(i, alpha / (2.0 * variance).sqrt())
}

/// h_n(x) = prod_{i<j} (x_j - x_i).
pub fn vandermonde_complex(x: &[Complex64]) -> Complex64 {
    let mut p = Complex64::new(1.0, 0.0);
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            p *= x[j] - x[i];
        }
    }
    p
}

fn check_alpha(alpha: &[Complex64]) -> Result<usize> {
    if alpha.is_empty() || !alpha.len().is_multiple_of(2) {
        return Err(Error::argument(format!(
            "need an even, nonzero number of alphas (got {})",
            alpha.len()
        )));
    }
    for i in 0..alpha.len() {
        for j in i + 1..alpha.len() {
            if alpha[i] == alpha[j] {
                return Err(Error::domain("alphas must be pairwise distinct"));
            }
        }
    }
    Ok(alpha.len() / 2)
}

/// M_GUE(2n, alpha; N, sigma^2) = det[H^_{N+i-1}(alpha_j; sigma^2)]_{2n x 2n} / h_{2n}(alpha).
pub fn mgue_det(alpha: &[Complex64], spec: GueSpec) -> Result<Complex64> {
    let m = 2 * check_alpha(alpha)?;
    let mat = DMatrix::from_fn(m, m, |i, j| {
        scaled_hermite(spec.n + i, alpha[j], spec.variance)
    });
    Ok(det_complex(&mat)? / vandermonde_complex(alpha))
}

/// ln gamma_{N,2n} = -n(2N+2n-1)/2 ln 2 + sum_{i=2}^n [ln (N+n-i)! - ln (N+n-1)!].
pub fn ln_gamma_prefactor(n_size: usize, n: usize) -> f64 {
    let (nn, n) = (n_size as f64, n as f64);
    let head = -n * (2.0 * nn + 2.0 * n - 1.0) / 2.0 * 2f64.ln();
    let tail: f64 = (2..=n as usize)
        .map(|i| ln_gamma(nn + n - i as f64 + 1.0) - ln_gamma(nn + n))
        .sum();
    head + tail
}

/// The n x n block form:
/// gamma_{N,2n} sigma^{n(2N+n)} / (h_n(alpha_{1..n}) h_n(alpha_{n+1..2n}))
/// det[(H_{N+n}(a_i) H_{N+n-1}(b_j) - H_{N+n}(b_j) H_{N+n-1}(a_i)) / (alpha_i - alpha_{n+j})]
/// with a = alpha_i / sqrt(2 sigma^2), b = alpha_{n+j} / sqrt(2 sigma^2).
pub fn mgue_block(alpha: &[Complex64], spec: GueSpec) -> Result<Complex64> {
    let n = check_alpha(alpha)?;
    let big = spec.n + n;
    let r = (2.0 * spec.variance).sqrt();
    let mat = DMatrix::from_fn(n, n, |i, j| {
        let (a, b) = (alpha[i] / r, alpha[n + j] / r);
        let wronskian = hermite_complex(big, a) * hermite_complex(big - 1, b)
            - hermite_complex(big, b) * hermite_complex(big - 1, a);
        wronskian / (alpha[i] - alpha[n + j])
    });
    let ln_scale =
        ln_gamma_prefactor(spec.n, n) + (n * (2 * spec.n + n)) as f64 * 0.5 * spec.variance.ln();
    let denom = vandermonde_complex(&alpha[..n]) * vandermonde_complex(&alpha[n..]);
    Ok(ln_scale.exp() * det_complex(&mat)? / denom)
}

/// Both sides of the Ishikawa identity
/// det[(b_j - a_i) / (y_j - x_i)] = (-1)^{n(n-1)/2} / prod (y_j - x_i) det V,
/// where the rows of V are (1, x_i, .., x_i^{n-1}, a_i, a_i x_i, .., a_i x_i^{n-1})
/// followed by the same rows in (y_j, b_j).
pub fn ishikawa_sides(
    x: &[Complex64],
    y: &[Complex64],
    a: &[Complex64],
    b: &[Complex64],
) -> Result<(Complex64, Complex64)> {
    let n = x.len();
    if n < 2 || y.len() != n || a.len() != n || b.len() != n {
        return Err(Error::argument(
            "need four vectors of a common length n >= 2",
        ));
    }
    if x.iter().any(|xi| y.iter().any(|yj| yj == xi)) {
        return Err(Error::domain("y_j - x_i vanishes"));
    }
    let lhs = det_complex(&DMatrix::from_fn(n, n, |i, j| {
        (b[j] - a[i]) / (y[j] - x[i])
    }))?;
    let row = |v: Complex64, c: Complex64, k: usize| {
        if k < n {
            v.powu(k as u32)
        } else {
            c * v.powu((k - n) as u32)
        }
    };
    let big = DMatrix::from_fn(2 * n, 2 * n, |i, k| {
        if i < n {
            row(x[i], a[i], k)
        } else {
            row(y[i - n], b[i - n], k)
        }
    });
    let denom: Complex64 = x
        .iter()
        .flat_map(|&xi| y.iter().map(move |&yj| yj - xi))
        .product();
    let sign = if (n * (n - 1) / 2).is_multiple_of(2) {
        1.0
    } else {
        -1.0
    };
    Ok((lhs, sign * det_complex(&big)? / denom))
}

/// |lhs - rhs| of the Ishikawa identity.
pub fn ishikawa_check(
    x: &[Complex64],
    y: &[Complex64],
    a: &[Complex64],
    b: &[Complex64],
) -> Result<f64> {
    let (l, r) = ishikawa_sides(x, y, a, b)?;
    Ok((l - r).norm())
}

fn disk_point(rng: &mut RngStream, center: f64) -> Complex64 {
    let r = rng.uniform().sqrt();
    let phi = 2.0 * std::f64::consts::PI * rng.uniform();
    Complex64::new(center + r * phi.cos(), r * phi.sin())
}

/// Largest deviation over random instances: x_i in the unit disk, y_j in the
/// unit disk around 3, a and b standard complex normal.
pub fn ishikawa_random_check(n: usize, instances: usize, rng: &mut RngStream) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let x: Vec<_> = (0..n).map(|_| disk_point(rng, 0.0)).collect();
        let y: Vec<_> = (0..n).map(|_| disk_point(rng, 3.0)).collect();
        let mut normal = || Complex64::new(rng.normal(), rng.normal());
        let a: Vec<_> = (0..n).map(|_| normal()).collect();
        let b: Vec<_> = (0..n).map(|_| normal()).collect();
        worst = worst.max(ishikawa_check(&x, &y, &a, &b)?);
    }
    Ok(worst)
}

/// Two-sample comparison of the Dyson model started from GUE(N, sigma^2)
/// with the all-at-origin start shifted by sigma^2.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeshiftReport {
    pub n: usize,
    pub variance: f64,
    pub t: f64,
    /// second time of the two-time comparison
    pub t2: f64,
    pub samples: usize,
    pub alpha: f64,
    /// per-coordinate KS statistics of the sorted positions at t
    pub single_time_statistics: Vec<f64>,
    pub single_time_ratio: f64,
    /// positions at t, at t2 and the increment of the top particle
    pub two_time_statistics: Vec<f64>,
    pub two_time_ratio: f64,
    pub critical_value: f64,
    pub pass: bool,
    pub scope: &'static str,
}

/// Side A: GUE(N, sigma^2) start, then exact Hermitian-matrix Brownian
/// steps to t and t2. Side B: GUE(N, t + sigma^2) at t, then a step of
/// t2 - t. Sorted positions at t, positions at t2 and the top increment are
/// compared coordinatewise at level alpha with a Bonferroni split.
pub fn timeshift_equivalence_check(
    spec: GueSpec,
    t: f64,
    t2: f64,
    samples: usize,
    alpha: f64,
    sharding: &Sharding,
) -> Result<TimeshiftReport> {
    if !(t > 0.0 && t2 > t) {
        return Err(Error::argument("need 0 < t < t2"));
    }
    let n = spec.n;
    let draw = |from_gue: bool| {
        move |rng: &mut RngStream| -> Result<(Vec<f64>, Vec<f64>)> {
            let first = if from_gue {
                let start = sample_gue(spec, rng)?;
                hermitian_bm_eigenvalues_at(&start, t, rng)?
            } else {
                sample_gue(GueSpec::new(n, t + spec.variance)?, rng)?.to_vec()
            };
            let second = hermitian_bm_eigenvalues_at(&first, t2 - t, rng)?;
            Ok((first, second))
        }
    };
    let a: Vec<_> = sharding
        .samples(family::GUE, samples, draw(true))
        .into_iter()
        .collect::<Result<_>>()?;
    let b: Vec<_> = sharding
        .samples(family::HERMITIAN_BM, samples, draw(false))
        .into_iter()
        .collect::<Result<_>>()?;
    let firsts = |v: &[(Vec<f64>, Vec<f64>)]| v.iter().map(|p| p.0.clone()).collect::<Vec<_>>();
    let joint = |v: &[(Vec<f64>, Vec<f64>)]| {
        v.iter()
            .map(|(f, s)| {
                let mut row = f.clone();
                row.extend_from_slice(s);
                row.push(s[n - 1] - f[n - 1]);
                row
            })
            .collect::<Vec<_>>()
    };
    let (single_time_ratio, single_time_statistics) =
        ks_two_sample_vectors(&firsts(&a), &firsts(&b), alpha);
    let (two_time_ratio, two_time_statistics) =
        ks_two_sample_vectors(&joint(&a), &joint(&b), alpha);
    Ok(TimeshiftReport {
        n,
        variance: spec.variance,
        t,
        t2,
        samples,
        alpha,
        single_time_statistics,
        single_time_ratio,
        two_time_statistics,
        two_time_ratio,
        critical_value: ks_critical_two_sample(alpha / n as f64, samples, samples),
        pass: single_time_ratio <= 1.0 && two_time_ratio <= 1.0,
        scope: "single-time marginals and one two-time pair",
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::quadrature::QuadratureRule;
    use crate::stats::ks_statistic_density;
    use approx::assert_relative_eq;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn one_by_one_gue_is_normal() {
        let spec = GueSpec::new(1, 0.7).unwrap();
        let mut rng = RngStream::new(1, 0);
        let acc: MeanAccumulator = (0..20_000)
            .map(|_| sample_gue(spec, &mut rng).unwrap()[0])
            .collect();
        assert!(acc.mean().abs() < 3.0 * acc.stderr());
        assert!((acc.variance() - 0.7).abs() < 0.03);
        assert!(GueSpec::new(2, 0.0).is_err());
    }

    /// E f over the N = 2 eigenvalue density e^{-(x^2+y^2)/2s} (y-x)^2 / (s^4 C_2) on x < y.
    fn gue2_expectation(s: f64, f: impl Fn(f64, f64) -> f64) -> f64 {
        let rule = QuadratureRule::gauss_legendre(40);
        let l = 9.0 * s.sqrt();
        let c2 = 2.0 * std::f64::consts::PI;
        rule.integrate_panels(
            |x| {
                rule.integrate_panels(
                    |y| {
                        f(x, y) * (-(x * x + y * y) / (2.0 * s)).exp() * (y - x).powi(2)
                            / (s.powi(4) * c2)
                    },
                    x,
                    x + 2.0 * l,
                    6,
                )
            },
            -l,
            l,
            6,
        )
    }

    #[test]
    fn two_by_two_gap_and_density() {
        let s = 1.0;
        assert!((gue2_expectation(s, |_, _| 1.0) - 1.0).abs() < 1e-10);
        let exact_gap = gue2_expectation(s, |x, y| (y - x).powi(2));
        let spec = GueSpec::new(2, s).unwrap();
        let mut rng = RngStream::new(2, 0);
        let draws: Vec<WeylPoint> = (0..20_000)
            .map(|_| sample_gue(spec, &mut rng).unwrap())
            .collect();
        let gap: MeanAccumulator = draws.iter().map(|w| (w[1] - w[0]).powi(2)).collect();
        assert!(
            (gap.mean() - exact_gap).abs() < 3.0 * gap.stderr(),
            "{} {exact_gap}",
            gap.mean()
        );
        // one eigenvalue chosen uniformly has density (1/2) int mu(x, y) over the other
        let rule = QuadratureRule::gauss_legendre(64);
        let marginal = |x: f64| {
            0.5 * rule.integrate_panels(
                |y| (-(x * x + y * y) / 2.0).exp() * (y - x).powi(2) / (2.0 * std::f64::consts::PI),
                -10.0,
                10.0,
                4,
            )
        };
        let picks: Vec<f64> = draws.iter().enumerate().map(|(k, w)| w[k % 2]).collect();
        let d = ks_statistic_density(&picks, -10.0, marginal);
        assert!(
            d < crate::stats::ks_critical_one_sample(0.01, picks.len()),
            "{d}"
        );
        let sum: MeanAccumulator = draws.iter().map(|w| w[0] + w[1]).collect();
        assert!(sum.mean().abs() < 3.0 * sum.stderr());
    }

    #[test]
    fn monte_carlo_small_cases() {
        let spec = GueSpec::new(1, 0.8).unwrap();
        let sharding = Sharding::new(3);
        let est = mgue_mc(&[c(0.4)], spec, 20_000, &sharding).unwrap();
        assert!(est.within(c(0.4), 3.0), "{est:?}");
        let est = mgue_mc(&[c(0.4), c(-1.1)], spec, 20_000, &sharding).unwrap();
        assert!(est.within(c(0.4 * -1.1 + 0.8), 3.0), "{est:?}");
        let exact = mgue_det(&[c(0.4), c(-1.1)], spec).unwrap();
        assert_relative_eq!(exact.re, 0.4 * -1.1 + 0.8, max_relative = 1e-13);
        let spec2 = GueSpec::new(2, 1.0).unwrap();
        let alpha = [c(0.3), c(-0.8)];
        let est = mgue_mc(&alpha, spec2, 100_000, &sharding).unwrap();
        assert!(est.within(mgue_det(&alpha, spec2).unwrap(), 3.0), "{est:?}");
    }

    #[test]
    fn closed_forms_agree() {
        let mut rng = RngStream::new(4, 0);
        for n_size in 1..=3 {
            for n in 1..=2 {
                for _ in 0..5 {
                    let alpha: Vec<_> = (0..2 * n)
                        .map(|_| Complex64::new(rng.normal(), 0.5 * rng.normal()))
                        .collect();
                    let spec = GueSpec::new(n_size, 0.7).unwrap();
                    let a = mgue_det(&alpha, spec).unwrap();
                    let b = mgue_block(&alpha, spec).unwrap();
                    assert!(
                        (a - b).norm() <= 1e-10 * (1.0 + a.norm()),
                        "{n_size} {n}: {a} {b}"
                    );
                }
            }
        }
        let exact = mgue_det(&[c(0.3), c(-0.8)], GueSpec::new(2, 1.0).unwrap()).unwrap();
        assert!((exact - c(1.8476)).norm() < 1e-12, "{exact}");
        let spec = GueSpec::new(2, 0.7).unwrap();
        assert!(mgue_det(&[c(0.3), c(0.3)], spec).is_err());
        let alpha = [c(0.3), c(-0.5), c(1.2), c(0.1)];
        let mut swapped = alpha;
        swapped.swap(0, 3);
        let (a, b) = (
            mgue_det(&alpha, spec).unwrap(),
            mgue_det(&swapped, spec).unwrap(),
        );
        assert!((a - b).norm() < 1e-12 * a.norm().max(1.0));
    }

    #[test]
    fn gamma_prefactor() {
        assert_relative_eq!(
            ln_gamma_prefactor(2, 1).exp(),
            2f64.powf(-2.5),
            max_relative = 1e-14
        );
        // N = 1, n = 2: 2^{-5} * 1!/2!
        assert_relative_eq!(
            ln_gamma_prefactor(1, 2).exp(),
            2f64.powi(-5) / 2.0,
            max_relative = 1e-14
        );
    }

    #[test]
    fn ishikawa_identity() {
        let mut rng = RngStream::new(5, 0);
        assert!(ishikawa_random_check(2, 100, &mut rng).unwrap() < 1e-10);
        assert!(ishikawa_random_check(3, 100, &mut rng).unwrap() < 1e-10);
        let x = [c(0.1), c(0.4)];
        let y = [c(2.0), c(3.5)];
        let ones = [c(1.0), c(1.0)];
        let (l, r) = ishikawa_sides(&x, &y, &ones, &ones).unwrap();
        assert_eq!(l, c(0.0));
        assert!(r.norm() < 1e-12);
        // a = 0, b = 1 gives det[1/(y_j - x_i)] = (-1)^{n(n-1)/2} h(x) h(y) / prod (y_j - x_i)
        let (l, r) = ishikawa_sides(&x, &y, &[c(0.0); 2], &ones).unwrap();
        let prod: Complex64 = x
            .iter()
            .flat_map(|&a| y.iter().map(move |&b| b - a))
            .product();
        let cauchy = -vandermonde_complex(&x) * vandermonde_complex(&y) / prod;
        assert!((l - cauchy).norm() < 1e-14 && (r - cauchy).norm() < 1e-14);
        assert!(ishikawa_sides(&x, &[c(0.1), c(1.0)], &ones, &ones).is_err());
    }

    #[test]
    fn time_shift_equivalence() {
        for n in 1..=2 {
            let spec = GueSpec::new(n, 0.5).unwrap();
            let r = timeshift_equivalence_check(spec, 0.5, 1.0, 20_000, 0.01, &Sharding::new(6))
                .unwrap();
            assert!(r.pass, "{r:?}");
        }
    }
}
