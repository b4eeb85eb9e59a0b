//! Special functions: heat kernel, modified Bessel I, Gauss 2F1, Hermite
//! polynomials, the theta function and the moment function built from it.

use num_complex::Complex64;
use statrs::function::gamma::{gamma, ln_gamma};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::numerics::quadrature::QuadratureRule;

/// Argument above which `bessel_i` switches to the exponentially scaled
/// asymptotic expansion.
pub const BESSEL_SCALED_SWITCH: f64 = 30.0;

/// Gaussian transition density p_t(b|a) of standard Brownian motion.
pub fn heat_kernel(t: f64, a: f64, b: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::domain(format!(
            "heat kernel needs t > 0 (got {t}); t = 0 is a point mass"
        )));
    }
    Ok(heat_kernel_unchecked(t, a, b))
}

#[inline]
pub(crate) fn heat_kernel_unchecked(t: f64, a: f64, b: f64) -> f64 {
    let d = a - b;
    (-d * d / (2.0 * t)).exp() / (2.0 * PI * t).sqrt()
}

/// p_t(z|w) continued to complex arguments.
#[inline]
pub(crate) fn heat_kernel_complex(t: f64, a: Complex64, b: Complex64) -> Complex64 {
    let d = a - b;
    (-d * d / (2.0 * t)).exp() / (2.0 * PI * t).sqrt()
}

fn check_bessel_args(nu: f64, z: f64) -> Result<()> {
    if !(nu > -1.0) {
        return Err(Error::domain(format!("bessel_i needs nu > -1 (got {nu})")));
    }
    if !(z >= 0.0) {
        return Err(Error::domain(format!("bessel_i needs z >= 0 (got {z})")));
    }
    Ok(())
}

/// Terms of the ascending series (z/2)^{2n+nu} / (n! Gamma(n+1+nu)).
pub(crate) fn bessel_i_series_terms(nu: f64, z: f64) -> impl Iterator<Item = f64> {
    let half = 0.5 * z;
    let ratio = half * half;
    let first = if z == 0.0 {
        if nu == 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        (nu * half.ln() - ln_gamma(nu + 1.0)).exp()
    };
    let mut n = 0.0;
    let mut term = first;
    std::iter::from_fn(move || {
        let out = term;
        n += 1.0;
        term *= ratio / (n * (n + nu));
        Some(out)
    })
}

fn bessel_i_series(nu: f64, z: f64) -> f64 {
    let mut sum = 0.0;
    for (k, term) in bessel_i_series_terms(nu, z).enumerate() {
        sum += term;
        if k > 2 && term <= f64::EPSILON * 0.25 * sum.abs() {
            break;
        }
        if k > 10_000 {
            break;
        }
    }
    sum
}

/// Hankel expansion of e^{-z} I_nu(z), valid for large z.
fn bessel_i_scaled_asymptotic(nu: f64, z: f64) -> f64 {
    let mu = 4.0 * nu * nu;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut prev = f64::INFINITY;
    for k in 1..200 {
        let odd = (2 * k - 1) as f64;
        term *= -(mu - odd * odd) / (k as f64 * 8.0 * z);
        if term.abs() > prev {
            break;
        }
        sum += term;
        prev = term.abs();
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    sum / (2.0 * PI * z).sqrt()
}

/// Modified Bessel function of the first kind, I_nu(z), for nu > -1, z >= 0.
pub fn bessel_i(nu: f64, z: f64) -> Result<f64> {
    check_bessel_args(nu, z)?;
    if z == 0.0 {
        return Ok(if nu == 0.0 {
            1.0
        } else if nu > 0.0 {
            0.0
        } else {
            f64::INFINITY
        });
    }
    if z <= BESSEL_SCALED_SWITCH {
        return Ok(bessel_i_series(nu, z));
    }
    let scaled = bessel_i_scaled_asymptotic(nu, z);
    let log_val = z + scaled.ln();
    if log_val > f64::MAX.ln() {
        return Err(Error::numeric(
            format!("I_{nu}({z}) overflows f64; use bessel_i_scaled"),
            Some(f64::MAX),
        ));
    }
    Ok(scaled * z.exp())
}

/// e^{-z} I_nu(z).
pub fn bessel_i_scaled(nu: f64, z: f64) -> Result<f64> {
    check_bessel_args(nu, z)?;
    if z == 0.0 {
        return bessel_i(nu, z);
    }
    if z <= BESSEL_SCALED_SWITCH {
        Ok(bessel_i_series(nu, z) * (-z).exp())
    } else {
        Ok(bessel_i_scaled_asymptotic(nu, z))
    }
}

const F21_MAX_TERMS: usize = 2_000_000;

/// Gauss hypergeometric series F(a, b, c; z) for 0 <= z < 1.
pub fn gauss_2f1(a: f64, b: f64, c: f64, z: f64) -> Result<f64> {
    if c <= 0.0 && c.fract() == 0.0 {
        return Err(Error::domain(format!(
            "gamma parameter must not be a nonpositive integer (got {c})"
        )));
    }
    if !(0.0..1.0).contains(&z) {
        return Err(Error::domain(format!(
            "2F1 series needs 0 <= z < 1 (got {z})"
        )));
    }
    let mut sum = 1.0;
    let mut term = 1.0;
    let mut quiet = 0;
    for i in 0..F21_MAX_TERMS {
        let fi = i as f64;
        term *= (a + fi) * (b + fi) / ((c + fi) * (fi + 1.0)) * z;
        sum += term;
        // tail of a geometric-dominated series is below term * z / (1 - z)
        let tail = term.abs() * z / (1.0 - z);
        if tail <= 1e-16 * sum.abs() {
            quiet += 1;
            if quiet >= 3 {
                return Ok(sum);
            }
        } else {
            quiet = 0;
        }
        if term == 0.0 {
            return Ok(sum);
        }
    }
    Err(Error::numeric(
        format!("2F1({a},{b},{c};{z}) did not converge in {F21_MAX_TERMS} terms"),
        Some(sum),
    ))
}

/// Physicists' Hermite polynomial H_i(x) from its explicit finite sum.
pub fn hermite(i: usize, x: f64) -> f64 {
    // coefficient of x^{i-2j}: (-1)^j i! 2^{i-2j} / (j! (i-2j)!)
    let mut coeff = 2f64.powi(i as i32);
    let mut sum = 0.0;
    let mut j = 0usize;
    loop {
        let power = i - 2 * j;
        sum += coeff * x.powi(power as i32);
        if power < 2 {
            break;
        }
        let p = power as f64;
        coeff *= -(p * (p - 1.0)) / (4.0 * (j as f64 + 1.0));
        j += 1;
    }
    sum
}

/// Smallest admissible Im(tau) for `theta3`.
pub const THETA_MIN_IM_TAU: f64 = 1e-3;

/// A truncated theta-series value together with the truncation it used.
#[derive(Debug, Clone, Copy)]
pub struct ThetaValue {
    pub value: Complex64,
    pub n_max: usize,
    pub tail_bound: f64,
}

/// theta3(v, tau) = sum_n exp(2 pi i v n + pi i tau n^2), truncated at |n| <= n_max.
pub fn theta3_truncated(v: Complex64, tau: Complex64, n_max: usize) -> Complex64 {
    let i = Complex64::i();
    let mut sum = Complex64::new(0.0, 0.0);
    for n in -(n_max as i64)..=(n_max as i64) {
        let nf = n as f64;
        sum += (2.0 * PI * i * v * nf + PI * i * tau * nf * nf).exp();
    }
    sum
}

/// Adaptive theta3 with a bound on the dropped tail (relative to 1e-14 of the
/// largest term, or absolute 1e-14 when the sum is O(1)).
pub fn theta3_with_bound(v: Complex64, tau: Complex64) -> Result<ThetaValue> {
    if !(tau.im > 0.0) {
        return Err(Error::domain(format!(
            "theta3 needs Im tau > 0 (got {})",
            tau.im
        )));
    }
    if tau.im < THETA_MIN_IM_TAU {
        return Err(Error::domain(format!(
            "theta3 truncation cap: Im tau = {} below {THETA_MIN_IM_TAU}",
            tau.im
        )));
    }
    // |term_n| = exp(-pi T n^2 - 2 pi V n)
    let t = tau.im;
    let vv = v.im;
    let log_mag = |n: f64| -PI * t * n * n - 2.0 * PI * vv * n;
    let peak = -vv / t;
    let log_peak = log_mag(peak).max(0.0);
    let target = log_peak + (1e-14f64).ln() - 2.0;
    let mut n_max = peak.abs().ceil() as usize + 1;
    while log_mag(n_max as f64).max(log_mag(-(n_max as f64))) > target {
        n_max += 1;
    }
    let value = theta3_truncated(v, tau, n_max);
    // geometric bound on both tails beyond n_max
    let mut tail = 0.0;
    for sign in [1.0, -1.0] {
        let n1 = sign * (n_max as f64 + 1.0);
        let first = log_mag(n1).exp();
        let ratio = (log_mag(n1 + sign) - log_mag(n1)).exp();
        tail += if ratio < 1.0 {
            first / (1.0 - ratio)
        } else {
            f64::INFINITY
        };
    }
    Ok(ThetaValue {
        value,
        n_max,
        tail_bound: tail,
    })
}

pub fn theta3(v: Complex64, tau: Complex64) -> Result<Complex64> {
    theta3_with_bound(v, tau).map(|t| t.value)
}

/// Number of Dirichlet terms summed explicitly by `zeta`.
pub const ZETA_TERMS: usize = 100_000;

/// Riemann zeta for real s > 1: Dirichlet sum plus an Euler-Maclaurin tail.
pub fn zeta(s: f64) -> Result<f64> {
    if !(s > 1.0) {
        return Err(Error::domain(format!(
            "zeta is evaluated only on its Dirichlet half-line s > 1 (got {s})"
        )));
    }
    let n = ZETA_TERMS;
    // sum backwards for accuracy
    let mut sum = 0.0;
    for k in (1..n).rev() {
        sum += (k as f64).powf(-s);
    }
    let nf = n as f64;
    // sum_{k>=N} k^{-s} = N^{1-s}/(s-1) + N^{-s}/2 + s N^{-s-1}/12 - ...
    let tail = nf.powf(1.0 - s) / (s - 1.0) + 0.5 * nf.powf(-s) + s * nf.powf(-s - 1.0) / 12.0;
    Ok(sum + tail)
}

/// xi(s) = s(s-1) pi^{-s/2} Gamma(s/2) zeta(s) / 2, valid for s > 1.
pub fn xi_from_zeta(s: f64) -> Result<f64> {
    let z = zeta(s)?;
    Ok(0.5 * s * (s - 1.0) * PI.powf(-0.5 * s) * gamma(0.5 * s) * z)
}

/// Upper limit of the u-integral in the theta representation of xi.
const XI_U_MAX: f64 = 16.0;

/// xi(s) from the theta-integral representation
/// 1/2 + s(s-1)/4 * int_1^inf (u^{s/2-1} + u^{(1-s)/2-1}) (theta3(0, iu) - 1) du.
pub fn xi_moment_function(s: f64) -> Result<f64> {
    if !(s > 0.0) {
        return Err(Error::domain(format!("xi needs s > 0 (got {s})")));
    }
    // theta3(0, iu) - 1 = 2 sum_{n>=1} e^{-pi n^2 u}; beyond u = 16 it is below 1e-21
    let theta_minus_one = |u: f64| {
        let mut acc = 0.0;
        for n in 1..50 {
            let term = (-PI * (n * n) as f64 * u).exp();
            acc += term;
            if term < 1e-30 {
                break;
            }
        }
        2.0 * acc
    };
    let rule = QuadratureRule::gauss_legendre(64);
    let integrand =
        |u: f64| (u.powf(0.5 * s - 1.0) + u.powf(0.5 * (1.0 - s) - 1.0)) * theta_minus_one(u);
    let integral = rule.integrate_panels(integrand, 1.0, XI_U_MAX, 8);
    let value = 0.5 + 0.25 * s * (s - 1.0) * integral;
    if !value.is_finite() {
        return Err(Error::numeric(format!("xi({s}) quadrature failed"), None));
    }
    Ok(value)
}
