use std::f64::consts::{PI, SQRT_2};

use approx::assert_relative_eq;
use proptest::prelude::*;
use stochlab_core::bessel::density_d3;
use stochlab_core::charpoly::{mgue_mc, GueSpec};
use stochlab_core::detkernels::kernel_k1;
use stochlab_core::dyson::{noncolliding_density, PointConfiguration};
use stochlab_core::extremes::bridge_maxima;
use stochlab_core::lerw::{fomin_determinant, WalkNetwork};
use stochlab_core::numerics::QuadratureRule;
use stochlab_core::Sharding;

fn gaussian(t: f64, x: f64) -> f64 {
    (-x * x / (2.0 * t)).exp() / (2.0 * PI * t).sqrt()
}

fn integrate(f: impl FnMut(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let rule = QuadratureRule::gauss_legendre(32);
    rule.integrate_panels(f, a, b, panels)
}

// Integrating the two-particle noncolliding density over the centre of mass
// leaves the law of the gap/sqrt(2), a BES(3) process.
#[test]
fn dyson_gap_marginal_is_bes3() {
    let (t, x): (f64, _) = (0.7, [-0.4, 0.5]);
    let u0 = (x[1] - x[0]) / SQRT_2;
    let c0 = (x[1] + x[0]) / SQRT_2;
    let half = 12.0 * t.sqrt();
    for u in [0.05, 0.3, 0.8, 1.5, 2.6] {
        let marginal = integrate(
            |v| {
                let y = [(v - u) / SQRT_2, (v + u) / SQRT_2];
                noncolliding_density(t, &x, &y).unwrap()
            },
            c0 - half,
            c0 + half,
            24,
        );
        assert_relative_eq!(marginal, density_d3(t, u0, u), max_relative = 1e-10);
    }
}

// For a single starting point K1 on the diagonal is the heat kernel.
#[test]
fn k1_one_point_density_is_the_heat_kernel() {
    let xi = PointConfiguration::finite(vec![0.3]).unwrap();
    for t in [0.2, 1.0, 2.5] {
        for x in [-1.5, 0.0, 0.3, 1.7] {
            let rho = kernel_k1(&xi, t, x, t, x).unwrap();
            assert_relative_eq!(rho, gaussian(t, x - 0.3), max_relative = 1e-9);
        }
    }
}

// For two starting points the one-point density is the sum of the two
// marginals of the noncolliding transition density.
#[test]
fn k1_two_point_density_matches_noncolliding_marginals() {
    let (a, b, t): (f64, f64, f64) = (-0.6, 0.8, 0.5);
    let xi = PointConfiguration::finite(vec![a, b]).unwrap();
    let reach = 12.0 * t.sqrt();
    for x in [-1.2, -0.3, 0.1, 0.9, 1.6] {
        let above = integrate(
            |y| noncolliding_density(t, &[a, b], &[x, y]).unwrap(),
            x,
            x + reach,
            24,
        );
        let below = integrate(
            |y| noncolliding_density(t, &[a, b], &[y, x]).unwrap(),
            x - reach,
            x,
            24,
        );
        let rho = kernel_k1(&xi, t, x, t, x).unwrap();
        assert_relative_eq!(rho, above + below, max_relative = 1e-8);
    }
}

// On a path a - m - b with weight w, walks a -> b sum to w^2 / (1 - 2 w^2).
#[test]
fn fomin_single_walk_on_a_path() {
    for w in [0.05, 0.25, 0.5] {
        let net = WalkNetwork::parse(&format!("a m {w}\nm b {w}\nA: a\nB: b\n")).unwrap();
        let det = fomin_determinant(&net).unwrap();
        assert_relative_eq!(det, w * w / (1.0 - 2.0 * w * w), max_relative = 1e-13);
    }
}

// Two walks across a 4-cycle: the minor of the walk generating function
// (I - wA)^{-1}, diagonalised by hand.
#[test]
fn fomin_two_walks_on_a_square() {
    let w: f64 = 0.2;
    let net = WalkNetwork::parse(&format!(
        "a1 b1 {w}\na2 b2 {w}\na1 a2 {w}\nb1 b2 {w}\nA: a1 a2\nB: b1 b2\n"
    ))
    .unwrap();
    let denom = 1.0 - 4.0 * w * w;
    let g_adjacent = w / denom;
    let g_opposite = 2.0 * w * w / denom;
    let expected = g_adjacent * g_adjacent - g_opposite * g_opposite;
    assert_relative_eq!(
        fomin_determinant(&net).unwrap(),
        expected,
        max_relative = 1e-12
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn monte_carlo_drivers_ignore_the_worker_count(seed in any::<u64>(), workers in 2usize..5) {
        let one = Sharding::new(seed);
        let many = Sharding::new(seed).with_workers(workers);
        prop_assert_eq!(
            bridge_maxima(1e-2, 64, &one).unwrap(),
            bridge_maxima(1e-2, 64, &many).unwrap()
        );
        let alpha = [num_complex::Complex64::new(0.3, 0.1), num_complex::Complex64::new(-0.5, 0.0)];
        let spec = GueSpec::new(2, 1.0).unwrap();
        let a = mgue_mc(&alpha, spec, 200, &one).unwrap();
        let b = mgue_mc(&alpha, spec, 200, &many).unwrap();
        prop_assert_eq!(a.re.to_bits(), b.re.to_bits());
        prop_assert_eq!(a.im.to_bits(), b.im.to_bits());
    }
}
