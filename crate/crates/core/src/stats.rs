//! Summary statistics and Kolmogorov-Smirnov style goodness-of-fit tests.

use crate::numerics::quadrature::QuadratureRule;

/// Running mean and variance (Welford), mergeable across shards.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MeanAccumulator {
    pub count: u64,
    mean: f64,
    m2: f64,
}

impl MeanAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    /// Combines two accumulators; merging in a fixed order keeps results reproducible.
    pub fn merge(&mut self, other: &MeanAccumulator) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = (self.count + other.count) as f64;
        let delta = other.mean - self.mean;
        self.mean += delta * other.count as f64 / n;
        self.m2 += other.m2 + delta * delta * self.count as f64 * other.count as f64 / n;
        self.count += other.count;
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn stderr(&self) -> f64 {
        if self.count == 0 {
            f64::INFINITY
        } else {
            (self.variance() / self.count as f64).sqrt()
        }
    }
}

impl FromIterator<f64> for MeanAccumulator {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = Self::new();
        iter.into_iter().for_each(|x| acc.push(x));
        acc
    }
}

/// Asymptotic Kolmogorov coefficient c(alpha) = sqrt(-ln(alpha/2)/2).
pub fn ks_coefficient(alpha: f64) -> f64 {
    (-(alpha / 2.0).ln() / 2.0).sqrt()
}

/// Critical value of the one-sample statistic for n samples.
pub fn ks_critical_one_sample(alpha: f64, n: usize) -> f64 {
    ks_coefficient(alpha) / (n as f64).sqrt()
}

/// Critical value of the two-sample statistic for sample sizes n and m.
pub fn ks_critical_two_sample(alpha: f64, n: usize, m: usize) -> f64 {
    let (n, m) = (n as f64, m as f64);
    ks_coefficient(alpha) * ((n + m) / (n * m)).sqrt()
}

fn sorted(samples: &[f64]) -> Vec<f64> {
    let mut s = samples.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    s
}

/// sup |F_n - F| for a continuous reference CDF.
pub fn ks_statistic<F: FnMut(f64) -> f64>(samples: &[f64], mut cdf: F) -> f64 {
    let s = sorted(samples);
    let n = s.len() as f64;
    s.iter().enumerate().fold(0.0, |d, (i, &x)| {
        let f = cdf(x);
        d.max(f - i as f64 / n).max((i + 1) as f64 / n - f)
    })
}

/// Kolmogorov distance to a density supported on [lower, inf), integrating
/// the density between consecutive order statistics.
pub fn ks_statistic_density<F: FnMut(f64) -> f64>(
    samples: &[f64],
    lower: f64,
    mut density: F,
) -> f64 {
    let rule = QuadratureRule::gauss_legendre(10);
    let s = sorted(samples);
    let n = s.len() as f64;
    let mut cdf = 0.0;
    let mut prev = lower;
    let mut d: f64 = 0.0;
    for (i, &x) in s.iter().enumerate() {
        if x > prev {
            // long first gaps get a composite rule
            let panels = (((x - prev) / 0.05).ceil() as usize).clamp(1, 400);
            cdf += rule.integrate_panels(&mut density, prev, x, panels);
            prev = x;
        }
        d = d.max(cdf - i as f64 / n).max((i + 1) as f64 / n - cdf);
    }
    d
}

/// Two-sample Kolmogorov-Smirnov statistic.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let a = sorted(a);
    let b = sorted(b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Per-coordinate two-sample tests on vector samples with a Bonferroni
/// split of the level. Returns (max statistic / critical value, statistics).
pub fn ks_two_sample_vectors(a: &[Vec<f64>], b: &[Vec<f64>], alpha: f64) -> (f64, Vec<f64>) {
    let dim = a.first().map_or(0, Vec::len);
    let crit = ks_critical_two_sample(alpha / dim.max(1) as f64, a.len(), b.len());
    let stats: Vec<f64> = (0..dim)
        .map(|k| {
            let xa: Vec<f64> = a.iter().map(|v| v[k]).collect();
            let xb: Vec<f64> = b.iter().map(|v| v[k]).collect();
            ks_two_sample(&xa, &xb)
        })
        .collect();
    let worst = stats.iter().fold(0.0f64, |m, &s| m.max(s / crit));
    (worst, stats)
}

/// Two-dimensional two-sample Kolmogorov-Smirnov statistic evaluated on a
/// grid of pooled quantiles, maximised over the four quadrants.
pub fn ks_two_sample_2d(a: &[(f64, f64)], b: &[(f64, f64)], grid: usize) -> f64 {
    let cuts = |sel: fn(&(f64, f64)) -> f64| {
        let pooled = sorted(&a.iter().chain(b).map(sel).collect::<Vec<_>>());
        (1..grid)
            .map(|k| pooled[k * pooled.len() / grid])
            .collect::<Vec<f64>>()
    };
    let cx = cuts(|p| p.0);
    let cy = cuts(|p| p.1);
    let bin = |cuts: &[f64], v: f64| cuts.partition_point(|&c| c < v);
    let hist = |pts: &[(f64, f64)]| {
        let mut h = vec![vec![0.0f64; grid]; grid];
        for &(x, y) in pts {
            h[bin(&cx, x)][bin(&cy, y)] += 1.0 / pts.len() as f64;
        }
        // lower-left cumulative sums
        for i in 0..grid {
            for j in 0..grid {
                let mut v = h[i][j];
                if i > 0 {
                    v += h[i - 1][j];
                }
                if j > 0 {
                    v += h[i][j - 1];
                }
                if i > 0 && j > 0 {
                    v -= h[i - 1][j - 1];
                }
                h[i][j] = v;
            }
        }
        h
    };
    let ha = hist(a);
    let hb = hist(b);
    let last = grid - 1;
    let mut d: f64 = 0.0;
    for i in 0..grid {
        for j in 0..grid {
            let quad = |h: &Vec<Vec<f64>>| {
                let ll = h[i][j];
                let lx = h[i][last];
                let ly = h[last][j];
                [ll, lx - ll, ly - ll, 1.0 - lx - ly + ll]
            };
            let (qa, qb) = (quad(&ha), quad(&hb));
            for k in 0..4 {
                d = d.max((qa[k] - qb[k]).abs());
            }
        }
    }
    d
}
