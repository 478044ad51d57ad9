//! Streaming moments, ratio estimators and distribution distances.
//!
//! Accumulators are commutative monoids so that replica shards can be merged
//! in any order.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::uniform::UniformSource;

/// Two-sided standard-normal critical value for confidence `level`.
pub fn normal_critical(level: f64) -> f64 {
    assert!(level > 0.0 && level < 1.0, "confidence level {level} not in (0, 1)");
    Normal::standard().inverse_cdf(0.5 + level / 2.0)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Moments {
    pub n: u64,
    pub sum: f64,
    pub sum_sq: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    pub fn merge(mut self, other: Self) -> Self {
        self.n += other.n;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
        self
    }

    pub fn mean(&self) -> f64 {
        self.sum / self.n as f64
    }

    /// Unbiased sample variance; zero for fewer than two samples.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let n = self.n as f64;
        ((self.sum_sq - self.sum * self.sum / n) / (n - 1.0)).max(0.0)
    }

    /// Standard error of the mean.
    pub fn std_error(&self) -> f64 {
        if self.n == 0 {
            return f64::NAN;
        }
        (self.variance() / self.n as f64).sqrt()
    }
}

impl FromIterator<f64> for Moments {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut m = Moments::default();
        for x in iter {
            m.push(x);
        }
        m
    }
}

/// Pairs `(x, y)` for the ratio `mean(y) / mean(x)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct RatioMoments {
    pub n: u64,
    pub sx: f64,
    pub sy: f64,
    pub sxx: f64,
    pub syy: f64,
    pub sxy: f64,
}

impl RatioMoments {
    pub fn push(&mut self, x: f64, y: f64) {
        self.n += 1;
        self.sx += x;
        self.sy += y;
        self.sxx += x * x;
        self.syy += y * y;
        self.sxy += x * y;
    }

    pub fn merge(mut self, o: Self) -> Self {
        self.n += o.n;
        self.sx += o.sx;
        self.sy += o.sy;
        self.sxx += o.sxx;
        self.syy += o.syy;
        self.sxy += o.sxy;
        self
    }

    pub fn ratio(&self) -> f64 {
        self.sy / self.sx
    }

    /// Delta-method standard error of the ratio of means.
    pub fn ratio_std_error(&self) -> f64 {
        if self.n < 2 {
            return f64::NAN;
        }
        let n = self.n as f64;
        let (mx, my) = (self.sx / n, self.sy / n);
        let vx = (self.sxx - n * mx * mx) / (n - 1.0);
        let vy = (self.syy - n * my * my) / (n - 1.0);
        let cxy = (self.sxy - n * mx * my) / (n - 1.0);
        let r = my / mx;
        let var = (vy - 2.0 * r * cxy + r * r * vx) / (n * mx * mx);
        var.max(0.0).sqrt()
    }
}

/// Binomial proportion with its standard error.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Proportion {
    pub successes: u64,
    pub trials: u64,
}

impl Proportion {
    pub fn new(successes: u64, trials: u64) -> Self {
        Self { successes, trials }
    }

    pub fn record(&mut self, success: bool) {
        self.trials += 1;
        self.successes += u64::from(success);
    }

    pub fn merge(self, o: Self) -> Self {
        Self::new(self.successes + o.successes, self.trials + o.trials)
    }

    pub fn estimate(&self) -> f64 {
        self.successes as f64 / self.trials as f64
    }

    pub fn std_error(&self) -> f64 {
        let p = self.estimate();
        (p * (1.0 - p) / self.trials as f64).sqrt()
    }
}

/// Kolmogorov–Smirnov distance between a sample and a continuous CDF.
pub fn ks_distance(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            ((i + 1) as f64 / n - f).max(f - i as f64 / n)
        })
        .fold(0.0, f64::max)
}

/// Kolmogorov–Smirnov distance between a sample and a discrete law given as
/// `(value, probability)` atoms.
///
/// Both CDFs are right-continuous step functions, so the supremum is attained
/// at a point of the union of the two supports.
pub fn ks_distance_discrete(samples: &[f64], atoms: &[(f64, f64)]) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let mut atoms = atoms.to_vec();
    atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut points: Vec<f64> = xs.iter().copied().chain(atoms.iter().map(|a| a.0)).collect();
    points.sort_by(f64::total_cmp);
    points.dedup();
    let n = xs.len() as f64;
    let (mut i, mut a, mut model) = (0usize, 0usize, 0.0);
    let mut d: f64 = 0.0;
    for p in points {
        while i < xs.len() && xs[i] <= p {
            i += 1;
        }
        while a < atoms.len() && atoms[a].0 <= p {
            model += atoms[a].1;
            a += 1;
        }
        d = d.max((i as f64 / n - model).abs());
    }
    d
}

/// Percentile bootstrap interval for the mean of `values`.
pub fn bootstrap_mean_interval(values: &[f64], level: f64, resamples: usize, seed: u64) -> (f64, f64) {
    assert!(!values.is_empty());
    let n = values.len();
    let mut src = UniformSource::new(seed, u64::MAX);
    let mut means: Vec<f64> = (0..resamples)
        .map(|_| {
            let s: f64 = (0..n)
                .map(|_| values[((src.next_uniform() * n as f64) as usize).min(n - 1)])
                .sum();
            s / n as f64
        })
        .collect();
    means.sort_by(f64::total_cmp);
    let lo_q = (1.0 - level) / 2.0;
    let pick = |q: f64| {
        let idx = (q * (resamples - 1) as f64).round() as usize;
        means[idx.min(resamples - 1)]
    };
    (pick(lo_q), pick(1.0 - lo_q))
}
