//! Reproducible aggregation of per-trial values.

use serde::{Deserialize, Serialize};

/// Count, mean and centred second moment, merged with Chan's update.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub n: usize,
    pub mean: f64,
    pub m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(a: Moments, b: Moments) -> Moments {
        if a.n == 0 {
            return b;
        }
        if b.n == 0 {
            return a;
        }
        let n = a.n + b.n;
        let delta = b.mean - a.mean;
        let fb = b.n as f64 / n as f64;
        Moments {
            n,
            mean: a.mean + delta * fb,
            m2: a.m2 + b.m2 + delta * delta * a.n as f64 * fb,
        }
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn std_dev(&self) -> f64 {
        self.variance().sqrt()
    }

    /// sample standard deviation / √N.
    pub fn stderr(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.std_dev() / (self.n as f64).sqrt()
        }
    }
}

const LEAF: usize = 16;

/// Moments of the finite entries of `xs` by a pairwise tree whose shape
/// depends only on `xs.len()`, so the result is the same however the
/// values were computed.
pub fn pairwise_moments(xs: &[Option<f64>]) -> Moments {
    if xs.len() <= LEAF {
        let mut m = Moments::default();
        for x in xs.iter().flatten() {
            m.push(*x);
        }
        return m;
    }
    let (a, b) = xs.split_at(xs.len() / 2);
    Moments::merge(pairwise_moments(a), pairwise_moments(b))
}
