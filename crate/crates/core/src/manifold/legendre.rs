//! Associated Legendre functions normalized for real spherical harmonics
//! that are orthonormal with respect to the probability measure on S².
//!
//! With P̄_l^m = √((2l+1)(l-m)!/(l+m)!) P_l^m (no Condon–Shortley phase) the
//! functions P̄_l^0, √2 P̄_l^m cos mφ and √2 P̄_l^m sin mφ have unit mean
//! square on the sphere.

/// Table of P̄_l^m(cos θ), dP̄_l^m/dθ and, for m ≥ 1, P̄_l^m / sin θ.
#[derive(Debug, Clone)]
pub struct LegendreTable {
    lmax: usize,
    p: Vec<f64>,
    dp: Vec<f64>,
    q: Vec<f64>,
}

#[inline]
fn idx(l: usize, m: usize) -> usize {
    l * (l + 1) / 2 + m
}

impl LegendreTable {
    pub fn new(lmax: usize) -> Self {
        let n = idx(lmax + 1, 0) + 1;
        Self {
            lmax,
            p: vec![0.0; n],
            dp: vec![0.0; n],
            q: vec![0.0; n],
        }
    }

    /// Fills the table for the polar angle with cos θ = `x`, sin θ = `s ≥ 0`.
    pub fn fill(&mut self, x: f64, s: f64) {
        let lmax = self.lmax;
        // m = 0 column by the three-term recurrence
        self.p[idx(0, 0)] = 1.0;
        if lmax >= 1 {
            self.p[idx(1, 0)] = 3f64.sqrt() * x;
        }
        for l in 2..=lmax {
            let lf = l as f64;
            let a = ((2.0 * lf + 1.0) * (2.0 * lf - 1.0)).sqrt() / lf;
            let b = ((2.0 * lf + 1.0) / (2.0 * lf - 3.0)).sqrt() * (lf - 1.0) / lf;
            self.p[idx(l, 0)] = a * x * self.p[idx(l - 1, 0)] - b * self.p[idx(l - 2, 0)];
        }
        // m ≥ 1: recur on Q = P̄/sin θ, which is regular at the poles
        let mut diag_prev = 1.0; // P̄_{m-1}^{m-1}
        for m in 1..=lmax {
            let mf = m as f64;
            let qmm = ((2.0 * mf + 1.0) / (2.0 * mf)).sqrt() * diag_prev;
            self.q[idx(m, m)] = qmm;
            if m < lmax {
                self.q[idx(m + 1, m)] = (2.0 * mf + 3.0).sqrt() * x * qmm;
            }
            for l in (m + 2)..=lmax {
                let lf = l as f64;
                let a = ((2.0 * lf + 1.0) * (2.0 * lf - 1.0) / ((lf - mf) * (lf + mf))).sqrt();
                let b = ((2.0 * lf + 1.0) * (lf + mf - 1.0) * (lf - mf - 1.0)
                    / ((2.0 * lf - 3.0) * (lf - mf) * (lf + mf)))
                    .sqrt();
                self.q[idx(l, m)] = a * x * self.q[idx(l - 1, m)] - b * self.q[idx(l - 2, m)];
            }
            for l in m..=lmax {
                self.p[idx(l, m)] = s * self.q[idx(l, m)];
            }
            diag_prev = self.p[idx(m, m)];
        }
        // θ-derivatives from neighbouring orders
        for l in 0..=lmax {
            let lf = l as f64;
            for m in 0..=l {
                let mf = m as f64;
                let up = if m < l { self.p[idx(l, m + 1)] } else { 0.0 };
                self.dp[idx(l, m)] = if m == 0 {
                    -(lf * (lf + 1.0)).sqrt() * up
                } else {
                    let down = self.p[idx(l, m - 1)];
                    0.5 * (((lf + mf) * (lf - mf + 1.0)).sqrt() * down - ((lf + mf + 1.0) * (lf - mf)).sqrt() * up)
                };
            }
        }
    }

    #[inline]
    pub fn p(&self, l: usize, m: usize) -> f64 {
        self.p[idx(l, m)]
    }

    #[inline]
    pub fn dp(&self, l: usize, m: usize) -> f64 {
        self.dp[idx(l, m)]
    }

    /// P̄_l^m / sin θ for m ≥ 1.
    #[inline]
    pub fn q(&self, l: usize, m: usize) -> f64 {
        self.q[idx(l, m)]
    }
}
