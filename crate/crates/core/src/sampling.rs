//! Random polynomials: uniform on the unit sphere 𝒮 of ℰ, Gaussian on ℰ, and
//! general radial laws, with reproducible per-trial streams.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::closedform::{normalized_sigma, RadialDensity};
use crate::error::{domain, Error, Result};
use crate::manifold::{EigenspaceSpec, Point};
use crate::quad::integrate;

/// Identifies the random stream of one trial.
///
/// The stream is ChaCha20 keyed by the master seed with the trial index as
/// stream id; successive draws within a trial advance the block counter, so
/// (master_seed, trial_index, draw_index) fixes every number independently
/// of how trials are scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedPolicy {
    pub master_seed: u64,
    pub trial_index: u64,
}

impl SeedPolicy {
    pub fn new(master_seed: u64, trial_index: u64) -> Self {
        Self { master_seed, trial_index }
    }

    pub fn rng(&self) -> ChaCha20Rng {
        let mut key = [0u8; 32];
        let mut state = self.master_seed;
        for chunk in key.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        let mut rng = ChaCha20Rng::from_seed(key);
        rng.set_stream(self.trial_index);
        rng
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A polynomial u = Σ coeffs_i e_i in the orthonormal basis of its spec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolynomialSample {
    pub coeffs: Vec<f64>,
    pub norm: f64,
}

impl PolynomialSample {
    pub fn new(coeffs: Vec<f64>) -> Self {
        let norm = coeffs.iter().map(|x| x * x).sum::<f64>().sqrt();
        Self { coeffs, norm }
    }

    pub fn evaluate(&self, spec: &EigenspaceSpec, p: &Point) -> f64 {
        spec.evaluator().value(&self.coeffs, p)
    }

    /// u = ι(q)/c, the unit polynomial peaking at q with u(q) = c.
    pub fn coherent_state(spec: &EigenspaceSpec, q: &Point) -> Self {
        let c = spec.c();
        Self::new(spec.eval_basis(q).into_iter().map(|e| e / c).collect())
    }

    pub fn scaled(&self, r: f64) -> Self {
        Self::new(self.coeffs.iter().map(|x| r * x).collect())
    }
}

fn gaussian_vector<R: RngCore>(dim: usize, rng: &mut R) -> Vec<f64> {
    (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

fn unit_vector<R: RngCore>(dim: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let g = gaussian_vector(dim, rng);
        let n = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        // |g| this small has probability ~0; redraw keeps the law exact
        if n > 1e-150 {
            return g.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Uniform draw from 𝒮: g/|g| with g standard Gaussian.
pub fn sample_uniform_sphere(spec: &EigenspaceSpec, seed: SeedPolicy) -> PolynomialSample {
    PolynomialSample::new(unit_vector(spec.dim(), &mut seed.rng()))
}

/// Gaussian law with density ∝ e^{-|x|²/σ²}: coordinates N(0, σ²/2).
pub fn sample_gaussian(spec: &EigenspaceSpec, sigma: f64, seed: SeedPolicy) -> Result<PolynomialSample> {
    if !(sigma > 0.0) {
        return domain(format!("sigma {sigma} must be positive"));
    }
    let sd = sigma / 2f64.sqrt();
    let g = gaussian_vector(spec.dim(), &mut seed.rng());
    Ok(PolynomialSample::new(g.into_iter().map(|x| sd * x).collect()))
}

/// Radial law α(|x|)/(a_d ϖ_d); builds the radius table on every call, so
/// prefer [`Sampler`] for repeated draws.
pub fn sample_radial(spec: &EigenspaceSpec, density: &RadialDensity, seed: SeedPolicy) -> Result<PolynomialSample> {
    let sampler = RadiusSampler::new(density, spec.d())?;
    let mut rng = seed.rng();
    let dir = unit_vector(spec.dim(), &mut rng);
    let r = sampler.draw(&mut rng);
    Ok(PolynomialSample::new(dir.into_iter().map(|x| r * x).collect()))
}

/// Inverse-CDF sampler for radii with density r^d α(r)/a_d.
#[derive(Debug, Clone)]
pub struct RadiusSampler {
    density: RadialDensity,
    d: u32,
    knots: Vec<f64>,
    /// Normalized CDF at the knots.
    cdf: Vec<f64>,
    /// ∫ r^d α(r) dr over the table range.
    total: f64,
}

impl RadiusSampler {
    const INTERVALS: usize = 1024;

    pub fn new(density: &RadialDensity, d: u32) -> Result<Self> {
        density.validate()?;
        let (lo, hi) = density.support();
        let hi = if hi.is_finite() { hi } else { Self::effective_upper(density, d)? };
        let n = Self::INTERVALS;
        let knots: Vec<f64> = (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect();
        let mut cdf = vec![0.0; n + 1];
        for i in 0..n {
            let piece = integrate(|r| Self::weight(density, d, r), knots[i], knots[i + 1], 1e-12, 0.0)?;
            cdf[i + 1] = cdf[i] + piece.value;
        }
        let total = cdf[n];
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::Quadrature(format!("radial CDF table has total mass {total}")));
        }
        Ok(Self {
            density: density.clone(),
            d,
            knots,
            cdf: cdf.into_iter().map(|v| v / total).collect(),
            total,
        })
    }

    fn weight(density: &RadialDensity, d: u32, r: f64) -> f64 {
        if r <= 0.0 {
            return if d == 0 { density.alpha(0.0) } else { 0.0 };
        }
        (d as f64 * r.ln()).exp() * density.alpha(r)
    }

    /// Radius beyond which r^d α(r) carries negligible mass.
    fn effective_upper(density: &RadialDensity, d: u32) -> Result<f64> {
        let peak = (1..=4000).map(|i| Self::weight(density, d, i as f64 * 0.01)).fold(0.0, f64::max);
        let mut r = 1.0f64;
        while r < 1e8 {
            // weight and its slope both negligible relative to the peak
            if Self::weight(density, d, r) * r < 1e-18 * peak.max(f64::MIN_POSITIVE) && r > 1.0 {
                return Ok(r);
            }
            r *= 1.25;
        }
        Err(Error::Quadrature("radial law has too heavy a tail for the CDF table".into()))
    }

    /// Radius for the uniform variate v ∈ [0, 1).
    pub fn quantile(&self, v: f64) -> f64 {
        let k = self.cdf.partition_point(|c| *c <= v).clamp(1, self.cdf.len() - 1);
        let (mut a, mut b) = (self.knots[k - 1], self.knots[k]);
        let base = a;
        let target = (v - self.cdf[k - 1]) * self.total;
        let mass = |x: f64| {
            integrate(|r| Self::weight(&self.density, self.d, r), base, x, 1e-12, 0.0)
                .map(|i| i.value)
                .unwrap_or(f64::NAN)
        };
        while b - a > 1e-13 * b.max(1.0) {
            let mid = 0.5 * (a + b);
            if mass(mid) < target {
                a = mid;
            } else {
                b = mid;
            }
        }
        0.5 * (a + b)
    }

    pub fn draw<R: RngCore>(&self, rng: &mut R) -> f64 {
        self.quantile(rng.random::<f64>())
    }
}

/// Probability law on ℰ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum Law {
    UniformSphere,
    Gaussian { sigma: f64 },
    /// Gaussian with σ = √2/c, for which 𝖬 u(p)² = 1.
    GaussianNormalized,
    Radial { density: RadialDensity },
}

/// Prepared sampler for one spec and law.
#[derive(Debug, Clone)]
pub struct Sampler {
    dim: usize,
    kind: SamplerKind,
}

#[derive(Debug, Clone)]
enum SamplerKind {
    Uniform,
    Gaussian(f64),
    Radial(Box<RadiusSampler>),
}

impl Sampler {
    pub fn new(spec: &EigenspaceSpec, law: &Law) -> Result<Self> {
        let kind = match law {
            Law::UniformSphere => SamplerKind::Uniform,
            Law::Gaussian { sigma } if *sigma > 0.0 => SamplerKind::Gaussian(*sigma),
            Law::Gaussian { sigma } => return domain(format!("sigma {sigma} must be positive")),
            Law::GaussianNormalized => SamplerKind::Gaussian(normalized_sigma(spec)),
            Law::Radial { density } => SamplerKind::Radial(Box::new(RadiusSampler::new(density, spec.d())?)),
        };
        Ok(Self { dim: spec.dim(), kind })
    }

    /// Draws the next polynomial from `rng`.
    pub fn draw<R: RngCore>(&self, rng: &mut R) -> PolynomialSample {
        match &self.kind {
            SamplerKind::Uniform => PolynomialSample::new(unit_vector(self.dim, rng)),
            SamplerKind::Gaussian(sigma) => {
                let sd = sigma / 2f64.sqrt();
                PolynomialSample::new(gaussian_vector(self.dim, rng).into_iter().map(|x| sd * x).collect())
            }
            SamplerKind::Radial(r) => {
                let dir = unit_vector(self.dim, rng);
                let radius = r.draw(rng);
                PolynomialSample::new(dir.into_iter().map(|x| radius * x).collect())
            }
        }
    }
}
