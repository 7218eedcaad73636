//! Exact expectations and bounds for metric quantities of random
//! polynomials u ∈ ℰ.
//!
//! Levels are always given in scaled form: `t_scaled = t` means the level
//! value c·t, so that t ∈ [-1, 1] covers every non-empty level set of a unit
//! polynomial. Use [`scaled_level`] to convert an absolute level.

use std::f64::consts::{E, PI};

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::manifold::{EigenspaceSpec, ManifoldModel};
use crate::quad::{integrate, integrate_to_infinity};
use crate::specfun::{cap_volume, erfc_unscaled, ln_gamma, sphere_volume, sphere_volume_ratio};

const REL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormulaId {
    LevelMeasure,
    ExcursionVolume,
    IntersectionMeasure,
    IntersectionExcursion,
    Leray,
    IntegralFunctional,
    Moment,
    LpUniversalBound,
    LpAsymptoticBound,
    SupLogBound,
    SupTrivialBound,
    RadialLevel,
    RadialExcursion,
    RadialLeray,
    GaussianLevel,
    GaussianExcursion,
    GaussianLeray,
    LimitLevel,
    LimitExcursion,
    LimitLeray,
    LimitFunctional,
    LimitMoment,
}

/// Symbol values a closed form was computed from. List-valued entries have
/// one element per factor of a product formula.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Inputs {
    pub m: u32,
    pub varpi: f64,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub d: Vec<u32>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub c: Vec<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub s: Vec<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub t: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub a: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub epsilon: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosedForm {
    pub formula: FormulaId,
    pub value: f64,
    pub inputs: Inputs,
}

impl ClosedForm {
    fn build(formula: FormulaId, inputs: Inputs) -> Self {
        let value = evaluate(formula, &inputs).expect("formula is determined by its inputs");
        Self { formula, value, inputs }
    }

    /// Recomputes the value from the recorded inputs. `None` for formulas
    /// that also depend on a function argument (functionals, radial laws).
    pub fn recompute(&self) -> Option<f64> {
        evaluate(self.formula, &self.inputs)
    }
}

/// Formulas fully determined by their symbol values.
fn evaluate(formula: FormulaId, x: &Inputs) -> Option<f64> {
    use FormulaId::*;
    let m = x.m;
    let first = |v: &[f64]| v.first().copied();
    Some(match formula {
        LevelMeasure | IntersectionMeasure => {
            let l = x.d.len() as u32;
            let mut v = sphere_volume(m - l) / sphere_volume(m) * x.varpi;
            for i in 0..x.d.len() {
                v *= x.s[i] * level_weight(x.d[i], x.t[i]);
            }
            v
        }
        ExcursionVolume | IntersectionExcursion => {
            let mut v = x.varpi;
            for i in 0..x.d.len() {
                v *= cap_volume(x.d[i], x.t[i]) / sphere_volume(x.d[i]);
            }
            v
        }
        Leray => {
            let (d, c, t) = (x.d[0], x.c[0], x.t[0]);
            if t.abs() > 1.0 {
                0.0
            } else {
                let w = if d == 2 { 1.0 } else { (1.0 - t * t).powf(0.5 * d as f64 - 1.0) };
                x.varpi * sphere_volume_ratio(d) / c * w
            }
        }
        Moment => moment_formula(x.a?, x.d[0]).ok()?,
        LpUniversalBound => ((x.a? + 1.0) / E).sqrt(),
        LpAsymptoticBound => {
            let a = x.a?;
            (2f64.ln() / 2.0 - PI.ln() / (2.0 * a) + ln_gamma(0.5 * (a + 1.0)) / a).exp()
        }
        SupLogBound => {
            let kappa = x.c[0] * x.s[0];
            ((m as f64 - 0.5).exp() + x.epsilon?) * kappa.ln().sqrt()
        }
        SupTrivialBound => x.c[0],
        GaussianLevel => {
            let (t, sigma) = (x.t[0], x.sigma?);
            x.varpi * sphere_volume_ratio(m) * x.s[0] * (-(t / sigma).powi(2)).exp()
        }
        GaussianExcursion => x.varpi / PI.sqrt() * erfc_unscaled(x.t[0] / x.sigma?),
        GaussianLeray => {
            let (t, sigma) = (x.t[0], x.sigma?);
            x.varpi / (x.c[0] * sigma * PI.sqrt()) * (-(t / sigma).powi(2)).exp()
        }
        LimitLevel => x.varpi * sphere_volume_ratio(m) * (-0.5 * first(&x.t)?.powi(2)).exp(),
        LimitExcursion => x.varpi / PI.sqrt() * erfc_unscaled(first(&x.t)? / 2f64.sqrt()),
        LimitLeray => x.varpi / (2.0 * PI).sqrt() * (-0.5 * first(&x.t)?.powi(2)).exp(),
        LimitMoment => moment_limit(x.a?),
        IntegralFunctional | RadialLevel | RadialExcursion | RadialLeray | LimitFunctional => return None,
    })
}

/// (1-t²)^{(d-1)/2} with exact 1 for d = 1.
fn level_weight(d: u32, t: f64) -> f64 {
    if d == 1 {
        1.0
    } else {
        (1.0 - t * t).max(0.0).powf(0.5 * (d as f64 - 1.0))
    }
}

fn check_scaled(t: f64) -> Result<()> {
    if t.is_nan() || t.abs() > 1.0 {
        return domain(format!("scaled level {t} outside [-1, 1]"));
    }
    Ok(())
}

fn spec_inputs(spec: &EigenspaceSpec, t: f64) -> Inputs {
    Inputs {
        m: spec.manifold.dim,
        varpi: spec.manifold.total_volume,
        d: vec![spec.d()],
        c: vec![spec.c()],
        s: vec![spec.s()],
        t: vec![t],
        ..Default::default()
    }
}

/// Converts an absolute level to the scaled level t with value c·t.
pub fn scaled_level(spec: &EigenspaceSpec, level: f64) -> f64 {
    level / spec.c()
}

/// 𝖬 ℎ^{m-1}(L^{ct}_u) = ϖ (ϖ_{m-1}/ϖ_m) s (1-t²)^{(d-1)/2}.
///
/// On the circle this is the mean number of solutions of u = ct.
pub fn expected_level_measure(spec: &EigenspaceSpec, t_scaled: f64) -> Result<ClosedForm> {
    expected_intersection_measure(std::slice::from_ref(spec), &[t_scaled]).map(|mut cf| {
        cf.formula = FormulaId::LevelMeasure;
        cf
    })
}

/// 𝖬 ℎ^m(U^{ct}_u) = ϖ κ_d(t)/ϖ_d; levels outside [-1,1] clamp.
pub fn expected_excursion_volume(spec: &EigenspaceSpec, t_scaled: f64) -> ClosedForm {
    ClosedForm::build(FormulaId::ExcursionVolume, spec_inputs(spec, t_scaled))
}

/// Mean ℎ^{m-l} of the common level set of l independent uniform
/// polynomials, u_i ∈ 𝒮(ℰ_i), taken with X = M.
pub fn expected_intersection_measure(specs: &[EigenspaceSpec], t_scaled: &[f64]) -> Result<ClosedForm> {
    let (m, varpi) = common_manifold(specs, t_scaled)?;
    if specs.len() as u32 > m {
        return domain(format!("{} level sets cannot meet generically in dimension {m}", specs.len()));
    }
    for &t in t_scaled {
        check_scaled(t)?;
    }
    let inputs = Inputs {
        m,
        varpi,
        d: specs.iter().map(|s| s.d()).collect(),
        c: specs.iter().map(|s| s.c()).collect(),
        s: specs.iter().map(|s| s.s()).collect(),
        t: t_scaled.to_vec(),
        ..Default::default()
    };
    Ok(ClosedForm::build(FormulaId::IntersectionMeasure, inputs))
}

/// 𝖬 ℎ^m(U^{c_1t_1}_{u_1} ∩ … ∩ U^{c_lt_l}_{u_l}) = ϖ Π κ_{d_i}(t_i)/ϖ_{d_i}.
pub fn expected_intersection_excursion(specs: &[EigenspaceSpec], t_scaled: &[f64]) -> Result<ClosedForm> {
    let (m, varpi) = common_manifold(specs, t_scaled)?;
    let inputs = Inputs {
        m,
        varpi,
        d: specs.iter().map(|s| s.d()).collect(),
        c: specs.iter().map(|s| s.c()).collect(),
        s: specs.iter().map(|s| s.s()).collect(),
        t: t_scaled.to_vec(),
        ..Default::default()
    };
    Ok(ClosedForm::build(FormulaId::IntersectionExcursion, inputs))
}

fn common_manifold(specs: &[EigenspaceSpec], t_scaled: &[f64]) -> Result<(u32, f64)> {
    let Some(first) = specs.first() else {
        return domain("no eigenspaces given");
    };
    if specs.len() != t_scaled.len() {
        return domain(format!("{} eigenspaces but {} levels", specs.len(), t_scaled.len()));
    }
    if specs.iter().any(|s| s.manifold.kind != first.manifold.kind) {
        return domain("eigenspaces live on different manifolds");
    }
    Ok((first.manifold.dim, first.manifold.total_volume))
}

/// Mean Leray measure 𝖬 ℓ(L^{ct}_u) = ϖ ϖ_{d-1}/(c ϖ_d) (1-t²)^{d/2-1}, as a
/// density in the unscaled level.
///
/// At |t| = 1 the value is +∞ for d = 1 (the level set is a critical
/// point); for |t| > 1 the level set is empty and the value is 0.
pub fn expected_leray(spec: &EigenspaceSpec, t_scaled: f64) -> Result<ClosedForm> {
    if t_scaled.is_nan() {
        return domain("scaled level is NaN");
    }
    Ok(ClosedForm::build(FormulaId::Leray, spec_inputs(spec, t_scaled)))
}

/// 𝖬 ∫_M f(u(p)) dp for a function f on [-c, c], taken with the
/// probability measure dp (so f ≡ 1 gives 1 and f(t) = t² gives 1):
///
/// (ϖ_{d-1}/ϖ_d) ∫_{-1}^{1} f(cτ) (1-τ²)^{d/2-1} dτ.
pub fn expected_integral_functional<F: FnMut(f64) -> f64>(spec: &EigenspaceSpec, f: F) -> Result<ClosedForm> {
    let value = functional_integral(spec.d(), spec.c(), f)?;
    Ok(ClosedForm {
        formula: FormulaId::IntegralFunctional,
        value,
        inputs: Inputs {
            m: spec.manifold.dim,
            varpi: spec.manifold.total_volume,
            d: vec![spec.d()],
            c: vec![spec.c()],
            s: vec![spec.s()],
            ..Default::default()
        },
    })
}

/// The functional integral for given d and c.
///
/// Each half of [-1, 1] is mapped through τ = ±(1-v²), which turns the
/// (1-τ²)^{d/2-1} endpoint singularity at d = 1 into a smooth factor.
pub fn functional_integral<F: FnMut(f64) -> f64>(d: u32, c: f64, mut f: F) -> Result<f64> {
    let h = 0.5 * d as f64 - 1.0;
    let mut total = 0.0;
    for sign in [1.0, -1.0] {
        let r = integrate(
            |v| {
                if v <= 0.0 {
                    return if d == 1 { 2.0 * 2f64.powf(h) * f(sign * c) } else { 0.0 };
                }
                let tau = 1.0 - v * v;
                // 2v·(v²(2-v²))^h
                let w = 2.0 * v.powi(d as i32 - 1) * (2.0 - v * v).powf(h);
                w * f(sign * c * tau)
            },
            0.0,
            1.0,
            REL_TOL,
            1e-300,
        )?;
        total += r.value;
    }
    Ok(sphere_volume_ratio(d) * total)
}

/// E(a, d) = 𝖬 ∫_M |u|^a dp
/// = Γ((a+1)/2) Γ((d+1)/2) (d+1)^{a/2} / (√π Γ((a+d+1)/2)).
pub fn moment_formula(a: f64, d: u32) -> Result<f64> {
    if !(a > -1.0) {
        return domain(format!("moment exponent {a} must exceed -1"));
    }
    if d == 0 {
        return domain("d must be at least 1");
    }
    let df = d as f64;
    let ln = ln_gamma(0.5 * (a + 1.0)) + ln_gamma(0.5 * (df + 1.0)) + 0.5 * a * (df + 1.0).ln()
        - 0.5 * PI.ln()
        - ln_gamma(0.5 * (a + df + 1.0));
    Ok(ln.exp())
}

/// E(a, d) for the eigenspace, as a closed-form record.
pub fn expected_moment(spec: &EigenspaceSpec, a: f64) -> Result<ClosedForm> {
    moment_formula(a, spec.d())?;
    let mut inputs = spec_inputs(spec, 0.0);
    inputs.t.clear();
    inputs.a = Some(a);
    Ok(ClosedForm::build(FormulaId::Moment, inputs))
}

/// The universal bound √((a+1)/e) on 𝖬‖u‖_a, as a closed-form record.
pub fn lp_universal_bound(a: f64) -> Result<ClosedForm> {
    if !(a >= 1.0) {
        return domain(format!("norm exponent {a} must be at least 1"));
    }
    let inputs = Inputs {
        a: Some(a),
        ..Default::default()
    };
    Ok(ClosedForm::build(FormulaId::LpUniversalBound, inputs))
}

/// The pointwise bound ‖u‖_∞ ≤ c, as a closed-form record.
pub fn sup_trivial_bound(spec: &EigenspaceSpec) -> ClosedForm {
    let mut inputs = spec_inputs(spec, 0.0);
    inputs.t.clear();
    ClosedForm::build(FormulaId::SupTrivialBound, inputs)
}

/// lim_{d→∞} E(a, d) = 2^{a/2} Γ((a+1)/2)/√π.
pub fn moment_limit(a: f64) -> f64 {
    (0.5 * a * 2f64.ln() + ln_gamma(0.5 * (a + 1.0)) - 0.5 * PI.ln()).exp()
}

/// Upper bounds for 𝖬‖u‖_a.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpBounds {
    pub a: f64,
    /// √((a+1)/e); proven for every ℰ when a ≥ 2.
    pub universal: f64,
    /// √2 π^{-1/(2a)} Γ((a+1)/2)^{1/a}, the limsup as d → ∞.
    pub asymptotic: f64,
    /// (2/e)^{1/(2a)} √((a+1)/e), a lower bound for `asymptotic`.
    pub asymptotic_lower: f64,
    /// Whether the universal bound is a theorem for this a.
    pub proven: bool,
}

pub fn lp_mean_bound(a: f64) -> Result<LpBounds> {
    if !(a >= 1.0) {
        return domain(format!("norm exponent {a} must be at least 1"));
    }
    let inputs = Inputs {
        a: Some(a),
        ..Default::default()
    };
    let universal = ClosedForm::build(FormulaId::LpUniversalBound, inputs.clone()).value;
    let asymptotic = ClosedForm::build(FormulaId::LpAsymptoticBound, inputs).value;
    let asymptotic_lower = (2.0 / E).powf(0.5 / a) * universal;
    if !(asymptotic_lower < asymptotic && asymptotic < universal) {
        return Err(Error::Estimator(format!(
            "bound chain violated at a={a}: {asymptotic_lower} < {asymptotic} < {universal}"
        )));
    }
    Ok(LpBounds {
        a,
        universal,
        asymptotic,
        asymptotic_lower,
        proven: a >= 2.0,
    })
}

/// Bounds for 𝖬‖u‖_∞.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupBound {
    pub kappa: f64,
    pub epsilon: f64,
    /// (e^{m-1/2} + ε)√(ln κ); `None` when κ ≤ 1.
    pub log_bound: Option<f64>,
    /// c = √(dim ℰ), attained by u = ι(q).
    pub trivial: f64,
    /// The log bound says nothing beyond the trivial one.
    pub uninformative: bool,
}

/// The logarithmic sup-norm estimate next to the sharp pointwise bound c.
/// The log form holds only for sufficiently large κ, so it is a diagnostic
/// rather than a certified bound.
pub fn sup_mean_bound(spec: &EigenspaceSpec, epsilon: f64) -> Result<SupBound> {
    if !(epsilon > 0.0) {
        return domain(format!("epsilon {epsilon} must be positive"));
    }
    let kappa = spec.kappa();
    let mut inputs = spec_inputs(spec, 0.0);
    inputs.t.clear();
    inputs.epsilon = Some(epsilon);
    let log_bound = (kappa > 1.0).then(|| ClosedForm::build(FormulaId::SupLogBound, inputs.clone()).value);
    let trivial = ClosedForm::build(FormulaId::SupTrivialBound, inputs).value;
    Ok(SupBound {
        kappa,
        epsilon,
        log_bound,
        trivial,
        uninformative: log_bound.is_none_or(|b| b >= trivial),
    })
}

/// Radial profile α of a rotation-invariant law on ℰ with density
/// α(|x|)/(a_d ϖ_d).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RadialDensity {
    /// α(r) = e^{-r²/σ²}.
    Gaussian { sigma: f64 },
    /// α = 1 on [lo, hi].
    Indicator { lo: f64, hi: f64 },
    /// Smooth bump exp(-1/(1-((r-center)/width)²)) on |r - center| < width.
    Bump { center: f64, width: f64 },
    /// Piecewise-linear profile through (r_i, α_i), zero outside.
    Table { r: Vec<f64>, alpha: Vec<f64> },
}

impl RadialDensity {
    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            RadialDensity::Gaussian { sigma } => *sigma > 0.0,
            RadialDensity::Indicator { lo, hi } => *lo >= 0.0 && hi > lo,
            RadialDensity::Bump { center, width } => *width > 0.0 && center - width >= 0.0,
            RadialDensity::Table { r, alpha } => {
                r.len() >= 2
                    && r.len() == alpha.len()
                    && r[0] >= 0.0
                    && r.windows(2).all(|w| w[1] > w[0])
                    && alpha.iter().all(|a| *a >= 0.0)
                    && alpha.iter().any(|a| *a > 0.0)
            }
        };
        if ok {
            Ok(())
        } else {
            domain(format!("invalid radial density {self:?}"))
        }
    }

    /// α(r).
    pub fn alpha(&self, r: f64) -> f64 {
        match self {
            RadialDensity::Gaussian { sigma } => (-(r / sigma).powi(2)).exp(),
            RadialDensity::Indicator { lo, hi } => {
                if r >= *lo && r <= *hi {
                    1.0
                } else {
                    0.0
                }
            }
            RadialDensity::Bump { center, width } => {
                let z = (r - center) / width;
                if z.abs() < 1.0 {
                    (-1.0 / (1.0 - z * z)).exp()
                } else {
                    0.0
                }
            }
            RadialDensity::Table { r: rs, alpha } => {
                if r < rs[0] || r > rs[rs.len() - 1] {
                    return 0.0;
                }
                let k = rs.partition_point(|x| *x <= r).clamp(1, rs.len() - 1);
                let f = (r - rs[k - 1]) / (rs[k] - rs[k - 1]);
                alpha[k - 1] + f * (alpha[k] - alpha[k - 1])
            }
        }
    }

    /// Interval outside which α vanishes.
    pub fn support(&self) -> (f64, f64) {
        match self {
            RadialDensity::Gaussian { .. } => (0.0, f64::INFINITY),
            RadialDensity::Indicator { lo, hi } => (*lo, *hi),
            RadialDensity::Bump { center, width } => (center - width, center + width),
            RadialDensity::Table { r, .. } => (r[0], r[r.len() - 1]),
        }
    }

    /// Points where α is not smooth, used as quadrature breakpoints.
    fn breakpoints(&self) -> Vec<f64> {
        match self {
            RadialDensity::Table { r, .. } => r.clone(),
            _ => {
                let (lo, hi) = self.support();
                [lo, hi].into_iter().filter(|x| x.is_finite()).collect()
            }
        }
    }

    /// ∫_lo^hi g(r) dr over the part of [lo, hi] inside the support,
    /// split at breakpoints.
    fn integrate_over<G: FnMut(f64) -> f64>(&self, mut g: G, lo: f64, hi: f64) -> Result<f64> {
        let (slo, shi) = self.support();
        let lo = lo.max(slo);
        let hi = hi.min(shi);
        if !(hi > lo) {
            return Ok(0.0);
        }
        let mut cuts: Vec<f64> = self.breakpoints().into_iter().filter(|x| *x > lo && *x < hi).collect();
        cuts.insert(0, lo);
        let mut total = 0.0;
        if hi.is_finite() {
            cuts.push(hi);
            for w in cuts.windows(2) {
                total += integrate(&mut g, w[0], w[1], REL_TOL, 1e-300)?.value;
            }
        } else {
            for w in cuts.windows(2) {
                total += integrate(&mut g, w[0], w[1], REL_TOL, 1e-300)?.value;
            }
            let last = *cuts.last().expect("cuts are non-empty");
            total += integrate_to_infinity(&mut g, last, REL_TOL, 1e-300)?.value;
        }
        Ok(total)
    }

    /// a_k = ∫_0^∞ r^k α(r) dr.
    pub fn moment(&self, k: u32) -> Result<f64> {
        if let RadialDensity::Gaussian { sigma } = self {
            // σ^{k+1} Γ((k+1)/2)/2
            return Ok(0.5 * ((k as f64 + 1.0) * sigma.ln() + ln_gamma(0.5 * (k as f64 + 1.0))).exp());
        }
        self.integrate_over(|r| r.powi(k as i32) * self.alpha(r), 0.0, f64::INFINITY)
    }

    /// ∫_0^∞ τ^{d/2-1} α(√(τ+ξ²)) dτ, computed as ∫ 2v^{d-1} α(√(v²+ξ²)) dv.
    fn shell_integral(&self, d: u32, xi: f64) -> Result<f64> {
        let (lo, hi) = self.support();
        let vlo = (lo * lo - xi * xi).max(0.0).sqrt();
        let vhi = if hi.is_finite() { (hi * hi - xi * xi).max(0.0).sqrt() } else { f64::INFINITY };
        if !(vhi > vlo) {
            return Ok(0.0);
        }
        let mut g = |v: f64| 2.0 * v.powi(d as i32 - 1) * self.alpha((v * v + xi * xi).sqrt());
        let mut cuts: Vec<f64> = self
            .breakpoints()
            .into_iter()
            .filter(|r| *r > xi)
            .map(|r| (r * r - xi * xi).sqrt())
            .filter(|v| *v > vlo && *v < vhi)
            .collect();
        cuts.insert(0, vlo);
        let mut total = 0.0;
        if vhi.is_finite() {
            cuts.push(vhi);
        }
        for w in cuts.windows(2) {
            total += integrate(&mut g, w[0], w[1], REL_TOL, 1e-300)?.value;
        }
        if !vhi.is_finite() {
            total += integrate_to_infinity(&mut g, *cuts.last().expect("non-empty"), REL_TOL, 1e-300)?.value;
        }
        Ok(total)
    }
}

/// The three expectations under a non-uniform law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LawExpectations {
    pub level: ClosedForm,
    pub excursion: ClosedForm,
    pub leray: ClosedForm,
}

/// Level measure, excursion volume and Leray measure at level c·t under the
/// radial law α, by quadrature.
pub fn radial_expectations(spec: &EigenspaceSpec, density: &RadialDensity, t_scaled: f64) -> Result<LawExpectations> {
    density.validate()?;
    if !(t_scaled >= 0.0) {
        return domain(format!("radial expectations need t ≥ 0, got {t_scaled}"));
    }
    let t = t_scaled;
    let d = spec.d();
    let model = &spec.manifold;
    let m = model.dim;
    let varpi = model.total_volume;
    let a_d = density.moment(d)?;
    if !(a_d > 0.0 && a_d.is_finite()) {
        return Err(Error::Quadrature(format!("moment a_{d} = {a_d} is not a positive finite number")));
    }
    let h = 0.5 * (d as f64 - 1.0);
    let level_int = density.integrate_over(|r| (r * r - t * t).max(0.0).powf(h) * r * density.alpha(r), t, f64::INFINITY)?;
    let level = varpi * sphere_volume_ratio(m) * spec.s() / a_d * level_int;

    // order of integration swapped: the inner ξ-integral is a cap volume
    let excursion_int = density.integrate_over(
        |r| {
            if r <= 0.0 {
                return 0.0;
            }
            let ln_rd = d as f64 * r.ln();
            2.0 * (ln_rd.exp() * density.alpha(r)) * cap_volume(d, t / r) / sphere_volume(d - 1)
        },
        t,
        f64::INFINITY,
    )?;
    let pref = varpi * sphere_volume_ratio(d) / (2.0 * a_d);
    let excursion = pref * excursion_int;
    let leray = pref / spec.c() * density.shell_integral(d, t)?;

    let mut inputs = spec_inputs(spec, t);
    inputs.sigma = match density {
        RadialDensity::Gaussian { sigma } => Some(*sigma),
        _ => None,
    };
    let wrap = |formula, value| ClosedForm {
        formula,
        value,
        inputs: inputs.clone(),
    };
    Ok(LawExpectations {
        level: wrap(FormulaId::RadialLevel, level),
        excursion: wrap(FormulaId::RadialExcursion, excursion),
        leray: wrap(FormulaId::RadialLeray, leray),
    })
}

/// Expectations under the Gaussian law with density ∝ e^{-|x|²/σ²}.
pub fn gaussian_expectations(spec: &EigenspaceSpec, sigma: f64, t_scaled: f64) -> Result<LawExpectations> {
    if !(sigma > 0.0) {
        return domain(format!("sigma {sigma} must be positive"));
    }
    let mut inputs = spec_inputs(spec, t_scaled);
    inputs.sigma = Some(sigma);
    Ok(LawExpectations {
        level: ClosedForm::build(FormulaId::GaussianLevel, inputs.clone()),
        excursion: ClosedForm::build(FormulaId::GaussianExcursion, inputs.clone()),
        leray: ClosedForm::build(FormulaId::GaussianLeray, inputs),
    })
}

/// σ with σ·c = √2, which makes 𝖬 u(p)² = 1.
pub fn normalized_sigma(spec: &EigenspaceSpec) -> f64 {
    2f64.sqrt() / spec.c()
}

/// Limits of the uniform-sphere expectations as d → ∞, at the unscaled
/// level t.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticLimits {
    /// Level measure divided by s.
    pub level_per_s: ClosedForm,
    pub excursion: ClosedForm,
    pub leray: ClosedForm,
}

pub fn asymptotic_limits(t: f64, manifold: &ManifoldModel) -> AsymptoticLimits {
    let inputs = Inputs {
        m: manifold.dim,
        varpi: manifold.total_volume,
        t: vec![t],
        ..Default::default()
    };
    AsymptoticLimits {
        level_per_s: ClosedForm::build(FormulaId::LimitLevel, inputs.clone()),
        excursion: ClosedForm::build(FormulaId::LimitExcursion, inputs.clone()),
        leray: ClosedForm::build(FormulaId::LimitLeray, inputs),
    }
}

/// lim 𝖬 ∫_M f(u) dp = (2π)^{-1/2} ∫ f(t) e^{-t²/2} dt.
pub fn limit_functional<F: FnMut(f64) -> f64>(mut f: F) -> Result<f64> {
    let mut g = |t: f64| (f(t) + f(-t)) * (-0.5 * t * t).exp();
    Ok(integrate_to_infinity(&mut g, 0.0, REL_TOL, 1e-300)?.value / (2.0 * PI).sqrt())
}

/// The moment limit as a closed-form record.
pub fn limit_moment(a: f64) -> ClosedForm {
    ClosedForm::build(
        FormulaId::LimitMoment,
        Inputs {
            a: Some(a),
            ..Default::default()
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::{make_circle_space, make_sphere_space, make_torus_space, Block, EigenspaceSpec};
    use std::f64::consts::SQRT_2;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs().max(1e-300)
    }

    #[test]
    fn level_measure_examples() {
        for n in [1u32, 5, 20] {
            let spec = make_circle_space(&(1..=n).collect::<Vec<_>>()).unwrap();
            let want = 2.0 * ((1..=n).map(|k| (k * k) as f64).sum::<f64>() / n as f64).sqrt();
            assert!(close(expected_level_measure(&spec, 0.0).unwrap().value, want, 1e-14));
        }
        let v = expected_level_measure(&make_sphere_space(&[4]).unwrap(), 0.0).unwrap().value;
        assert!(close(v, 2.0 * PI * 10f64.sqrt(), 1e-14));
        let v = expected_level_measure(&make_torus_space(&[[1, 0]]).unwrap(), 0.0).unwrap().value;
        assert!(close(v, 2.0 * PI * PI / SQRT_2, 1e-14));
        let v = expected_level_measure(&make_sphere_space(&[2]).unwrap(), 1.0).unwrap().value;
        assert_eq!(v, 0.0);
        assert!(expected_level_measure(&make_sphere_space(&[2]).unwrap(), 1.5).is_err());
    }

    #[test]
    fn excursion_examples() {
        let spec = make_sphere_space(&[1]).unwrap();
        assert!(close(expected_excursion_volume(&spec, 0.0).value, 2.0 * PI, 1e-15));
        assert!(close(expected_excursion_volume(&spec, -1.0).value, 4.0 * PI, 1e-15));
        assert!(close(expected_excursion_volume(&spec, 0.5).value, PI, 1e-14));
        assert_eq!(expected_excursion_volume(&spec, 3.0).value, 0.0);
    }

    #[test]
    fn intersection_examples() {
        let t = make_torus_space(&[[1, 0]]).unwrap();
        let v = expected_intersection_measure(&[t.clone(), t.clone()], &[0.0, 0.0]).unwrap().value;
        assert!(close(v, PI, 1e-14));
        let s = make_sphere_space(&[1]).unwrap();
        let v = expected_intersection_measure(&[s.clone(), s.clone()], &[0.0, 0.0]).unwrap().value;
        assert!(close(v, 2.0, 1e-14));
        assert!(expected_intersection_measure(&[t.clone(), t.clone(), t.clone()], &[0.0; 3]).is_err());
        // l = 1 is the level measure, bit for bit
        for x in [-0.7, 0.0, 0.3] {
            assert_eq!(
                expected_intersection_measure(std::slice::from_ref(&t), &[x]).unwrap().value,
                expected_level_measure(&t, x).unwrap().value
            );
        }
        let e = expected_intersection_excursion(&[t.clone(), t.clone()], &[0.0, 0.0]).unwrap().value;
        assert!(close(e, PI * PI, 1e-14));
        let e = expected_intersection_excursion(&[t.clone(), t.clone(), t.clone()], &[-1.0; 3]).unwrap().value;
        assert!(close(e, 4.0 * PI * PI, 1e-14));
    }

    #[test]
    fn leray_examples() {
        let t = make_torus_space(&[[1, 0]]).unwrap();
        assert!(close(expected_leray(&t, 0.0).unwrap().value, 4.0 * PI, 1e-14));
        let s = make_sphere_space(&[1]).unwrap();
        assert!(close(expected_leray(&s, 0.0).unwrap().value, 2.0 * PI / 3f64.sqrt(), 1e-14));
        let c = make_circle_space(&[1]).unwrap();
        assert_eq!(expected_leray(&c, 1.0).unwrap().value, f64::INFINITY);
        assert_eq!(expected_leray(&t, 1.2).unwrap().value, 0.0);
        // large d: ϖ/√(2π)
        let big = make_circle_space(&(1..=2000).collect::<Vec<_>>()).unwrap();
        let v = expected_leray(&big, 0.0).unwrap().value;
        assert!(close(v, 2.0 * PI / (2.0 * PI).sqrt(), 1e-3));
    }

    #[test]
    fn leray_is_minus_derivative_of_excursion() {
        let specs = [
            make_sphere_space(&[1]).unwrap(),                 // d = 2
            make_torus_space(&[[1, 0]]).unwrap(),             // d = 3
            make_circle_space(&[1, 2, 3]).unwrap(),           // d = 5
            make_sphere_space(&[2, 3, 4]).unwrap(),           // d = 20
        ];
        for spec in &specs {
            let c = spec.c();
            let h = 1e-5;
            for i in -9..=9 {
                let t = i as f64 / 10.0;
                // below 0 difference the complement ϖ - V(t) = V(-t), which is
                // small there, to avoid cancellation against ϖ
                let v = |x: f64| expected_excursion_volume(spec, x).value;
                let fd = if t >= 0.0 {
                    (v(t - h / c) - v(t + h / c)) / (2.0 * h)
                } else {
                    (v(-t - h / c) - v(-t + h / c)) / (2.0 * h)
                };
                let want = expected_leray(spec, t).unwrap().value;
                assert!(close(fd, want, 1e-7), "d={} t={t}: {fd} vs {want}", spec.d());
            }
        }
    }

    #[test]
    fn functional_matches_moment_formula() {
        for d in [1u32, 2, 5, 20, 100] {
            let c = (d as f64 + 1.0).sqrt();
            for a in [0.5, 1.0, 3.0, 6.0] {
                let q = functional_integral(d, c, |t| t.abs().powf(a)).unwrap();
                let e = moment_formula(a, d).unwrap();
                assert!(close(q, e, 1e-10), "d={d} a={a}: {q} vs {e}");
            }
            assert!(close(functional_integral(d, c, |_| 1.0).unwrap(), 1.0, 1e-12));
            assert!(close(functional_integral(d, c, |t| t * t).unwrap(), 1.0, 1e-12));
        }
    }

    #[test]
    fn moment_examples_and_monotonicity() {
        assert!((moment_formula(1.0, 1).unwrap() - 2.0 * SQRT_2 / PI).abs() < 1e-14);
        assert!((moment_formula(2.0, 17).unwrap() - 1.0).abs() < 1e-14);
        assert!((moment_formula(0.0, 9).unwrap() - 1.0).abs() < 1e-14);
        assert!((moment_limit(1.0) - (2.0 / PI).sqrt()).abs() < 1e-15);
        assert!(moment_formula(-1.0, 3).is_err());
        let e3: Vec<f64> = (1..=200).map(|d| moment_formula(3.0, d).unwrap()).collect();
        assert!(e3.windows(2).all(|w| w[1] > w[0]));
        let e1: Vec<f64> = (1..=200).map(|d| moment_formula(1.0, d).unwrap()).collect();
        assert!(e1.windows(2).all(|w| w[1] < w[0]));
        for a in [1.0, 3.0, -0.5, 4.5] {
            assert!(close(moment_formula(a, 1_000_000).unwrap(), moment_limit(a), 1e-3));
        }
        // strict comparison with the limit
        for d in [1, 2, 7, 50] {
            assert!(moment_formula(3.0, d).unwrap() < moment_limit(3.0));
            assert!(moment_formula(-0.5, d).unwrap() < moment_limit(-0.5));
            assert!(moment_formula(1.0, d).unwrap() > moment_limit(1.0));
        }
    }

    #[test]
    fn lp_bounds() {
        let b = lp_mean_bound(2.0).unwrap();
        assert!((b.universal - (3.0 / E).sqrt()).abs() < 1e-15);
        let b = lp_mean_bound(4.0).unwrap();
        assert!((b.universal - 1.3562).abs() < 1e-4);
        for a in [1.0, 1.5, 2.0, 8.0, 30.0] {
            let b = lp_mean_bound(a).unwrap();
            assert!(b.asymptotic < b.universal && b.asymptotic_lower < b.asymptotic);
            assert!(close(b.asymptotic, moment_limit(a).powf(1.0 / a), 1e-13));
        }
        assert!(lp_mean_bound(0.5).is_err());
    }

    #[test]
    fn sup_bound_flags() {
        let spec = make_circle_space(&(1..=20).collect::<Vec<_>>()).unwrap();
        let b = sup_mean_bound(&spec, 0.1).unwrap();
        assert!(close(b.kappa, (40.0f64 * 143.5).sqrt(), 1e-13));
        let want = (0.5f64.exp() + 0.1) * b.kappa.ln().sqrt();
        assert!(close(b.log_bound.unwrap(), want, 1e-14));
        assert!(close(b.trivial, 40f64.sqrt(), 1e-15));
        // κ = √2·√(1/2) = 1 on the (1,0) torus... κ = 2·√(1/2) = √2 > 1
        let spec = make_torus_space(&[[1, 0]]).unwrap();
        let b = sup_mean_bound(&spec, 0.1).unwrap();
        assert!(b.uninformative);
        let small = EigenspaceSpec::from_blocks(
            ManifoldModel::circle(),
            vec![Block {
                lambda: 0.25,
                functions: vec![],
            }],
        );
        assert!(small.is_err());
    }

    #[test]
    fn gaussian_examples() {
        let t = make_torus_space(&[[1, 0]]).unwrap();
        let sigma = normalized_sigma(&t);
        let g = gaussian_expectations(&t, sigma, 0.0).unwrap();
        assert!(close(g.leray.value, 4.0 * PI * PI / (2.0 * PI).sqrt(), 1e-14));
        assert!(close(g.excursion.value, 2.0 * PI * PI, 1e-14));
        assert!(close(g.level.value, expected_level_measure(&t, 0.0).unwrap().value, 1e-14));
    }

    #[test]
    fn radial_gaussian_matches_closed_form() {
        let specs = [
            make_circle_space(&[1]).unwrap(),
            make_torus_space(&[[1, 0]]).unwrap(),
            make_sphere_space(&[1, 2]).unwrap(),
        ];
        for spec in &specs {
            for sigma in [0.5, 1.0, 2.0] {
                for t in [0.0, 0.3, 1.1] {
                    let r = radial_expectations(spec, &RadialDensity::Gaussian { sigma }, t).unwrap();
                    let g = gaussian_expectations(spec, sigma, t).unwrap();
                    for (x, y, what) in [
                        (r.level.value, g.level.value, "level"),
                        (r.excursion.value, g.excursion.value, "excursion"),
                        (r.leray.value, g.leray.value, "leray"),
                    ] {
                        assert!(close(x, y, 1e-8), "d={} σ={sigma} t={t} {what}: {x} vs {y}", spec.d());
                    }
                }
            }
        }
    }

    #[test]
    fn radial_narrow_bump_matches_uniform() {
        let bump = RadialDensity::Bump {
            center: 1.0,
            width: 1e-4,
        };
        for spec in [make_sphere_space(&[1]).unwrap(), make_torus_space(&[[1, 0]]).unwrap()] {
            for t in [0.0, 0.4] {
                let r = radial_expectations(&spec, &bump, t).unwrap();
                assert!(close(r.level.value, expected_level_measure(&spec, t).unwrap().value, 1e-3));
                assert!(close(r.excursion.value, expected_excursion_volume(&spec, t).value, 1e-3));
                assert!(close(r.leray.value, expected_leray(&spec, t).unwrap().value, 1e-3));
            }
            // t = 0 excursion is half of the full volume
            let r = radial_expectations(&spec, &RadialDensity::Indicator { lo: 0.0, hi: 1.0 }, 0.0).unwrap();
            assert!(close(r.excursion.value, 0.5 * spec.manifold.total_volume, 1e-9));
        }
    }

    #[test]
    fn limits() {
        let m = ManifoldModel::torus();
        let l = asymptotic_limits(0.0, &m);
        assert!(close(l.leray.value, m.total_volume / (2.0 * PI).sqrt(), 1e-15));
        assert!(close(l.excursion.value, m.total_volume / 2.0, 1e-15));
        assert!(close(limit_moment(1.0).value, (2.0 / PI).sqrt(), 1e-15));
        let f = limit_functional(|t| t.abs()).unwrap();
        assert!(close(f, (2.0 / PI).sqrt(), 1e-11));
    }

    #[test]
    fn recompute_is_bit_identical() {
        let spec = make_sphere_space(&[3]).unwrap();
        let cfs = [
            expected_level_measure(&spec, 0.37).unwrap(),
            expected_excursion_volume(&spec, -0.2),
            expected_leray(&spec, 0.1).unwrap(),
            gaussian_expectations(&spec, 0.7, 0.4).unwrap().excursion,
        ];
        for cf in cfs {
            assert_eq!(cf.recompute().unwrap().to_bits(), cf.value.to_bits());
        }
    }

    #[test]
    fn block_splitting_leaves_values_unchanged() {
        let whole = make_torus_space(&[[2, 1]]).unwrap();
        let fs = whole.blocks[0].functions.clone();
        let split = EigenspaceSpec::from_blocks(
            ManifoldModel::torus(),
            vec![
                Block {
                    lambda: 5.0,
                    functions: fs[..4].to_vec(),
                },
                Block {
                    lambda: 5.0,
                    functions: fs[4..].to_vec(),
                },
            ],
        )
        .unwrap();
        for t in [0.0, 0.5] {
            assert!(close(
                expected_level_measure(&whole, t).unwrap().value,
                expected_level_measure(&split, t).unwrap().value,
                1e-15
            ));
            assert_eq!(expected_excursion_volume(&whole, t).value, expected_excursion_volume(&split, t).value);
            assert_eq!(expected_leray(&whole, t).unwrap().value, expected_leray(&split, t).unwrap().value);
        }
    }
}
