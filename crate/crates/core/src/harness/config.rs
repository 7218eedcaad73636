//! Experiment configuration: a flat `key = value` text file.
//!
//! ```text
//! # nodal length on the torus
//! manifold     = torus
//! spectrum     = (1,0)
//! distribution = uniform_sphere
//! quantity     = level_measure
//! levels       = 0, 0.5          # scaled levels t, the absolute level is c·t
//! samples      = 10000
//! resolution   = 256
//! seed         = 7
//! ```
//!
//! Levels are always scaled levels. `epsilon` is the Leray shell
//! half-width, also in scaled units.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::closedform::RadialDensity;
use crate::error::{Error, Result};
use crate::manifold::{make_circle_space, make_sphere_space, make_torus_space, EigenspaceSpec, ManifoldKind};
use crate::sampling::Law;

/// Frequencies, frequency generators or degrees, by manifold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spectrum {
    Circle(Vec<u32>),
    Torus(Vec<[i32; 2]>),
    Sphere(Vec<u32>),
}

impl Spectrum {
    pub fn parse(kind: ManifoldKind, text: &str) -> Result<Self> {
        let text = text.trim();
        match kind {
            ManifoldKind::Circle => parse_int_list(text).map(Spectrum::Circle),
            ManifoldKind::Sphere2 => parse_int_list(text).map(Spectrum::Sphere),
            ManifoldKind::Torus2 => {
                let mut out = Vec::new();
                for item in text.split(';').map(str::trim).filter(|s| !s.is_empty()) {
                    let inner = item
                        .strip_prefix('(')
                        .and_then(|s| s.strip_suffix(')'))
                        .ok_or_else(|| config_err(format!("torus frequency `{item}` must look like (k1,k2)")))?;
                    let parts: Vec<&str> = inner.split(',').map(str::trim).collect();
                    let [a, b] = parts[..] else {
                        return Err(config_err(format!("torus frequency `{item}` needs two components")));
                    };
                    out.push([parse_num(a)?, parse_num(b)?]);
                }
                if out.is_empty() {
                    return Err(config_err("empty torus spectrum"));
                }
                Ok(Spectrum::Torus(out))
            }
        }
    }

    pub fn kind(&self) -> ManifoldKind {
        match self {
            Spectrum::Circle(_) => ManifoldKind::Circle,
            Spectrum::Torus(_) => ManifoldKind::Torus2,
            Spectrum::Sphere(_) => ManifoldKind::Sphere2,
        }
    }

    pub fn build(&self) -> Result<EigenspaceSpec> {
        match self {
            Spectrum::Circle(k) => make_circle_space(k),
            Spectrum::Torus(k) => make_torus_space(k),
            Spectrum::Sphere(l) => make_sphere_space(l),
        }
    }
}

fn parse_int_list(text: &str) -> Result<Vec<u32>> {
    if let Some((lo, hi)) = text.split_once("..") {
        let (lo, hi): (u32, u32) = (parse_num(lo)?, parse_num(hi)?);
        if lo > hi {
            return Err(config_err(format!("empty range {text}")));
        }
        return Ok((lo..=hi).collect());
    }
    let out = text
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(parse_num)
        .collect::<Result<Vec<u32>>>()?;
    if out.is_empty() {
        return Err(config_err("empty spectrum"));
    }
    Ok(out)
}

fn parse_num<T: FromStr>(s: &str) -> Result<T> {
    s.trim().parse().map_err(|_| config_err(format!("`{}` is not a valid number", s.trim())))
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

/// Measured quantity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Quantity {
    Zeros,
    LevelMeasure,
    Excursion,
    LerayShell,
    LerayCoarea,
    Lp { a: f64 },
    IntAbsPow { a: f64 },
    Sup,
    CommonZeros,
}

impl Quantity {
    /// Whether the quantity is measured at each configured level.
    pub fn uses_levels(&self) -> bool {
        !matches!(self, Quantity::Lp { .. } | Quantity::IntAbsPow { .. } | Quantity::Sup)
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Quantity::Zeros => write!(f, "zeros"),
            Quantity::LevelMeasure => write!(f, "level_measure"),
            Quantity::Excursion => write!(f, "excursion"),
            Quantity::LerayShell => write!(f, "leray_shell"),
            Quantity::LerayCoarea => write!(f, "leray_coarea"),
            Quantity::Lp { a } => write!(f, "lp({a})"),
            Quantity::IntAbsPow { a } => write!(f, "int_abs_pow({a})"),
            Quantity::Sup => write!(f, "sup"),
            Quantity::CommonZeros => write!(f, "common_zeros"),
        }
    }
}

/// Splits `name(arg, ...)` into the name and its arguments.
fn call(text: &str) -> Result<(&str, Vec<&str>)> {
    let text = text.trim();
    match text.split_once('(') {
        None => Ok((text, Vec::new())),
        Some((name, rest)) => {
            let args = rest
                .strip_suffix(')')
                .ok_or_else(|| config_err(format!("unbalanced parenthesis in `{text}`")))?;
            Ok((name.trim(), args.split(',').map(str::trim).collect()))
        }
    }
}

impl FromStr for Quantity {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let (name, args) = call(text)?;
        let one = || -> Result<f64> {
            match args[..] {
                [a] => parse_num(a),
                _ => Err(config_err(format!("`{name}` takes exactly one exponent"))),
            }
        };
        Ok(match name {
            "zeros" => Quantity::Zeros,
            "level_measure" => Quantity::LevelMeasure,
            "excursion" => Quantity::Excursion,
            "leray_shell" => Quantity::LerayShell,
            "leray_coarea" => Quantity::LerayCoarea,
            "lp" => Quantity::Lp { a: one()? },
            "int_abs_pow" => Quantity::IntAbsPow { a: one()? },
            "sup" => Quantity::Sup,
            "common_zeros" => Quantity::CommonZeros,
            _ => return Err(config_err(format!("unknown quantity `{text}`"))),
        })
    }
}

/// `uniform_sphere`, `gaussian(σ)`, `gaussian_normalized`, or
/// `radial(gaussian, σ)`, `radial(indicator, lo, hi)`, `radial(bump, center,
/// width)`, `radial(table, path.csv)` with columns `r,alpha`.
fn parse_law(text: &str, base: &Path) -> Result<Law> {
    let (name, args) = call(text)?;
    let nums = |args: &[&str]| args.iter().map(|a| parse_num::<f64>(a)).collect::<Result<Vec<f64>>>();
    let law = match (name, args.as_slice()) {
        ("uniform_sphere", []) => Law::UniformSphere,
        ("gaussian_normalized", []) => Law::GaussianNormalized,
        ("gaussian", [s]) => Law::Gaussian { sigma: parse_num(s)? },
        ("radial", [kind, rest @ ..]) => {
            let density = match (*kind, rest) {
                ("gaussian", [s]) => RadialDensity::Gaussian { sigma: parse_num(s)? },
                ("indicator", r) if r.len() == 2 => {
                    let v = nums(r)?;
                    RadialDensity::Indicator { lo: v[0], hi: v[1] }
                }
                ("bump", r) if r.len() == 2 => {
                    let v = nums(r)?;
                    RadialDensity::Bump {
                        center: v[0],
                        width: v[1],
                    }
                }
                ("table", [path]) => read_table(&base.join(path))?,
                _ => return Err(config_err(format!("unknown radial profile `{text}`"))),
            };
            density.validate().map_err(|e| config_err(format!("radial profile `{text}`: {e}")))?;
            Law::Radial { density }
        }
        _ => return Err(config_err(format!("unknown distribution `{text}`"))),
    };
    Ok(law)
}

fn read_table(path: &Path) -> Result<RadialDensity> {
    #[derive(Deserialize)]
    struct Row {
        r: f64,
        alpha: f64,
    }
    let mut rd = csv::Reader::from_path(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
    let (mut r, mut alpha) = (Vec::new(), Vec::new());
    for row in rd.deserialize::<Row>() {
        let row = row.map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        r.push(row.r);
        alpha.push(row.alpha);
    }
    Ok(RadialDensity::Table { r, alpha })
}

/// A validated experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub manifold: ManifoldKind,
    pub spectrum: Spectrum,
    pub distribution: Law,
    pub quantity: Option<Quantity>,
    pub levels: Vec<f64>,
    pub samples: usize,
    pub resolution: usize,
    pub seed: u64,
    pub epsilon: f64,
    /// Relative deviation from the closed form accepted regardless of the
    /// standard error, for discretization bias.
    pub grid_tolerance: f64,
    /// Report destination; not part of the experiment identity.
    #[serde(skip)]
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Defaults for everything but the eigenspace.
    pub fn new(spectrum: Spectrum) -> Self {
        Self {
            manifold: spectrum.kind(),
            spectrum,
            distribution: Law::UniformSphere,
            quantity: None,
            levels: vec![0.0],
            samples: 1000,
            resolution: 0,
            seed: 0,
            epsilon: 1e-3,
            grid_tolerance: 0.0,
            output: None,
        }
    }

    pub fn with_quantity(mut self, q: Quantity) -> Self {
        self.quantity = Some(q);
        self
    }

    pub fn with_levels(mut self, levels: &[f64]) -> Self {
        self.levels = levels.to_vec();
        self
    }

    pub fn with_samples(mut self, n: usize) -> Self {
        self.samples = n;
        self
    }

    pub fn with_resolution(mut self, r: usize) -> Self {
        self.resolution = r;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_law(mut self, law: Law) -> Self {
        self.distribution = law;
        self
    }

    pub fn with_grid_tolerance(mut self, tol: f64) -> Self {
        self.grid_tolerance = tol;
        self
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// Parses and validates; relative table paths resolve against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut kv: Vec<(String, String)> = Vec::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| config_err(format!("line {}: expected key = value", no + 1)))?;
            let k = k.trim().to_string();
            if kv.iter().any(|(x, _)| *x == k) {
                return Err(config_err(format!("line {}: duplicate key `{k}`", no + 1)));
            }
            kv.push((k, v.trim().to_string()));
        }
        let get = |key: &str| kv.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str());
        for (k, _) in &kv {
            const KNOWN: [&str; 12] = [
                "manifold",
                "spectrum",
                "distribution",
                "quantity",
                "levels",
                "samples",
                "resolution",
                "seed",
                "master_seed",
                "epsilon",
                "grid_tolerance",
                "output",
            ];
            if !KNOWN.contains(&k.as_str()) {
                return Err(config_err(format!("unknown key `{k}`")));
            }
        }
        let manifold = match get("manifold").ok_or_else(|| config_err("missing key `manifold`"))? {
            "circle" => ManifoldKind::Circle,
            "torus" => ManifoldKind::Torus2,
            "sphere" => ManifoldKind::Sphere2,
            other => return Err(config_err(format!("unknown manifold `{other}`"))),
        };
        let spectrum = Spectrum::parse(manifold, get("spectrum").ok_or_else(|| config_err("missing key `spectrum`"))?)?;
        let mut cfg = Self::new(spectrum);
        if let Some(v) = get("distribution") {
            cfg.distribution = parse_law(v, base)?;
        }
        if let Some(v) = get("quantity") {
            cfg.quantity = Some(v.parse()?);
        }
        if let Some(v) = get("levels") {
            cfg.levels = v
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(parse_num)
                .collect::<Result<_>>()?;
        }
        if let Some(v) = get("samples") {
            cfg.samples = parse_num(v)?;
        }
        if let Some(v) = get("resolution") {
            cfg.resolution = parse_num(v)?;
        }
        match (get("seed"), get("master_seed")) {
            (Some(_), Some(_)) => return Err(config_err("give either `seed` or `master_seed`, not both")),
            (Some(v), None) | (None, Some(v)) => cfg.seed = parse_num(v)?,
            (None, None) => {}
        }
        if let Some(v) = get("epsilon") {
            cfg.epsilon = parse_num(v)?;
        }
        if let Some(v) = get("grid_tolerance") {
            cfg.grid_tolerance = parse_num(v)?;
        }
        cfg.output = get("output").map(|p| base.join(p));
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks every enumerant and the quantity/manifold/law combination,
    /// and fills in a default resolution. Builds the eigenspace once.
    pub fn validate(&mut self) -> Result<EigenspaceSpec> {
        if self.spectrum.kind() != self.manifold {
            return Err(config_err("spectrum syntax does not match the manifold"));
        }
        let spec = self.spectrum.build().map_err(|e| config_err(e.to_string()))?;
        if self.samples == 0 {
            return Err(config_err("samples must be positive"));
        }
        if self.levels.is_empty() {
            return Err(config_err("no levels given"));
        }
        if let Some(t) = self.levels.iter().find(|t| !t.is_finite()) {
            return Err(config_err(format!("level {t} is not finite")));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(config_err(format!("epsilon {} must lie in (0, 1)", self.epsilon)));
        }
        if !(self.grid_tolerance >= 0.0 && self.grid_tolerance < 1.0) {
            return Err(config_err(format!("grid_tolerance {} must lie in [0, 1)", self.grid_tolerance)));
        }
        match &self.distribution {
            Law::Gaussian { sigma } if !(*sigma > 0.0 && sigma.is_finite()) => {
                return Err(config_err(format!("gaussian sigma {sigma} must be positive")));
            }
            Law::Radial { density } => {
                density.validate().map_err(|e| config_err(e.to_string()))?;
                if let Some(t) = self.levels.iter().find(|t| **t < 0.0) {
                    return Err(config_err(format!("radial laws need levels t ≥ 0, got {t}")));
                }
            }
            _ => {}
        }
        let uniform = matches!(self.distribution, Law::UniformSphere);
        if let Some(q) = self.quantity {
            match q {
                Quantity::Zeros if self.manifold != ManifoldKind::Circle => {
                    return Err(config_err("zeros needs the circle; use level_measure on surfaces"));
                }
                Quantity::CommonZeros if spec.manifold.dim != 2 => {
                    return Err(config_err("common_zeros needs a 2-manifold"));
                }
                Quantity::Lp { a } if !(a >= 1.0 && a.is_finite()) => {
                    return Err(config_err(format!("lp exponent {a} must be at least 1")));
                }
                Quantity::IntAbsPow { a } if !(a > -1.0 && a.is_finite()) => {
                    return Err(config_err(format!("int_abs_pow exponent {a} must exceed -1")));
                }
                Quantity::Lp { .. } | Quantity::IntAbsPow { .. } | Quantity::Sup | Quantity::CommonZeros if !uniform => {
                    return Err(config_err(format!("{q} has a reference value only under uniform_sphere")));
                }
                _ => {}
            }
        }
        if self.resolution == 0 {
            self.resolution = default_resolution(&spec);
        }
        let min = min_resolution(&spec);
        if self.resolution < min {
            return Err(config_err(format!(
                "resolution {} is below the minimum {min} for this spectrum",
                self.resolution
            )));
        }
        Ok(spec)
    }

    /// The eigenspace; the config is assumed validated.
    pub fn spec(&self) -> Result<EigenspaceSpec> {
        self.spectrum.build()
    }
}

/// Smallest resolution the estimators accept.
pub fn min_resolution(spec: &EigenspaceSpec) -> usize {
    match spec.manifold.kind {
        ManifoldKind::Circle => (8 * spec.max_frequency() as usize).max(8),
        _ => ((4.0 * spec.max_eigenvalue().sqrt()).ceil() as usize).max(8),
    }
}

fn default_resolution(spec: &EigenspaceSpec) -> usize {
    match spec.manifold.kind {
        ManifoldKind::Circle => (16 * spec.max_frequency() as usize).max(64),
        _ => (4 * min_resolution(spec)).next_multiple_of(8).max(128),
    }
}
