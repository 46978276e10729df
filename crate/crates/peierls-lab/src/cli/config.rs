//! Experiment configuration: a TOML file with grid, metric, Lagrangian, functional catalogue,
//! suite selection, seed, tolerance overrides and output options.

use crate::error::LabError;
use crate::fields::TestFunction;
use crate::functionals::{
    CubicDensity, ExampleDensity, Functional, OuterMap, PointDensity, PotentialDensity, SobolevDensity,
    TotalDivergenceDensity,
};
use crate::geometry::{GridSpacetime, Lattice, Sym2};
use crate::lagrangian::GeneralizedLagrangian;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;
use std::sync::Arc;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

impl From<LabError> for ConfigError {
    fn from(e: LabError) -> Self {
        ConfigError::Invalid(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub nt: usize,
    pub nx: usize,
    pub dt: f64,
    pub dx: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { nt: 64, nx: 64, dt: 1.0 / 64.0, dx: 1.0 / 32.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MetricSpec {
    #[default]
    Minkowski,
    /// `Ω²η` with `Ω = 1 + amplitude·sin(2πx/L)·cos(πt)`.
    Conformal { amplitude: f64 },
    /// `−a(x)²dt² + dx²` with `a = 1 + amplitude·sin(2πx/L)`.
    Static { amplitude: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LagrangianSpec {
    #[serde(default = "default_lagrangian")]
    pub name: String,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default)]
    pub mass2: f64,
}

fn default_lagrangian() -> String {
    "example".into()
}

fn default_eps() -> f64 {
    0.1
}

impl Default for LagrangianSpec {
    fn default() -> Self {
        Self { name: default_lagrangian(), eps: default_eps(), mass2: 0.0 }
    }
}

/// One named catalogue functional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FunctionalSpec {
    /// `∫f·ℓ` for a catalogue density on a bump test function.
    Local {
        name: String,
        density: String,
        center: [usize; 2],
        radius: f64,
        #[serde(default)]
        params: Vec<f64>,
    },
    /// `∫fφ dμ_g`.
    Linear { name: String, center: [usize; 2], radius: f64 },
    /// `‖φ‖²_{2,k,f}`.
    Sobolev { name: String, center: [usize; 2], radius: f64, k: usize },
    /// `exp(∫fφ dμ_g)`.
    ExpPairing { name: String, center: [usize; 2], radius: f64 },
    Product { name: String, of: [String; 2] },
    Compose { name: String, map: String, of: String },
}

impl FunctionalSpec {
    pub fn name(&self) -> &str {
        match self {
            FunctionalSpec::Local { name, .. }
            | FunctionalSpec::Linear { name, .. }
            | FunctionalSpec::Sobolev { name, .. }
            | FunctionalSpec::ExpPairing { name, .. }
            | FunctionalSpec::Product { name, .. }
            | FunctionalSpec::Compose { name, .. } => name,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct BracketSpec {
    /// Names of three catalogue functionals added to the random triples.
    #[serde(default)]
    pub triple: Vec<String>,
    #[serde(default)]
    pub margin: Option<usize>,
}

/// Acceptance thresholds; each may be overridden.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub greens_order: f64,
    pub resolvent_rel: f64,
    pub identity_rel: f64,
    pub leibniz_rel: f64,
    pub partition_abs: f64,
    pub symbol_abs: f64,
    pub pairing_rel: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            greens_order: 1.9,
            resolvent_rel: 1e-6,
            identity_rel: 1e-9,
            leibniz_rel: 1e-12,
            partition_abs: 1e-12,
            symbol_abs: 1e-6,
            pairing_rel: 1e-14,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default)]
    pub dir: Option<String>,
    #[serde(default)]
    pub csv: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub suites: Vec<String>,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub metric: MetricSpec,
    #[serde(default)]
    pub lagrangian: LagrangianSpec,
    #[serde(default, rename = "functional")]
    pub functionals: Vec<FunctionalSpec>,
    #[serde(default)]
    pub brackets: BracketSpec,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub output: OutputSpec,
}

fn default_seed() -> u64 {
    7
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: default_seed(),
            suites: vec![],
            grid: GridSpec::default(),
            metric: MetricSpec::default(),
            lagrangian: LagrangianSpec::default(),
            functionals: vec![],
            brackets: BracketSpec::default(),
            tolerances: Tolerances::default(),
            output: OutputSpec::default(),
        }
    }
}

const DENSITIES: [&str; 5] = ["example", "potential", "sobolev", "total-divergence", "cubic"];
const MAPS: [&str; 3] = ["exp", "tanh", "bump-chi"];

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let g = &self.grid;
        if !(g.dt > 0.0 && g.dx > 0.0 && g.dt.is_finite() && g.dx.is_finite()) {
            return Err(ConfigError::Invalid("grid spacings must be positive".into()));
        }
        if g.nt < 16 || g.nx < 16 {
            return Err(ConfigError::Invalid(format!("grid {}x{} is below the 16x16 minimum", g.nt, g.nx)));
        }
        match self.metric {
            MetricSpec::Minkowski => {}
            MetricSpec::Conformal { amplitude } | MetricSpec::Static { amplitude } => {
                if !(amplitude.abs() < 0.5) {
                    return Err(ConfigError::Invalid(format!("metric amplitude {amplitude} outside (-0.5, 0.5)")));
                }
            }
        }
        let l = &self.lagrangian;
        if !["free-field", "example"].contains(&l.name.as_str()) {
            return Err(ConfigError::Invalid(format!("unknown Lagrangian '{}'", l.name)));
        }
        if !(l.eps >= 0.0 && l.eps.is_finite() && l.mass2.is_finite()) {
            return Err(ConfigError::Invalid("Lagrangian needs eps >= 0 and a finite mass".into()));
        }
        for s in &self.suites {
            if !super::suites::SUITES.iter().any(|(n, _)| n == s) {
                return Err(ConfigError::Invalid(format!("unknown suite '{s}'")));
            }
        }
        let mut names: BTreeMap<&str, usize> = BTreeMap::new();
        for (i, f) in self.functionals.iter().enumerate() {
            if names.insert(f.name(), i).is_some() {
                return Err(ConfigError::Invalid(format!("duplicate functional '{}'", f.name())));
            }
            match f {
                FunctionalSpec::Local { center, density, radius, .. } => {
                    if !DENSITIES.contains(&density.as_str()) {
                        return Err(ConfigError::Invalid(format!("unknown density '{density}'")));
                    }
                    self.check_bump(f.name(), center, *radius)?;
                }
                FunctionalSpec::Linear { center, radius, .. } | FunctionalSpec::ExpPairing { center, radius, .. } => {
                    self.check_bump(f.name(), center, *radius)?
                }
                FunctionalSpec::Sobolev { center, radius, k, .. } => {
                    if *k > 2 {
                        return Err(ConfigError::Invalid(format!("Sobolev order {k} above 2")));
                    }
                    self.check_bump(f.name(), center, *radius)?;
                }
                FunctionalSpec::Product { of, .. } => {
                    for o in of {
                        if !names.contains_key(o.as_str()) || o == f.name() {
                            return Err(ConfigError::Invalid(format!("'{}' refers to undefined '{o}'", f.name())));
                        }
                    }
                }
                FunctionalSpec::Compose { map, of, .. } => {
                    if !MAPS.contains(&map.as_str()) {
                        return Err(ConfigError::Invalid(format!("unknown outer map '{map}'")));
                    }
                    if !names.contains_key(of.as_str()) || of == f.name() {
                        return Err(ConfigError::Invalid(format!("'{}' refers to undefined '{of}'", f.name())));
                    }
                }
            }
        }
        let t = &self.brackets.triple;
        if !(t.is_empty() || t.len() == 3) {
            return Err(ConfigError::Invalid("brackets.triple needs exactly three names".into()));
        }
        for n in t {
            if !names.contains_key(n.as_str()) {
                return Err(ConfigError::Invalid(format!("brackets.triple refers to undefined '{n}'")));
            }
        }
        Ok(())
    }

    fn check_bump(&self, name: &str, c: &[usize; 2], r: f64) -> Result<(), ConfigError> {
        if c[0] >= self.grid.nt || c[1] >= self.grid.nx || !(r > 0.0) {
            return Err(ConfigError::Invalid(format!("'{name}' has a centre off the grid or a non-positive radius")));
        }
        Ok(())
    }

    pub fn lattice(&self) -> Result<Lattice, ConfigError> {
        Ok(Lattice::new(self.grid.nt, self.grid.nx, self.grid.dt, self.grid.dx)?)
    }

    pub fn spacetime(&self) -> Result<Arc<GridSpacetime>, ConfigError> {
        build_spacetime(self.lattice()?, &self.metric)
    }

    pub fn lagrangian(&self, st: Arc<GridSpacetime>) -> Result<GeneralizedLagrangian, ConfigError> {
        Ok(match self.lagrangian.name.as_str() {
            "free-field" => GeneralizedLagrangian::free_field(st),
            _ => GeneralizedLagrangian::example(st, self.lagrangian.eps, self.lagrangian.mass2)?,
        })
    }

    /// All catalogue functionals in declaration order.
    pub fn functionals(&self, st: &Arc<GridSpacetime>) -> Result<BTreeMap<String, Functional>, ConfigError> {
        let lat = st.lattice;
        let mut out: BTreeMap<String, Functional> = BTreeMap::new();
        let bump = |c: &[usize; 2], r: f64| TestFunction::bump(lat, c[0], c[1], r);
        for spec in &self.functionals {
            let f = match spec {
                FunctionalSpec::Local { density, center, radius, params, .. } => {
                    Functional::local_density(st, bump(center, *radius), density_by_name(density, params)?)?
                }
                FunctionalSpec::Linear { center, radius, .. } => Functional::linear(st, &bump(center, *radius))?,
                FunctionalSpec::Sobolev { center, radius, k, .. } => Functional::sobolev_sq(bump(center, *radius), *k, None)?,
                FunctionalSpec::ExpPairing { center, radius, .. } => {
                    Functional::exp_pairing(crate::fields::to_density(st, &bump(center, *radius).field)?)
                }
                FunctionalSpec::Product { of, .. } => out[&of[0]].mul(&out[&of[1]]),
                FunctionalSpec::Compose { map, of, .. } => {
                    let psi = match map.as_str() {
                        "exp" => OuterMap::Exp { scale: 1.0 },
                        "tanh" => OuterMap::Tanh,
                        _ => OuterMap::BumpChi { r0: 1.0, r1: 2.0 },
                    };
                    Functional::compose(psi, vec![out[of].clone()])?
                }
            };
            out.insert(spec.name().to_string(), f);
        }
        Ok(out)
    }
}

/// Catalogue densities; `params` fill the coefficients in declaration order.
pub fn density_by_name(name: &str, params: &[f64]) -> Result<Arc<dyn PointDensity>, ConfigError> {
    let p = |i: usize, d: f64| params.get(i).copied().unwrap_or(d);
    Ok(match name {
        "example" => Arc::new(ExampleDensity { eps: p(0, 0.1), mass2: p(1, 0.0) }),
        "potential" => Arc::new(PotentialDensity { mass2: p(0, 1.0), quartic: p(1, 0.0) }),
        "sobolev" => Arc::new(SobolevDensity),
        "total-divergence" => Arc::new(TotalDivergenceDensity { c: p(0, 1.0) }),
        "cubic" => Arc::new(CubicDensity { a: p(0, 1.0), b: p(1, 0.0), c: p(2, 0.0) }),
        other => return Err(ConfigError::Invalid(format!("unknown density '{other}'"))),
    })
}

pub fn build_spacetime(lat: Lattice, metric: &MetricSpec) -> Result<Arc<GridSpacetime>, ConfigError> {
    let k = 2.0 * PI / lat.period();
    Ok(Arc::new(match *metric {
        MetricSpec::Minkowski => GridSpacetime::minkowski(lat),
        MetricSpec::Conformal { amplitude } => {
            GridSpacetime::conformal(lat, move |t, x| 1.0 + amplitude * (k * x).sin() * (PI * t).cos())?
        }
        MetricSpec::Static { amplitude } => GridSpacetime::from_fn(lat, move |_, x| {
            let a = 1.0 + amplitude * (k * x).sin();
            Sym2::new(-a * a, 0.0, 1.0)
        })?,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_parse_and_validate() {
        let c = ExperimentConfig::parse("seed = 3").unwrap();
        assert_eq!(c.seed, 3);
        assert_eq!(c.grid, GridSpec::default());
    }

    #[test]
    fn malformed_metric_is_rejected() {
        let e = ExperimentConfig::parse("[metric]\nkind = \"wormhole\"").unwrap_err();
        assert!(matches!(e, ConfigError::Parse(_)));
        let e = ExperimentConfig::parse("[metric]\nkind = \"static\"\namplitude = 2.0").unwrap_err();
        assert!(matches!(e, ConfigError::Invalid(_)));
    }

    #[test]
    fn catalogue_references_resolve() {
        let text = r#"
[[functional]]
kind = "local"
name = "A"
density = "potential"
center = [20, 20]
radius = 3.0
[[functional]]
kind = "product"
name = "B"
of = ["A", "A"]
"#;
        let c = ExperimentConfig::parse(text).unwrap();
        let st = c.spacetime().unwrap();
        assert_eq!(c.functionals(&st).unwrap().len(), 2);
        assert!(ExperimentConfig::parse(&text.replace("[\"A\", \"A\"]", "[\"A\", \"C\"]")).is_err());
    }
}
