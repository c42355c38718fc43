//! Experiment configuration: strict JSON with dotted `key=value` overrides.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::flux::{FluxError, FluxModel};
use crate::kinetic::{xi_excursion, Grid, KineticError, Scheme, SolutionField, StepOptions};
use crate::roughpath::{brownian_pwl, PathError, PwlPath};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed override `{0}`; expected key=value")]
    Override(String),
    #[error("flux: {0}")]
    Flux(#[from] FluxError),
    #[error("driver: {0}")]
    Driver(#[from] PathError),
    #[error("grid: {0}")]
    Grid(#[from] KineticError),
}

impl ConfigError {
    fn invalid(path: &str, message: impl Into<String>) -> Self {
        Self::Invalid { path: path.into(), message: message.into() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub flux: FluxConfig,
    #[serde(default)]
    pub driver: DriverConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub time: TimeConfig,
    #[serde(default)]
    pub mollifier: MollifierConfig,
    #[serde(default)]
    pub initial: InitialConfig,
    #[serde(default)]
    pub suites: SuiteConfigs,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FluxConfig {
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriverKind {
    Brownian,
    Tent,
    Linear,
    File,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DriverConfig {
    pub kind: DriverKind,
    pub seed: u64,
    pub dyadic_level: u32,
    /// Hölder exponent used for path norms and distances.
    pub alpha: f64,
    pub dims: usize,
    /// Velocity of a `linear` driver.
    pub velocity: Vec<f64>,
    /// Peak of a `tent` driver, reached at `T/2`.
    pub height: Vec<f64>,
    /// Segments of a `linear` driver, or per leg of a `tent`.
    pub segments: usize,
    /// CSV path of a `file` driver.
    pub path: Option<PathBuf>,
}

impl Default for DriverConfig {
    fn default() -> Self {
        Self {
            kind: DriverKind::Brownian,
            seed: 42,
            dyadic_level: 6,
            alpha: 0.4,
            dims: 1,
            velocity: vec![1.0],
            height: vec![0.3],
            segments: 16,
            path: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub nx: usize,
    pub nxi: usize,
    #[serde(rename = "box")]
    pub bounds: [f64; 2],
    pub xi_margin_factor: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { nx: 400, nxi: 150, bounds: [-3.0, 3.0], xi_margin_factor: 1.5 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeConfig {
    #[serde(rename = "T")]
    pub horizon: f64,
    pub cfl: f64,
    pub steps_per_segment: usize,
    pub scheme: Scheme,
}

impl Default for TimeConfig {
    fn default() -> Self {
        Self { horizon: 1.0, cfl: 0.45, steps_per_segment: 8, scheme: Scheme::EngquistOsher }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MollifierConfig {
    pub epsilon: f64,
}

impl Default for MollifierConfig {
    fn default() -> Self {
        Self { epsilon: 0.1 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialKind {
    /// `amplitude · cos²(π r / 2w)` for `r = |x − center| < w`.
    Bump,
    /// `amplitude` on the cube `|x − center|_∞ < w`.
    Box,
    Zero,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialConfig {
    pub kind: InitialKind,
    /// Defaults to the origin.
    pub center: Vec<f64>,
    pub width: f64,
    pub amplitude: f64,
}

impl Default for InitialConfig {
    fn default() -> Self {
        Self { kind: InitialKind::Bump, center: Vec::new(), width: 1.0, amplitude: 1.0 }
    }
}

impl InitialConfig {
    pub fn shifted(&self, shift: f64, n: usize) -> Self {
        let mut c = self.center_in(n);
        c[0] += shift;
        Self { center: c, ..self.clone() }
    }

    fn center_in(&self, n: usize) -> Vec<f64> {
        let mut c = self.center.clone();
        c.resize(n, 0.0);
        c
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let c = self.center_in(x.len());
        match self.kind {
            InitialKind::Zero => 0.0,
            InitialKind::Bump => {
                let r = x.iter().zip(&c).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                if r < self.width {
                    self.amplitude * (std::f64::consts::FRAC_PI_2 * r / self.width).cos().powi(2)
                } else {
                    0.0
                }
            }
            InitialKind::Box => {
                if x.iter().zip(&c).all(|(a, b)| (a - b).abs() < self.width) {
                    self.amplitude
                } else {
                    0.0
                }
            }
        }
    }

    /// Range of values taken, always including 0.
    pub fn range(&self) -> (f64, f64) {
        match self.kind {
            InitialKind::Zero => (0.0, 0.0),
            _ => (self.amplitude.min(0.0), self.amplitude.max(0.0)),
        }
    }

    /// `‖u0‖_BV` in one dimension.
    pub fn total_variation_1d(&self) -> f64 {
        match self.kind {
            InitialKind::Zero => 0.0,
            _ => 2.0 * self.amplitude.abs(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SuiteConfigs {
    pub contraction: ContractionConfig,
    pub bounds: BoundsConfig,
    pub cancellation: CancellationConfig,
    pub convergence: ConvergenceConfig,
    #[serde(rename = "appendixB")]
    pub appendix_b: AppendixBConfig,
    #[serde(rename = "flowstability")]
    pub flow_stability: FlowStabilityConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContractionConfig {
    /// The second datum is the first shifted by this along `x1`.
    pub shift: f64,
    /// `c` in the slack `c·Δx·Lip` per unit time.
    pub slack_factor: f64,
    /// Mollifier centres `(y1, η)` at `t0 = 0` for the kinetic residual check.
    pub residual_targets: Vec<[f64; 2]>,
    /// Largest admissible `Σ residual / Σ |Δ(ρ∗χ)|` over the targets.
    pub residual_tolerance: f64,
    /// Replace the defect ledger by zeros before the residual check.
    pub zero_ledger: bool,
}

impl Default for ContractionConfig {
    fn default() -> Self {
        Self {
            shift: 0.3,
            slack_factor: 5.0,
            residual_targets: vec![[0.8, 0.2], [0.6, 0.35], [1.0, 0.1]],
            residual_tolerance: 0.5,
            zero_ledger: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundsConfig {
    pub levels: Vec<u32>,
    pub nx: usize,
    /// Relative slack of the x-independent entropy balance.
    pub balance_tolerance: f64,
    /// Flux used for the entropy-balance check.
    pub balance_flux: String,
    /// Admissible least-squares slope of `M̂` against the level, as a fraction
    /// of the slope of the classical variation-dependent constant.
    pub trend_tolerance: f64,
}

impl Default for BoundsConfig {
    fn default() -> Self {
        Self {
            levels: vec![4, 5, 6, 7, 8],
            nx: 200,
            balance_tolerance: 0.01,
            balance_flux: "burgers_xindep".into(),
            trend_tolerance: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CancellationConfig {
    pub pre_height: f64,
    pub post_height: f64,
    pub nx: Vec<usize>,
    /// Smallest admissible observed order of `‖u(T) − u0‖₁` in `Δx`.
    pub min_order: f64,
    /// Required ratio of post-shock to pre-shock distance at the finest grid.
    pub control_factor: f64,
}

impl Default for CancellationConfig {
    fn default() -> Self {
        Self { pre_height: 0.3, post_height: 1.5, nx: vec![100, 200, 400], min_order: 0.8, control_factor: 10.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConvergenceConfig {
    pub seed: u64,
    pub native_level: u32,
    pub levels: Vec<u32>,
    pub nx: usize,
    /// Gaps must decrease from this level on.
    pub monotone_from: u32,
    /// `gap(last) ≤ ratio · gap(monotone_from)`.
    pub final_ratio: f64,
    /// Flux for this suite; `null` uses the experiment flux.
    pub flux: Option<String>,
    /// Double `nx` with each level, starting from `nx` at the lowest one.
    pub refine: bool,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            native_level: 10,
            levels: vec![4, 5, 6, 7, 8, 9],
            nx: 200,
            monotone_from: 5,
            final_ratio: 0.5,
            flux: None,
            refine: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AppendixBConfig {
    pub t0: f64,
    /// `r − t0 = 2^{-k}` for each `k`.
    pub radii_exponents: Vec<u32>,
    pub samples: usize,
    /// Sample box `[lo, hi]` for `(x, ξ)` on every axis.
    pub sample_box: [f64; 2],
    /// Midpoint nodes per axis of the outer quadrature.
    pub quadrature: usize,
    pub slope_margin: f64,
}

impl Default for AppendixBConfig {
    fn default() -> Self {
        Self {
            t0: 0.0,
            radii_exponents: vec![2, 3, 4, 5, 6],
            samples: 64,
            sample_box: [-1.0, 1.0],
            quadrature: 24,
            slope_margin: 0.15,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlowStabilityConfig {
    /// Each level `n` is compared with `n + 1`.
    pub levels: Vec<u32>,
    pub native_level: u32,
    pub samples: usize,
    pub sample_box: [f64; 2],
    pub max_spread: f64,
}

impl Default for FlowStabilityConfig {
    fn default() -> Self {
        Self { levels: vec![4, 5, 6, 7], native_level: 12, samples: 32, sample_box: [-1.0, 1.0], max_spread: 3.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub formats: Vec<String>,
}

impl OutputConfig {
    pub fn wants(&self, format: &str) -> bool {
        self.formats.iter().any(|f| f == format)
    }
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("out"), formats: vec!["json".into(), "csv".into()] }
    }
}

/// Sets `key` (dotted path) to `value`, parsed as JSON when possible and as a
/// string otherwise. Intermediate objects are created as needed.
pub fn apply_override(doc: &mut Value, key: &str, value: &str) -> Result<(), ConfigError> {
    let parsed = serde_json::from_str(value).unwrap_or_else(|_| Value::String(value.to_string()));
    let mut cur = doc;
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(ConfigError::Override(key.into()));
    }
    for (i, part) in parts.iter().enumerate() {
        let obj = cur.as_object_mut().ok_or_else(|| ConfigError::invalid(&parts[..i].join("."), "not an object"))?;
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), parsed);
            return Ok(());
        }
        cur = obj.entry(part.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    unreachable!("split yields at least one part")
}

/// Parses `key=value`.
pub fn parse_override(arg: &str) -> Result<(&str, &str), ConfigError> {
    let arg = arg.strip_prefix("--").unwrap_or(arg);
    arg.split_once('=').ok_or_else(|| ConfigError::Override(arg.into()))
}

impl ExperimentConfig {
    pub fn from_value(doc: Value) -> Result<Self, ConfigError> {
        let cfg: Self = serde_path_to_error::deserialize(doc).map_err(|e| {
            let mut path = e.path().to_string();
            let message = e.inner().to_string();
            // Name the missing key itself rather than its parent.
            if let Some(field) = message.strip_prefix("missing field `").and_then(|m| m.split('`').next()) {
                path = if path == "." { field.to_string() } else { format!("{path}.{field}") };
            }
            ConfigError::Invalid { path, message }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json_str(text: &str, overrides: &[(String, String)]) -> Result<Self, ConfigError> {
        let mut doc: Value = serde_json::from_str(text).map_err(|e| ConfigError::invalid(".", e.to_string()))?;
        for (k, v) in overrides {
            apply_override(&mut doc, k, v)?;
        }
        Self::from_value(doc)
    }

    pub fn load(path: &Path, overrides: &[(String, String)]) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
        let mut cfg = Self::from_json_str(&text, overrides)?;
        // Relative driver files resolve against the config's directory.
        if let (Some(p), Some(dir)) = (&cfg.driver.path, path.parent()) {
            if p.is_relative() {
                cfg.driver.path = Some(dir.join(p));
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = |path: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(ConfigError::invalid(path, format!("must be positive and finite, got {v}")))
            }
        };
        let at_least = |path: &str, v: usize, min: usize| {
            if v >= min {
                Ok(())
            } else {
                Err(ConfigError::invalid(path, format!("must be at least {min}, got {v}")))
            }
        };
        let d = &self.driver;
        if !(d.alpha > 1.0 / 3.0 && d.alpha <= 0.5) {
            return Err(ConfigError::invalid("driver.alpha", format!("must lie in (1/3, 1/2], got {}", d.alpha)));
        }
        at_least("driver.dims", d.dims, 1)?;
        at_least("driver.segments", d.segments, 1)?;
        if d.dyadic_level > 20 {
            return Err(ConfigError::invalid("driver.dyadic_level", "must be at most 20"));
        }
        if d.kind == DriverKind::File && d.path.is_none() {
            return Err(ConfigError::invalid("driver.path", "required for a file driver"));
        }
        let g = &self.grid;
        at_least("grid.nx", g.nx, 4)?;
        at_least("grid.nxi", g.nxi, 4)?;
        if !(g.bounds[1] > g.bounds[0]) || !g.bounds.iter().all(|v| v.is_finite()) {
            return Err(ConfigError::invalid("grid.box", format!("empty interval {:?}", g.bounds)));
        }
        positive("grid.xi_margin_factor", g.xi_margin_factor)?;
        positive("time.T", self.time.horizon)?;
        positive("time.cfl", self.time.cfl)?;
        if self.time.cfl > 1.0 {
            return Err(ConfigError::invalid("time.cfl", format!("must be at most 1, got {}", self.time.cfl)));
        }
        at_least("time.steps_per_segment", self.time.steps_per_segment, 1)?;
        positive("mollifier.epsilon", self.mollifier.epsilon)?;
        positive("initial.width", self.initial.width)?;
        if !self.initial.amplitude.is_finite() {
            return Err(ConfigError::invalid("initial.amplitude", "must be finite"));
        }
        let s = &self.suites;
        positive("suites.contraction.slack_factor", s.contraction.slack_factor)?;
        positive("suites.contraction.residual_tolerance", s.contraction.residual_tolerance)?;
        at_least("suites.bounds.levels", s.bounds.levels.len(), 2)?;
        at_least("suites.cancellation.nx", s.cancellation.nx.len(), 2)?;
        at_least("suites.convergence.levels", s.convergence.levels.len(), 2)?;
        at_least("suites.convergence.nx", s.convergence.nx, 4)?;
        if s.convergence.levels.iter().any(|&l| l >= s.convergence.native_level) {
            return Err(ConfigError::invalid("suites.convergence.levels", "levels must lie below native_level"));
        }
        if let Some(f) = self.output.formats.iter().find(|f| !matches!(f.as_str(), "json" | "csv")) {
            return Err(ConfigError::invalid("output.formats", format!("unknown format `{f}`; expected json or csv")));
        }
        at_least("suites.appendixB.radii_exponents", s.appendix_b.radii_exponents.len(), 2)?;
        at_least("suites.appendixB.samples", s.appendix_b.samples, 1)?;
        at_least("suites.appendixB.quadrature", s.appendix_b.quadrature, 4)?;
        at_least("suites.flowstability.levels", s.flow_stability.levels.len(), 2)?;
        at_least("suites.flowstability.samples", s.flow_stability.samples, 1)?;
        if s.flow_stability.levels.iter().any(|&l| l >= s.flow_stability.native_level) {
            return Err(ConfigError::invalid("suites.flowstability.levels", "levels must lie below native_level"));
        }
        self.flux()?;
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(bytes))
    }

    pub fn flux(&self) -> Result<FluxModel, ConfigError> {
        Ok(FluxModel::builtin(&self.flux.name, &self.flux.params)?)
    }

    /// The driver on `[0, T]`; Brownian drivers are sampled at `dyadic_level`.
    pub fn driver(&self) -> Result<PwlPath, ConfigError> {
        let d = &self.driver;
        let t = self.time.horizon;
        let dims_check = |len: usize, key: &str| {
            if len == d.dims {
                Ok(())
            } else {
                Err(ConfigError::invalid(key, format!("has {len} entries, driver.dims is {}", d.dims)))
            }
        };
        Ok(match d.kind {
            DriverKind::Brownian => brownian_pwl(d.seed, d.dims, d.dyadic_level, t),
            DriverKind::Linear => {
                dims_check(d.velocity.len(), "driver.velocity")?;
                PwlPath::linear(&d.velocity, t, d.segments)?
            }
            DriverKind::Tent => {
                dims_check(d.height.len(), "driver.height")?;
                PwlPath::tent(&d.height, t, d.segments)?
            }
            DriverKind::File => {
                let p = d.path.as_ref().expect("validated");
                let file = std::fs::File::open(p).map_err(|source| ConfigError::Io { path: p.clone(), source })?;
                PwlPath::read_csv(file)?
            }
        })
    }

    /// Grid whose ξ-range covers the initial range padded by
    /// `xi_margin_factor` times the sampled excursion of `ζ` along 100 characteristics.
    pub fn grid_for(
        &self,
        flux: &FluxModel,
        z: &PwlPath,
        initial: &[&InitialConfig],
        nx: usize,
    ) -> Result<Grid, ConfigError> {
        let (mut lo, mut hi) = (0.0f64, 0.0f64);
        for i in initial {
            let (a, b) = i.range();
            lo = lo.min(a);
            hi = hi.max(b);
        }
        let [x_lo, x_hi] = self.grid.bounds;
        let exc = if flux.is_x_independent() {
            0.0
        } else {
            xi_excursion(flux, z, x_lo, x_hi, lo, hi, 100, self.time.steps_per_segment)?
        };
        let pad = (self.grid.xi_margin_factor * exc).max(0.05 * (hi - lo)).max(1e-3);
        Ok(Grid::new(flux.n(), nx, x_lo, x_hi, self.grid.nxi, lo - pad, hi + pad)?)
    }

    pub fn grid(&self, flux: &FluxModel, z: &PwlPath) -> Result<Grid, ConfigError> {
        self.grid_for(flux, z, &[&self.initial], self.grid.nx)
    }

    pub fn initial_field(&self, grid: &Grid) -> SolutionField {
        SolutionField::from_fn(grid, 0.0, |x| self.initial.eval(x))
    }

    pub fn step_options(&self) -> StepOptions {
        StepOptions { scheme: self.time.scheme, cfl: self.time.cfl, ..StepOptions::default() }
    }
}
