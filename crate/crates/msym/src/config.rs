//! Experiment configuration files.
//!
//! Configs are TOML documents with nested tables and typed scalars. Every
//! table rejects unknown keys, and [`ExperimentConfig::validate`] reports
//! problems by their dotted path, such as `time.dt`.
//!
//! ```toml
//! command = "convergence"   # convergence | energy | verify-mscl | check-tableau | build-diffop | sample-noise
//! seed = 1
//! paths = 200
//!
//! [system]
//! name = "wave"             # wave | nls | kdv
//! f = "sin"                 # sin | identity | cubic | zero | one
//! g = "sin"
//! beta = 1.0                # KdV only
//! lambda = 1.0              # KdV only
//!
//! [scheme]
//! name = "lrbf-midpoint"    # lrbf-midpoint | lrbf-euler | splitting | prk
//! spatial = "midpoint"      # tableau names for single-cell checks
//! temporal = "midpoint"
//! family = "midpoint"       # partitioned family for single-cell checks
//! cell = false              # verify a single cell instead of a grid
//!
//! [grid]
//! x_left = -8.0
//! x_right = 8.0
//! cells = 512
//! profile = "sech"          # zero | sech | sin
//!
//! [rbf]
//! kernel = "imq"            # gaussian | mq | imq
//! shape = 1.0
//! stencil = 5
//!
//! [time]
//! t_final = 1.0
//! dt = 0.05                 # energy, verify-mscl, sample-noise
//! ladder = [0.5, 0.25, 0.125, 0.0625]
//! reference_dt = 0.0009765625
//!
//! [noise]
//! basis = "sine-quarter"    # sine-quarter | sine-quarter-raw | sine-over-sqrt-pi
//! decay = 6.0
//! truncation = 100
//!
//! [solver]
//! method = "fixed-point"    # fixed-point | newton
//! tol = 1e-12
//! max_iter = 100
//! damping = 1.0
//!
//! [tableau]                 # check-tableau only
//! kind = "rk"               # rk | wave-prk | nls-prk | kdv-prk
//! name = "gauss2"           # or inline a = [[...]], b = [...] for kind = "rk"
//! tol = 1e-14
//!
//! [verify]
//! threshold = 1e-9
//! ```

use serde::{Deserialize, Serialize};

use msym_core::integrators::{SolverMethod, SolverPolicy};
use msym_core::qwiener::{BasisKind, SpectralBasis};
use msym_core::rbf::KernelKind;
use msym_core::systems::{Nonlinearity, Profile, SystemSpec};

/// A configuration problem, located by its dotted path.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("config `{path}`: {reason}")]
pub struct ConfigError {
    /// Dotted key path.
    pub path: String,
    /// Explanation.
    pub reason: String,
}

impl ConfigError {
    /// Builds an error for `path`.
    pub fn new(path: impl Into<String>, reason: impl Into<String>) -> Self {
        ConfigError { path: path.into(), reason: reason.into() }
    }
}

/// Subcommand selected by a config.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Mean-square error ladder.
    Convergence,
    /// Averaged energy trace.
    Energy,
    /// Discrete conservation-law check.
    VerifyMscl,
    /// Tableau condition report.
    CheckTableau,
    /// Stencil operator export.
    BuildDiffop,
    /// Noise increment export.
    SampleNoise,
}

/// Full experiment configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Subcommand.
    pub command: Command,
    /// Base seed.
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Monte Carlo path count.
    #[serde(default = "default_paths")]
    pub paths: usize,
    /// Output directory.
    #[serde(default)]
    pub out: Option<String>,
    /// System section.
    #[serde(default)]
    pub system: SystemConfig,
    /// Scheme section.
    #[serde(default)]
    pub scheme: SchemeConfig,
    /// Grid section.
    #[serde(default)]
    pub grid: GridConfig,
    /// Stencil section.
    #[serde(default)]
    pub rbf: RbfConfig,
    /// Time section.
    #[serde(default)]
    pub time: TimeConfig,
    /// Noise section.
    #[serde(default)]
    pub noise: NoiseConfig,
    /// Solver section.
    #[serde(default)]
    pub solver: SolverConfig,
    /// Tableau section.
    #[serde(default)]
    pub tableau: TableauConfig,
    /// Conservation-check section.
    #[serde(default)]
    pub verify: VerifyConfig,
}

fn default_seed() -> u64 {
    1
}

fn default_paths() -> usize {
    200
}

/// System descriptor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemConfig {
    /// `wave`, `nls` or `kdv`.
    pub name: String,
    /// Wave drift nonlinearity.
    pub f: String,
    /// Wave diffusion nonlinearity.
    pub g: String,
    /// KdV dispersion.
    pub beta: f64,
    /// KdV noise amplitude.
    pub lambda: f64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        SystemConfig { name: "wave".into(), f: "sin".into(), g: "sin".into(), beta: 1.0, lambda: 1.0 }
    }
}

/// Scheme descriptor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SchemeConfig {
    /// `lrbf-midpoint`, `lrbf-euler`, `splitting` or `prk`.
    pub name: String,
    /// Spatial tableau name for single-cell splitting checks.
    pub spatial: String,
    /// Temporal tableau name for single-cell splitting checks.
    pub temporal: String,
    /// Partitioned family for single-cell checks.
    pub family: String,
    /// Check a single cell instead of a grid.
    pub cell: bool,
}

impl Default for SchemeConfig {
    fn default() -> Self {
        SchemeConfig {
            name: "lrbf-midpoint".into(),
            spatial: "midpoint".into(),
            temporal: "midpoint".into(),
            family: "midpoint".into(),
            cell: false,
        }
    }
}

/// Scheme after name resolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeKind {
    /// Collocation with the midpoint rule.
    LrbfMidpoint,
    /// Collocation with explicit Euler.
    LrbfEuler,
    /// Box splitting scheme.
    Splitting,
    /// Partitioned box scheme.
    Prk,
}

/// Grid descriptor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    /// Left end.
    pub x_left: f64,
    /// Right end.
    pub x_right: f64,
    /// Number of intervals.
    pub cells: usize,
    /// Initial profile.
    pub profile: String,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { x_left: -8.0, x_right: 8.0, cells: 512, profile: "sech".into() }
    }
}

/// Stencil descriptor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RbfConfig {
    /// Kernel name.
    pub kernel: String,
    /// Shape parameter.
    pub shape: f64,
    /// Influence-domain size.
    pub stencil: usize,
}

impl Default for RbfConfig {
    fn default() -> Self {
        RbfConfig { kernel: "imq".into(), shape: 1.0, stencil: 5 }
    }
}

/// Time descriptor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeConfig {
    /// Final time.
    pub t_final: f64,
    /// Step for single-resolution commands.
    pub dt: f64,
    /// Coarse steps of an error ladder, decreasing.
    pub ladder: Vec<f64>,
    /// Reference step of an error ladder.
    pub reference_dt: f64,
}

impl Default for TimeConfig {
    fn default() -> Self {
        TimeConfig { t_final: 1.0, dt: 0.05, ladder: vec![0.5, 0.25, 0.125, 0.0625], reference_dt: 1.0 / 1024.0 }
    }
}

/// Noise descriptor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseConfig {
    /// Basis name.
    pub basis: String,
    /// Eigenvalue decay exponent.
    pub decay: f64,
    /// Number of modes.
    pub truncation: usize,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            basis: "sine-quarter".into(),
            decay: SpectralBasis::DEFAULT_DECAY,
            truncation: SpectralBasis::DEFAULT_TRUNCATION,
        }
    }
}

/// Solver descriptor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    /// `fixed-point` or `newton`.
    pub method: String,
    /// Residual tolerance.
    pub tol: f64,
    /// Iteration cap.
    pub max_iter: usize,
    /// Update damping.
    pub damping: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let p = SolverPolicy::default();
        SolverConfig { method: "fixed-point".into(), tol: p.tol, max_iter: p.max_iter, damping: p.damping }
    }
}

/// Tableau descriptor for `check-tableau`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TableauConfig {
    /// `rk`, `wave-prk`, `nls-prk` or `kdv-prk`.
    pub kind: String,
    /// Built-in name.
    pub name: String,
    /// Inline coefficient matrix, overriding `name` for `rk`.
    pub a: Option<Vec<Vec<f64>>>,
    /// Inline weights, required with `a`.
    pub b: Option<Vec<f64>>,
    /// Pass tolerance.
    pub tol: f64,
}

impl Default for TableauConfig {
    fn default() -> Self {
        TableauConfig { kind: "rk".into(), name: "midpoint".into(), a: None, b: None, tol: 1e-14 }
    }
}

/// Conservation-check descriptor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    /// Largest acceptable residual.
    pub threshold: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig { threshold: 1e-9 }
    }
}

fn positive(path: &str, v: f64) -> Result<(), ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(ConfigError::new(path, format!("must be positive and finite, got {v}")))
    }
}

impl ExperimentConfig {
    /// Parses TOML text.
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| {
            let msg = e.message().to_string();
            let table = e.span().map(|sp| enclosing_table(text, sp.start)).unwrap_or_default();
            let path = match (unknown_key_path(&msg), table.is_empty()) {
                (Some(k), true) => k,
                (Some(k), false) => format!("{table}.{k}"),
                (None, false) => table,
                (None, true) => "<document>".into(),
            };
            ConfigError::new(path, msg)
        })
    }

    /// Resolves the system descriptor.
    pub fn system_spec(&self) -> Result<SystemSpec, ConfigError> {
        let s = &self.system;
        match s.name.as_str() {
            "wave" => Ok(SystemSpec::Wave { f: nonlinearity("system.f", &s.f)?, g: nonlinearity("system.g", &s.g)? }),
            "nls" => Ok(SystemSpec::Nls),
            "kdv" => {
                positive("system.beta", s.beta)?;
                positive("system.lambda", s.lambda)?;
                Ok(SystemSpec::Kdv { beta: s.beta, lambda: s.lambda })
            }
            other => Err(ConfigError::new("system.name", format!("unknown system `{other}`"))),
        }
    }

    /// Resolves the scheme name.
    pub fn scheme_kind(&self) -> Result<SchemeKind, ConfigError> {
        match self.scheme.name.as_str() {
            "lrbf-midpoint" => Ok(SchemeKind::LrbfMidpoint),
            "lrbf-euler" => Ok(SchemeKind::LrbfEuler),
            "splitting" => Ok(SchemeKind::Splitting),
            "prk" => Ok(SchemeKind::Prk),
            other => Err(ConfigError::new("scheme.name", format!("unknown scheme `{other}`"))),
        }
    }

    /// Resolves the initial profile.
    pub fn profile(&self) -> Result<Profile, ConfigError> {
        Profile::from_name(&self.grid.profile)
            .ok_or_else(|| ConfigError::new("grid.profile", format!("unknown profile `{}`", self.grid.profile)))
    }

    /// Resolves the kernel kind.
    pub fn kernel_kind(&self) -> Result<KernelKind, ConfigError> {
        match self.rbf.kernel.as_str() {
            "gaussian" => Ok(KernelKind::Gaussian),
            "mq" => Ok(KernelKind::Multiquadric),
            "imq" => Ok(KernelKind::InverseMultiquadric),
            other => Err(ConfigError::new("rbf.kernel", format!("unknown kernel `{other}`"))),
        }
    }

    /// Resolves the noise basis.
    pub fn basis(&self) -> Result<SpectralBasis, ConfigError> {
        let kind = match self.noise.basis.as_str() {
            "sine-quarter" => BasisKind::SineQuarter,
            "sine-quarter-raw" => BasisKind::SineQuarterRaw,
            "sine-over-sqrt-pi" => BasisKind::SineOverSqrtPi,
            other => return Err(ConfigError::new("noise.basis", format!("unknown basis `{other}`"))),
        };
        SpectralBasis::new(kind, self.grid.x_left, self.grid.x_right, self.noise.decay, self.noise.truncation)
            .map_err(|e| ConfigError::new(format!("noise.{}", qwiener_field(&e)), e.to_string()))
    }

    /// Resolves the solver policy.
    pub fn policy(&self) -> Result<SolverPolicy, ConfigError> {
        let s = &self.solver;
        let method = match s.method.as_str() {
            "fixed-point" => SolverMethod::FixedPoint,
            "newton" => SolverMethod::NewtonKrylovFree,
            other => return Err(ConfigError::new("solver.method", format!("unknown method `{other}`"))),
        };
        positive("solver.tol", s.tol)?;
        if s.max_iter == 0 {
            return Err(ConfigError::new("solver.max_iter", "must be at least 1"));
        }
        if !(s.damping > 0.0 && s.damping <= 1.0) {
            return Err(ConfigError::new("solver.damping", "must lie in (0, 1]"));
        }
        Ok(SolverPolicy { method, tol: s.tol, max_iter: s.max_iter, damping: s.damping })
    }

    /// Checks every field the selected command uses.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.system_spec()?;
        self.scheme_kind()?;
        self.policy()?;
        if !(self.grid.x_left.is_finite() && self.grid.x_right.is_finite() && self.grid.x_left < self.grid.x_right) {
            return Err(ConfigError::new("grid.x_right", "must exceed grid.x_left"));
        }
        if self.grid.cells < 2 {
            return Err(ConfigError::new("grid.cells", "at least two intervals are required"));
        }
        let collocation = matches!(self.scheme_kind()?, SchemeKind::LrbfMidpoint | SchemeKind::LrbfEuler);
        if collocation && self.system.name == "kdv" && (self.grid.cells - 1) % 2 == 1 {
            return Err(ConfigError::new("grid.cells", "KdV collocation needs an even number of interior nodes (odd cells)"));
        }
        self.profile()?;
        self.kernel_kind()?;
        positive("rbf.shape", self.rbf.shape)?;
        positive("time.t_final", self.time.t_final)?;
        self.basis()?;
        if self.paths == 0 {
            return Err(ConfigError::new("paths", "at least one path is required"));
        }
        match self.command {
            Command::Convergence => {
                positive("time.reference_dt", self.time.reference_dt)?;
                if self.time.ladder.len() < 2 {
                    return Err(ConfigError::new("time.ladder", "at least two levels are required"));
                }
                for (i, &dt) in self.time.ladder.iter().enumerate() {
                    positive(&format!("time.ladder[{i}]"), dt)?;
                }
                if self.time.ladder.windows(2).any(|w| !(w[1] < w[0])) {
                    return Err(ConfigError::new("time.ladder", "levels must be strictly decreasing"));
                }
            }
            Command::Energy | Command::VerifyMscl | Command::SampleNoise => positive("time.dt", self.time.dt)?,
            Command::CheckTableau => positive("tableau.tol", self.tableau.tol)?,
            Command::BuildDiffop => {}
        }
        positive("verify.threshold", self.verify.threshold)?;
        Ok(())
    }
}

fn nonlinearity(path: &str, name: &str) -> Result<Nonlinearity, ConfigError> {
    Nonlinearity::from_name(name).map_err(|e| ConfigError::new(path, e.to_string()))
}

fn qwiener_field(e: &msym_core::qwiener::QWienerError) -> &'static str {
    match e {
        msym_core::qwiener::QWienerError::Config { field, .. } | msym_core::qwiener::QWienerError::Argument { field, .. } => field,
    }
}

/// Name of the `[table]` header preceding byte offset `at`.
fn enclosing_table(text: &str, at: usize) -> String {
    text[..at.min(text.len())]
        .lines()
        .rev()
        .map(str::trim)
        .find(|l| l.starts_with('[') && l.ends_with(']'))
        .map(|l| l.trim_matches(|c| c == '[' || c == ']').trim().to_string())
        .unwrap_or_default()
}

/// Extracts the offending key from a serde "unknown field" message.
fn unknown_key_path(msg: &str) -> Option<String> {
    let start = msg.find("unknown field `")? + "unknown field `".len();
    let end = msg[start..].find('`')? + start;
    Some(msg[start..end].to_string())
}
