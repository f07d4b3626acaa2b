//! Monte Carlo error ladders and energy traces.
//!
//! Each path draws one noise field at the reference step from the seed
//! `mix_seed(seed, path)`. Coarser levels sum consecutive fine increments,
//! so every level of a path sees the same Brownian motion. Paths run in
//! parallel and are reduced in path order, which makes the results
//! independent of the worker count.

use rayon::prelude::*;

use msym_core::geometry::{discrete_energy, energy_trace, GeometryError};
use msym_core::integrators::{
    step_lrbf, step_lrbf_midpoint, step_prk, step_splitting, BoxGrid, GridState, IntegratorError, LrbfScheme,
    SolverPolicy, StepOutcome,
};
use msym_core::qwiener::{mix_seed, step_count, QWienerError, QWienerField, SpectralBasis};
use msym_core::rbf::{BoundaryRule, DiffOperator, Kernel, RbfError};
use msym_core::systems::{initial_data, make_system, HamiltonianSystem, SystemError, SystemSpec};

use crate::config::{ConfigError, ExperimentConfig, SchemeKind};

/// Failure of a Monte Carlo run.
#[derive(Debug, thiserror::Error)]
pub enum McError {
    /// Invalid configuration.
    #[error(transparent)]
    Config(#[from] ConfigError),
    /// A trajectory failed.
    #[error("path {path}, dt = {dt}: {source}")]
    Trajectory {
        /// Path index.
        path: usize,
        /// Time step of the failing level.
        dt: f64,
        /// Underlying failure.
        source: IntegratorError,
    },
    /// Noise generation failed.
    #[error(transparent)]
    Noise(#[from] QWienerError),
    /// Energy evaluation failed.
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    /// Too few usable points for a fit.
    #[error("fit needs at least two finite positive points, got {0}")]
    Fit(usize),
    /// The worker pool could not be built.
    #[error("thread pool: {0}")]
    Pool(String),
}

impl From<SystemError> for McError {
    fn from(e: SystemError) -> Self {
        McError::Config(ConfigError::new("system", e.to_string()))
    }
}

impl From<RbfError> for McError {
    fn from(e: RbfError) -> Self {
        McError::Config(ConfigError::new("rbf", e.to_string()))
    }
}

/// Spatial discretization of a problem.
#[derive(Debug, Clone)]
pub enum Discretization {
    /// Collocation on interior nodes.
    Lrbf {
        /// Time rule.
        scheme: LrbfScheme,
        /// First-derivative operator.
        op: DiffOperator,
    },
    /// Box splitting scheme on cell midpoints.
    Splitting(BoxGrid),
    /// Partitioned box scheme on cell midpoints.
    Prk(BoxGrid),
}

impl Discretization {
    /// Short scheme name.
    pub fn label(&self) -> &'static str {
        match self {
            Discretization::Lrbf { scheme: LrbfScheme::Midpoint, .. } => "lrbf-midpoint",
            Discretization::Lrbf { .. } => "lrbf-euler",
            Discretization::Splitting(_) => "splitting",
            Discretization::Prk(_) => "prk",
        }
    }
}

/// Case label such as `wave(sin,u3)`.
fn case_label(system: &HamiltonianSystem) -> String {
    match system.spec() {
        SystemSpec::Wave { f, g } => format!("wave({},{})", f.name(), g.name()),
        SystemSpec::Nls => "nls".into(),
        SystemSpec::Kdv { beta, lambda } => format!("kdv(beta={beta},lambda={lambda})"),
    }
}

/// Everything needed to march one trajectory.
#[derive(Debug, Clone)]
pub struct Problem {
    /// The PDE.
    pub system: HamiltonianSystem,
    /// Spatial scheme.
    pub disc: Discretization,
    /// Initial state.
    pub initial: GridState,
    /// Noise basis.
    pub basis: SpectralBasis,
    /// Nonlinear solver settings.
    pub policy: SolverPolicy,
    /// Final time.
    pub t_final: f64,
    /// Quadrature weight of the discrete L² norm.
    pub dx: f64,
}

impl Problem {
    /// Builds the problem described by a config.
    pub fn from_config(cfg: &ExperimentConfig) -> Result<Self, McError> {
        let system = make_system(cfg.system_spec()?)?;
        let (xl, xr, cells) = (cfg.grid.x_left, cfg.grid.x_right, cfg.grid.cells);
        let profile = cfg.profile()?;
        let box_grid = || {
            BoxGrid::new(xl, xr, cells).map_err(|e| McError::Config(ConfigError::new("grid", e.to_string())))
        };
        let disc = match cfg.scheme_kind()? {
            SchemeKind::LrbfMidpoint | SchemeKind::LrbfEuler => {
                let h = (xr - xl) / cells as f64;
                let full: Vec<f64> = (0..=cells).map(|j| xl + j as f64 * h).collect();
                let kernel = Kernel::new(cfg.kernel_kind()?, cfg.rbf.shape)?;
                let op = DiffOperator::assemble(&kernel, &full, cfg.rbf.stencil, 1, BoundaryRule::HomogeneousDirichlet)?;
                let scheme = if cfg.scheme_kind()? == SchemeKind::LrbfEuler {
                    LrbfScheme::ExplicitEuler
                } else {
                    LrbfScheme::Midpoint
                };
                Discretization::Lrbf { scheme, op }
            }
            SchemeKind::Splitting => Discretization::Splitting(box_grid()?),
            SchemeKind::Prk => Discretization::Prk(box_grid()?),
        };
        let nodes = nodes_of(&disc, xl, xr, cells);
        let initial = initial_data(&system, profile, &nodes, xl);
        Ok(Problem {
            system,
            disc,
            initial,
            basis: cfg.basis()?,
            policy: cfg.policy()?,
            t_final: cfg.time.t_final,
            dx: (xr - xl) / cells as f64,
        })
    }

    /// Nodes carrying the state and the noise.
    pub fn nodes(&self) -> &[f64] {
        &self.initial.nodes
    }

    /// One step.
    pub fn step(&self, state: &GridState, dw: &[f64], dt: f64) -> Result<StepOutcome, IntegratorError> {
        match &self.disc {
            Discretization::Lrbf { scheme: LrbfScheme::Midpoint, op } => {
                step_lrbf_midpoint(&self.system, state, op, dw, dt, &self.policy)
            }
            Discretization::Lrbf { scheme, op } => step_lrbf(*scheme, &self.system, state, op, dw, dt, &self.policy),
            Discretization::Splitting(g) => step_splitting(&self.system, g, state, dw, dt, &self.policy),
            Discretization::Prk(g) => step_prk(&self.system, g, state, dw, dt, &self.policy),
        }
    }

    /// Marches through every step of `field`, calling `visit` on each level
    /// including the initial one.
    pub fn march(
        &self,
        field: &QWienerField,
        mut visit: impl FnMut(&GridState),
    ) -> Result<GridState, IntegratorError> {
        let mut state = self.initial.clone();
        visit(&state);
        for n in 0..field.steps() {
            state = self.step(&state, field.step(n), field.dt())?.state;
            if state.max_abs().is_nan() || !state.max_abs().is_finite() {
                return Err(IntegratorError::BlowUp { iterations: n });
            }
            visit(&state);
        }
        Ok(state)
    }

    /// Noise field of one path at step `dt`.
    pub fn field(&self, dt: f64, seed: u64, path: usize) -> Result<QWienerField, QWienerError> {
        QWienerField::sample(&self.basis, self.nodes(), self.t_final, dt, mix_seed(seed, path as u64))
    }
}

fn nodes_of(disc: &Discretization, xl: f64, xr: f64, cells: usize) -> Vec<f64> {
    match disc {
        Discretization::Lrbf { .. } => {
            let h = (xr - xl) / cells as f64;
            (1..cells).map(|j| xl + j as f64 * h).collect()
        }
        Discretization::Splitting(g) | Discretization::Prk(g) => g.midpoints(),
    }
}

/// One level of an error ladder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LadderLevel {
    /// Time step.
    pub dt: f64,
    /// Root-mean-square L² error of `u` at the final time.
    pub error: f64,
    /// Standard error of `error`.
    pub stderr: f64,
}

/// Least-squares order fit on log₂–log₂ points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderFit {
    /// Fitted slope.
    pub slope: f64,
    /// Fitted intercept.
    pub intercept: f64,
    /// Standard error of the slope (zero for two points).
    pub stderr: f64,
    /// Root-mean-square residual of the fit.
    pub residual: f64,
}

/// Result of [`run_ladder`].
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorLadder {
    /// Scheme label.
    pub scheme: String,
    /// Case label.
    pub case: String,
    /// Levels, coarse to fine.
    pub levels: Vec<LadderLevel>,
    /// Number of paths.
    pub paths: usize,
    /// Order fit, absent when the errors vanish.
    pub fit: Option<OrderFit>,
}

/// Ratio `coarse / fine` as a power of two.
fn coupling_factor(coarse: f64, fine: f64) -> Result<usize, ConfigError> {
    let r = coarse / fine;
    let k = r.round();
    if !(k >= 1.0 && (r - k).abs() <= 1e-9 * r && (k as usize).is_power_of_two()) {
        return Err(ConfigError::new("time.ladder", format!("{coarse} is not a power-of-two multiple of the reference step {fine}")));
    }
    Ok(k as usize)
}

/// Runs the workload on `threads` workers, or on the global pool.
pub fn with_threads<T: Send>(threads: Option<usize>, job: impl FnOnce() -> T + Send) -> Result<T, McError> {
    match threads {
        None => Ok(job()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build().map_err(|e| McError::Pool(e.to_string()))?;
            Ok(pool.install(job))
        }
    }
}

/// Per-path squared errors at every level.
fn path_errors(p: &Problem, ladder: &[(f64, usize)], reference_dt: f64, seed: u64, path: usize) -> Result<Vec<f64>, McError> {
    let fine = p.field(reference_dt, seed, path)?;
    let trajectory = |field: &QWienerField, dt: f64| {
        p.march(field, |_| {}).map_err(|source| McError::Trajectory { path, dt, source })
    };
    let reference = trajectory(&fine, reference_dt)?;
    let mut out = Vec::with_capacity(ladder.len());
    for &(dt, factor) in ladder {
        let coarse = if factor == 1 { fine.clone() } else { fine.coarsen(factor)? };
        let approx = trajectory(&coarse, dt)?;
        let e: f64 = reference.z.iter().zip(&approx.z).map(|(a, b)| (a[0] - b[0]) * (a[0] - b[0])).sum();
        out.push(p.dx * e);
    }
    Ok(out)
}

/// Mean-square error ladder against the same scheme at `reference_dt`.
pub fn run_ladder(
    p: &Problem,
    ladder: &[f64],
    reference_dt: f64,
    paths: usize,
    seed: u64,
    threads: Option<usize>,
) -> Result<ErrorLadder, McError> {
    step_count(p.t_final, reference_dt)?;
    let levels: Vec<(f64, usize)> =
        ladder.iter().map(|&dt| Ok((dt, coupling_factor(dt, reference_dt)?))).collect::<Result<_, ConfigError>>()?;
    let per_path: Vec<Result<Vec<f64>, McError>> = with_threads(threads, || {
        (0..paths).into_par_iter().map(|path| path_errors(p, &levels, reference_dt, seed, path)).collect()
    })?;
    let mut sq = Vec::with_capacity(paths);
    for r in per_path {
        sq.push(r?);
    }
    let n = paths as f64;
    let levels: Vec<LadderLevel> = levels
        .iter()
        .enumerate()
        .map(|(l, &(dt, _))| {
            let mean = sq.iter().map(|v| v[l]).sum::<f64>() / n;
            let var = if paths > 1 { sq.iter().map(|v| (v[l] - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
            let error = mean.sqrt();
            let se_mean = (var / n).sqrt();
            let stderr = if error > 0.0 { se_mean / (2.0 * error) } else { 0.0 };
            LadderLevel { dt, error, stderr }
        })
        .collect();
    let points: Vec<(f64, f64)> = levels.iter().map(|l| (l.dt, l.error)).collect();
    let fit = fit_order(&points).ok();
    Ok(ErrorLadder { scheme: p.disc.label().into(), case: case_label(&p.system), levels, paths, fit })
}

/// Least-squares slope of `log₂ error` against `log₂ dt`.
///
/// Points with non-positive or non-finite values are skipped.
pub fn fit_order(points: &[(f64, f64)]) -> Result<OrderFit, McError> {
    let xy: Vec<(f64, f64)> = points
        .iter()
        .filter(|(h, e)| h.is_finite() && e.is_finite() && *h > 0.0 && *e > 0.0)
        .map(|&(h, e)| (h.log2(), e.log2()))
        .collect();
    if xy.len() < 2 {
        return Err(McError::Fit(xy.len()));
    }
    let line = fit_line(&xy);
    let m = xy.len() as f64;
    let ssr: f64 = xy.iter().map(|&(x, y)| (y - line.intercept - line.slope * x).powi(2)).sum();
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / m;
    let sxx: f64 = xy.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let stderr = if xy.len() > 2 { (ssr / (m - 2.0)).sqrt() / sxx.sqrt() } else { 0.0 };
    Ok(OrderFit { slope: line.slope, intercept: line.intercept, stderr, residual: (ssr / m).sqrt() })
}

/// Straight-line least-squares fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    /// Slope.
    pub slope: f64,
    /// Intercept.
    pub intercept: f64,
    /// Coefficient of determination; 1 when the data are constant.
    pub r2: f64,
}

/// Ordinary least squares of `y` on `x`.
pub fn fit_line(xy: &[(f64, f64)]) -> LineFit {
    let m = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / m;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = xy.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let sst: f64 = xy.iter().map(|p| (p.1 - my).powi(2)).sum();
    let ssr: f64 = xy.iter().map(|&(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let r2 = if sst > 0.0 { 1.0 - ssr / sst } else { 1.0 };
    LineFit { slope, intercept, r2 }
}

/// Averaged wave energy per time level.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyRun {
    /// Times.
    pub t: Vec<f64>,
    /// Ensemble-averaged energy.
    pub energy: Vec<f64>,
    /// Linear fit of energy against time.
    pub fit: LineFit,
    /// Number of paths.
    pub paths: usize,
}

/// Ensemble average of the discrete energy along `paths` trajectories
/// with step `dt`.
pub fn run_energy(p: &Problem, dt: f64, paths: usize, seed: u64, threads: Option<usize>) -> Result<EnergyRun, McError> {
    let steps = step_count(p.t_final, dt)?;
    let one = |path: usize| -> Result<Vec<f64>, McError> {
        let field = p.field(dt, seed, path)?;
        let mut series = Vec::with_capacity(steps + 1);
        let mut bad = None;
        p.march(&field, |s| match discrete_energy(&p.system, s, p.dx) {
            Ok(e) => series.push(e),
            Err(e) => bad = Some(e),
        })
        .map_err(|source| McError::Trajectory { path, dt, source })?;
        if let Some(e) = bad {
            return Err(e.into());
        }
        Ok(series)
    };
    let per_path: Vec<Result<Vec<f64>, McError>> = with_threads(threads, || (0..paths).into_par_iter().map(one).collect())?;
    let series = per_path.into_iter().collect::<Result<Vec<_>, _>>()?;
    let energy = energy_trace(&series)?;
    let t: Vec<f64> = (0..energy.len()).map(|n| n as f64 * dt).collect();
    let xy: Vec<(f64, f64)> = t.iter().copied().zip(energy.iter().copied()).collect();
    Ok(EnergyRun { fit: fit_line(&xy), t, energy, paths })
}
