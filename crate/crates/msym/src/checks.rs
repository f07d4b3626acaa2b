//! Conservation-law and tableau checks driven by a config.

use msym_core::geometry::{
    mscl_residual_box, mscl_residual_cell, mscl_residual_lrbf, propagate_tangents_box, propagate_tangents_lrbf,
    FormResidual, GeometryError, Normalization, TangentEnsemble,
};
use msym_core::integrators::{
    solve_cell, CellScheme, CellSpec, CellTableaux, IntegratorError,
};
use msym_core::qwiener::mix_seed;
use msym_core::systems::{HamiltonianSystem, SystemSpec, DIM};
use msym_core::tableau::{
    check_prk_kdv, check_prk_nls, check_prk_wave, is_symplectic, ButcherTableau, ConditionReport, KdvPrkFamily,
    NlsPrkFamily, WavePrkFamily,
};

use crate::config::{ConfigError, ExperimentConfig};
use crate::mc::{Discretization, McError, Problem};

/// Uniform value in `[−½, ½)` addressed by `(seed, index)`.
pub fn uniform(seed: u64, index: u64) -> f64 {
    (mix_seed(seed, index) >> 11) as f64 / (1u64 << 53) as f64 - 0.5
}

fn uniform_vec(seed: u64, salt: u64, len: usize) -> Vec<f64> {
    let s = mix_seed(seed, salt);
    (0..len as u64).map(|i| uniform(s, i)).collect()
}

/// Failure of a check command.
#[derive(Debug, thiserror::Error)]
pub enum CheckError {
    /// Invalid configuration.
    #[error(transparent)]
    Config(#[from] ConfigError),
    /// Problem setup or noise failed.
    #[error(transparent)]
    Mc(#[from] McError),
    /// A step or tangent solve failed.
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    /// A cell solve failed.
    #[error(transparent)]
    Integrator(#[from] IntegratorError),
}

/// Residual of every checked step.
#[derive(Debug, Clone, PartialEq)]
pub struct MsclReport {
    /// One residual per step (a single entry for cell checks).
    pub residuals: Vec<FormResidual>,
}

impl MsclReport {
    /// Largest residual magnitude.
    pub fn max(&self) -> f64 {
        self.residuals.iter().map(FormResidual::magnitude).fold(0.0, f64::max)
    }
}

/// Built-in Runge–Kutta tableau by config name.
pub fn tableau_by_name(path: &str, name: &str) -> Result<ButcherTableau, ConfigError> {
    ButcherTableau::by_name(name).map_err(|e| ConfigError::new(path, e.to_string()))
}

/// Partitioned cell tableaux for `family` on `sys`.
pub fn prk_tableaux(sys: &HamiltonianSystem, family: &str) -> Result<CellTableaux, ConfigError> {
    let unknown = || ConfigError::new("scheme.family", format!("unknown family `{family}`"));
    Ok(match sys.spec() {
        SystemSpec::Wave { .. } => CellTableaux::wave_prk(&match family {
            "midpoint" => WavePrkFamily::midpoint(),
            "gauss2" => WavePrkFamily::gauss2(),
            "symplectic-euler" => WavePrkFamily::symplectic_euler(),
            "symplectic-euler-flipped" => WavePrkFamily::symplectic_euler_flipped(),
            _ => return Err(unknown()),
        }),
        SystemSpec::Nls => CellTableaux::nls_prk(&match family {
            "symplectic-euler" => NlsPrkFamily::symplectic_euler(),
            "symplectic-euler-flipped" => NlsPrkFamily::symplectic_euler_flipped(),
            name => NlsPrkFamily::uniform(ButcherTableau::by_name(name).map_err(|_| unknown())?),
        }),
        SystemSpec::Kdv { .. } => CellTableaux::kdv_prk(&match family {
            "symplectic-euler" => KdvPrkFamily::symplectic_euler(),
            "symplectic-euler-flipped" => KdvPrkFamily::symplectic_euler_flipped(),
            name => KdvPrkFamily::uniform(ButcherTableau::by_name(name).map_err(|_| unknown())?),
        }),
    })
}

/// Runs the conservation check selected by `cfg`.
pub fn verify_mscl(cfg: &ExperimentConfig) -> Result<MsclReport, CheckError> {
    let p = Problem::from_config(cfg)?;
    let seed = cfg.seed;
    let dt = cfg.time.dt;
    if cfg.scheme.cell {
        return verify_cell(cfg, &p.system, seed).map(|r| MsclReport { residuals: vec![r] });
    }
    let n = p.nodes().len();
    let steps = msym_core::qwiener::step_count(p.t_final, dt).map_err(McError::from)?;
    let field = p.field(dt, seed, 0).map_err(McError::from)?;
    let mut ens = TangentEnsemble::new(
        p.initial.clone(),
        uniform_vec(seed, 1, DIM * n),
        uniform_vec(seed, 2, DIM * n),
    )?;
    let mut residuals = Vec::with_capacity(steps);
    for step in 0..steps {
        let dw = field.step(step);
        match &p.disc {
            Discretization::Lrbf { scheme, op } => {
                let adv = propagate_tangents_lrbf(*scheme, &p.system, op, &ens, dw, dt, &p.policy, step)?;
                residuals.push(mscl_residual_lrbf(&p.system, op, &ens, &adv.next, dt, Normalization::Half));
                ens = adv.next;
            }
            Discretization::Splitting(g) | Discretization::Prk(g) => {
                let (scheme, tabs) = match &p.disc {
                    Discretization::Splitting(_) => {
                        let m = ButcherTableau::midpoint();
                        (CellScheme::Splitting, CellTableaux::splitting(&p.system, &m, &m))
                    }
                    _ => (CellScheme::Prk, prk_tableaux(&p.system, "midpoint")?),
                };
                let adv = propagate_tangents_box(&p.system, scheme, &tabs, g, &ens, dw, dt, &p.policy, step)?;
                let r = mscl_residual_box(&p.system, scheme, &tabs, g, dw, dt, &adv)
                    .map_err(|source| GeometryError::Step { step, source })?;
                residuals.push(r);
                ens = TangentEnsemble { base: adv.outcome.state, xi: adv.xi.state, eta: adv.eta.state };
            }
        }
    }
    Ok(MsclReport { residuals })
}

fn verify_cell(cfg: &ExperimentConfig, sys: &HamiltonianSystem, seed: u64) -> Result<FormResidual, CheckError> {
    let (scheme, tabs) = match cfg.scheme_kind()? {
        crate::config::SchemeKind::Prk => (CellScheme::Prk, prk_tableaux(sys, &cfg.scheme.family)?),
        _ => {
            let a = tableau_by_name("scheme.spatial", &cfg.scheme.spatial)?;
            let at = tableau_by_name("scheme.temporal", &cfg.scheme.temporal)?;
            (CellScheme::Splitting, CellTableaux::splitting(sys, &a, &at))
        }
    };
    let (s, r) = tabs.stages();
    let dw = uniform_vec(seed, 3, s);
    let dx = (cfg.grid.x_right - cfg.grid.x_left) / cfg.grid.cells as f64;
    let spec = CellSpec { system: sys, scheme, tableaux: &tabs, dx, dt: cfg.time.dt, dw: &dw };
    let (ns, nt) = (tabs.spatial.len(), tabs.temporal.len());
    let left = uniform_vec(seed, 4, ns * r);
    let bottom = uniform_vec(seed, 5, nt * s);
    let sol = solve_cell(&spec, &left, &bottom, &cfg.policy()?)?;
    let xi = uniform_vec(seed, 6, left.len() + bottom.len());
    let eta = uniform_vec(seed, 7, left.len() + bottom.len());
    Ok(mscl_residual_cell(&spec, &sol, &xi, &eta)?)
}

/// Condition report of the tableau or family selected by `cfg`.
pub fn check_tableau(cfg: &ExperimentConfig) -> Result<ConditionReport, ConfigError> {
    let t = &cfg.tableau;
    let bad_family = |e: msym_core::tableau::TableauError| ConfigError::new("tableau", e.to_string());
    let unknown = || ConfigError::new("tableau.name", format!("unknown family `{}`", t.name));
    match t.kind.as_str() {
        "rk" => {
            let tab = match (&t.a, &t.b) {
                (Some(a), Some(b)) => {
                    let rows: Vec<&[f64]> = a.iter().map(Vec::as_slice).collect();
                    ButcherTableau::new(&rows, b).map_err(|e| ConfigError::new("tableau.a", e.to_string()))?
                }
                (Some(_), None) => return Err(ConfigError::new("tableau.b", "inline weights are required with `a`")),
                (None, Some(_)) => return Err(ConfigError::new("tableau.a", "inline matrix is required with `b`")),
                (None, None) => tableau_by_name("tableau.name", &t.name)?,
            };
            Ok(is_symplectic(&tab))
        }
        "wave-prk" => {
            let f = match t.name.as_str() {
                "midpoint" => WavePrkFamily::midpoint(),
                "gauss2" => WavePrkFamily::gauss2(),
                "symplectic-euler" => WavePrkFamily::symplectic_euler(),
                "symplectic-euler-flipped" => WavePrkFamily::symplectic_euler_flipped(),
                _ => return Err(unknown()),
            };
            check_prk_wave(&f).map_err(bad_family)
        }
        "nls-prk" => {
            let f = match t.name.as_str() {
                "symplectic-euler" => NlsPrkFamily::symplectic_euler(),
                "symplectic-euler-flipped" => NlsPrkFamily::symplectic_euler_flipped(),
                name => NlsPrkFamily::uniform(ButcherTableau::by_name(name).map_err(|_| unknown())?),
            };
            check_prk_nls(&f).map_err(bad_family)
        }
        "kdv-prk" => {
            let f = match t.name.as_str() {
                "symplectic-euler" => KdvPrkFamily::symplectic_euler(),
                "symplectic-euler-flipped" => KdvPrkFamily::symplectic_euler_flipped(),
                name => KdvPrkFamily::uniform(ButcherTableau::by_name(name).map_err(|_| unknown())?),
            };
            check_prk_kdv(&f).map_err(bad_family)
        }
        other => Err(ConfigError::new("tableau.kind", format!("unknown kind `{other}`"))),
    }
}
