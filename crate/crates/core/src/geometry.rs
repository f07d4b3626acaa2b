//! Discrete multi-symplectic conservation laws and the averaged energy.
//!
//! Two-forms are evaluated on explicit tangent pairs. For the collocation
//! scheme the local density at node `i` is `ω_i(ξ, η) = ξ_iᵀ M η_i` and the
//! flux between nodes `i` and `k` is `κ_ik = ξ_iᵀ K η_k − η_iᵀ K ξ_k`, taken
//! on the midpoint tangents. The conservation residual at node `i` is
//!
//! ```text
//! (ω_i^{n+1} − ω_i^n)/Δt + Σ_k d_ik κ_ik
//! ```
//!
//! and vanishes to solver accuracy for the midpoint rule. The box-scheme
//! cells use the weighted edge balances of [`crate::integrators::cell`].
//!
//! Tangents are propagated by solving the linearization of the converged
//! step with the step's own Jacobian.

use alloc::vec;
use alloc::vec::Vec;

use crate::integrators::boxscheme::{box_tangent, cell_spec, BoxGrid, BoxSolution, BoxTangent};
use crate::integrators::cell::{cell_tangent, conservation_terms, CellSolution, CellSpec, CellTableaux};
use crate::integrators::{
    lrbf_tangent, step_box, step_lrbf, CellScheme, GridState, IntegratorError, LrbfScheme, SolverPolicy,
    StepOutcome,
};
use crate::rbf::DiffOperator;
use crate::systems::{HamiltonianSystem, SystemSpec, DIM};

/// Failure of a geometric check.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeometryError {
    /// The base step or the tangent solve failed.
    #[error("step {step}: {source}")]
    Step {
        /// Index of the failing time step.
        step: usize,
        /// Underlying failure.
        source: IntegratorError,
    },
    /// No trajectories were supplied.
    #[error("energy trace needs at least one trajectory")]
    EmptyEnsemble,
    /// Trajectories of different lengths were supplied.
    #[error("trajectory {index} has {found} levels, expected {expected}")]
    Ragged {
        /// Offending trajectory.
        index: usize,
        /// Length of the first trajectory.
        expected: usize,
        /// Length of the offending trajectory.
        found: usize,
    },
    /// The energy is defined for the wave equation only.
    #[error("discrete energy is defined for the wave equation only")]
    NotWave,
}

/// Outcome of a conservation check.
#[derive(Debug, Clone, PartialEq)]
pub struct FormResidual {
    /// Scheme label.
    pub label: &'static str,
    /// Temporal difference of the density.
    pub temporal: f64,
    /// Spatial flux balance.
    pub spatial: f64,
    /// `temporal + spatial`, at the node or cell where it is largest in
    /// magnitude.
    pub residual: f64,
    /// Node or cell index of the reported terms.
    pub location: usize,
}

impl FormResidual {
    fn new(label: &'static str, temporal: f64, spatial: f64, location: usize) -> Self {
        FormResidual { label, temporal, spatial, residual: temporal + spatial, location }
    }

    /// Magnitude of the residual.
    pub fn magnitude(&self) -> f64 {
        libm::fabs(self.residual)
    }

    fn keep_larger(self, other: FormResidual) -> FormResidual {
        if other.magnitude() > self.magnitude() {
            other
        } else {
            self
        }
    }
}

/// How the collocation density is normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Normalization {
    /// `ω = ½ dz∧M dz`, so `ω(ξ, η) = ξᵀ M η`, consistent with the flux.
    #[default]
    Half,
    /// `ω = dz∧M dz`, so `ω(ξ, η) = 2 ξᵀ M η`, with the same flux.
    Unscaled,
}

/// A base state with two tangents of the same shape.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentEnsemble {
    /// Base state.
    pub base: GridState,
    /// First tangent, node-major.
    pub xi: Vec<f64>,
    /// Second tangent, node-major.
    pub eta: Vec<f64>,
}

impl TangentEnsemble {
    /// Builds an ensemble after checking the shapes.
    pub fn new(base: GridState, xi: Vec<f64>, eta: Vec<f64>) -> Result<Self, IntegratorError> {
        if xi.len() != DIM * base.len() || eta.len() != DIM * base.len() {
            return Err(IntegratorError::Argument { field: "tangent", reason: "tangent and state shapes differ" });
        }
        Ok(TangentEnsemble { base, xi, eta })
    }
}

/// One collocation step together with the propagated tangents.
#[derive(Debug, Clone, PartialEq)]
pub struct LrbfAdvance {
    /// Base step outcome.
    pub outcome: StepOutcome,
    /// Ensemble at the new level.
    pub next: TangentEnsemble,
}

/// Advances the base state and both tangents through one collocation step.
#[allow(clippy::too_many_arguments)]
pub fn propagate_tangents_lrbf(
    scheme: LrbfScheme,
    sys: &HamiltonianSystem,
    d: &DiffOperator,
    ens: &TangentEnsemble,
    dw: &[f64],
    dt: f64,
    policy: &SolverPolicy,
    step: usize,
) -> Result<LrbfAdvance, GeometryError> {
    let wrap = |source| GeometryError::Step { step, source };
    let outcome = step_lrbf(scheme, sys, &ens.base, d, dw, dt, policy).map_err(wrap)?;
    let xi = lrbf_tangent(scheme, sys, d, &ens.base, &outcome.state, dw, dt, &ens.xi).map_err(wrap)?;
    let eta = lrbf_tangent(scheme, sys, d, &ens.base, &outcome.state, dw, dt, &ens.eta).map_err(wrap)?;
    let next = TangentEnsemble { base: outcome.state.clone(), xi, eta };
    Ok(LrbfAdvance { outcome, next })
}

/// Conservation residual of one collocation step, maximized over nodes.
///
/// `before` and `after` hold the base and tangents at levels `n`, `n+1`.
pub fn mscl_residual_lrbf(
    sys: &HamiltonianSystem,
    d: &DiffOperator,
    before: &TangentEnsemble,
    after: &TangentEnsemble,
    dt: f64,
    norm: Normalization,
) -> FormResidual {
    let m = sys.m();
    let k = sys.k();
    let scale = match norm {
        Normalization::Half => 1.0,
        Normalization::Unscaled => 2.0,
    };
    let bil = |a: &[f64], mat: &[[f64; DIM]; DIM], b: &[f64]| {
        let mut s = 0.0;
        for r in 0..DIM {
            for c in 0..DIM {
                s += a[r] * mat[r][c] * b[c];
            }
        }
        s
    };
    let node = |v: &[f64], i: usize| -> [f64; DIM] { [v[DIM * i], v[DIM * i + 1], v[DIM * i + 2], v[DIM * i + 3]] };
    let mid = |a: &[f64], b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect() };
    let xh = mid(&before.xi, &after.xi);
    let eh = mid(&before.eta, &after.eta);
    let mut best = FormResidual::new(label_lrbf(), 0.0, 0.0, 0);
    for i in 0..d.dim() {
        let w1 = bil(&node(&after.xi, i), m, &node(&after.eta, i));
        let w0 = bil(&node(&before.xi, i), m, &node(&before.eta, i));
        let temporal = scale * (w1 - w0) / dt;
        let (xi_i, eh_i) = (node(&xh, i), node(&eh, i));
        let mut spatial = 0.0;
        for &(col, wgt) in d.row(i) {
            let (xi_k, eh_k) = (node(&xh, col), node(&eh, col));
            spatial += wgt * (bil(&xi_i, k, &eh_k) - bil(&eh_i, k, &xi_k));
        }
        best = best.keep_larger(FormResidual::new(label_lrbf(), temporal, spatial, i));
    }
    best
}

fn label_lrbf() -> &'static str {
    "lrbf-midpoint"
}

fn label_cell(scheme: CellScheme) -> &'static str {
    match scheme {
        CellScheme::Splitting => "splitting",
        CellScheme::Prk => "prk",
    }
}

/// Conservation residual of a solved cell for input tangents `xi`, `eta`
/// laid out as the cell inputs `[left | bottom]`.
pub fn mscl_residual_cell(
    spec: &CellSpec<'_>,
    sol: &CellSolution,
    xi: &[f64],
    eta: &[f64],
) -> Result<FormResidual, IntegratorError> {
    let ox = cell_tangent(spec, sol, xi)?;
    let oe = cell_tangent(spec, sol, eta)?;
    let (temporal, spatial) = conservation_terms(spec, xi, &ox, eta, &oe)?;
    Ok(FormResidual::new(label_cell(spec.scheme), temporal, spatial, 0))
}

/// One box step together with the edge tangents of every cell.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxAdvance {
    /// Base step outcome.
    pub outcome: StepOutcome,
    /// Global unknowns of the step.
    pub solution: BoxSolution,
    /// Edge tangents for `ξ`.
    pub xi: BoxTangent,
    /// Edge tangents for `η`.
    pub eta: BoxTangent,
}

/// Advances the base state and both tangents through one box step.
#[allow(clippy::too_many_arguments)]
pub fn propagate_tangents_box(
    sys: &HamiltonianSystem,
    scheme: CellScheme,
    tabs: &CellTableaux,
    grid: &BoxGrid,
    ens: &TangentEnsemble,
    dw: &[f64],
    dt: f64,
    policy: &SolverPolicy,
    step: usize,
) -> Result<BoxAdvance, GeometryError> {
    let wrap = |source| GeometryError::Step { step, source };
    let (outcome, solution) = step_box(sys, scheme, tabs, grid, &ens.base, dw, dt, policy).map_err(wrap)?;
    let xi = box_tangent(sys, scheme, tabs, grid, &ens.base, &solution, dw, dt, &ens.xi).map_err(wrap)?;
    let eta = box_tangent(sys, scheme, tabs, grid, &ens.base, &solution, dw, dt, &ens.eta).map_err(wrap)?;
    Ok(BoxAdvance { outcome, solution, xi, eta })
}

/// Per-cell conservation residual of a box step, maximized over cells.
#[allow(clippy::too_many_arguments)]
pub fn mscl_residual_box(
    sys: &HamiltonianSystem,
    scheme: CellScheme,
    tabs: &CellTableaux,
    grid: &BoxGrid,
    dw: &[f64],
    dt: f64,
    adv: &BoxAdvance,
) -> Result<FormResidual, IntegratorError> {
    let mut best = FormResidual::new(label_cell(scheme), 0.0, 0.0, 0);
    for j in 0..grid.cells {
        let spec = cell_spec(sys, scheme, tabs, grid, dw, dt, j);
        let (t, s) = conservation_terms(&spec, &adv.xi.inputs[j], &adv.xi.outputs[j], &adv.eta.inputs[j], &adv.eta.outputs[j])?;
        best = best.keep_larger(FormResidual::new(label_cell(scheme), t, s, j));
    }
    Ok(best)
}

/// Discrete wave energy `Δx/2 Σ (v² + w² + 2F(u))` with `F' = f`, `F(0) = 0`.
pub fn discrete_energy(sys: &HamiltonianSystem, state: &GridState, dx: f64) -> Result<f64, GeometryError> {
    let SystemSpec::Wave { f, .. } = sys.spec() else {
        return Err(GeometryError::NotWave);
    };
    let s: f64 = state.z.iter().map(|z| z[2] * z[2] + z[3] * z[3] + 2.0 * f.antideriv(z[0])).sum();
    Ok(0.5 * dx * s)
}

/// Ensemble average of per-path energy series, one value per time level.
pub fn energy_trace(paths: &[Vec<f64>]) -> Result<Vec<f64>, GeometryError> {
    let first = paths.first().ok_or(GeometryError::EmptyEnsemble)?;
    let mut acc = vec![0.0; first.len()];
    for (index, p) in paths.iter().enumerate() {
        if p.len() != first.len() {
            return Err(GeometryError::Ragged { index, expected: first.len(), found: p.len() });
        }
        for (a, v) in acc.iter_mut().zip(p) {
            *a += v;
        }
    }
    let n = paths.len() as f64;
    Ok(acc.into_iter().map(|a| a / n).collect())
}
