//! Time integrators on full space-time grids and single cells.
//!
//! * [`step_lrbf_midpoint`] advances the collocation semi-discretization
//!   with the implicit midpoint rule.
//! * [`step_splitting`] and [`step_prk`] advance the one-stage box schemes,
//!   which are assembled from the cell relations of [`cell`] across a
//!   uniform grid of cells.
//! * [`solve_cell`] solves one space-time cell at arbitrary stage counts.

use alloc::vec::Vec;

use crate::linalg::LinalgError;
use crate::rbf::RbfError;
use crate::systems::DIM;

pub mod boxscheme;
pub mod cell;
pub mod lrbf;

pub use boxscheme::{box_tangent, step_box, step_prk, step_splitting, BoxGrid, BoxSolution, BoxTangent};
pub use cell::{cell_tangent, solve_cell, CellScheme, CellSolution, CellSpec, CellTableaux};
pub use lrbf::{
    lrbf_tangent, step_lrbf, step_lrbf_midpoint, step_lrbf_midpoint_generic, LrbfScheme,
};

/// Failure of a time step.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum IntegratorError {
    /// The nonlinear iteration did not reach the tolerance.
    #[error("nonlinear solver did not converge in {iterations} iterations (residual {residual:.3e})")]
    Divergence {
        /// Iterations performed.
        iterations: usize,
        /// Max-norm residual of the last iterate.
        residual: f64,
    },
    /// A non-finite value appeared.
    #[error("numerical blow-up: non-finite value after {iterations} iterations")]
    BlowUp {
        /// Iterations performed before detection.
        iterations: usize,
    },
    /// A linear solve failed.
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    /// The stencil operator could not be built.
    #[error(transparent)]
    Rbf(#[from] RbfError),
    /// Invalid input.
    #[error("invalid argument `{field}`: {reason}")]
    Argument {
        /// Name of the offending argument.
        field: &'static str,
        /// Human-readable explanation.
        reason: &'static str,
    },
}

/// State `z` at every node of a grid at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct GridState {
    /// Node coordinates. Interior nodes for the collocation scheme, cell
    /// midpoints for the box schemes.
    pub nodes: Vec<f64>,
    /// State per node.
    pub z: Vec<[f64; DIM]>,
    /// Current time.
    pub t: f64,
}

impl GridState {
    /// Builds a state.
    ///
    /// # Panics
    /// Panics if `nodes` and `z` differ in length.
    pub fn new(nodes: Vec<f64>, z: Vec<[f64; DIM]>, t: f64) -> Self {
        assert_eq!(nodes.len(), z.len(), "one state per node is required");
        GridState { nodes, z, t }
    }

    /// Number of nodes.
    pub fn len(&self) -> usize {
        self.z.len()
    }

    /// Whether the grid has no nodes.
    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    /// Copy of component `c` as a node vector.
    pub fn component(&self, c: usize) -> Vec<f64> {
        self.z.iter().map(|z| z[c]).collect()
    }

    /// Node-major flattening, index `4i + c`.
    pub fn flat(&self) -> Vec<f64> {
        self.z.iter().flat_map(|z| z.iter().copied()).collect()
    }

    /// Replaces the state from a node-major vector.
    pub fn set_flat(&mut self, v: &[f64]) {
        for (i, z) in self.z.iter_mut().enumerate() {
            z.copy_from_slice(&v[DIM * i..DIM * i + DIM]);
        }
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.z.iter().flat_map(|z| z.iter()).fold(0.0, |a, &b| a.max(libm::fabs(b)))
    }
}

/// Nonlinear iteration used by every implicit step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverMethod {
    /// Simplified Newton: the Jacobian at the initial guess is factored
    /// once per step and reused, with optional damping. It is refreshed
    /// only if the residual stops decreasing.
    FixedPoint,
    /// Full Newton with a fresh direct banded factorization every iteration.
    NewtonKrylovFree,
}

/// Nonlinear solver settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverPolicy {
    /// Iteration kind.
    pub method: SolverMethod,
    /// Max-norm residual tolerance.
    pub tol: f64,
    /// Iteration cap.
    pub max_iter: usize,
    /// Update damping in `(0, 1]`.
    pub damping: f64,
}

impl Default for SolverPolicy {
    fn default() -> Self {
        SolverPolicy { method: SolverMethod::FixedPoint, tol: 1e-12, max_iter: 100, damping: 1.0 }
    }
}

impl SolverPolicy {
    /// Checks the invariants `tol > 0`, `max_iter ≥ 1`, `0 < damping ≤ 1`.
    pub fn validate(&self) -> Result<(), IntegratorError> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(IntegratorError::Argument { field: "solver.tol", reason: "tolerance must be positive" });
        }
        if self.max_iter == 0 {
            return Err(IntegratorError::Argument { field: "solver.max_iter", reason: "at least one iteration is required" });
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(IntegratorError::Argument { field: "solver.damping", reason: "damping must lie in (0, 1]" });
        }
        Ok(())
    }
}

/// Result of one converged step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    /// New time level.
    pub state: GridState,
    /// Max-norm residual of the full discrete system, recomputed after the
    /// solve.
    pub residual: f64,
    /// Nonlinear iterations used.
    pub iterations: usize,
}

pub(crate) fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, &b| if b.is_nan() { f64::NAN } else { a.max(libm::fabs(b)) })
}

pub(crate) fn check_dt(dt: f64) -> Result<(), IntegratorError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(IntegratorError::Argument { field: "dt", reason: "time step must be positive" });
    }
    Ok(())
}

/// Generic simplified/full Newton driver.
///
/// `residual(y, out)` fills the residual; `factor(y)` returns a solver for
/// the Jacobian at `y`. Returns the number of iterations and the final
/// residual norm.
pub(crate) fn newton<F, J, S>(
    y: &mut [f64],
    policy: &SolverPolicy,
    mut residual: F,
    mut factor: J,
) -> Result<(usize, f64), IntegratorError>
where
    F: FnMut(&[f64], &mut [f64]),
    J: FnMut(&[f64]) -> Result<S, IntegratorError>,
    S: LinearSolve,
{
    policy.validate()?;
    let n = y.len();
    let mut r = alloc::vec![0.0; n];
    let mut lu: Option<S> = None;
    let mut last = f64::INFINITY;
    for it in 0..=policy.max_iter {
        residual(y, &mut r);
        let rn = max_norm(&r);
        if rn.is_nan() || y.iter().any(|v| !v.is_finite()) {
            return Err(IntegratorError::BlowUp { iterations: it });
        }
        if rn <= policy.tol {
            return Ok((it, rn));
        }
        if it == policy.max_iter {
            return Err(IntegratorError::Divergence { iterations: it, residual: rn });
        }
        let refresh = match policy.method {
            SolverMethod::NewtonKrylovFree => true,
            SolverMethod::FixedPoint => lu.is_none() || rn > 0.5 * last,
        };
        if refresh {
            lu = Some(factor(y)?);
        }
        last = rn;
        if let Some(s) = lu.as_ref() {
            s.solve_in_place(&mut r)?;
        }
        for (yi, di) in y.iter_mut().zip(&r) {
            *yi -= policy.damping * di;
        }
    }
    unreachable!("loop returns on its last iteration")
}

/// Factored linear operator usable by [`newton`].
pub(crate) trait LinearSolve {
    fn solve_in_place(&self, b: &mut [f64]) -> Result<(), IntegratorError>;
}

impl LinearSolve for crate::linalg::BandLu {
    fn solve_in_place(&self, b: &mut [f64]) -> Result<(), IntegratorError> {
        Ok(self.solve(b)?)
    }
}

impl LinearSolve for crate::linalg::DenseLu {
    fn solve_in_place(&self, b: &mut [f64]) -> Result<(), IntegratorError> {
        Ok(self.solve(b)?)
    }
}
