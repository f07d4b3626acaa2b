//! Collocation midpoint scheme `M (Zⁿ⁺¹ − Zⁿ)/Δt + K D Z^{n+½} = ∇S₁ + ∇S₂ ΔW/Δt`.
//!
//! The unknown of the generic solve is the midpoint `Y = Z^{n+½}`. In
//! node-major ordering (`4i + c`) the residual
//!
//! ```text
//! R(Y) = 2M(Y − Zⁿ) + Δt (K ⊗ D) Y − Δt ∇S₁(Y) − ΔW ∇S₂(Y)
//! ```
//!
//! has a band Jacobian with eleven sub- and super-diagonals for five-point
//! stencils. `Zⁿ⁺¹ = 2Y − Zⁿ`. Rows with vanishing `M` and `K` rows (the
//! wave placeholder `p`) are replaced by `Y_p = Z_p`.
//!
//! For the wave equation the system collapses to one scalar unknown per
//! node, `U = Y_u`, solving
//!
//! ```text
//! (4/Δt²)(U − Zu) − (2/Δt) Zv − D²U + f(U) − (ΔW/Δt) g(U) = 0,
//! ```
//!
//! after which `Y_v = 2(U − Zu)/Δt` and `Y_w = DU`. The generic residual is
//! always recomputed on the result.
//!
//! For KdV the potential `ρ` enters only through `Dρ`. A centred first
//! derivative operator is close to skew-symmetric, hence close to singular
//! on an odd number of interior nodes, so KdV grids need an even count.

use alloc::vec;
use alloc::vec::Vec;

use super::{check_dt, max_norm, newton, GridState, IntegratorError, SolverPolicy, StepOutcome};
use crate::linalg::BandMatrix;
use crate::rbf::DiffOperator;
use crate::systems::{HamiltonianSystem, Mat4, SystemSpec, DIM};

/// Time discretization paired with the collocation operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LrbfScheme {
    /// Implicit midpoint rule.
    Midpoint,
    /// Explicit Euler on evolution rows, with constraint rows imposed at
    /// the new level. Not multi-symplectic; used as a negative control.
    ExplicitEuler,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum RowKind {
    Evolution,
    Constraint,
    Placeholder,
}

fn row_kinds(sys: &HamiltonianSystem) -> [RowKind; DIM] {
    let mut out = [RowKind::Evolution; DIM];
    for (c, o) in out.iter_mut().enumerate() {
        let m_zero = sys.m()[c].iter().all(|&x| x == 0.0);
        let k_zero = sys.k()[c].iter().all(|&x| x == 0.0);
        *o = match (m_zero, k_zero) {
            (false, _) => RowKind::Evolution,
            (true, false) => RowKind::Constraint,
            (true, true) => RowKind::Placeholder,
        };
    }
    out
}

/// `(K ⊗ D) y` in node-major ordering.
fn kd_apply(sys: &HamiltonianSystem, d: &DiffOperator, y: &[f64]) -> Vec<f64> {
    let n = d.dim();
    let k = sys.k();
    let mut dy = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    for c in 0..DIM {
        if (0..DIM).all(|r| k[r][c] == 0.0) {
            continue;
        }
        for (i, row) in (0..n).map(|i| (i, d.row(i))) {
            dy[c][i] = row.iter().map(|&(j, w)| w * y[DIM * j + c]).sum();
        }
    }
    let mut out = vec![0.0; DIM * n];
    for i in 0..n {
        for r in 0..DIM {
            out[DIM * i + r] = (0..DIM).map(|c| k[r][c] * dy[c][i]).sum();
        }
    }
    out
}

fn node(v: &[f64], i: usize) -> [f64; DIM] {
    [v[DIM * i], v[DIM * i + 1], v[DIM * i + 2], v[DIM * i + 3]]
}

fn mat_vec(m: &Mat4, x: &[f64; DIM]) -> [f64; DIM] {
    let mut out = [0.0; DIM];
    for (r, o) in out.iter_mut().enumerate() {
        *o = (0..DIM).map(|c| m[r][c] * x[c]).sum();
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn residual(
    scheme: LrbfScheme,
    sys: &HamiltonianSystem,
    d: &DiffOperator,
    z: &[f64],
    y: &[f64],
    dw: &[f64],
    dt: f64,
    out: &mut [f64],
) {
    let kinds = row_kinds(sys);
    let m = sys.m();
    let n = d.dim();
    let kd_y = kd_apply(sys, d, y);
    let kd_z = if scheme == LrbfScheme::ExplicitEuler { kd_apply(sys, d, z) } else { Vec::new() };
    for i in 0..n {
        let (zi, yi) = (node(z, i), node(y, i));
        let diff: [f64; DIM] = core::array::from_fn(|c| yi[c] - zi[c]);
        let m_diff = mat_vec(m, &diff);
        let (g1y, g2y) = (sys.grad_s1(&yi), sys.grad_s2(&yi));
        for c in 0..DIM {
            let idx = DIM * i + c;
            out[idx] = match (kinds[c], scheme) {
                (RowKind::Placeholder, _) => diff[c],
                (_, LrbfScheme::Midpoint) => 2.0 * m_diff[c] + dt * kd_y[idx] - dt * g1y[c] - dw[i] * g2y[c],
                (RowKind::Constraint, LrbfScheme::ExplicitEuler) => dt * kd_y[idx] - dt * g1y[c] - dw[i] * g2y[c],
                (RowKind::Evolution, LrbfScheme::ExplicitEuler) => {
                    let (g1z, g2z) = (sys.grad_s1(&zi), sys.grad_s2(&zi));
                    m_diff[c] + dt * kd_z[idx] - dt * g1z[c] - dw[i] * g2z[c]
                }
            };
        }
    }
}

fn band_width(d: &DiffOperator) -> usize {
    let (kl, ku) = d.bandwidths();
    DIM * kl.max(ku) + DIM - 1
}

/// `dt (K ⊗ D) − dt H₁(x) − ΔW H₂(x)` restricted to the selected rows, plus
/// `mscale · M` on evolution rows and identity on placeholder rows.
#[allow(clippy::too_many_arguments)]
fn jacobian(
    sys: &HamiltonianSystem,
    d: &DiffOperator,
    x: &[f64],
    dw: &[f64],
    dt: f64,
    mscale: f64,
    local_rows: &[bool; DIM],
) -> BandMatrix {
    let kinds = row_kinds(sys);
    let n = d.dim();
    let w = band_width(d);
    let mut j = BandMatrix::zeros(DIM * n, w, w);
    let (m, k) = (sys.m(), sys.k());
    for i in 0..n {
        let xi = node(x, i);
        let (h1, h2) = (sys.hess_s1(&xi), sys.hess_s2(&xi));
        for r in 0..DIM {
            let row = DIM * i + r;
            if kinds[r] == RowKind::Placeholder {
                j.set(row, row, 1.0);
                continue;
            }
            if kinds[r] == RowKind::Evolution && mscale != 0.0 {
                for c in 0..DIM {
                    if m[r][c] != 0.0 {
                        j.add(row, DIM * i + c, mscale * m[r][c]);
                    }
                }
            }
            if !local_rows[r] {
                continue;
            }
            for c in 0..DIM {
                let h = -dt * h1[r][c] - dw[i] * h2[r][c];
                if h != 0.0 {
                    j.add(row, DIM * i + c, h);
                }
                if k[r][c] != 0.0 {
                    for &(col, wt) in d.row(i) {
                        j.add(row, DIM * col + c, dt * k[r][c] * wt);
                    }
                }
            }
        }
    }
    j
}

fn jacobian_unknown(
    scheme: LrbfScheme,
    sys: &HamiltonianSystem,
    d: &DiffOperator,
    y: &[f64],
    dw: &[f64],
    dt: f64,
) -> BandMatrix {
    match scheme {
        LrbfScheme::Midpoint => jacobian(sys, d, y, dw, dt, 2.0, &[true; DIM]),
        LrbfScheme::ExplicitEuler => {
            let kinds = row_kinds(sys);
            let cons: [bool; DIM] = core::array::from_fn(|c| kinds[c] == RowKind::Constraint);
            jacobian(sys, d, y, dw, dt, 1.0, &cons)
        }
    }
}

/// `−(∂R/∂Zⁿ) ξ`.
fn prev_rhs(
    scheme: LrbfScheme,
    sys: &HamiltonianSystem,
    d: &DiffOperator,
    z: &[f64],
    dw: &[f64],
    dt: f64,
    xi: &[f64],
) -> Vec<f64> {
    let kinds = row_kinds(sys);
    let n = d.dim();
    let mut out = vec![0.0; DIM * n];
    match scheme {
        LrbfScheme::Midpoint => {
            for i in 0..n {
                let mx = mat_vec(sys.m(), &node(xi, i));
                for c in 0..DIM {
                    out[DIM * i + c] = if kinds[c] == RowKind::Placeholder { xi[DIM * i + c] } else { 2.0 * mx[c] };
                }
            }
        }
        LrbfScheme::ExplicitEuler => {
            let evo: [bool; DIM] = core::array::from_fn(|c| kinds[c] == RowKind::Evolution);
            let j = jacobian(sys, d, z, dw, dt, -1.0, &evo);
            let mut tmp = vec![0.0; DIM * n];
            j.mul_vec(xi, &mut tmp).expect("lengths agree by construction");
            for i in 0..n {
                for c in 0..DIM {
                    let idx = DIM * i + c;
                    out[idx] = match kinds[c] {
                        RowKind::Evolution => -tmp[idx],
                        RowKind::Constraint => 0.0,
                        RowKind::Placeholder => xi[idx],
                    };
                }
            }
        }
    }
    out
}

/// Explicit Euler leaves the KdV auxiliary `v` without an equation: it
/// enters only the evolution rows, which are evaluated at the old level.
fn check_scheme(scheme: LrbfScheme, sys: &HamiltonianSystem) -> Result<(), IntegratorError> {
    if scheme == LrbfScheme::ExplicitEuler && matches!(sys.spec(), SystemSpec::Kdv { .. }) {
        return Err(IntegratorError::Argument { field: "scheme", reason: "explicit Euler is undetermined for the KdV system" });
    }
    Ok(())
}

fn check_sizes(state: &GridState, d: &DiffOperator, dw: &[f64]) -> Result<(), IntegratorError> {
    if state.len() != d.dim() {
        return Err(IntegratorError::Argument { field: "state", reason: "state and operator sizes differ" });
    }
    if dw.len() != d.dim() {
        return Err(IntegratorError::Argument { field: "dw", reason: "noise and operator sizes differ" });
    }
    Ok(())
}

/// One step of the chosen scheme through the generic four-component solve.
pub fn step_lrbf(
    scheme: LrbfScheme,
    sys: &HamiltonianSystem,
    state: &GridState,
    d: &DiffOperator,
    dw: &[f64],
    dt: f64,
    policy: &SolverPolicy,
) -> Result<StepOutcome, IntegratorError> {
    check_dt(dt)?;
    check_scheme(scheme, sys)?;
    check_sizes(state, d, dw)?;
    let z = state.flat();
    let mut y = z.clone();
    let (iterations, _) = newton(
        &mut y,
        policy,
        |y, r| residual(scheme, sys, d, &z, y, dw, dt, r),
        |y| Ok(jacobian_unknown(scheme, sys, d, y, dw, dt).factor()?),
    )?;
    finish(scheme, sys, state, d, dw, dt, policy, &z, &y, iterations)
}

#[allow(clippy::too_many_arguments)]
fn finish(
    scheme: LrbfScheme,
    sys: &HamiltonianSystem,
    state: &GridState,
    d: &DiffOperator,
    dw: &[f64],
    dt: f64,
    policy: &SolverPolicy,
    z: &[f64],
    y: &[f64],
    iterations: usize,
) -> Result<StepOutcome, IntegratorError> {
    let mut r = vec![0.0; z.len()];
    residual(scheme, sys, d, z, y, dw, dt, &mut r);
    let rn = max_norm(&r);
    if rn.is_nan() {
        return Err(IntegratorError::BlowUp { iterations });
    }
    if rn > policy.tol {
        return Err(IntegratorError::Divergence { iterations, residual: rn });
    }
    let next: Vec<f64> = match scheme {
        LrbfScheme::Midpoint => y.iter().zip(z).map(|(y, z)| 2.0 * y - z).collect(),
        LrbfScheme::ExplicitEuler => y.to_vec(),
    };
    let mut out = GridState::new(state.nodes.clone(), state.z.clone(), state.t + dt);
    out.set_flat(&next);
    Ok(StepOutcome { state: out, residual: rn, iterations })
}

/// Midpoint step through the generic four-component solve.
pub fn step_lrbf_midpoint_generic(
    sys: &HamiltonianSystem,
    state: &GridState,
    d: &DiffOperator,
    dw: &[f64],
    dt: f64,
    policy: &SolverPolicy,
) -> Result<StepOutcome, IntegratorError> {
    step_lrbf(LrbfScheme::Midpoint, sys, state, d, dw, dt, policy)
}

/// Midpoint step. The wave equation uses the reduced scalar solve; the
/// other systems use the generic solve. Either way the reported residual is
/// that of the full four-component system.
pub fn step_lrbf_midpoint(
    sys: &HamiltonianSystem,
    state: &GridState,
    d: &DiffOperator,
    dw: &[f64],
    dt: f64,
    policy: &SolverPolicy,
) -> Result<StepOutcome, IntegratorError> {
    let SystemSpec::Wave { f, g } = sys.spec() else {
        return step_lrbf_midpoint_generic(sys, state, d, dw, dt, policy);
    };
    check_dt(dt)?;
    check_sizes(state, d, dw)?;
    let n = d.dim();
    let zu = state.component(0);
    let zv = state.component(2);
    let d2 = d.square_band();
    let (a, b) = (4.0 / (dt * dt), 2.0 / dt);
    let d2u = |u: &[f64]| {
        let mut out = vec![0.0; n];
        d2.mul_vec(u, &mut out).expect("lengths agree by construction");
        out
    };
    let mut u = zu.clone();
    let inner = SolverPolicy { tol: 0.5 * policy.tol / dt, ..*policy };
    let (iterations, _) = newton(
        &mut u,
        &inner,
        |u, r| {
            let lap = d2u(u);
            for i in 0..n {
                r[i] = a * (u[i] - zu[i]) - b * zv[i] - lap[i] + f.eval(u[i]) - dw[i] / dt * g.eval(u[i]);
            }
        },
        |u| {
            let (kl, ku) = (d2.lower_bandwidth(), d2.upper_bandwidth());
            let mut j = BandMatrix::zeros(n, kl, ku);
            for i in 0..n {
                for c in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                    j.set(i, c, -d2.get(i, c));
                }
                j.add(i, i, a + f.deriv(u[i]) - dw[i] / dt * g.deriv(u[i]));
            }
            Ok(j.factor()?)
        },
    )?;
    let du = d.apply_vec(&u)?;
    let z = state.flat();
    let mut y = z.clone();
    for i in 0..n {
        y[DIM * i] = u[i];
        y[DIM * i + 2] = b * (u[i] - zu[i]);
        y[DIM * i + 3] = du[i];
    }
    finish(LrbfScheme::Midpoint, sys, state, d, dw, dt, policy, &z, &y, iterations)
}

/// Propagates a tangent `ξ` (node-major) through a converged step from
/// `prev` to `next`.
#[allow(clippy::too_many_arguments)]
pub fn lrbf_tangent(
    scheme: LrbfScheme,
    sys: &HamiltonianSystem,
    d: &DiffOperator,
    prev: &GridState,
    next: &GridState,
    dw: &[f64],
    dt: f64,
    xi: &[f64],
) -> Result<Vec<f64>, IntegratorError> {
    check_scheme(scheme, sys)?;
    check_sizes(prev, d, dw)?;
    if xi.len() != DIM * d.dim() {
        return Err(IntegratorError::Argument { field: "tangent", reason: "tangent and state sizes differ" });
    }
    let z = prev.flat();
    let z1 = next.flat();
    let y: Vec<f64> = match scheme {
        LrbfScheme::Midpoint => z.iter().zip(&z1).map(|(a, b)| 0.5 * (a + b)).collect(),
        LrbfScheme::ExplicitEuler => z1,
    };
    let lu = jacobian_unknown(scheme, sys, d, &y, dw, dt).factor()?;
    let mut rhs = prev_rhs(scheme, sys, d, &z, dw, dt, xi);
    lu.solve(&mut rhs)?;
    Ok(match scheme {
        LrbfScheme::Midpoint => rhs.iter().zip(xi).map(|(h, x)| 2.0 * h - x).collect(),
        LrbfScheme::ExplicitEuler => rhs,
    })
}
