//! One-stage box schemes assembled over a uniform grid of cells.
//!
//! Cell `j` spans `[x_L + jΔx, x_L + (j+1)Δx]`. Its stage values sit at the
//! cell midpoint, the time-level state lives at cell midpoints too, and
//! neighbouring cells share the edge values of the spatial relations.
//! Homogeneous Dirichlet data fixes some edge values on the two boundaries:
//!
//! | system | left edge fixed | right edge fixed |
//! |--------|-----------------|------------------|
//! | wave   | `u`             | `u`              |
//! | NLS    | `p`, `q`        | `p`, `q`         |
//! | KdV    | `u`, `ρ`        | `u`, `w`         |
//!
//! Unknowns are ordered as the free left-boundary edge values followed, for
//! each cell, by its stage values and its right-edge values. Each cell
//! contributes its stage relations and its edge-output relations, and the
//! right-boundary conditions close the system. The Jacobian is banded and
//! its local blocks come from dual-number evaluation of the cell residual.
//!
//! The wave state stores `(u, 0, v, w)` where `w` is a diagnostic: nodal
//! values are rebuilt from the cell means starting at `u = 0` on the left
//! edge, and `w` is their difference quotient. With this `w` the discrete
//! energy `Δx/2 Σ (v² + w²)` is conserved exactly by the deterministic
//! step. NLS and KdV store the last stage values of their non-evolving
//! components.

use alloc::vec;
use alloc::vec::Vec;

use super::cell::{layout, CellScheme, CellSpec, CellTableaux, Dims, Layout};
use super::{check_dt, max_norm, newton, GridState, IntegratorError, SolverPolicy, StepOutcome};
use crate::linalg::BandMatrix;
use crate::scalar::{Dual, Real};
use crate::systems::{HamiltonianSystem, SystemSpec, DIM};
use crate::tableau::{ButcherTableau, WavePrkFamily};

/// Uniform grid of cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxGrid {
    /// Left end of the domain.
    pub x_left: f64,
    /// Cell width.
    pub dx: f64,
    /// Number of cells.
    pub cells: usize,
}

impl BoxGrid {
    /// Grid of `cells` cells on `[x_left, x_right]`.
    pub fn new(x_left: f64, x_right: f64, cells: usize) -> Result<Self, IntegratorError> {
        if cells == 0 || !(x_right > x_left) {
            return Err(IntegratorError::Argument { field: "grid", reason: "need at least one cell on a non-empty interval" });
        }
        Ok(BoxGrid { x_left, dx: (x_right - x_left) / cells as f64, cells })
    }

    /// Cell midpoints.
    pub fn midpoints(&self) -> Vec<f64> {
        (0..self.cells).map(|j| self.x_left + (j as f64 + 0.5) * self.dx).collect()
    }
}

/// Converged global unknowns of one box step.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxSolution {
    /// Global unknown vector.
    pub y: Vec<f64>,
}

struct Assembly<'a> {
    l: &'static Layout,
    dm: Dims,
    nb: usize,
    cells: usize,
    specs: Vec<CellSpec<'a>>,
    bottoms: Vec<[f64; 2]>,
    free_left: Vec<usize>,
}

impl<'a> Assembly<'a> {
    fn stride(&self) -> usize {
        self.dm.d + self.dm.ns
    }

    fn len(&self) -> usize {
        self.nb + self.cells * self.stride()
    }

    fn stage_base(&self, j: usize) -> usize {
        self.nb + j * self.stride()
    }

    /// Global column of edge value `q` on edge `e`, or `None` if fixed.
    fn edge_col(&self, e: usize, q: usize) -> Option<usize> {
        if e == 0 {
            self.free_left.iter().position(|&k| k == q)
        } else {
            Some(self.stage_base(e - 1) + self.dm.d + q)
        }
    }

    fn edge<T: Real>(&self, y: &[T], e: usize, q: usize) -> T {
        self.edge_col(e, q).map_or(T::cst(0.0), |c| y[c])
    }

    /// Local inputs `[left edge | bottom]` of cell `j`.
    fn inputs<T: Real>(&self, y: &[T], j: usize) -> Vec<T> {
        let mut v: Vec<T> = (0..self.dm.ns).map(|q| self.edge(y, j, q)).collect();
        v.extend(self.bottoms[j][..self.dm.nt].iter().map(|&b| T::cst(b)));
        v
    }

    /// Residual rows of cell `j`: stage relations then edge outputs.
    fn cell_rows<T: Real>(&self, j: usize, x: &[T], inp: &[T], right: &[T], out: &mut [T]) {
        let (d, ns) = (self.dm.d, self.dm.ns);
        self.specs[j].residual(&self.dm, x, inp, &mut out[..d]);
        let mut o = vec![T::cst(0.0); self.dm.inputs()];
        self.specs[j].outputs(&self.dm, x, inp, &mut o);
        for q in 0..ns {
            out[d + q] = right[q] - o[q];
        }
    }

    fn residual(&self, y: &[f64], out: &mut [f64]) {
        let (d, ns, st) = (self.dm.d, self.dm.ns, self.stride());
        for j in 0..self.cells {
            let base = self.stage_base(j);
            let inp = self.inputs::<f64>(y, j);
            let x = &y[base..base + d];
            let right = &y[base + d..base + d + ns];
            self.cell_rows(j, x, &inp, right, &mut out[j * st..(j + 1) * st]);
        }
        for (k, &q) in self.l.right_fixed.iter().enumerate() {
            out[self.cells * st + k] = self.edge(y, self.cells, q);
        }
    }

    fn bandwidths(&self) -> (usize, usize) {
        let (d, ns, nb) = (self.dm.d, self.dm.ns, self.nb);
        ((d + 2 * ns).saturating_sub(1 + nb).max(d + ns).max(2 * ns), nb + d + ns)
    }

    fn jacobian(&self, y: &[f64]) -> BandMatrix {
        let (d, ns, st) = (self.dm.d, self.dm.ns, self.stride());
        let (kl, ku) = self.bandwidths();
        let mut jm = BandMatrix::zeros(self.len(), kl, ku);
        let mut local = vec![Dual::default(); st];
        for j in 0..self.cells {
            let base = self.stage_base(j);
            let cols: Vec<Option<usize>> = (0..ns)
                .map(|q| self.edge_col(j, q))
                .chain((0..d + ns).map(|k| Some(base + k)))
                .collect();
            let mut yd: Vec<Dual> = Vec::with_capacity(cols.len());
            for c in &cols {
                yd.push(Dual::cst(c.map_or(0.0, |c| y[c])));
            }
            let bottoms: Vec<Dual> = self.bottoms[j][..self.dm.nt].iter().map(|&b| Dual::cst(b)).collect();
            for (k, col) in cols.iter().enumerate() {
                let Some(col) = *col else { continue };
                yd[k].d = 1.0;
                let inp: Vec<Dual> = yd[..ns].iter().copied().chain(bottoms.iter().copied()).collect();
                self.cell_rows(j, &yd[ns..ns + d], &inp, &yd[ns + d..], &mut local);
                yd[k].d = 0.0;
                for (r, v) in local.iter().enumerate() {
                    if v.d != 0.0 {
                        jm.add(j * st + r, col, v.d);
                    }
                }
            }
        }
        for (k, &q) in self.l.right_fixed.iter().enumerate() {
            if let Some(c) = self.edge_col(self.cells, q) {
                jm.add(self.cells * st + k, c, 1.0);
            }
        }
        jm
    }

    fn initial_guess(&self) -> Vec<f64> {
        let mut y = vec![0.0; self.len()];
        for j in 0..self.cells {
            let inp: Vec<f64> = (0..self.dm.ns).map(|_| 0.0).chain(self.bottoms[j][..self.dm.nt].iter().copied()).collect();
            let x = self.specs[j].initial_guess(&self.dm, &inp);
            let base = self.stage_base(j);
            y[base..base + self.dm.d].copy_from_slice(&x);
        }
        y
    }
}

fn build<'a>(
    sys: &'a HamiltonianSystem,
    scheme: CellScheme,
    tabs: &'a CellTableaux,
    grid: &BoxGrid,
    state: &GridState,
    dw: &'a [f64],
    dt: f64,
) -> Result<Assembly<'a>, IntegratorError> {
    check_dt(dt)?;
    if tabs.stages() != (1, 1) {
        return Err(IntegratorError::Argument { field: "tableaux", reason: "grid marching needs one-stage tableaux" });
    }
    if state.len() != grid.cells || dw.len() != grid.cells {
        return Err(IntegratorError::Argument { field: "state", reason: "state, noise and grid sizes differ" });
    }
    let l = layout(sys);
    let specs: Vec<CellSpec<'a>> = (0..grid.cells)
        .map(|j| CellSpec { system: sys, scheme, tableaux: tabs, dx: grid.dx, dt, dw: core::slice::from_ref(&dw[j]) })
        .collect();
    let dm = specs[0].dims()?;
    let bottoms = state.z.iter().map(|z| [z[l.state_comp[0]], z[l.state_comp[1]]]).collect();
    let free_left: Vec<usize> = (0..dm.ns).filter(|&q| !l.left_fixed[q]).collect();
    Ok(Assembly { l, dm, nb: free_left.len(), cells: grid.cells, specs, bottoms, free_left })
}

/// One box step with explicit scheme and one-stage tableaux.
#[allow(clippy::too_many_arguments)]
pub fn step_box(
    sys: &HamiltonianSystem,
    scheme: CellScheme,
    tabs: &CellTableaux,
    grid: &BoxGrid,
    state: &GridState,
    dw: &[f64],
    dt: f64,
    policy: &SolverPolicy,
) -> Result<(StepOutcome, BoxSolution), IntegratorError> {
    let asm = build(sys, scheme, tabs, grid, state, dw, dt)?;
    let mut y = asm.initial_guess();
    let (iterations, _) = newton(&mut y, policy, |y, r| asm.residual(y, r), |y| Ok(asm.jacobian(y).factor()?))?;
    let mut r = vec![0.0; y.len()];
    asm.residual(&y, &mut r);
    let residual = max_norm(&r);
    if !(residual <= policy.tol) {
        return Err(IntegratorError::Divergence { iterations, residual });
    }
    let next = new_state(&asm, sys, grid, state, &y, dt);
    Ok((StepOutcome { state: next, residual, iterations }, BoxSolution { y }))
}

fn new_state(asm: &Assembly<'_>, sys: &HamiltonianSystem, grid: &BoxGrid, state: &GridState, y: &[f64], dt: f64) -> GridState {
    let (d, ns) = (asm.dm.d, asm.dm.ns);
    let mut z = state.z.clone();
    let mut o = vec![0.0; asm.dm.inputs()];
    for j in 0..asm.cells {
        let base = asm.stage_base(j);
        let inp = asm.inputs::<f64>(y, j);
        let x = &y[base..base + d];
        asm.specs[j].outputs(&asm.dm, x, &inp, &mut o);
        for (q, &c) in asm.l.state_comp.iter().enumerate() {
            z[j][c] = o[ns + q];
        }
        match sys.spec() {
            SystemSpec::Wave { .. } => {}
            SystemSpec::Nls => {
                z[j][2] = x[2];
                z[j][3] = x[3];
            }
            SystemSpec::Kdv { .. } => {
                z[j][1] = x[1];
                z[j][3] = x[3];
            }
        }
    }
    if let SystemSpec::Wave { .. } = sys.spec() {
        wave_diagnostic_w(&mut z, grid.dx);
    }
    GridState::new(state.nodes.clone(), z, state.t + dt)
}

/// Rebuilds nodal `u` from cell means with `u = 0` on the left edge and
/// stores the difference quotients as `w`.
pub fn wave_diagnostic_w(z: &mut [[f64; DIM]], dx: f64) {
    let mut left = 0.0;
    for zj in z.iter_mut() {
        let right = 2.0 * zj[0] - left;
        zj[3] = (right - left) / dx;
        left = right;
    }
}

/// Splitting step with midpoint tableaux in space and time.
pub fn step_splitting(
    sys: &HamiltonianSystem,
    grid: &BoxGrid,
    state: &GridState,
    dw: &[f64],
    dt: f64,
    policy: &SolverPolicy,
) -> Result<StepOutcome, IntegratorError> {
    let m = ButcherTableau::midpoint();
    let tabs = CellTableaux::splitting(sys, &m, &m);
    Ok(step_box(sys, CellScheme::Splitting, &tabs, grid, state, dw, dt, policy)?.0)
}

/// Partitioned step for the wave equation with every tableau equal to the
/// midpoint rule.
pub fn step_prk(
    sys: &HamiltonianSystem,
    grid: &BoxGrid,
    state: &GridState,
    dw: &[f64],
    dt: f64,
    policy: &SolverPolicy,
) -> Result<StepOutcome, IntegratorError> {
    if !matches!(sys.spec(), SystemSpec::Wave { .. }) {
        return Err(IntegratorError::Argument { field: "system", reason: "grid marching of the partitioned scheme is implemented for the wave equation only" });
    }
    let tabs = CellTableaux::wave_prk(&WavePrkFamily::midpoint());
    Ok(step_box(sys, CellScheme::Prk, &tabs, grid, state, dw, dt, policy)?.0)
}

/// Edge tangents of every cell after a converged box step.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxTangent {
    /// Per cell, `[left | bottom]` tangent.
    pub inputs: Vec<Vec<f64>>,
    /// Per cell, `[right | top]` tangent.
    pub outputs: Vec<Vec<f64>>,
    /// Tangent of the new time level, node-major; only the evolving
    /// components are populated.
    pub state: Vec<f64>,
}

/// Propagates a state tangent `xi` (node-major, four per cell) through a
/// converged box step.
#[allow(clippy::too_many_arguments)]
pub fn box_tangent(
    sys: &HamiltonianSystem,
    scheme: CellScheme,
    tabs: &CellTableaux,
    grid: &BoxGrid,
    prev: &GridState,
    sol: &BoxSolution,
    dw: &[f64],
    dt: f64,
    xi: &[f64],
) -> Result<BoxTangent, IntegratorError> {
    let asm = build(sys, scheme, tabs, grid, prev, dw, dt)?;
    if xi.len() != DIM * grid.cells || sol.y.len() != asm.len() {
        return Err(IntegratorError::Argument { field: "tangent", reason: "tangent and grid sizes differ" });
    }
    let (d, ns, nt, st) = (asm.dm.d, asm.dm.ns, asm.dm.nt, asm.stride());
    let xb: Vec<Vec<f64>> = (0..grid.cells).map(|j| asm.l.state_comp.iter().map(|&c| xi[DIM * j + c]).collect()).collect();
    // Right-hand side −(∂R/∂bottom) ξ, one dual evaluation per cell.
    let yd: Vec<Dual> = sol.y.iter().map(|&v| Dual::cst(v)).collect();
    let mut rhs = vec![0.0; asm.len()];
    let mut local = vec![Dual::default(); st];
    for j in 0..grid.cells {
        let base = asm.stage_base(j);
        let mut inp = asm.inputs::<Dual>(&yd, j);
        for q in 0..nt {
            inp[ns + q].d = xb[j][q];
        }
        asm.cell_rows(j, &yd[base..base + d], &inp, &yd[base + d..base + d + ns], &mut local);
        for (r, v) in local.iter().enumerate() {
            rhs[j * st + r] = -v.d;
        }
    }
    asm.jacobian(&sol.y).factor()?.solve(&mut rhs)?;
    let dy = rhs;
    let mut state = vec![0.0; DIM * grid.cells];
    let mut inputs = Vec::with_capacity(grid.cells);
    let mut outputs = Vec::with_capacity(grid.cells);
    let ydual: Vec<Dual> = sol.y.iter().zip(&dy).map(|(&v, &t)| Dual::new(v, t)).collect();
    for j in 0..grid.cells {
        let base = asm.stage_base(j);
        let mut inp = asm.inputs::<Dual>(&ydual, j);
        for q in 0..nt {
            inp[ns + q].d = xb[j][q];
        }
        let mut o = vec![Dual::default(); asm.dm.inputs()];
        asm.specs[j].outputs(&asm.dm, &ydual[base..base + d], &inp, &mut o);
        for (q, &c) in asm.l.state_comp.iter().enumerate() {
            state[DIM * j + c] = o[ns + q].d;
        }
        inputs.push(inp.iter().map(|v| v.d).collect());
        outputs.push(o.iter().map(|v| v.d).collect());
    }
    Ok(BoxTangent { inputs, outputs, state })
}

/// Cell specification of cell `j` of a box step, for conservation checks.
pub(crate) fn cell_spec<'a>(
    sys: &'a HamiltonianSystem,
    scheme: CellScheme,
    tabs: &'a CellTableaux,
    grid: &BoxGrid,
    dw: &'a [f64],
    dt: f64,
    j: usize,
) -> CellSpec<'a> {
    CellSpec { system: sys, scheme, tableaux: tabs, dx: grid.dx, dt, dw: core::slice::from_ref(&dw[j]) }
}
