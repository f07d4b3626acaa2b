//! One space-time cell of the Runge–Kutta box schemes at arbitrary stage
//! counts.
//!
//! A cell has `s` spatial and `r` temporal stages. Stage values carry the
//! system's stage components, for the wave equation `(U, V, 𝒲, G)` with
//! `G = δₓ𝒲`. Two kinds of relation tie them to the cell edges.
//!
//! * Spatial: `X_c[i][m] = x_c(left)[m] + Δx Σ_j a_{ij} X_e[j][m]`, and the
//!   right edge is `x_c(right)[m] = x_c(left)[m] + Δx Σ_i b_i X_e[i][m]`.
//! * Temporal: `X_c[i][m] = x_c(bottom)[i] + Δt Σ_n ã_{nm} F(X[i][n])
//!   + ΔW_i Σ_n ā_{nm} G(X[i][n])`, with the top edge built from `b̃`, `b̄`.
//!
//! Temporal tableaux act column-wise (`ã_{nm}`), which is the convention
//! under which the partitioned conditions of [`crate::tableau`] imply the
//! discrete conservation law. Symmetric tableaux such as the midpoint rule
//! are unaffected.
//!
//! In the splitting scheme the stage noise is absent and an exact or
//! symplectic-Euler noise map acts on the top edge afterwards.
//!
//! The residual and the edge outputs are generic over [`Real`], so dual
//! numbers give the Newton Jacobian and the tangent map.

use alloc::vec;
use alloc::vec::Vec;

use super::{max_norm, newton, IntegratorError, SolverPolicy};
use crate::linalg::DenseLu;
use crate::scalar::{Dual, Real};
use crate::systems::{HamiltonianSystem, SystemSpec};
use crate::tableau::{ButcherTableau, KdvPrkFamily, NlsPrkFamily, WavePrkFamily};

/// Which family of cell scheme is used.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellScheme {
    /// Deterministic Runge–Kutta box step followed by a noise map.
    Splitting,
    /// Partitioned Runge–Kutta with the noise inside the stages.
    Prk,
}

/// How the stage components of a system are wired.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Layout {
    /// Stage components per stage point.
    pub d: usize,
    /// Spatial relations `(component, derivative component)`.
    pub spatial: &'static [(usize, usize)],
    /// Temporal relations, by component.
    pub temporal: &'static [usize],
    /// Spatial relation whose weights enter the conservation law.
    pub weight_spatial: usize,
    /// Temporal relation whose weights enter the conservation law.
    pub weight_temporal: usize,
    /// State component carried by each temporal relation on a grid.
    pub state_comp: &'static [usize],
    /// Spatial relations whose left-boundary value is zero.
    pub left_fixed: &'static [bool],
    /// Spatial relations whose right-boundary value is zero.
    pub right_fixed: &'static [usize],
}

const WAVE: Layout = Layout {
    d: 4,
    spatial: &[(0, 2), (2, 3)],
    temporal: &[0, 1],
    weight_spatial: 1,
    weight_temporal: 1,
    state_comp: &[0, 2],
    left_fixed: &[true, false],
    right_fixed: &[0],
};

const NLS: Layout = Layout {
    d: 6,
    spatial: &[(2, 4), (3, 5), (0, 2), (1, 3)],
    temporal: &[1, 0],
    weight_spatial: 0,
    weight_temporal: 0,
    state_comp: &[1, 0],
    left_fixed: &[false, false, true, true],
    right_fixed: &[2, 3],
};

const KDV: Layout = Layout {
    d: 6,
    spatial: &[(0, 3), (2, 0), (1, 4), (3, 5)],
    temporal: &[0, 2],
    weight_spatial: 1,
    weight_temporal: 1,
    state_comp: &[0, 2],
    left_fixed: &[true, true, false, false],
    right_fixed: &[0, 3],
};

pub(crate) fn layout(sys: &HamiltonianSystem) -> &'static Layout {
    match sys.spec() {
        SystemSpec::Wave { .. } => &WAVE,
        SystemSpec::Nls => &NLS,
        SystemSpec::Kdv { .. } => &KDV,
    }
}

/// Drift of temporal relation `q` at one stage point.
#[inline]
fn drift<T: Real>(sys: &HamiltonianSystem, q: usize, x: &[T]) -> T {
    match sys.spec() {
        SystemSpec::Wave { f, .. } => {
            if q == 0 {
                x[1]
            } else {
                x[3] - f.eval(x[0])
            }
        }
        SystemSpec::Nls => {
            let r = x[0] * x[0] + x[1] * x[1];
            if q == 0 {
                x[4] + r * x[0]
            } else {
                -x[5] - r * x[1]
            }
        }
        SystemSpec::Kdv { beta, .. } => {
            if q == 0 {
                T::cst(-2.0) * x[4]
            } else {
                T::cst(-2.0 * beta) * x[5] + T::cst(2.0) * x[1] - x[0] * x[0]
            }
        }
    }
}

/// Noise coefficient of temporal relation `q` at one stage point.
#[inline]
fn noise<T: Real>(sys: &HamiltonianSystem, q: usize, x: &[T]) -> T {
    match sys.spec() {
        SystemSpec::Wave { g, .. } => {
            if q == 0 {
                T::cst(0.0)
            } else {
                g.eval(x[0])
            }
        }
        SystemSpec::Nls => {
            if q == 0 {
                -x[0]
            } else {
                x[1]
            }
        }
        SystemSpec::Kdv { lambda, .. } => {
            if q == 0 {
                T::cst(2.0 * lambda)
            } else {
                T::cst(0.0)
            }
        }
    }
}

/// Tableaux for every relation of a cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellTableaux {
    /// One tableau per spatial relation.
    pub spatial: Vec<ButcherTableau>,
    /// One tableau per temporal relation.
    pub temporal: Vec<ButcherTableau>,
    /// One noise tableau per temporal relation.
    pub noise: Vec<ButcherTableau>,
}

impl CellTableaux {
    /// Splitting scheme: one spatial and one temporal tableau for all
    /// relations.
    pub fn splitting(sys: &HamiltonianSystem, spatial: &ButcherTableau, temporal: &ButcherTableau) -> Self {
        let l = layout(sys);
        CellTableaux {
            spatial: vec![spatial.clone(); l.spatial.len()],
            temporal: vec![temporal.clone(); l.temporal.len()],
            noise: vec![temporal.clone(); l.temporal.len()],
        }
    }

    /// Partitioned scheme for the wave equation.
    pub fn wave_prk(f: &WavePrkFamily) -> Self {
        CellTableaux {
            spatial: vec![f.a1.clone(), f.a2.clone()],
            temporal: vec![f.at1.clone(), f.at2.clone()],
            noise: vec![f.abar.clone(), f.abar.clone()],
        }
    }

    /// Partitioned scheme for the Schrödinger equation.
    pub fn nls_prk(f: &NlsPrkFamily) -> Self {
        CellTableaux {
            spatial: vec![f.a1.clone(), f.a2.clone(), f.a3.clone(), f.a4.clone()],
            temporal: vec![f.at1.clone(), f.at2.clone()],
            noise: vec![f.abar1.clone(), f.abar2.clone()],
        }
    }

    /// Partitioned scheme for the KdV equation.
    pub fn kdv_prk(f: &KdvPrkFamily) -> Self {
        CellTableaux {
            spatial: vec![f.a1.clone(), f.a2.clone(), f.a3.clone(), f.a4.clone()],
            temporal: vec![f.at1.clone(), f.at2.clone()],
            noise: vec![f.abar.clone(), f.abar.clone()],
        }
    }

    /// Spatial and temporal stage counts `(s, r)`.
    pub fn stages(&self) -> (usize, usize) {
        (
            self.spatial.first().map_or(0, |t| t.stages()),
            self.temporal.first().map_or(0, |t| t.stages()),
        )
    }

    fn validate(&self, l: &Layout) -> Result<(usize, usize), IntegratorError> {
        let bad = |reason| Err(IntegratorError::Argument { field: "tableaux", reason });
        if self.spatial.len() != l.spatial.len() || self.temporal.len() != l.temporal.len() || self.noise.len() != l.temporal.len() {
            return bad("one tableau per relation is required");
        }
        let (s, r) = self.stages();
        if s == 0 || r == 0 {
            return bad("stage counts must be positive");
        }
        if self.spatial.iter().any(|t| t.stages() != s) {
            return bad("spatial tableaux must share one stage count");
        }
        if self.temporal.iter().chain(&self.noise).any(|t| t.stages() != r) {
            return bad("temporal tableaux must share one stage count");
        }
        Ok((s, r))
    }
}

/// Everything that defines one cell problem apart from its edge data.
#[derive(Debug, Clone)]
pub struct CellSpec<'a> {
    /// System being discretized.
    pub system: &'a HamiltonianSystem,
    /// Scheme family.
    pub scheme: CellScheme,
    /// Tableaux per relation.
    pub tableaux: &'a CellTableaux,
    /// Cell width.
    pub dx: f64,
    /// Cell duration.
    pub dt: f64,
    /// Noise increment at each spatial stage point.
    pub dw: &'a [f64],
}

/// Shape summary of a validated cell.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Dims {
    pub s: usize,
    pub r: usize,
    pub d: usize,
    pub ns: usize,
    pub nt: usize,
}

impl Dims {
    /// Length of `[left | bottom]`.
    pub fn inputs(&self) -> usize {
        self.ns * self.r + self.nt * self.s
    }
    /// Number of stage unknowns.
    pub fn unknowns(&self) -> usize {
        self.s * self.r * self.d
    }
}

impl CellSpec<'_> {
    pub(crate) fn dims(&self) -> Result<Dims, IntegratorError> {
        let l = layout(self.system);
        let (s, r) = self.tableaux.validate(l)?;
        if self.dw.len() != s {
            return Err(IntegratorError::Argument { field: "dw", reason: "one noise increment per spatial stage is required" });
        }
        if !(self.dx > 0.0 && self.dt > 0.0) {
            return Err(IntegratorError::Argument { field: "cell", reason: "cell sizes must be positive" });
        }
        Ok(Dims { s, r, d: l.d, ns: l.spatial.len(), nt: l.temporal.len() })
    }

    /// Cell residual, one row per stage relation.
    pub(crate) fn residual<T: Real>(&self, dm: &Dims, x: &[T], inp: &[T], out: &mut [T]) {
        let l = layout(self.system);
        let Dims { s, r, d, ns, nt } = *dm;
        let (dx, dt) = (T::cst(self.dx), T::cst(self.dt));
        let prk = self.scheme == CellScheme::Prk;
        let at = |i: usize, m: usize| &x[(i * r + m) * d..(i * r + m + 1) * d];
        let mut fq = vec![T::cst(0.0); nt * s * r];
        let mut gq = vec![T::cst(0.0); nt * s * r];
        for q in 0..nt {
            for i in 0..s {
                for n in 0..r {
                    fq[(q * s + i) * r + n] = drift(self.system, q, at(i, n));
                    if prk {
                        gq[(q * s + i) * r + n] = noise(self.system, q, at(i, n));
                    }
                }
            }
        }
        for i in 0..s {
            for m in 0..r {
                let row = (i * r + m) * d;
                for (q, &(c, e)) in l.spatial.iter().enumerate() {
                    let a = &self.tableaux.spatial[q];
                    let mut acc = T::cst(0.0);
                    for j in 0..s {
                        acc += T::cst(a.a(i, j)) * at(j, m)[e];
                    }
                    out[row + q] = at(i, m)[c] - inp[q * r + m] - dx * acc;
                }
                for (q, &c) in l.temporal.iter().enumerate() {
                    let (a, ab) = (&self.tableaux.temporal[q], &self.tableaux.noise[q]);
                    let mut acc = T::cst(0.0);
                    let mut accn = T::cst(0.0);
                    for n in 0..r {
                        acc += T::cst(a.a(n, m)) * fq[(q * s + i) * r + n];
                        if prk {
                            accn += T::cst(ab.a(n, m)) * gq[(q * s + i) * r + n];
                        }
                    }
                    let bottom = inp[ns * r + q * s + i];
                    out[row + ns + q] = at(i, m)[c] - bottom - dt * acc - T::cst(self.dw[i]) * accn;
                }
            }
        }
    }

    /// Edge outputs `[right | top]`, including the splitting noise map.
    pub(crate) fn outputs<T: Real>(&self, dm: &Dims, x: &[T], inp: &[T], out: &mut [T]) {
        let l = layout(self.system);
        let Dims { s, r, d, ns, nt } = *dm;
        let (dx, dt) = (T::cst(self.dx), T::cst(self.dt));
        let prk = self.scheme == CellScheme::Prk;
        let at = |i: usize, m: usize| &x[(i * r + m) * d..(i * r + m + 1) * d];
        for (q, &(_, e)) in l.spatial.iter().enumerate() {
            let b = &self.tableaux.spatial[q];
            for m in 0..r {
                let mut acc = T::cst(0.0);
                for i in 0..s {
                    acc += T::cst(b.b(i)) * at(i, m)[e];
                }
                out[q * r + m] = inp[q * r + m] + dx * acc;
            }
        }
        for q in 0..nt {
            let (bt, bb) = (&self.tableaux.temporal[q], &self.tableaux.noise[q]);
            for i in 0..s {
                let mut acc = T::cst(0.0);
                let mut accn = T::cst(0.0);
                for m in 0..r {
                    acc += T::cst(bt.b(m)) * drift(self.system, q, at(i, m));
                    if prk {
                        accn += T::cst(bb.b(m)) * noise(self.system, q, at(i, m));
                    }
                }
                let k = ns * r + q * s + i;
                out[k] = inp[k] + dt * acc + T::cst(self.dw[i]) * accn;
            }
        }
        if !prk {
            for i in 0..s {
                let top = |q: usize| ns * r + q * s + i;
                let dw = T::cst(self.dw[i]);
                match self.system.spec() {
                    SystemSpec::Wave { g, .. } => {
                        let u = out[top(0)];
                        out[top(1)] += g.eval(u) * dw;
                    }
                    SystemSpec::Nls => {
                        let (qb, pb) = (out[top(0)], out[top(1)]);
                        let qn = qb - pb * dw;
                        out[top(0)] = qn;
                        out[top(1)] = pb + qn * dw;
                    }
                    SystemSpec::Kdv { lambda, .. } => {
                        out[top(0)] += T::cst(2.0 * lambda) * dw;
                    }
                }
            }
        }
    }

    /// Dense Jacobian of the residual with respect to the stage unknowns.
    pub(crate) fn jacobian(&self, dm: &Dims, x: &[f64], inp: &[f64]) -> Vec<f64> {
        let n = dm.unknowns();
        let inp_d: Vec<Dual> = inp.iter().map(|&v| Dual::cst(v)).collect();
        let mut xd: Vec<Dual> = x.iter().map(|&v| Dual::cst(v)).collect();
        let mut col = vec![Dual::default(); n];
        let mut jac = vec![0.0; n * n];
        for j in 0..n {
            xd[j].d = 1.0;
            self.residual(dm, &xd, &inp_d, &mut col);
            xd[j].d = 0.0;
            for (i, c) in col.iter().enumerate() {
                jac[i * n + j] = c.d;
            }
        }
        jac
    }

    /// Initial guess: temporal components from the bottom edge, spatial
    /// components from the left edge, zero otherwise.
    pub(crate) fn initial_guess(&self, dm: &Dims, inp: &[f64]) -> Vec<f64> {
        let l = layout(self.system);
        let Dims { s, r, d, ns, .. } = *dm;
        let mut x = vec![0.0; dm.unknowns()];
        for i in 0..s {
            for m in 0..r {
                let base = (i * r + m) * d;
                for (q, &(c, _)) in l.spatial.iter().enumerate() {
                    x[base + c] = inp[q * r + m];
                }
                for (q, &c) in l.temporal.iter().enumerate() {
                    x[base + c] = inp[ns * r + q * s + i];
                }
            }
        }
        x
    }
}

/// Solved cell: stage values and the opposite edges.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSolution {
    /// Stage values, index `((i r) + m) d + c`.
    pub stages: Vec<f64>,
    /// Edge inputs `[left | bottom]` the cell was solved with.
    pub inputs: Vec<f64>,
    /// Edge outputs `[right | top]`.
    pub outputs: Vec<f64>,
    /// Max-norm residual of the cell equations, recomputed after the solve.
    pub residual: f64,
    /// Newton iterations used.
    pub iterations: usize,
}

/// Solves the cell equations for given left-edge (`left[q][m]`, flattened
/// as `q r + m`) and bottom-edge (`bottom[q][i]`, flattened as `q s + i`)
/// values.
pub fn solve_cell(
    spec: &CellSpec<'_>,
    left: &[f64],
    bottom: &[f64],
    policy: &SolverPolicy,
) -> Result<CellSolution, IntegratorError> {
    let dm = spec.dims()?;
    if left.len() != dm.ns * dm.r || bottom.len() != dm.nt * dm.s {
        return Err(IntegratorError::Argument { field: "edges", reason: "edge data do not match the stage counts" });
    }
    let inp: Vec<f64> = left.iter().chain(bottom).copied().collect();
    let mut x = spec.initial_guess(&dm, &inp);
    let n = dm.unknowns();
    let (iterations, _) = newton(
        &mut x,
        policy,
        |x, r| spec.residual(&dm, x, &inp, r),
        |x| Ok(DenseLu::factor(n, &spec.jacobian(&dm, x, &inp))?),
    )?;
    let mut r = vec![0.0; n];
    spec.residual(&dm, &x, &inp, &mut r);
    let residual = max_norm(&r);
    if !(residual <= policy.tol) {
        return Err(IntegratorError::Divergence { iterations, residual });
    }
    let mut outputs = vec![0.0; dm.inputs()];
    spec.outputs(&dm, &x, &inp, &mut outputs);
    Ok(CellSolution { stages: x, inputs: inp, outputs, residual, iterations })
}

/// Tangent of the edge outputs for an input tangent `xi_in` (same layout as
/// [`CellSolution::inputs`]).
pub fn cell_tangent(spec: &CellSpec<'_>, sol: &CellSolution, xi_in: &[f64]) -> Result<Vec<f64>, IntegratorError> {
    let dm = spec.dims()?;
    if xi_in.len() != dm.inputs() {
        return Err(IntegratorError::Argument { field: "tangent", reason: "tangent does not match the edge layout" });
    }
    let n = dm.unknowns();
    let inp_d: Vec<Dual> = sol.inputs.iter().zip(xi_in).map(|(&v, &d)| Dual::new(v, d)).collect();
    let xd: Vec<Dual> = sol.stages.iter().map(|&v| Dual::cst(v)).collect();
    let mut rd = vec![Dual::default(); n];
    spec.residual(&dm, &xd, &inp_d, &mut rd);
    let mut dx: Vec<f64> = rd.iter().map(|r| -r.d).collect();
    DenseLu::factor(n, &spec.jacobian(&dm, &sol.stages, &sol.inputs))?.solve(&mut dx)?;
    let xt: Vec<Dual> = sol.stages.iter().zip(&dx).map(|(&v, &d)| Dual::new(v, d)).collect();
    let mut od = vec![Dual::default(); dm.inputs()];
    spec.outputs(&dm, &xt, &inp_d, &mut od);
    Ok(od.iter().map(|o| o.d).collect())
}

/// Temporal and spatial terms of the discrete conservation law of a cell.
///
/// `ix`, `ox` are input and output tangents for `ξ`; `ie`, `oe` for `η`.
pub(crate) fn conservation_terms(
    spec: &CellSpec<'_>,
    ix: &[f64],
    ox: &[f64],
    ie: &[f64],
    oe: &[f64],
) -> Result<(f64, f64), IntegratorError> {
    let dm = spec.dims()?;
    let l = layout(spec.system);
    let Dims { s, r, ns, .. } = dm;
    let wb = spec.tableaux.spatial[l.weight_spatial].weights();
    let wt = spec.tableaux.temporal[l.weight_temporal].weights();
    // Two-form a∧b evaluated on (ξ, η) for edge quantities at flat indices.
    let wedge = |x: &[f64], e: &[f64], a: usize, b: usize| x[a] * e[b] - e[a] * x[b];
    let top = |q: usize, i: usize| ns * r + q * s + i;
    let side = |q: usize, m: usize| q * r + m;
    let diff = |a: usize, b: usize| wedge(ox, oe, a, b) - wedge(ix, ie, a, b);
    let (dx, dt) = (spec.dx, spec.dt);
    let mut temporal = 0.0;
    let mut spatial = 0.0;
    match spec.system.spec() {
        SystemSpec::Wave { .. } => {
            for (i, w) in wb.iter().enumerate() {
                temporal += w / dt * diff(top(0, i), top(1, i));
            }
            for (m, w) in wt.iter().enumerate() {
                spatial -= w / dx * diff(side(0, m), side(1, m));
            }
        }
        SystemSpec::Nls => {
            for (i, w) in wb.iter().enumerate() {
                temporal += w / dt * diff(top(0, i), top(1, i));
            }
            for (m, w) in wt.iter().enumerate() {
                spatial += w / dx * (diff(side(2, m), side(0, m)) + diff(side(3, m), side(1, m)));
            }
        }
        SystemSpec::Kdv { beta, .. } => {
            for (i, w) in wb.iter().enumerate() {
                temporal += w / dt * diff(top(1, i), top(0, i));
            }
            for (m, w) in wt.iter().enumerate() {
                spatial += 2.0 * w / dx * (diff(side(1, m), side(2, m)) + beta * diff(side(3, m), side(0, m)));
            }
        }
    }
    Ok((temporal, spatial))
}
