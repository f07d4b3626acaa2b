//! Local radial-basis-function derivative stencils.
//!
//! Each interior node `x_i` interpolates on its influence domain, the `n_i`
//! nearest nodes, with a radial kernel `φ`. Differentiating the interpolant
//! at the center gives a weight row `φ′ · Φ⁻¹`. Stacking the rows yields the
//! banded operator [`DiffOperator`] that approximates `∂ₓ` on interior nodes.
//!
//! Near the boundary the nearest-node search runs on the grid extended by
//! ghost nodes at the edge spacing. Ghost nodes are then discarded, so the
//! stencils shrink to one-sided shapes. The boundary nodes themselves stay
//! in the interpolation; their columns are dropped from the operator because
//! the Dirichlet data there is zero.
//!
//! Gram matrices of smooth kernels are badly conditioned (about 7e11 for the
//! finest grid used in the experiments), so they are factored in
//! double-double arithmetic. Weights are rounded to `f64` only at the end.

use alloc::vec;
use alloc::vec::Vec;

use crate::dd::Dd;
use crate::linalg::{BandMatrix, DenseLuDd, LinalgError};

/// Largest accepted 1-norm condition number of a local Gram matrix.
pub const CONDITION_LIMIT: f64 = 1e12;

/// Errors raised while building stencils.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RbfError {
    /// The local Gram matrix is too ill-conditioned to trust.
    #[error("Gram matrix at node {node} is ill-conditioned (condition {condition:.3e} > {CONDITION_LIMIT:e})")]
    Conditioning {
        /// Grid index of the stencil center.
        node: usize,
        /// Computed 1-norm condition number (infinite if singular).
        condition: f64,
    },
    /// Only first derivatives are supported.
    #[error("derivative order {0} is not supported; only order 1 is implemented")]
    UnsupportedOrder(usize),
    /// Grid or stencil parameters are invalid.
    #[error("invalid argument `{field}`: {reason}")]
    Argument {
        /// Name of the offending argument.
        field: &'static str,
        /// Human-readable explanation.
        reason: &'static str,
    },
    /// Operand length mismatch in [`DiffOperator::apply`].
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Radial kernel family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    /// `exp(−c²r²)`.
    Gaussian,
    /// `√(r² + c²)`.
    Multiquadric,
    /// `1/√(r² + c²)`.
    InverseMultiquadric,
}

/// Radial kernel with shape parameter `c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kernel {
    /// Kernel family.
    pub kind: KernelKind,
    /// Shape parameter `c > 0`.
    pub shape: f64,
}

impl Kernel {
    /// Builds a kernel, rejecting non-positive shapes.
    pub fn new(kind: KernelKind, shape: f64) -> Result<Kernel, RbfError> {
        if !(shape.is_finite() && shape > 0.0) {
            return Err(RbfError::Argument { field: "shape", reason: "shape parameter must be positive" });
        }
        Ok(Kernel { kind, shape })
    }

    /// `φ(r)` as a function of the signed offset `s = x − y`.
    pub fn phi(&self, s: f64) -> f64 {
        self.phi_dd(Dd::from_f64(s)).to_f64()
    }

    /// `d/dx φ(|x − y|)` at the signed offset `s = x − y`.
    pub fn dphi(&self, s: f64) -> f64 {
        self.dphi_dd(Dd::from_f64(s)).to_f64()
    }

    fn phi_dd(&self, s: Dd) -> Dd {
        let c = Dd::from_f64(self.shape);
        match self.kind {
            KernelKind::Gaussian => (-(c * c * s * s)).exp(),
            KernelKind::Multiquadric => (s * s + c * c).sqrt(),
            KernelKind::InverseMultiquadric => (s * s + c * c).sqrt().recip(),
        }
    }

    fn dphi_dd(&self, s: Dd) -> Dd {
        let c = Dd::from_f64(self.shape);
        match self.kind {
            KernelKind::Gaussian => Dd::from_f64(-2.0) * c * c * s * (-(c * c * s * s)).exp(),
            KernelKind::Multiquadric => s / (s * s + c * c).sqrt(),
            KernelKind::InverseMultiquadric => {
                let q = s * s + c * c;
                -s / (q * q.sqrt())
            }
        }
    }
}

/// Stencil support of one center node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InfluenceDomain {
    /// Grid index of the center.
    pub center: usize,
    /// Member grid indices, increasing.
    pub members: Vec<usize>,
    /// Zero-based position of the center within `members`.
    pub center_rank: usize,
}

/// Influence domain of node `center` on the full grid `coords`.
///
/// Candidates are the real nodes plus `n_i` ghost nodes on each side at the
/// edge spacing. The `n_i` nearest are taken, ties going to the lower index,
/// and ghosts are then removed.
pub fn influence_domain(coords: &[f64], center: usize, n_i: usize) -> InfluenceDomain {
    let len = coords.len() as i64;
    let h_left = coords[1] - coords[0];
    let h_right = coords[coords.len() - 1] - coords[coords.len() - 2];
    let pos = |j: i64| -> f64 {
        if j < 0 {
            coords[0] + j as f64 * h_left
        } else if j >= len {
            coords[coords.len() - 1] + (j - len + 1) as f64 * h_right
        } else {
            coords[j as usize]
        }
    };
    let c = coords[center];
    let lo = center as i64 - n_i as i64;
    let hi = center as i64 + n_i as i64;
    let mut cand: Vec<(f64, i64)> = (lo..=hi).map(|j| (libm::fabs(pos(j) - c), j)).collect();
    let scale = libm::fabs(h_left).max(libm::fabs(h_right));
    cand.sort_by(|a, b| {
        if libm::fabs(a.0 - b.0) <= 1e-12 * scale {
            a.1.cmp(&b.1)
        } else {
            a.0.partial_cmp(&b.0).unwrap_or(core::cmp::Ordering::Equal)
        }
    });
    let mut members: Vec<usize> =
        cand.iter().take(n_i).filter(|(_, j)| *j >= 0 && *j < len).map(|&(_, j)| j as usize).collect();
    members.sort_unstable();
    let center_rank = members.iter().position(|&m| m == center).unwrap_or(0);
    InfluenceDomain { center, members, center_rank }
}

/// First-derivative weights of `domain` at its center, aligned with
/// `domain.members`.
pub fn local_weights(kernel: &Kernel, domain: &InfluenceDomain, coords: &[f64], l: usize) -> Result<Vec<f64>, RbfError> {
    if l != 1 {
        return Err(RbfError::UnsupportedOrder(l));
    }
    let m = domain.members.len();
    let xs: Vec<f64> = domain.members.iter().map(|&j| coords[j]).collect();
    let mut gram = vec![Dd::ZERO; m * m];
    for a in 0..m {
        for b in 0..m {
            gram[a * m + b] = kernel.phi_dd(Dd::diff(xs[a], xs[b]));
        }
    }
    let ill = |condition: f64| RbfError::Conditioning { node: domain.center, condition };
    let lu = DenseLuDd::factor(m, &gram).map_err(|_| ill(f64::INFINITY))?;
    let cond = lu.condition_1norm(&gram).map_err(|_| ill(f64::INFINITY))?;
    if !(cond <= CONDITION_LIMIT) {
        return Err(ill(cond));
    }
    let xc = coords[domain.center];
    // Φ is symmetric, so the row φ′ Φ⁻¹ is the transpose of Φ⁻¹ φ′ᵀ.
    let mut rhs: Vec<Dd> = xs.iter().map(|&x| kernel.dphi_dd(Dd::diff(xc, x))).collect();
    lu.solve(&mut rhs)?;
    Ok(rhs.iter().map(|w| w.to_f64()).collect())
}

/// Treatment of stencil members outside the interior.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryRule {
    /// Zero Dirichlet data: boundary columns are dropped.
    HomogeneousDirichlet,
}

/// Sparse first-derivative operator on interior nodes.
///
/// Row and column indices are interior indices: grid node `j` maps to
/// column `j − 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffOperator {
    order: usize,
    rows: Vec<Vec<(usize, f64)>>,
    kl: usize,
    ku: usize,
    boundary: BoundaryRule,
}

impl DiffOperator {
    /// Builds the operator on the full grid `grid = [x_0, …, x_I]`.
    pub fn assemble(
        kernel: &Kernel,
        grid: &[f64],
        n_i: usize,
        l: usize,
        boundary: BoundaryRule,
    ) -> Result<DiffOperator, RbfError> {
        if l != 1 {
            return Err(RbfError::UnsupportedOrder(l));
        }
        if grid.len() < 3 {
            return Err(RbfError::Argument { field: "grid", reason: "need at least one interior node" });
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) || grid.iter().any(|x| !x.is_finite()) {
            return Err(RbfError::Argument { field: "grid", reason: "coordinates must be finite and strictly increasing" });
        }
        if n_i < 3 || n_i % 2 == 0 || n_i > grid.len() {
            return Err(RbfError::Argument { field: "n_i", reason: "stencil size must be odd, at least 3, and at most the grid size" });
        }
        let last = grid.len() - 1;
        let mut rows = Vec::with_capacity(last - 1);
        let (mut kl, mut ku) = (0usize, 0usize);
        for i in 1..last {
            let dom = influence_domain(grid, i, n_i);
            let w = local_weights(kernel, &dom, grid, l)?;
            let row: Vec<(usize, f64)> = dom
                .members
                .iter()
                .zip(&w)
                .filter(|(&j, _)| j != 0 && j != last)
                .map(|(&j, &wj)| (j - 1, wj))
                .collect();
            for &(c, _) in &row {
                kl = kl.max((i - 1).saturating_sub(c));
                ku = ku.max(c.saturating_sub(i - 1));
            }
            rows.push(row);
        }
        Ok(DiffOperator { order: l, rows, kl, ku, boundary })
    }

    /// Derivative order.
    pub fn order(&self) -> usize {
        self.order
    }

    /// Number of interior nodes.
    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    /// Boundary rule used at assembly.
    pub fn boundary(&self) -> BoundaryRule {
        self.boundary
    }

    /// Lower and upper bandwidths.
    pub fn bandwidths(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    /// Retained `(column, weight)` pairs of interior row `i`.
    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    /// Iterates over all retained entries as `(row, column, weight)`.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.rows.iter().enumerate().flat_map(|(i, r)| r.iter().map(move |&(j, w)| (i, j, w)))
    }

    /// `out = D · values`.
    pub fn apply(&self, values: &[f64], out: &mut [f64]) -> Result<(), RbfError> {
        let n = self.dim();
        for len in [values.len(), out.len()] {
            if len != n {
                return Err(LinalgError::Dimension { expected: n, found: len }.into());
            }
        }
        for (o, row) in out.iter_mut().zip(&self.rows) {
            *o = row.iter().map(|&(j, w)| w * values[j]).sum();
        }
        Ok(())
    }

    /// Allocating variant of [`DiffOperator::apply`].
    pub fn apply_vec(&self, values: &[f64]) -> Result<Vec<f64>, RbfError> {
        let mut out = vec![0.0; self.dim()];
        self.apply(values, &mut out)?;
        Ok(out)
    }

    /// `D²` as a band matrix, used by the reduced wave solver.
    pub fn square_band(&self) -> BandMatrix {
        let n = self.dim();
        let (kl, ku) = (2 * self.kl, 2 * self.ku);
        let mut b = BandMatrix::zeros(n, kl.max(ku), kl.max(ku));
        for (i, row) in self.rows.iter().enumerate() {
            for &(k, wik) in row {
                for &(j, wkj) in &self.rows[k] {
                    b.add(i, j, wik * wkj);
                }
            }
        }
        b
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(a: f64, b: f64, cells: usize) -> Vec<f64> {
        let h = (b - a) / cells as f64;
        (0..=cells).map(|j| a + j as f64 * h).collect()
    }

    #[test]
    fn boundary_rows_follow_banded_shape() {
        let g = grid(0.0, 1.0, 10);
        let k = Kernel::new(KernelKind::InverseMultiquadric, 1.0).unwrap();
        let d = DiffOperator::assemble(&k, &g, 5, 1, BoundaryRule::HomogeneousDirichlet).unwrap();
        let sizes: Vec<usize> = (0..d.dim()).map(|i| d.row(i).len()).collect();
        assert_eq!(sizes, vec![3, 4, 5, 5, 5, 5, 5, 4, 3]);
        assert_eq!(d.bandwidths(), (2, 2));
    }

    #[test]
    fn interior_domain_is_centered() {
        let g = grid(0.0, 1.0, 10);
        let dom = influence_domain(&g, 5, 5);
        assert_eq!(dom.members, vec![3, 4, 5, 6, 7]);
        assert_eq!(dom.center_rank, 2);
        let edge = influence_domain(&g, 1, 5);
        assert_eq!(edge.members, vec![0, 1, 2, 3]);
    }

    #[test]
    fn unsupported_order_is_rejected() {
        let g = grid(0.0, 1.0, 10);
        let k = Kernel::new(KernelKind::Gaussian, 1.0).unwrap();
        assert_eq!(
            DiffOperator::assemble(&k, &g, 5, 2, BoundaryRule::HomogeneousDirichlet),
            Err(RbfError::UnsupportedOrder(2))
        );
    }
}
