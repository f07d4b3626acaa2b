//! Dense and banded LU factorizations with partial pivoting.
//!
//! The banded factorization follows the classic layout in which row
//! interchanges widen the upper band from `ku` to `ku + kl`. Every global
//! time-step system in this crate is banded once unknowns are ordered node
//! by node, so no general sparse solver is needed.

use alloc::vec;
use alloc::vec::Vec;

use crate::dd::Dd;

/// Failure of a factorization or solve.
#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum LinalgError {
    /// A zero (or non-finite) pivot was met in the given column.
    #[error("matrix is singular to working precision at column {column}")]
    Singular {
        /// Column of the failing pivot.
        column: usize,
    },
    /// Operand sizes do not agree.
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension {
        /// Required length.
        expected: usize,
        /// Supplied length.
        found: usize,
    },
}

/// Square band matrix with `kl` sub-diagonals and `ku` super-diagonals.
///
/// Storage reserves `kl` extra super-diagonals for pivoting fill, so a
/// matrix can be factored in place.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    /// Zero band matrix of order `n`.
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        BandMatrix { n, kl, ku, width, data: vec![0.0; n * width] }
    }

    /// Order of the matrix.
    pub fn order(&self) -> usize {
        self.n
    }

    /// Number of sub-diagonals.
    pub fn lower_bandwidth(&self) -> usize {
        self.kl
    }

    /// Number of super-diagonals.
    pub fn upper_bandwidth(&self) -> usize {
        self.ku
    }

    /// Whether `(i, j)` lies inside the declared band.
    #[inline]
    pub fn in_band(&self, i: usize, j: usize) -> bool {
        i < self.n && j < self.n && j + self.kl >= i && j <= i + self.ku
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        i * self.width + (j + self.kl - i)
    }

    /// Entry `(i, j)`; zero outside the band.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if self.in_band(i, j) {
            self.data[self.slot(i, j)]
        } else {
            0.0
        }
    }

    /// Sets entry `(i, j)`.
    ///
    /// # Panics
    /// Panics if `(i, j)` is outside the band.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        assert!(self.in_band(i, j), "entry ({i}, {j}) outside band");
        let s = self.slot(i, j);
        self.data[s] = v;
    }

    /// Adds `v` to entry `(i, j)`.
    ///
    /// # Panics
    /// Panics if `(i, j)` is outside the band.
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(self.in_band(i, j), "entry ({i}, {j}) outside band");
        let s = self.slot(i, j);
        self.data[s] += v;
    }

    /// Resets every entry to zero, keeping the shape.
    pub fn clear(&mut self) {
        self.data.iter_mut().for_each(|x| *x = 0.0);
    }

    /// Matrix-vector product `y = A x`.
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) -> Result<(), LinalgError> {
        check_len(self.n, x.len())?;
        check_len(self.n, y.len())?;
        for (i, yi) in y.iter_mut().enumerate() {
            let lo = i.saturating_sub(self.kl);
            let hi = (i + self.ku).min(self.n - 1);
            let mut acc = 0.0;
            for (j, xj) in x.iter().enumerate().take(hi + 1).skip(lo) {
                acc += self.data[self.slot(i, j)] * xj;
            }
            *yi = acc;
        }
        Ok(())
    }

    /// LU factorization with partial pivoting, consuming the matrix.
    pub fn factor(mut self) -> Result<BandLu, LinalgError> {
        let n = self.n;
        let kl = self.kl;
        let ku = self.ku;
        let mut piv = vec![0usize; n];
        for k in 0..n {
            let last = (k + kl).min(n.saturating_sub(1));
            let mut p = k;
            let mut best = libm::fabs(self.data[self.slot(k, k)]);
            for i in (k + 1)..=last {
                let v = libm::fabs(self.data[self.slot(i, k)]);
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return Err(LinalgError::Singular { column: k });
            }
            piv[k] = p;
            let jmax = (k + ku + kl).min(n - 1);
            if p != k {
                for j in k..=jmax {
                    let a = self.slot(k, j);
                    let b = self.slot(p, j);
                    self.data.swap(a, b);
                }
            }
            let pivot = self.data[self.slot(k, k)];
            for i in (k + 1)..=last {
                let sik = self.slot(i, k);
                let l = self.data[sik] / pivot;
                self.data[sik] = l;
                if l != 0.0 {
                    for j in (k + 1)..=jmax {
                        let skj = self.slot(k, j);
                        let sij = self.slot(i, j);
                        self.data[sij] -= l * self.data[skj];
                    }
                }
            }
        }
        Ok(BandLu { m: self, piv })
    }
}

/// Factored band matrix produced by [`BandMatrix::factor`].
#[derive(Debug, Clone)]
pub struct BandLu {
    m: BandMatrix,
    piv: Vec<usize>,
}

impl BandLu {
    /// Order of the factored matrix.
    pub fn order(&self) -> usize {
        self.m.n
    }

    /// Solves `A x = b` in place.
    pub fn solve(&self, b: &mut [f64]) -> Result<(), LinalgError> {
        let n = self.m.n;
        check_len(n, b.len())?;
        let kl = self.m.kl;
        let ku = self.m.ku;
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            if bk != 0.0 {
                let last = (k + kl).min(n - 1);
                for (i, bi) in b.iter_mut().enumerate().take(last + 1).skip(k + 1) {
                    *bi -= self.m.data[self.m.slot(i, k)] * bk;
                }
            }
        }
        for k in (0..n).rev() {
            let jmax = (k + ku + kl).min(n - 1);
            let mut acc = b[k];
            for (j, bj) in b.iter().enumerate().take(jmax + 1).skip(k + 1) {
                acc -= self.m.data[self.m.slot(k, j)] * bj;
            }
            b[k] = acc / self.m.data[self.m.slot(k, k)];
        }
        Ok(())
    }
}

/// Dense row-major LU factorization with partial pivoting.
#[derive(Debug, Clone)]
pub struct DenseLu {
    n: usize,
    lu: Vec<f64>,
    piv: Vec<usize>,
}

impl DenseLu {
    /// Factors the row-major `n × n` matrix `a`.
    pub fn factor(n: usize, a: &[f64]) -> Result<DenseLu, LinalgError> {
        check_len(n * n, a.len())?;
        let mut lu = a.to_vec();
        let mut piv = vec![0usize; n];
        for k in 0..n {
            let mut p = k;
            let mut best = libm::fabs(lu[k * n + k]);
            for i in (k + 1)..n {
                let v = libm::fabs(lu[i * n + k]);
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return Err(LinalgError::Singular { column: k });
            }
            piv[k] = p;
            if p != k {
                for j in 0..n {
                    lu.swap(k * n + j, p * n + j);
                }
            }
            let pivot = lu[k * n + k];
            for i in (k + 1)..n {
                let l = lu[i * n + k] / pivot;
                lu[i * n + k] = l;
                for j in (k + 1)..n {
                    lu[i * n + j] -= l * lu[k * n + j];
                }
            }
        }
        Ok(DenseLu { n, lu, piv })
    }

    /// Solves `A x = b` in place.
    pub fn solve(&self, b: &mut [f64]) -> Result<(), LinalgError> {
        let n = self.n;
        check_len(n, b.len())?;
        for k in 0..n {
            b.swap(k, self.piv[k]);
        }
        for i in 0..n {
            let mut acc = b[i];
            for j in 0..i {
                acc -= self.lu[i * n + j] * b[j];
            }
            b[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = b[i];
            for j in (i + 1)..n {
                acc -= self.lu[i * n + j] * b[j];
            }
            b[i] = acc / self.lu[i * n + i];
        }
        Ok(())
    }
}

/// Dense LU factorization in double-double arithmetic.
#[derive(Debug, Clone)]
pub struct DenseLuDd {
    n: usize,
    lu: Vec<Dd>,
    piv: Vec<usize>,
}

impl DenseLuDd {
    /// Factors the row-major `n × n` matrix `a`.
    pub fn factor(n: usize, a: &[Dd]) -> Result<DenseLuDd, LinalgError> {
        check_len(n * n, a.len())?;
        let mut lu = a.to_vec();
        let mut piv = vec![0usize; n];
        for k in 0..n {
            let mut p = k;
            let mut best = lu[k * n + k].abs();
            for i in (k + 1)..n {
                let v = lu[i * n + k].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best.hi == 0.0 || !best.is_finite() {
                return Err(LinalgError::Singular { column: k });
            }
            piv[k] = p;
            if p != k {
                for j in 0..n {
                    lu.swap(k * n + j, p * n + j);
                }
            }
            let pivot = lu[k * n + k];
            for i in (k + 1)..n {
                let l = lu[i * n + k] / pivot;
                lu[i * n + k] = l;
                for j in (k + 1)..n {
                    lu[i * n + j] = lu[i * n + j] - l * lu[k * n + j];
                }
            }
        }
        Ok(DenseLuDd { n, lu, piv })
    }

    /// Solves `A x = b` in place.
    pub fn solve(&self, b: &mut [Dd]) -> Result<(), LinalgError> {
        let n = self.n;
        check_len(n, b.len())?;
        for k in 0..n {
            b.swap(k, self.piv[k]);
        }
        for i in 0..n {
            let mut acc = b[i];
            for j in 0..i {
                acc = acc - self.lu[i * n + j] * b[j];
            }
            b[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = b[i];
            for j in (i + 1)..n {
                acc = acc - self.lu[i * n + j] * b[j];
            }
            b[i] = acc / self.lu[i * n + i];
        }
        Ok(())
    }

    /// Exact 1-norm condition number `‖A‖₁ ‖A⁻¹‖₁`, forming the inverse
    /// column by column. `a` must be the matrix that was factored.
    pub fn condition_1norm(&self, a: &[Dd]) -> Result<f64, LinalgError> {
        let n = self.n;
        check_len(n * n, a.len())?;
        let norm = |col: &dyn Fn(usize) -> f64| -> f64 { (0..n).map(col).fold(0.0, f64::max) };
        let a_norm = norm(&|j| (0..n).map(|i| libm::fabs(a[i * n + j].to_f64())).sum());
        let mut inv_norm = 0.0f64;
        let mut e = vec![Dd::ZERO; n];
        for j in 0..n {
            e.iter_mut().for_each(|x| *x = Dd::ZERO);
            e[j] = Dd::ONE;
            self.solve(&mut e)?;
            let s: f64 = e.iter().map(|x| libm::fabs(x.to_f64())).sum();
            inv_norm = inv_norm.max(s);
        }
        Ok(a_norm * inv_norm)
    }
}

fn check_len(expected: usize, found: usize) -> Result<(), LinalgError> {
    if expected == found {
        Ok(())
    } else {
        Err(LinalgError::Dimension { expected, found })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lcg(state: &mut u64) -> f64 {
        *state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((*state >> 11) as f64) / ((1u64 << 53) as f64) - 0.5
    }

    #[test]
    fn band_solve_matches_dense_solve() {
        let n = 23;
        let (kl, ku) = (3, 2);
        let mut s = 7u64;
        let mut band = BandMatrix::zeros(n, kl, ku);
        let mut dense = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                if band.in_band(i, j) {
                    // Weak diagonal so that pivoting actually happens.
                    let v = lcg(&mut s) + if i == j { 0.05 } else { 0.0 };
                    band.set(i, j, v);
                    dense[i * n + j] = v;
                }
            }
        }
        let rhs: Vec<f64> = (0..n).map(|_| lcg(&mut s)).collect();
        let mut x1 = rhs.clone();
        band.clone().factor().unwrap().solve(&mut x1).unwrap();
        let mut x2 = rhs.clone();
        DenseLu::factor(n, &dense).unwrap().solve(&mut x2).unwrap();
        for (a, b) in x1.iter().zip(&x2) {
            assert!((a - b).abs() < 1e-9 * (1.0 + b.abs()), "{a} vs {b}");
        }
        let mut back = vec![0.0; n];
        band.mul_vec(&x1, &mut back).unwrap();
        for (a, b) in back.iter().zip(&rhs) {
            assert!((a - b).abs() < 1e-11);
        }
    }

    #[test]
    fn singular_matrix_is_reported() {
        let mut band = BandMatrix::zeros(3, 1, 1);
        band.set(0, 0, 1.0);
        band.set(1, 0, 1.0);
        band.set(2, 2, 1.0);
        assert!(matches!(band.factor(), Err(LinalgError::Singular { column: 1 })));
    }

    #[test]
    fn dd_condition_of_diagonal_matrix() {
        let a: Vec<Dd> = [2.0, 0.0, 0.0, 0.5].iter().map(|&x| Dd::from_f64(x)).collect();
        let lu = DenseLuDd::factor(2, &a).unwrap();
        let c = lu.condition_1norm(&a).unwrap();
        assert!((c - 4.0).abs() < 1e-14);
    }
}
