//! Truncated Q-Wiener noise on a spatial grid.
//!
//! The field is `W(t, x) = Σ_k √q_k e_k(x) β_k(t)` truncated at `K` modes.
//! Brownian increments `Δβ_k^n` come from a ChaCha stream addressed by
//! `(seed, k, n)`, so any single increment can be regenerated without
//! replaying the others.
//!
//! Two couplings between time resolutions are provided. [`QWienerField::coarsen`]
//! sums fine increments into coarse ones and is what the Monte Carlo driver
//! uses. [`QWienerField::refine`] goes the other way with a Brownian bridge,
//! so that a coarse field can be refined after the fact.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// Errors raised while building or transforming a noise field.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum QWienerError {
    /// Inconsistent time or basis parameters.
    #[error("configuration error in `{field}`: {reason}")]
    Config {
        /// Name of the offending parameter.
        field: &'static str,
        /// Human-readable explanation.
        reason: &'static str,
    },
    /// Invalid argument to an operation.
    #[error("argument error in `{field}`: {reason}")]
    Argument {
        /// Name of the offending argument.
        field: &'static str,
        /// Human-readable explanation.
        reason: &'static str,
    },
}

/// Family of spatial eigenfunctions `e_k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisKind {
    /// `(√2/4) sin(kπ (x − x_L)/(x_R − x_L))`, orthonormal on an interval of
    /// length 16 and zero at both ends.
    SineQuarter,
    /// `(√2/4) sin(kπx)` with the raw argument, kept for comparison.
    SineQuarterRaw,
    /// `sin(kx)/√π`, orthonormal on `(−π, π)`.
    SineOverSqrtPi,
}

/// Spectral description of the covariance operator `Q`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralBasis {
    kind: BasisKind,
    x_left: f64,
    x_right: f64,
    decay: f64,
    truncation: usize,
}

impl SpectralBasis {
    /// Default number of retained modes.
    pub const DEFAULT_TRUNCATION: usize = 100;
    /// Default eigenvalue decay exponent, `q_k = k^(−6)`.
    pub const DEFAULT_DECAY: f64 = 6.0;

    /// Builds a basis on `[x_left, x_right]`.
    pub fn new(
        kind: BasisKind,
        x_left: f64,
        x_right: f64,
        decay: f64,
        truncation: usize,
    ) -> Result<Self, QWienerError> {
        if !(x_left.is_finite() && x_right.is_finite() && x_left < x_right) {
            return Err(QWienerError::Config { field: "domain", reason: "need finite x_left < x_right" });
        }
        if !(decay.is_finite() && decay > 0.0) {
            return Err(QWienerError::Config { field: "decay", reason: "decay exponent must be positive" });
        }
        if truncation == 0 {
            return Err(QWienerError::Config { field: "truncation", reason: "at least one mode is required" });
        }
        Ok(SpectralBasis { kind, x_left, x_right, decay, truncation })
    }

    /// Basis kind.
    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    /// Domain `(x_L, x_R)`.
    pub fn domain(&self) -> (f64, f64) {
        (self.x_left, self.x_right)
    }

    /// Decay exponent of `q_k`.
    pub fn decay(&self) -> f64 {
        self.decay
    }

    /// Number of retained modes `K`.
    pub fn truncation(&self) -> usize {
        self.truncation
    }

    /// Eigenvalue `q_k = k^(−decay)` for `k ≥ 1`.
    pub fn q(&self, k: usize) -> f64 {
        libm::pow(k as f64, -self.decay)
    }

    /// Eigenfunction `e_k(x)` for `k ≥ 1`.
    pub fn e(&self, k: usize, x: f64) -> f64 {
        let kf = k as f64;
        match self.kind {
            BasisKind::SineQuarter => {
                let s = (x - self.x_left) / (self.x_right - self.x_left);
                core::f64::consts::SQRT_2 / 4.0 * libm::sin(kf * PI * s)
            }
            BasisKind::SineQuarterRaw => core::f64::consts::SQRT_2 / 4.0 * libm::sin(kf * PI * x),
            BasisKind::SineOverSqrtPi => libm::sin(kf * x) / libm::sqrt(PI),
        }
    }

    /// Truncated covariance kernel `Σ_k q_k e_k(x) e_k(y)` per unit time.
    pub fn covariance(&self, x: f64, y: f64) -> f64 {
        (1..=self.truncation).map(|k| self.q(k) * self.e(k, x) * self.e(k, y)).sum()
    }
}

/// SplitMix64 finalizer, used to derive independent seeds from structured keys.
pub fn mix_seed(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Counter-addressable standard normal stream.
///
/// Each draw consumes exactly two 64-bit words, so the `n`-th draw of stream
/// `s` sits at word position `4n` and can be reached directly.
struct NormalStream {
    rng: ChaCha8Rng,
}

impl NormalStream {
    fn new(seed: u64, stream: u64, start: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 0x51_7cc1_b727_220a));
        rng.set_stream(stream);
        rng.set_word_pos(4 * start as u128);
        NormalStream { rng }
    }

    fn next(&mut self) -> f64 {
        let scale = 1.0 / (1u64 << 53) as f64;
        let u1 = ((self.rng.next_u64() >> 11) as f64 + 0.5) * scale;
        let u2 = ((self.rng.next_u64() >> 11) as f64 + 0.5) * scale;
        libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(2.0 * PI * u2)
    }
}

/// Stream identifier for mode `k` at bridge level `level` (level 0 is the
/// forward draw).
fn stream_id(k: usize, level: u32) -> u64 {
    ((level as u64) << 40) | k as u64
}

/// Sampled noise increments on a uniform time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct QWienerField {
    basis: SpectralBasis,
    nodes: Vec<f64>,
    dt: f64,
    steps: usize,
    seed: u64,
    level: u32,
    /// `Δβ_k^n`, step-major, `steps × K`.
    dbeta: Vec<f64>,
    /// `ΔW_i^n`, step-major, `steps × nodes`.
    increments: Vec<f64>,
}

impl QWienerField {
    /// Draws a field with `T/Δt` steps on `nodes`.
    pub fn sample(
        basis: &SpectralBasis,
        nodes: &[f64],
        t_final: f64,
        dt: f64,
        seed: u64,
    ) -> Result<Self, QWienerError> {
        let steps = step_count(t_final, dt)?;
        check_nodes(basis, nodes)?;
        let kk = basis.truncation;
        let sdt = libm::sqrt(dt);
        let mut dbeta = vec![0.0; steps * kk];
        for k in 0..kk {
            let mut s = NormalStream::new(seed, stream_id(k + 1, 0), 0);
            for n in 0..steps {
                dbeta[n * kk + k] = sdt * s.next();
            }
        }
        Ok(Self::from_dbeta(basis.clone(), nodes.to_vec(), dt, steps, seed, 0, dbeta))
    }

    fn from_dbeta(
        basis: SpectralBasis,
        nodes: Vec<f64>,
        dt: f64,
        steps: usize,
        seed: u64,
        level: u32,
        dbeta: Vec<f64>,
    ) -> Self {
        let modes = mode_matrix(&basis, &nodes);
        let increments = project(&modes, basis.truncation, nodes.len(), &dbeta, steps);
        QWienerField { basis, nodes, dt, steps, seed, level, dbeta, increments }
    }

    /// Basis used to build the field.
    pub fn basis(&self) -> &SpectralBasis {
        &self.basis
    }

    /// Spatial nodes.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Time step.
    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Number of time steps.
    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Seed of the underlying stream.
    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Increments `ΔW_i^n` for all nodes at step `n`.
    pub fn step(&self, n: usize) -> &[f64] {
        let m = self.nodes.len();
        &self.increments[n * m..(n + 1) * m]
    }

    /// Brownian increments `Δβ_k^n`, `k = 1..=K`, at step `n`.
    pub fn mode_increments(&self, n: usize) -> &[f64] {
        let kk = self.basis.truncation;
        &self.dbeta[n * kk..(n + 1) * kk]
    }

    /// Field on step `Δt · factor` obtained by summing consecutive groups of
    /// `factor` increments. Pairwise summation is used, so coarsening by 4
    /// equals coarsening by 2 twice bit for bit.
    pub fn coarsen(&self, factor: usize) -> Result<Self, QWienerError> {
        check_factor(factor)?;
        if self.steps % factor != 0 {
            return Err(QWienerError::Argument { field: "factor", reason: "factor must divide the step count" });
        }
        let mut f = self.clone();
        let mut left = factor;
        while left > 1 {
            f = f.halve_resolution();
            left /= 2;
        }
        Ok(f)
    }

    fn halve_resolution(&self) -> Self {
        let pair_sum = |v: &[f64], width: usize| -> Vec<f64> {
            let half = v.len() / (2 * width);
            let mut out = vec![0.0; half * width];
            for n in 0..half {
                for j in 0..width {
                    out[n * width + j] = v[2 * n * width + j] + v[(2 * n + 1) * width + j];
                }
            }
            out
        };
        QWienerField {
            basis: self.basis.clone(),
            nodes: self.nodes.clone(),
            dt: 2.0 * self.dt,
            steps: self.steps / 2,
            seed: self.seed,
            level: self.level.saturating_sub(1),
            dbeta: pair_sum(&self.dbeta, self.basis.truncation),
            increments: pair_sum(&self.increments, self.nodes.len()),
        }
    }

    /// Field on step `Δt / factor` obtained by Brownian-bridge splitting.
    ///
    /// Each halving draws its midpoints from a stream addressed by the
    /// resulting refinement level, so `refine(f, 4)` and
    /// `refine(refine(f, 2), 2)` are the same field.
    pub fn refine(&self, factor: usize) -> Result<Self, QWienerError> {
        check_factor(factor)?;
        let mut f = self.clone();
        let mut left = factor;
        while left > 1 {
            f = f.bridge_halve();
            left /= 2;
        }
        Ok(f)
    }

    fn bridge_halve(&self) -> Self {
        let kk = self.basis.truncation;
        let level = self.level + 1;
        let fine_dt = self.dt / 2.0;
        let sd = libm::sqrt(self.dt) / 2.0;
        let mut dbeta = vec![0.0; 2 * self.steps * kk];
        for k in 0..kk {
            let mut s = NormalStream::new(self.seed, stream_id(k + 1, level), 0);
            for n in 0..self.steps {
                let coarse = self.dbeta[n * kk + k];
                let first = 0.5 * coarse + sd * s.next();
                dbeta[2 * n * kk + k] = first;
                dbeta[(2 * n + 1) * kk + k] = coarse - first;
            }
        }
        let mut f = Self::from_dbeta(self.basis.clone(), self.nodes.clone(), fine_dt, 2 * self.steps, self.seed, level, dbeta);
        // Fix the node increments so that pairs add back to the coarse ones
        // up to a single rounding.
        let m = self.nodes.len();
        for n in 0..self.steps {
            for i in 0..m {
                let coarse = self.increments[n * m + i];
                f.increments[(2 * n + 1) * m + i] = coarse - f.increments[2 * n * m + i];
            }
        }
        f
    }

    /// Writes every increment as `(step, node_index, increment)` via `sink`.
    pub fn for_each_increment(&self, mut sink: impl FnMut(usize, usize, f64)) {
        let m = self.nodes.len();
        for n in 0..self.steps {
            for i in 0..m {
                sink(n, i, self.increments[n * m + i]);
            }
        }
    }
}

/// Number of steps `T/Δt`, rejecting non-integer ratios.
pub fn step_count(t_final: f64, dt: f64) -> Result<usize, QWienerError> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(QWienerError::Config { field: "dt", reason: "time step must be positive" });
    }
    if !(t_final.is_finite() && t_final > 0.0) {
        return Err(QWienerError::Config { field: "t_final", reason: "final time must be positive" });
    }
    let n = libm::round(t_final / dt);
    if n < 1.0 || libm::fabs(n * dt - t_final) > 1e-12 * t_final {
        return Err(QWienerError::Config { field: "dt", reason: "time step must divide the final time" });
    }
    Ok(n as usize)
}

fn check_nodes(basis: &SpectralBasis, nodes: &[f64]) -> Result<(), QWienerError> {
    if nodes.is_empty() {
        return Err(QWienerError::Argument { field: "nodes", reason: "node set is empty" });
    }
    let (a, b) = basis.domain();
    if nodes.iter().any(|&x| !(x >= a && x <= b)) {
        return Err(QWienerError::Argument { field: "nodes", reason: "nodes must lie in the basis domain" });
    }
    Ok(())
}

fn check_factor(factor: usize) -> Result<(), QWienerError> {
    if factor < 2 || !factor.is_power_of_two() {
        return Err(QWienerError::Argument { field: "factor", reason: "factor must be a power of two, at least 2" });
    }
    Ok(())
}

/// `√q_k e_k(x_i)`, mode-major, `K × nodes`.
fn mode_matrix(basis: &SpectralBasis, nodes: &[f64]) -> Vec<f64> {
    let m = nodes.len();
    let mut out = vec![0.0; basis.truncation * m];
    for k in 1..=basis.truncation {
        let sq = libm::sqrt(basis.q(k));
        for (i, &x) in nodes.iter().enumerate() {
            out[(k - 1) * m + i] = sq * basis.e(k, x);
        }
    }
    out
}

fn project(modes: &[f64], kk: usize, m: usize, dbeta: &[f64], steps: usize) -> Vec<f64> {
    let mut out = vec![0.0; steps * m];
    for n in 0..steps {
        let row = &mut out[n * m..(n + 1) * m];
        for k in 0..kk {
            let b = dbeta[n * kk + k];
            let col = &modes[k * m..(k + 1) * m];
            for (r, c) in row.iter_mut().zip(col) {
                *r += c * b;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn basis() -> SpectralBasis {
        SpectralBasis::new(BasisKind::SineOverSqrtPi, -PI, PI, 6.0, 20).unwrap()
    }

    #[test]
    fn rejects_bad_time_grid() {
        assert!(matches!(step_count(1.0, 0.3), Err(QWienerError::Config { field: "dt", .. })));
        assert!(matches!(step_count(1.0, -0.5), Err(QWienerError::Config { field: "dt", .. })));
        assert_eq!(step_count(1.0, 1.0 / 1024.0).unwrap(), 1024);
    }

    #[test]
    fn coarsen_by_four_equals_coarsen_twice() {
        let f = QWienerField::sample(&basis(), &[-1.0, 0.0, 0.5], 1.0, 1.0 / 16.0, 3).unwrap();
        let a = f.coarsen(4).unwrap();
        let b = f.coarsen(2).unwrap().coarsen(2).unwrap();
        assert_eq!(a.increments, b.increments);
        assert_eq!(a.steps(), 4);
    }

    #[test]
    fn stream_is_counter_addressable() {
        let mut s = NormalStream::new(11, stream_id(3, 0), 0);
        let seq: Vec<f64> = (0..10).map(|_| s.next()).collect();
        let mut t = NormalStream::new(11, stream_id(3, 0), 7);
        assert_eq!(t.next(), seq[7]);
    }
}
