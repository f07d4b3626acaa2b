//! Butcher tableaux and the algebraic conditions behind multi-symplecticity.
//!
//! Conditions are reported as maximal absolute residuals, never as booleans,
//! so callers choose their own tolerance. Temporal tableaux in the
//! partitioned schemes are applied column-wise: stage `m` accumulates
//! `Σ_n ã_{nm} F^n`. The partitioned conditions below are stated in that
//! convention.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

/// Errors raised by tableau construction and condition checks.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TableauError {
    /// Zero stages.
    #[error("tableau `{0}` has zero stages")]
    Empty(&'static str),
    /// Coefficient arrays of inconsistent size.
    #[error("tableau `{role}` has inconsistent size: expected {expected} stages, found {found}")]
    StageMismatch {
        /// Role of the offending tableau.
        role: &'static str,
        /// Required stage count.
        expected: usize,
        /// Supplied stage count.
        found: usize,
    },
    /// Unknown library name.
    #[error("unknown tableau `{0}` (expected midpoint, euler-explicit, euler-implicit or gauss2)")]
    UnknownName(String),
}

/// Runge–Kutta coefficients `(A, b)` with abscissae `c = A·1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ButcherTableau {
    s: usize,
    a: Vec<f64>,
    b: Vec<f64>,
}

impl ButcherTableau {
    /// Builds a tableau from row-major `A` rows and weights `b`.
    pub fn new(a: &[&[f64]], b: &[f64]) -> Result<Self, TableauError> {
        let s = b.len();
        if s == 0 {
            return Err(TableauError::Empty("custom"));
        }
        if a.len() != s {
            return Err(TableauError::StageMismatch { role: "custom", expected: s, found: a.len() });
        }
        let mut flat = Vec::with_capacity(s * s);
        for row in a {
            if row.len() != s {
                return Err(TableauError::StageMismatch { role: "custom", expected: s, found: row.len() });
            }
            flat.extend_from_slice(row);
        }
        Ok(ButcherTableau { s, a: flat, b: b.to_vec() })
    }

    /// Builds a tableau from a flat row-major `A`.
    pub fn from_flat(s: usize, a: Vec<f64>, b: Vec<f64>) -> Result<Self, TableauError> {
        if s == 0 {
            return Err(TableauError::Empty("custom"));
        }
        if a.len() != s * s || b.len() != s {
            return Err(TableauError::StageMismatch { role: "custom", expected: s, found: b.len() });
        }
        Ok(ButcherTableau { s, a, b })
    }

    /// Implicit midpoint rule, `A = [[½]]`, `b = [1]`.
    pub fn midpoint() -> Self {
        ButcherTableau { s: 1, a: vec![0.5], b: vec![1.0] }
    }

    /// Explicit Euler, `A = [[0]]`, `b = [1]`.
    pub fn explicit_euler() -> Self {
        ButcherTableau { s: 1, a: vec![0.0], b: vec![1.0] }
    }

    /// Implicit Euler, `A = [[1]]`, `b = [1]`.
    pub fn implicit_euler() -> Self {
        ButcherTableau { s: 1, a: vec![1.0], b: vec![1.0] }
    }

    /// Two-stage Gauss–Legendre method.
    pub fn gauss2() -> Self {
        let r = libm::sqrt(3.0) / 6.0;
        ButcherTableau { s: 2, a: vec![0.25, 0.25 - r, 0.25 + r, 0.25], b: vec![0.5, 0.5] }
    }

    /// Library lookup by name.
    pub fn by_name(name: &str) -> Result<Self, TableauError> {
        match name {
            "midpoint" => Ok(Self::midpoint()),
            "euler-explicit" => Ok(Self::explicit_euler()),
            "euler-implicit" => Ok(Self::implicit_euler()),
            "gauss2" => Ok(Self::gauss2()),
            other => Err(TableauError::UnknownName(other.into())),
        }
    }

    /// Stage count.
    pub fn stages(&self) -> usize {
        self.s
    }

    /// Coefficient `a_{mn}` (zero-based).
    #[inline]
    pub fn a(&self, m: usize, n: usize) -> f64 {
        self.a[m * self.s + n]
    }

    /// Weight `b_m` (zero-based).
    #[inline]
    pub fn b(&self, m: usize) -> f64 {
        self.b[m]
    }

    /// All weights.
    pub fn weights(&self) -> &[f64] {
        &self.b
    }

    /// Abscissae `c_m = Σ_n a_{mn}`.
    pub fn c(&self) -> Vec<f64> {
        (0..self.s).map(|m| (0..self.s).map(|n| self.a(m, n)).sum()).collect()
    }

    /// Copy with `a_{mn}` replaced.
    pub fn with_a(&self, m: usize, n: usize, value: f64) -> Self {
        let mut t = self.clone();
        t.a[m * self.s + n] = value;
        t
    }

    /// Copy with `b_m` replaced.
    pub fn with_b(&self, m: usize, value: f64) -> Self {
        let mut t = self.clone();
        t.b[m] = value;
        t
    }

    /// Copy with stages relabeled by `perm` (new stage `k` is old `perm[k]`).
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let s = self.s;
        let mut a = vec![0.0; s * s];
        for m in 0..s {
            for n in 0..s {
                a[m * s + n] = self.a(perm[m], perm[n]);
            }
        }
        ButcherTableau { s, a, b: perm.iter().map(|&k| self.b[k]).collect() }
    }
}

/// Named maximal residuals of a set of algebraic conditions.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConditionReport {
    /// `(condition name, max |residual|)` pairs.
    pub entries: Vec<(&'static str, f64)>,
}

impl ConditionReport {
    fn push(&mut self, name: &'static str, value: f64) {
        self.entries.push((name, value));
    }

    /// Largest residual over all conditions.
    pub fn max_residual(&self) -> f64 {
        self.entries.iter().map(|e| e.1).fold(0.0, f64::max)
    }

    /// Residual of the named condition.
    pub fn get(&self, name: &str) -> Option<f64> {
        self.entries.iter().find(|e| e.0 == name).map(|e| e.1)
    }

    /// Whether every residual is at most `tol`.
    pub fn passes(&self, tol: f64) -> bool {
        self.entries.iter().all(|e| e.1 <= tol)
    }

    /// Names of conditions whose residual exceeds `tol`.
    pub fn failures(&self, tol: f64) -> Vec<&'static str> {
        self.entries.iter().filter(|e| !(e.1 <= tol)).map(|e| e.0).collect()
    }
}

fn max_over(s: usize, f: impl Fn(usize, usize) -> f64) -> f64 {
    let mut worst = 0.0f64;
    for m in 0..s {
        for n in 0..s {
            worst = worst.max(libm::fabs(f(m, n)));
        }
    }
    worst
}

fn max_diff(x: &ButcherTableau, y: &ButcherTableau) -> f64 {
    (0..x.s).map(|i| libm::fabs(x.b(i) - y.b(i))).fold(0.0, f64::max)
}

fn same_stages(role: &'static str, t: &ButcherTableau, s: usize) -> Result<(), TableauError> {
    if t.s != s {
        return Err(TableauError::StageMismatch { role, expected: s, found: t.s });
    }
    Ok(())
}

/// Residual of `b_m b_n − b_m a_{mn} − b_n a_{nm}`.
pub fn is_symplectic(t: &ButcherTableau) -> ConditionReport {
    let mut r = ConditionReport::default();
    r.push("symplectic", max_over(t.s, |m, n| t.b(m) * t.b(n) - t.b(m) * t.a(m, n) - t.b(n) * t.a(n, m)));
    r
}

/// Tableaux of the partitioned scheme for the wave equation.
#[derive(Debug, Clone, PartialEq)]
pub struct WavePrkFamily {
    /// Temporal tableau for `u_t = v`.
    pub at1: ButcherTableau,
    /// Temporal tableau for the `v` drift.
    pub at2: ButcherTableau,
    /// Temporal tableau for the noise.
    pub abar: ButcherTableau,
    /// Spatial tableau for `u_x = w`.
    pub a1: ButcherTableau,
    /// Spatial tableau for the `w` relation.
    pub a2: ButcherTableau,
}

impl WavePrkFamily {
    /// Every tableau equal to the implicit midpoint rule.
    pub fn midpoint() -> Self {
        let t = ButcherTableau::midpoint();
        WavePrkFamily { at1: t.clone(), at2: t.clone(), abar: t.clone(), a1: t.clone(), a2: t }
    }

    /// Every tableau equal to the two-stage Gauss method.
    pub fn gauss2() -> Self {
        let t = ButcherTableau::gauss2();
        WavePrkFamily { at1: t.clone(), at2: t.clone(), abar: t.clone(), a1: t.clone(), a2: t }
    }

    /// Symplectic-Euler pairing: explicit on `u`, implicit on `v`, `w`.
    pub fn symplectic_euler() -> Self {
        let (e0, e1) = (ButcherTableau::explicit_euler(), ButcherTableau::implicit_euler());
        WavePrkFamily { at1: e0.clone(), at2: e1.clone(), abar: e1.clone(), a1: e0, a2: e1 }
    }

    /// The opposite symplectic-Euler pairing.
    pub fn symplectic_euler_flipped() -> Self {
        let (e0, e1) = (ButcherTableau::explicit_euler(), ButcherTableau::implicit_euler());
        WavePrkFamily { at1: e1.clone(), at2: e0.clone(), abar: e0.clone(), a1: e1, a2: e0 }
    }
}

/// Residuals of the three condition families of the wave partitioned scheme.
pub fn check_prk_wave(f: &WavePrkFamily) -> Result<ConditionReport, TableauError> {
    let r = f.at1.s;
    let s = f.a1.s;
    if r == 0 || s == 0 {
        return Err(TableauError::Empty("wave family"));
    }
    same_stages("at2", &f.at2, r)?;
    same_stages("abar", &f.abar, r)?;
    same_stages("a2", &f.a2, s)?;
    let (at1, at2, ab, a1, a2) = (&f.at1, &f.at2, &f.abar, &f.a1, &f.a2);
    let mut rep = ConditionReport::default();
    rep.push("temporal-noise", max_over(r, |m, n| ab.a(n, m) * at1.b(m) + at1.a(m, n) * ab.b(n) - at1.b(m) * ab.b(n)));
    rep.push("temporal", max_over(r, |m, n| at2.a(n, m) * at1.b(m) + at1.a(m, n) * at2.b(n) - at1.b(m) * at2.b(n)));
    rep.push("spatial", max_over(s, |i, j| a2.a(i, j) * a1.b(i) + a1.a(j, i) * a2.b(j) - a1.b(i) * a2.b(j)));
    Ok(rep)
}

/// Tableaux of the partitioned scheme for the Schrödinger equation.
#[derive(Debug, Clone, PartialEq)]
pub struct NlsPrkFamily {
    /// Temporal tableau for the `q` relation.
    pub at1: ButcherTableau,
    /// Temporal tableau for the `p` relation.
    pub at2: ButcherTableau,
    /// Noise tableau for the `q` relation.
    pub abar1: ButcherTableau,
    /// Noise tableau for the `p` relation.
    pub abar2: ButcherTableau,
    /// Spatial tableau for `v`.
    pub a1: ButcherTableau,
    /// Spatial tableau for `w`.
    pub a2: ButcherTableau,
    /// Spatial tableau for `p_x = v`.
    pub a3: ButcherTableau,
    /// Spatial tableau for `q_x = w`.
    pub a4: ButcherTableau,
}

impl NlsPrkFamily {
    /// Every tableau equal to `t`.
    pub fn uniform(t: ButcherTableau) -> Self {
        NlsPrkFamily {
            at1: t.clone(),
            at2: t.clone(),
            abar1: t.clone(),
            abar2: t.clone(),
            a1: t.clone(),
            a2: t.clone(),
            a3: t.clone(),
            a4: t,
        }
    }

    /// Every tableau equal to the implicit midpoint rule.
    pub fn midpoint() -> Self {
        Self::uniform(ButcherTableau::midpoint())
    }

    /// Symplectic-Euler pairing satisfying every condition.
    pub fn symplectic_euler() -> Self {
        let (e0, e1) = (ButcherTableau::explicit_euler(), ButcherTableau::implicit_euler());
        NlsPrkFamily {
            at1: e0.clone(),
            at2: e1.clone(),
            abar1: e0.clone(),
            abar2: e1.clone(),
            a1: e0.clone(),
            a2: e0.clone(),
            a3: e1.clone(),
            a4: e1,
        }
    }

    /// The opposite symplectic-Euler pairing.
    pub fn symplectic_euler_flipped() -> Self {
        let (e0, e1) = (ButcherTableau::explicit_euler(), ButcherTableau::implicit_euler());
        NlsPrkFamily {
            at1: e1.clone(),
            at2: e0.clone(),
            abar1: e1.clone(),
            abar2: e0.clone(),
            a1: e1.clone(),
            a2: e1.clone(),
            a3: e0.clone(),
            a4: e0,
        }
    }
}

/// Residuals of the seven condition families of the Schrödinger scheme.
pub fn check_prk_nls(f: &NlsPrkFamily) -> Result<ConditionReport, TableauError> {
    let r = f.at1.s;
    let s = f.a1.s;
    if r == 0 || s == 0 {
        return Err(TableauError::Empty("nls family"));
    }
    same_stages("at2", &f.at2, r)?;
    same_stages("abar1", &f.abar1, r)?;
    same_stages("abar2", &f.abar2, r)?;
    for (role, t) in [("a2", &f.a2), ("a3", &f.a3), ("a4", &f.a4)] {
        same_stages(role, t, s)?;
    }
    let pair = |x: &ButcherTableau, y: &ButcherTableau| {
        max_over(r, |m, n| x.a(m, n) * y.b(n) + x.b(m) * y.a(n, m) - x.b(m) * y.b(n))
    };
    let mut rep = ConditionReport::default();
    rep.push("temporal", pair(&f.at1, &f.at2));
    rep.push("noise-temporal", pair(&f.abar1, &f.at2));
    rep.push("temporal-noise", pair(&f.at1, &f.abar2));
    rep.push("noise-noise", pair(&f.abar1, &f.abar2));
    let (a1, a2, a3, a4) = (&f.a1, &f.a2, &f.a3, &f.a4);
    rep.push("spatial-p", max_over(s, |i, j| a3.a(i, j) * a1.b(j) + a3.b(i) * a1.a(j, i) - a3.b(i) * a1.b(j)));
    rep.push("spatial-q", max_over(s, |i, j| a2.a(i, j) * a4.b(i) + a2.b(j) * a4.a(j, i) - a4.b(i) * a2.b(j)));
    rep.push("weights-spatial", max_diff(a1, a2));
    rep.push("weights-temporal", max_diff(&f.at1, &f.at2));
    Ok(rep)
}

/// Tableaux of the partitioned scheme for the KdV equation.
#[derive(Debug, Clone, PartialEq)]
pub struct KdvPrkFamily {
    /// Temporal tableau for the `u` relation.
    pub at1: ButcherTableau,
    /// Temporal tableau for the `ρ` relation.
    pub at2: ButcherTableau,
    /// Noise tableau.
    pub abar: ButcherTableau,
    /// Spatial tableau for `u_x = w`.
    pub a1: ButcherTableau,
    /// Spatial tableau for `ρ_x = u`.
    pub a2: ButcherTableau,
    /// Spatial tableau for `v`.
    pub a3: ButcherTableau,
    /// Spatial tableau for `w`.
    pub a4: ButcherTableau,
}

impl KdvPrkFamily {
    /// Every tableau equal to `t`.
    pub fn uniform(t: ButcherTableau) -> Self {
        KdvPrkFamily {
            at1: t.clone(),
            at2: t.clone(),
            abar: t.clone(),
            a1: t.clone(),
            a2: t.clone(),
            a3: t.clone(),
            a4: t,
        }
    }

    /// Every tableau equal to the implicit midpoint rule.
    pub fn midpoint() -> Self {
        Self::uniform(ButcherTableau::midpoint())
    }

    /// Symplectic-Euler pairing satisfying every condition.
    pub fn symplectic_euler() -> Self {
        let (e0, e1) = (ButcherTableau::explicit_euler(), ButcherTableau::implicit_euler());
        KdvPrkFamily {
            at1: e0.clone(),
            at2: e1.clone(),
            abar: e0.clone(),
            a1: e0.clone(),
            a2: e1.clone(),
            a3: e0.clone(),
            a4: e1,
        }
    }

    /// The opposite symplectic-Euler pairing.
    pub fn symplectic_euler_flipped() -> Self {
        let (e0, e1) = (ButcherTableau::explicit_euler(), ButcherTableau::implicit_euler());
        KdvPrkFamily {
            at1: e1.clone(),
            at2: e0.clone(),
            abar: e1.clone(),
            a1: e1.clone(),
            a2: e0.clone(),
            a3: e1.clone(),
            a4: e0,
        }
    }
}

/// Residuals of the KdV condition families.
pub fn check_prk_kdv(f: &KdvPrkFamily) -> Result<ConditionReport, TableauError> {
    let r = f.at1.s;
    let s = f.a1.s;
    if r == 0 || s == 0 {
        return Err(TableauError::Empty("kdv family"));
    }
    same_stages("at2", &f.at2, r)?;
    same_stages("abar", &f.abar, r)?;
    for (role, t) in [("a2", &f.a2), ("a3", &f.a3), ("a4", &f.a4)] {
        same_stages(role, t, s)?;
    }
    let mut rep = ConditionReport::default();
    let (at1, at2, ab) = (&f.at1, &f.at2, &f.abar);
    rep.push("temporal", max_over(r, |m, n| at1.a(m, n) * at2.b(n) + at1.b(m) * at2.a(n, m) - at1.b(m) * at2.b(n)));
    rep.push("noise-temporal", max_over(r, |m, n| ab.a(m, n) * at2.b(n) + ab.b(m) * at2.a(n, m) - ab.b(m) * at2.b(n)));
    let (a1, a2, a3, a4) = (&f.a1, &f.a2, &f.a3, &f.a4);
    rep.push("spatial-rho-v", max_over(s, |i, j| a3.a(i, j) * a2.b(i) + a3.b(j) * a2.a(j, i) - a2.b(i) * a3.b(j)));
    rep.push("spatial-u-w", max_over(s, |i, j| a1.a(i, j) * a4.b(i) + a1.b(j) * a4.a(j, i) - a4.b(i) * a1.b(j)));
    rep.push("weights-spatial-3", max_diff(a2, a3));
    rep.push("weights-spatial-4", max_diff(a2, a4));
    rep.push("weights-temporal", max_diff(at1, at2));
    Ok(rep)
}
