//! Scalar abstraction shared by plain and forward-mode differentiated
//! evaluation.
//!
//! Cell and box-scheme residuals are written once against [`Real`]. With
//! `f64` they give values; with [`Dual`] they give exact directional
//! derivatives, which supply Newton Jacobians and tangent maps without
//! hand-coded derivative formulas.

use core::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

/// Minimal real-number interface used by the scheme residuals.
pub trait Real:
    Copy
    + core::fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
{
    /// Constant with zero derivative.
    fn cst(x: f64) -> Self;
    /// Primal value.
    fn value(self) -> f64;
    /// Sine.
    fn sin(self) -> Self;
    /// Cosine.
    fn cos(self) -> Self;
}

impl Real for f64 {
    #[inline]
    fn cst(x: f64) -> f64 {
        x
    }
    #[inline]
    fn value(self) -> f64 {
        self
    }
    #[inline]
    fn sin(self) -> f64 {
        libm::sin(self)
    }
    #[inline]
    fn cos(self) -> f64 {
        libm::cos(self)
    }
}

/// Forward-mode dual number `v + d ε` with `ε² = 0`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Dual {
    /// Primal value.
    pub v: f64,
    /// Derivative along the seeded direction.
    pub d: f64,
}

impl Dual {
    /// Dual number with explicit value and derivative.
    #[inline]
    pub const fn new(v: f64, d: f64) -> Dual {
        Dual { v, d }
    }
}

impl Real for Dual {
    #[inline]
    fn cst(x: f64) -> Dual {
        Dual { v: x, d: 0.0 }
    }
    #[inline]
    fn value(self) -> f64 {
        self.v
    }
    #[inline]
    fn sin(self) -> Dual {
        Dual { v: libm::sin(self.v), d: self.d * libm::cos(self.v) }
    }
    #[inline]
    fn cos(self) -> Dual {
        Dual { v: libm::cos(self.v), d: -self.d * libm::sin(self.v) }
    }
}

impl Add for Dual {
    type Output = Dual;
    #[inline]
    fn add(self, o: Dual) -> Dual {
        Dual { v: self.v + o.v, d: self.d + o.d }
    }
}

impl AddAssign for Dual {
    #[inline]
    fn add_assign(&mut self, o: Dual) {
        self.v += o.v;
        self.d += o.d;
    }
}

impl Sub for Dual {
    type Output = Dual;
    #[inline]
    fn sub(self, o: Dual) -> Dual {
        Dual { v: self.v - o.v, d: self.d - o.d }
    }
}

impl Mul for Dual {
    type Output = Dual;
    #[inline]
    fn mul(self, o: Dual) -> Dual {
        Dual { v: self.v * o.v, d: self.d * o.v + self.v * o.d }
    }
}

impl Div for Dual {
    type Output = Dual;
    #[inline]
    fn div(self, o: Dual) -> Dual {
        let q = self.v / o.v;
        Dual { v: q, d: (self.d - q * o.d) / o.v }
    }
}

impl Neg for Dual {
    type Output = Dual;
    #[inline]
    fn neg(self) -> Dual {
        Dual { v: -self.v, d: -self.d }
    }
}
