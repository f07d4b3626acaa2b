//! The three stochastic Hamiltonian PDEs in multi-symplectic form.
//!
//! Every system is written as `M z_t + K z_x = ∇S₁(z) + ∇S₂(z) ∘ Ẇ` with a
//! four-component state and constant skew-symmetric `M`, `K`:
//!
//! * wave, `z = (u, p, v, w)`, with `p` a structural placeholder;
//! * cubic Schrödinger, `z = (p, q, v, w)` for `ψ = p + iq`;
//! * KdV, `z = (u, v, ρ, w)` with dispersion `β` and noise amplitude `λ`.

use crate::integrators::GridState;
use crate::scalar::Real;

/// State dimension shared by all systems.
pub const DIM: usize = 4;

/// Dense `4 × 4` matrix.
pub type Mat4 = [[f64; DIM]; DIM];

/// Errors raised by [`make_system`] and [`Nonlinearity::from_name`].
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SystemError {
    /// The nonlinearity name is not in the menu.
    #[error("unknown nonlinearity `{0}` (expected sin, identity, cubic, zero or one)")]
    UnknownNonlinearity(alloc::string::String),
    /// A KdV parameter is not positive.
    #[error("KdV parameter `{0}` must be positive")]
    NonPositive(&'static str),
}

/// Scalar nonlinearity `f` (or `g`) of the wave equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Nonlinearity {
    /// `sin u`.
    Sin,
    /// `u`.
    Identity,
    /// `u³`.
    Cubic,
    /// `0`.
    Zero,
    /// `1`.
    One,
}

impl Nonlinearity {
    /// Parses a menu name.
    pub fn from_name(name: &str) -> Result<Self, SystemError> {
        match name {
            "sin" => Ok(Nonlinearity::Sin),
            "identity" | "u" => Ok(Nonlinearity::Identity),
            "cubic" | "u3" => Ok(Nonlinearity::Cubic),
            "zero" | "0" => Ok(Nonlinearity::Zero),
            "one" | "1" => Ok(Nonlinearity::One),
            other => Err(SystemError::UnknownNonlinearity(other.into())),
        }
    }

    /// Menu name.
    pub fn name(self) -> &'static str {
        match self {
            Nonlinearity::Sin => "sin",
            Nonlinearity::Identity => "identity",
            Nonlinearity::Cubic => "cubic",
            Nonlinearity::Zero => "zero",
            Nonlinearity::One => "one",
        }
    }

    /// Value at `u`, generic over the scalar type.
    #[inline]
    pub fn eval<T: Real>(self, u: T) -> T {
        match self {
            Nonlinearity::Sin => u.sin(),
            Nonlinearity::Identity => u,
            Nonlinearity::Cubic => u * u * u,
            Nonlinearity::Zero => T::cst(0.0),
            Nonlinearity::One => T::cst(1.0),
        }
    }

    /// Derivative at `u`.
    #[inline]
    pub fn deriv(self, u: f64) -> f64 {
        match self {
            Nonlinearity::Sin => libm::cos(u),
            Nonlinearity::Identity => 1.0,
            Nonlinearity::Cubic => 3.0 * u * u,
            Nonlinearity::Zero | Nonlinearity::One => 0.0,
        }
    }

    /// Antiderivative vanishing at `u = 0`.
    #[inline]
    pub fn antideriv(self, u: f64) -> f64 {
        match self {
            Nonlinearity::Sin => 1.0 - libm::cos(u),
            Nonlinearity::Identity => 0.5 * u * u,
            Nonlinearity::Cubic => 0.25 * u * u * u * u,
            Nonlinearity::Zero => 0.0,
            Nonlinearity::One => u,
        }
    }
}

/// Descriptor selecting a system and its parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SystemSpec {
    /// `u_tt = u_xx − f(u) + g(u) ∘ Ẇ`.
    Wave {
        /// Drift nonlinearity.
        f: Nonlinearity,
        /// Diffusion nonlinearity.
        g: Nonlinearity,
    },
    /// Cubic Schrödinger with multiplicative noise.
    Nls,
    /// KdV with additive noise.
    Kdv {
        /// Dispersion coefficient.
        beta: f64,
        /// Noise amplitude.
        lambda: f64,
    },
}

/// A fully specified system `M z_t + K z_x = ∇S₁ + ∇S₂ ∘ Ẇ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HamiltonianSystem {
    spec: SystemSpec,
    m: Mat4,
    k: Mat4,
}

/// Builds a system from its descriptor.
pub fn make_system(spec: SystemSpec) -> Result<HamiltonianSystem, SystemError> {
    let mut m = [[0.0; DIM]; DIM];
    let mut k = [[0.0; DIM]; DIM];
    match spec {
        SystemSpec::Wave { .. } => {
            m[0][2] = 1.0;
            m[2][0] = -1.0;
            k[0][3] = -1.0;
            k[3][0] = 1.0;
        }
        SystemSpec::Nls => {
            m[0][1] = -1.0;
            m[1][0] = 1.0;
            k[0][2] = 1.0;
            k[1][3] = 1.0;
            k[2][0] = -1.0;
            k[3][1] = -1.0;
        }
        SystemSpec::Kdv { beta, lambda } => {
            if !(beta > 0.0 && beta.is_finite()) {
                return Err(SystemError::NonPositive("beta"));
            }
            if !(lambda > 0.0 && lambda.is_finite()) {
                return Err(SystemError::NonPositive("lambda"));
            }
            m[0][2] = -0.5;
            m[2][0] = 0.5;
            k[0][3] = -beta;
            k[1][2] = -1.0;
            k[2][1] = 1.0;
            k[3][0] = beta;
        }
    }
    Ok(HamiltonianSystem { spec, m, k })
}

impl HamiltonianSystem {
    /// Descriptor the system was built from.
    pub fn spec(&self) -> SystemSpec {
        self.spec
    }

    /// State dimension.
    pub fn dim(&self) -> usize {
        DIM
    }

    /// Short label.
    pub fn label(&self) -> &'static str {
        match self.spec {
            SystemSpec::Wave { .. } => "wave",
            SystemSpec::Nls => "nls",
            SystemSpec::Kdv { .. } => "kdv",
        }
    }

    /// Temporal structure matrix `M`.
    pub fn m(&self) -> &Mat4 {
        &self.m
    }

    /// Spatial structure matrix `K`.
    pub fn k(&self) -> &Mat4 {
        &self.k
    }

    /// Drift Hamiltonian `S₁`.
    pub fn s1(&self, z: &[f64; DIM]) -> f64 {
        match self.spec {
            SystemSpec::Wave { f, .. } => 0.5 * (z[3] * z[3] - z[2] * z[2]) - f.antideriv(z[0]),
            SystemSpec::Nls => {
                let r = z[0] * z[0] + z[1] * z[1];
                -0.25 * r * r - 0.5 * (z[2] * z[2] + z[3] * z[3])
            }
            SystemSpec::Kdv { beta, .. } => z[0] * z[0] * z[0] / 6.0 - z[0] * z[1] + 0.5 * beta * z[3] * z[3],
        }
    }

    /// Diffusion Hamiltonian `S₂`.
    pub fn s2(&self, z: &[f64; DIM]) -> f64 {
        match self.spec {
            SystemSpec::Wave { g, .. } => g.antideriv(z[0]),
            SystemSpec::Nls => 0.5 * (z[0] * z[0] + z[1] * z[1]),
            SystemSpec::Kdv { lambda, .. } => lambda * z[2],
        }
    }

    /// `∇S₁`, generic over the scalar type.
    pub fn grad_s1<T: Real>(&self, z: &[T; DIM]) -> [T; DIM] {
        let zero = T::cst(0.0);
        match self.spec {
            SystemSpec::Wave { f, .. } => [-f.eval(z[0]), zero, -z[2], z[3]],
            SystemSpec::Nls => {
                let r = z[0] * z[0] + z[1] * z[1];
                [-(r * z[0]), -(r * z[1]), -z[2], -z[3]]
            }
            SystemSpec::Kdv { beta, .. } => [T::cst(0.5) * z[0] * z[0] - z[1], -z[0], zero, T::cst(beta) * z[3]],
        }
    }

    /// `∇S₂`, generic over the scalar type.
    pub fn grad_s2<T: Real>(&self, z: &[T; DIM]) -> [T; DIM] {
        let zero = T::cst(0.0);
        match self.spec {
            SystemSpec::Wave { g, .. } => [g.eval(z[0]), zero, zero, zero],
            SystemSpec::Nls => [z[0], z[1], zero, zero],
            SystemSpec::Kdv { lambda, .. } => [zero, zero, T::cst(lambda), zero],
        }
    }

    /// Hessian of `S₁`.
    pub fn hess_s1(&self, z: &[f64; DIM]) -> Mat4 {
        let mut h = [[0.0; DIM]; DIM];
        match self.spec {
            SystemSpec::Wave { f, .. } => {
                h[0][0] = -f.deriv(z[0]);
                h[2][2] = -1.0;
                h[3][3] = 1.0;
            }
            SystemSpec::Nls => {
                let (p, q) = (z[0], z[1]);
                h[0][0] = -(3.0 * p * p + q * q);
                h[0][1] = -2.0 * p * q;
                h[1][0] = -2.0 * p * q;
                h[1][1] = -(p * p + 3.0 * q * q);
                h[2][2] = -1.0;
                h[3][3] = -1.0;
            }
            SystemSpec::Kdv { beta, .. } => {
                h[0][0] = z[0];
                h[0][1] = -1.0;
                h[1][0] = -1.0;
                h[3][3] = beta;
            }
        }
        h
    }

    /// Hessian of `S₂`.
    pub fn hess_s2(&self, z: &[f64; DIM]) -> Mat4 {
        let mut h = [[0.0; DIM]; DIM];
        match self.spec {
            SystemSpec::Wave { g, .. } => h[0][0] = g.deriv(z[0]),
            SystemSpec::Nls => {
                h[0][0] = 1.0;
                h[1][1] = 1.0;
            }
            SystemSpec::Kdv { .. } => {}
        }
        h
    }

    /// Components whose `M`-row vanishes; their equations are constraints
    /// with no time derivative.
    pub fn constraint_rows(&self) -> [bool; DIM] {
        let mut out = [false; DIM];
        for (r, o) in self.m.iter().zip(out.iter_mut()) {
            *o = r.iter().all(|&x| x == 0.0);
        }
        out
    }
}

/// Initial spatial profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    /// Identically zero.
    Zero,
    /// `sech x`.
    Sech,
    /// `sin x`.
    Sin,
}

impl Profile {
    /// Parses a profile name.
    pub fn from_name(name: &str) -> Option<Profile> {
        match name {
            "zero" => Some(Profile::Zero),
            "sech" => Some(Profile::Sech),
            "sin" => Some(Profile::Sin),
            _ => None,
        }
    }

    /// Value, first and second derivative at `x`.
    pub fn jet(self, x: f64) -> (f64, f64, f64) {
        match self {
            Profile::Zero => (0.0, 0.0, 0.0),
            Profile::Sech => {
                let s = 1.0 / libm::cosh(x);
                (s, -s * libm::tanh(x), s * (1.0 - 2.0 * s * s))
            }
            Profile::Sin => (libm::sin(x), libm::cos(x), -libm::sin(x)),
        }
    }

    /// `∫_{x_left}^{x} profile`.
    pub fn integral(self, x_left: f64, x: f64) -> f64 {
        match self {
            Profile::Zero => 0.0,
            Profile::Sech => libm::atan(libm::sinh(x)) - libm::atan(libm::sinh(x_left)),
            Profile::Sin => libm::cos(x_left) - libm::cos(x),
        }
    }
}

/// Initial state on `nodes` for the given profile.
///
/// Wave: `u = 0`, `v = u_t = profile`, `w = u_x = 0`. Schrödinger:
/// `p = profile`, `q = 0`, `v = p_x`, `w = q_x`. KdV: `u = profile`,
/// `w = u_x`, `ρ = ∫_{x_left} u`, `v = u²/2 + β u_xx`.
pub fn initial_data(system: &HamiltonianSystem, profile: Profile, nodes: &[f64], x_left: f64) -> GridState {
    let z = nodes
        .iter()
        .map(|&x| {
            let (a, da, dda) = profile.jet(x);
            match system.spec() {
                SystemSpec::Wave { .. } => [0.0, 0.0, a, 0.0],
                SystemSpec::Nls => [a, 0.0, da, 0.0],
                SystemSpec::Kdv { beta, .. } => [a, 0.5 * a * a + beta * dda, profile.integral(x_left, x), da],
            }
        })
        .collect();
    GridState::new(nodes.to_vec(), z, 0.0)
}
