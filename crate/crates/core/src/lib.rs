//! Multi-symplectic integrators for one-dimensional stochastic Hamiltonian PDEs.
//!
//! The crate covers systems of the form
//!
//! ```text
//! M dz + K z_x dt = ∇S₁(z) dt + ∇S₂(z) ∘ dW
//! ```
//!
//! with skew-symmetric `M` and `K`, driven by a truncated Q-Wiener process.
//! Three full-grid discretizations are provided:
//!
//! * a local radial-basis-function (LRBF) collocation operator in space
//!   combined with the implicit midpoint rule in time ([`integrators::step_lrbf_midpoint`]);
//! * a splitting scheme that treats the deterministic part with a
//!   midpoint box scheme and the noise with an exact or symplectic-Euler
//!   map ([`integrators::step_splitting`]);
//! * a partitioned Runge–Kutta box scheme with the noise inside the stage
//!   equations ([`integrators::step_prk`]).
//!
//! Single space-time cells with arbitrary stage counts are solved by
//! [`integrators::solve_cell`], and [`geometry`] checks the discrete
//! multi-symplectic conservation laws on tangent pairs.
//!
//! The crate is `no_std` and needs only `alloc`. File formats, the command
//! line and the parallel Monte Carlo driver live in the companion `msym`
//! crate.

#![no_std]
#![forbid(unsafe_code)]
#![warn(missing_docs)]
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

pub mod dd;
pub mod geometry;
pub mod integrators;
pub mod linalg;
pub mod qwiener;
pub mod rbf;
pub mod scalar;
pub mod systems;
pub mod tableau;
