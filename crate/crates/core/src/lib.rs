//! Coalescing and annihilating Brownian motions on the line.
//!
//! Particles move as independent Brownian motions (generator `Δ`, so each
//! coordinate has variance `2t`) and a colliding pair annihilates with
//! probability `θ` or coalesces with probability `1 - θ`. At every fixed
//! time the particle configuration is a Pfaffian point process whose kernel
//! is built from a scalar solution of the heat equation on the wedge
//! `{x < y}`.
//!
//! The crate provides:
//!
//! * [`pfaffian`]: Pfaffians and kernel-matrix assembly,
//! * [`kernel`]: the scalar kernel `K_t^f` and its derivatives,
//! * [`entrance`]: initial data / spin functions labelling entrance laws,
//! * [`sim`]: a seeded, replica-parallel Monte Carlo simulator,
//! * [`harness`]: analytic-versus-simulation checks and the Fredholm
//!   Pfaffian series for Laplace functionals.
//!
//! ```
//! use cabm::entrance::InitialData;
//! use cabm::kernel::ScalarKernel;
//!
//! // Maximal entrance law (a particle "everywhere" at time 0), coalescing case.
//! let k = ScalarKernel::new(InitialData::Maximal, 0.0).unwrap();
//! let gap = k.value(1.0, -1.0, 1.0).unwrap(); // P(no particle in (-1, 1))
//! assert!((gap - 0.317311).abs() < 1e-6);
//! ```

// `!(x > 0.0)` is deliberate: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acceptance;
pub mod entrance;
pub mod error;
pub mod harness;
pub mod io;
pub mod kernel;
pub mod pfaffian;
pub mod quadrature;
pub mod sim;

pub use error::{Error, Result};
