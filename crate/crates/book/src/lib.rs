//! The guide in `book/` with its code listings compiled as doctests, so the
//! book cannot drift from the library.

#[doc = include_str!("../../../book/src/intro.md")]
pub mod intro {}

#[doc = include_str!("../../../book/src/pfaffians.md")]
pub mod pfaffians {}

#[doc = include_str!("../../../book/src/scalar-kernel.md")]
pub mod scalar_kernel {}

#[doc = include_str!("../../../book/src/initial-data.md")]
pub mod initial_data {}

#[doc = include_str!("../../../book/src/simulation.md")]
pub mod simulation {}

#[doc = include_str!("../../../book/src/verification.md")]
pub mod verification {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}

#[doc = include_str!("../../../README.md")]
pub mod readme {}
