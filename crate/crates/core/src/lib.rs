//! Stochastic Schrödinger unravelings of GKLS master equations.
//!
//! The crate is organised bottom-up:
//!
//! * [`linalg`]: dense complex operators, density matrices and superoperators
//!   (column-stacking vectorization, matrix exponential, kernels).
//! * [`generator`]: the GKLS generator, its dual, Ito/Stratonovich Hamiltonians,
//!   self-duality, exact evolution and stationary states, Kossakowski form.
//! * [`classifier`]: dephasing vs. decay channels, self-dual phases and the
//!   Hermitian decomposition of self-dual generators.
//! * [`noise`]: seedable Gaussian streams, correlated complex noise and the
//!   minimal real-noise reduction.
//! * [`trajectory`]: Ito, Stratonovich (Heun) and exact-unitary integrators and
//!   ensemble averaging.
//! * [`scenarios`] and [`cli`]: the model zoo, scenario files and the command
//!   line front end.

pub mod classifier;
pub mod cli;
pub mod error;
pub mod generator;
pub mod linalg;
pub mod noise;
pub mod scenarios;
pub mod trajectory;

pub use error::{Error, Result};
