//! Exact non-Markovian dynamics of coupled cavity arrays in a common bosonic
//! bath, computed by a time-local master equation with memory coefficients
//! and by linear quantum-state-diffusion trajectory ensembles.

pub mod coeffs;
pub mod error;
pub mod exec;
pub mod grid;
pub mod hilbert;
pub mod linalg;
pub mod model;
pub mod observables;
pub mod propagators;
pub mod qsd;
pub mod scenario;

pub use error::{Error, Result};
