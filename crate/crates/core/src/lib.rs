//! Counterdiabatic driving terms from Lanczos chains in operator space.

pub mod agp;
pub mod basis;
pub mod dynamics;
pub mod error;
pub mod lanczos;
pub mod linalg;
pub mod measure;
pub mod models;
pub mod operator;
pub mod pauli;
pub mod runner;
pub mod spectral;
pub mod variational;
pub mod wavefunction;

pub use error::{CdError, Result};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex<f64>;
