//! Scattering theory for the Schrödinger operator
//! `-d²/dx² + λ/cosh²x + q(x)` with `q` compactly supported.
//!
//! The crate is layered bottom-up: complex special functions, the exactly
//! solvable Pöschl-Teller layer, transformation kernels, perturbed Jost
//! solutions, zero location, asymptotic branch predictions and Hadamard
//! reconstruction. A command-line front end lives in [`cli`].

pub mod asymptotics;
pub mod cli;
pub mod error;
pub mod hadamard;
pub mod kernel;
pub mod perturbed;
pub mod pt_exact;
pub mod quad;
pub mod resonances;
pub mod specfun;

pub use error::{Error, Result};
pub use num_complex::Complex64 as Complex;
