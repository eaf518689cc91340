//! Pseudo-spectral solver for the dissipative surface quasi-geostrophic
//! equation on the periodic torus, plus the diagnostics used to probe
//! eventual regularization: a test-function class with transport-cost
//! size control, Littlewood-Paley Holder estimation, backward dual
//! evolution, and the parameter chain that turns those pieces into an
//! explicit regularization time.

pub mod chain;
pub mod error;
pub(crate) mod fft;
pub mod grid;
pub mod holder;
pub mod kernel;
pub mod lp;
pub mod mollifier;
pub mod monitor;
pub mod solver;
pub mod spectral;
pub mod transport;
pub mod uclass;

pub use error::{CoreError, Result};
pub use grid::{GridField, TorusGrid};
pub use spectral::SpectralField;
