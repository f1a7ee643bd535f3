//! Tensor factor models: loading-space estimation by pre-averaging and
//! iterative projection, bootstrap rank selection, HOSVD/HOOI baselines,
//! a simulation engine and a Monte Carlo harness.
//!
//! Modes are 0-based throughout the API.

pub mod baselines;
pub mod bench;
pub mod cli;
pub mod config;
pub mod dgp;
pub mod error;
pub mod io;
pub mod loading;
pub mod preaverage;
pub mod projection;
pub mod rank;
pub mod tensor;

pub use error::{Error, Result};
pub use loading::{LoadingEstimate, Method};
pub use tensor::{Matrix, Tensor, TensorSeries, Vector};
