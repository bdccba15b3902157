//! Cross-diffusion induced (Turing) instability of the SKT competition model on
//! networks: graph families and Laplacians, spectra, linear stability,
//! nonlinear network dynamics, the 1-D finite-difference bridge and
//! reproduction pipelines.

pub mod cli;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod graphs;
pub mod output;
pub mod pde_bridge;
pub mod rng;
pub mod spectra;
pub mod stability;

pub use error::{Error, Result};
