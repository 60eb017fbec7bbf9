//! Configuration, output writers and study drivers behind the `surfphase`
//! binary.

pub mod commands;
pub mod config;
pub mod error;
pub mod runner;
pub mod vtk;

pub use config::SimulationConfig;
pub use error::{AppError, Result};
