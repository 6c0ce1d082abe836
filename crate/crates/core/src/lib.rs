//! Finite-element fluid-structure interaction solver with monolithic and
//! partitioned reduced basis pipelines.

pub mod ale;
pub mod error;
pub mod fem;
pub mod mesh;
pub mod offline_monolithic;
pub mod offline_partitioned;
pub mod online_rom;
pub mod params;
pub mod reduction;
pub mod time;
pub mod tooling;

pub use error::{FsiError, Result};
