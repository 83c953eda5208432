//! Two-dimensional free-interface ideal incompressible MHD.

pub mod error;
pub mod spectral;

pub use error::{Error, Result};
pub mod geometry;
pub mod kinematics;
pub mod plasma;
pub mod vacuum;
pub mod tensor;
pub mod energy;
pub mod runner;
pub mod verifier;
