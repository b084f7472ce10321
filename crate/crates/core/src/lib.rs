//! Reflected backward SDE solvers and numerical checks of the local
//! representation of their generators.

pub mod applications;
pub mod error;
pub mod io;
pub mod model;
pub mod pathsim;
pub mod representation;
pub mod solvers;

pub use error::{Error, Result};
