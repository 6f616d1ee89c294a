//! Numerical toolkit for the mass-subcritical focusing NLS in hat-Morrey
//! spaces: dyadic norms, the deformation group, split-step evolution,
//! ground states and a constructive profile decomposition.

pub mod error;
pub mod evolution;
pub mod grid;
pub mod group;
pub mod spaces;
pub mod profile;
pub mod stationary;

pub use error::{Error, Result};
pub use grid::{DyadicCube, FrequencyWindow, GridField, Space};
pub use num_complex::Complex64;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
