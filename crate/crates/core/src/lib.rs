//! Lévy-driven CARMA processes sampled at high frequency.

pub mod alpha;
pub mod error;
pub mod levy;
pub mod linalg;
pub mod model;
pub mod poly;
pub mod recovery;
pub mod riemann;
pub mod spectral;

pub use error::{CarmaError, Result};
pub use levy::{Driver, IncrementSeries, InitialState, PathGrid};
pub use model::{CarmaModel, ModelSpec, ValidationReport, Violation};
pub use recovery::RecoveredIncrements;
pub use riemann::RiemannArma;
pub use spectral::{Provenance, SampledArma};
