pub mod dressed;
pub mod error;
pub mod inequalities;
pub mod linalg;
pub mod lindblad;
pub mod montecarlo;
pub mod opalg;
pub mod scan;
pub mod sensors;
pub mod validation;

pub use error::{Error, Result};
