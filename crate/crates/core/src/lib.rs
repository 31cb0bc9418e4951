pub mod baseline;
pub mod calibration;
pub mod claims;
pub mod cohort;
pub mod error;
pub mod eval;
pub mod features;
pub mod model;
pub mod pipeline;
pub mod rng;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
