pub mod error;
pub mod metrics;
pub mod model;
pub mod cli;
pub mod data;
pub mod dsp;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
