pub mod adversaries;
pub mod analysis;
pub mod error;
pub mod linalg;
pub mod protocol;
pub mod rng;
pub mod states;

pub use error::{Error, Result};
