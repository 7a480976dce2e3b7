pub mod ensembles;
pub mod error;
pub mod limits;
pub mod moments;
pub mod montecarlo;
pub mod processes;
pub mod rng;
pub mod suite;

pub use error::{Error, Result};
