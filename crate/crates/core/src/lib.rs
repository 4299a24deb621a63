pub mod error;
pub mod systems;

pub use error::{Error, Result};
pub mod config;
pub mod dataset;
pub mod eval;
pub mod grid;
pub mod morse;
pub mod neural;
pub mod pipeline;
pub mod plot;
