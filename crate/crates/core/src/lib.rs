pub mod analysis;
pub mod cli;
pub mod config;
pub mod error;
pub mod fusion;
pub mod gradcheck;
pub mod meam;
pub mod model;
pub mod msam;
pub mod nn;
pub mod store;
pub mod tape;
pub mod train;

pub use config::{Components, FusionStrategy, ModelConfig};
pub use error::{Error, Result};
