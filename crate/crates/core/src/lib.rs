pub mod adversary;
pub mod analysis;
pub mod crypto;
pub mod error;
pub mod seed;
pub mod simulator;
pub mod protocol;
pub mod topology;

pub use error::{Error, Result};
