pub mod error;
pub mod cmbp;
pub mod corpus;
pub mod network;
pub mod trainer;
pub mod tracker;
pub mod cli;

pub use error::{Error, Result};
