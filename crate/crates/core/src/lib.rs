//! Free entropy of operator tuples estimated from matrix microstates.

pub mod cli;
pub mod entropy;
pub mod error;
pub mod extraction;
pub mod matrices;
pub mod moments;
pub mod oracle;
mod serde_ext;
pub mod words;
pub mod zones;

pub use error::{Error, Result};
