//! Electromagnetic-transient simulation of switched-mode power-supply loads under
//! voltage sags, with component sizing, fundamental power analysis and a four-bus
//! short-term voltage stability study.

pub mod analysis;
pub mod circuit;
pub mod cli;
pub mod error;
pub mod fourbus;
pub mod grid;
pub mod loads;
pub mod scenario;
pub mod sizing;

pub use error::{Error, Result};
