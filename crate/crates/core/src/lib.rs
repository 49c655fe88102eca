//! Desk-scale simulator and analysis toolkit for OAM entanglement storage
//! experiments.

pub mod analysis;
pub mod config;
pub mod counts;
pub mod error;
pub mod hilbert;
pub mod memory;
pub mod oam_optics;
pub mod pipeline;
pub mod report;
pub mod source;

pub use error::{Error, Result};
