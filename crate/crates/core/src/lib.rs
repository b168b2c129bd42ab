//! Deterministic simulator and control engine for an autonomous camera crew:
//! zone-triggered camera selection, switch-matrix recording and a virtual
//! PTZ cinematographer.

pub mod cinema;
pub mod detection;
pub mod error;
pub mod geometry;
pub mod metrics;
pub mod output;
pub mod recorder;
pub mod scenario;
pub mod scene;
pub mod selection;
pub mod sim;
pub mod video;

pub use error::{Error, Result};
