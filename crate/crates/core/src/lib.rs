//! Grant-free access simulator for extra-large arrays built from
//! subarrays: channel synthesis with per-subarray path visibility,
//! hybrid-combining measurements, block-sparse activity detection and
//! channel estimation, and subspace-based user localization.

pub mod channel;
pub mod dump;
pub mod error;
pub mod frontend;
pub mod geometry;
pub mod harness;
pub mod linalg;
pub mod localization;
pub mod recovery;
pub mod rng;

pub use error::{Error, Result};
