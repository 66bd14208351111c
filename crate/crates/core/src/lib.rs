//! Wasserstein-regularized score-based diffusion for downscaling gridded
//! intensity fields.

pub mod error;
pub mod grid;
pub mod metrics;
pub mod rng;
pub mod scorenet;
pub mod sde;
pub mod tiled;
pub mod training;
pub mod transport;

pub use error::{Error, Result};
pub use grid::{ChannelRole, ConditionTensor, GridField, Space};
