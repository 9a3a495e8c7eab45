//! Reply-to link prediction and thread disentanglement for multi-party chat.

pub mod autograd;
pub mod cli;
pub mod corpus;
pub mod encoder;
pub mod error;
pub mod gradcheck;
pub mod layercheck;
pub mod metrics;
pub mod model;
pub mod optim;
pub mod param;
pub mod pipeline;
pub mod structure;
pub mod tensor;

pub use error::{Error, Result};
