//! Spiking networks with learnable neuron dynamics.

pub mod datasets;
pub mod dynamics;
pub mod error;
pub mod experiment;
pub mod meta;
pub mod network;
pub mod training;

pub use error::{Error, Result};
