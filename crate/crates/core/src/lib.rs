//! Hybrid quantum-generator / classical-critic Wasserstein GAN for binary
//! neuronal spike trains.
//!
//! The generator is a patch generator: one small re-uploading circuit per
//! timestep, each producing the spike state of `n` neurons. The critic is a
//! single-hidden-layer ReLU network. Everything needed to train the pair and
//! to compare generated rasters against reference data lives here:
//!
//! * [`statevec`] dense statevector simulation for the ansatz gate set
//! * [`generator`] patch circuits, marginals, sampling, parameter-shift gradients
//! * [`critic`] the critic network and its manual backward pass
//! * [`optim`] Adam
//! * [`training`] losses, the 2:1 critic/generator schedule, logging
//! * [`checkpoint`] versioned binary checkpoints
//! * [`spikedata`] the `SPIKES v1` raster format, windowing, surrogate data
//! * [`stats`] firing rate, covariance, k-probability, autocorrelogram, JS divergence

pub mod checkpoint;
pub mod critic;
pub mod error;
pub mod generator;
pub mod kv;
pub mod optim;
pub mod quadrature;
pub mod rng;
pub mod spikedata;
pub mod stats;
pub mod statevec;
pub mod training;

pub use error::{Error, Result};
