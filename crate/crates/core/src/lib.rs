//! Stock-group selection with a ballistic simulated-bifurcation solver,
//! an event-driven trading engine, and a backcast simulator over tick feeds.
//!
//! The runnable programs under `examples/` walk through each layer.

pub mod backcast;
pub mod bench;
pub mod config;
pub mod engine;
pub mod error;
pub mod ising;
pub mod market;
pub mod matrix;
pub mod sb;
pub mod strategy;
pub mod synth;

pub use error::{Error, Result};
