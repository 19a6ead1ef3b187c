//! Forward/inverse modelling toolkit for 3D finger-pose inference on a
//! capacitive pad grid.
//!
//! The crate provides the full pipeline for an ill-posed sensor-inference
//! problem: an analytic surrogate that maps a finger pose to a 10x16 frame
//! of pad readings ([`sim`]), reproducible corpus generation ([`dataset`]),
//! a small dense network with exact reverse-mode gradients that serves both
//! as a fast emulator of the surrogate and as a direct pose regressor
//! ([`net`]), gradient-descent inversion through the emulator ([`invert`]),
//! a particle filter that fuses the forward and inverse models with a
//! two-stage weighting scheme ([`filter`]), and the evaluation harness that
//! compares them ([`eval`]).
//!
//! Everything is deterministic under explicit seeds, including batch
//! operations run on the rayon thread pool (enabled by the default
//! `parallel` feature; disable it for a fully sequential build).

pub mod config;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod filter;
pub mod invert;
pub mod model;
pub mod net;
mod par;
pub mod sim;
pub mod types;

pub use error::{Error, Result};
pub use types::{FingerPose, PoseBounds, SensorFrame, SensorSpec};
