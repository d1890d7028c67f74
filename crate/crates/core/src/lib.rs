//! Operating-room semantic scene graph toolkit.
//!
//! Covers the geometric half of a scene-graph pipeline (multi-view fusion,
//! per-point instance labeling, training augmentations), human tracking and
//! clinical role inference on top of generated graphs, and the evaluation
//! protocol for relations, roles, poses and boxes. Neural predictors are
//! consumed through file adapters; a synthetic take generator provides
//! ground truth for end-to-end checks.

pub mod augment;
pub mod baseline;
pub mod error;
pub mod geometry;
pub mod io;
pub mod labeling;
pub mod metrics;
pub mod model;
pub mod roles;
pub mod synth;
pub mod tracking;
mod rng;

pub use error::{Error, Result};
