//! Multi-object tracking for fixed cameras on small devices.
//!
//! The processing chain per frame is: adaptive background subtraction
//! ([`segmenter`]), connected-component extraction with area and border
//! filtering ([`blobs`]), per-object template tracking ([`tracker`]), and
//! IoU-gated track lifecycle management ([`manager`]). [`pipeline`] wires
//! those stages to the video I/O layer and [`bench`] measures throughput on
//! synthetic scenes.
//!
//! Everything is deterministic for a fixed seed: randomized decisions go
//! through the counter-based generator in [`rng`], so runs are reproducible
//! bit for bit regardless of threading or platform.

pub mod bench;
pub mod blobs;
pub mod config;
pub mod geometry;
pub mod manager;
pub mod pipeline;
pub mod records;
pub mod rng;
pub mod segmenter;
pub mod tracker;
pub mod videoio;

pub use geometry::{BoundingBox, FrameDims};
