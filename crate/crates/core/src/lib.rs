//! Adaptive video anomaly detection: dense optical flow, per-cell motion
//! statistics with k·σ tests, object occurrence maps and ROC evaluation.

pub mod config;
pub mod detector;
pub mod error;
pub mod evaluation;
pub mod frame_io;
pub mod motion_stats;
pub mod object_map;
pub mod optical_flow;
pub mod pipeline;
pub mod pooling;
pub mod render;
pub mod synthetic;

pub use error::{AadError, Result};
