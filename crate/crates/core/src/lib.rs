//! Eating-gesture detection from tri-axial wrist accelerometer data.
//!
//! The pipeline runs in five stages, each in its own module:
//!
//! - [`ingest`]: parse `t_ms,x,y,z` recordings and JSON span annotations,
//!   check sampling regularity and cut supervisor-trimmed segments.
//! - [`window`]: slide fixed-length windows over segments, balance classes
//!   by segment repetition and split train/test.
//! - [`lstm`]: the FC → LSTM → LSTM → FC network with analytic
//!   backpropagation through time, a finite-difference checker, Adam, and
//!   checkpoints.
//! - [`train`]: the seeded training loop, history and prediction.
//! - [`eval`]: confusion matrices, one-vs-rest metrics and report rendering.
//!
//! [`synthetic`] generates labelled motif data for demos and end-to-end
//! checks. See the `examples/` directory for one runnable program per stage.

pub mod dataset_file;
pub mod eval;
pub mod fsutil;
pub mod ingest;
pub mod lstm;
pub mod scalar;
pub mod synthetic;
pub mod train;
pub mod window;

pub use scalar::{Precision, Scalar};
