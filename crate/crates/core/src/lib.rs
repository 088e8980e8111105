//! Jamming detection on IQ constellation bitmaps.
//!
//! The crate simulates legitimate and jammed baseband recordings, rasterizes
//! them into constellation bitmaps, trains a two-class CNN against artificial
//! uniform attack data and a convolutional autoencoder baseline, and scores
//! both with false-alarm / misdetection curves. A low-dimensional harness
//! checks that a two-class network trained against uniform data ranks inputs
//! like the likelihood of the legitimate class.

pub mod dataset;
pub mod detector;
pub mod error;
pub mod manifest;
pub mod neural;
pub mod pipeline;
pub mod raster;
pub mod rng;
pub mod sim;

pub use error::{Error, Result};
