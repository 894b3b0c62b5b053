//! Face presentation attack detection from stacked grayscale, near-infrared
//! and depth images using patch-wise convolutional autoencoders.

pub mod baseline;
pub mod cli;
pub mod dataio;
pub mod error;
pub mod eval;
pub mod models;
pub mod pipeline;
pub mod preproc;
pub mod tensorcore;
pub mod trainer;

pub use error::{PadError, Result};
