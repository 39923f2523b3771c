//! Bayesian MARS emulation and calibration of spatially distributed
//! simulator inputs represented by truncated 2-D DCT coefficients.

pub mod cli;
pub mod config;
pub mod dct;
pub mod design;
pub mod emulator;
pub mod error;
pub mod forward;
pub mod posterior;
pub mod sampler;
pub mod snapshot;
pub mod stats;
pub mod table;
pub mod upscale;

pub use dct::{CoeffSelection, CoeffVector, SpatialField};
pub use emulator::{BasisFunction, BmarsState, TrainingSet};
pub use error::{Error, Result};
pub use posterior::{Hyperparams, ObservationSet};
pub use sampler::{ChainConfig, ChainInit, PosteriorStore};
