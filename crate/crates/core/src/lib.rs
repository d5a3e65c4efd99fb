//! Core of an EEG-to-EMG brain-muscle interface.
//!
//! Every numeric routine is generic over [`Real`] (`f32` or `f64`); the
//! aliases below fix the scalar to `f64`, which is what the command line
//! tools and the real-time service use.

pub mod control;
pub mod dsp;
pub mod error;
pub mod metrics;
pub mod neural;
pub mod scalar;
pub mod session;
pub mod signal;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Signal = signal::MultiChannelSignal<f64>;
pub type Cascade = dsp::BiquadCascade<f64>;
pub type Regressor = neural::RegressorModel<f64>;
pub type Classifier = neural::ClassifierModel<f64>;
pub type Controller = control::DpController<f64>;
pub type Windows = Vec<session::WindowPair<f64>>;
