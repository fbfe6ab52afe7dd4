pub mod dataset;
pub mod error;
pub mod features;
pub mod pipeline;
pub mod plasticity;
pub mod readout;
pub mod reservoir;
pub mod sparse;
pub mod spectral;
pub mod wavelet;

pub use error::{Error, ErrorKind, Result};
