pub mod error;
pub mod linalg;

pub use error::{Error, Result};
pub mod sdp;
pub mod signal;
pub mod spectral;
pub mod formulations;
pub mod experiment;
pub mod selftest;
