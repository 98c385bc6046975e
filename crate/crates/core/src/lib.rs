pub mod error;
pub mod experiments;
pub mod kernel;
pub mod kmeans;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod par;
pub mod pipeline;
pub mod sdp;
pub mod spectral;

pub use error::{Error, Result};
