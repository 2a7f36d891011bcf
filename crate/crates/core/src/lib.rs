pub mod diagnostics;
pub mod error;
pub mod estimator;
pub mod experiments;
pub mod lti;
pub mod poly;
pub mod signals;

pub use error::{Error, Result};
