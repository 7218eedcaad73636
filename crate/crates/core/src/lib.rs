pub mod closedform;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod manifold;
pub mod quad;
pub mod sampling;
pub mod specfun;

pub use error::{Error, Result};
