pub mod acquisition;
pub mod demo;
pub mod dist;
pub mod error;
pub mod kernels;
mod linalg;
pub mod gp;
pub mod scoring;

pub use error::{Error, Result};
