pub mod autodiff;
pub mod data;
pub mod engine;
pub mod error;
pub mod metrics;
pub mod model;
pub mod par;
pub mod reference;

pub use error::{Error, Result};
