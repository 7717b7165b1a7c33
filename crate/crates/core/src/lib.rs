pub mod complex;
pub mod error;
pub mod learn;
pub mod maxwell2d;
pub mod mesher;
pub mod phcore;
pub mod physlab;
pub mod rng;
pub mod stepper;
pub mod wavegen;

pub use error::{Error, Result};
