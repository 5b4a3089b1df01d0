pub mod complex;
pub mod curvature;
pub mod error;
pub mod fixtures;
pub mod forms;
pub mod geometry;
pub mod io;
pub mod pachner;

pub use error::{Error, Result};
