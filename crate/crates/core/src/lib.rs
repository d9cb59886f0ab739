pub mod diagnostics;
pub mod error;
pub mod evolution;
pub mod grid;
pub mod helmholtz;
pub mod io;
pub mod models;
pub mod quasistatic;
pub mod reduce;
pub mod scenario;
pub mod spectral;
pub mod validate;

pub use error::{Error, Result};
