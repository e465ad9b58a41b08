pub mod error;
pub mod eval;
pub mod linalg;
pub mod linear;
pub mod matrix;
pub mod numeric;
pub mod oracle;
pub mod runtime;
pub mod sharing;
pub mod timeseries;
pub mod tree;

pub use error::{Error, Result};
pub use matrix::Matrix;
pub use numeric::Backend;
