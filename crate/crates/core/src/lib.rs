pub mod assembly;
pub mod elements;
pub mod error;
pub mod linalg;
pub mod mesh;
pub mod mms;
pub mod norms;
pub mod polynomial;
pub mod quadrature;
pub mod spaces;
pub mod study;
pub mod timestepping;

pub use error::{Error, Result};
