pub mod error;
pub mod heights;
pub mod integrals;
pub mod measure;
pub mod newton;
pub mod pairing;
pub mod poly;
pub mod rational;
pub mod roots;

pub use error::{Error, Result};
