pub mod dmd;
pub mod dmdc;
pub mod error;
pub mod io;
pub mod linalg;
pub mod rom;
pub mod synth;

#[cfg(test)]
mod testing;

pub use error::{DmdcError, Result};
