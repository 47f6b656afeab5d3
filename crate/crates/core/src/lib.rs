pub mod align;
pub mod cli;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod matrix;
pub mod senti;
pub mod sgns;
pub mod shift;
pub mod synth;

pub use error::{Error, Result};
