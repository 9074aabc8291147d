pub mod envs;
pub mod experiments;
pub mod error;
pub mod linalg;
pub mod scope;
pub mod seeds;
pub mod tilecoding;
mod textio;
pub mod trajectory;
pub mod value_eval;

pub use error::{Error, Result};
