pub mod acquisition;
pub mod design;
pub mod engine;
pub mod error;
pub mod gate;
pub mod linalg;
pub mod objectives;
pub mod optimizer;
pub mod prior;
pub mod rng;
pub mod space;
pub mod surrogate;
pub mod synthesis;

pub use error::{Error, Result};
