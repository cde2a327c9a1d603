pub mod cli;
pub mod criterion;
pub mod error;
pub mod game;
pub mod measurement;
pub mod optimize;
pub mod quantum;
pub mod tomography;

pub use error::{Error, Result};
