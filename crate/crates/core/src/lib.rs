//! Hysteresis modelling: a Preisach simulator used as data oracle, neural
//! operator and recurrent surrogates, training/evaluation, and file formats.

pub mod datagen;
pub mod error;
pub mod io;
pub mod model;
pub mod operators;
pub mod preisach;
pub mod recurrent;
pub mod spotcheck;
pub mod train;

pub use error::{Error, Result};
pub use model::{Arch, ModelConfig, Pass};
