//! Classical scalar Preisach hysteresis: relay densities, Everett maps,
//! reversal-point memory and the forward/inverse sequence maps.

mod density;
mod everett;
mod model;
mod state;

pub use density::{DensityKind, PreisachDensity, Relay};
pub use everett::EverettMap;
pub use density::{DEFAULT_H_SAT, DEFAULT_N_GRID};
pub use model::{InverseOptions, PreisachModel, DEFAULT_B_SAT};
pub use state::{Direction, PreisachState};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PreisachError {
    #[error("everett domain: need h_sat >= alpha >= beta >= -h_sat, got alpha={alpha}, beta={beta} (h_sat={h_sat})")]
    Domain { alpha: f64, beta: f64, h_sat: f64 },
    #[error("field {value} at step {index} exceeds saturation field {h_sat}")]
    Saturation { value: f64, h_sat: f64, index: usize },
    #[error("flux density {value} at step {index} outside reachable band +/-{limit}")]
    Range { value: f64, limit: f64, index: usize },
    #[error("inverse did not converge at step {index} after {iterations} iterations (residual {residual:e})")]
    Convergence {
        index: usize,
        iterations: usize,
        residual: f64,
    },
    #[error("invalid density: {0}")]
    InvalidDensity(String),
}

pub type Result<T> = std::result::Result<T, PreisachError>;
