//! Dense `f64` tensors with reverse-mode differentiation, real FFT and
//! Daubechies wavelet kernels, Xavier initialization and Adam.

pub mod adam;
pub mod error;
pub mod fft;
pub mod gradcheck;
pub mod init;
mod linalg;
pub mod tape;
pub mod tensor;
pub mod wavelet;

pub use adam::{AdamConfig, AdamState};
pub use error::{Result, TensorError};
pub use fft::{irfft, rfft, rfft_modes};
pub use init::{rng_for, xavier_init, xavier_uniform_with};
pub use tape::{Activation, Gradients, Tape, Var};
pub use tensor::{ComplexTensor, Tensor};
pub use wavelet::{dwt, idwt, DwtPlan, Pyramid, Wavelet};
