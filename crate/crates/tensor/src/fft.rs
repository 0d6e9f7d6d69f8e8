//! Real-input FFT along the last axis, plus the adjoint kernels the tape
//! needs. Arbitrary lengths (including odd ones such as 198) are supported.

use std::cell::RefCell;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Result, TensorError};
use crate::tensor::{ComplexTensor, Tensor};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(n)
        } else {
            p.plan_fft_forward(n)
        }
    })
}

/// Number of non-redundant modes of a length-`n` real signal.
pub fn rfft_modes(n: usize) -> usize {
    n / 2 + 1
}

/// Unnormalized forward transform of each length-`n` row of `x`.
/// Returns interleaved (re, im) values, `n / 2 + 1` modes per row.
pub(crate) fn rfft_rows(x: &[f64], n: usize) -> Vec<f64> {
    let m = rfft_modes(n);
    let rows = x.len() / n;
    let fft = plan(n, false);
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    let mut out = Vec::with_capacity(rows * m * 2);
    for row in x.chunks_exact(n) {
        for (b, &v) in buf.iter_mut().zip(row) {
            *b = Complex64::new(v, 0.0);
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        for c in &buf[..m] {
            out.push(c.re);
            out.push(c.im);
        }
    }
    out
}

/// Inverse of [`rfft_rows`] (applies `1/n`). Imaginary parts of the DC and,
/// for even `n`, Nyquist modes are ignored.
pub(crate) fn irfft_rows(spec: &[f64], n: usize) -> Vec<f64> {
    let m = rfft_modes(n);
    let rows = spec.len() / (2 * m);
    let fft = plan(n, true);
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    let inv_n = 1.0 / n as f64;
    let mut out = Vec::with_capacity(rows * n);
    for row in spec.chunks_exact(2 * m) {
        buf[0] = Complex64::new(row[0], 0.0);
        for k in 1..m {
            let c = Complex64::new(row[2 * k], row[2 * k + 1]);
            if 2 * k == n {
                buf[k] = Complex64::new(c.re, 0.0);
            } else {
                buf[k] = c;
                buf[n - k] = c.conj();
            }
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        out.extend(buf.iter().map(|c| c.re * inv_n));
    }
    out
}

/// Adjoint of [`rfft_rows`]: maps a gradient on the half spectrum back to
/// the real signal, `dx_j = Re sum_k G_k e^{+2 pi i jk/n}`.
pub(crate) fn rfft_adjoint_rows(grad: &[f64], n: usize) -> Vec<f64> {
    let m = rfft_modes(n);
    let fft = plan(n, true);
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    let mut out = Vec::with_capacity(grad.len() / (2 * m) * n);
    for row in grad.chunks_exact(2 * m) {
        buf.fill(Complex64::new(0.0, 0.0));
        for k in 0..m {
            buf[k] = Complex64::new(row[2 * k], row[2 * k + 1]);
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        out.extend(buf.iter().map(|c| c.re));
    }
    out
}

/// Adjoint of [`irfft_rows`].
pub(crate) fn irfft_adjoint_rows(grad: &[f64], n: usize) -> Vec<f64> {
    let m = rfft_modes(n);
    let spec = rfft_rows(grad, n);
    let inv_n = 1.0 / n as f64;
    let mut out = spec;
    for row in out.chunks_exact_mut(2 * m) {
        for k in 0..m {
            let edge = k == 0 || 2 * k == n;
            if edge {
                row[2 * k] *= inv_n;
                row[2 * k + 1] = 0.0;
            } else {
                row[2 * k] *= 2.0 * inv_n;
                row[2 * k + 1] *= 2.0 * inv_n;
            }
        }
    }
    out
}

/// Unnormalized real FFT along the last axis.
pub fn rfft(x: &Tensor) -> Result<ComplexTensor> {
    let (&n, lead) = x
        .shape()
        .split_last()
        .ok_or_else(|| TensorError::DegenerateShape(x.shape().to_vec()))?;
    if n == 0 {
        return Err(TensorError::DegenerateShape(x.shape().to_vec()));
    }
    let mut shape = lead.to_vec();
    shape.push(rfft_modes(n));
    ComplexTensor::new(shape, rfft_rows(x.data(), n))
}

/// Inverse real FFT along the last axis; `n` is the original signal length.
pub fn irfft(spec: &ComplexTensor, n: usize) -> Result<Tensor> {
    let (&m, lead) = spec
        .shape()
        .split_last()
        .ok_or_else(|| TensorError::DegenerateShape(spec.shape().to_vec()))?;
    if n == 0 || m != rfft_modes(n) {
        return Err(TensorError::LengthMismatch {
            op: "irfft",
            expected: rfft_modes(n),
            got: m,
        });
    }
    let mut shape = lead.to_vec();
    shape.push(n);
    Tensor::new(shape, irfft_rows(spec.data(), n))
}
