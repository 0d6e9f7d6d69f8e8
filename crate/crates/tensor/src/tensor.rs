//! Dense row-major `f64` storage.

use crate::error::{Result, TensorError};

/// Dense row-major tensor of 64-bit floats.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: impl Into<Vec<usize>>, data: Vec<f64>) -> Result<Self> {
        let shape = shape.into();
        if shape.iter().product::<usize>() != data.len() {
            return Err(TensorError::DataLength {
                shape,
                got: data.len(),
            });
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: impl Into<Vec<usize>>) -> Self {
        let shape = shape.into();
        let n = shape.iter().product();
        Self {
            shape,
            data: vec![0.0; n],
        }
    }

    pub fn full(shape: impl Into<Vec<usize>>, value: f64) -> Self {
        let mut t = Self::zeros(shape);
        t.data.fill(value);
        t
    }

    pub fn scalar(value: f64) -> Self {
        Self {
            shape: Vec::new(),
            data: vec![value],
        }
    }

    /// Identity matrix of size `n x n`.
    pub fn eye(n: usize) -> Self {
        let mut t = Self::zeros([n, n]);
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        t
    }

    pub fn from_fn(shape: impl Into<Vec<usize>>, mut f: impl FnMut(usize) -> f64) -> Self {
        let shape = shape.into();
        let n: usize = shape.iter().product();
        Self {
            shape,
            data: (0..n).map(&mut f).collect(),
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn ndim(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// The single value of a scalar (or one-element) tensor.
    pub fn item(&self) -> Option<f64> {
        (self.data.len() == 1).then(|| self.data[0])
    }

    pub fn reshape(mut self, shape: impl Into<Vec<usize>>) -> Result<Self> {
        let shape = shape.into();
        if shape.iter().product::<usize>() != self.data.len() {
            return Err(TensorError::ShapeMismatch {
                op: "reshape",
                left: self.shape,
                right: shape,
            });
        }
        self.shape = shape;
        Ok(self)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn max_abs_diff(&self, other: &Tensor) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Complex tensor stored as interleaved (re, im) pairs.
///
/// `shape` describes the complex elements; the backing buffer holds
/// `2 * shape.product()` values.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexTensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl ComplexTensor {
    pub fn new(shape: impl Into<Vec<usize>>, interleaved: Vec<f64>) -> Result<Self> {
        let shape = shape.into();
        if 2 * shape.iter().product::<usize>() != interleaved.len() {
            return Err(TensorError::DataLength {
                shape,
                got: interleaved.len(),
            });
        }
        Ok(Self {
            shape,
            data: interleaved,
        })
    }

    pub fn zeros(shape: impl Into<Vec<usize>>) -> Self {
        let shape = shape.into();
        let n = 2 * shape.iter().product::<usize>();
        Self {
            shape,
            data: vec![0.0; n],
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, flat: usize) -> (f64, f64) {
        (self.data[2 * flat], self.data[2 * flat + 1])
    }

    pub fn set(&mut self, flat: usize, re: f64, im: f64) {
        self.data[2 * flat] = re;
        self.data[2 * flat + 1] = im;
    }

    /// Real view with a trailing axis of length 2, as used on the tape.
    pub fn to_real(&self) -> Tensor {
        let mut shape = self.shape.clone();
        shape.push(2);
        Tensor {
            shape,
            data: self.data.clone(),
        }
    }

    /// Inverse of [`ComplexTensor::to_real`]; the last axis must have length 2.
    pub fn from_real(t: &Tensor) -> Result<Self> {
        match t.shape().split_last() {
            Some((2, rest)) => Ok(Self {
                shape: rest.to_vec(),
                data: t.data().to_vec(),
            }),
            _ => Err(TensorError::Invalid(format!(
                "complex view needs a trailing axis of 2, got {:?}",
                t.shape()
            ))),
        }
    }
}

pub(crate) fn suffix_broadcast(a: &[usize], b: &[usize]) -> bool {
    b.len() <= a.len() && a[a.len() - b.len()..] == *b
}
