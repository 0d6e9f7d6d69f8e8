//! Dense GEMM on row-major slices, backed by ndarray's matrix multiply.

use ndarray::linalg::general_mat_mul;
use ndarray::{ArrayView2, ArrayViewMut2};

/// A row-major matrix view, optionally transposed.
#[derive(Clone, Copy)]
pub(crate) struct Mat<'a> {
    pub data: &'a [f64],
    pub rows: usize,
    pub cols: usize,
    pub trans: bool,
}

impl<'a> Mat<'a> {
    pub fn new(data: &'a [f64], rows: usize, cols: usize) -> Self {
        Self {
            data,
            rows,
            cols,
            trans: false,
        }
    }

    pub fn t(self) -> Self {
        Self {
            trans: !self.trans,
            ..self
        }
    }

    fn view(self) -> ArrayView2<'a, f64> {
        let v = ArrayView2::from_shape((self.rows, self.cols), self.data).expect("matrix view");
        if self.trans {
            v.reversed_axes()
        } else {
            v
        }
    }
}

/// `c = a * b + beta * c` where `c` is `[m, n]` row-major.
pub(crate) fn gemm(a: Mat<'_>, b: Mat<'_>, beta: f64, c: &mut [f64]) {
    let av = a.view();
    let bv = b.view();
    let (m, n) = (av.nrows(), bv.ncols());
    let mut cv = ArrayViewMut2::from_shape((m, n), c).expect("output view");
    general_mat_mul(1.0, &av, &bv, beta, &mut cv);
}
