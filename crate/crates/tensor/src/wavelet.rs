//! Periodized orthogonal discrete wavelet transform along the last axis.
//!
//! Odd-length intermediate signals are extended by repeating their last
//! sample before halving, so any length reconstructs exactly. Lengths that
//! stay even at every level give an orthonormal transform.

use crate::error::{Result, TensorError};
use crate::tensor::Tensor;

/// Daubechies-6 reconstruction low-pass filter (12 taps).
const DB6: [f64; 12] = [
    0.11154074335010947,
    0.49462389039845306,
    0.7511339080210954,
    0.31525035170919763,
    -0.22626469396543983,
    -0.12976686756726194,
    0.09750160558732304,
    0.027522865530305727,
    -0.03158203931748603,
    0.0005538422011614961,
    0.004777257510945511,
    -0.0010773010853084796,
];

const HAAR: [f64; 2] = [std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Wavelet {
    Haar,
    Db6,
}

impl Wavelet {
    pub fn low_pass(self) -> &'static [f64] {
        match self {
            Wavelet::Haar => &HAAR,
            Wavelet::Db6 => &DB6,
        }
    }

    /// Quadrature-mirror high-pass filter `g[j] = (-1)^j h[L-1-j]`.
    pub fn high_pass(self) -> Vec<f64> {
        let h = self.low_pass();
        let l = h.len();
        (0..l)
            .map(|j| if j % 2 == 0 { h[l - 1 - j] } else { -h[l - 1 - j] })
            .collect()
    }

    pub fn filter_len(self) -> usize {
        self.low_pass().len()
    }

    pub fn name(self) -> &'static str {
        match self {
            Wavelet::Haar => "haar",
            Wavelet::Db6 => "db6",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "haar" => Some(Wavelet::Haar),
            "db6" => Some(Wavelet::Db6),
            _ => None,
        }
    }
}

/// Coefficient layout for a given signal length and depth.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DwtPlan {
    wavelet: Wavelet,
    n: usize,
    /// Input length at each level, `inputs[0] == n`.
    inputs: Vec<usize>,
}

impl DwtPlan {
    pub fn new(n: usize, levels: usize, wavelet: Wavelet) -> Result<Self> {
        if levels == 0 {
            return Err(TensorError::Invalid("dwt needs at least one level".into()));
        }
        let filter = wavelet.filter_len();
        let mut inputs = Vec::with_capacity(levels);
        let mut len = n;
        for level in 1..=levels {
            let half = (len + 1) / 2;
            if half < filter {
                return Err(TensorError::SignalTooShort {
                    level,
                    length: len,
                    filter,
                });
            }
            inputs.push(len);
            len = half;
        }
        Ok(Self { wavelet, n, inputs })
    }

    pub fn wavelet(&self) -> Wavelet {
        self.wavelet
    }

    pub fn levels(&self) -> usize {
        self.inputs.len()
    }

    pub fn signal_len(&self) -> usize {
        self.n
    }

    /// Number of coefficients produced by level `level` (1-based).
    pub fn band_len(&self, level: usize) -> usize {
        (self.inputs[level - 1] + 1) / 2
    }

    pub fn approx_len(&self) -> usize {
        self.band_len(self.levels())
    }

    /// Total coefficients: approximation plus all detail bands.
    pub fn total_len(&self) -> usize {
        self.approx_len() + (1..=self.levels()).map(|l| self.band_len(l)).sum::<usize>()
    }

    /// Offset of the detail band of `level` in the flat layout
    /// `[a_L, d_L, d_{L-1}, ..., d_1]`.
    pub fn detail_offset(&self, level: usize) -> usize {
        self.approx_len()
            + (level + 1..=self.levels())
                .map(|l| self.band_len(l))
                .sum::<usize>()
    }

    fn forward_row(&self, x: &[f64], out: &mut [f64]) {
        let h = self.wavelet.low_pass();
        let g = self.wavelet.high_pass();
        let mut cur = x.to_vec();
        for level in 1..=self.levels() {
            let padded = pad_odd(&cur);
            let half = padded.len() / 2;
            let mut a = vec![0.0; half];
            let off = self.detail_offset(level);
            analysis(&padded, h, &g, &mut a, &mut out[off..off + half]);
            cur = a;
        }
        out[..cur.len()].copy_from_slice(&cur);
    }

    fn inverse_row(&self, c: &[f64], out: &mut [f64]) {
        let h = self.wavelet.low_pass();
        let g = self.wavelet.high_pass();
        let mut a = c[..self.approx_len()].to_vec();
        for level in (1..=self.levels()).rev() {
            let half = self.band_len(level);
            let off = self.detail_offset(level);
            let mut x = vec![0.0; 2 * half];
            synthesis(&a, &c[off..off + half], h, &g, &mut x);
            x.truncate(self.inputs[level - 1]);
            a = x;
        }
        out.copy_from_slice(&a);
    }

    /// Transpose of the forward transform, used for backpropagation.
    fn forward_adjoint_row(&self, gc: &[f64], out: &mut [f64]) {
        let h = self.wavelet.low_pass();
        let g = self.wavelet.high_pass();
        let mut ga = gc[..self.approx_len()].to_vec();
        for level in (1..=self.levels()).rev() {
            let half = self.band_len(level);
            let off = self.detail_offset(level);
            let mut gx = vec![0.0; 2 * half];
            synthesis(&ga, &gc[off..off + half], h, &g, &mut gx);
            let len = self.inputs[level - 1];
            if len % 2 == 1 {
                let extra = gx.pop().unwrap_or(0.0);
                gx[len - 1] += extra;
            }
            ga = gx;
        }
        out.copy_from_slice(&ga);
    }

    /// Transpose of the inverse transform.
    fn inverse_adjoint_row(&self, gx: &[f64], out: &mut [f64]) {
        let h = self.wavelet.low_pass();
        let g = self.wavelet.high_pass();
        let mut cur = gx.to_vec();
        for level in 1..=self.levels() {
            if cur.len() % 2 == 1 {
                cur.push(0.0);
            }
            let half = cur.len() / 2;
            let mut a = vec![0.0; half];
            let off = self.detail_offset(level);
            analysis(&cur, h, &g, &mut a, &mut out[off..off + half]);
            cur = a;
        }
        out[..cur.len()].copy_from_slice(&cur);
    }

    pub(crate) fn forward_rows(&self, x: &[f64]) -> Vec<f64> {
        self.map_rows(x, self.n, self.total_len(), Self::forward_row)
    }

    pub(crate) fn inverse_rows(&self, c: &[f64]) -> Vec<f64> {
        self.map_rows(c, self.total_len(), self.n, Self::inverse_row)
    }

    pub(crate) fn forward_adjoint_rows(&self, gc: &[f64]) -> Vec<f64> {
        self.map_rows(gc, self.total_len(), self.n, Self::forward_adjoint_row)
    }

    pub(crate) fn inverse_adjoint_rows(&self, gx: &[f64]) -> Vec<f64> {
        self.map_rows(gx, self.n, self.total_len(), Self::inverse_adjoint_row)
    }

    fn map_rows(
        &self,
        src: &[f64],
        in_len: usize,
        out_len: usize,
        f: fn(&Self, &[f64], &mut [f64]),
    ) -> Vec<f64> {
        let rows = src.len() / in_len;
        let mut out = vec![0.0; rows * out_len];
        for (s, o) in src.chunks_exact(in_len).zip(out.chunks_exact_mut(out_len)) {
            f(self, s, o);
        }
        out
    }
}

fn pad_odd(x: &[f64]) -> Vec<f64> {
    let mut v = x.to_vec();
    if v.len() % 2 == 1 {
        v.push(*x.last().expect("non-empty signal"));
    }
    v
}

/// One periodized analysis step on an even-length signal.
fn analysis(x: &[f64], h: &[f64], g: &[f64], a: &mut [f64], d: &mut [f64]) {
    let p = x.len();
    let ext: Vec<f64> = (0..p + h.len()).map(|i| x[i % p]).collect();
    for k in 0..p / 2 {
        let w = &ext[2 * k..2 * k + h.len()];
        let (mut sa, mut sd) = (0.0, 0.0);
        for ((&hj, &gj), &v) in h.iter().zip(g).zip(w) {
            sa += hj * v;
            sd += gj * v;
        }
        a[k] = sa;
        d[k] = sd;
    }
}

/// Transpose of [`analysis`]; equals its inverse for orthonormal filters.
fn synthesis(a: &[f64], d: &[f64], h: &[f64], g: &[f64], x: &mut [f64]) {
    let p = x.len();
    let mut ext = vec![0.0; p + h.len()];
    for (k, (&ak, &dk)) in a.iter().zip(d).enumerate() {
        let w = &mut ext[2 * k..2 * k + h.len()];
        for ((&hj, &gj), v) in h.iter().zip(g).zip(w) {
            *v += hj * ak + gj * dk;
        }
    }
    x.copy_from_slice(&ext[..p]);
    for (i, v) in ext[p..].iter().enumerate() {
        x[i % p] += v;
    }
}

/// Multi-level coefficients of a batch of signals.
#[derive(Debug, Clone, PartialEq)]
pub struct Pyramid {
    plan: DwtPlan,
    /// Shape `[..., total_len]`, layout `[a_L, d_L, ..., d_1]`.
    coeffs: Tensor,
}

impl Pyramid {
    pub fn plan(&self) -> &DwtPlan {
        &self.plan
    }

    pub fn coeffs(&self) -> &Tensor {
        &self.coeffs
    }

    fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.coeffs.data().chunks_exact(self.plan.total_len())
    }

    /// Approximation band of row `row`.
    pub fn approx(&self, row: usize) -> &[f64] {
        let r = self.rows().nth(row).expect("row in range");
        &r[..self.plan.approx_len()]
    }

    /// Detail band `level` (1 = finest) of row `row`.
    pub fn detail(&self, row: usize, level: usize) -> &[f64] {
        let r = self.rows().nth(row).expect("row in range");
        let off = self.plan.detail_offset(level);
        &r[off..off + self.plan.band_len(level)]
    }
}

pub fn dwt(x: &Tensor, levels: usize, wavelet: Wavelet) -> Result<Pyramid> {
    let (&n, lead) = x
        .shape()
        .split_last()
        .ok_or_else(|| TensorError::DegenerateShape(x.shape().to_vec()))?;
    let plan = DwtPlan::new(n, levels, wavelet)?;
    let mut shape = lead.to_vec();
    shape.push(plan.total_len());
    let coeffs = Tensor::new(shape, plan.forward_rows(x.data()))?;
    Ok(Pyramid { plan, coeffs })
}

pub fn idwt(pyramid: &Pyramid) -> Result<Tensor> {
    let plan = &pyramid.plan;
    let mut shape = pyramid.coeffs.shape().to_vec();
    if let Some(last) = shape.last_mut() {
        *last = plan.signal_len();
    }
    Tensor::new(shape, plan.inverse_rows(pyramid.coeffs.data()))
}
