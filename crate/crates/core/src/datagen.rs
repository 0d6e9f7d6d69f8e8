//! Excitation families and supervised dataset assembly.

use std::f64::consts::PI;

use magop_tensor::rng_for;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::preisach::PreisachModel;

const FORC_STREAM: u64 = 1 << 32;
const MINOR_STREAM: u64 = 2 << 32;
const SPLIT_STREAM: u64 = 3 << 32;

/// Peak flux density allowed in minor-loop excitations.
pub const MINOR_PEAK: f64 = 1.2;
pub const GP_JITTER: f64 = 1e-9;

/// A sampled signal on a strictly increasing time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub t: Vec<f64>,
    pub values: Vec<f64>,
}

impl Waveform {
    pub fn new(t: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if t.len() != values.len() {
            return Err(Error::Shape(format!(
                "time grid has {} points but {} values",
                t.len(),
                values.len()
            )));
        }
        if t.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Param("time grid must be strictly increasing".into()));
        }
        if t.iter().chain(&values).any(|x| !x.is_finite()) {
            return Err(Error::Param("waveform contains non-finite entries".into()));
        }
        Ok(Self { t, values })
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }
}

/// `n` equispaced points covering `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let step = (hi - lo) / (n - 1) as f64;
    let mut t: Vec<f64> = (0..n).map(|i| lo + step * i as f64).collect();
    t[n - 1] = hi;
    t
}

/// Half-sine excitations `A sin(pi t)` on `t in [0, 1]` with amplitudes
/// drawn uniformly from `[amp_lo, amp_hi)`.
pub fn sample_forc_b(n: usize, t_len: usize, amp_lo: f64, amp_hi: f64, seed: u64) -> Result<Vec<Waveform>> {
    if !(amp_lo > 0.0 && amp_lo < amp_hi) {
        return Err(Error::Param(format!(
            "need 0 < amp_lo < amp_hi, got {amp_lo}, {amp_hi}"
        )));
    }
    if t_len < 2 {
        return Err(Error::Param(format!("need at least 2 time samples, got {t_len}")));
    }
    let t = linspace(0.0, 1.0, t_len);
    (0..n)
        .map(|i| {
            let mut rng = rng_for(seed, FORC_STREAM + i as u64);
            let amp = amp_lo + (amp_hi - amp_lo) * rng.random::<f64>();
            let values = t.iter().map(|&x| amp * (PI * x).sin()).collect();
            Waveform::new(t.clone(), values)
        })
        .collect()
}

/// Cosine-kernel covariance `cos(t_i - t_j) + jitter * I`.
pub fn cosine_kernel(t: &[f64], jitter: f64) -> DMatrix<f64> {
    let n = t.len();
    DMatrix::from_fn(n, n, |i, j| {
        (t[i] - t[j]).cos() + if i == j { jitter } else { 0.0 }
    })
}

/// Lower Cholesky factor of the cosine kernel, raising the jitter tenfold
/// up to three times if the factorization fails.
pub fn kernel_factor(t: &[f64]) -> Result<DMatrix<f64>> {
    let mut jitter = GP_JITTER;
    for attempt in 0..=3 {
        if let Some(c) = cosine_kernel(t, jitter).cholesky() {
            return Ok(c.l());
        }
        if attempt < 3 {
            jitter *= 10.0;
        }
    }
    Err(Error::Factorization { jitter })
}

/// Gaussian-process excitations on `[0, 3 pi]` with the cosine kernel; any
/// draw whose peak magnitude exceeds [`MINOR_PEAK`] is rescaled to it.
pub fn sample_minor_b(n: usize, t_len: usize, seed: u64) -> Result<Vec<Waveform>> {
    sample_minor_b_with_peak(n, t_len, seed, MINOR_PEAK)
}

pub fn sample_minor_b_with_peak(n: usize, t_len: usize, seed: u64, peak: f64) -> Result<Vec<Waveform>> {
    if t_len < 2 {
        return Err(Error::Param(format!("need at least 2 time samples, got {t_len}")));
    }
    if !(peak > 0.0) {
        return Err(Error::Param(format!("peak must be positive, got {peak}")));
    }
    let t = linspace(0.0, 3.0 * PI, t_len);
    let l = kernel_factor(&t)?;
    (0..n)
        .map(|i| {
            let mut rng = rng_for(seed, MINOR_STREAM + i as u64);
            let z = DVector::from_fn(t_len, |_, _| rng.sample::<f64, _>(StandardNormal));
            let mut values: Vec<f64> = (&l * z).iter().copied().collect();
            let max = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if max > peak {
                let s = peak / max;
                values.iter_mut().for_each(|v| *v *= s);
            }
            Waveform::new(t.clone(), values)
        })
        .collect()
}

/// Independent min-max maps of `H` and `B` onto `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinMaxScaler {
    pub h_min: f64,
    pub h_max: f64,
    pub b_min: f64,
    pub b_max: f64,
}

fn to_unit(x: f64, lo: f64, hi: f64) -> f64 {
    2.0 * (x - lo) / (hi - lo) - 1.0
}

fn from_unit(y: f64, lo: f64, hi: f64) -> f64 {
    (y + 1.0) * 0.5 * (hi - lo) + lo
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

impl MinMaxScaler {
    pub fn new(h_min: f64, h_max: f64, b_min: f64, b_max: f64) -> Result<Self> {
        let s = Self {
            h_min,
            h_max,
            b_min,
            b_max,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn fit<'a>(h: impl Iterator<Item = &'a f64>, b: impl Iterator<Item = &'a f64>) -> Result<Self> {
        let (h_min, h_max) = range(h.copied());
        let (b_min, b_max) = range(b.copied());
        Self::new(h_min, h_max, b_min, b_max)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |lo: f64, hi: f64| lo.is_finite() && hi.is_finite() && hi > lo;
        if ok(self.h_min, self.h_max) && ok(self.b_min, self.b_max) {
            Ok(())
        } else {
            Err(Error::Param(format!("degenerate scaler ranges {self:?}")))
        }
    }

    pub fn scale_h(&self, x: f64) -> f64 {
        to_unit(x, self.h_min, self.h_max)
    }

    pub fn unscale_h(&self, y: f64) -> f64 {
        from_unit(y, self.h_min, self.h_max)
    }

    pub fn scale_b(&self, x: f64) -> f64 {
        to_unit(x, self.b_min, self.b_max)
    }

    pub fn unscale_b(&self, y: f64) -> f64 {
        from_unit(y, self.b_min, self.b_max)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    /// Seeded random halving; with odd `n` the extra sample goes to test.
    pub fn random_half(n: usize, seed: u64) -> Self {
        let mut idx: Vec<usize> = (0..n).collect();
        let mut rng = rng_for(seed, SPLIT_STREAM);
        for i in (1..n).rev() {
            let j = rng.random_range(0..=i);
            idx.swap(i, j);
        }
        let mut train = idx[..n / 2].to_vec();
        let mut test = idx[n / 2..].to_vec();
        train.sort_unstable();
        test.sort_unstable();
        Self { train, test }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let mut seen = vec![false; n];
        for &i in self.train.iter().chain(&self.test) {
            if i >= n || seen[i] {
                return Err(Error::Format(format!(
                    "split index {i} out of range or repeated for {n} samples"
                )));
            }
            seen[i] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Format("split does not cover every sample".into()));
        }
        Ok(())
    }
}

/// Paired `(H, B)` waveforms sharing one time grid, row-major `N x T`.
#[derive(Debug, Clone, PartialEq)]
pub struct HysteresisDataset {
    pub t: Vec<f64>,
    pub h: Vec<f64>,
    pub b: Vec<f64>,
    pub split: Option<Split>,
    pub scaler: Option<MinMaxScaler>,
}

impl HysteresisDataset {
    pub fn new(t: Vec<f64>, h: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        let t_len = t.len();
        if t_len == 0 || h.len() != b.len() || h.len() % t_len != 0 {
            return Err(Error::Shape(format!(
                "grid of {t_len} points with {} H and {} B values",
                h.len(),
                b.len()
            )));
        }
        Ok(Self {
            t,
            h,
            b,
            split: None,
            scaler: None,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.h.len() / self.t.len()
    }

    pub fn t_len(&self) -> usize {
        self.t.len()
    }

    pub fn h_row(&self, i: usize) -> &[f64] {
        let t = self.t_len();
        &self.h[i * t..(i + 1) * t]
    }

    pub fn b_row(&self, i: usize) -> &[f64] {
        let t = self.t_len();
        &self.b[i * t..(i + 1) * t]
    }

    pub fn split(&self) -> Result<&Split> {
        self.split
            .as_ref()
            .ok_or_else(|| Error::Format("dataset has no train/test split".into()))
    }

    pub fn scaler(&self) -> Result<&MinMaxScaler> {
        self.scaler
            .as_ref()
            .ok_or_else(|| Error::Format("dataset has no fitted scaler".into()))
    }

    /// Split the samples in half at random and fit the scaler on the
    /// training half.
    pub fn with_random_split(mut self, seed: u64) -> Result<Self> {
        let split = Split::random_half(self.n_samples(), seed);
        let h: Vec<f64> = split.train.iter().flat_map(|&i| self.h_row(i).to_vec()).collect();
        let b: Vec<f64> = split.train.iter().flat_map(|&i| self.b_row(i).to_vec()).collect();
        self.scaler = Some(MinMaxScaler::fit(h.iter(), b.iter())?);
        self.split = Some(split);
        Ok(self)
    }

    /// Rows `indices` of `H` and `B` as flat `len x T` buffers.
    pub fn gather(&self, indices: &[usize]) -> (Vec<f64>, Vec<f64>) {
        let mut h = Vec::with_capacity(indices.len() * self.t_len());
        let mut b = Vec::with_capacity(indices.len() * self.t_len());
        for &i in indices {
            h.extend_from_slice(self.h_row(i));
            b.extend_from_slice(self.b_row(i));
        }
        (h, b)
    }
}

/// Invert every `B` curve through the Preisach oracle, starting each from
/// negative saturation, then split and scale.
pub fn build_dataset(curves: &[Waveform], oracle: &PreisachModel, seed: u64) -> Result<HysteresisDataset> {
    let first = curves
        .first()
        .ok_or_else(|| Error::Param("no excitation curves".into()))?;
    if let Some(k) = curves.iter().position(|c| c.t != first.t) {
        return Err(Error::Shape(format!("curve {k} uses a different time grid")));
    }
    let h_rows: Vec<Vec<f64>> = curves
        .par_iter()
        .enumerate()
        .map(|(index, c)| {
            oracle
                .inverse_sequence(&c.values)
                .map_err(|source| Error::Sample { index, source })
        })
        .collect::<Result<_>>()?;
    let h = h_rows.concat();
    let b: Vec<f64> = curves.iter().flat_map(|c| c.values.iter().copied()).collect();
    HysteresisDataset::new(first.t.clone(), h, b)?.with_random_split(seed)
}
