//! Reverse-mode differentiation over a linear operation record.
//!
//! Every op appends one node holding its forward value; `backward` walks the
//! record once in reverse and returns gradients for every node that depends
//! on a leaf. Gradients from fan-out accumulate additively.

use crate::error::{Result, TensorError};
use crate::fft::{irfft_adjoint_rows, irfft_rows, rfft_adjoint_rows, rfft_modes, rfft_rows};
use crate::linalg::{gemm, Mat};
use crate::tensor::{suffix_broadcast, Tensor};
use crate::wavelet::{DwtPlan, Wavelet};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Tanh,
    Relu,
    Gelu,
    Sigmoid,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Identity => "identity",
            Activation::Tanh => "tanh",
            Activation::Relu => "relu",
            Activation::Gelu => "gelu",
            Activation::Sigmoid => "sigmoid",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "identity" => Activation::Identity,
            "tanh" => Activation::Tanh,
            "relu" => Activation::Relu,
            "gelu" => Activation::Gelu,
            "sigmoid" => Activation::Sigmoid,
            _ => return None,
        })
    }
}

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + libm::erf(x * std::f64::consts::FRAC_1_SQRT_2))
}

fn gelu_grad(x: f64) -> f64 {
    let cdf = 0.5 * (1.0 + libm::erf(x * std::f64::consts::FRAC_1_SQRT_2));
    cdf + x * FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    Constant,
    MatMul(Var, Var),
    Affine { x: Var, w: Var, b: Var },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Shift(Var),
    Act(Var, Activation),
    Transpose(Var),
    Reshape(Var),
    SliceLast { a: Var, start: usize },
    Row { a: Var, index: usize },
    ConcatRows(Vec<Var>),
    ChannelMix { z: Var, w: Var, b: Var },
    Rfft(Var),
    Irfft(Var),
    ModeMix { z: Var, r: Var, modes: usize },
    Dwt(Var, DwtPlan),
    Idwt(Var, DwtPlan),
    BandMix { c: Var, r: Var, bands: usize },
    Sum(Var),
    Mean(Var),
    Mse { pred: Var, target: Tensor },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

/// Gradients produced by [`Tape::backward`], indexed by [`Var`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor> {
        self.grads.get_mut(v.0).and_then(Option::take)
    }
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    consumed: bool,
}

fn mismatch(op: &'static str, a: &[usize], b: &[usize]) -> TensorError {
    TensorError::ShapeMismatch {
        op,
        left: a.to_vec(),
        right: b.to_vec(),
    }
}

fn dims2(op: &'static str, t: &Tensor) -> Result<(usize, usize)> {
    match *t.shape() {
        [m, n] => Ok((m, n)),
        _ => Err(TensorError::Invalid(format!(
            "{op}: expected a 2-D tensor, got {:?}",
            t.shape()
        ))),
    }
}

fn dims3(op: &'static str, t: &Tensor) -> Result<(usize, usize, usize)> {
    match *t.shape() {
        [a, b, c] => Ok((a, b, c)),
        _ => Err(TensorError::Invalid(format!(
            "{op}: expected a 3-D tensor, got {:?}",
            t.shape()
        ))),
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

/// Sum `g` over leading axes so it matches a suffix shape of `len` values.
fn reduce_to_suffix(g: &[f64], len: usize) -> Vec<f64> {
    let mut out = vec![0.0; len];
    for chunk in g.chunks_exact(len) {
        add_into(&mut out, chunk);
    }
    out
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    fn push(&mut self, name: &'static str, value: Tensor, op: Op, inputs: &[Var]) -> Result<Var> {
        if !value.is_finite() {
            return Err(TensorError::NonFinite(name));
        }
        let needs_grad = match op {
            Op::Leaf => true,
            Op::Constant => false,
            _ => inputs.iter().any(|&v| self.needs(v)),
        };
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    /// Trainable input; receives a gradient on backward.
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            needs_grad: true,
        });
        Var(self.nodes.len() - 1)
    }

    /// Input that takes no gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Constant,
            needs_grad: false,
        });
        Var(self.nodes.len() - 1)
    }

    /// `[m, k] x [k, n] -> [m, n]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        let (m, k) = dims2("matmul", av)?;
        let (k2, n) = dims2("matmul", bv)?;
        if k != k2 {
            return Err(mismatch("matmul", av.shape(), bv.shape()));
        }
        let mut out = vec![0.0; m * n];
        gemm(Mat::new(av.data(), m, k), Mat::new(bv.data(), k, n), 0.0, &mut out);
        let value = Tensor::new([m, n], out)?;
        self.push("matmul", value, Op::MatMul(a, b), &[a, b])
    }

    /// Dense layer `x w + b` with `x: [m, in]`, `w: [in, out]`, `b: [out]`.
    pub fn affine(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let (xv, wv, bv) = (self.value(x), self.value(w), self.value(b));
        let (m, k) = dims2("affine", xv)?;
        let (k2, n) = dims2("affine", wv)?;
        if k != k2 {
            return Err(mismatch("affine", xv.shape(), wv.shape()));
        }
        if bv.shape() != [n] {
            return Err(mismatch("affine", wv.shape(), bv.shape()));
        }
        let mut out = Vec::with_capacity(m * n);
        for _ in 0..m {
            out.extend_from_slice(bv.data());
        }
        gemm(Mat::new(xv.data(), m, k), Mat::new(wv.data(), k, n), 1.0, &mut out);
        let value = Tensor::new([m, n], out)?;
        self.push("affine", value, Op::Affine { x, w, b }, &[x, w, b])
    }

    fn broadcast_binary(
        &mut self,
        name: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Tensor> {
        let (av, bv) = (self.value(a), self.value(b));
        if !suffix_broadcast(av.shape(), bv.shape()) || bv.is_empty() {
            return Err(mismatch(name, av.shape(), bv.shape()));
        }
        let bl = bv.len();
        let data = av
            .data()
            .iter()
            .enumerate()
            .map(|(i, &x)| f(x, bv.data()[i % bl]))
            .collect();
        Tensor::new(av.shape().to_vec(), data)
    }

    /// Elementwise `a + b`, with `b` broadcast over the leading axes of `a`.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.broadcast_binary("add", a, b, |x, y| x + y)?;
        self.push("add", value, Op::Add(a, b), &[a, b])
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.broadcast_binary("sub", a, b, |x, y| x - y)?;
        self.push("sub", value, Op::Sub(a, b), &[a, b])
    }

    /// Elementwise product, `b` broadcast over the leading axes of `a`.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.broadcast_binary("mul", a, b, |x, y| x * y)?;
        self.push("mul", value, Op::Mul(a, b), &[a, b])
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Result<Var> {
        let value = self.value(a).map(|x| s * x);
        self.push("scale", value, Op::Scale(a, s), &[a])
    }

    /// `a + c` for a constant scalar `c`.
    pub fn shift(&mut self, a: Var, c: f64) -> Result<Var> {
        let value = self.value(a).map(|x| x + c);
        self.push("shift", value, Op::Shift(a), &[a])
    }

    /// `1 - a`, used by gated cells.
    pub fn one_minus(&mut self, a: Var) -> Result<Var> {
        let neg = self.scale(a, -1.0)?;
        self.shift(neg, 1.0)
    }

    pub fn activate(&mut self, a: Var, act: Activation) -> Result<Var> {
        if act == Activation::Identity {
            return Ok(a);
        }
        let f: fn(f64) -> f64 = match act {
            Activation::Tanh => f64::tanh,
            Activation::Relu => |x| x.max(0.0),
            Activation::Gelu => gelu,
            Activation::Sigmoid => sigmoid,
            Activation::Identity => unreachable!(),
        };
        let value = self.value(a).map(f);
        self.push(act.name(), value, Op::Act(a, act), &[a])
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        self.activate(a, Activation::Tanh)
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        self.activate(a, Activation::Relu)
    }

    pub fn gelu(&mut self, a: Var) -> Result<Var> {
        self.activate(a, Activation::Gelu)
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        self.activate(a, Activation::Sigmoid)
    }

    /// 2-D transpose.
    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let av = self.value(a);
        let (m, n) = dims2("transpose", av)?;
        let value = Tensor::new([n, m], transpose_data(av.data(), m, n))?;
        self.push("transpose", value, Op::Transpose(a), &[a])
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let value = self.value(a).clone().reshape(shape.to_vec())?;
        self.push("reshape", value, Op::Reshape(a), &[a])
    }

    /// `a[..., start..start + len]`.
    pub fn slice_last(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let av = self.value(a);
        let (&n, lead) = av
            .shape()
            .split_last()
            .ok_or_else(|| TensorError::DegenerateShape(av.shape().to_vec()))?;
        if start + len > n {
            return Err(TensorError::Invalid(format!(
                "slice {start}..{} out of range for last axis {n}",
                start + len
            )));
        }
        let data = av
            .data()
            .chunks_exact(n)
            .flat_map(|row| row[start..start + len].iter().copied())
            .collect();
        let mut shape = lead.to_vec();
        shape.push(len);
        let value = Tensor::new(shape, data)?;
        self.push("slice", value, Op::SliceLast { a, start }, &[a])
    }

    /// Row `index` of a 2-D tensor, as `[1, n]`.
    pub fn row(&mut self, a: Var, index: usize) -> Result<Var> {
        let av = self.value(a);
        let (m, n) = dims2("row", av)?;
        if index >= m {
            return Err(TensorError::Invalid(format!("row {index} out of range for {m} rows")));
        }
        let value = Tensor::new([1, n], av.data()[index * n..(index + 1) * n].to_vec())?;
        self.push("row", value, Op::Row { a, index }, &[a])
    }

    /// Stack 2-D tensors with equal column counts along the first axis.
    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts
            .first()
            .ok_or_else(|| TensorError::Invalid("concat of zero tensors".into()))?;
        let (_, n) = dims2("concat_rows", self.value(first))?;
        let mut rows = 0;
        let mut data = Vec::new();
        for &p in parts {
            let pv = self.value(p);
            let (r, c) = dims2("concat_rows", pv)?;
            if c != n {
                return Err(mismatch("concat_rows", self.value(first).shape(), pv.shape()));
            }
            rows += r;
            data.extend_from_slice(pv.data());
        }
        let value = Tensor::new([rows, n], data)?;
        self.push("concat_rows", value, Op::ConcatRows(parts.to_vec()), parts)
    }

    /// Pointwise channel map: `z: [B, Ci, T]`, `w: [Co, Ci]`, `b: [Co]`
    /// gives `out[b, o, t] = sum_i w[o, i] z[b, i, t] + b[o]`.
    pub fn channel_mix(&mut self, z: Var, w: Var, b: Var) -> Result<Var> {
        let (zv, wv, bv) = (self.value(z), self.value(w), self.value(b));
        let (batch, ci, t) = dims3("channel_mix", zv)?;
        let (co, ci2) = dims2("channel_mix", wv)?;
        if ci != ci2 {
            return Err(mismatch("channel_mix", zv.shape(), wv.shape()));
        }
        if bv.shape() != [co] {
            return Err(mismatch("channel_mix", wv.shape(), bv.shape()));
        }
        let mut out = vec![0.0; batch * co * t];
        for (zb, ob) in zv.data().chunks_exact(ci * t).zip(out.chunks_exact_mut(co * t)) {
            for (o, row) in ob.chunks_exact_mut(t).enumerate() {
                row.fill(bv.data()[o]);
            }
            gemm(Mat::new(wv.data(), co, ci), Mat::new(zb, ci, t), 1.0, ob);
        }
        let value = Tensor::new([batch, co, t], out)?;
        self.push("channel_mix", value, Op::ChannelMix { z, w, b }, &[z, w, b])
    }

    /// Real FFT along the last axis: `[..., n] -> [..., n/2 + 1, 2]`.
    pub fn rfft(&mut self, a: Var) -> Result<Var> {
        let av = self.value(a);
        let (&n, lead) = av
            .shape()
            .split_last()
            .ok_or_else(|| TensorError::DegenerateShape(av.shape().to_vec()))?;
        if n == 0 {
            return Err(TensorError::DegenerateShape(av.shape().to_vec()));
        }
        let mut shape = lead.to_vec();
        shape.extend([rfft_modes(n), 2]);
        let value = Tensor::new(shape, rfft_rows(av.data(), n))?;
        self.push("rfft", value, Op::Rfft(a), &[a])
    }

    /// Inverse real FFT: `[..., n/2 + 1, 2] -> [..., n]`.
    pub fn irfft(&mut self, a: Var, n: usize) -> Result<Var> {
        let av = self.value(a);
        let s = av.shape();
        if s.len() < 2 || s[s.len() - 1] != 2 {
            return Err(TensorError::Invalid(format!(
                "irfft expects [..., modes, 2], got {s:?}"
            )));
        }
        let m = s[s.len() - 2];
        if n == 0 || m != rfft_modes(n) {
            return Err(TensorError::LengthMismatch {
                op: "irfft",
                expected: rfft_modes(n),
                got: m,
            });
        }
        let mut shape = s[..s.len() - 2].to_vec();
        shape.push(n);
        let value = Tensor::new(shape, irfft_rows(av.data(), n))?;
        self.push("irfft", value, Op::Irfft(a), &[a])
    }

    /// Per-mode complex channel mixing of the first `modes` Fourier modes.
    ///
    /// `z: [B, Ci, M, 2]`, `r: [K, Co, Ci, 2]` with `modes <= min(K, M)`.
    /// Modes at or above `modes` are zero in the output `[B, Co, M, 2]`.
    pub fn mode_mix(&mut self, z: Var, r: Var, modes: usize) -> Result<Var> {
        let (zv, rv) = (self.value(z), self.value(r));
        let (batch, ci, m) = match *zv.shape() {
            [b, c, m, 2] => (b, c, m),
            _ => return Err(mismatch("mode_mix", zv.shape(), rv.shape())),
        };
        let (k, co) = match *rv.shape() {
            [k, o, i, 2] if i == ci => (k, o),
            _ => return Err(mismatch("mode_mix", zv.shape(), rv.shape())),
        };
        if modes > m || modes > k {
            return Err(TensorError::ModeCount {
                requested: modes,
                available: m.min(k),
            });
        }
        let (zd, rd) = (zv.data(), rv.data());
        let mut out = vec![0.0; batch * co * m * 2];
        for b in 0..batch {
            for kk in 0..modes {
                for o in 0..co {
                    let (mut re, mut im) = (0.0, 0.0);
                    for i in 0..ci {
                        let zi = ((b * ci + i) * m + kk) * 2;
                        let ri = ((kk * co + o) * ci + i) * 2;
                        let (zr, zim) = (zd[zi], zd[zi + 1]);
                        let (rr, rim) = (rd[ri], rd[ri + 1]);
                        re += rr * zr - rim * zim;
                        im += rr * zim + rim * zr;
                    }
                    let oi = ((b * co + o) * m + kk) * 2;
                    out[oi] = re;
                    out[oi + 1] = im;
                }
            }
        }
        let value = Tensor::new([batch, co, m, 2], out)?;
        self.push("mode_mix", value, Op::ModeMix { z, r, modes }, &[z, r])
    }

    /// Multi-level periodized DWT along the last axis.
    pub fn dwt(&mut self, a: Var, levels: usize, wavelet: Wavelet) -> Result<Var> {
        let av = self.value(a);
        let (&n, lead) = av
            .shape()
            .split_last()
            .ok_or_else(|| TensorError::DegenerateShape(av.shape().to_vec()))?;
        let plan = DwtPlan::new(n, levels, wavelet)?;
        let mut shape = lead.to_vec();
        shape.push(plan.total_len());
        let value = Tensor::new(shape, plan.forward_rows(av.data()))?;
        self.push("dwt", value, Op::Dwt(a, plan), &[a])
    }

    /// Inverse of [`Tape::dwt`] for the given plan.
    pub fn idwt(&mut self, a: Var, plan: &DwtPlan) -> Result<Var> {
        let av = self.value(a);
        let (&len, lead) = av
            .shape()
            .split_last()
            .ok_or_else(|| TensorError::DegenerateShape(av.shape().to_vec()))?;
        if len != plan.total_len() {
            return Err(TensorError::LengthMismatch {
                op: "idwt",
                expected: plan.total_len(),
                got: len,
            });
        }
        let mut shape = lead.to_vec();
        shape.push(plan.signal_len());
        let value = Tensor::new(shape, plan.inverse_rows(av.data()))?;
        self.push("idwt", value, Op::Idwt(a, plan.clone()), &[a])
    }

    /// Channel mixing of the first `bands` coefficients, pass-through beyond.
    ///
    /// `c: [B, C, L]`, `r: [K, C, C]` with `bands <= min(K, L)`:
    /// `out[b, o, j] = sum_i r[j, o, i] c[b, i, j]` for `j < bands`.
    pub fn band_mix(&mut self, c: Var, r: Var, bands: usize) -> Result<Var> {
        let (cv, rv) = (self.value(c), self.value(r));
        let (batch, ch, len) = dims3("band_mix", cv)?;
        let k = match *rv.shape() {
            [k, o, i] if o == ch && i == ch => k,
            _ => return Err(mismatch("band_mix", cv.shape(), rv.shape())),
        };
        if bands > len || bands > k {
            return Err(TensorError::ModeCount {
                requested: bands,
                available: len.min(k),
            });
        }
        let (cd, rd) = (cv.data(), rv.data());
        let mut out = cd.to_vec();
        for b in 0..batch {
            for j in 0..bands {
                for o in 0..ch {
                    let mut s = 0.0;
                    for i in 0..ch {
                        s += rd[(j * ch + o) * ch + i] * cd[(b * ch + i) * len + j];
                    }
                    out[(b * ch + o) * len + j] = s;
                }
            }
        }
        let value = Tensor::new([batch, ch, len], out)?;
        self.push("band_mix", value, Op::BandMix { c, r, bands }, &[c, r])
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let s = self.value(a).data().iter().sum();
        self.push("sum", Tensor::scalar(s), Op::Sum(a), &[a])
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let av = self.value(a);
        if av.is_empty() {
            return Err(TensorError::DegenerateShape(av.shape().to_vec()));
        }
        let s = av.data().iter().sum::<f64>() / av.len() as f64;
        self.push("mean", Tensor::scalar(s), Op::Mean(a), &[a])
    }

    /// Mean squared error against a fixed target.
    pub fn mse(&mut self, pred: Var, target: &Tensor) -> Result<Var> {
        let pv = self.value(pred);
        if pv.shape() != target.shape() {
            return Err(mismatch("mse", pv.shape(), target.shape()));
        }
        if pv.is_empty() {
            return Err(TensorError::DegenerateShape(pv.shape().to_vec()));
        }
        let s = pv
            .data()
            .iter()
            .zip(target.data())
            .map(|(p, t)| (p - t) * (p - t))
            .sum::<f64>()
            / pv.len() as f64;
        let op = Op::Mse {
            pred,
            target: target.clone(),
        };
        self.push("mse", Tensor::scalar(s), op, &[pred])
    }

    /// Backpropagate from a scalar `loss`. A tape supports one backward pass.
    pub fn backward(&mut self, loss: Var) -> Result<Gradients> {
        if self.consumed {
            return Err(TensorError::DoubleBackward);
        }
        let loss_shape = self.value(loss).shape().to_vec();
        if loss_shape.iter().product::<usize>() != 1 {
            return Err(TensorError::NonScalarLoss(loss_shape));
        }
        self.consumed = true;
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor::full(loss_shape, 1.0));
        for idx in (0..=loss.0).rev() {
            if !self.nodes[idx].needs_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else {
                continue;
            };
            if matches!(self.nodes[idx].op, Op::Leaf) {
                grads[idx] = Some(g);
                continue;
            }
            self.propagate(idx, &g, &mut grads)?;
        }
        Ok(Gradients { grads })
    }

    fn accumulate(&self, grads: &mut [Option<Tensor>], v: Var, data: Vec<f64>) -> Result<()> {
        if !self.needs(v) {
            return Ok(());
        }
        match &mut grads[v.0] {
            Some(existing) => add_into(existing.data_mut(), &data),
            slot @ None => *slot = Some(Tensor::new(self.value(v).shape().to_vec(), data)?),
        }
        Ok(())
    }

    fn propagate(&self, idx: usize, g: &Tensor, grads: &mut [Option<Tensor>]) -> Result<()> {
        let node = &self.nodes[idx];
        let gd = g.data();
        match &node.op {
            Op::Leaf | Op::Constant => {}
            Op::MatMul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                let (m, k) = dims2("matmul", av)?;
                let n = bv.shape()[1];
                if self.needs(*a) {
                    let mut ga = vec![0.0; m * k];
                    gemm(Mat::new(gd, m, n), Mat::new(bv.data(), k, n).t(), 0.0, &mut ga);
                    self.accumulate(grads, *a, ga)?;
                }
                if self.needs(*b) {
                    let mut gb = vec![0.0; k * n];
                    gemm(Mat::new(av.data(), m, k).t(), Mat::new(gd, m, n), 0.0, &mut gb);
                    self.accumulate(grads, *b, gb)?;
                }
            }
            Op::Affine { x, w, b } => {
                let (xv, wv) = (self.value(*x), self.value(*w));
                let (m, k) = dims2("affine", xv)?;
                let n = wv.shape()[1];
                if self.needs(*x) {
                    let mut gx = vec![0.0; m * k];
                    gemm(Mat::new(gd, m, n), Mat::new(wv.data(), k, n).t(), 0.0, &mut gx);
                    self.accumulate(grads, *x, gx)?;
                }
                if self.needs(*w) {
                    let mut gw = vec![0.0; k * n];
                    gemm(Mat::new(xv.data(), m, k).t(), Mat::new(gd, m, n), 0.0, &mut gw);
                    self.accumulate(grads, *w, gw)?;
                }
                self.accumulate(grads, *b, reduce_to_suffix(gd, n))?;
            }
            Op::Add(a, b) => {
                self.accumulate(grads, *a, gd.to_vec())?;
                let bl = self.value(*b).len();
                self.accumulate(grads, *b, reduce_to_suffix(gd, bl))?;
            }
            Op::Sub(a, b) => {
                self.accumulate(grads, *a, gd.to_vec())?;
                let bl = self.value(*b).len();
                let gb = reduce_to_suffix(gd, bl).into_iter().map(|x| -x).collect();
                self.accumulate(grads, *b, gb)?;
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                let bl = bv.len();
                if self.needs(*a) {
                    let ga = gd
                        .iter()
                        .enumerate()
                        .map(|(i, g)| g * bv.data()[i % bl])
                        .collect();
                    self.accumulate(grads, *a, ga)?;
                }
                if self.needs(*b) {
                    let prod: Vec<f64> = gd.iter().zip(av.data()).map(|(g, x)| g * x).collect();
                    self.accumulate(grads, *b, reduce_to_suffix(&prod, bl))?;
                }
            }
            Op::Scale(a, s) => {
                self.accumulate(grads, *a, gd.iter().map(|g| g * s).collect())?;
            }
            Op::Shift(a) | Op::Reshape(a) => {
                self.accumulate(grads, *a, gd.to_vec())?;
            }
            Op::Act(a, act) => {
                let y = node.value.data();
                let x = self.value(*a).data();
                let ga = match act {
                    Activation::Tanh => gd.iter().zip(y).map(|(g, y)| g * (1.0 - y * y)).collect(),
                    Activation::Sigmoid => {
                        gd.iter().zip(y).map(|(g, y)| g * y * (1.0 - y)).collect()
                    }
                    Activation::Relu => gd
                        .iter()
                        .zip(x)
                        .map(|(g, &x)| if x > 0.0 { *g } else { 0.0 })
                        .collect(),
                    Activation::Gelu => gd.iter().zip(x).map(|(g, &x)| g * gelu_grad(x)).collect(),
                    Activation::Identity => gd.to_vec(),
                };
                self.accumulate(grads, *a, ga)?;
            }
            Op::Transpose(a) => {
                let (m, n) = dims2("transpose", self.value(*a))?;
                self.accumulate(grads, *a, transpose_data(gd, n, m))?;
            }
            Op::SliceLast { a, start } => {
                let av = self.value(*a);
                let n = *av.shape().last().unwrap_or(&0);
                let len = *node.value.shape().last().unwrap_or(&0);
                let mut ga = vec![0.0; av.len()];
                for (dst, src) in ga.chunks_exact_mut(n).zip(gd.chunks_exact(len)) {
                    dst[*start..start + len].copy_from_slice(src);
                }
                self.accumulate(grads, *a, ga)?;
            }
            Op::Row { a, index } => {
                let av = self.value(*a);
                let n = av.shape()[1];
                let mut ga = vec![0.0; av.len()];
                ga[index * n..(index + 1) * n].copy_from_slice(gd);
                self.accumulate(grads, *a, ga)?;
            }
            Op::ConcatRows(parts) => {
                let mut off = 0;
                for &p in parts {
                    let len = self.value(p).len();
                    self.accumulate(grads, p, gd[off..off + len].to_vec())?;
                    off += len;
                }
            }
            Op::ChannelMix { z, w, b } => {
                let (zv, wv) = (self.value(*z), self.value(*w));
                let (batch, ci, t) = dims3("channel_mix", zv)?;
                let co = wv.shape()[0];
                if self.needs(*z) {
                    let mut gz = vec![0.0; batch * ci * t];
                    for (gb, dst) in gd.chunks_exact(co * t).zip(gz.chunks_exact_mut(ci * t)) {
                        gemm(Mat::new(wv.data(), co, ci).t(), Mat::new(gb, co, t), 0.0, dst);
                    }
                    self.accumulate(grads, *z, gz)?;
                }
                if self.needs(*w) {
                    let mut gw = vec![0.0; co * ci];
                    for (gb, zb) in gd.chunks_exact(co * t).zip(zv.data().chunks_exact(ci * t)) {
                        gemm(Mat::new(gb, co, t), Mat::new(zb, ci, t).t(), 1.0, &mut gw);
                    }
                    self.accumulate(grads, *w, gw)?;
                }
                if self.needs(*b) {
                    let mut gbias = vec![0.0; co];
                    for gb in gd.chunks_exact(co * t) {
                        for (o, row) in gb.chunks_exact(t).enumerate() {
                            gbias[o] += row.iter().sum::<f64>();
                        }
                    }
                    self.accumulate(grads, *b, gbias)?;
                }
            }
            Op::Rfft(a) => {
                let n = *self.value(*a).shape().last().unwrap_or(&0);
                self.accumulate(grads, *a, rfft_adjoint_rows(gd, n))?;
            }
            Op::Irfft(a) => {
                let n = *node.value.shape().last().unwrap_or(&0);
                self.accumulate(grads, *a, irfft_adjoint_rows(gd, n))?;
            }
            Op::ModeMix { z, r, modes } => {
                let (zv, rv) = (self.value(*z), self.value(*r));
                let (batch, ci, m) = (zv.shape()[0], zv.shape()[1], zv.shape()[2]);
                let co = rv.shape()[1];
                let (zd, rd) = (zv.data(), rv.data());
                let mut gz = vec![0.0; zv.len()];
                let mut gr = vec![0.0; rv.len()];
                for b in 0..batch {
                    for kk in 0..*modes {
                        for o in 0..co {
                            let oi = ((b * co + o) * m + kk) * 2;
                            let (gre, gim) = (gd[oi], gd[oi + 1]);
                            for i in 0..ci {
                                let zi = ((b * ci + i) * m + kk) * 2;
                                let ri = ((kk * co + o) * ci + i) * 2;
                                let (zr, zim) = (zd[zi], zd[zi + 1]);
                                let (rr, rim) = (rd[ri], rd[ri + 1]);
                                // d/dz = conj(r) g, d/dr = conj(z) g
                                gz[zi] += rr * gre + rim * gim;
                                gz[zi + 1] += rr * gim - rim * gre;
                                gr[ri] += zr * gre + zim * gim;
                                gr[ri + 1] += zr * gim - zim * gre;
                            }
                        }
                    }
                }
                self.accumulate(grads, *z, gz)?;
                self.accumulate(grads, *r, gr)?;
            }
            Op::Dwt(a, plan) => {
                self.accumulate(grads, *a, plan.forward_adjoint_rows(gd))?;
            }
            Op::Idwt(a, plan) => {
                self.accumulate(grads, *a, plan.inverse_adjoint_rows(gd))?;
            }
            Op::BandMix { c, r, bands } => {
                let (cv, rv) = (self.value(*c), self.value(*r));
                let (batch, ch, len) = dims3("band_mix", cv)?;
                let (cd, rd) = (cv.data(), rv.data());
                let mut gc = gd.to_vec();
                let mut gr = vec![0.0; rv.len()];
                for b in 0..batch {
                    for j in 0..*bands {
                        for i in 0..ch {
                            gc[(b * ch + i) * len + j] = 0.0;
                        }
                        for o in 0..ch {
                            let go = gd[(b * ch + o) * len + j];
                            for i in 0..ch {
                                gc[(b * ch + i) * len + j] += rd[(j * ch + o) * ch + i] * go;
                                gr[(j * ch + o) * ch + i] += go * cd[(b * ch + i) * len + j];
                            }
                        }
                    }
                }
                self.accumulate(grads, *c, gc)?;
                self.accumulate(grads, *r, gr)?;
            }
            Op::Sum(a) => {
                let n = self.value(*a).len();
                self.accumulate(grads, *a, vec![gd[0]; n])?;
            }
            Op::Mean(a) => {
                let n = self.value(*a).len();
                self.accumulate(grads, *a, vec![gd[0] / n as f64; n])?;
            }
            Op::Mse { pred, target } => {
                let pv = self.value(*pred);
                let k = 2.0 * gd[0] / pv.len() as f64;
                let gp = pv
                    .data()
                    .iter()
                    .zip(target.data())
                    .map(|(p, t)| k * (p - t))
                    .collect();
                self.accumulate(grads, *pred, gp)?;
            }
        }
        Ok(())
    }
}

fn transpose_data(d: &[f64], m: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            out[j * m + i] = d[i * n + j];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_gradient() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::scalar(3.0));
        let y = tape.mul(x, x).unwrap();
        let g = tape.backward(y).unwrap();
        assert_eq!(g.get(x).unwrap().item(), Some(6.0));
    }

    #[test]
    fn fan_out_accumulates() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::scalar(1.5));
        let y = tape.add(x, x).unwrap();
        let g = tape.backward(y).unwrap();
        assert_eq!(g.get(x).unwrap().item(), Some(2.0));
    }

    #[test]
    fn double_backward_is_rejected() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::scalar(1.0));
        let y = tape.scale(x, 2.0).unwrap();
        tape.backward(y).unwrap();
        assert_eq!(tape.backward(y).unwrap_err(), TensorError::DoubleBackward);
    }

    #[test]
    fn non_scalar_loss_is_rejected() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::zeros([2]));
        assert!(matches!(tape.backward(x), Err(TensorError::NonScalarLoss(_))));
    }

    #[test]
    fn matmul_identity_and_mismatch() {
        let mut tape = Tape::new();
        let i = tape.constant(Tensor::eye(3));
        let xv = Tensor::new([3, 2], vec![1., 2., 3., 4., 5., 6.]).unwrap();
        let x = tape.constant(xv.clone());
        let y = tape.matmul(i, x).unwrap();
        assert_eq!(tape.value(y), &xv);
        let err = tape.matmul(x, x).unwrap_err();
        assert!(err.to_string().contains("[3, 2]"));
    }

    #[test]
    fn scalar_activations() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::new([2], vec![0.0, -1.0]).unwrap());
        let t = tape.tanh(x).unwrap();
        let r = tape.relu(x).unwrap();
        assert_eq!(tape.value(t).data()[0], 0.0);
        assert_eq!(tape.value(r).data()[1], 0.0);
    }

    #[test]
    fn constants_get_no_gradient() {
        let mut tape = Tape::new();
        let c = tape.constant(Tensor::scalar(2.0));
        let x = tape.leaf(Tensor::scalar(5.0));
        let y = tape.mul(x, c).unwrap();
        let g = tape.backward(y).unwrap();
        assert!(g.get(c).is_none());
        assert_eq!(g.get(x).unwrap().item(), Some(2.0));
    }

    #[test]
    fn overflow_raises() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::scalar(1e300));
        assert_eq!(tape.scale(x, 1e300).unwrap_err(), TensorError::NonFinite("scale"));
    }
}
