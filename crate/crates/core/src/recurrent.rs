//! Recurrent baselines over time-major sequences whose feature axis is the
//! set of training curves.

use magop_tensor::{Tape, Tensor, Var};

use crate::error::{Error, Result};
use crate::operators::kv::KvList;
use crate::operators::params::{dense_specs, Bound, Init, ParamSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cell {
    Rnn,
    Lstm,
    Gru,
}

impl Cell {
    pub fn gates(self) -> usize {
        match self {
            Cell::Rnn => 1,
            Cell::Lstm => 4,
            Cell::Gru => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Cell::Rnn => "rnn",
            Cell::Lstm => "lstm",
            Cell::Gru => "gru",
        }
    }
}

fn cell_specs(prefix: &str, cell: Cell, input: usize, hidden: usize) -> Vec<ParamSpec> {
    let g = cell.gates() * hidden;
    vec![
        ParamSpec::new(format!("{prefix}.w_ih"), &[input, g], Init::Xavier),
        ParamSpec::new(format!("{prefix}.w_hh"), &[hidden, g], Init::Xavier),
        ParamSpec::new(format!("{prefix}.b_ih"), &[g], Init::Zeros),
        ParamSpec::new(format!("{prefix}.b_hh"), &[g], Init::Zeros),
    ]
}

fn cell_count(cell: Cell, input: usize, hidden: usize) -> usize {
    let g = cell.gates() * hidden;
    input * g + hidden * g + 2 * g
}

/// Input projections `x w_ih + b_ih` for every row of `x`.
fn project(tape: &mut Tape, p: &Bound, prefix: &str, x: Var) -> Result<Var> {
    let w = p.get(&format!("{prefix}.w_ih"))?;
    let b = p.get(&format!("{prefix}.b_ih"))?;
    Ok(tape.affine(x, w, b)?)
}

#[derive(Debug, Clone, Copy)]
struct CellState {
    h: Var,
    c: Option<Var>,
}

/// One recurrence step given the projected input `xw: [1, gates * H]`.
fn step(tape: &mut Tape, p: &Bound, prefix: &str, cell: Cell, hidden: usize, xw: Var, s: CellState) -> Result<CellState> {
    let w_hh = p.get(&format!("{prefix}.w_hh"))?;
    let b_hh = p.get(&format!("{prefix}.b_hh"))?;
    let hw = tape.affine(s.h, w_hh, b_hh)?;
    let n = hidden;
    match cell {
        Cell::Rnn => {
            let a = tape.add(xw, hw)?;
            Ok(CellState {
                h: tape.tanh(a)?,
                c: None,
            })
        }
        Cell::Lstm => {
            let a = tape.add(xw, hw)?;
            let i = tape.slice_last(a, 0, n)?;
            let f = tape.slice_last(a, n, n)?;
            let g = tape.slice_last(a, 2 * n, n)?;
            let o = tape.slice_last(a, 3 * n, n)?;
            let (i, f, g, o) = (tape.sigmoid(i)?, tape.sigmoid(f)?, tape.tanh(g)?, tape.sigmoid(o)?);
            let c_prev = s.c.ok_or_else(|| Error::Shape("lstm step without cell state".into()))?;
            let keep = tape.mul(f, c_prev)?;
            let write = tape.mul(i, g)?;
            let c = tape.add(keep, write)?;
            let tc = tape.tanh(c)?;
            Ok(CellState {
                h: tape.mul(o, tc)?,
                c: Some(c),
            })
        }
        Cell::Gru => {
            let xr = tape.slice_last(xw, 0, n)?;
            let xz = tape.slice_last(xw, n, n)?;
            let xn = tape.slice_last(xw, 2 * n, n)?;
            let hr = tape.slice_last(hw, 0, n)?;
            let hz = tape.slice_last(hw, n, n)?;
            let hn = tape.slice_last(hw, 2 * n, n)?;
            let r = tape.add(xr, hr)?;
            let r = tape.sigmoid(r)?;
            let z = tape.add(xz, hz)?;
            let z = tape.sigmoid(z)?;
            let gated = tape.mul(r, hn)?;
            let cand = tape.add(xn, gated)?;
            let cand = tape.tanh(cand)?;
            let keep = tape.mul(z, s.h)?;
            let one_minus = tape.one_minus(z)?;
            let write = tape.mul(one_minus, cand)?;
            Ok(CellState {
                h: tape.add(write, keep)?,
                c: None,
            })
        }
    }
}

fn zero_state(tape: &mut Tape, cell: Cell, hidden: usize) -> CellState {
    let h = tape.constant(Tensor::zeros([1, hidden]));
    let c = (cell == Cell::Lstm).then(|| tape.constant(Tensor::zeros([1, hidden])));
    CellState { h, c }
}

/// `[F, T]` sample-major input to a time-major `[T, F]` tensor.
fn time_major(h: &Tensor, features: usize, t_len: usize) -> Result<Tensor> {
    if h.shape() != [features, t_len] {
        return Err(Error::Shape(format!(
            "recurrent model expects [{features}, {t_len}] (features x time), got {:?}",
            h.shape()
        )));
    }
    let mut data = vec![0.0; h.len()];
    for f in 0..features {
        for t in 0..t_len {
            data[t * features + f] = h.data()[f * t_len + t];
        }
    }
    Ok(Tensor::new([t_len, features], data)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecurrentConfig {
    pub cell: Cell,
    pub hidden: usize,
    /// Feature dimension: the number of curves processed side by side.
    pub features: usize,
    pub t_len: usize,
}

impl RecurrentConfig {
    pub fn new(cell: Cell, features: usize, t_len: usize) -> Self {
        Self {
            cell,
            hidden: 128,
            features,
            t_len,
        }
    }

    pub fn param_specs(&self) -> Vec<ParamSpec> {
        let mut specs = cell_specs("cell", self.cell, self.features, self.hidden);
        specs.extend(dense_specs("out", self.hidden, self.features));
        specs
    }

    pub fn param_count(&self) -> usize {
        cell_count(self.cell, self.features, self.hidden) + self.hidden * self.features + self.features
    }

    /// `h: [F, T]` to `[F, T]`; the recurrence runs along `T`.
    pub fn forward(&self, tape: &mut Tape, p: &Bound, h: &Tensor) -> Result<Var> {
        let x = time_major(h, self.features, self.t_len)?;
        let x = tape.constant(x);
        let xw = project(tape, p, "cell", x)?;
        let mut s = zero_state(tape, self.cell, self.hidden);
        let mut hs = Vec::with_capacity(self.t_len);
        for t in 0..self.t_len {
            let row = tape.row(xw, t)?;
            s = step(tape, p, "cell", self.cell, self.hidden, row, s)?;
            hs.push(s.h);
        }
        let hs = tape.concat_rows(&hs)?;
        let y = p.dense(tape, "out", hs)?;
        Ok(tape.transpose(y)?)
    }

    pub fn to_kv(&self, kv: &mut KvList) {
        kv.push("hidden", self.hidden);
        kv.push("features", self.features);
        kv.push("t_len", self.t_len);
    }

    pub fn from_kv(cell: Cell, kv: &KvList) -> Result<Self> {
        Ok(Self {
            cell,
            hidden: kv.require("hidden")?,
            features: kv.require("features")?,
            t_len: kv.require("t_len")?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecodeMode {
    /// Feed ground-truth previous outputs (training).
    TeacherForced,
    /// Feed back the model's own previous outputs (inference).
    Autoregressive,
}

/// Encoder-decoder LSTM. The encoder's final state seeds the decoder,
/// whose first input is a zero token.
#[derive(Debug, Clone, PartialEq)]
pub struct EdLstmConfig {
    pub hidden: usize,
    pub features: usize,
    pub t_len: usize,
}

impl EdLstmConfig {
    pub fn new(features: usize, t_len: usize) -> Self {
        Self {
            hidden: 128,
            features,
            t_len,
        }
    }

    pub fn param_specs(&self) -> Vec<ParamSpec> {
        let mut specs = cell_specs("enc", Cell::Lstm, self.features, self.hidden);
        specs.extend(cell_specs("dec", Cell::Lstm, self.features, self.hidden));
        specs.extend(dense_specs("out", self.hidden, self.features));
        specs
    }

    pub fn param_count(&self) -> usize {
        2 * cell_count(Cell::Lstm, self.features, self.hidden) + self.hidden * self.features + self.features
    }

    pub fn forward(
        &self,
        tape: &mut Tape,
        p: &Bound,
        h: &Tensor,
        target: Option<&Tensor>,
        mode: DecodeMode,
    ) -> Result<Var> {
        let (f, n, hid) = (self.features, self.t_len, self.hidden);
        let x = tape.constant(time_major(h, f, n)?);
        let xw = project(tape, p, "enc", x)?;
        let mut s = zero_state(tape, Cell::Lstm, hid);
        for t in 0..n {
            let row = tape.row(xw, t)?;
            s = step(tape, p, "enc", Cell::Lstm, hid, row, s)?;
        }

        let mut outs = Vec::with_capacity(n);
        match mode {
            DecodeMode::TeacherForced => {
                let target = target.ok_or_else(|| {
                    Error::Param("teacher forcing requires target sequences".into())
                })?;
                let y = time_major(target, f, n)?;
                let mut prev = vec![0.0; n * f];
                prev[f..].copy_from_slice(&y.data()[..(n - 1) * f]);
                let prev = tape.constant(Tensor::new([n, f], prev)?);
                let dw = project(tape, p, "dec", prev)?;
                for t in 0..n {
                    let row = tape.row(dw, t)?;
                    s = step(tape, p, "dec", Cell::Lstm, hid, row, s)?;
                    outs.push(s.h);
                }
                let hs = tape.concat_rows(&outs)?;
                let y = p.dense(tape, "out", hs)?;
                Ok(tape.transpose(y)?)
            }
            DecodeMode::Autoregressive => {
                let mut prev = tape.constant(Tensor::zeros([1, f]));
                for _ in 0..n {
                    let dw = project(tape, p, "dec", prev)?;
                    s = step(tape, p, "dec", Cell::Lstm, hid, dw, s)?;
                    prev = p.dense(tape, "out", s.h)?;
                    outs.push(prev);
                }
                let y = tape.concat_rows(&outs)?;
                Ok(tape.transpose(y)?)
            }
        }
    }

    pub fn to_kv(&self, kv: &mut KvList) {
        kv.push("hidden", self.hidden);
        kv.push("features", self.features);
        kv.push("t_len", self.t_len);
    }

    pub fn from_kv(kv: &KvList) -> Result<Self> {
        Ok(Self {
            hidden: kv.require("hidden")?,
            features: kv.require("features")?,
            t_len: kv.require("t_len")?,
        })
    }
}
