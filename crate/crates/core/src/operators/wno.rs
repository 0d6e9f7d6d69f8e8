use magop_tensor::{Activation, DwtPlan, Tape, Tensor, Var, Wavelet};

use super::deeponet::parse_activation;
use super::fno::build_input;
use super::kv::KvList;
use super::params::{channel_specs, Bound, Init, ParamSpec};
use crate::error::{Error, Result};

/// Wavelet neural operator: each block mixes channels on the deepest
/// approximation band of a multilevel DWT and passes the detail bands
/// through unchanged.
#[derive(Debug, Clone, PartialEq)]
pub struct WnoConfig {
    pub t_len: usize,
    pub width: usize,
    pub blocks: usize,
    pub levels: usize,
    pub wavelet: Wavelet,
    pub head_width: usize,
    pub activation: Activation,
}

impl WnoConfig {
    pub fn new(t_len: usize) -> Self {
        Self {
            t_len,
            width: 64,
            blocks: 8,
            levels: 4,
            wavelet: Wavelet::Db6,
            head_width: 128,
            activation: Activation::Gelu,
        }
    }

    pub fn plan(&self) -> Result<DwtPlan> {
        Ok(DwtPlan::new(self.t_len, self.levels, self.wavelet)?)
    }

    pub fn param_specs(&self) -> Result<Vec<ParamSpec>> {
        let w = self.width;
        let k = self.plan()?.approx_len();
        let mut specs = Vec::new();
        specs.extend(channel_specs("lift", 2, w));
        let scale = 1.0 / (w * w) as f64;
        for l in 0..self.blocks {
            specs.push(ParamSpec::new(format!("block{l}.r"), &[k, w, w], Init::ScaledUniform(scale)));
            specs.extend(channel_specs(&format!("block{l}.w"), w, w));
        }
        specs.extend(channel_specs("head.q", w, self.head_width));
        specs.extend(channel_specs("head.out", self.head_width, 1));
        Ok(specs)
    }

    /// `(2 w + w) + L (k w^2 + w^2 + w) + (w q + q) + (q + 1)` with `k` the
    /// approximation band length.
    pub fn param_count(&self) -> Result<usize> {
        let (w, q) = (self.width, self.head_width);
        let k = self.plan()?.approx_len();
        Ok((2 * w + w) + self.blocks * (k * w * w + w * w + w) + (w * q + q) + (q + 1))
    }

    /// One wavelet block, `act(W z + b + idwt(R . dwt(z)))`.
    pub fn block(&self, tape: &mut Tape, p: &Bound, l: usize, z: Var, plan: &DwtPlan) -> Result<Var> {
        let c = tape.dwt(z, self.levels, self.wavelet)?;
        let r = p.get(&format!("block{l}.r"))?;
        let mixed = tape.band_mix(c, r, plan.approx_len())?;
        let k = tape.idwt(mixed, plan)?;
        let local = p.channels(tape, &format!("block{l}.w"), z)?;
        let sum = tape.add(k, local)?;
        Ok(tape.activate(sum, self.activation)?)
    }

    pub fn forward(&self, tape: &mut Tape, p: &Bound, h: &Tensor, t: &[f64]) -> Result<Var> {
        let plan = self.plan()?;
        let x = build_input(h, t, self.t_len, true)?;
        let batch = h.shape()[0];
        let x = tape.constant(x);
        let mut z = p.channels(tape, "lift", x)?;
        for l in 0..self.blocks {
            z = self.block(tape, p, l, z, &plan)?;
        }
        let q = p.channels(tape, "head.q", z)?;
        let q = tape.activate(q, self.activation)?;
        let out = p.channels(tape, "head.out", q)?;
        Ok(tape.reshape(out, &[batch, self.t_len])?)
    }

    pub fn to_kv(&self, kv: &mut KvList) {
        kv.push("t_len", self.t_len);
        kv.push("width", self.width);
        kv.push("blocks", self.blocks);
        kv.push("levels", self.levels);
        kv.push("wavelet", self.wavelet.name());
        kv.push("head_width", self.head_width);
        kv.push("activation", self.activation.name());
    }

    pub fn from_kv(kv: &KvList) -> Result<Self> {
        let name: String = kv.require("wavelet")?;
        let c = Self {
            t_len: kv.require("t_len")?,
            width: kv.require("width")?,
            blocks: kv.require("blocks")?,
            levels: kv.require("levels")?,
            wavelet: Wavelet::from_name(&name)
                .ok_or_else(|| Error::Format(format!("unknown wavelet {name:?}")))?,
            head_width: kv.require("head_width")?,
            activation: parse_activation(kv)?,
        };
        c.plan()?;
        Ok(c)
    }
}
