use magop_tensor::{rfft_modes, Activation, Tape, Tensor, Var};

use super::deeponet::parse_activation;
use super::kv::KvList;
use super::params::{channel_specs, Bound, Init, ParamSpec};
use crate::error::{Error, Result};

/// Fourier neural operator. With `use_t == false` the time grid is not an
/// input channel, which makes the operator independent of the sampling
/// grid (the rate-independent variant).
#[derive(Debug, Clone, PartialEq)]
pub struct FnoConfig {
    pub t_len: usize,
    pub use_t: bool,
    pub width: usize,
    pub blocks: usize,
    pub modes: usize,
    pub head_width: usize,
    pub activation: Activation,
}

impl FnoConfig {
    pub fn new(t_len: usize, use_t: bool) -> Self {
        Self {
            t_len,
            use_t,
            width: 8,
            blocks: 4,
            modes: 4,
            head_width: 128,
            activation: Activation::Relu,
        }
    }

    pub fn in_channels(&self) -> usize {
        if self.use_t {
            2
        } else {
            1
        }
    }

    pub fn validate(&self) -> Result<()> {
        let available = rfft_modes(self.t_len);
        if self.modes == 0 || self.modes > available {
            return Err(Error::Param(format!(
                "{} retained modes requested, {available} available for length {}",
                self.modes, self.t_len
            )));
        }
        Ok(())
    }

    pub fn param_specs(&self) -> Vec<ParamSpec> {
        let w = self.width;
        let mut specs = Vec::new();
        specs.extend(channel_specs("lift", self.in_channels(), w));
        let scale = 1.0 / (w * w) as f64;
        for l in 0..self.blocks {
            specs.push(ParamSpec::new(
                format!("block{l}.r"),
                &[self.modes, w, w, 2],
                Init::ScaledUniform(scale),
            ));
            specs.extend(channel_specs(&format!("block{l}.w"), w, w));
        }
        specs.extend(channel_specs("head.q", w, self.head_width));
        specs.extend(channel_specs("head.out", self.head_width, 1));
        specs
    }

    /// `(c_in w + w) + L (2 m w^2 + w^2 + w) + (w q + q) + (q + 1)`.
    pub fn param_count(&self) -> usize {
        let (w, q) = (self.width, self.head_width);
        (self.in_channels() * w + w) + self.blocks * (2 * self.modes * w * w + w * w + w) + (w * q + q) + (q + 1)
    }

    pub fn forward(&self, tape: &mut Tape, p: &Bound, h: &Tensor, t: &[f64]) -> Result<Var> {
        self.validate()?;
        let x = build_input(h, t, self.t_len, self.use_t)?;
        let batch = h.shape()[0];
        let x = tape.constant(x);
        let mut z = p.channels(tape, "lift", x)?;
        for l in 0..self.blocks {
            let spec = tape.rfft(z)?;
            let r = p.get(&format!("block{l}.r"))?;
            let mixed = tape.mode_mix(spec, r, self.modes)?;
            let k = tape.irfft(mixed, self.t_len)?;
            let local = p.channels(tape, &format!("block{l}.w"), z)?;
            let sum = tape.add(k, local)?;
            z = tape.activate(sum, self.activation)?;
        }
        let q = p.channels(tape, "head.q", z)?;
        let q = tape.activate(q, self.activation)?;
        let out = p.channels(tape, "head.out", q)?;
        Ok(tape.reshape(out, &[batch, self.t_len])?)
    }

    pub fn to_kv(&self, kv: &mut KvList) {
        kv.push("t_len", self.t_len);
        kv.push("use_t", self.use_t);
        kv.push("width", self.width);
        kv.push("blocks", self.blocks);
        kv.push("modes", self.modes);
        kv.push("head_width", self.head_width);
        kv.push("activation", self.activation.name());
    }

    pub fn from_kv(kv: &KvList) -> Result<Self> {
        let c = Self {
            t_len: kv.require("t_len")?,
            use_t: kv.require("use_t")?,
            width: kv.require("width")?,
            blocks: kv.require("blocks")?,
            modes: kv.require("modes")?,
            head_width: kv.require("head_width")?,
            activation: parse_activation(kv)?,
        };
        c.validate()?;
        Ok(c)
    }
}

/// Stack `h: [B, T]` and, optionally, the raw grid `t` as channels of a
/// `[B, C, T]` input.
pub(crate) fn build_input(h: &Tensor, t: &[f64], t_len: usize, use_t: bool) -> Result<Tensor> {
    let (batch, n) = match *h.shape() {
        [b, n] => (b, n),
        _ => return Err(Error::Shape(format!("expected h [batch, T], got {:?}", h.shape()))),
    };
    if n != t_len || (use_t && t.len() != t_len) {
        return Err(Error::Shape(format!(
            "configured for T = {t_len}, got h with {n} samples and t with {}",
            t.len()
        )));
    }
    if !use_t {
        return Ok(h.clone().reshape([batch, 1, n])?);
    }
    let mut data = Vec::with_capacity(2 * h.len());
    for row in h.data().chunks_exact(n) {
        data.extend_from_slice(row);
        data.extend_from_slice(t);
    }
    Ok(Tensor::new([batch, 2, n], data)?)
}
