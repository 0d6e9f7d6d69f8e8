use magop_tensor::{Activation, Tape, Tensor, Var};

use super::kv::KvList;
use super::params::{dense_specs, Bound, ParamSpec};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DeepOnetConfig {
    /// Sensor count: length of the input field fed to the branch net.
    pub t_len: usize,
    pub branch_layers: usize,
    pub branch_width: usize,
    pub trunk_layers: usize,
    pub trunk_width: usize,
    pub p: usize,
    pub activation: Activation,
}

impl DeepOnetConfig {
    pub fn new(t_len: usize) -> Self {
        Self {
            t_len,
            branch_layers: 8,
            branch_width: 200,
            trunk_layers: 8,
            trunk_width: 200,
            p: 25,
            activation: Activation::Tanh,
        }
    }

    fn widths(input: usize, layers: usize, width: usize, p: usize) -> Vec<usize> {
        let mut w = vec![input];
        w.extend(std::iter::repeat_n(width, layers));
        w.push(p);
        w
    }

    pub fn param_specs(&self) -> Vec<ParamSpec> {
        let mut specs = Vec::new();
        for (net, widths) in [
            ("branch", Self::widths(self.t_len, self.branch_layers, self.branch_width, self.p)),
            ("trunk", Self::widths(1, self.trunk_layers, self.trunk_width, self.p)),
        ] {
            for (i, w) in widths.windows(2).enumerate() {
                specs.extend(dense_specs(&format!("{net}.{i}"), w[0], w[1]));
            }
        }
        specs
    }

    /// `sum_l (w_l w_{l+1} + w_{l+1})` over both nets.
    pub fn param_count(&self) -> usize {
        let mlp = |widths: Vec<usize>| -> usize { widths.windows(2).map(|w| w[0] * w[1] + w[1]).sum() };
        mlp(Self::widths(self.t_len, self.branch_layers, self.branch_width, self.p))
            + mlp(Self::widths(1, self.trunk_layers, self.trunk_width, self.p))
    }

    fn mlp(&self, tape: &mut Tape, p: &Bound, net: &str, layers: usize, mut x: Var) -> Result<Var> {
        for i in 0..=layers {
            x = p.dense(tape, &format!("{net}.{i}"), x)?;
            if i < layers {
                x = tape.activate(x, self.activation)?;
            }
        }
        Ok(x)
    }

    /// `out[i, j] = sum_k c_k(h_i) phi_k(t_j)`.
    pub fn forward(&self, tape: &mut Tape, p: &Bound, h: &Tensor, t: &[f64]) -> Result<Var> {
        let shape = h.shape().to_vec();
        if shape.len() != 2 || shape[1] != self.t_len || t.len() != self.t_len {
            return Err(Error::Shape(format!(
                "deeponet expects h [batch, {}] and t [{}], got {shape:?} and [{}]",
                self.t_len,
                self.t_len,
                t.len()
            )));
        }
        let h = tape.constant(h.clone());
        let coeffs = self.mlp(tape, p, "branch", self.branch_layers, h)?;
        let grid = tape.constant(Tensor::new([t.len(), 1], t.to_vec())?);
        let basis = self.mlp(tape, p, "trunk", self.trunk_layers, grid)?;
        let basis_t = tape.transpose(basis)?;
        Ok(tape.matmul(coeffs, basis_t)?)
    }

    pub fn to_kv(&self, kv: &mut KvList) {
        kv.push("t_len", self.t_len);
        kv.push("branch_layers", self.branch_layers);
        kv.push("branch_width", self.branch_width);
        kv.push("trunk_layers", self.trunk_layers);
        kv.push("trunk_width", self.trunk_width);
        kv.push("p", self.p);
        kv.push("activation", self.activation.name());
    }

    pub fn from_kv(kv: &KvList) -> Result<Self> {
        Ok(Self {
            t_len: kv.require("t_len")?,
            branch_layers: kv.require("branch_layers")?,
            branch_width: kv.require("branch_width")?,
            trunk_layers: kv.require("trunk_layers")?,
            trunk_width: kv.require("trunk_width")?,
            p: kv.require("p")?,
            activation: parse_activation(kv)?,
        })
    }
}

pub(crate) fn parse_activation(kv: &KvList) -> Result<Activation> {
    let name: String = kv.require("activation")?;
    Activation::from_name(&name).ok_or_else(|| Error::Format(format!("unknown activation {name:?}")))
}
