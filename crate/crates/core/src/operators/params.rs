//! Named parameter tensors and their initialization.

use magop_tensor::init::uniform;
use magop_tensor::{rng_for, xavier_uniform_with, Tape, Tensor, Var};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Init {
    Xavier,
    Zeros,
    /// `scale * U[0, 1)`, the customary spectral-weight initialization.
    ScaledUniform(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub init: Init,
}

impl ParamSpec {
    pub fn new(name: impl Into<String>, shape: &[usize], init: Init) -> Self {
        Self {
            name: name.into(),
            shape: shape.to_vec(),
            init,
        }
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Dense layer `x w + b` with `w: [fan_in, fan_out]`.
pub fn dense_specs(prefix: &str, fan_in: usize, fan_out: usize) -> [ParamSpec; 2] {
    [
        ParamSpec::new(format!("{prefix}.w"), &[fan_in, fan_out], Init::Xavier),
        ParamSpec::new(format!("{prefix}.b"), &[fan_out], Init::Zeros),
    ]
}

/// Pointwise channel map with `w: [c_out, c_in]`.
pub fn channel_specs(prefix: &str, c_in: usize, c_out: usize) -> [ParamSpec; 2] {
    [
        ParamSpec::new(format!("{prefix}.w"), &[c_out, c_in], Init::Xavier),
        ParamSpec::new(format!("{prefix}.b"), &[c_out], Init::Zeros),
    ]
}

/// Ordered named parameter set.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    names: Vec<String>,
    tensors: Vec<Tensor>,
}

impl Params {
    /// Seeded initialization; each tensor draws from its own stream.
    pub fn init(specs: &[ParamSpec], seed: u64) -> Result<Self> {
        let mut names = Vec::with_capacity(specs.len());
        let mut tensors = Vec::with_capacity(specs.len());
        for (k, s) in specs.iter().enumerate() {
            let mut rng = rng_for(seed, k as u64);
            let t = match s.init {
                Init::Xavier => xavier_uniform_with(&s.shape, &mut rng)?,
                Init::Zeros => Tensor::zeros(s.shape.clone()),
                Init::ScaledUniform(scale) => uniform(&s.shape, 0.0, scale, &mut rng),
            };
            names.push(s.name.clone());
            tensors.push(t);
        }
        Ok(Self { names, tensors })
    }

    /// Assemble from stored tensors, checking the inventory against `specs`
    /// exactly: same names, same order, same shapes.
    pub fn from_parts(specs: &[ParamSpec], parts: Vec<(String, Tensor)>) -> Result<Self> {
        if parts.len() != specs.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} parameter tensors, found {}",
                specs.len(),
                parts.len()
            )));
        }
        let mut names = Vec::with_capacity(parts.len());
        let mut tensors = Vec::with_capacity(parts.len());
        for (spec, (name, t)) in specs.iter().zip(parts) {
            if name != spec.name {
                return Err(Error::Checkpoint(format!(
                    "unexpected parameter {name:?}, expected {:?}",
                    spec.name
                )));
            }
            if t.shape() != spec.shape.as_slice() {
                return Err(Error::Checkpoint(format!(
                    "parameter {name} has shape {:?}, expected {:?}",
                    t.shape(),
                    spec.shape
                )));
            }
            names.push(name);
            tensors.push(t);
        }
        Ok(Self { names, tensors })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.names.iter().position(|n| n == name).map(|i| &self.tensors[i])
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        let i = self.names.iter().position(|n| n == name)?;
        Some(&mut self.tensors[i])
    }

    pub fn count(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names.iter().map(String::as_str).zip(&self.tensors)
    }

    /// Record every tensor on `tape` as a trainable leaf.
    pub fn bind(&self, tape: &mut Tape) -> Bound {
        Bound {
            names: self.names.clone(),
            vars: self.tensors.iter().map(|t| tape.leaf(t.clone())).collect(),
        }
    }

    /// Record every tensor as a constant (inference only).
    pub fn bind_constant(&self, tape: &mut Tape) -> Bound {
        Bound {
            names: self.names.clone(),
            vars: self.tensors.iter().map(|t| tape.constant(t.clone())).collect(),
        }
    }
}

/// Parameters recorded on a tape, looked up by name.
#[derive(Debug, Clone)]
pub struct Bound {
    names: Vec<String>,
    vars: Vec<Var>,
}

impl Bound {
    pub fn get(&self, name: &str) -> Result<Var> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.vars[i])
            .ok_or_else(|| Error::Checkpoint(format!("missing parameter {name}")))
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }

    /// `x w + b` for the dense layer `prefix`.
    pub fn dense(&self, tape: &mut Tape, prefix: &str, x: Var) -> Result<Var> {
        let w = self.get(&format!("{prefix}.w"))?;
        let b = self.get(&format!("{prefix}.b"))?;
        Ok(tape.affine(x, w, b)?)
    }

    /// Pointwise channel map `prefix` on `[B, C, T]`.
    pub fn channels(&self, tape: &mut Tape, prefix: &str, z: Var) -> Result<Var> {
        let w = self.get(&format!("{prefix}.w"))?;
        let b = self.get(&format!("{prefix}.b"))?;
        Ok(tape.channel_mix(z, w, b)?)
    }
}
