//! Finite-difference spot checks of loss-to-parameter gradients through a
//! whole architecture.

use magop_tensor::{rng_for, Activation, Tape, Tensor};
use rand::Rng;

use crate::error::Result;
use crate::model::{Arch, ModelConfig, Pass};
use crate::operators::Params;

/// Central-difference step.
pub const FD_STEP: f64 = 1e-6;
/// Denominator floor for the relative error, so near-zero gradients are
/// compared on an absolute scale.
pub const REL_FLOOR: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct SpotCheck {
    pub name: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

impl SpotCheck {
    pub fn rel_error(&self) -> f64 {
        (self.analytic - self.numeric).abs() / self.analytic.abs().max(self.numeric.abs()).max(REL_FLOOR)
    }
}

fn loss(model: &ModelConfig, p: &Params, h: &Tensor, b: &Tensor, t: &[f64]) -> Result<f64> {
    let mut tape = Tape::new();
    let bound = p.bind_constant(&mut tape);
    let y = model.forward(&mut tape, &bound, h, t, Pass::Train { target: b })?;
    let l = tape.mse(y, b)?;
    Ok(tape.value(l).data()[0])
}

/// Compare the tape gradient of the MSE loss against central differences
/// at `count` parameter entries drawn uniformly over all scalars.
pub fn spot_check(
    model: &ModelConfig,
    params: &Params,
    h: &Tensor,
    b: &Tensor,
    t: &[f64],
    count: usize,
    seed: u64,
) -> Result<Vec<SpotCheck>> {
    let mut tape = Tape::new();
    let bound = params.bind(&mut tape);
    let y = model.forward(&mut tape, &bound, h, t, Pass::Train { target: b })?;
    let l = tape.mse(y, b)?;
    let mut grads = tape.backward(l)?;
    let analytic: Vec<Option<Tensor>> = bound.vars().iter().map(|&v| grads.take(v)).collect();

    let total = params.count();
    let mut rng = rng_for(seed, 0);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let mut flat = rng.random_range(0..total);
        let mut k = 0;
        while flat >= params.tensors()[k].len() {
            flat -= params.tensors()[k].len();
            k += 1;
        }
        let name = params.names()[k].clone();
        let mut p = params.clone();
        let x0 = params.tensors()[k].data()[flat];
        p.tensors_mut()[k].data_mut()[flat] = x0 + FD_STEP;
        let up = loss(model, &p, h, b, t)?;
        p.tensors_mut()[k].data_mut()[flat] = x0 - FD_STEP;
        let down = loss(model, &p, h, b, t)?;
        out.push(SpotCheck {
            name,
            index: flat,
            analytic: analytic[k].as_ref().map_or(0.0, |g| g.data()[flat]),
            numeric: (up - down) / (2.0 * FD_STEP),
        });
    }
    Ok(out)
}

/// Reduced configuration of `arch` on a length-32 grid with 3 curves,
/// small enough for finite differences.
pub fn probe_config(arch: Arch) -> ModelConfig {
    let mut model = ModelConfig::default_for(arch, PROBE_T, PROBE_BATCH);
    match &mut model {
        ModelConfig::DeepOnet(c) => {
            c.branch_layers = 3;
            c.trunk_layers = 3;
            c.branch_width = 20;
            c.trunk_width = 20;
            c.p = 5;
        }
        ModelConfig::Wno(c) => {
            c.width = 6;
            c.blocks = 2;
            c.levels = 1;
            c.head_width = 8;
        }
        ModelConfig::Recurrent(c) => c.hidden = 6,
        ModelConfig::EdLstm(c) => c.hidden = 6,
        // Smooth activation, so no step lands on a kink.
        ModelConfig::Fno(c) => c.activation = Activation::Gelu,
    }
    model
}

const PROBE_T: usize = 32;
const PROBE_BATCH: usize = 3;

/// Spot checks of `count` parameters for every architecture's probe
/// configuration.
pub fn architecture_suite(count: usize, seed: u64) -> Result<Vec<(Arch, SpotCheck)>> {
    let t: Vec<f64> = (0..PROBE_T).map(|i| i as f64 / (PROBE_T - 1) as f64).collect();
    let h = Tensor::from_fn([PROBE_BATCH, PROBE_T], |i| ((i as f64) * 0.29).sin() * 0.9);
    let b = Tensor::from_fn([PROBE_BATCH, PROBE_T], |i| ((i as f64) * 0.29 + 0.4).sin() * 0.7);
    let mut out = Vec::new();
    for arch in Arch::ALL {
        let model = probe_config(arch);
        let p = Params::init(&model.param_specs()?, seed)?;
        for c in spot_check(&model, &p, &h, &b, &t, count, seed)? {
            out.push((arch, c));
        }
    }
    Ok(out)
}
