//! Central finite differences, independent of the tape's backward pass.

use crate::error::Result;
use crate::init::{rng_for, uniform};
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;
use crate::wavelet::{DwtPlan, Wavelet};

/// Default central-difference step.
pub const FD_STEP: f64 = 1e-6;

/// Numerical gradient of `f` with respect to `inputs[which]`.
pub fn numeric_gradient<F>(mut f: F, inputs: &[Tensor], which: usize, step: f64) -> Result<Tensor>
where
    F: FnMut(&[Tensor]) -> Result<f64>,
{
    let mut work = inputs.to_vec();
    let n = work[which].len();
    let mut grad = Tensor::zeros(work[which].shape().to_vec());
    for i in 0..n {
        let x0 = work[which].data()[i];
        work[which].data_mut()[i] = x0 + step;
        let fp = f(&work)?;
        work[which].data_mut()[i] = x0 - step;
        let fm = f(&work)?;
        work[which].data_mut()[i] = x0;
        grad.data_mut()[i] = (fp - fm) / (2.0 * step);
    }
    Ok(grad)
}

/// Numerical derivative with respect to one entry of `inputs[which]`.
pub fn numeric_partial<F>(
    mut f: F,
    inputs: &[Tensor],
    which: usize,
    index: usize,
    step: f64,
) -> Result<f64>
where
    F: FnMut(&[Tensor]) -> Result<f64>,
{
    let mut work = inputs.to_vec();
    let x0 = work[which].data()[index];
    work[which].data_mut()[index] = x0 + step;
    let fp = f(&work)?;
    work[which].data_mut()[index] = x0 - step;
    let fm = f(&work)?;
    Ok((fp - fm) / (2.0 * step))
}

/// `||a - b|| / max(||a||, ||b||)`; zero when both vanish.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let scale = norm(a).max(norm(b));
    if scale == 0.0 {
        0.0
    } else {
        norm(&diff) / scale
    }
}

/// Outcome of one operator check.
#[derive(Debug, Clone)]
pub struct OpCheck {
    pub name: &'static str,
    /// Worst relative error over all differentiable inputs.
    pub rel_error: f64,
}

type Build = fn(&mut Tape, &[Var]) -> Result<Var>;

/// Compare tape gradients of `sum(w * build(inputs))` against central
/// differences, where `w` is a fixed random weighting of the output.
pub fn check_op(name: &'static str, inputs: &[Tensor], build: Build, seed: u64) -> Result<OpCheck> {
    let weights = {
        let mut tape = Tape::new();
        let vars: Vec<Var> = inputs.iter().map(|x| tape.constant(x.clone())).collect();
        let out = build(&mut tape, &vars)?;
        let shape = tape.shape(out).to_vec();
        let mut rng = rng_for(seed, 0x5eed);
        uniform(&shape, -1.0, 1.0, &mut rng)
    };
    let eval = |xs: &[Tensor]| -> Result<f64> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = xs.iter().map(|x| tape.constant(x.clone())).collect();
        let out = build(&mut tape, &vars)?;
        Ok(weighted_sum(tape.value(out), &weights))
    };

    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|x| tape.leaf(x.clone())).collect();
    let out = build(&mut tape, &vars)?;
    let w = tape.constant(weights.clone());
    let prod = tape.mul(out, w)?;
    let loss = tape.sum(prod)?;
    let grads = tape.backward(loss)?;

    let mut worst: f64 = 0.0;
    for (k, v) in vars.iter().enumerate() {
        let numeric = numeric_gradient(eval, inputs, k, FD_STEP)?;
        let analytic = grads
            .get(*v)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(inputs[k].shape().to_vec()));
        worst = worst.max(relative_error(analytic.data(), numeric.data()));
    }
    Ok(OpCheck {
        name,
        rel_error: worst,
    })
}

fn weighted_sum(x: &Tensor, w: &Tensor) -> f64 {
    x.data().iter().zip(w.data()).map(|(a, b)| a * b).sum()
}

fn rand_t(shape: &[usize], rng: &mut impl rand::Rng) -> Tensor {
    uniform(shape, -1.0, 1.0, rng)
}

/// Finite-difference check of every differentiable tape operation on small
/// random inputs.
pub fn op_suite(seed: u64) -> Result<Vec<OpCheck>> {
    let mut rng = rng_for(seed, 1);
    let mut r = |shape: &[usize]| rand_t(shape, &mut rng);
    let m54 = r(&[5, 4]);
    let m43 = r(&[4, 3]);
    let m54b = r(&[5, 4]);
    let v4 = r(&[4]);
    let v3 = r(&[3]);
    let z = r(&[2, 3, 12]);
    let cw = r(&[4, 3]);
    let cb = r(&[4]);
    let spec = r(&[2, 3, 7, 2]);
    let modes = r(&[7, 4, 3, 2]);
    let sig = r(&[2, 48]);
    let coeffs = r(&[2, 3, 10]);
    let mixer = r(&[4, 3, 3]);
    let pyramid_len = DwtPlan::new(48, 2, Wavelet::Db6)?.total_len();
    let pyr = r(&[2, pyramid_len]);
    let odd = r(&[3, 11]);
    // Keep relu inputs away from the kink.
    let kinkless = m54.map(|x| if x.abs() < 0.05 { x + 0.1 } else { x });

    let mut out = Vec::new();
    let cases: Vec<(&'static str, Vec<Tensor>, Build)> = vec![
        ("matmul", vec![m54.clone(), m43.clone()], |t, v| t.matmul(v[0], v[1])),
        ("affine", vec![m54.clone(), m43.clone(), v3.clone()], |t, v| {
            t.affine(v[0], v[1], v[2])
        }),
        ("add", vec![m54.clone(), v4.clone()], |t, v| t.add(v[0], v[1])),
        ("sub", vec![m54.clone(), m54b.clone()], |t, v| t.sub(v[0], v[1])),
        ("mul", vec![m54.clone(), v4.clone()], |t, v| t.mul(v[0], v[1])),
        ("scale", vec![m54.clone()], |t, v| t.scale(v[0], -2.5)),
        ("one_minus", vec![m54.clone()], |t, v| t.one_minus(v[0])),
        ("tanh", vec![m54.clone()], |t, v| t.tanh(v[0])),
        ("relu", vec![kinkless], |t, v| t.relu(v[0])),
        ("gelu", vec![m54.clone()], |t, v| t.gelu(v[0])),
        ("sigmoid", vec![m54.clone()], |t, v| t.sigmoid(v[0])),
        ("transpose", vec![m54.clone()], |t, v| t.transpose(v[0])),
        ("reshape", vec![m54.clone()], |t, v| t.reshape(v[0], &[2, 10])),
        ("slice_last", vec![m54.clone()], |t, v| t.slice_last(v[0], 1, 2)),
        ("row", vec![m54.clone()], |t, v| t.row(v[0], 3)),
        ("concat_rows", vec![m54.clone(), m54b.clone()], |t, v| {
            t.concat_rows(&[v[0], v[1]])
        }),
        ("channel_mix", vec![z.clone(), cw, cb], |t, v| {
            t.channel_mix(v[0], v[1], v[2])
        }),
        ("rfft", vec![z.clone()], |t, v| t.rfft(v[0])),
        ("rfft_odd", vec![odd], |t, v| t.rfft(v[0])),
        ("irfft", vec![spec.clone()], |t, v| t.irfft(v[0], 12)),
        ("irfft_odd", vec![spec.clone()], |t, v| t.irfft(v[0], 13)),
        ("mode_mix", vec![spec, modes], |t, v| t.mode_mix(v[0], v[1], 5)),
        ("dwt", vec![sig.clone()], |t, v| t.dwt(v[0], 2, Wavelet::Db6)),
        ("dwt_odd_padding", vec![r(&[2, 50])], |t, v| t.dwt(v[0], 2, Wavelet::Db6)),
        ("idwt", vec![pyr], |t, v| {
            let plan = DwtPlan::new(48, 2, Wavelet::Db6)?;
            t.idwt(v[0], &plan)
        }),
        ("band_mix", vec![coeffs, mixer], |t, v| t.band_mix(v[0], v[1], 4)),
        ("sum", vec![m54.clone()], |t, v| t.sum(v[0])),
        ("mean", vec![m54.clone()], |t, v| t.mean(v[0])),
        ("mse", vec![m54.clone()], |t, v| {
            let target = Tensor::from_fn([5, 4], |i| ((i * 7) % 5) as f64 * 0.3 - 0.6);
            t.mse(v[0], &target)
        }),
    ];
    for (k, (name, inputs, build)) in cases.into_iter().enumerate() {
        out.push(check_op(name, &inputs, build, seed.wrapping_add(k as u64))?);
    }
    Ok(out)
}
