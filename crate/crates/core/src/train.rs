//! Training loop, evaluation metrics and the sampling-rate sweep.

use std::time::Instant;

use magop_tensor::{rng_for, AdamConfig, AdamState, Tape, Tensor, TensorError};
use rand::seq::SliceRandom;

use crate::datagen::{HysteresisDataset, MinMaxScaler};
use crate::error::{Error, Result};
use crate::model::{Arch, ModelConfig, Pass};
use crate::operators::Params;

const SHUFFLE_STREAM: u64 = 7 << 32;
/// Batch size used for inference.
pub const EVAL_BATCH: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    /// Mini-batch size; `None` trains full-batch.
    pub batch: Option<usize>,
    pub seed: u64,
    /// Report progress every this many epochs (0 disables).
    pub log_every: usize,
}

impl TrainConfig {
    /// Published learning rates and batch sizes, 10000 epochs.
    pub fn defaults_for(arch: Arch) -> Self {
        let (lr, batch) = match arch {
            Arch::DeepOnet => (5e-5, None),
            Arch::Fno | Arch::Rifno => (1e-4, Some(100)),
            Arch::Wno => (1e-3, Some(100)),
            Arch::Rnn | Arch::Lstm | Arch::Gru | Arch::EdLstm => (1e-4, None),
        };
        Self {
            epochs: 10_000,
            lr,
            batch,
            seed: 0,
            log_every: 100,
        }
    }
}

/// Trained model with everything needed to evaluate it.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelCheckpoint {
    pub config: ModelConfig,
    pub scaler: MinMaxScaler,
    pub params: Params,
    pub seed: u64,
    pub epochs: usize,
    /// Inference-mode MSE on the scaled training partition.
    pub final_loss: f64,
}

impl ModelCheckpoint {
    pub fn arch(&self) -> Arch {
        self.config.arch()
    }
}

fn scaled_rows(ds: &HysteresisDataset, scaler: &MinMaxScaler, idx: &[usize]) -> (Vec<f64>, Vec<f64>) {
    let (h, b) = ds.gather(idx);
    (
        h.into_iter().map(|x| scaler.scale_h(x)).collect(),
        b.into_iter().map(|x| scaler.scale_b(x)).collect(),
    )
}

fn rows_of(flat: &[f64], t_len: usize, rows: &[usize]) -> Vec<f64> {
    rows.iter()
        .flat_map(|&r| flat[r * t_len..(r + 1) * t_len].iter().copied())
        .collect()
}

fn check_features(config: &ModelConfig, n_train: usize) -> Result<()> {
    match config.features() {
        Some(f) if f != n_train => Err(Error::Shape(format!(
            "{} expects {f} feature slots but the training partition has {n_train} curves",
            config.arch()
        ))),
        _ => Ok(()),
    }
}

fn divergence(epoch: usize, e: Error) -> Error {
    match e {
        Error::Tensor(TensorError::NonFinite(_)) => Error::Diverged { epoch, loss: f64::NAN },
        other => other,
    }
}

/// Minimize the mean squared error on scaled fields with Adam.
///
/// Operators see shuffled mini-batches; recurrent models see the whole
/// training partition in a fixed order, since each curve owns a feature slot.
pub fn train(
    config: &TrainConfig,
    model: &ModelConfig,
    ds: &HysteresisDataset,
    mut progress: impl FnMut(usize, f64),
) -> Result<ModelCheckpoint> {
    let scaler = *ds.scaler()?;
    let split = ds.split()?;
    let n_train = split.train.len();
    if n_train == 0 {
        return Err(Error::Param("empty training partition".into()));
    }
    if ds.t_len() != model.t_len() {
        return Err(Error::Shape(format!(
            "model configured for T = {}, dataset has T = {}",
            model.t_len(),
            ds.t_len()
        )));
    }
    check_features(model, n_train)?;
    if !(config.lr > 0.0) {
        return Err(Error::Param(format!("learning rate must be positive, got {}", config.lr)));
    }
    let t_len = ds.t_len();
    let (h, b) = scaled_rows(ds, &scaler, &split.train);
    let batch = match (model.arch().is_recurrent(), config.batch) {
        (true, _) | (false, None) => n_train,
        (false, Some(0)) => return Err(Error::Param("batch size must be positive".into())),
        (false, Some(k)) => k.min(n_train),
    };

    let specs = model.param_specs()?;
    let mut params = Params::init(&specs, config.seed)?;
    let mut adam = AdamState::new(AdamConfig::with_lr(config.lr), params.tensors());
    let mut rng = rng_for(config.seed, SHUFFLE_STREAM);
    let mut order: Vec<usize> = (0..n_train).collect();

    for epoch in 1..=config.epochs {
        if !model.arch().is_recurrent() {
            order.shuffle(&mut rng);
        }
        let mut total = 0.0;
        for chunk in order.chunks(batch) {
            let hb = Tensor::new([chunk.len(), t_len], rows_of(&h, t_len, chunk))?;
            let bb = Tensor::new([chunk.len(), t_len], rows_of(&b, t_len, chunk))?;
            let loss = step(model, &mut params, &mut adam, &hb, &bb, &ds.t).map_err(|e| divergence(epoch, e))?;
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch, loss });
            }
            total += loss * chunk.len() as f64;
        }
        let epoch_loss = total / n_train as f64;
        if config.log_every > 0 && (epoch % config.log_every == 0 || epoch == config.epochs) {
            progress(epoch, epoch_loss);
        }
    }

    let mut ckpt = ModelCheckpoint {
        config: model.clone(),
        scaler,
        params,
        seed: config.seed,
        epochs: config.epochs,
        final_loss: 0.0,
    };
    ckpt.final_loss = train_loss(&ckpt, ds)?;
    Ok(ckpt)
}

fn step(
    model: &ModelConfig,
    params: &mut Params,
    adam: &mut AdamState,
    h: &Tensor,
    b: &Tensor,
    t: &[f64],
) -> Result<f64> {
    let mut tape = Tape::new();
    let bound = params.bind(&mut tape);
    let pred = model.forward(&mut tape, &bound, h, t, Pass::Train { target: b })?;
    let loss = tape.mse(pred, b)?;
    let value = tape.value(loss).data()[0];
    let mut grads = tape.backward(loss)?;
    let g: Vec<Tensor> = bound
        .vars()
        .iter()
        .zip(params.tensors())
        .map(|(&v, p)| grads.take(v).unwrap_or_else(|| Tensor::zeros(p.shape().to_vec())))
        .collect();
    adam.step(params.tensors_mut(), &g)?;
    Ok(value)
}

/// Inference on already-scaled inputs `h: [n, T]`, returning scaled `B`.
pub fn predict_scaled(ckpt: &ModelCheckpoint, h: &[f64], t: &[f64]) -> Result<Vec<f64>> {
    let t_len = ckpt.config.t_len();
    let n = h.len() / t_len;
    let mut out = Vec::with_capacity(h.len());
    let run = |rows: usize, data: Vec<f64>| -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let bound = ckpt.params.bind_constant(&mut tape);
        let x = Tensor::new([rows, t_len], data)?;
        let y = ckpt.config.forward(&mut tape, &bound, &x, t, Pass::Eval)?;
        Ok(tape.value(y).data().to_vec())
    };
    match ckpt.config.features() {
        None => {
            for start in (0..n).step_by(EVAL_BATCH) {
                let rows = EVAL_BATCH.min(n - start);
                out.extend(run(rows, h[start * t_len..(start + rows) * t_len].to_vec())?);
            }
        }
        Some(f) => {
            // Fixed-width models: feed curves f at a time, padding the last
            // chunk with zero (mid-range) inputs that are discarded.
            for start in (0..n).step_by(f) {
                let rows = f.min(n - start);
                let mut data = h[start * t_len..(start + rows) * t_len].to_vec();
                data.resize(f * t_len, 0.0);
                let y = run(f, data)?;
                out.extend_from_slice(&y[..rows * t_len]);
            }
        }
    }
    Ok(out)
}

/// Physical-unit predictions for physical-unit inputs.
pub fn predict(ckpt: &ModelCheckpoint, h: &[f64], t: &[f64]) -> Result<Vec<f64>> {
    let sc = &ckpt.scaler;
    let hs: Vec<f64> = h.iter().map(|&x| sc.scale_h(x)).collect();
    Ok(predict_scaled(ckpt, &hs, t)?
        .into_iter()
        .map(|y| sc.unscale_b(y))
        .collect())
}

/// Inference-mode MSE on the scaled training partition.
pub fn train_loss(ckpt: &ModelCheckpoint, ds: &HysteresisDataset) -> Result<f64> {
    let (h, b) = scaled_rows(ds, &ckpt.scaler, &ds.split()?.train);
    let pred = predict_scaled(ckpt, &h, &ds.t)?;
    mse(&pred, &b)
}

pub fn mse(pred: &[f64], target: &[f64]) -> Result<f64> {
    if pred.len() != target.len() || pred.is_empty() {
        return Err(Error::Shape(format!(
            "mse of {} predictions against {} targets",
            pred.len(),
            target.len()
        )));
    }
    Ok(pred.iter().zip(target).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / pred.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    /// Relative L2 error `||pred - target|| / ||target||`.
    pub r: f64,
    pub mae: f64,
    pub rmse: f64,
}

/// Relative L2 error, mean absolute error and root mean squared error over
/// the flattened arrays.
pub fn metrics(pred: &[f64], target: &[f64]) -> Result<Metrics> {
    let sq = mse(pred, target)?;
    let n = pred.len() as f64;
    let diff: f64 = pred.iter().zip(target).map(|(p, t)| (p - t) * (p - t)).sum();
    let norm: f64 = target.iter().map(|t| t * t).sum();
    if norm == 0.0 {
        return Err(Error::Metric("relative error of an all-zero target".into()));
    }
    let mae = pred.iter().zip(target).map(|(p, t)| (p - t).abs()).sum::<f64>() / n;
    Ok(Metrics {
        r: (diff / norm).sqrt(),
        mae,
        rmse: sq.sqrt(),
    })
}

/// Test-set evaluation in physical units.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub arch: Arch,
    /// Time grid fed to the model.
    pub t: Vec<f64>,
    /// Dataset indices of the evaluated samples.
    pub samples: Vec<usize>,
    pub h: Vec<f64>,
    pub target: Vec<f64>,
    pub prediction: Vec<f64>,
    pub metrics: Metrics,
    /// Inference-mode MSE on the scaled training partition.
    pub train_loss: f64,
    pub seconds: f64,
}

impl EvalReport {
    pub fn t_len(&self) -> usize {
        self.t.len()
    }

    /// `|prediction - target|` per sample and time.
    pub fn abs_error(&self) -> Vec<f64> {
        self.prediction
            .iter()
            .zip(&self.target)
            .map(|(p, t)| (p - t).abs())
            .collect()
    }
}

pub fn evaluate(ckpt: &ModelCheckpoint, ds: &HysteresisDataset) -> Result<EvalReport> {
    evaluate_on_grid(ckpt, ds, &ds.t)
}

fn evaluate_on_grid(ckpt: &ModelCheckpoint, ds: &HysteresisDataset, t: &[f64]) -> Result<EvalReport> {
    let start = Instant::now();
    let samples = ds.split()?.test.clone();
    let (h, target) = ds.gather(&samples);
    let prediction = predict(ckpt, &h, t)?;
    let metrics = metrics(&prediction, &target)?;
    let train_loss = train_loss(ckpt, ds)?;
    Ok(EvalReport {
        arch: ckpt.arch(),
        t: t.to_vec(),
        samples,
        h,
        target,
        prediction,
        metrics,
        train_loss,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Re-evaluate the test set with the time grid stretched by each rate;
/// `H` and `B` are unchanged.
pub fn rate_sweep(ckpt: &ModelCheckpoint, ds: &HysteresisDataset, rates: &[f64]) -> Result<Vec<(f64, EvalReport)>> {
    if ckpt.arch().is_recurrent() {
        return Err(Error::Param(format!(
            "{} takes no time grid; rate sweeps apply to operators",
            ckpt.arch()
        )));
    }
    rates
        .iter()
        .map(|&rate| {
            if !(rate > 0.0 && rate.is_finite()) {
                return Err(Error::Param(format!("rate must be positive, got {rate}")));
            }
            let t: Vec<f64> = ds.t.iter().map(|x| x * rate).collect();
            Ok((rate, evaluate_on_grid(ckpt, ds, &t)?))
        })
        .collect()
}
