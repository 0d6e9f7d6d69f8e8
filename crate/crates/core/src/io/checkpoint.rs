//! `HYCK` binary checkpoint container.

use std::fs;
use std::path::Path;

use magop_tensor::Tensor;

use super::bytes::{Reader, Writer};
use crate::datagen::MinMaxScaler;
use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::operators::{KvList, Params};
use crate::train::ModelCheckpoint;

pub const MAGIC: &[u8; 4] = b"HYCK";
pub const VERSION: u16 = 1;

pub fn to_bytes(ck: &ModelCheckpoint) -> Vec<u8> {
    let mut w = Writer::default();
    w.bytes(MAGIC);
    w.u16(VERSION);
    w.u16(0);
    let config = ck.config.to_kv().to_text();
    w.u64(config.len() as u64);
    w.bytes(config.as_bytes());
    let s = &ck.scaler;
    w.f64s(&[s.h_min, s.h_max, s.b_min, s.b_max]);
    w.u64(ck.seed);
    w.u64(ck.epochs as u64);
    w.f64s(&[ck.final_loss]);
    w.u64(ck.params.names().len() as u64);
    for (name, t) in ck.params.iter() {
        w.u32(name.len() as u32);
        w.bytes(name.as_bytes());
        w.u32(t.shape().len() as u32);
        for &d in t.shape() {
            w.u64(d as u64);
        }
        w.f64s(t.data());
    }
    w.0
}

fn checkpoint_err(e: Error) -> Error {
    match e {
        Error::Param(m) | Error::Format(m) => Error::Checkpoint(m),
        other => other,
    }
}

pub fn from_bytes(buf: &[u8]) -> Result<ModelCheckpoint> {
    let mut r = Reader::new(buf, "HYCK");
    if r.take(4).ok() != Some(MAGIC.as_slice()) {
        return Err(Error::Checkpoint("not a HYCK file (bad magic)".into()));
    }
    let version = r.u16()?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!(
            "HYCK version {version} is not supported (expected {VERSION})"
        )));
    }
    r.u16()?;
    let len = r.usize()?;
    let text = std::str::from_utf8(r.take(len)?)
        .map_err(|_| Error::Checkpoint("config block is not UTF-8".into()))?;
    let config = ModelConfig::from_kv(&KvList::parse(text)?).map_err(checkpoint_err)?;
    let s = r.f64s(4)?;
    let scaler = MinMaxScaler::new(s[0], s[1], s[2], s[3])?;
    let seed = r.u64()?;
    let epochs = r.usize()?;
    let final_loss = r.f64()?;
    let count = r.usize()?;
    let specs = config.param_specs()?;
    if count != specs.len() {
        return Err(Error::Checkpoint(format!(
            "{} expects {} parameter tensors, checkpoint has {count}",
            config.arch(),
            specs.len()
        )));
    }
    let mut parts = Vec::with_capacity(count);
    for _ in 0..count {
        let n = r.u32()? as usize;
        let name = String::from_utf8(r.take(n)?.to_vec())
            .map_err(|_| Error::Checkpoint("parameter name is not UTF-8".into()))?;
        let ndim = r.u32()? as usize;
        let shape = (0..ndim).map(|_| r.usize()).collect::<Result<Vec<_>>>()?;
        let len = shape
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .ok_or_else(|| Error::Checkpoint(format!("{name}: shape {shape:?} overflows")))?;
        let data = r.f64s(len)?;
        parts.push((name, Tensor::new(shape, data)?));
    }
    r.finish()?;
    let params = Params::from_parts(&specs, parts).map_err(checkpoint_err)?;
    Ok(ModelCheckpoint {
        config,
        scaler,
        params,
        seed,
        epochs,
        final_loss,
    })
}

pub fn write_checkpoint(path: &Path, ck: &ModelCheckpoint) -> Result<()> {
    fs::write(path, to_bytes(ck))?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<ModelCheckpoint> {
    from_bytes(&fs::read(path)?)
}
