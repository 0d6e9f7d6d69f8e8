//! `HYSD` binary dataset container.

use std::fs;
use std::path::Path;

use super::bytes::{Reader, Writer};
use crate::datagen::{HysteresisDataset, MinMaxScaler, Split};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"HYSD";
pub const VERSION: u16 = 1;
pub const FLAG_SPLIT: u16 = 1;
pub const FLAG_SCALER: u16 = 2;
const HEADER_LEN: usize = 4 + 2 + 2 + 8 + 8;

/// Total file size implied by the header fields.
pub fn expected_len(n: usize, t: usize, flags: u16) -> usize {
    let mut len = HEADER_LEN + 8 * t + 16 * n * t;
    if flags & FLAG_SPLIT != 0 {
        len += 8 + 8 * n;
    }
    if flags & FLAG_SCALER != 0 {
        len += 32;
    }
    len
}

pub fn to_bytes(ds: &HysteresisDataset) -> Vec<u8> {
    let (n, t) = (ds.n_samples(), ds.t_len());
    let split = ds.split().ok();
    let scaler = ds.scaler().ok();
    let flags = if split.is_some() { FLAG_SPLIT } else { 0 } | if scaler.is_some() { FLAG_SCALER } else { 0 };
    let mut w = Writer::default();
    w.0.reserve(expected_len(n, t, flags));
    w.bytes(MAGIC);
    w.u16(VERSION);
    w.u16(flags);
    w.u64(n as u64);
    w.u64(t as u64);
    w.f64s(&ds.t);
    w.f64s(&ds.h);
    w.f64s(&ds.b);
    if let Some(s) = split {
        w.u64(s.train.len() as u64);
        for &i in s.train.iter().chain(&s.test) {
            w.u64(i as u64);
        }
    }
    if let Some(s) = scaler {
        w.f64s(&[s.h_min, s.h_max, s.b_min, s.b_max]);
    }
    w.0
}

pub fn from_bytes(buf: &[u8]) -> Result<HysteresisDataset> {
    let mut r = Reader::new(buf, "HYSD");
    if r.take(4).ok() != Some(MAGIC.as_slice()) {
        return Err(Error::Format("not a HYSD file (bad magic)".into()));
    }
    let version = r.u16()?;
    if version != VERSION {
        return Err(Error::Format(format!(
            "HYSD version {version} is not supported (expected {VERSION})"
        )));
    }
    let flags = r.u16()?;
    if flags & !(FLAG_SPLIT | FLAG_SCALER) != 0 {
        return Err(Error::Format(format!("HYSD: unknown flags {flags:#06x}")));
    }
    let n = r.usize()?;
    let t = r.usize()?;
    let expect = n
        .checked_mul(t)
        .and_then(|nt| nt.checked_mul(16))
        .map(|_| expected_len(n, t, flags));
    if expect != Some(buf.len()) {
        return Err(Error::Format(format!(
            "HYSD: header (N = {n}, T = {t}, flags = {flags}) implies {} bytes, file has {}",
            expect.map_or("too many".to_string(), |e| e.to_string()),
            buf.len()
        )));
    }
    let tv = r.f64s(t)?;
    let h = r.f64s(n * t)?;
    let b = r.f64s(n * t)?;
    let mut ds = HysteresisDataset::new(tv, h, b)?;
    if flags & FLAG_SPLIT != 0 {
        let n_train = r.usize()?;
        if n_train > n {
            return Err(Error::Format(format!("HYSD: {n_train} training samples out of {n}")));
        }
        let idx = (0..n).map(|_| r.usize()).collect::<Result<Vec<_>>>()?;
        let split = Split {
            train: idx[..n_train].to_vec(),
            test: idx[n_train..].to_vec(),
        };
        split.validate(n)?;
        ds.split = Some(split);
    }
    if flags & FLAG_SCALER != 0 {
        let s = r.f64s(4)?;
        ds.scaler = Some(MinMaxScaler::new(s[0], s[1], s[2], s[3])?);
    }
    r.finish()?;
    Ok(ds)
}

pub fn write_hysd(path: &Path, ds: &HysteresisDataset) -> Result<()> {
    fs::write(path, to_bytes(ds))?;
    Ok(())
}

pub fn read_hysd(path: &Path) -> Result<HysteresisDataset> {
    from_bytes(&fs::read(path)?)
}
