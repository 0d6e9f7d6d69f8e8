//! CSV interchange for datasets and evaluation reports.
//!
//! Floats are written in Rust's shortest round-trip form, so a write/read
//! cycle restores every value exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::datagen::{HysteresisDataset, MinMaxScaler, Split};
use crate::error::{Error, Result};
use crate::train::EvalReport;

pub const DATASET_HEADER: &str = "sample_id,t,h,b,role";
pub const SAMPLES_HEADER: &str = "sample,t,h,target,prediction,abs_error";
pub const METRICS_FILE: &str = "metrics.csv";
pub const SAMPLES_FILE: &str = "samples.csv";
pub const TIMING_FILE: &str = "timing.csv";

/// Long format, one row per (sample, time); the trailing `role` column is
/// `train`, `test` or `-` when the dataset has no split.
pub fn dataset_to_csv(ds: &HysteresisDataset) -> String {
    let t_len = ds.t_len();
    let mut role = vec!["-"; ds.n_samples()];
    if let Ok(s) = ds.split() {
        for &i in &s.train {
            role[i] = "train";
        }
        for &i in &s.test {
            role[i] = "test";
        }
    }
    let mut out = String::with_capacity(ds.h.len() * 48);
    out.push_str(DATASET_HEADER);
    out.push('\n');
    for (i, r) in role.iter().enumerate() {
        for j in 0..t_len {
            let k = i * t_len + j;
            let _ = writeln!(out, "{i},{},{},{},{r}", ds.t[j], ds.h[k], ds.b[k]);
        }
    }
    out
}

fn field<T: std::str::FromStr>(line: usize, s: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| Error::Format(format!("csv line {line}: cannot parse {s:?}")))
}

fn rows<'a>(text: &'a str, header: &str) -> Result<impl Iterator<Item = (usize, Vec<&'a str>)>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == header => {}
        Some((_, h)) => return Err(Error::Format(format!("csv header {h:?}, expected {header:?}"))),
        None => return Err(Error::Format("empty csv".into())),
    }
    Ok(lines
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| (n + 1, l.split(',').collect())))
}

/// Inverse of [`dataset_to_csv`]. Samples must appear in order with a
/// shared time grid; a complete split is restored and its scaler refit.
pub fn dataset_from_csv(text: &str) -> Result<HysteresisDataset> {
    let mut t: Vec<f64> = Vec::new();
    let (mut h, mut b, mut roles) = (Vec::new(), Vec::new(), Vec::<String>::new());
    let mut row_in_sample = 0;
    for (line, f) in rows(text, DATASET_HEADER)? {
        if f.len() != 5 {
            return Err(Error::Format(format!("csv line {line}: expected 5 fields")));
        }
        let sample: usize = field(line, f[0])?;
        let tv: f64 = field(line, f[1])?;
        if sample == roles.len() {
            roles.push(f[4].to_string());
            row_in_sample = 0;
        } else if sample + 1 != roles.len() {
            return Err(Error::Format(format!("csv line {line}: sample {sample} out of order")));
        }
        if sample == 0 {
            t.push(tv);
        } else if t.get(row_in_sample).map(|x| x.to_bits()) != Some(tv.to_bits()) {
            return Err(Error::Format(format!("csv line {line}: time grid differs from sample 0")));
        }
        row_in_sample += 1;
        h.push(field(line, f[2])?);
        b.push(field(line, f[3])?);
    }
    let mut ds = HysteresisDataset::new(t, h, b)?;
    if roles.iter().all(|r| r == "train" || r == "test") {
        let pick = |name: &str| (0..roles.len()).filter(|&i| roles[i] == name).collect::<Vec<_>>();
        let split = Split {
            train: pick("train"),
            test: pick("test"),
        };
        let (th, tb) = ds.gather(&split.train);
        ds.scaler = Some(MinMaxScaler::fit(th.iter(), tb.iter())?);
        ds.split = Some(split);
    } else if roles.iter().any(|r| r != "-") {
        return Err(Error::Format("csv: split roles must be all train/test or all -".into()));
    }
    Ok(ds)
}

/// `metric,value` rows. Metrics are in physical units; the training loss
/// is the scaled-field MSE.
pub fn metrics_csv(r: &EvalReport) -> String {
    let m = &r.metrics;
    format!(
        "metric,value\narch,{}\nunits,physical\nn_test,{}\nt_len,{}\nr,{}\nmae,{}\nrmse,{}\ntrain_loss_scaled,{}\n",
        r.arch,
        r.samples.len(),
        r.t_len(),
        m.r,
        m.mae,
        m.rmse,
        r.train_loss
    )
}

pub fn samples_csv(r: &EvalReport) -> String {
    let t_len = r.t_len();
    let mut out = String::new();
    out.push_str(SAMPLES_HEADER);
    out.push('\n');
    for (k, &s) in r.samples.iter().enumerate() {
        for j in 0..t_len {
            let i = k * t_len + j;
            let (p, y) = (r.prediction[i], r.target[i]);
            let _ = writeln!(out, "{s},{},{},{y},{p},{}", r.t[j], r.h[i], (p - y).abs());
        }
    }
    out
}

/// Write `metrics.csv`, `samples.csv` and `timing.csv` into `dir`.
pub fn write_report(dir: &Path, r: &EvalReport) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(METRICS_FILE), metrics_csv(r))?;
    fs::write(dir.join(SAMPLES_FILE), samples_csv(r))?;
    fs::write(dir.join(TIMING_FILE), format!("metric,value\nseconds,{}\n", r.seconds))?;
    Ok(())
}

/// One sample's curves as read back from `samples.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleCurve {
    pub sample: usize,
    pub t: Vec<f64>,
    pub h: Vec<f64>,
    pub target: Vec<f64>,
    pub prediction: Option<Vec<f64>>,
}

pub fn parse_samples_csv(text: &str) -> Result<Vec<SampleCurve>> {
    let mut out: Vec<SampleCurve> = Vec::new();
    for (line, f) in rows(text, SAMPLES_HEADER)? {
        if f.len() != 6 {
            return Err(Error::Format(format!("csv line {line}: expected 6 fields")));
        }
        let sample: usize = field(line, f[0])?;
        if out.last().map(|c| c.sample) != Some(sample) {
            out.push(SampleCurve {
                sample,
                t: Vec::new(),
                h: Vec::new(),
                target: Vec::new(),
                prediction: Some(Vec::new()),
            });
        }
        let c = out.last_mut().unwrap();
        c.t.push(field(line, f[1])?);
        c.h.push(field(line, f[2])?);
        c.target.push(field(line, f[3])?);
        c.prediction.as_mut().unwrap().push(field(line, f[4])?);
    }
    Ok(out)
}

pub fn rate_sweep_csv(rows: &[(f64, EvalReport)]) -> String {
    let mut out = String::from("rate,r,mae,rmse\n");
    for (rate, r) in rows {
        let _ = writeln!(out, "{rate},{},{},{}", r.metrics.r, r.metrics.mae, r.metrics.rmse);
    }
    out
}
