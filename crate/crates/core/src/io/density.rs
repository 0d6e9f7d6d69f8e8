//! Flat `key = value` description of a Preisach oracle.
//!
//! ```text
//! kind = gaussian        # gaussian | uniform | relays | relay_grid
//! h_sat = 1000
//! b_sat = 1.2
//! n_grid = 512
//! mean_alpha = 200       # gaussian only; defaults scale with h_sat
//! ridge = 0.1
//! ```

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::operators::KvList;
use crate::preisach::{DensityKind, PreisachDensity, PreisachModel, Relay, DEFAULT_B_SAT, DEFAULT_H_SAT, DEFAULT_N_GRID};

#[derive(Debug, Clone, PartialEq)]
pub struct DensityConfig {
    pub density: PreisachDensity,
    pub b_sat: f64,
}

impl Default for DensityConfig {
    fn default() -> Self {
        Self {
            density: PreisachDensity::default(),
            b_sat: DEFAULT_B_SAT,
        }
    }
}

impl DensityConfig {
    pub fn model(&self) -> Result<PreisachModel> {
        Ok(PreisachModel::new(&self.density, self.b_sat)?)
    }

    pub fn to_text(&self) -> String {
        let mut kv = KvList::default();
        let d = &self.density;
        match &d.kind {
            DensityKind::Uniform { weight } => {
                kv.push("kind", "uniform");
                kv.push("weight", weight);
            }
            DensityKind::Gaussian {
                mean_alpha,
                mean_beta,
                std_alpha,
                std_beta,
                ridge,
            } => {
                kv.push("kind", "gaussian");
                kv.push("mean_alpha", mean_alpha);
                kv.push("mean_beta", mean_beta);
                kv.push("std_alpha", std_alpha);
                kv.push("std_beta", std_beta);
                kv.push("ridge", ridge);
            }
            DensityKind::Relays(rs) => {
                kv.push("kind", "relays");
                let list: Vec<String> = rs.iter().map(|r| format!("{} {} {}", r.alpha, r.beta, r.weight)).collect();
                kv.push("relays", list.join("; "));
            }
        }
        kv.push("h_sat", d.h_sat);
        kv.push("n_grid", d.n_grid);
        kv.push("b_sat", self.b_sat);
        kv.to_text()
    }
}

fn optional<T: std::str::FromStr>(kv: &KvList, key: &str, default: T) -> Result<T> {
    match kv.get(key) {
        Some(_) => kv.require(key),
        None => Ok(default),
    }
}

fn parse_relays(text: &str) -> Result<Vec<Relay>> {
    text.split(';')
        .filter(|s| !s.trim().is_empty())
        .map(|item| {
            let v: Vec<f64> = item
                .split_whitespace()
                .map(|x| x.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::Format(format!("relay {item:?}: expected numbers")))?;
            match v[..] {
                [alpha, beta, weight] => Ok(Relay { alpha, beta, weight }),
                _ => Err(Error::Format(format!("relay {item:?}: expected `alpha beta weight`"))),
            }
        })
        .collect()
}

pub fn parse_density(text: &str) -> Result<DensityConfig> {
    let kv = KvList::parse(text)?;
    let kind: String = optional(&kv, "kind", "gaussian".to_string())?;
    let h_sat = optional(&kv, "h_sat", DEFAULT_H_SAT)?;
    let allowed: &[&str] = match kind.as_str() {
        "gaussian" => &["mean_alpha", "mean_beta", "std_alpha", "std_beta", "ridge"],
        "uniform" => &["weight"],
        "relays" => &["relays"],
        "relay_grid" => &["grid_n"],
        other => return Err(Error::Format(format!("unknown density kind {other:?}"))),
    };
    for (k, _) in &kv.0 {
        if !(["kind", "h_sat", "n_grid", "b_sat"].contains(&k.as_str()) || allowed.contains(&k.as_str())) {
            return Err(Error::Format(format!("density config: key {k} does not apply to kind {kind}")));
        }
    }
    let density = match kind.as_str() {
        "gaussian" => {
            let d = PreisachDensity::gaussian(h_sat);
            let DensityKind::Gaussian {
                mean_alpha,
                mean_beta,
                std_alpha,
                std_beta,
                ridge,
            } = d.kind
            else {
                unreachable!()
            };
            PreisachDensity {
                kind: DensityKind::Gaussian {
                    mean_alpha: optional(&kv, "mean_alpha", mean_alpha)?,
                    mean_beta: optional(&kv, "mean_beta", mean_beta)?,
                    std_alpha: optional(&kv, "std_alpha", std_alpha)?,
                    std_beta: optional(&kv, "std_beta", std_beta)?,
                    ridge: optional(&kv, "ridge", ridge)?,
                },
                ..d
            }
        }
        "uniform" => PreisachDensity::uniform(optional(&kv, "weight", 1.0)?, h_sat),
        "relays" => PreisachDensity::relays(parse_relays(&kv.require::<String>("relays")?)?, h_sat),
        _ => PreisachDensity::relay_grid(kv.require("grid_n")?, h_sat),
    }
    .with_n_grid(optional(&kv, "n_grid", DEFAULT_N_GRID)?);
    density.validate()?;
    let b_sat: f64 = optional(&kv, "b_sat", DEFAULT_B_SAT)?;
    if !(b_sat.is_finite() && b_sat > 0.0) {
        return Err(Error::Format(format!("b_sat must be positive, got {b_sat}")));
    }
    Ok(DensityConfig { density, b_sat })
}

pub fn read_density(path: &Path) -> Result<DensityConfig> {
    parse_density(&fs::read_to_string(path)?)
}
