use super::{PreisachError, Result};

/// Elementary rectangular hysteron: switches up when the field reaches
/// `alpha`, down when it falls to `beta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Relay {
    pub alpha: f64,
    pub beta: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DensityKind {
    /// Constant density `weight` over the whole triangle.
    Uniform { weight: f64 },
    /// Product of two normal densities restricted to the triangle, plus a
    /// reversible line density along `alpha == beta` carrying the fraction
    /// `ridge` of the total weight.
    Gaussian {
        mean_alpha: f64,
        mean_beta: f64,
        std_alpha: f64,
        std_beta: f64,
        ridge: f64,
    },
    Relays(Vec<Relay>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreisachDensity {
    pub kind: DensityKind,
    pub h_sat: f64,
    /// Quadrature resolution for kinds without a closed form.
    pub n_grid: usize,
}

pub const DEFAULT_H_SAT: f64 = 1000.0;
pub const DEFAULT_N_GRID: usize = 512;

impl Default for PreisachDensity {
    fn default() -> Self {
        Self::gaussian(DEFAULT_H_SAT)
    }
}

impl PreisachDensity {
    pub fn uniform(weight: f64, h_sat: f64) -> Self {
        Self {
            kind: DensityKind::Uniform { weight },
            h_sat,
            n_grid: DEFAULT_N_GRID,
        }
    }

    /// Default smooth density: centers at `(+0.2, -0.2) h_sat`, spread
    /// `0.15 h_sat`, 10% reversible ridge.
    pub fn gaussian(h_sat: f64) -> Self {
        Self {
            kind: DensityKind::Gaussian {
                mean_alpha: 0.2 * h_sat,
                mean_beta: -0.2 * h_sat,
                std_alpha: 0.15 * h_sat,
                std_beta: 0.15 * h_sat,
                ridge: 0.1,
            },
            h_sat,
            n_grid: DEFAULT_N_GRID,
        }
    }

    pub fn relays(relays: Vec<Relay>, h_sat: f64) -> Self {
        Self {
            kind: DensityKind::Relays(relays),
            h_sat,
            n_grid: DEFAULT_N_GRID,
        }
    }

    /// Regular `n x n` grid of unit-weight relays on the half-plane
    /// `alpha > beta`, cell-centred in `[-h_sat, h_sat]^2`.
    pub fn relay_grid(n: usize, h_sat: f64) -> Self {
        let step = 2.0 * h_sat / n as f64;
        let mut relays = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let alpha = -h_sat + (i as f64 + 0.5) * step;
                let beta = -h_sat + (j as f64 + 0.5) * step;
                if alpha > beta {
                    relays.push(Relay {
                        alpha,
                        beta,
                        weight: 1.0,
                    });
                }
            }
        }
        Self::relays(relays, h_sat)
    }

    pub fn with_n_grid(mut self, n_grid: usize) -> Self {
        self.n_grid = n_grid;
        self
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            DensityKind::Uniform { .. } => "uniform",
            DensityKind::Gaussian { .. } => "gaussian",
            DensityKind::Relays(_) => "relays",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(PreisachError::InvalidDensity(msg));
        if !(self.h_sat.is_finite() && self.h_sat > 0.0) {
            return bad(format!("h_sat must be positive, got {}", self.h_sat));
        }
        match &self.kind {
            DensityKind::Uniform { weight } => {
                if !(weight.is_finite() && *weight > 0.0) {
                    return bad(format!("uniform weight must be positive, got {weight}"));
                }
            }
            DensityKind::Gaussian {
                mean_alpha,
                mean_beta,
                std_alpha,
                std_beta,
                ridge,
            } => {
                if !(mean_alpha.is_finite() && mean_beta.is_finite()) {
                    return bad("gaussian means must be finite".into());
                }
                if !(*std_alpha > 0.0 && *std_beta > 0.0) {
                    return bad(format!("gaussian spreads must be positive, got {std_alpha}, {std_beta}"));
                }
                if !(0.0..1.0).contains(ridge) {
                    return bad(format!("ridge fraction must lie in [0, 1), got {ridge}"));
                }
                if self.n_grid < 2 {
                    return bad(format!("n_grid must be at least 2, got {}", self.n_grid));
                }
            }
            DensityKind::Relays(relays) => {
                let mut total = 0.0;
                for (i, r) in relays.iter().enumerate() {
                    if !(r.alpha >= r.beta) {
                        return bad(format!("relay {i}: alpha {} below beta {}", r.alpha, r.beta));
                    }
                    if r.alpha.abs() > self.h_sat || r.beta.abs() > self.h_sat {
                        return bad(format!("relay {i} lies outside +/-{}", self.h_sat));
                    }
                    if !(r.weight.is_finite() && r.weight >= 0.0) {
                        return bad(format!("relay {i}: weight {} must be nonnegative", r.weight));
                    }
                    total += r.weight;
                }
                if !(total > 0.0) {
                    return bad("relay list carries no weight".into());
                }
            }
        }
        Ok(())
    }
}
