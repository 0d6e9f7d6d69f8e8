use std::f64::consts::{FRAC_1_SQRT_2, PI};

use super::density::{DensityKind, PreisachDensity, Relay};
use super::{PreisachError, Result};

const GL_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683_1,
    0.0,
    0.538_469_310_105_683_1,
    0.906_179_845_938_664,
];
const GL_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189_1,
    0.478_628_670_499_366_5,
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
];

#[derive(Debug, Clone, Copy)]
struct Normal {
    mean: f64,
    std: f64,
}

impl Normal {
    fn pdf(self, x: f64) -> f64 {
        let z = (x - self.mean) / self.std;
        (-0.5 * z * z).exp() / (self.std * (2.0 * PI).sqrt())
    }

    fn cdf(self, x: f64) -> f64 {
        0.5 * libm::erfc(-(x - self.mean) / self.std * FRAC_1_SQRT_2)
    }
}

/// Gaussian part of the Everett function, reduced to one dimension:
///
/// `E(a, b) = I(a) - I(b) - G(b) (F(a) - F(b))`, `I(x) = int_{-h}^{x} f G`,
/// with `f, F` the alpha-axis density and CDF and `G` the beta-axis CDF.
/// `I` is tabulated at `n_grid + 1` nodes; each lookup adds a Gauss-Legendre
/// remainder over the partial cell.
#[derive(Debug, Clone)]
struct GaussianTable {
    fa: Normal,
    gb: Normal,
    lo: f64,
    step: f64,
    cumulative: Vec<f64>,
    /// `(1 - ridge) / Z`, where `Z` is the untruncated triangle integral.
    scale: f64,
    ridge: f64,
    h_sat: f64,
}

impl GaussianTable {
    fn integrand(&self, x: f64) -> f64 {
        self.fa.pdf(x) * self.gb.cdf(x)
    }

    fn gauss_legendre(&self, a: f64, b: f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let s: f64 = GL_NODES
            .iter()
            .zip(GL_WEIGHTS)
            .map(|(x, w)| w * self.integrand(mid + half * x))
            .sum();
        half * s
    }

    fn cumulative_at(&self, x: f64) -> f64 {
        let n = self.cumulative.len() - 1;
        let k = (((x - self.lo) / self.step).floor().max(0.0) as usize).min(n - 1);
        let node = self.lo + k as f64 * self.step;
        self.cumulative[k] + self.gauss_legendre(node, x)
    }

    fn raw(&self, alpha: f64, beta: f64) -> f64 {
        let dens = self.cumulative_at(alpha) - self.cumulative_at(beta)
            - self.gb.cdf(beta) * (self.fa.cdf(alpha) - self.fa.cdf(beta));
        dens.max(0.0)
    }
}

/// Everett function `E(alpha, beta)`: the density mass of the triangle
/// `{(a, b) : beta <= b <= a <= alpha}`.
#[derive(Debug, Clone)]
pub struct EverettMap {
    inner: Inner,
    h_sat: f64,
    total: f64,
}

#[derive(Debug, Clone)]
enum Inner {
    Uniform(f64),
    Gaussian(Box<GaussianTable>),
    Relays(Vec<Relay>),
}

impl EverettMap {
    pub fn new(density: &PreisachDensity) -> Result<Self> {
        density.validate()?;
        let h = density.h_sat;
        let inner = match &density.kind {
            DensityKind::Uniform { weight } => Inner::Uniform(*weight),
            DensityKind::Relays(relays) => Inner::Relays(relays.clone()),
            DensityKind::Gaussian {
                mean_alpha,
                mean_beta,
                std_alpha,
                std_beta,
                ridge,
            } => {
                let n = density.n_grid;
                let mut table = GaussianTable {
                    fa: Normal {
                        mean: *mean_alpha,
                        std: *std_alpha,
                    },
                    gb: Normal {
                        mean: *mean_beta,
                        std: *std_beta,
                    },
                    lo: -h,
                    step: 2.0 * h / n as f64,
                    cumulative: vec![0.0; n + 1],
                    scale: 1.0,
                    ridge: *ridge,
                    h_sat: h,
                };
                for k in 0..n {
                    let a = -h + k as f64 * table.step;
                    let cell = table.gauss_legendre(a, a + table.step);
                    table.cumulative[k + 1] = table.cumulative[k] + cell;
                }
                let z = table.raw(h, -h);
                if !(z > 0.0) {
                    return Err(PreisachError::InvalidDensity(
                        "gaussian density has no mass inside the saturation square".into(),
                    ));
                }
                table.scale = (1.0 - ridge) / z;
                Inner::Gaussian(Box::new(table))
            }
        };
        let mut map = Self {
            inner,
            h_sat: h,
            total: 0.0,
        };
        map.total = map.eval_unchecked(h, -h);
        Ok(map)
    }

    pub fn h_sat(&self) -> f64 {
        self.h_sat
    }

    /// Mass of the full triangle, `E(h_sat, -h_sat)`.
    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn eval(&self, alpha: f64, beta: f64) -> Result<f64> {
        let h = self.h_sat;
        if !(alpha >= beta && alpha <= h && beta >= -h) {
            return Err(PreisachError::Domain {
                alpha,
                beta,
                h_sat: h,
            });
        }
        Ok(self.eval_unchecked(alpha, beta))
    }

    pub(crate) fn eval_unchecked(&self, alpha: f64, beta: f64) -> f64 {
        if alpha <= beta {
            return 0.0;
        }
        match &self.inner {
            Inner::Uniform(w) => 0.5 * w * (alpha - beta) * (alpha - beta),
            Inner::Relays(relays) => relays
                .iter()
                .filter(|r| r.beta >= beta && r.alpha <= alpha)
                .map(|r| r.weight)
                .sum(),
            Inner::Gaussian(t) => {
                t.scale * t.raw(alpha, beta) + t.ridge * (alpha - beta) / (2.0 * t.h_sat)
            }
        }
    }
}
