use super::density::PreisachDensity;
use super::everett::EverettMap;
use super::state::PreisachState;
use super::{PreisachError, Result};

pub const DEFAULT_B_SAT: f64 = 1.2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InverseOptions {
    /// Accepted residual in flux density.
    pub tol: f64,
    pub max_iter: usize,
    /// Targets must satisfy `|b| <= b_sat (1 - range_eps)`.
    pub range_eps: f64,
}

impl Default for InverseOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 200,
            range_eps: 1e-6,
        }
    }
}

/// Preisach model mapping field strength `H` to flux density `B`.
#[derive(Debug, Clone)]
pub struct PreisachModel {
    everett: EverettMap,
    b_sat: f64,
    pub options: InverseOptions,
}

impl PreisachModel {
    pub fn new(density: &PreisachDensity, b_sat: f64) -> Result<Self> {
        if !(b_sat.is_finite() && b_sat > 0.0) {
            return Err(PreisachError::InvalidDensity(format!(
                "b_sat must be positive, got {b_sat}"
            )));
        }
        Ok(Self {
            everett: EverettMap::new(density)?,
            b_sat,
            options: InverseOptions::default(),
        })
    }

    pub fn with_options(mut self, options: InverseOptions) -> Self {
        self.options = options;
        self
    }

    pub fn everett(&self) -> &EverettMap {
        &self.everett
    }

    pub fn b_sat(&self) -> f64 {
        self.b_sat
    }

    pub fn h_sat(&self) -> f64 {
        self.everett.h_sat()
    }

    /// Largest flux density magnitude the inverse accepts.
    pub fn reachable_limit(&self) -> f64 {
        self.b_sat * (1.0 - self.options.range_eps)
    }

    pub fn initial_state(&self) -> PreisachState {
        PreisachState::negative_saturation(self.h_sat())
    }

    /// Signed mass switched by the monotone movement `from -> to`.
    fn segment(&self, from: f64, to: f64) -> f64 {
        if to > from {
            self.everett.eval_unchecked(to, from)
        } else {
            -self.everett.eval_unchecked(from, to)
        }
    }

    /// `partial[p]`: positive-set mass of the first `p` extrema.
    fn partial_areas(&self, extrema: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(extrema.len() + 1);
        out.push(0.0);
        out.push(0.0);
        for w in extrema.windows(2) {
            let next = out[out.len() - 1] + self.segment(w[0], w[1]);
            out.push(next);
        }
        out
    }

    fn to_flux(&self, area: f64) -> f64 {
        self.b_sat * (2.0 * area / self.everett.total() - 1.0)
    }

    pub fn magnetization(&self, state: &PreisachState) -> f64 {
        let areas = self.partial_areas(state.extrema());
        self.to_flux(areas[state.extrema().len()])
    }

    pub fn forward_sequence(&self, h: &[f64]) -> Result<Vec<f64>> {
        let mut state = self.initial_state();
        self.forward_from(&mut state, h)
    }

    /// Apply each field in turn, returning `B` after every step.
    pub fn forward_from(&self, state: &mut PreisachState, h: &[f64]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(h.len());
        for (index, &x) in h.iter().enumerate() {
            state.check_field(x, index)?;
            state.apply_field(x)?;
            out.push(self.magnetization(state));
        }
        Ok(out)
    }

    pub fn inverse_sequence(&self, b: &[f64]) -> Result<Vec<f64>> {
        let mut state = self.initial_state();
        self.inverse_from(&mut state, b)
    }

    /// Find the field sequence that drives `state` through `b`, committing
    /// each step.
    pub fn inverse_from(&self, state: &mut PreisachState, b: &[f64]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(b.len());
        for (index, &target) in b.iter().enumerate() {
            let h = self.inverse_step(state, target, index)?;
            state.apply_field(h)?;
            out.push(h);
        }
        Ok(out)
    }

    /// Single-step inverse. The admissible set `{h : |B(h) - b| <= tol}` is
    /// an interval because `B` is nondecreasing in `h` for fixed memory; its
    /// end points are located by two bisections and the midpoint returned.
    pub fn inverse_step(&self, state: &PreisachState, b: f64, index: usize) -> Result<f64> {
        let limit = self.reachable_limit();
        if !(b.abs() <= limit) {
            return Err(PreisachError::Range {
                value: b,
                limit,
                index,
            });
        }
        let e = state.extrema();
        let areas = self.partial_areas(e);
        let current = areas[e.len()];
        let phi = |h: f64| -> f64 {
            let area = match state.prefix_after(h) {
                None => current,
                Some(0) => 0.0,
                Some(p) => areas[p] + self.segment(e[p - 1], h),
            };
            self.to_flux(area)
        };

        let hs = self.h_sat();
        let tol = self.options.tol;
        let width = 4.0 * f64::EPSILON * hs;
        let mut iterations = 0;
        let mut bisect = |mut below: f64, mut above: f64, go_up: &dyn Fn(f64) -> bool| {
            while above - below > width && iterations < self.options.max_iter {
                let mid = 0.5 * (below + above);
                if go_up(mid) {
                    below = mid;
                } else {
                    above = mid;
                }
                iterations += 1;
            }
            (below, above)
        };

        let lo = if phi(-hs) >= b - tol {
            -hs
        } else {
            bisect(-hs, hs, &|h| phi(h) < b - tol).1
        };
        let hi = if phi(hs) <= b + tol {
            hs
        } else {
            bisect(-hs, hs, &|h| phi(h) <= b + tol).0
        };
        let h = 0.5 * (lo + hi);
        let residual = (phi(h) - b).abs();
        if residual > tol {
            return Err(PreisachError::Convergence {
                index,
                iterations,
                residual,
            });
        }
        Ok(h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preisach::Relay;

    #[test]
    fn negative_saturation_anchor() {
        let m = PreisachModel::new(&PreisachDensity::default(), 1.2).unwrap();
        assert_eq!(m.magnetization(&m.initial_state()), -1.2);
    }

    #[test]
    fn single_relay_trace() {
        let d = PreisachDensity::relays(
            vec![Relay {
                alpha: 0.5,
                beta: -0.5,
                weight: 1.0,
            }],
            1.0,
        );
        let m = PreisachModel::new(&d, 1.0).unwrap();
        let b = m.forward_sequence(&[0.0, 1.0, 0.0, -1.0, 0.0]).unwrap();
        assert_eq!(b, vec![-1.0, 1.0, 1.0, -1.0, -1.0]);
    }

    #[test]
    fn range_error_at_band_edge() {
        let m = PreisachModel::new(&PreisachDensity::default(), 1.2).unwrap();
        let err = m.inverse_sequence(&[0.0, -1.2 * 0.999_999_9]).unwrap_err();
        assert!(matches!(err, PreisachError::Range { index: 1, .. }), "{err}");
    }
}
