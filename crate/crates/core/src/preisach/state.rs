use super::{PreisachError, Result};

/// Reversal-point memory of a Preisach system.
///
/// Stored as the alternating list of dominant extrema, starting with the
/// negative saturation field and ending with the current input. Every
/// interior extremum is a surviving reversal point; maxima decrease and
/// minima increase along the list.
#[derive(Debug, Clone, PartialEq)]
pub struct PreisachState {
    h_sat: f64,
    extrema: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Ascending,
    Descending,
}

impl PreisachState {
    /// State after driving the input to `-h_sat`.
    pub fn negative_saturation(h_sat: f64) -> Self {
        Self {
            h_sat,
            extrema: vec![-h_sat],
        }
    }

    pub fn h_sat(&self) -> f64 {
        self.h_sat
    }

    pub fn extrema(&self) -> &[f64] {
        &self.extrema
    }

    /// Most recently applied field.
    pub fn last_input(&self) -> f64 {
        *self.extrema.last().expect("state always holds one extremum")
    }

    /// Direction of the most recent movement, if any.
    pub fn direction(&self) -> Option<Direction> {
        match self.extrema.as_slice() {
            [.., a, b] if b > a => Some(Direction::Ascending),
            [.., a, b] if b < a => Some(Direction::Descending),
            _ => None,
        }
    }

    /// Staircase corners `(alpha_k, beta_k)`: each surviving maximum paired
    /// with the minimum that preceded it.
    pub fn corners(&self) -> Vec<(f64, f64)> {
        self.extrema
            .windows(2)
            .step_by(2)
            .map(|w| (w[1], w[0]))
            .collect()
    }

    /// Length of the surviving prefix once `h` is applied; `h` is appended
    /// after it. `None` when `h` repeats the last input.
    pub(crate) fn prefix_after(&self, h: f64) -> Option<usize> {
        let e = &self.extrema;
        let n = e.len();
        let last = e[n - 1];
        if h == last {
            return None;
        }
        let up = h > last;
        let mut p = if n >= 2 && ((last > e[n - 2]) == up) {
            n - 1
        } else {
            n
        };
        // Wiping-out: h erases every older extremum of its own kind that
        // it reaches, together with the opposite reversal that followed.
        while p >= 2 {
            let older = e[p - 2];
            let wiped = if up { h >= older } else { h <= older };
            if !wiped {
                break;
            }
            p -= 2;
        }
        Some(p)
    }

    pub fn apply_field(&mut self, h: f64) -> Result<()> {
        self.check_field(h, 0)?;
        if let Some(p) = self.prefix_after(h) {
            self.extrema.truncate(p);
            self.extrema.push(h);
        }
        Ok(())
    }

    pub(crate) fn check_field(&self, h: f64, index: usize) -> Result<()> {
        if !(h.abs() <= self.h_sat) {
            return Err(PreisachError::Saturation {
                value: h,
                h_sat: self.h_sat,
                index,
            });
        }
        Ok(())
    }
}
