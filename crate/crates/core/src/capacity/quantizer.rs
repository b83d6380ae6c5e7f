use crate::error::{invalid, Result};

/// Uniform scalar quantizer with `levels` cells of width `step` starting at
/// `low`. The outermost cells extend to minus and plus infinity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quantizer {
    low: f64,
    step: f64,
    levels: usize,
}

impl Quantizer {
    pub fn new(low: f64, step: f64, levels: usize) -> Result<Self> {
        if levels == 0 {
            return Err(invalid("levels", "Q must be at least 1"));
        }
        if !(step >= 0.0 && step.is_finite()) || !low.is_finite() {
            return Err(invalid("step", format!("must be finite and non-negative, got {step}")));
        }
        Ok(Self { low, step, levels })
    }

    /// `levels` cells tiling `[min, max]`, so `step = (max - min) / levels`.
    pub fn spanning(min: f64, max: f64, levels: usize) -> Result<Self> {
        if !(max >= min) {
            return Err(invalid("range", format!("max {max} below min {min}")));
        }
        Self::new(min, (max - min) / levels.max(1) as f64, levels)
    }

    /// Range-anchored quantizer over a set of expected gains.
    pub fn over_values(values: impl IntoIterator<Item = f64>, levels: usize) -> Result<Self> {
        let (lo, hi) = values
            .into_iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        if !lo.is_finite() {
            return Err(invalid("values", "at least one finite value is required"));
        }
        Self::spanning(lo, hi, levels)
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn low(&self) -> f64 {
        self.low
    }

    /// Reconstruction value (cell centre) of level `i`.
    pub fn level(&self, i: usize) -> f64 {
        self.low + (i as f64 + 0.5) * self.step
    }

    /// Upper boundary of cell `i` (`i < levels - 1`).
    pub fn boundary(&self, i: usize) -> f64 {
        self.low + (i + 1) as f64 * self.step
    }

    /// Index of the cell containing `x`.
    pub fn quantize(&self, x: f64) -> usize {
        if self.step == 0.0 || self.levels == 1 {
            return 0;
        }
        let cell = ((x - self.low) / self.step).floor();
        if cell <= 0.0 {
            0
        } else {
            (cell as usize).min(self.levels - 1)
        }
    }

    /// Bits per symbol of the level codebook.
    pub fn bits_per_level(&self) -> usize {
        (usize::BITS - (self.levels - 1).leading_zeros()) as usize
    }
}
