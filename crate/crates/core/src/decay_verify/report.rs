use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// Decay profile `rate(r)` of a fitted kernel bound `C·rate(r)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DecayMode {
    Polynomial { q: f64 },
    Exponential { mu: f64 },
    Stretched { mu: f64, theta: f64 },
}

impl DecayMode {
    pub fn rate(&self, r: f64) -> f64 {
        match *self {
            Self::Polynomial { q } => r.powf(-q),
            Self::Exponential { mu } => (-mu * r).exp(),
            Self::Stretched { mu, theta } => (-mu * r.powf(theta)).exp(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Polynomial { .. } => "polynomial",
            Self::Exponential { .. } => "exponential",
            Self::Stretched { .. } => "stretched",
        }
    }
}

/// Point estimate with a symmetric 95% interval half-width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub ci95: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFitReport {
    pub mode: DecayMode,
    /// Slope and intercept of the transformed regression.
    pub slope: Estimate,
    pub intercept: Estimate,
    pub prefactor: f64,
    pub r_squared: f64,
    pub n_samples: usize,
    pub distance_range: (f64, f64),
    /// Raw `(distance, value)` pairs the fit was made from.
    pub pairs: Vec<(f64, f64)>,
    #[serde(default)]
    pub flags: Vec<String>,
}

impl DecayFitReport {
    /// Certified bound `C·rate(r)` at distance `r`.
    pub fn bound(&self, r: f64) -> f64 {
        self.prefactor * self.mode.rate(r)
    }

    /// `C·Σ_{r > r0} r^{d-1} rate(r)`: the tail of the kernel bound summed over
    /// lattice shells beyond `r0`. Infinite when the series diverges.
    pub fn tail_budget(&self, d: usize, r0: i64) -> f64 {
        let shell = |r: f64| r.powi(d as i32 - 1) * self.mode.rate(r);
        if let DecayMode::Polynomial { q } = self.mode {
            if q <= d as f64 {
                return f64::INFINITY;
            }
        }
        let start = r0.max(0) + 1;
        let mut sum = 0.0;
        let mut r = start;
        while r < start + 1_000_000 {
            let t = shell(r as f64);
            sum += t;
            if r > start + 16 && t <= 1e-17 * sum.max(f64::MIN_POSITIVE) {
                return self.prefactor * sum;
            }
            r += 1;
        }
        if let DecayMode::Polynomial { q } = self.mode {
            sum += (r as f64).powf(d as f64 - q) / (q - d as f64);
        }
        self.prefactor * sum
    }

    /// Rejects a certificate that cannot back the requested tolerance.
    pub fn require_tail_below(&self, d: usize, r0: i64, tolerance: f64) -> Result<f64> {
        let budget = self.tail_budget(d, r0);
        if budget > tolerance {
            return Err(LabError::Precondition(format!(
                "certified tail {budget:.3e} beyond radius {r0} exceeds tolerance {tolerance:.3e}"
            )));
        }
        Ok(budget)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(mode: DecayMode) -> DecayFitReport {
        DecayFitReport {
            mode,
            slope: Estimate { value: 0.0, ci95: 0.0 },
            intercept: Estimate { value: 0.0, ci95: 0.0 },
            prefactor: 1.0,
            r_squared: 1.0,
            n_samples: 1,
            distance_range: (3.0, 10.0),
            pairs: vec![],
            flags: vec![],
        }
    }

    #[test]
    fn exponential_tail_is_geometric() {
        let mu: f64 = 0.7;
        let t = report(DecayMode::Exponential { mu }).tail_budget(1, 5);
        let exact = (-6.0 * mu).exp() / (1.0 - (-mu).exp());
        assert!((t - exact).abs() < 1e-14 * exact);
    }

    #[test]
    fn polynomial_tail() {
        assert!(report(DecayMode::Polynomial { q: 2.0 }).tail_budget(2, 3).is_infinite());
        // Σ_{r>0} r^{-2} = π²/6
        let t = report(DecayMode::Polynomial { q: 2.0 }).tail_budget(1, 0);
        assert!((t - std::f64::consts::PI.powi(2) / 6.0).abs() < 1e-9);
    }
}
