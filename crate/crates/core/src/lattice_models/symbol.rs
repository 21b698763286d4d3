use std::collections::BTreeMap;
use std::f64::consts::PI;

use faer::c64;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

const POSITIVITY_SAMPLES: usize = 4096;
const REALITY_TOL: f64 = 1e-13;

/// A symbol on the torus given by finitely many Fourier coefficients,
/// `a(θ) = Σ_k a_k e^{ikθ}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Symbol1D {
    coeffs: BTreeMap<i64, c64>,
    is_real_positive: bool,
}

impl Symbol1D {
    pub fn new(coeffs: BTreeMap<i64, c64>) -> Self {
        let mut s = Self {
            coeffs,
            is_real_positive: false,
        };
        s.is_real_positive = s.is_real_valued()
            && (0..POSITIVITY_SAMPLES)
                .map(|j| s.eval(2.0 * PI * j as f64 / POSITIVITY_SAMPLES as f64).re)
                .fold(f64::INFINITY, f64::min)
                > 0.0;
        s
    }

    pub fn from_real_pairs(pairs: &[(i64, f64)]) -> Self {
        Self::new(pairs.iter().map(|&(k, v)| (k, c64::new(v, 0.0))).collect())
    }

    pub fn coeff(&self, k: i64) -> c64 {
        self.coeffs.get(&k).copied().unwrap_or(c64::new(0.0, 0.0))
    }

    pub fn coeffs(&self) -> &BTreeMap<i64, c64> {
        &self.coeffs
    }

    pub fn eval(&self, theta: f64) -> c64 {
        self.coeffs
            .iter()
            .map(|(&k, &a)| a * c64::cis(k as f64 * theta))
            .sum()
    }

    /// `a_{-k} = conj(a_k)` for every stored `k`.
    pub fn is_real_valued(&self) -> bool {
        self.coeffs.iter().all(|(&k, &a)| {
            let scale = a.norm().max(1.0);
            (self.coeff(-k) - a.conj()).norm() <= REALITY_TOL * scale
        })
    }

    pub fn is_real_positive(&self) -> bool {
        self.is_real_positive
    }

    pub fn min_sampled(&self, n: usize) -> f64 {
        (0..n)
            .map(|j| self.eval(2.0 * PI * j as f64 / n as f64).re)
            .fold(f64::INFINITY, f64::min)
    }
}

/// Fourier coefficients `a_k`, `|k| <= k_max`, of a periodic function by the
/// uniform trapezoidal rule with `n_quad` nodes on `[0, 2π)`.
pub fn symbol_fourier_coefficients<F>(eval: F, k_max: usize, n_quad: usize) -> Result<Symbol1D>
where
    F: Fn(f64) -> c64,
{
    if n_quad < 4 * k_max.max(1) {
        return Err(LabError::Aliasing { n_quad, k_max });
    }
    let samples: Vec<c64> = (0..n_quad)
        .map(|j| eval(2.0 * PI * j as f64 / n_quad as f64))
        .collect();
    let k_max = k_max as i64;
    let coeffs = (-k_max..=k_max)
        .map(|k| {
            let terms: Vec<c64> = samples
                .iter()
                .enumerate()
                .map(|(j, &v)| v * c64::cis(-2.0 * PI * (k * j as i64) as f64 / n_quad as f64))
                .collect();
            (k, crate::dense::pairwise_sum_c(&terms) / n_quad as f64)
        })
        .collect();
    Ok(Symbol1D::new(coeffs))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent oracle: I_k(x) by its power series.
    fn bessel_i(k: u32, x: f64) -> f64 {
        let mut term = (x / 2.0).powi(k as i32) / (1..=k).map(f64::from).product::<f64>();
        let mut sum = 0.0;
        for m in 0..60u32 {
            sum += term;
            term *= (x / 2.0).powi(2) / (f64::from(m + 1) * f64::from(m + 1 + k));
        }
        sum
    }

    #[test]
    fn constant_symbol() {
        let s = symbol_fourier_coefficients(|_| c64::new(1.0, 0.0), 4, 16).unwrap();
        assert!((s.coeff(0) - c64::new(1.0, 0.0)).norm() < 1e-15);
        for k in 1..=4 {
            assert!(s.coeff(k).norm() < 1e-15 && s.coeff(-k).norm() < 1e-15);
        }
        assert!(s.is_real_positive());
    }

    #[test]
    fn single_mode() {
        let s = symbol_fourier_coefficients(c64::cis, 3, 12).unwrap();
        assert!((s.coeff(1) - c64::new(1.0, 0.0)).norm() < 1e-14);
        for k in [-3, -2, -1, 0, 2, 3] {
            assert!(s.coeff(k).norm() < 1e-14, "k = {k}");
        }
        assert!(!s.is_real_valued());
    }

    #[test]
    fn exp_cos_matches_bessel() {
        let s = symbol_fourier_coefficients(|t| c64::new(t.cos().exp(), 0.0), 8, 64).unwrap();
        assert!((s.coeff(0).re - 1.266_065_877_752_008_4).abs() < 1e-12);
        for k in 0..=8 {
            assert!((s.coeff(k as i64).re - bessel_i(k, 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn refuses_aliasing() {
        assert!(matches!(
            symbol_fourier_coefficients(|_| c64::new(1.0, 0.0), 10, 20),
            Err(LabError::Aliasing { .. })
        ));
    }
}
