use serde::{Deserialize, Serialize};

use crate::decay_verify::Estimate;
use crate::error::{LabError, Result};
use crate::stats::{fit_line, t_quantile_975, weighted_least_squares, MCAccumulator, Stat};

/// Condition numbers above this are flagged in reports.
pub const CONDITION_FLAG: f64 = 1e8;

/// Linear fit of per-sample observations `y_s(ℓ_i)` against a design whose
/// rows are `basis(ℓ_i)`. Weights are `1/stderr²` of the column means; the
/// parameter covariance accounts for the correlation between grid points
/// that share samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub beta: Vec<Stat>,
    pub covariance: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
    pub condition_number: f64,
    pub dof: usize,
}

pub fn fit_samples(xs: &[f64], per_sample: &[Vec<f64>], basis: &dyn Fn(f64) -> Vec<f64>) -> Result<LinearFit> {
    let n = per_sample.len();
    let k = xs.len();
    if n == 0 || per_sample.iter().any(|r| r.len() != k) {
        return Err(LabError::DegenerateFit("ragged or empty sample table".into()));
    }
    let cols: Vec<MCAccumulator> = (0..k)
        .map(|i| MCAccumulator::from_values(&per_sample.iter().map(|r| r[i]).collect::<Vec<_>>()))
        .collect();
    let means: Vec<f64> = cols.iter().map(|c| c.mean).collect();
    let ses: Vec<f64> = cols.iter().map(|c| c.stderr()).collect();
    let weights: Vec<f64> = if ses.iter().all(|&s| s > 0.0) {
        ses.iter().map(|s| 1.0 / (s * s)).collect()
    } else {
        vec![1.0; k]
    };
    let x: Vec<Vec<f64>> = xs.iter().map(|&v| basis(v)).collect();
    let p = x[0].len();
    let wls = weighted_least_squares(&x, &means, &weights)?;
    // Estimator matrix K = (XᵀWX)^{-1} Xᵀ W.
    let kmat: Vec<Vec<f64>> = (0..p)
        .map(|a| (0..k).map(|i| (0..p).map(|b| wls.covariance[a][b] * x[i][b]).sum::<f64>() * weights[i]).collect())
        .collect();
    let covariance = if n >= 2 {
        // Covariance of the column means.
        let mut s = vec![vec![0.0; k]; k];
        for i in 0..k {
            for j in 0..k {
                let c: f64 = per_sample.iter().map(|r| (r[i] - means[i]) * (r[j] - means[j])).sum();
                s[i][j] = c / ((n - 1) as f64 * n as f64);
            }
        }
        (0..p)
            .map(|a| {
                (0..p)
                    .map(|b| (0..k).map(|i| (0..k).map(|j| kmat[a][i] * s[i][j] * kmat[b][j]).sum::<f64>()).sum())
                    .collect()
            })
            .collect()
    } else if k > p {
        // Deterministic data: scale the unweighted covariance by the residual variance.
        let s2 = wls.residuals.iter().map(|r| r * r).sum::<f64>() / (k - p) as f64;
        wls.covariance.iter().map(|row| row.iter().map(|v| v * s2).collect()).collect()
    } else {
        vec![vec![0.0; p]; p]
    };
    Ok(LinearFit {
        beta: (0..p)
            .map(|a| Stat {
                mean: wls.beta[a],
                stderr: covariance[a][a].max(0.0).sqrt(),
            })
            .collect(),
        covariance,
        residuals: wls.residuals,
        condition_number: wls.condition,
        dof: if n >= 2 { n - 1 } else { k.saturating_sub(p) },
    })
}

/// Comparison of a fitted coefficient with the formula value.
#[allow(non_snake_case)]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossCheck {
    pub m: usize,
    pub L: i64,
    pub fitted: Stat,
    pub formula: Stat,
    /// `|fitted - formula|` in units of the combined standard error.
    pub z_score: f64,
    pub agrees: bool,
    /// Whether disagreement fails the run.
    pub gated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub d: usize,
    /// Side lengths `ℓ = 2L`.
    pub ell: Vec<f64>,
    pub n_samples: usize,
    /// `Â_m` for `m = 0..=d`, coefficient of `ℓ^{d-m}`.
    pub a_hat: Vec<Stat>,
    pub covariance: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
    /// Log-log slope of `|residual|` against `ℓ`, when defined.
    pub residual_order: Option<f64>,
    pub condition_number: f64,
    pub ill_conditioned: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cross_check: Option<Vec<CrossCheck>>,
}

/// Fits `E Tr h(g(H)_box) ≈ Σ_m Â_m ℓ^{d-m}`.
pub fn fit_expansion(d: usize, ell: &[f64], per_sample: &[Vec<f64>]) -> Result<FitReport> {
    if ell.len() < d + 2 {
        return Err(LabError::DegenerateFit(format!("need ≥ {} grid points, got {}", d + 2, ell.len())));
    }
    let fit = fit_samples(ell, per_sample, &|l| (0..=d).map(|m| l.powi((d - m) as i32)).collect())?;
    let pts: Vec<(f64, f64)> = ell
        .iter()
        .zip(&fit.residuals)
        .filter(|(_, r)| r.abs() > 0.0)
        .map(|(l, r)| (l.ln(), r.abs().ln()))
        .collect();
    let residual_order = if pts.len() >= 3 {
        let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
        fit_line(&x, &y).ok().map(|f| f.slope)
    } else {
        None
    };
    Ok(FitReport {
        d,
        ell: ell.to_vec(),
        n_samples: per_sample.len(),
        a_hat: fit.beta,
        covariance: fit.covariance,
        residuals: fit.residuals,
        residual_order,
        ill_conditioned: fit.condition_number > CONDITION_FLAG,
        condition_number: fit.condition_number,
        cross_check: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogClass {
    Enhanced,
    Flat,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEnhancementReport {
    pub ell: Vec<f64>,
    pub n_samples: usize,
    pub trace: Vec<Stat>,
    /// Volume density fitted jointly with the logarithmic term.
    pub a0: Stat,
    pub alpha: Estimate,
    pub beta: Estimate,
    /// `α - ci > 0`.
    pub positive_at_95: bool,
    /// `|α| ≤ 2·ci`.
    pub consistent_with_zero: bool,
    pub classification: LogClass,
}

/// Fits `E Tr h(g(H)_box) ≈ Â_0 ℓ^d + α log ℓ + β`; `ci` is the 95%
/// half-width of `α`.
pub fn fit_log_enhancement(d: usize, ell: &[f64], per_sample: &[Vec<f64>]) -> Result<LogEnhancementReport> {
    if ell.len() < 4 {
        return Err(LabError::DegenerateFit("log-enhancement fit needs ≥ 4 grid points".into()));
    }
    let fit = fit_samples(ell, per_sample, &|l| vec![l.powi(d as i32), l.ln(), 1.0])?;
    let t = t_quantile_975(fit.dof);
    let est = |s: &Stat| Estimate {
        value: s.mean,
        ci95: t * s.stderr,
    };
    let alpha = est(&fit.beta[1]);
    let positive = alpha.value - alpha.ci95 > 0.0;
    let zero = alpha.value.abs() <= 2.0 * alpha.ci95;
    let classification = if positive && !zero {
        LogClass::Enhanced
    } else if zero {
        LogClass::Flat
    } else {
        LogClass::Inconclusive
    };
    let trace = (0..ell.len())
        .map(|i| MCAccumulator::from_values(&per_sample.iter().map(|r| r[i]).collect::<Vec<_>>()).stat())
        .collect();
    Ok(LogEnhancementReport {
        ell: ell.to_vec(),
        n_samples: per_sample.len(),
        trace,
        a0: fit.beta[0],
        alpha,
        beta: est(&fit.beta[2]),
        positive_at_95: positive,
        consistent_with_zero: zero,
        classification,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_polynomial_is_exact() {
        let ell = [4.0, 8.0, 12.0, 16.0, 20.0];
        let row: Vec<f64> = ell.iter().map(|l| 3.0 * l * l + 2.0 * l + 1.0).collect();
        let f = fit_expansion(2, &ell, &[row]).unwrap();
        for (a, e) in f.a_hat.iter().zip([3.0, 2.0, 1.0]) {
            assert!((a.mean - e).abs() < 1e-9, "{a:?}");
        }
        assert!(fit_expansion(2, &ell[..3], &[vec![1.0; 3]]).is_err());
    }

    #[test]
    fn correlated_noise_covariance() {
        // A common per-sample offset moves only the constant term.
        let ell = [10.0, 20.0, 30.0, 40.0];
        let rows: Vec<Vec<f64>> = (0..6).map(|s| ell.iter().map(|l| 0.5 * l + s as f64).collect()).collect();
        let f = fit_expansion(1, &ell, &rows).unwrap();
        assert!((f.a_hat[0].mean - 0.5).abs() < 1e-12);
        assert!(f.a_hat[0].stderr < 1e-12);
        assert!(f.a_hat[1].stderr > 0.5);
    }

    #[test]
    fn log_fit_recovers_alpha() {
        let ell = [50.0, 100.0, 200.0, 400.0, 800.0];
        let rows: Vec<Vec<f64>> = (0..5)
            .map(|s| ell.iter().map(|l: &f64| 0.1 * l + 0.2 * l.ln() + 1.0 + 0.01 * s as f64).collect())
            .collect();
        let r = fit_log_enhancement(1, &ell, &rows).unwrap();
        assert!((r.alpha.value - 0.2).abs() < 1e-9);
        assert!(r.positive_at_95);
    }
}
