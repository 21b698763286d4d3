//! Streaming moments and small least-squares helpers.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// Welford accumulator. Merging follows Chan et al.; callers merge in a fixed
/// order so that results do not depend on scheduling.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MCAccumulator {
    pub count: u64,
    pub mean: f64,
    pub m2: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<Vec<f64>>,
}

impl MCAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_log() -> Self {
        Self {
            samples: Some(Vec::new()),
            ..Self::default()
        }
    }

    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
        if let Some(s) = &mut self.samples {
            s.push(x);
        }
    }

    pub fn from_values(values: &[f64]) -> Self {
        let mut a = Self::new();
        values.iter().for_each(|&v| a.push(v));
        a
    }

    pub fn merge(&mut self, other: &MCAccumulator) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            let log = self.samples.take();
            *self = other.clone();
            if let (Some(mut mine), Some(theirs)) = (log, other.samples.as_ref()) {
                mine.clear();
                mine.extend_from_slice(theirs);
                self.samples = Some(mine);
            }
            return;
        }
        let n = (self.count + other.count) as f64;
        let delta = other.mean - self.mean;
        self.mean += delta * other.count as f64 / n;
        self.m2 += other.m2 + delta * delta * self.count as f64 * other.count as f64 / n;
        self.count += other.count;
        if let (Some(mine), Some(theirs)) = (&mut self.samples, &other.samples) {
            mine.extend_from_slice(theirs);
        }
    }

    pub fn variance(&self) -> f64 {
        if self.count < 2 { 0.0 } else { self.m2 / (self.count - 1) as f64 }
    }

    /// `sqrt(M2 / (n (n-1)))`; zero for fewer than two samples.
    pub fn stderr(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            (self.m2 / (self.count as f64 * (self.count - 1) as f64)).sqrt()
        }
    }

    pub fn stat(&self) -> Stat {
        Stat {
            mean: self.mean,
            stderr: self.stderr(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub stderr: f64,
}

impl Stat {
    /// `|a - b| ≤ k·sqrt(se_a² + se_b²)`.
    pub fn agrees_with(&self, other: &Stat, k: f64) -> bool {
        (self.mean - other.mean).abs() <= k * self.stderr.hypot(other.stderr)
    }
}

/// Weighted least squares `y ≈ X β` with weights `w`. Returns `β`, its
/// covariance `(XᵀWX)^{-1}` and the residuals.
pub struct WlsFit {
    pub beta: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
    /// 2-norm condition number of the column-scaled design matrix.
    pub condition: f64,
}

pub fn weighted_least_squares(x: &[Vec<f64>], y: &[f64], w: &[f64]) -> Result<WlsFit> {
    use faer::Mat;
    let rows = y.len();
    let cols = x.first().map_or(0, Vec::len);
    if rows < cols || cols == 0 || x.len() != rows || w.len() != rows {
        return Err(LabError::DegenerateFit("too few observations for the design".into()));
    }
    let sw: Vec<f64> = w.iter().map(|v| v.sqrt()).collect();
    let a = Mat::<f64>::from_fn(rows, cols, |i, j| x[i][j] * sw[i]);
    // Column scaling, then a thin SVD of the scaled system: avoids squaring
    // the condition number as the normal equations would.
    let norms: Vec<f64> = (0..cols)
        .map(|j| (0..rows).map(|i| a[(i, j)].powi(2)).sum::<f64>().sqrt().max(f64::MIN_POSITIVE))
        .collect();
    let scaled = Mat::<f64>::from_fn(rows, cols, |i, j| a[(i, j)] / norms[j]);
    let svd = scaled
        .thin_svd()
        .map_err(|e| LabError::DegenerateFit(format!("svd failed: {e:?}")))?;
    let (u, v) = (svd.U(), svd.V());
    let sv: Vec<f64> = (0..cols).map(|k| svd.S()[k]).collect();
    let (smax, smin) = sv.iter().fold((0.0f64, f64::INFINITY), |(hi, lo), &x| (hi.max(x), lo.min(x)));
    if !(smin > 1e-13 * smax) {
        return Err(LabError::DegenerateFit("singular design matrix".into()));
    }
    let b: Vec<f64> = (0..rows).map(|i| y[i] * sw[i]).collect();
    let utb: Vec<f64> = (0..cols).map(|k| (0..rows).map(|i| u[(i, k)] * b[i]).sum::<f64>() / sv[k]).collect();
    let beta: Vec<f64> = (0..cols)
        .map(|j| (0..cols).map(|k| v[(j, k)] * utb[k]).sum::<f64>() / norms[j])
        .collect();
    let covariance = (0..cols)
        .map(|i| {
            (0..cols)
                .map(|j| (0..cols).map(|k| v[(i, k)] * v[(j, k)] / (sv[k] * sv[k])).sum::<f64>() / (norms[i] * norms[j]))
                .collect()
        })
        .collect();
    let residuals = (0..rows)
        .map(|i| y[i] - (0..cols).map(|j| x[i][j] * beta[j]).sum::<f64>())
        .collect();
    Ok(WlsFit {
        beta,
        covariance,
        residuals,
        condition: smax / smin,
    })
}

/// Ordinary least-squares line `y = a + b x` with standard errors and `R²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub intercept: f64,
    pub slope: f64,
    pub intercept_se: f64,
    pub slope_se: f64,
    pub r_squared: f64,
    pub n: usize,
}

pub fn fit_line(x: &[f64], y: &[f64]) -> Result<LineFit> {
    let n = x.len();
    if n < 3 || y.len() != n {
        return Err(LabError::DegenerateFit(format!("line fit needs ≥ 3 points, got {n}")));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(LabError::DegenerateFit("all abscissae equal".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let s2 = sse / (nf - 2.0);
    let r_squared = if syy > 0.0 { (1.0 - sse / syy).clamp(0.0, 1.0) } else { 1.0 };
    Ok(LineFit {
        intercept,
        slope,
        intercept_se: (s2 * (1.0 / nf + mx * mx / sxx)).sqrt(),
        slope_se: (s2 / sxx).sqrt(),
        r_squared,
        n,
    })
}

/// Two-sided 97.5% Student-t quantile.
pub fn t_quantile_975(dof: usize) -> f64 {
    const TABLE: [f64; 30] = [
        12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228, 2.201, 2.179, 2.160, 2.145, 2.131,
        2.120, 2.110, 2.101, 2.093, 2.086, 2.080, 2.074, 2.069, 2.064, 2.060, 2.056, 2.052, 2.048, 2.045, 2.042,
    ];
    match dof {
        0 => f64::INFINITY,
        k if k <= 30 => TABLE[k - 1],
        k if k <= 60 => 2.000 + (2.042 - 2.000) * (60 - k) as f64 / 30.0,
        k if k <= 120 => 1.980 + (2.000 - 1.980) * (120 - k) as f64 / 60.0,
        _ => 1.960,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn welford_basics() {
        let a = MCAccumulator::from_values(&[7.0; 5]);
        assert_eq!((a.mean, a.stderr()), (7.0, 0.0));
        let b = MCAccumulator::from_values(&[1.0, 3.0]);
        assert_eq!((b.mean, b.stderr()), (2.0, 1.0));
    }

    #[test]
    fn merge_matches_sequential() {
        let xs: Vec<f64> = (0..40).map(|i| ((i * 37) % 11) as f64 * 0.3 - 1.0).collect();
        let whole = MCAccumulator::from_values(&xs);
        let mut left = MCAccumulator::from_values(&xs[..13]);
        left.merge(&MCAccumulator::from_values(&xs[13..]));
        assert_eq!(left.count, whole.count);
        assert!((left.mean - whole.mean).abs() < 1e-14);
        assert!((left.m2 - whole.m2).abs() < 1e-12);
    }

    #[test]
    fn exact_polynomial_wls() {
        let ells = [4.0, 6.0, 8.0, 10.0, 12.0];
        let x: Vec<Vec<f64>> = ells.iter().map(|&l: &f64| vec![l * l, l, 1.0]).collect();
        let y: Vec<f64> = ells.iter().map(|l| 3.0 * l * l + 2.0 * l + 1.0).collect();
        let fit = weighted_least_squares(&x, &y, &[1.0; 5]).unwrap();
        for (b, e) in fit.beta.iter().zip([3.0, 2.0, 1.0]) {
            assert!((b - e).abs() < 1e-9);
        }
    }

    #[test]
    fn line_fit_recovers() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [1.0, 3.0, 5.0, 7.0];
        let f = fit_line(&x, &y).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12 && (f.intercept + 1.0).abs() < 1e-12);
        assert_eq!(f.r_squared, 1.0);
    }
}
