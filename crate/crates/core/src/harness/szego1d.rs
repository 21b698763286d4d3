use std::f64::consts::PI;

use faer::{c64, Side};
use serde::{Deserialize, Serialize};

use super::config::Szego1dConfig;
use crate::error::{LabError, Result};
use crate::functional_calculus::{eigenvalues, ScalarFunction};
use crate::lattice_models::{symbol_fourier_coefficients, toeplitz_matrix, Symbol1D};
use crate::stats::fit_line;

/// Symbol and its logarithm as coefficient sequences.
#[derive(Debug, Clone)]
pub struct SymbolPair {
    pub a: Symbol1D,
    pub log_a: Symbol1D,
    /// `log_a` is an exact finite series rather than a quadrature.
    pub exact_log: bool,
}

fn symbol_from_rows(rows: &[Vec<f64>], what: &str) -> Result<Symbol1D> {
    rows.iter()
        .map(|r| match r.as_slice() {
            [k, re] if k.fract() == 0.0 => Ok((*k as i64, c64::new(*re, 0.0))),
            [k, re, im] if k.fract() == 0.0 => Ok((*k as i64, c64::new(*re, *im))),
            _ => Err(LabError::Config(format!("{what}: entries must be [k, re] or [k, re, im], got {r:?}"))),
        })
        .collect::<Result<_>>()
        .map(Symbol1D::new)
}

fn quad_nodes(k_max: usize) -> usize {
    (8 * k_max).max(256)
}

impl SymbolPair {
    pub fn from_config(cfg: &Szego1dConfig) -> Result<Self> {
        let n = quad_nodes(cfg.k_max);
        match (cfg.coeffs.is_empty(), cfg.log_coeffs.is_empty()) {
            (false, true) => Self::from_symbol(symbol_from_rows(&cfg.coeffs, "coeffs")?, cfg.k_max),
            (true, false) => {
                let log_a = symbol_from_rows(&cfg.log_coeffs, "log_coeffs")?;
                if !log_a.is_real_valued() {
                    return Err(LabError::Symbol("log a must be real-valued".into()));
                }
                let a = symbol_fourier_coefficients(|t| log_a.eval(t).exp(), cfg.k_max, n)?;
                Ok(Self { a, log_a, exact_log: true })
            }
            _ => Err(LabError::Config("[szego1d] needs exactly one of coeffs and log_coeffs".into())),
        }
    }

    /// The logarithm is computed by quadrature; `a` must be real and positive.
    pub fn from_symbol(a: Symbol1D, k_max: usize) -> Result<Self> {
        if !a.is_real_positive() {
            return Err(LabError::Symbol(format!(
                "symbol must be real and positive (sampled minimum {})",
                a.min_sampled(4096)
            )));
        }
        let log_a = symbol_fourier_coefficients(|t| c64::new(a.eval(t).re.ln(), 0.0), k_max, quad_nodes(k_max))?;
        Ok(Self {
            a,
            log_a,
            exact_log: false,
        })
    }

    /// `Σ_{k≥1} k b_k b_{-k}` over the stored coefficients of `log a`, with a
    /// geometric estimate of the omitted tail (`None` when the terms do not
    /// shrink).
    pub fn strong_constant(&self) -> (f64, Option<f64>) {
        let kmax = self.log_a.coeffs().keys().copied().max().unwrap_or(0).max(0);
        let terms: Vec<f64> = (1..=kmax)
            .map(|k| k as f64 * (self.log_a.coeff(k) * self.log_a.coeff(-k)).re)
            .collect();
        let sum: f64 = terms.iter().sum();
        let negligible = |t: f64| t.abs() <= 1e-15 * sum.abs().max(1e-300);
        let tail = match terms.as_slice() {
            _ if self.exact_log => Some(0.0),
            [.., q] if negligible(*q) => Some(q.abs()),
            [.., p, q] => {
                let rho = (q / p).abs();
                (rho < 1.0).then(|| q.abs() * rho / (1.0 - rho))
            }
            _ => None,
        };
        (sum, tail)
    }
}

/// `log det T_L(a)` by Cholesky; fails unless `T_L` is positive definite.
pub fn toeplitz_log_det(a: &Symbol1D, l: usize) -> Result<f64> {
    let t = toeplitz_matrix(a, l)?;
    let llt = t
        .matrix()
        .llt(Side::Lower)
        .map_err(|_| LabError::Symbol(format!("T_{l}(a) is not positive definite")))?;
    let f = llt.L();
    Ok((0..l).map(|i| 2.0 * f[(i, i)].re.ln()).sum())
}

pub fn toeplitz_trace(a: &Symbol1D, h: &ScalarFunction, l: usize) -> Result<f64> {
    let t = toeplitz_matrix(a, l)?;
    Ok(eigenvalues(t.matrix())?.iter().map(|&x| h.eval(x)).sum())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeterminantRow {
    #[serde(rename = "L")]
    pub l: usize,
    pub log_det: f64,
    /// `L·b_0 + Σ k b_k b_{-k}`.
    pub prediction: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    #[serde(rename = "L")]
    pub l: usize,
    pub trace: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceBranch {
    pub rows: Vec<TraceRow>,
    /// `(1/2π) ∫ h(a(θ)) dθ`.
    pub volume_density: f64,
    /// Least-squares `trace ≈ slope·L + intercept`.
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Szego1dReport {
    pub b0: f64,
    pub strong_constant: f64,
    pub strong_constant_tail: Option<f64>,
    pub determinant: Vec<DeterminantRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<TraceBranch>,
}

/// Determinant branch for every `L`; the trace branch when `h(0) = 0`.
pub fn szego_1d_suite(pair: &SymbolPair, h: Option<&ScalarFunction>, ls: &[usize]) -> Result<Szego1dReport> {
    let b0 = pair.log_a.coeff(0).re;
    let (strong, tail) = pair.strong_constant();
    let determinant = ls
        .iter()
        .map(|&l| {
            let log_det = toeplitz_log_det(&pair.a, l)?;
            let prediction = l as f64 * b0 + strong;
            Ok(DeterminantRow {
                l,
                log_det,
                prediction,
                error: (log_det - prediction).abs(),
            })
        })
        .collect::<Result<_>>()?;
    let trace = match h {
        Some(h) => {
            if h.eval(0.0).abs() > 1e-14 {
                return Err(LabError::Precondition("trace branch needs h(0) = 0".into()));
            }
            let rows: Vec<TraceRow> = ls
                .iter()
                .map(|&l| Ok(TraceRow { l, trace: toeplitz_trace(&pair.a, h, l)? }))
                .collect::<Result<_>>()?;
            let n = 4096;
            let volume_density = (0..n).map(|j| h.eval(pair.a.eval(2.0 * PI * j as f64 / n as f64).re)).sum::<f64>() / n as f64;
            let fit = (rows.len() >= 2)
                .then(|| {
                    let x: Vec<f64> = rows.iter().map(|r| r.l as f64).collect();
                    let y: Vec<f64> = rows.iter().map(|r| r.trace).collect();
                    fit_line(&x, &y).ok()
                })
                .flatten();
            Some(TraceBranch {
                rows,
                volume_density,
                slope: fit.as_ref().map(|f| f.slope),
                intercept: fit.as_ref().map(|f| f.intercept),
            })
        }
        None => None,
    };
    Ok(Szego1dReport {
        b0,
        strong_constant: strong,
        strong_constant_tail: tail,
        determinant,
        trace,
    })
}

impl Szego1dReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("L,log_det,prediction,error\n");
        for r in &self.determinant {
            s += &format!("{},{},{},{}\n", r.l, r.log_det, r.prediction, r.error);
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_one_gives_zero() {
        let p = SymbolPair::from_symbol(Symbol1D::from_real_pairs(&[(0, 1.0)]), 8).unwrap();
        let r = szego_1d_suite(&p, Some(&ScalarFunction::identity()), &[5, 10]).unwrap();
        for row in &r.determinant {
            assert!(row.log_det.abs() < 1e-13 && row.error < 1e-13);
        }
        assert!(r.strong_constant.abs() < 1e-15);
    }

    #[test]
    fn exp_cos_constant_and_tail() {
        let cfg = Szego1dConfig {
            coeffs: vec![],
            log_coeffs: vec![vec![-1.0, 0.5], vec![1.0, 0.5]],
            k_max: 32,
        };
        let p = SymbolPair::from_config(&cfg).unwrap();
        assert_eq!(p.strong_constant(), (0.25, Some(0.0)));
        // The same symbol through its own coefficients: the logarithm is a quadrature.
        let q = SymbolPair::from_symbol(p.a.clone(), 32).unwrap();
        let (e, tail) = q.strong_constant();
        assert!((e - 0.25).abs() < 1e-12 && tail.unwrap() < 1e-12, "{e} {tail:?}");
    }

    #[test]
    fn non_positive_symbol_rejected() {
        // 1 + 2cos θ changes sign.
        let a = Symbol1D::from_real_pairs(&[(-1, 1.0), (0, 1.0), (1, 1.0)]);
        assert!(matches!(SymbolPair::from_symbol(a, 8), Err(LabError::Symbol(_))));
    }

    #[test]
    fn tridiagonal_determinant_oracle() {
        // Oracle: the three-term recurrence D_L = 2 D_{L-1} - 0.25 D_{L-2}.
        let a = Symbol1D::from_real_pairs(&[(-1, 0.5), (0, 2.0), (1, 0.5)]);
        let (mut d0, mut d1) = (1.0f64, 2.0f64);
        for _ in 2..=12 {
            let d2 = 2.0 * d1 - 0.25 * d0;
            d0 = d1;
            d1 = d2;
        }
        assert!((toeplitz_log_det(&a, 12).unwrap() - d1.ln()).abs() < 1e-12);
    }
}
