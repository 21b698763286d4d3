use std::f64::consts::PI;

use faer::c64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{spectral_decompose, ScalarFunction, SpectralDecomposition, Support};
use crate::dense;
use crate::error::{LabError, Result};
use crate::lattice_models::HermitianOperator;

/// Almost-analytic extension
/// `f̃(x+iy) = τ(y) Σ_{r<=n} f^{(r)}(x) (iy)^r / r!`
/// with a polynomial smoothstep cutoff `τ` (1 on `|y| <= 1/2`, 0 on `|y| >= 1`).
#[derive(Debug, Clone)]
pub struct QuasiAnalyticExtension {
    f: ScalarFunction,
    order: usize,
    x_support: (f64, f64),
    step_order: usize,
}

pub fn hs_extension(f: &ScalarFunction, n: usize) -> Result<QuasiAnalyticExtension> {
    if n < 2 {
        return Err(LabError::Precondition(format!("extension order must be >= 2 (got {n})")));
    }
    let x_support = match f.support() {
        Support::Interval(a, b) if a.is_finite() && b.is_finite() => (a, b),
        _ => return Err(LabError::Precondition(format!("{f} is not compactly supported"))),
    };
    if let Some(k) = f.smoothness() {
        if (k as usize) < n {
            return Err(LabError::DerivativesUnavailable(n));
        }
    }
    f.check_derivatives(n + 1)?;
    Ok(QuasiAnalyticExtension {
        f: f.clone(),
        order: n,
        x_support,
        step_order: n + 2,
    })
}

/// Tensor trapezoidal grid on `supp f × ([-1, -y_min] ∪ [y_min, 1])`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HsGrid {
    pub nx: usize,
    pub ny: usize,
    pub y_min: f64,
    /// Maximum accepted Richardson discrepancy (full vs half resolution).
    pub tolerance: Option<f64>,
}

impl Default for HsGrid {
    fn default() -> Self {
        Self {
            nx: 1600,
            ny: 400,
            y_min: 1e-3,
            tolerance: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct HsOutcome {
    pub operator: HermitianOperator,
    /// `max_k |φ_full(λ_k) − φ_half(λ_k)|`.
    pub richardson_discrepancy: f64,
    /// `‖hs_apply − U f(λ) U^†‖_max`.
    pub reference_discrepancy: f64,
    /// Bound on the contribution of the excluded strip `|y| < y_min`.
    pub strip_bound: f64,
}

fn binom(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

impl QuasiAnalyticExtension {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn x_support(&self) -> (f64, f64) {
        self.x_support
    }

    /// Smoothstep `S_N(u)` on `[0, 1]` and its derivative.
    fn smoothstep(&self, u: f64) -> (f64, f64) {
        let n = self.step_order;
        if u <= 0.0 {
            return (0.0, 0.0);
        }
        if u >= 1.0 {
            return (1.0, 0.0);
        }
        let s: f64 = (0..=n)
            .map(|k| binom(n + k, k) * binom(2 * n + 1, n - k) * (-u).powi(k as i32))
            .sum::<f64>()
            * u.powi(n as i32 + 1);
        let ds = (2 * n + 1) as f64 * binom(2 * n, n) * (u * (1.0 - u)).powi(n as i32);
        (s, ds)
    }

    /// `(τ(y), τ'(y))`.
    pub fn cutoff(&self, y: f64) -> (f64, f64) {
        let u = 2.0 * (y.abs() - 0.5);
        let (s, ds) = self.smoothstep(u);
        (1.0 - s, -2.0 * ds * y.signum())
    }

    fn omega_from(&self, derivs: &[f64], y: f64) -> c64 {
        let n = self.order;
        let (tau, dtau) = self.cutoff(y);
        if tau == 0.0 && dtau == 0.0 {
            return c64::new(0.0, 0.0);
        }
        let iy = c64::new(0.0, y);
        let mut pow = c64::new(1.0, 0.0);
        let mut taylor = c64::new(0.0, 0.0);
        for (r, &d) in derivs.iter().take(n + 1).enumerate() {
            if r > 0 {
                pow = pow * iy / r as f64;
            }
            taylor += pow * d;
        }
        // pow now holds (iy)^n / n!
        pow * (tau * derivs[n + 1]) + c64::new(0.0, dtau) * taylor
    }

    /// `ω = (∂_x + i∂_y) f̃` at `x + iy`.
    pub fn omega(&self, x: f64, y: f64) -> Result<c64> {
        let d = self.f.derivatives(self.order + 1, x)?;
        Ok(self.omega_from(&d, y))
    }

    /// `max |ω(x, y)| / |y|^{n-1}` over a `k × k` grid of the support box.
    pub fn omega_bound_constant(&self, k: usize) -> Result<f64> {
        let (a, b) = self.x_support;
        let mut best = 0.0f64;
        for i in 0..k {
            let x = a + (b - a) * (i as f64 + 0.5) / k as f64;
            let d = self.f.derivatives(self.order + 1, x)?;
            for j in 0..k {
                let y = -1.0 + 2.0 * (j as f64 + 0.5) / k as f64;
                let w = self.omega_from(&d, y).norm();
                best = best.max(w / y.abs().powi(self.order as i32 - 1));
            }
        }
        Ok(best)
    }

    /// Upper bound for the excluded strip: `|ω| <= sup|f^{(n+1)}|/n! · |y|^n` there.
    fn strip_bound(&self, y_min: f64) -> Result<f64> {
        let (a, b) = self.x_support;
        let n = self.order;
        let mut sup = 0.0f64;
        for i in 0..=2000 {
            let x = a + (b - a) * i as f64 / 2000.0;
            sup = sup.max(self.f.derivative(n + 1, x)?.abs());
        }
        let fact: f64 = (1..=n).map(|v| v as f64).product();
        Ok((b - a) * sup / fact * y_min.powi(n as i32) / (PI * n as f64))
    }
}

struct OmegaGrid {
    xs: Vec<f64>,
    ys: Vec<f64>,
    /// Weighted values `w_x w_y ω(x, y)` for `y > 0`, row-major in (y, x).
    vals: Vec<c64>,
}

fn trapezoid_weights(n: usize, h: f64) -> Vec<f64> {
    (0..=n).map(|i| if i == 0 || i == n { 0.5 * h } else { h }).collect()
}

fn omega_grid(ext: &QuasiAnalyticExtension, nx: usize, ny: usize, y_min: f64) -> Result<OmegaGrid> {
    let (a, b) = ext.x_support;
    let hx = (b - a) / nx as f64;
    let hy = (1.0 - y_min) / ny as f64;
    let xs: Vec<f64> = (0..=nx).map(|i| a + hx * i as f64).collect();
    let ys: Vec<f64> = (0..=ny).map(|j| y_min + hy * j as f64).collect();
    let wx = trapezoid_weights(nx, hx);
    let wy = trapezoid_weights(ny, hy);
    let derivs: Vec<Vec<f64>> = xs
        .iter()
        .map(|&x| ext.f.derivatives(ext.order + 1, x))
        .collect::<Result<_>>()?;
    let mut vals = Vec::with_capacity(xs.len() * ys.len());
    for (j, &y) in ys.iter().enumerate() {
        for (i, d) in derivs.iter().enumerate() {
            vals.push(ext.omega_from(d, y) * (wx[i] * wy[j]));
        }
    }
    Ok(OmegaGrid { xs, ys, vals })
}

/// `φ(λ) = (2π)^{-1} ∫ ω(z) (λ − z)^{-1}` over both half planes.
fn hs_scalar(grid: &OmegaGrid, lambda: f64, stride: usize) -> c64 {
    let nx = grid.xs.len();
    let mut terms = Vec::with_capacity(2 * grid.vals.len() / (stride * stride) + 4);
    let scale = (stride * stride) as f64;
    for (j, &y) in grid.ys.iter().enumerate().step_by(stride) {
        for i in (0..nx).step_by(stride) {
            // Every retained trapezoid weight, ends included, scales by the stride.
            let w = grid.vals[j * nx + i] * scale;
            if w == c64::new(0.0, 0.0) {
                continue;
            }
            let x = grid.xs[i];
            let up = c64::new(lambda - x, -y).inv();
            let down = c64::new(lambda - x, y).inv();
            // ω(x, −y) = conj ω(x, y) for real f.
            terms.push(w * up + w.conj() * down);
        }
    }
    dense::pairwise_sum_c(&terms) / (2.0 * PI)
}

/// `f(A)` by the Helffer–Sjöstrand formula, evaluated per eigenvalue.
pub fn hs_apply(op: &HermitianOperator, ext: &QuasiAnalyticExtension, grid: &HsGrid) -> Result<HsOutcome> {
    let dec = spectral_decompose(op)?;
    hs_apply_decomposed(&dec, ext, grid)
}

pub fn hs_apply_decomposed(
    dec: &SpectralDecomposition,
    ext: &QuasiAnalyticExtension,
    grid: &HsGrid,
) -> Result<HsOutcome> {
    if grid.nx < 4 || grid.ny < 4 || grid.nx % 2 != 0 || grid.ny % 2 != 0 {
        return Err(LabError::Precondition("grid sizes must be even and >= 4".into()));
    }
    if !(grid.y_min > 0.0 && grid.y_min < 0.5) {
        return Err(LabError::Precondition("y_min must lie in (0, 1/2)".into()));
    }
    let g = omega_grid(ext, grid.nx, grid.ny, grid.y_min)?;
    let pairs: Vec<(c64, c64)> = dec
        .eigenvalues()
        .par_iter()
        .map(|&l| (hs_scalar(&g, l, 1), hs_scalar(&g, l, 2)))
        .collect();
    let richardson_discrepancy = pairs.iter().map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    if let Some(tol) = grid.tolerance {
        if richardson_discrepancy > tol {
            return Err(LabError::GridTooCoarse {
                discrepancy: richardson_discrepancy,
                tolerance: tol,
            });
        }
    }
    let phi: Vec<c64> = pairs.iter().map(|p| p.0).collect();
    let mut m = dec.synthesize(&phi);
    dense::symmetrize(&mut m);
    let reference = dec.apply(&ext.f)?;
    let reference_discrepancy = dense::max_abs((&m - reference.matrix()).as_ref());
    Ok(HsOutcome {
        operator: HermitianOperator::from_parts(
            dec.lattice_box().clone(),
            m,
            format!("hs[{}]", ext.f),
        ),
        richardson_discrepancy,
        reference_discrepancy,
        strip_bound: ext.strip_bound(grid.y_min)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functional_calculus::Smoothness;
    use crate::lattice_models::LatticeBox;

    fn bump6() -> ScalarFunction {
        ScalarFunction::bump(0.0, 1.5, Smoothness::Finite(6)).unwrap()
    }

    #[test]
    fn cutoff_shape() {
        let ext = hs_extension(&bump6(), 4).unwrap();
        assert_eq!(ext.cutoff(0.3), (1.0, 0.0));
        assert_eq!(ext.cutoff(-1.2), (0.0, 0.0));
        let (t, _) = ext.cutoff(0.75);
        assert!((t - 0.5).abs() < 1e-12);
        // τ' against a finite difference
        let h = 1e-6;
        let fd = (ext.cutoff(0.7 + h).0 - ext.cutoff(0.7 - h).0) / (2.0 * h);
        assert!((fd - ext.cutoff(0.7).1).abs() < 1e-6);
    }

    #[test]
    fn zero_function() {
        let ext = hs_extension(&ScalarFunction::zero(), 2).unwrap();
        assert_eq!(ext.omega(0.0, 0.3).unwrap(), c64::new(0.0, 0.0));
        let op = HermitianOperator::diagonal(LatticeBox::cube(1, 0, 1).unwrap(), &[0.0, 0.0], "z").unwrap();
        let out = hs_apply(&op, &ext, &HsGrid { nx: 8, ny: 8, ..HsGrid::default() }).unwrap();
        assert_eq!(dense::max_abs(out.operator.matrix()), 0.0);
    }

    #[test]
    fn omega_matches_finite_difference_of_extension() {
        let f = bump6();
        let ext = hs_extension(&f, 3).unwrap();
        let ftilde = |x: f64, y: f64| {
            let d = f.derivatives(3, x).unwrap();
            let mut s = c64::new(0.0, 0.0);
            let mut p = c64::new(1.0, 0.0);
            for (r, v) in d.iter().enumerate() {
                if r > 0 {
                    p = p * c64::new(0.0, y) / r as f64;
                }
                s += p * *v;
            }
            s * ext.cutoff(y).0
        };
        let h = 1e-5;
        for &(x, y) in &[(0.2, 0.3), (-0.7, 0.8), (1.0, -0.6)] {
            let dx = (ftilde(x + h, y) - ftilde(x - h, y)) / (2.0 * h);
            let dy = (ftilde(x, y + h) - ftilde(x, y - h)) / (2.0 * h);
            let fd = dx + c64::new(0.0, 1.0) * dy;
            assert!((fd - ext.omega(x, y).unwrap()).norm() < 1e-6, "{x},{y}");
        }
    }

    #[test]
    fn omega_vanishes_off_support() {
        let ext = hs_extension(&bump6(), 2).unwrap();
        for &x in &[-2.6, -1.5, 1.5, 2.0] {
            assert_eq!(ext.omega(x, 0.4).unwrap(), c64::new(0.0, 0.0));
        }
        let c = ext.omega_bound_constant(200).unwrap();
        assert!(c.is_finite() && c > 0.0);
    }

    #[test]
    fn refuses_insufficient_smoothness() {
        let f = ScalarFunction::bump(0.0, 1.0, Smoothness::Finite(2)).unwrap();
        assert!(matches!(hs_extension(&f, 3), Err(LabError::DerivativesUnavailable(3))));
        let ind = ScalarFunction::indicator(0.0, 1.0).unwrap();
        assert!(hs_extension(&ind, 2).is_err());
        assert!(hs_extension(&ScalarFunction::entire(crate::functional_calculus::EntireKind::Exp), 2).is_err());
    }

    #[test]
    fn scalar_operator() {
        let f = bump6();
        let ext = hs_extension(&f, 5).unwrap();
        let lam = 0.4;
        let op = HermitianOperator::diagonal(LatticeBox::cube(1, 0, 0).unwrap(), &[lam], "l").unwrap();
        let grid = HsGrid::default();
        let out = hs_apply(&op, &ext, &grid).unwrap();
        assert!((out.operator.entry(0, 0).re - f.eval(lam)).abs() < 1e-6, "{:?}", out.operator.entry(0, 0));
        assert!(out.strip_bound < 1e-10);
    }

    #[test]
    fn random_hermitian_matches_spectral_calculus() {
        use crate::lattice_models::site_uniform;
        let n = 8;
        let u = |i: usize, j: usize, k: i64| site_uniform(17, k as u64, &[i as i64, j as i64]) - 0.5;
        let mut m = faer::Mat::from_fn(n, n, |i, j| c64::new(u(i, j, 0), u(i, j, 1)) * 0.6);
        dense::symmetrize(&mut m);
        let op = HermitianOperator::new(LatticeBox::cube(1, 0, n as i64 - 1).unwrap(), m, "rand").unwrap();
        assert!(!op.is_real());
        let ext = hs_extension(&bump6(), 5).unwrap();
        let grid = HsGrid::default();
        let out = hs_apply(&op, &ext, &grid).unwrap();
        assert!(out.reference_discrepancy <= 1e-5, "{}", out.reference_discrepancy);
        assert!(out.richardson_discrepancy < 1e-4);
    }

    #[test]
    fn coarse_grid_is_detected() {
        let ext = hs_extension(&bump6(), 5).unwrap();
        let op = HermitianOperator::diagonal(LatticeBox::cube(1, 0, 0).unwrap(), &[0.3], "l").unwrap();
        let grid = HsGrid {
            nx: 8,
            ny: 8,
            y_min: 1e-3,
            tolerance: Some(1e-8),
        };
        assert!(matches!(hs_apply(&op, &ext, &grid), Err(LabError::GridTooCoarse { .. })));
    }
}
