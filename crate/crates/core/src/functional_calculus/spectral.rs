use faer::{c64, Mat, MatRef, Side};

use super::ScalarFunction;
use crate::dense;
use crate::error::{LabError, Result};
use crate::lattice_models::{HermitianOperator, LatticeBox};

/// Distance below which a resolvent point counts as on the spectrum.
pub const NEAR_SPECTRUM: f64 = 1e-12;

#[derive(Debug, Clone)]
pub enum EigenBasis {
    Real(Mat<f64>),
    Complex(Mat<c64>),
}

/// `A = U diag(λ) U^†` with ascending `λ`.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    lattice_box: LatticeBox,
    label: String,
    eigenvalues: Vec<f64>,
    basis: EigenBasis,
}

/// Eigendecomposition of a Hermitian matrix; real symmetric input takes the
/// (faster) real path.
pub fn spectral_decompose(op: &HermitianOperator) -> Result<SpectralDecomposition> {
    let (eigenvalues, basis) = decompose_matrix(op.matrix())?;
    Ok(SpectralDecomposition {
        lattice_box: op.lattice_box().clone(),
        label: op.label.clone(),
        eigenvalues,
        basis,
    })
}

pub(crate) fn decompose_matrix(m: MatRef<'_, c64>) -> Result<(Vec<f64>, EigenBasis)> {
    if dense::is_real(m) {
        let re = dense::real_part(m);
        let evd = re.self_adjoint_eigen(Side::Lower).map_err(|_| LabError::EigenFailure)?;
        let vals = (0..re.nrows()).map(|i| evd.S()[i]).collect();
        Ok((vals, EigenBasis::Real(evd.U().to_owned())))
    } else {
        let evd = m.self_adjoint_eigen(Side::Lower).map_err(|_| LabError::EigenFailure)?;
        let vals = (0..m.nrows()).map(|i| evd.S()[i].re).collect();
        Ok((vals, EigenBasis::Complex(evd.U().to_owned())))
    }
}

/// Eigenvalues only, ascending.
pub fn eigenvalues(m: MatRef<'_, c64>) -> Result<Vec<f64>> {
    if dense::is_real(m) {
        dense::real_part(m)
            .self_adjoint_eigenvalues(Side::Lower)
            .map_err(|_| LabError::EigenFailure)
    } else {
        Ok(m.self_adjoint_eigenvalues(Side::Lower)
            .map_err(|_| LabError::EigenFailure)?
            .into_iter()
            .collect())
    }
}

impl SpectralDecomposition {
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn lattice_box(&self) -> &LatticeBox {
        &self.lattice_box
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvectors(&self) -> Mat<c64> {
        match &self.basis {
            EigenBasis::Real(u) => dense::from_real(u.as_ref()),
            EigenBasis::Complex(u) => u.clone(),
        }
    }

    /// `|U_ik|^2`.
    fn weight(&self, i: usize, k: usize) -> f64 {
        match &self.basis {
            EigenBasis::Real(u) => u[(i, k)] * u[(i, k)],
            EigenBasis::Complex(u) => u[(i, k)].norm_sqr(),
        }
    }

    /// `U diag(v) U^†` for complex weights `v`.
    pub fn synthesize(&self, v: &[c64]) -> Mat<c64> {
        let n = self.dim();
        match &self.basis {
            EigenBasis::Real(u) => {
                let re: Vec<f64> = v.iter().map(|z| z.re).collect();
                let mut out = dense::from_real(synth_real(u.as_ref(), &re).as_ref());
                if v.iter().any(|z| z.im != 0.0) {
                    let im: Vec<f64> = v.iter().map(|z| z.im).collect();
                    let mi = synth_real(u.as_ref(), &im);
                    for j in 0..n {
                        for i in 0..n {
                            out[(i, j)].im = mi[(i, j)];
                        }
                    }
                }
                out
            }
            EigenBasis::Complex(u) => {
                let scaled = Mat::from_fn(n, n, |i, k| u[(i, k)] * v[k]);
                &scaled * u.adjoint()
            }
        }
    }

    /// `U diag(f(λ)) U^†`.
    pub fn apply(&self, f: &ScalarFunction) -> Result<HermitianOperator> {
        let vals = self.function_values(f)?;
        let v: Vec<c64> = vals.iter().map(|&x| c64::new(x, 0.0)).collect();
        let mut m = self.synthesize(&v);
        dense::symmetrize(&mut m);
        Ok(HermitianOperator::from_parts(
            self.lattice_box.clone(),
            m,
            format!("{}({})", f, self.label),
        ))
    }

    /// Diagonal of `f(A)`: `Σ_k |U_ik|^2 f(λ_k)`.
    pub fn apply_diagonal(&self, f: &ScalarFunction) -> Result<Vec<f64>> {
        let vals = self.function_values(f)?;
        Ok(self.diagonal_of(&vals))
    }

    pub fn diagonal_of(&self, vals: &[f64]) -> Vec<f64> {
        let n = self.dim();
        (0..n)
            .map(|i| {
                let terms: Vec<f64> = (0..n).map(|k| self.weight(i, k) * vals[k]).collect();
                dense::pairwise_sum(&terms)
            })
            .collect()
    }

    pub fn function_values(&self, f: &ScalarFunction) -> Result<Vec<f64>> {
        self.eigenvalues
            .iter()
            .map(|&l| {
                let v = f.eval(l);
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(LabError::FunctionUndefined(l))
                }
            })
            .collect()
    }

    /// `Tr f(A) = Σ f(λ)`.
    pub fn trace(&self, f: &ScalarFunction) -> Result<f64> {
        Ok(dense::pairwise_sum(&self.function_values(f)?))
    }

    pub fn distance_to_spectrum(&self, z: c64) -> f64 {
        self.eigenvalues
            .iter()
            .map(|&l| (c64::new(l, 0.0) - z).norm())
            .fold(f64::INFINITY, f64::min)
    }

    /// `(A - z)^{-1}`.
    pub fn resolvent(&self, z: c64) -> Result<Mat<c64>> {
        let dist = self.distance_to_spectrum(z);
        if dist <= NEAR_SPECTRUM {
            return Err(LabError::NearSpectrum {
                re: z.re,
                im: z.im,
                distance: dist,
            });
        }
        let v: Vec<c64> = self.eigenvalues.iter().map(|&l| (c64::new(l, 0.0) - z).inv()).collect();
        Ok(self.synthesize(&v))
    }

    /// Reconstruction error `‖U diag(λ) U^† − A‖_max` and `‖U^†U − I‖_max`.
    pub fn residuals(&self, op: &HermitianOperator) -> (f64, f64) {
        let v: Vec<c64> = self.eigenvalues.iter().map(|&l| c64::new(l, 0.0)).collect();
        let rec = dense::max_abs((&self.synthesize(&v) - op.matrix()).as_ref());
        let u = self.eigenvectors();
        let g = u.adjoint() * &u;
        let n = self.dim();
        let id = Mat::<c64>::from_fn(n, n, |i, j| c64::new(if i == j { 1.0 } else { 0.0 }, 0.0));
        (rec, dense::max_abs((g - id).as_ref()))
    }
}

fn synth_real(u: MatRef<'_, f64>, v: &[f64]) -> Mat<f64> {
    let n = u.nrows();
    let scaled = Mat::from_fn(n, n, |i, k| u[(i, k)] * v[k]);
    scaled * u.transpose()
}

/// `f(A)` for a Hermitian operator. Polynomials of degree at most two are
/// applied exactly by matrix arithmetic.
pub fn apply_scalar_function(op: &HermitianOperator, f: &ScalarFunction) -> Result<HermitianOperator> {
    if let Some([c0, c1, c2]) = f.as_low_degree_poly() {
        let m = op.matrix();
        let n = op.dim();
        let mut out = if c2 != 0.0 { m * m } else { Mat::zeros(n, n) };
        for j in 0..n {
            for i in 0..n {
                out[(i, j)] = out[(i, j)] * c2 + m[(i, j)] * c1;
            }
            out[(j, j)] += c64::new(c0, 0.0);
        }
        dense::symmetrize(&mut out);
        return Ok(HermitianOperator::from_parts(
            op.lattice_box().clone(),
            out,
            format!("{}({})", f, op.label),
        ));
    }
    spectral_decompose(op)?.apply(f)
}

/// Diagonal of `f(M)` for a Hermitian matrix `M`.
pub fn function_diagonal(m: MatRef<'_, c64>, f: &ScalarFunction) -> Result<Vec<f64>> {
    let n = m.nrows();
    if let Some([c0, c1, c2]) = f.as_low_degree_poly() {
        return Ok((0..n)
            .map(|i| {
                let sq = if c2 != 0.0 {
                    let terms: Vec<f64> = (0..n).map(|k| m[(i, k)].norm_sqr()).collect();
                    dense::pairwise_sum(&terms)
                } else {
                    0.0
                };
                c0 + c1 * m[(i, i)].re + c2 * sq
            })
            .collect());
    }
    let (eigenvalues, basis) = decompose_matrix(m)?;
    let dec = SpectralDecomposition {
        lattice_box: LatticeBox::cube(1, 0, n as i64 - 1)?,
        label: String::new(),
        eigenvalues,
        basis,
    };
    dec.apply_diagonal(f)
}

/// Diagonal of `f(χ M χ)` where `χ` projects onto the sites with `mask[i]`.
/// Sites outside the mask carry `f(0)`.
pub fn restricted_function_diagonal(m: MatRef<'_, c64>, mask: &[bool], f: &ScalarFunction) -> Result<Vec<f64>> {
    let idx: Vec<usize> = (0..mask.len()).filter(|&i| mask[i]).collect();
    let f0 = f.eval(0.0);
    let mut out = vec![f0; mask.len()];
    if !idx.is_empty() {
        let sub = dense::gather(m, &idx);
        for (k, v) in function_diagonal(sub.as_ref(), f)?.into_iter().enumerate() {
            out[idx[k]] = v;
        }
    }
    Ok(out)
}

/// `(A - z)^{-1}`.
pub fn resolvent(op: &HermitianOperator, z: c64) -> Result<Mat<c64>> {
    spectral_decompose(op)?.resolvent(z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functional_calculus::Smoothness;
    use crate::lattice_models::{build_operator, EnsembleSpec};

    fn diag(v: &[f64]) -> HermitianOperator {
        HermitianOperator::diagonal(LatticeBox::cube(1, 0, v.len() as i64 - 1).unwrap(), v, "d").unwrap()
    }

    #[test]
    fn sorts_eigenvalues() {
        let dec = spectral_decompose(&diag(&[3.0, 1.0, 2.0])).unwrap();
        assert_eq!(dec.eigenvalues(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn identity_spectrum() {
        let dec = spectral_decompose(&diag(&[1.0; 5])).unwrap();
        assert!(dec.eigenvalues().iter().all(|&l| (l - 1.0).abs() < 1e-15));
        let (_, orth) = dec.residuals(&diag(&[1.0; 5]));
        assert!(orth < 1e-12);
    }

    #[test]
    fn dirichlet_closed_form() {
        let n = 8;
        let op = build_operator(&EnsembleSpec::free(), &LatticeBox::cube(1, 0, n - 1).unwrap(), 0).unwrap();
        let dec = spectral_decompose(&op).unwrap();
        for (k, &l) in dec.eigenvalues().iter().enumerate() {
            let want = 2.0 - 2.0 * ((k + 1) as f64 * std::f64::consts::PI / (n + 1) as f64).cos();
            assert!((l - want).abs() < 1e-10);
        }
        let (rec, orth) = dec.residuals(&op);
        assert!(rec < 1e-9 * 4.0 && orth < 1e-10);
    }

    #[test]
    fn simple_applications() {
        let op = diag(&[1.0, 2.0, 3.0]);
        let ind = ScalarFunction::indicator(f64::NEG_INFINITY, 2.0).unwrap();
        assert_eq!(apply_scalar_function(&op, &ind).unwrap().diagonal_values(), vec![1.0, 1.0, 0.0]);

        let b = LatticeBox::cube(1, 0, 1).unwrap();
        let swap = HermitianOperator::from_real(b, Mat::from_fn(2, 2, |i, j| if i != j { 1.0 } else { 0.0 }).as_ref(), "s").unwrap();
        let sq = apply_scalar_function(&swap, &ScalarFunction::polynomial(vec![0.0, 0.0, 1.0])).unwrap();
        assert_eq!(sq.diagonal_values(), vec![1.0, 1.0]);
        assert_eq!(sq.entry(0, 1), c64::new(0.0, 0.0));

        // Same result through the eigendecomposition.
        let via_dec = spectral_decompose(&swap).unwrap().apply(&ScalarFunction::polynomial(vec![0.0, 0.0, 1.0])).unwrap();
        assert!(dense::max_abs((via_dec.matrix() - sq.matrix()).as_ref()) < 1e-14);
    }

    #[test]
    fn identity_function_reconstructs() {
        let op = build_operator(&EnsembleSpec::anderson(2.0, 1), &LatticeBox::centered(2, 2).unwrap(), 0).unwrap();
        let id = apply_scalar_function(&op, &ScalarFunction::identity()).unwrap();
        assert!(id.matrix() == op.matrix());
        let via = spectral_decompose(&op).unwrap().apply(&ScalarFunction::identity()).unwrap();
        assert!(dense::max_abs((via.matrix() - op.matrix()).as_ref()) < 1e-12);
    }

    #[test]
    fn scalar_resolvents() {
        let b = LatticeBox::cube(1, 0, 0).unwrap();
        let zero = HermitianOperator::zeros(b.clone(), "0");
        assert!((resolvent(&zero, c64::new(0.0, 1.0)).unwrap()[(0, 0)] - c64::new(0.0, 1.0)).norm() < 1e-15);
        let one = HermitianOperator::diagonal(b, &[1.0], "1").unwrap();
        assert!((resolvent(&one, c64::new(0.0, 0.0)).unwrap()[(0, 0)] - c64::new(1.0, 0.0)).norm() < 1e-15);
        assert!(matches!(resolvent(&one, c64::new(1.0, 0.0)), Err(LabError::NearSpectrum { .. })));
    }

    #[test]
    fn diagonal_paths_agree() {
        let op = build_operator(&EnsembleSpec::anderson(3.0, 5), &LatticeBox::centered(2, 2).unwrap(), 1).unwrap();
        let f = ScalarFunction::bump(3.0, 2.0, Smoothness::Finite(3)).unwrap();
        let full = apply_scalar_function(&op, &f).unwrap().diagonal_values();
        let d = function_diagonal(op.matrix(), &f).unwrap();
        for (a, b) in full.iter().zip(&d) {
            assert!((a - b).abs() < 1e-12);
        }
        let sq = ScalarFunction::polynomial(vec![0.5, -1.0, 0.25]);
        let exact = function_diagonal(op.matrix(), &sq).unwrap();
        let spec = spectral_decompose(&op).unwrap().apply_diagonal(&sq).unwrap();
        for (a, b) in exact.iter().zip(&spec) {
            assert!((a - b).abs() < 1e-11);
        }
    }

    #[test]
    fn restricted_fills_complement_with_value_at_zero() {
        let op = build_operator(&EnsembleSpec::free(), &LatticeBox::cube(1, 0, 3).unwrap(), 0).unwrap();
        let f = ScalarFunction::polynomial(vec![1.0, 1.0]);
        let d = restricted_function_diagonal(op.matrix(), &[true, false, true, true], &f).unwrap();
        assert_eq!(d, vec![3.0, 1.0, 3.0, 3.0]);
    }
}
