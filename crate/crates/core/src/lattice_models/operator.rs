use faer::{c64, Mat, MatRef};

use super::LatticeBox;
use crate::dense;
use crate::error::{LabError, Result};

const HERMITIAN_TOL: f64 = 1e-12;

/// Dense Hermitian matrix indexed by the sites of a lattice box.
#[derive(Debug, Clone)]
pub struct HermitianOperator {
    lattice_box: LatticeBox,
    matrix: Mat<c64>,
    pub label: String,
}

impl HermitianOperator {
    pub fn new(lattice_box: LatticeBox, matrix: Mat<c64>, label: impl Into<String>) -> Result<Self> {
        let n = lattice_box.site_count();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(LabError::BoxMismatch(format!(
                "matrix is {}x{} but the box has {n} sites",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let scale = dense::max_abs(matrix.as_ref());
        let deviation = dense::hermitian_deviation(matrix.as_ref());
        if deviation > HERMITIAN_TOL * scale.max(f64::MIN_POSITIVE) {
            return Err(LabError::NotHermitian { deviation, scale });
        }
        Ok(Self {
            lattice_box,
            matrix,
            label: label.into(),
        })
    }

    /// Skips the Hermiticity scan; for matrices Hermitian by construction.
    pub(crate) fn from_parts(lattice_box: LatticeBox, matrix: Mat<c64>, label: String) -> Self {
        debug_assert_eq!(matrix.nrows(), lattice_box.site_count());
        Self {
            lattice_box,
            matrix,
            label,
        }
    }

    pub fn from_real(lattice_box: LatticeBox, matrix: MatRef<'_, f64>, label: impl Into<String>) -> Result<Self> {
        Self::new(lattice_box, dense::from_real(matrix), label)
    }

    pub fn zeros(lattice_box: LatticeBox, label: impl Into<String>) -> Self {
        let n = lattice_box.site_count();
        Self::from_parts(lattice_box, Mat::zeros(n, n), label.into())
    }

    pub fn diagonal(lattice_box: LatticeBox, values: &[f64], label: impl Into<String>) -> Result<Self> {
        if values.len() != lattice_box.site_count() {
            return Err(LabError::BoxMismatch("diagonal length".into()));
        }
        let n = values.len();
        let m = Mat::from_fn(n, n, |i, j| {
            if i == j {
                c64::new(values[i], 0.0)
            } else {
                c64::new(0.0, 0.0)
            }
        });
        Ok(Self::from_parts(lattice_box, m, label.into()))
    }

    pub fn lattice_box(&self) -> &LatticeBox {
        &self.lattice_box
    }

    pub fn matrix(&self) -> MatRef<'_, c64> {
        self.matrix.as_ref()
    }

    pub fn into_matrix(self) -> Mat<c64> {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn entry(&self, i: usize, j: usize) -> c64 {
        self.matrix[(i, j)]
    }

    pub fn entry_at(&self, a: &[i64], b: &[i64]) -> Result<c64> {
        let i = self
            .lattice_box
            .index_of(a)
            .ok_or_else(|| LabError::SiteOutside(a.to_vec()))?;
        let j = self
            .lattice_box
            .index_of(b)
            .ok_or_else(|| LabError::SiteOutside(b.to_vec()))?;
        Ok(self.matrix[(i, j)])
    }

    pub fn diagonal_values(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.matrix[(i, i)].re).collect()
    }

    pub fn is_real(&self) -> bool {
        dense::is_real(self.matrix.as_ref())
    }

    pub fn hermitian_deviation(&self) -> f64 {
        dense::hermitian_deviation(self.matrix.as_ref())
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// `self - other` on the same box.
    pub fn sub(&self, other: &HermitianOperator) -> Result<HermitianOperator> {
        if self.lattice_box != other.lattice_box {
            return Err(LabError::BoxMismatch("difference of operators on different boxes".into()));
        }
        Ok(Self::from_parts(
            self.lattice_box.clone(),
            &self.matrix - &other.matrix,
            format!("({}) - ({})", self.label, other.label),
        ))
    }

    /// Restriction of `self` to a sub-box, as an operator on that sub-box.
    pub fn sub_box(&self, inner: &LatticeBox) -> Result<HermitianOperator> {
        let idx = self.lattice_box.embedding_of(inner)?;
        Ok(Self::from_parts(
            inner.clone(),
            dense::gather(self.matrix.as_ref(), &idx),
            format!("{}|box{:?}..{:?}", self.label, inner.lo(), inner.hi()),
        ))
    }

    /// Relabels the box by a translation; the matrix is unchanged.
    pub(crate) fn rebox(mut self, lattice_box: LatticeBox) -> Self {
        debug_assert_eq!(lattice_box.site_count(), self.lattice_box.site_count());
        self.lattice_box = lattice_box;
        self
    }
}
