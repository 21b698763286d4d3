use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// Axis-aligned box of lattice sites `lo <= x <= hi` in `Z^d`, `1 <= d <= 3`.
///
/// Sites are indexed in row-major order: the last coordinate varies fastest.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LatticeBox {
    lo: Vec<i64>,
    hi: Vec<i64>,
}

impl LatticeBox {
    pub fn new(lo: Vec<i64>, hi: Vec<i64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() || lo.len() > 3 {
            return Err(LabError::Config(format!(
                "box corners must share a dimension in 1..=3 (got {} and {})",
                lo.len(),
                hi.len()
            )));
        }
        if lo.iter().zip(&hi).any(|(a, b)| a > b) {
            return Err(LabError::Config(format!("empty box {lo:?}..{hi:?}")));
        }
        Ok(Self { lo, hi })
    }

    /// `{lo..=hi}^d`.
    pub fn cube(d: usize, lo: i64, hi: i64) -> Result<Self> {
        Self::new(vec![lo; d], vec![hi; d])
    }

    /// `{-r..=r}^d`.
    pub fn centered(d: usize, r: i64) -> Result<Self> {
        Self::cube(d, -r, r)
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[i64] {
        &self.lo
    }

    pub fn hi(&self) -> &[i64] {
        &self.hi
    }

    pub fn side(&self, axis: usize) -> usize {
        (self.hi[axis] - self.lo[axis] + 1) as usize
    }

    pub fn site_count(&self) -> usize {
        (0..self.dim()).map(|i| self.side(i)).product()
    }

    pub fn contains(&self, site: &[i64]) -> bool {
        site.len() == self.dim()
            && site
                .iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(x, (lo, hi))| lo <= x && x <= hi)
    }

    pub fn index_of(&self, site: &[i64]) -> Option<usize> {
        if !self.contains(site) {
            return None;
        }
        let mut idx = 0usize;
        for (axis, x) in site.iter().enumerate() {
            idx = idx * self.side(axis) + (x - self.lo[axis]) as usize;
        }
        Some(idx)
    }

    pub fn site(&self, mut index: usize) -> Vec<i64> {
        let d = self.dim();
        let mut out = vec![0i64; d];
        for axis in (0..d).rev() {
            let s = self.side(axis);
            out[axis] = self.lo[axis] + (index % s) as i64;
            index /= s;
        }
        out
    }

    pub fn sites(&self) -> impl Iterator<Item = Vec<i64>> + '_ {
        (0..self.site_count()).map(move |i| self.site(i))
    }

    pub fn translated(&self, shift: &[i64]) -> Self {
        Self {
            lo: self.lo.iter().zip(shift).map(|(a, s)| a + s).collect(),
            hi: self.hi.iter().zip(shift).map(|(a, s)| a + s).collect(),
        }
    }

    pub fn is_subset_of(&self, other: &LatticeBox) -> bool {
        self.dim() == other.dim()
            && (0..self.dim()).all(|i| other.lo[i] <= self.lo[i] && self.hi[i] <= other.hi[i])
    }

    /// Indices (in `self`) of the sites of `inner`, in `inner`'s order.
    pub fn embedding_of(&self, inner: &LatticeBox) -> Result<Vec<usize>> {
        if !inner.is_subset_of(self) {
            return Err(LabError::BoxMismatch(format!(
                "{inner:?} is not contained in {self:?}"
            )));
        }
        Ok(inner.sites().map(|s| self.index_of(&s).unwrap()).collect())
    }
}

/// Sup-norm distance between two sites.
pub fn sup_distance(a: &[i64], b: &[i64]) -> i64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).max().unwrap_or(0)
}
