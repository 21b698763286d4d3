use faer::{c64, Mat, MatRef};
use serde::{Deserialize, Serialize};

use super::Region;
use crate::dense;
use crate::error::{LabError, Result};
use crate::lattice_models::{sup_distance, HermitianOperator, LatticeBox};

/// Diagonal 0/1 projection on the sites of a box.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjectionMask {
    lattice_box: LatticeBox,
    bits: Vec<bool>,
}

impl ProjectionMask {
    pub fn new(lattice_box: LatticeBox, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != lattice_box.site_count() {
            return Err(LabError::BoxMismatch("mask length differs from site count".into()));
        }
        Ok(Self { lattice_box, bits })
    }

    pub fn full(lattice_box: &LatticeBox) -> Self {
        Self {
            bits: vec![true; lattice_box.site_count()],
            lattice_box: lattice_box.clone(),
        }
    }

    pub fn empty(lattice_box: &LatticeBox) -> Self {
        Self {
            bits: vec![false; lattice_box.site_count()],
            lattice_box: lattice_box.clone(),
        }
    }

    /// The one-site projection `χ_a`.
    pub fn site(lattice_box: &LatticeBox, a: &[i64]) -> Result<Self> {
        let i = lattice_box.index_of(a).ok_or_else(|| LabError::SiteOutside(a.to_vec()))?;
        let mut m = Self::empty(lattice_box);
        m.bits[i] = true;
        Ok(m)
    }

    pub fn lattice_box(&self) -> &LatticeBox {
        &self.lattice_box
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn indices(&self) -> Vec<usize> {
        (0..self.bits.len()).filter(|&i| self.bits[i]).collect()
    }

    pub fn sites(&self) -> Vec<Vec<i64>> {
        self.indices().into_iter().map(|i| self.lattice_box.site(i)).collect()
    }

    fn same_box(&self, other: &ProjectionMask) -> Result<()> {
        if self.lattice_box != other.lattice_box {
            return Err(LabError::BoxMismatch("masks on different boxes".into()));
        }
        Ok(())
    }

    pub fn and(&self, other: &ProjectionMask) -> Result<ProjectionMask> {
        self.same_box(other)?;
        Ok(Self {
            lattice_box: self.lattice_box.clone(),
            bits: self.bits.iter().zip(&other.bits).map(|(a, b)| *a && *b).collect(),
        })
    }

    pub fn or(&self, other: &ProjectionMask) -> Result<ProjectionMask> {
        self.same_box(other)?;
        Ok(Self {
            lattice_box: self.lattice_box.clone(),
            bits: self.bits.iter().zip(&other.bits).map(|(a, b)| *a || *b).collect(),
        })
    }

    pub fn complement(&self) -> ProjectionMask {
        Self {
            lattice_box: self.lattice_box.clone(),
            bits: self.bits.iter().map(|b| !b).collect(),
        }
    }

    pub fn is_subset_of(&self, other: &ProjectionMask) -> Result<bool> {
        self.same_box(other)?;
        Ok(self.bits.iter().zip(&other.bits).all(|(a, b)| !a || *b))
    }

    pub fn as_weights(&self) -> Vec<f64> {
        self.bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
    }
}

/// Mask of the sites of `lattice_box` satisfying every constraint of `r`.
pub fn region_mask(r: &Region, lattice_box: &LatticeBox) -> Result<ProjectionMask> {
    if r.dim() != lattice_box.dim() {
        return Err(LabError::BoxMismatch(format!(
            "region of dimension {} on a box of dimension {}",
            r.dim(),
            lattice_box.dim()
        )));
    }
    Ok(ProjectionMask {
        bits: lattice_box.sites().map(|s| r.contains(&s)).collect(),
        lattice_box: lattice_box.clone(),
    })
}

/// `χ M χ` on the same box.
pub fn restrict(op: &HermitianOperator, m: &ProjectionMask) -> Result<HermitianOperator> {
    if op.lattice_box() != m.lattice_box() {
        return Err(LabError::BoxMismatch("restriction mask lives on another box".into()));
    }
    let b = m.bits();
    let src = op.matrix();
    let n = op.dim();
    let out = Mat::from_fn(n, n, |i, j| if b[i] && b[j] { src[(i, j)] } else { c64::new(0.0, 0.0) });
    Ok(HermitianOperator::from_parts(
        op.lattice_box().clone(),
        out,
        format!("restrict({})", op.label),
    ))
}

pub fn trace(op: &HermitianOperator) -> c64 {
    trace_matrix(op.matrix())
}

pub fn trace_matrix(m: MatRef<'_, c64>) -> c64 {
    let d: Vec<c64> = (0..m.nrows().min(m.ncols())).map(|i| m[(i, i)]).collect();
    dense::pairwise_sum_c(&d)
}

/// `Tr(W X)` for a diagonal weight `W` given the diagonal of `X`.
pub fn weighted_trace(weights: &[f64], diagonal: &[f64]) -> f64 {
    let t: Vec<f64> = weights.iter().zip(diagonal).map(|(w, x)| w * x).collect();
    dense::pairwise_sum(&t)
}

pub fn singular_values(m: MatRef<'_, c64>) -> Result<Vec<f64>> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Ok(Vec::new());
    }
    m.singular_values().map_err(|_| LabError::EigenFailure)
}

/// `(Σ s_i^p)^{1/p}`, `p > 0`.
pub fn schatten_norm(m: MatRef<'_, c64>, p: f64) -> Result<f64> {
    Ok(schatten_power(m, p)?.powf(1.0 / p))
}

/// `Σ s_i^p = ‖M‖_p^p`.
pub fn schatten_power(m: MatRef<'_, c64>, p: f64) -> Result<f64> {
    if !(p > 0.0) {
        return Err(LabError::Precondition(format!("Schatten exponent must be > 0 (got {p})")));
    }
    let s: Vec<f64> = singular_values(m)?.into_iter().map(|s| s.powf(p)).collect();
    Ok(dense::pairwise_sum(&s))
}

pub fn operator_norm(m: MatRef<'_, c64>) -> Result<f64> {
    Ok(singular_values(m)?.first().copied().unwrap_or(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BlockNorm {
    Operator,
    Schatten(f64),
}

/// `‖χ_a M χ_b‖` with one-site cells: the block is the single entry `M[a][b]`.
pub fn kernel_block_norm(op: &HermitianOperator, a: &[i64], b: &[i64], norm: BlockNorm) -> Result<f64> {
    if let BlockNorm::Schatten(p) = norm {
        if !(p > 0.0) {
            return Err(LabError::Precondition(format!("Schatten exponent must be > 0 (got {p})")));
        }
    }
    Ok(op.entry_at(a, b)?.norm())
}

/// Sites of `outer` having a nearest neighbour in `outer` (inside the box)
/// whose membership in `inner` differs.
pub fn boundary_sites(inner: &ProjectionMask, outer: &ProjectionMask) -> Result<Vec<Vec<i64>>> {
    if !inner.is_subset_of(outer)? {
        return Err(LabError::Precondition("inner region is not contained in the outer region".into()));
    }
    let b = outer.lattice_box();
    let d = b.dim();
    let mut out = Vec::new();
    for (i, site) in b.sites().enumerate() {
        if !outer.bits[i] {
            continue;
        }
        let mut nb = site.clone();
        let on_cut = (0..d).any(|axis| {
            [-1i64, 1].iter().any(|&s| {
                nb.copy_from_slice(&site);
                nb[axis] += s;
                b.index_of(&nb)
                    .is_some_and(|j| outer.bits[j] && inner.bits[j] != inner.bits[i])
            })
        });
        if on_cut {
            out.push(site);
        }
    }
    Ok(out)
}

/// Sup-norm distance from `a` to the boundary of `inner` relative to `outer`
/// (`+∞` when the cut is empty).
pub fn boundary_distance(a: &[i64], inner: &Region, outer: &Region, lattice_box: &LatticeBox) -> Result<f64> {
    let mi = region_mask(inner, lattice_box)?;
    let mo = region_mask(outer, lattice_box)?;
    boundary_distance_masks(a, &mi, &mo)
}

pub fn boundary_distance_masks(a: &[i64], inner: &ProjectionMask, outer: &ProjectionMask) -> Result<f64> {
    Ok(boundary_sites(inner, outer)?
        .iter()
        .map(|s| sup_distance(a, s) as f64)
        .fold(f64::INFINITY, f64::min))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regions_traces::{parse_region, Region};

    fn b1(lo: i64, hi: i64) -> LatticeBox {
        LatticeBox::cube(1, lo, hi).unwrap()
    }

    #[test]
    fn order_mask_on_small_square() {
        let b = LatticeBox::cube(2, 0, 1).unwrap();
        let m = region_mask(&parse_region("order(1<2)", 2).unwrap(), &b).unwrap();
        assert_eq!(m.sites(), vec![vec![0, 0], vec![0, 1], vec![1, 1]]);
        assert_eq!(region_mask(&Region::all(2), &b).unwrap().count(), 4);
    }

    #[test]
    fn permutation_regions_partition_the_cube() {
        let b = LatticeBox::cube(3, 0, 3).unwrap();
        let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        let mut cover = vec![0u32; b.site_count()];
        for p in perms {
            let m = region_mask(&Region::ordered_by(&p).unwrap(), &b).unwrap();
            for (c, &bit) in cover.iter_mut().zip(m.bits()) {
                *c += bit as u32;
            }
        }
        assert!(cover.iter().all(|&c| c == 1));
    }

    #[test]
    fn restrict_cases() {
        let b = b1(0, 2);
        let op = HermitianOperator::from_real(
            b.clone(),
            Mat::from_fn(3, 3, |i, j| (i + j) as f64 + if i == j { 1.0 } else { 0.0 }).as_ref(),
            "m",
        )
        .unwrap();
        assert!(restrict(&op, &ProjectionMask::full(&b)).unwrap().matrix() == op.matrix());
        assert_eq!(dense::max_abs(restrict(&op, &ProjectionMask::empty(&b)).unwrap().matrix()), 0.0);
        let r = restrict(&op, &ProjectionMask::site(&b, &[1]).unwrap()).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let want = if (i, j) == (1, 1) { op.entry(1, 1) } else { c64::new(0.0, 0.0) };
                assert_eq!(r.entry(i, j), want);
            }
        }
    }

    #[test]
    fn norms_of_small_matrices() {
        let op = HermitianOperator::diagonal(b1(0, 1), &[3.0, -4.0], "d").unwrap();
        assert_eq!(trace(&op), c64::new(-1.0, 0.0));
        assert!((schatten_norm(op.matrix(), 1.0).unwrap() - 7.0).abs() < 1e-12);
        assert!((operator_norm(op.matrix()).unwrap() - 4.0).abs() < 1e-12);
        // unitary: a permutation matrix
        let n = 4;
        let u = Mat::from_fn(n, n, |i, j| c64::new(if j == (i + 1) % n { 1.0 } else { 0.0 }, 0.0));
        for p in [0.5, 1.0, 3.0] {
            assert!((schatten_norm(u.as_ref(), p).unwrap() - (n as f64).powf(1.0 / p)).abs() < 1e-12);
        }
        assert!(schatten_norm(u.as_ref(), 0.0).is_err());
    }

    #[test]
    fn kernel_blocks() {
        let b = b1(0, 1);
        let mut m = Mat::<c64>::zeros(2, 2);
        m[(0, 1)] = c64::new(3.0, 4.0);
        m[(1, 0)] = c64::new(3.0, -4.0);
        let op = HermitianOperator::new(b.clone(), m, "k").unwrap();
        assert_eq!(kernel_block_norm(&op, &[0], &[1], BlockNorm::Operator).unwrap(), 5.0);
        assert_eq!(kernel_block_norm(&op, &[0], &[0], BlockNorm::Schatten(1.0)).unwrap(), 0.0);
        let block = Mat::from_fn(1, 1, |_, _| op.entry(0, 1));
        assert_eq!(kernel_block_norm(&op, &[0], &[1], BlockNorm::Schatten(2.0)).unwrap(), schatten_norm(block.as_ref(), 2.0).unwrap());
        assert!(kernel_block_norm(&op, &[0], &[5], BlockNorm::Operator).is_err());
    }

    #[test]
    fn boundary_distance_half_line() {
        let l = 5;
        let b = b1(0, 4 * l);
        let inner = parse_region(&format!("range(1,0,{})", 2 * l), 1).unwrap();
        let outer = parse_region("orthant(1,+)", 1).unwrap();
        assert_eq!(boundary_distance(&[l], &inner, &outer, &b).unwrap(), l as f64);
        assert_eq!(boundary_distance(&[2 * l], &inner, &outer, &b).unwrap(), 0.0);
        assert!(boundary_distance(&[0], &outer, &inner, &b).is_err());
    }
}
