use crate::error::{LabError, Result};
use crate::lattice_models::{apply_symmetry, HermitianOperator, LatticeBox, SymmetryAction};
use crate::regions_traces::{region_mask, Constraint, ProjectionMask, Region, SlotOrder};

use super::constants::{index_vectors, invert, PermutationPartition};

fn check_mn(m: usize, n: usize, d: usize) -> Result<()> {
    if n == 0 || n > m || m > d {
        return Err(LabError::IndexRange(format!("need 1 ≤ n ≤ m ≤ d, got n={n}, m={m}, d={d}")));
    }
    Ok(())
}

/// Region of sites `z` with `z_1 ≺ … ≺ z_n`, `z_t ≺ z_n` for `n < t ≤ m`,
/// `z_i ≥ 0` for `i ≤ m` and `z_i = 0` for `i > m`. Slot `n` carries the
/// largest key among slots `1..=m`, so ties with it count as dominated.
pub fn chi_hat_region(m: usize, n: usize, d: usize) -> Result<Region> {
    check_mn(m, n, d)?;
    let mut keys: Vec<usize> = (0..d).collect();
    for (slot, key) in keys.iter_mut().enumerate().take(m) {
        *key = match slot {
            s if s + 1 < n => s,
            s if s + 1 == n => m - 1,
            s => s - 1,
        };
    }
    let mut c = Vec::new();
    for axis in 0..m {
        c.push(Constraint::Orthant { axis, positive: true });
    }
    for axis in m..d {
        c.push(Constraint::Layer { axis, value: 0 });
    }
    for i in 1..n {
        c.push(Constraint::SlotOrder { first: i - 1, second: i });
    }
    for t in n..m {
        c.push(Constraint::SlotOrder { first: t, second: n - 1 });
    }
    Region::new(d, c)?.with_slot_order(SlotOrder::with_keys(keys)?)
}

pub fn chi_hat_mask(m: usize, n: usize, lattice_box: &LatticeBox) -> Result<ProjectionMask> {
    region_mask(&chi_hat_region(m, n, lattice_box.dim())?, lattice_box)
}

/// Tie-averaged version of the `χ̂_{m,n}` indicator: the mean, over every
/// ordered choice of `n` leading axes and every increasing choice of `m-n`
/// dominated axes, of the keyed indicator with keys equal to the axis
/// labels. Agrees with [`chi_hat_mask`] away from coordinate ties.
pub fn chi_hat_weight(m: usize, n: usize, z: &[i64]) -> f64 {
    let d = z.len();
    if z[..m].iter().any(|&v| v < 0) || z[m..].iter().any(|&v| v != 0) {
        return 0.0;
    }
    let mut hits = 0usize;
    let mut total = 0usize;
    for l in 0..d {
        for k in index_vectors(d, n - 1, l) {
            let mut head = k;
            head.push(l);
            let rest: Vec<usize> = (0..d).filter(|a| !head.contains(a)).collect();
            for sub in subsets(&rest, m - n) {
                total += 1;
                let key = |slot: usize| if slot < n { head[slot] } else { sub[slot - n] };
                let lt = |i: usize, j: usize| (z[i], key(i)) < (z[j], key(j));
                if (1..n).all(|i| lt(i - 1, i)) && (n..m).all(|t| lt(t, n - 1)) {
                    hits += 1;
                }
            }
        }
    }
    hits as f64 / total as f64
}

pub fn chi_hat_weights(m: usize, n: usize, lattice_box: &LatticeBox) -> Result<Vec<f64>> {
    check_mn(m, n, lattice_box.dim())?;
    Ok(lattice_box.sites().map(|z| chi_hat_weight(m, n, &z)).collect())
}

/// Increasing `size`-subsets of `items`.
pub fn subsets(items: &[usize], size: usize) -> Vec<Vec<usize>> {
    if size == 0 {
        return vec![vec![]];
    }
    if items.len() < size {
        return vec![];
    }
    let mut out: Vec<Vec<usize>> = subsets(&items[1..], size - 1)
        .into_iter()
        .map(|mut s| {
            s.insert(0, items[0]);
            s
        })
        .collect();
    out.extend(subsets(&items[1..], size));
    out
}

/// Strict order of coordinate slots keyed by axis label: `x_i ≺ x_j` iff
/// `(x_i, i) < (x_j, j)`. Returns the axes sorted by it.
pub fn axis_order(x: &[i64]) -> Vec<usize> {
    let mut axes: Vec<usize> = (0..x.len()).collect();
    axes.sort_by_key(|&a| (x[a], a));
    axes
}

/// Compares, site by site on `{0..side-1}^d`, the transported sum of wedge
/// indicators over one permutation block with its inclusion–exclusion
/// expansion. Returns the largest integer discrepancy.
pub fn inclusion_exclusion_check(n: usize, l: usize, k: &[usize], side: i64, d: usize) -> Result<i64> {
    let part = PermutationPartition::new(d, n)?;
    let block = part
        .blocks
        .iter()
        .find(|b| b.l == l && b.k == k)
        .ok_or_else(|| LabError::IndexRange(format!("no block with l={l}, k={k:?} for n={n}, d={d}")))?;
    let pi0_inv = invert(&block.pi0);
    let cube = LatticeBox::cube(d, 0, side - 1)?;
    let mut worst = 0i64;
    for y in cube.sites() {
        // Frame slot j carries original axis π₀^{-1}(j).
        let mut x = vec![0; d];
        for j in 0..d {
            x[pi0_inv[j]] = y[j];
        }
        let sorted = axis_order(&x);
        let lhs = block.members.iter().filter(|p| **p == sorted).count() as i64;

        let lt = |i: usize, j: usize| (y[i], pi0_inv[i]) < (y[j], pi0_inv[j]);
        let mut rhs = 0i64;
        if (1..n).all(|i| lt(i - 1, i)) {
            let tail: Vec<usize> = (n..d).collect();
            for j in 0..=d - n {
                for mset in subsets(&tail, j) {
                    if mset.iter().all(|&t| lt(t, n - 1)) {
                        rhs += if j % 2 == 0 { 1 } else { -1 };
                    }
                }
            }
        }
        worst = worst.max((lhs - rhs).abs());
    }
    Ok(worst)
}

/// Checks `Σ_π Σ_n Tr(χ_π {f_{n,π} - f_{n-1,π}}) = Tr(χ {f_d - f_0})` over
/// `probe`, where `χ_π` are the keyed wedges `x_{π(1)} ≺ … ≺ x_{π(d)}` and
/// `f_{n,π} = U_π f_n U_π^*` for `0 < n < d`. Inputs live on a common cube.
pub fn telescoping_check(f: &[HermitianOperator], probe: &ProjectionMask) -> Result<f64> {
    let b = probe.lattice_box();
    let d = b.dim();
    if f.len() != d + 1 {
        return Err(LabError::Precondition(format!("need {} operators, got {}", d + 1, f.len())));
    }
    if f.iter().any(|op| op.lattice_box() != b) {
        return Err(LabError::BoxMismatch("telescoping family and probe".into()));
    }
    let perms: Vec<Vec<usize>> = PermutationPartition::new(d, d)?
        .blocks
        .into_iter()
        .flat_map(|blk| blk.members)
        .collect();
    let mut scale = 0.0f64;
    let mut lhs = 0.0;
    for pi in &perms {
        let diag: Vec<Vec<f64>> = (0..=d)
            .map(|n| {
                if n == 0 || n == d {
                    Ok(f[n].diagonal_values())
                } else {
                    Ok(apply_symmetry(&f[n], &SymmetryAction::Permute(pi.clone()))?.diagonal_values())
                }
            })
            .collect::<Result<_>>()?;
        for i in probe.indices() {
            if axis_order(&b.site(i)) != *pi {
                continue;
            }
            for n in 1..=d {
                lhs += diag[n][i] - diag[n - 1][i];
                scale = scale.max(diag[n][i].abs());
            }
        }
    }
    let (fd, f0) = (f[d].diagonal_values(), f[0].diagonal_values());
    let rhs: f64 = probe.indices().iter().map(|&i| fd[i] - f0[i]).sum();
    Ok((lhs - rhs).abs() / scale.max(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mask_examples() {
        let b = LatticeBox::cube(1, -3, 3).unwrap();
        let m = chi_hat_mask(1, 1, &b).unwrap();
        assert_eq!(m.sites(), (0..=3).map(|x| vec![x]).collect::<Vec<_>>());

        let b2 = LatticeBox::cube(2, 0, 2).unwrap();
        let m = chi_hat_mask(2, 1, &b2).unwrap();
        let expect: Vec<Vec<i64>> = vec![vec![0, 0], vec![1, 0], vec![1, 1], vec![2, 0], vec![2, 1], vec![2, 2]];
        assert_eq!(m.sites(), expect);

        let b3 = LatticeBox::centered(2, 2).unwrap();
        let m = chi_hat_mask(1, 1, &b3).unwrap();
        assert!(m.sites().iter().all(|s| s[0] >= 0 && s[1] == 0));
        assert_eq!(m.count(), 3);
        assert!(chi_hat_mask(1, 2, &b3).is_err());
    }

    #[test]
    fn weights_match_mask_off_ties() {
        for d in 1..=3usize {
            let b = LatticeBox::cube(d, -1, 3).unwrap();
            for m in 1..=d {
                for n in 1..=m {
                    let w = chi_hat_weights(m, n, &b).unwrap();
                    let mask = chi_hat_mask(m, n, &b).unwrap();
                    for (i, s) in b.sites().enumerate() {
                        let mut head = s[..m].to_vec();
                        head.sort();
                        head.dedup();
                        if head.len() == m {
                            assert_eq!(w[i], if mask.bits()[i] { 1.0 } else { 0.0 }, "{s:?} m={m} n={n}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn tie_weights_d2() {
        // m = 2, n = 1 at a tie: one of the two axis labellings dominates.
        assert_eq!(chi_hat_weight(2, 1, &[1, 1]), 0.5);
        // m = n = 2 at a tie likewise.
        assert_eq!(chi_hat_weight(2, 2, &[0, 0]), 0.5);
        assert_eq!(chi_hat_weight(1, 1, &[0, 0]), 1.0);
    }

    #[test]
    fn inclusion_exclusion_small() {
        assert_eq!(inclusion_exclusion_check(1, 0, &[], 4, 1).unwrap(), 0);
        for l in 0..2 {
            assert_eq!(inclusion_exclusion_check(1, l, &[], 3, 2).unwrap(), 0);
        }
        assert!(inclusion_exclusion_check(2, 0, &[0], 3, 2).is_err());
    }

    #[test]
    fn subsets_enumerate() {
        assert_eq!(subsets(&[1, 2, 3], 2), vec![vec![1, 2], vec![1, 3], vec![2, 3]]);
        assert_eq!(subsets(&[1], 0), vec![Vec::<usize>::new()]);
    }
}
