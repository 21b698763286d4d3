use num_rational::Rational64;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

fn factorial(n: usize) -> i64 {
    (1..=n as i64).product()
}

fn check_dim(d: usize) -> Result<()> {
    if !(1..=3).contains(&d) {
        return Err(LabError::IndexRange(format!("dimension {d} outside 1..=3")));
    }
    Ok(())
}

/// Combinatorial constants of the expansion, indexed `[m][n]` for
/// `0 ≤ n ≤ m ≤ d` (entries with `n > m` are zero).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CombConstants {
    pub d: usize,
    /// `c_{m,n} = (-1)^{m-n} 2^m d! / ((m-n)! (d-m)!)`.
    pub c: Vec<Vec<Rational64>>,
    /// `d! / ((-1)^{m-n} 2^m n! (m-n)! (d-m)!)`, the partition-free weights
    /// with the power of two in the denominator.
    pub c_tilde_printed: Vec<Vec<Rational64>>,
    /// `c_{m,n} / n!`, the same weights derived from `c`.
    pub c_tilde_recurrence: Vec<Vec<Rational64>>,
}

pub fn comb_constants(d: usize) -> Result<CombConstants> {
    check_dim(d)?;
    let df = factorial(d);
    let zero = vec![vec![Rational64::from_integer(0); d + 1]; d + 1];
    let (mut c, mut printed, mut rec) = (zero.clone(), zero.clone(), zero);
    for m in 0..=d {
        for n in 0..=m {
            let sign = if (m - n) % 2 == 0 { 1 } else { -1 };
            let cm = Rational64::new(sign * (1 << m) * df, factorial(m - n) * factorial(d - m));
            c[m][n] = cm;
            printed[m][n] = Rational64::new(df, sign * (1 << m) * factorial(n) * factorial(m - n) * factorial(d - m));
            rec[m][n] = cm / factorial(n);
        }
    }
    Ok(CombConstants {
        d,
        c,
        c_tilde_printed: printed,
        c_tilde_recurrence: rec,
    })
}

impl CombConstants {
    /// Checks `c[m][n+1] = -(m-n) c[m][n]` exactly; returns the offending
    /// `(m, n)` pairs.
    pub fn recurrence_violations(&self) -> Vec<(usize, usize)> {
        let mut bad = Vec::new();
        for m in 0..=self.d {
            for n in 0..m {
                if self.c[m][n + 1] != -Rational64::from_integer((m - n) as i64) * self.c[m][n] {
                    bad.push((m, n));
                }
            }
        }
        bad
    }
}

pub fn to_f64(r: &Rational64) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Rationals serialized as `"p/q"` strings.
pub fn rational_strings(t: &[Vec<Rational64>]) -> Vec<Vec<String>> {
    t.iter().map(|row| row.iter().map(|r| r.to_string()).collect()).collect()
}

/// One block `{π : (π(1), …, π(n)) = (k_1, …, k_{n-1}, l)}` of the
/// permutation group. Axes are 0-based; a permutation `π` is stored as the
/// vector `(π(0), …, π(d-1))`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PermutationBlock {
    pub n: usize,
    pub l: usize,
    pub k: Vec<usize>,
    pub members: Vec<Vec<usize>>,
    /// Representative `π₀` with `π₀^{-1}` in the block: the lexicographically
    /// smallest such permutation.
    pub pi0: Vec<usize>,
}

impl PermutationBlock {
    /// `(k_1, …, k_{n-1}, l)`.
    pub fn head(&self) -> Vec<usize> {
        let mut h = self.k.clone();
        h.push(self.l);
        h
    }

    /// Axes not in the head, increasing.
    pub fn rest(&self, d: usize) -> Vec<usize> {
        let head = self.head();
        (0..d).filter(|a| !head.contains(a)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PermutationPartition {
    pub d: usize,
    pub n: usize,
    pub blocks: Vec<PermutationBlock>,
}

fn permutations(d: usize) -> Vec<Vec<usize>> {
    index_vectors(d, d, usize::MAX)
}

pub fn invert(p: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; p.len()];
    for (i, &pi) in p.iter().enumerate() {
        inv[pi] = i;
    }
    inv
}

/// Ordered tuples of `len` distinct axes from `0..d` avoiding `skip`.
pub fn index_vectors(d: usize, len: usize, skip: usize) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = vec![vec![]];
    for _ in 0..len {
        let mut next = Vec::new();
        for v in &out {
            for a in (0..d).filter(|a| *a != skip && !v.contains(a)) {
                let mut w = v.clone();
                w.push(a);
                next.push(w);
            }
        }
        out = next;
    }
    out
}

impl PermutationPartition {
    pub fn new(d: usize, n: usize) -> Result<Self> {
        check_dim(d)?;
        if n == 0 || n > d {
            return Err(LabError::IndexRange(format!("n = {n} outside 1..={d}")));
        }
        let all = permutations(d);
        let mut blocks = Vec::new();
        for l in 0..d {
            for k in index_vectors(d, n - 1, l) {
                let mut head = k.clone();
                head.push(l);
                let members: Vec<Vec<usize>> = all.iter().filter(|p| p[..n] == head[..]).cloned().collect();
                let pi0 = all
                    .iter()
                    .find(|p| invert(p)[..n] == head[..])
                    .cloned()
                    .expect("block is nonempty");
                blocks.push(PermutationBlock { n, l, k, members, pi0 });
            }
        }
        Ok(Self { d, n, blocks })
    }

    /// The block containing `π`.
    pub fn block_of(&self, pi: &[usize]) -> Option<&PermutationBlock> {
        self.blocks.iter().find(|b| b.members.iter().any(|m| m == pi))
    }

    /// Checks that the blocks are disjoint and cover the group exactly.
    pub fn is_exact_cover(&self) -> bool {
        let mut seen: Vec<&Vec<usize>> = self.blocks.iter().flat_map(|b| &b.members).collect();
        let total = seen.len();
        seen.sort();
        seen.dedup();
        total == factorial(self.d) as usize && seen.len() == total
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(p: i64, q: i64) -> Rational64 {
        Rational64::new(p, q)
    }

    #[test]
    fn c_values() {
        let t = comb_constants(2).unwrap();
        assert_eq!(t.c[1][1], r(4, 1));
        assert_eq!(t.c[2][1], r(-8, 1));
        assert_eq!(t.c[2][2], r(8, 1));
        let t1 = comb_constants(1).unwrap();
        assert_eq!(t1.c[1][1], r(2, 1));
        assert_eq!(t1.c_tilde_printed[1][0], r(-1, 2));
        assert_eq!(t1.c_tilde_recurrence[1][0], r(-2, 1));
        assert!(comb_constants(4).is_err());
    }

    #[test]
    fn recurrence_exact() {
        for d in 1..=3 {
            assert!(comb_constants(d).unwrap().recurrence_violations().is_empty());
        }
    }

    #[test]
    fn variants_differ_by_four_to_the_m() {
        let t = comb_constants(3).unwrap();
        for m in 0..=3 {
            for n in 0..=m {
                assert_eq!(t.c_tilde_recurrence[m][n], t.c_tilde_printed[m][n] * r(1 << (2 * m), 1));
            }
        }
    }

    #[test]
    fn partition_covers_group() {
        for d in 1..=3 {
            for n in 1..=d {
                let p = PermutationPartition::new(d, n).unwrap();
                assert!(p.is_exact_cover());
                for b in &p.blocks {
                    assert!(b.members.iter().all(|m| m[..n] == b.head()[..]));
                    assert_eq!(invert(&b.pi0)[..n], b.head()[..]);
                }
            }
        }
    }

    #[test]
    fn pi0_is_lexicographically_smallest() {
        let p = PermutationPartition::new(3, 1).unwrap();
        let b = p.blocks.iter().find(|b| b.l == 2).unwrap();
        // π₀^{-1}(0) = 2 with the remaining slots filled increasingly.
        assert_eq!(invert(&b.pi0), vec![2, 0, 1]);
        assert_eq!(b.pi0, vec![1, 2, 0]);
    }
}
