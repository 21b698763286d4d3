use serde::{Deserialize, Serialize};

use super::{HermitianOperator, LatticeBox};
use crate::dense;
use crate::error::{LabError, Result};

/// Measure-preserving lattice transformations acting on operators by
/// conjugation with the corresponding site permutation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum SymmetryAction {
    /// `M'(x, y) = M(x - j, y - j)`; the box moves by `j`.
    Translate(Vec<i64>),
    /// `M'(x, y) = M(x_π, y_π)` with `(x_π)_i = x_{π(i)}` (0-based `π`).
    Permute(Vec<usize>),
    /// `x_i -> -x_i` on the axes with `σ_i` set.
    Reflect(Vec<bool>),
}

impl SymmetryAction {
    pub fn inverse(&self) -> SymmetryAction {
        match self {
            Self::Translate(j) => Self::Translate(j.iter().map(|x| -x).collect()),
            Self::Permute(p) => {
                let mut inv = vec![0; p.len()];
                for (i, &pi) in p.iter().enumerate() {
                    inv[pi] = i;
                }
                Self::Permute(inv)
            }
            Self::Reflect(s) => Self::Reflect(s.clone()),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Self::Translate(j) => format!("translate{j:?}"),
            Self::Permute(p) => format!("permute{p:?}"),
            Self::Reflect(s) => format!(
                "reflect[{}]",
                s.iter().map(|&b| if b { '1' } else { '0' }).collect::<String>()
            ),
        }
    }

    fn check_dim(&self, d: usize) -> Result<()> {
        let ok = match self {
            Self::Translate(j) => j.len() == d,
            Self::Permute(p) => {
                let mut seen = vec![false; d];
                p.len() == d && p.iter().all(|&i| i < d && !std::mem::replace(&mut seen[i], true))
            }
            Self::Reflect(s) => s.len() == d,
        };
        if ok {
            Ok(())
        } else {
            Err(LabError::Precondition(format!("{} is not an action on Z^{d}", self.describe())))
        }
    }

    /// Site `x` of the source that lands on site `y` of the image, for the
    /// non-translating actions.
    fn pull_back(&self, y: &[i64]) -> Vec<i64> {
        match self {
            Self::Translate(j) => y.iter().zip(j).map(|(a, b)| a - b).collect(),
            Self::Permute(p) => p.iter().map(|&i| y[i]).collect(),
            Self::Reflect(s) => y.iter().zip(s).map(|(&a, &f)| if f { -a } else { a }).collect(),
        }
    }
}

/// Conjugates `op` by the site permutation of `action`.
pub fn apply_symmetry(op: &HermitianOperator, action: &SymmetryAction) -> Result<HermitianOperator> {
    let b = op.lattice_box();
    action.check_dim(b.dim())?;
    let label = format!("{} |> {}", op.label, action.describe());
    if let SymmetryAction::Translate(j) = action {
        let lo: Vec<i64> = b.lo().iter().zip(j).map(|(a, s)| a.checked_add(*s)).collect::<Option<_>>()
            .ok_or_else(|| LabError::Precondition("translation overflows the index range".into()))?;
        let hi: Vec<i64> = b.hi().iter().zip(j).map(|(a, s)| a.checked_add(*s)).collect::<Option<_>>()
            .ok_or_else(|| LabError::Precondition("translation overflows the index range".into()))?;
        return Ok(op.clone().rebox(LatticeBox::new(lo, hi)?).with_label(label));
    }
    let invariant = match action {
        SymmetryAction::Permute(p) => p.iter().enumerate().all(|(i, &pi)| b.lo()[i] == b.lo()[pi] && b.hi()[i] == b.hi()[pi]),
        SymmetryAction::Reflect(s) => s.iter().enumerate().all(|(i, &f)| !f || b.lo()[i] == -b.hi()[i]),
        SymmetryAction::Translate(_) => unreachable!(),
    };
    if !invariant {
        return Err(LabError::NotInvariant(action.describe()));
    }
    let src: Vec<usize> = b
        .sites()
        .map(|y| b.index_of(&action.pull_back(&y)).expect("box is invariant"))
        .collect();
    Ok(HermitianOperator::from_parts(
        b.clone(),
        dense::gather(op.matrix(), &src),
        label,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice_models::{build_operator, EnsembleSpec};

    #[test]
    fn reflect_diagonal() {
        let b = LatticeBox::centered(1, 1).unwrap();
        let op = HermitianOperator::diagonal(b, &[1.0, 2.0, 3.0], "d").unwrap();
        let r = apply_symmetry(&op, &SymmetryAction::Reflect(vec![true])).unwrap();
        assert_eq!(r.diagonal_values(), vec![3.0, 2.0, 1.0]);
    }

    #[test]
    fn identity_permutation() {
        let b = LatticeBox::centered(2, 2).unwrap();
        let op = build_operator(&EnsembleSpec::anderson(3.0, 1), &b, 5).unwrap();
        let p = apply_symmetry(&op, &SymmetryAction::Permute(vec![0, 1])).unwrap();
        assert!(p.matrix() == op.matrix());
    }

    #[test]
    fn permutation_moves_potential() {
        let b = LatticeBox::cube(2, 0, 2).unwrap();
        let spec = EnsembleSpec::anderson(1.0, 3);
        let op = build_operator(&spec, &b, 0).unwrap();
        let p = apply_symmetry(&op, &SymmetryAction::Permute(vec![1, 0])).unwrap();
        assert_eq!(p.entry_at(&[0, 2], &[0, 2]).unwrap(), op.entry_at(&[2, 0], &[2, 0]).unwrap());
    }

    #[test]
    fn translate_moves_box_only() {
        let b = LatticeBox::cube(2, 0, 1).unwrap();
        let op = build_operator(&EnsembleSpec::anderson(1.0, 3), &b, 0).unwrap();
        let t = apply_symmetry(&op, &SymmetryAction::Translate(vec![2, -1])).unwrap();
        assert_eq!(t.lattice_box().lo(), &[2, -1]);
        assert_eq!(t.entry_at(&[3, 0], &[3, 0]).unwrap(), op.entry_at(&[1, 1], &[1, 1]).unwrap());
    }

    #[test]
    fn refuses_non_invariant_box() {
        let op = HermitianOperator::zeros(LatticeBox::new(vec![0, 0], vec![1, 2]).unwrap(), "z");
        assert!(matches!(
            apply_symmetry(&op, &SymmetryAction::Permute(vec![1, 0])),
            Err(LabError::NotInvariant(_))
        ));
        assert!(matches!(
            apply_symmetry(&op, &SymmetryAction::Reflect(vec![true, false])),
            Err(LabError::NotInvariant(_))
        ));
    }

    #[test]
    fn inverse_roundtrip() {
        let b = LatticeBox::centered(3, 1).unwrap();
        let op = build_operator(&EnsembleSpec::anderson(2.0, 11), &b, 2).unwrap();
        for a in [
            SymmetryAction::Permute(vec![2, 0, 1]),
            SymmetryAction::Reflect(vec![true, false, true]),
            SymmetryAction::Translate(vec![1, -4, 0]),
        ] {
            let back = apply_symmetry(&apply_symmetry(&op, &a).unwrap(), &a.inverse()).unwrap();
            assert_eq!(back.lattice_box(), op.lattice_box());
            assert!(back.matrix() == op.matrix(), "{a:?}");
        }
    }
}
