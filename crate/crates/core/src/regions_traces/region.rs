use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::lattice_models::LatticeBox;

/// Atomic constraints. Axes are 0-based internally and 1-based in the text
/// grammar.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Constraint {
    /// `lo <= x_axis <= hi`, either side optional.
    CoordRange { axis: usize, lo: Option<i64>, hi: Option<i64> },
    /// `x_axis >= 0` if `positive`, else `x_axis < 0`.
    Orthant { axis: usize, positive: bool },
    /// `x_axis = value`.
    Layer { axis: usize, value: i64 },
    /// Slot `first` strictly precedes slot `second` in the slot order.
    SlotOrder { first: usize, second: usize },
}

/// Strict total order on the coordinate slots of a site:
/// `x_i ≺ x_j` iff `(x_i, key_i) < (x_j, key_j)` lexicographically.
/// The default keys are the slot indices themselves.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SlotOrder {
    keys: Vec<usize>,
}

impl SlotOrder {
    pub fn identity(d: usize) -> Self {
        Self { keys: (0..d).collect() }
    }

    /// Keys must be a permutation of `0..d`.
    pub fn with_keys(keys: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; keys.len()];
        for &k in &keys {
            if k >= keys.len() || std::mem::replace(&mut seen[k], true) {
                return Err(LabError::Precondition(format!("slot keys {keys:?} are not a permutation")));
            }
        }
        Ok(Self { keys })
    }

    pub fn keys(&self) -> &[usize] {
        &self.keys
    }

    pub fn cmp(&self, site: &[i64], i: usize, j: usize) -> Ordering {
        (site[i], self.keys[i]).cmp(&(site[j], self.keys[j]))
    }

    pub fn precedes(&self, site: &[i64], i: usize, j: usize) -> bool {
        self.cmp(site, i, j) == Ordering::Less
    }
}

/// Conjunction of constraints, kept canonically sorted and deduplicated.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Region {
    dim: usize,
    constraints: Vec<Constraint>,
    order: SlotOrder,
}

impl Region {
    pub fn all(dim: usize) -> Self {
        Self {
            dim,
            constraints: Vec::new(),
            order: SlotOrder::identity(dim),
        }
    }

    pub fn new(dim: usize, constraints: Vec<Constraint>) -> Result<Self> {
        let mut r = Self::all(dim);
        for c in constraints {
            r = r.and(c)?;
        }
        Ok(r)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn slot_order(&self) -> &SlotOrder {
        &self.order
    }

    pub fn with_slot_order(mut self, order: SlotOrder) -> Result<Self> {
        if order.keys().len() != self.dim {
            return Err(LabError::Precondition("slot order dimension mismatch".into()));
        }
        self.order = order;
        Ok(self)
    }

    pub fn and(mut self, c: Constraint) -> Result<Self> {
        let axes_ok = match &c {
            Constraint::CoordRange { axis, .. } | Constraint::Orthant { axis, .. } | Constraint::Layer { axis, .. } => {
                *axis < self.dim
            }
            Constraint::SlotOrder { first, second } => *first < self.dim && *second < self.dim && first != second,
        };
        if !axes_ok {
            return Err(LabError::Config(format!("constraint {c:?} does not fit dimension {}", self.dim)));
        }
        if let Err(pos) = self.constraints.binary_search(&c) {
            self.constraints.insert(pos, c);
        }
        Ok(self)
    }

    pub fn intersect(mut self, other: &Region) -> Result<Self> {
        if other.dim != self.dim || other.order != self.order {
            return Err(LabError::Precondition("intersection of incompatible regions".into()));
        }
        for c in &other.constraints {
            self = self.and(c.clone())?;
        }
        Ok(self)
    }

    /// `x_{π(0)} ≺ x_{π(1)} ≺ … ≺ x_{π(d-1)}`.
    pub fn ordered_by(perm: &[usize]) -> Result<Self> {
        let d = perm.len();
        let mut r = Self::all(d);
        for w in perm.windows(2) {
            r = r.and(Constraint::SlotOrder {
                first: w[0],
                second: w[1],
            })?;
        }
        Ok(r)
    }

    pub fn contains(&self, site: &[i64]) -> bool {
        site.len() == self.dim
            && self.constraints.iter().all(|c| match *c {
                Constraint::CoordRange { axis, lo, hi } => {
                    lo.is_none_or(|l| site[axis] >= l) && hi.is_none_or(|h| site[axis] <= h)
                }
                Constraint::Orthant { axis, positive } => (site[axis] >= 0) == positive,
                Constraint::Layer { axis, value } => site[axis] == value,
                Constraint::SlotOrder { first, second } => self.order.precedes(site, first, second),
            })
    }

    /// Decides satisfiability over a box by enumeration.
    pub fn is_satisfiable_in(&self, lattice_box: &LatticeBox) -> bool {
        lattice_box.sites().any(|s| self.contains(&s))
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.constraints.is_empty() {
            return write!(f, "all");
        }
        let parts: Vec<String> = self
            .constraints
            .iter()
            .map(|c| match *c {
                Constraint::CoordRange { axis, lo, hi } => {
                    let b = |v: Option<i64>| v.map_or("*".to_string(), |x| x.to_string());
                    format!("range({},{},{})", axis + 1, b(lo), b(hi))
                }
                Constraint::Orthant { axis, positive } => {
                    format!("orthant({},{})", axis + 1, if positive { '+' } else { '-' })
                }
                Constraint::Layer { axis, value } => format!("layer({},{value})", axis + 1),
                Constraint::SlotOrder { first, second } => format!("order({}<{})", first + 1, second + 1),
            })
            .collect();
        write!(f, "{}", parts.join(" & "))
    }
}

/// Parses `orthant(1,+) & layer(3,0) & order(1<2) & range(2,0,*)` (or `all`)
/// for a region in dimension `dim`.
pub fn parse_region(src: &str, dim: usize) -> Result<Region> {
    let err = |m: String| LabError::Config(format!("region `{src}`: {m}"));
    let trimmed = src.trim();
    let mut r = Region::all(dim);
    if trimmed.is_empty() || trimmed == "all" {
        return Ok(r);
    }
    for term in trimmed.split('&') {
        let term = term.trim();
        let open = term.find('(').ok_or_else(|| err(format!("missing `(` in `{term}`")))?;
        if !term.ends_with(')') {
            return Err(err(format!("missing `)` in `{term}`")));
        }
        let name = term[..open].trim();
        let args: Vec<&str> = term[open + 1..term.len() - 1].split(',').map(str::trim).collect();
        let axis = |s: &str| -> Result<usize> {
            let a: usize = s.parse().map_err(|_| err(format!("bad axis `{s}`")))?;
            if a == 0 || a > dim {
                return Err(err(format!("axis {a} outside 1..={dim}")));
            }
            Ok(a - 1)
        };
        let int = |s: &str| -> Result<i64> { s.parse().map_err(|_| err(format!("bad integer `{s}`"))) };
        let c = match (name, args.as_slice()) {
            ("orthant", [a, s]) => Constraint::Orthant {
                axis: axis(a)?,
                positive: match *s {
                    "+" => true,
                    "-" => false,
                    _ => return Err(err(format!("orthant sign must be + or -, got `{s}`"))),
                },
            },
            ("layer", [a, v]) => Constraint::Layer {
                axis: axis(a)?,
                value: int(v)?,
            },
            ("range", [a, lo, hi]) => {
                let bound = |s: &str| -> Result<Option<i64>> { if s == "*" { Ok(None) } else { int(s).map(Some) } };
                Constraint::CoordRange {
                    axis: axis(a)?,
                    lo: bound(lo)?,
                    hi: bound(hi)?,
                }
            }
            ("order", [spec]) => {
                let (i, j) = spec
                    .split_once('<')
                    .ok_or_else(|| err(format!("order needs `i<j`, got `{spec}`")))?;
                Constraint::SlotOrder {
                    first: axis(i.trim())?,
                    second: axis(j.trim())?,
                }
            }
            _ => return Err(err(format!("unrecognised term `{term}`"))),
        };
        r = r.and(c)?;
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_order_and_dedup() {
        let a = parse_region("order(1<2) & orthant(1,+) & orthant(1,+)", 2).unwrap();
        let b = parse_region("orthant(1,+) & order(1<2)", 2).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.constraints().len(), 2);
    }

    #[test]
    fn grammar_roundtrip() {
        let src = "range(1,0,*) & orthant(1,+) & orthant(2,-) & layer(3,0) & order(1<2)";
        let r = parse_region(src, 3).unwrap();
        assert_eq!(parse_region(&r.to_string(), 3).unwrap(), r);
        assert!(parse_region("orthant(4,+)", 3).is_err());
        assert!(parse_region("order(1<1)", 2).is_err());
        assert!(parse_region("blob(1)", 2).is_err());
        assert_eq!(parse_region("all", 2).unwrap(), Region::all(2));
    }

    #[test]
    fn slot_order_is_strict_total() {
        let o = SlotOrder::identity(3);
        let site = [2, 2, 1];
        assert!(o.precedes(&site, 2, 0));
        assert!(o.precedes(&site, 0, 1));
        assert!(!o.precedes(&site, 1, 0));
        assert!(!o.precedes(&site, 0, 0));
        let k = SlotOrder::with_keys(vec![1, 0, 2]).unwrap();
        assert!(k.precedes(&site, 1, 0));
        assert!(SlotOrder::with_keys(vec![0, 0, 1]).is_err());
    }
}
