use faer::{c64, Mat};
use serde::{Deserialize, Serialize};

use super::{HermitianOperator, LatticeBox, Symbol1D};
use crate::error::{LabError, Result};

/// Default cap on the number of sites of a single dense realization.
pub const DEFAULT_MAX_SITES: usize = 6000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum EnsembleKind {
    /// i.i.d. potential, uniform on `[-W/2, W/2]`.
    Anderson { w: f64 },
    /// `V(x) = cell[(x + offset) mod period]`, cell stored row-major.
    Periodic {
        potential_cell: Vec<f64>,
        period: Vec<i64>,
        offset: Vec<i64>,
    },
    Free,
    Toeplitz1d { symbol: Symbol1D },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub kind: EnsembleKind,
    pub hopping: f64,
    pub seed: u64,
}

impl EnsembleSpec {
    pub fn free() -> Self {
        Self {
            kind: EnsembleKind::Free,
            hopping: 1.0,
            seed: 0,
        }
    }

    pub fn anderson(w: f64, seed: u64) -> Self {
        Self {
            kind: EnsembleKind::Anderson { w },
            hopping: 1.0,
            seed,
        }
    }

    pub fn periodic(potential_cell: Vec<f64>, period: Vec<i64>) -> Self {
        let offset = vec![0; period.len()];
        Self {
            kind: EnsembleKind::Periodic {
                potential_cell,
                period,
                offset,
            },
            hopping: 1.0,
            seed: 0,
        }
    }

    pub fn toeplitz1d(symbol: Symbol1D) -> Self {
        Self {
            kind: EnsembleKind::Toeplitz1d { symbol },
            hopping: 1.0,
            seed: 0,
        }
    }

    pub fn with_hopping(mut self, hopping: f64) -> Self {
        self.hopping = hopping;
        self
    }

    /// True when realizations do not depend on the sample id.
    pub fn is_deterministic(&self) -> bool {
        !matches!(self.kind, EnsembleKind::Anderson { w } if w != 0.0)
    }

    pub fn name(&self) -> String {
        match &self.kind {
            EnsembleKind::Anderson { w } => format!("anderson(W={w})"),
            EnsembleKind::Periodic { period, .. } => format!("periodic(period={period:?})"),
            EnsembleKind::Free => "free".into(),
            EnsembleKind::Toeplitz1d { .. } => "toeplitz1d".into(),
        }
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        if !self.hopping.is_finite() {
            return Err(LabError::InvalidEnsemble("hopping must be finite".into()));
        }
        match &self.kind {
            EnsembleKind::Anderson { w } => {
                if !(w.is_finite() && *w >= 0.0) {
                    return Err(LabError::InvalidEnsemble(format!("disorder W = {w} must be >= 0")));
                }
            }
            EnsembleKind::Periodic {
                potential_cell,
                period,
                offset,
            } => {
                if period.len() != d || offset.len() != d {
                    return Err(LabError::InvalidEnsemble(format!(
                        "period and offset need {d} components"
                    )));
                }
                if period.iter().any(|&p| p < 1) {
                    return Err(LabError::InvalidEnsemble("period must be >= 1 in each coordinate".into()));
                }
                let cell: i64 = period.iter().product();
                if potential_cell.len() as i64 != cell {
                    return Err(LabError::InvalidEnsemble(format!(
                        "potential cell has {} values, period needs {cell}",
                        potential_cell.len()
                    )));
                }
                if potential_cell.iter().any(|v| !v.is_finite()) {
                    return Err(LabError::InvalidEnsemble("non-finite potential".into()));
                }
            }
            EnsembleKind::Free => {}
            EnsembleKind::Toeplitz1d { symbol } => {
                if d != 1 {
                    return Err(LabError::InvalidEnsemble(format!("toeplitz1d requires d = 1, got d = {d}")));
                }
                if !symbol.is_real_valued() {
                    return Err(LabError::Symbol("toeplitz1d needs a real-valued symbol".into()));
                }
            }
        }
        Ok(())
    }

    /// Potential at an absolute site for a given sample.
    pub fn potential(&self, sample_id: u64, site: &[i64]) -> f64 {
        match &self.kind {
            EnsembleKind::Anderson { w } => {
                if *w == 0.0 {
                    0.0
                } else {
                    w * (site_uniform(self.seed, sample_id, site) - 0.5)
                }
            }
            EnsembleKind::Periodic {
                potential_cell,
                period,
                offset,
            } => {
                let mut idx = 0i64;
                for (i, x) in site.iter().enumerate() {
                    idx = idx * period[i] + (x + offset[i]).rem_euclid(period[i]);
                }
                potential_cell[idx as usize]
            }
            EnsembleKind::Free | EnsembleKind::Toeplitz1d { .. } => 0.0,
        }
    }

    /// Parses the key-value block (`kind`, `W`, `hopping`, `seed`, `period`,
    /// `potential_cell`, `offset`, `symbol.coeffs`).
    ///
    /// `symbol.coeffs` is a list of `[k, re]` or `[k, re, im]` triples.
    pub fn from_table(t: &toml::Table) -> Result<Self> {
        let known = ["kind", "W", "hopping", "seed", "period", "potential_cell", "offset", "symbol"];
        if let Some(k) = t.keys().find(|k| !known.contains(&k.as_str())) {
            return Err(LabError::Config(format!("unknown ensemble key `{k}`")));
        }
        let kind_name = t
            .get("kind")
            .and_then(|v| v.as_str())
            .ok_or_else(|| LabError::Config("ensemble needs a string `kind`".into()))?;
        let hopping = match t.get("hopping") {
            Some(v) => toml_f64(v).ok_or_else(|| LabError::Config("`hopping` must be a number".into()))?,
            None => 1.0,
        };
        let seed = match t.get("seed") {
            Some(v) => v
                .as_integer()
                .filter(|s| *s >= 0)
                .ok_or_else(|| LabError::Config("`seed` must be a non-negative integer".into()))?
                as u64,
            None => 0,
        };
        let kind = match kind_name {
            "free" => EnsembleKind::Free,
            "anderson" => EnsembleKind::Anderson {
                w: t.get("W")
                    .and_then(toml_f64)
                    .ok_or_else(|| LabError::Config("anderson needs numeric `W`".into()))?,
            },
            "periodic" => {
                let period = int_list(t.get("period"), "period")?;
                let potential_cell = t
                    .get("potential_cell")
                    .and_then(|v| v.as_array())
                    .ok_or_else(|| LabError::Config("periodic needs `potential_cell`".into()))?
                    .iter()
                    .map(|v| toml_f64(v).ok_or_else(|| LabError::Config("`potential_cell` must be numeric".into())))
                    .collect::<Result<Vec<_>>>()?;
                let offset = match t.get("offset") {
                    Some(_) => int_list(t.get("offset"), "offset")?,
                    None => vec![0; period.len()],
                };
                EnsembleKind::Periodic {
                    potential_cell,
                    period,
                    offset,
                }
            }
            "toeplitz1d" => {
                let coeffs = t
                    .get("symbol")
                    .and_then(|s| s.get("coeffs"))
                    .and_then(|c| c.as_array())
                    .ok_or_else(|| LabError::Config("toeplitz1d needs `symbol.coeffs`".into()))?;
                let mut map = std::collections::BTreeMap::new();
                for entry in coeffs {
                    let e = entry
                        .as_array()
                        .filter(|e| e.len() == 2 || e.len() == 3)
                        .ok_or_else(|| LabError::Config("symbol coefficient must be [k, re] or [k, re, im]".into()))?;
                    let k = e[0]
                        .as_integer()
                        .ok_or_else(|| LabError::Config("symbol index must be an integer".into()))?;
                    let re = toml_f64(&e[1]).ok_or_else(|| LabError::Config("bad coefficient".into()))?;
                    let im = match e.get(2) {
                        Some(v) => toml_f64(v).ok_or_else(|| LabError::Config("bad coefficient".into()))?,
                        None => 0.0,
                    };
                    map.insert(k, c64::new(re, im));
                }
                EnsembleKind::Toeplitz1d {
                    symbol: Symbol1D::new(map),
                }
            }
            other => return Err(LabError::Config(format!("unknown ensemble kind `{other}`"))),
        };
        Ok(Self { kind, hopping, seed })
    }

    pub fn to_table(&self) -> toml::Table {
        use toml::Value;
        let mut t = toml::Table::new();
        let ints = |v: &[i64]| Value::Array(v.iter().map(|&x| Value::Integer(x)).collect());
        match &self.kind {
            EnsembleKind::Free => {
                t.insert("kind".into(), "free".into());
            }
            EnsembleKind::Anderson { w } => {
                t.insert("kind".into(), "anderson".into());
                t.insert("W".into(), Value::Float(*w));
            }
            EnsembleKind::Periodic {
                potential_cell,
                period,
                offset,
            } => {
                t.insert("kind".into(), "periodic".into());
                t.insert("period".into(), ints(period));
                t.insert("offset".into(), ints(offset));
                t.insert(
                    "potential_cell".into(),
                    Value::Array(potential_cell.iter().map(|&v| Value::Float(v)).collect()),
                );
            }
            EnsembleKind::Toeplitz1d { symbol } => {
                t.insert("kind".into(), "toeplitz1d".into());
                let coeffs = symbol
                    .coeffs()
                    .iter()
                    .map(|(&k, a)| Value::Array(vec![Value::Integer(k), Value::Float(a.re), Value::Float(a.im)]))
                    .collect();
                let mut s = toml::Table::new();
                s.insert("coeffs".into(), Value::Array(coeffs));
                t.insert("symbol".into(), Value::Table(s));
            }
        }
        t.insert("hopping".into(), Value::Float(self.hopping));
        t.insert("seed".into(), Value::Integer(self.seed as i64));
        t
    }
}

fn toml_f64(v: &toml::Value) -> Option<f64> {
    v.as_float().or_else(|| v.as_integer().map(|i| i as f64))
}

fn int_list(v: Option<&toml::Value>, key: &str) -> Result<Vec<i64>> {
    v.and_then(|v| v.as_array())
        .ok_or_else(|| LabError::Config(format!("`{key}` must be an integer list")))?
        .iter()
        .map(|x| x.as_integer().ok_or_else(|| LabError::Config(format!("`{key}` must be an integer list"))))
        .collect()
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Uniform on `[0, 1)`, keyed on `(seed, sample, absolute site)`.
pub fn site_uniform(seed: u64, sample_id: u64, site: &[i64]) -> f64 {
    let mut h = splitmix(seed ^ 0x5a5a_0f0f_3c3c_9696);
    h = splitmix(h ^ sample_id);
    for &x in site {
        h = splitmix(h ^ x as u64);
    }
    h = splitmix(h ^ site.len() as u64);
    (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// `H = -Δ + V` on the box with Dirichlet truncation (a Toeplitz section for
/// `toeplitz1d`).
pub fn build_operator(spec: &EnsembleSpec, lattice_box: &LatticeBox, sample_id: u64) -> Result<HermitianOperator> {
    build_operator_capped(spec, lattice_box, sample_id, DEFAULT_MAX_SITES)
}

pub fn build_operator_capped(
    spec: &EnsembleSpec,
    lattice_box: &LatticeBox,
    sample_id: u64,
    max_sites: usize,
) -> Result<HermitianOperator> {
    let d = lattice_box.dim();
    spec.validate(d)?;
    let n = lattice_box.site_count();
    if n > max_sites {
        return Err(LabError::TooManySites {
            requested: n,
            max: max_sites,
        });
    }
    let label = format!("{} sample={sample_id}", spec.name());
    if let EnsembleKind::Toeplitz1d { symbol } = &spec.kind {
        let m = Mat::from_fn(n, n, |j, k| spec.hopping * symbol.coeff(j as i64 - k as i64));
        return Ok(HermitianOperator::from_parts(lattice_box.clone(), m, label));
    }
    let t = spec.hopping;
    let mut m = Mat::<c64>::zeros(n, n);
    let mut nb = vec![0i64; d];
    for (i, site) in lattice_box.sites().enumerate() {
        m[(i, i)] = c64::new(2.0 * d as f64 * t + spec.potential(sample_id, &site), 0.0);
        for axis in 0..d {
            nb.copy_from_slice(&site);
            nb[axis] += 1;
            if let Some(j) = lattice_box.index_of(&nb) {
                m[(i, j)] = c64::new(-t, 0.0);
                m[(j, i)] = c64::new(-t, 0.0);
            }
        }
    }
    Ok(HermitianOperator::from_parts(lattice_box.clone(), m, label))
}

/// `(a_{j-k})_{j,k=1}^{L}` on the box `{1..=L}`.
pub fn toeplitz_matrix(symbol: &Symbol1D, l: usize) -> Result<HermitianOperator> {
    if l == 0 {
        return Err(LabError::Precondition("Toeplitz size must be >= 1".into()));
    }
    if !symbol.is_real_valued() {
        return Err(LabError::Symbol("symbol is not real-valued; Toeplitz matrix would not be Hermitian".into()));
    }
    let m = Mat::from_fn(l, l, |j, k| symbol.coeff(j as i64 - k as i64));
    Ok(HermitianOperator::from_parts(
        LatticeBox::cube(1, 1, l as i64)?,
        m,
        format!("toeplitz L={l}"),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn free_tridiagonal() {
        let op = build_operator(&EnsembleSpec::free(), &LatticeBox::cube(1, 0, 2).unwrap(), 0).unwrap();
        let want = [[2.0, -1.0, 0.0], [-1.0, 2.0, -1.0], [0.0, -1.0, 2.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(op.entry(i, j), c64::new(want[i][j], 0.0));
            }
        }
    }

    #[test]
    fn zero_disorder_is_free() {
        let b = LatticeBox::centered(2, 3).unwrap();
        let a = build_operator(&EnsembleSpec::anderson(0.0, 7), &b, 3).unwrap();
        let f = build_operator(&EnsembleSpec::free(), &b, 3).unwrap();
        assert!(a.matrix() == f.matrix());
    }

    #[test]
    fn toeplitz_small_cases() {
        let one = toeplitz_matrix(&Symbol1D::from_real_pairs(&[(0, 1.0)]), 3).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(one.entry(i, j).re, if i == j { 1.0 } else { 0.0 });
            }
        }
        let cos = toeplitz_matrix(&Symbol1D::from_real_pairs(&[(-1, 1.0), (1, 1.0)]), 2).unwrap();
        assert_eq!(cos.entry(0, 1).re, 1.0);
        assert_eq!(cos.entry(1, 0).re, 1.0);
        assert_eq!(cos.entry(0, 0).re, 0.0);
        let bad = Symbol1D::new([(1, c64::new(1.0, 0.0))].into_iter().collect());
        assert!(toeplitz_matrix(&bad, 2).is_err());
    }

    #[test]
    fn toeplitz_needs_d1() {
        let s = EnsembleSpec::toeplitz1d(Symbol1D::from_real_pairs(&[(0, 1.0)]));
        assert!(matches!(
            build_operator(&s, &LatticeBox::cube(2, 0, 1).unwrap(), 0),
            Err(LabError::InvalidEnsemble(_))
        ));
    }

    #[test]
    fn site_cap() {
        let b = LatticeBox::cube(2, 0, 9).unwrap();
        assert!(matches!(
            build_operator_capped(&EnsembleSpec::free(), &b, 0, 50),
            Err(LabError::TooManySites { requested: 100, max: 50 })
        ));
    }

    #[test]
    fn periodic_potential_and_offset() {
        let mut s = EnsembleSpec::periodic(vec![1.0, -1.0], vec![2]);
        let b = LatticeBox::cube(1, 0, 3).unwrap();
        let op = build_operator(&s, &b, 0).unwrap();
        assert_eq!(op.diagonal_values(), vec![3.0, 1.0, 3.0, 1.0]);
        if let EnsembleKind::Periodic { offset, .. } = &mut s.kind {
            offset[0] = 1;
        }
        assert_eq!(build_operator(&s, &b, 0).unwrap().diagonal_values(), vec![1.0, 3.0, 1.0, 3.0]);
    }

    #[test]
    fn config_block_roundtrip() {
        let src = r#"
            kind = "toeplitz1d"
            hopping = 1
            seed = 4
            symbol.coeffs = [[0, 2.0], [1, 0.5], [-1, 0.5]]
        "#;
        let t: toml::Table = src.parse().unwrap();
        let spec = EnsembleSpec::from_table(&t).unwrap();
        assert_eq!(spec.seed, 4);
        assert_eq!(EnsembleSpec::from_table(&spec.to_table()).unwrap(), spec);

        let t: toml::Table = "kind = \"anderson\"\nW = 2.5\nseed = 9".parse().unwrap();
        let spec = EnsembleSpec::from_table(&t).unwrap();
        assert_eq!(spec.kind, EnsembleKind::Anderson { w: 2.5 });
        assert_eq!(EnsembleSpec::from_table(&spec.to_table()).unwrap(), spec);

        let t: toml::Table = "kind = \"anderson\"\nWW = 1".parse().unwrap();
        assert!(EnsembleSpec::from_table(&t).is_err());
    }
}
