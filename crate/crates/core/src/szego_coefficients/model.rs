use std::collections::HashMap;

use faer::{c64, Mat};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decay_verify::DecayFitReport;
use crate::error::{LabError, Result};
use crate::functional_calculus::{apply_scalar_function, function_diagonal, ScalarFunction};
use crate::lattice_models::{build_operator, EnsembleSpec, HermitianOperator, LatticeBox};
use crate::stats::{MCAccumulator, Stat};

use super::constants::{comb_constants, index_vectors, rational_strings, to_f64, CombConstants};
use super::masks::{chi_hat_weight, subsets};

/// `g(H)` for one sample, with `H` truncated to `B_R = {-R..R}^d`.
pub fn sample_g(spec: &EnsembleSpec, sample_id: u64, g: &ScalarFunction, d: usize, r: i64) -> Result<HermitianOperator> {
    let b = LatticeBox::centered(d, r)?;
    apply_scalar_function(&build_operator(spec, &b, sample_id)?, g)
}

/// `ℤ^n_{≥0} × ℤ^{d-n} ∩ B_R`.
pub fn half_orthant_box(d: usize, n: usize, r: i64) -> Result<LatticeBox> {
    LatticeBox::new((0..d).map(|i| if i < n { 0 } else { -r }).collect(), vec![r; d])
}

/// Diagonal of `h(χ G χ)` for the sub-box `inner`, indexed over the sites of
/// `G`'s box; sites outside `inner` carry `h(0)`.
pub fn restricted_box_diagonal(gop: &HermitianOperator, inner: &LatticeBox, h: &ScalarFunction) -> Result<Vec<f64>> {
    let idx = gop.lattice_box().embedding_of(inner)?;
    let mut out = vec![h.eval(0.0); gop.dim()];
    let sub = gop.sub_box(inner)?;
    for (k, v) in function_diagonal(sub.matrix(), h)?.into_iter().enumerate() {
        out[idx[k]] = v;
    }
    Ok(out)
}

/// The model operators `f_0, …, f_d` of one sample on `B_R`.
#[derive(Debug, Clone)]
pub struct ModelOperatorFamily {
    pub sample_id: u64,
    pub r: i64,
    pub f: Vec<HermitianOperator>,
    /// Certified kernel tail beyond `B_R`, when a certificate was supplied.
    pub truncation_tolerance: Option<f64>,
}

/// Builds `f_n = h(χ_n g(H) χ_n)` with `χ_n` the half-orthant projection.
/// A requested `tolerance` must be backed by a decay certificate.
pub fn model_operators(
    spec: &EnsembleSpec,
    sample_id: u64,
    g: &ScalarFunction,
    h: &ScalarFunction,
    d: usize,
    r: i64,
    certificate: Option<&DecayFitReport>,
    tolerance: Option<f64>,
) -> Result<ModelOperatorFamily> {
    let truncation_tolerance = match (certificate, tolerance) {
        (None, Some(tol)) => return Err(LabError::MissingCertificate(tol)),
        (Some(c), Some(tol)) => Some(c.require_tail_below(d, r, tol)?),
        (Some(c), None) => Some(c.tail_budget(d, r)),
        (None, None) => None,
    };
    let gop = sample_g(spec, sample_id, g, d, r)?;
    let big = gop.lattice_box().clone();
    let h0 = h.eval(0.0);
    let f = (0..=d)
        .map(|n| {
            let inner = half_orthant_box(d, n, r)?;
            let idx = big.embedding_of(&inner)?;
            let fsub = apply_scalar_function(&gop.sub_box(&inner)?, h)?;
            let mut m = Mat::<c64>::zeros(big.site_count(), big.site_count());
            for i in 0..big.site_count() {
                m[(i, i)] = c64::new(h0, 0.0);
            }
            for (a, &ia) in idx.iter().enumerate() {
                for (b, &ib) in idx.iter().enumerate() {
                    m[(ia, ib)] = fsub.matrix()[(a, b)];
                }
            }
            HermitianOperator::new(big.clone(), m, format!("f_{n}"))
        })
        .collect::<Result<_>>()?;
    Ok(ModelOperatorFamily {
        sample_id,
        r,
        f,
        truncation_tolerance,
    })
}

/// Diagonals of `f_0, …, f_{n_max}` over `B_R`.
pub fn model_diagonals(gop: &HermitianOperator, h: &ScalarFunction, n_max: usize) -> Result<Vec<Vec<f64>>> {
    let b = gop.lattice_box();
    let r = b.hi()[0];
    (0..=n_max)
        .map(|n| restricted_box_diagonal(gop, &half_orthant_box(b.dim(), n, r)?, h))
        .collect()
}

/// Site sets and weights for one `(d, L, R)`, shared by every sample.
#[derive(Debug, Clone)]
pub struct CoefficientPlan {
    pub d: usize,
    pub l: i64,
    pub r: i64,
    pub consts: CombConstants,
    /// `[m][n]`: `(B_R index, χ̂ weight)` over `[0,L)^m × {0}^{d-m}`.
    weights: Vec<Vec<Vec<(usize, f64)>>>,
    /// `[m]`: `B_R` indices of `[0,L)^m × {0}^{d-m}`.
    layers: Vec<Vec<usize>>,
    lambda: LatticeBox,
    quadrant: Vec<usize>,
}

impl CoefficientPlan {
    pub fn new(d: usize, l: i64, r: i64) -> Result<Self> {
        if l < 1 || 2 * l > r {
            return Err(LabError::IndexRange(format!("need 1 ≤ L ≤ R/2, got L={l}, R={r}")));
        }
        let consts = comb_constants(d)?;
        let big = LatticeBox::centered(d, r)?;
        let layer_box = |m: usize| LatticeBox::new(vec![0; d], (0..d).map(|i| if i < m { l - 1 } else { 0 }).collect());
        let mut weights = vec![vec![vec![]; d + 1]; d + 1];
        let mut layers = vec![vec![]; d + 1];
        for m in 0..=d {
            let lb = layer_box(m)?;
            layers[m] = big.embedding_of(&lb)?;
            for n in 1..=m {
                weights[m][n] = lb
                    .sites()
                    .filter_map(|z| {
                        let w = chi_hat_weight(m, n, &z);
                        (w > 0.0).then(|| (big.index_of(&z).unwrap(), w))
                    })
                    .collect();
            }
        }
        Ok(Self {
            d,
            l,
            r,
            consts,
            weights,
            layers,
            lambda: LatticeBox::cube(d, -l, l - 1)?,
            quadrant: big.embedding_of(&LatticeBox::cube(d, 0, l - 1)?)?,
        })
    }

    pub fn lambda(&self) -> &LatticeBox {
        &self.lambda
    }
}

/// Everything one sample contributes at one `L`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleTerms {
    /// `Tr h(g(H)_Λ)` on `Λ = {-L..L-1}^d`.
    pub box_trace: f64,
    /// `A_0` estimate: mean of the diagonal of `f_0` over `Λ`.
    pub a0: f64,
    /// `[m][n]`: `Σ_z W_{m,n}(z) (f_n - f_{n-1})(z,z)`, zero for `n = 0`.
    pub a_mn: Vec<Vec<f64>>,
    /// `[m]`: `Σ_n c_{m,n} a_mn[m][n]`, with `a_m[0] = a0`.
    pub a_m: Vec<f64>,
    /// `[m][n]`: `Tr(f_n χ_{[0,L)^m × {0}})`.
    pub raw: Vec<Vec<f64>>,
    pub partition_free_printed: Vec<f64>,
    pub partition_free_recurrence: Vec<f64>,
    /// `Tr(f_0 χ_{[0,L)^d}) / L^d`.
    pub volume: f64,
    pub error_term: Option<f64>,
}

/// Per-sample terms for every plan, from one `g(H)` sample.
pub fn sample_terms(
    gop: &HermitianOperator,
    h: &ScalarFunction,
    plans: &[CoefficientPlan],
    with_error_term: bool,
) -> Result<Vec<SampleTerms>> {
    let Some(first) = plans.first() else { return Ok(vec![]) };
    let d = first.d;
    let diags = model_diagonals(gop, h, d)?;
    plans
        .iter()
        .map(|p| {
            let lambda_diag = function_diagonal(gop.sub_box(&p.lambda)?.matrix(), h)?;
            let box_trace: f64 = lambda_diag.iter().sum();
            let lam_idx = gop.lattice_box().embedding_of(&p.lambda)?;
            let a0 = lam_idx.iter().map(|&i| diags[0][i]).sum::<f64>() / lam_idx.len() as f64;
            let mut a_mn = vec![vec![0.0; d + 1]; d + 1];
            let mut a_m = vec![0.0; d + 1];
            let mut raw = vec![vec![0.0; d + 1]; d + 1];
            let mut pf_p = vec![0.0; d + 1];
            let mut pf_r = vec![0.0; d + 1];
            a_m[0] = a0;
            for m in 0..=d {
                for n in 0..=m {
                    raw[m][n] = p.layers[m].iter().map(|&i| diags[n][i]).sum();
                    pf_p[m] += to_f64(&p.consts.c_tilde_printed[m][n]) * raw[m][n];
                    pf_r[m] += to_f64(&p.consts.c_tilde_recurrence[m][n]) * raw[m][n];
                    if n >= 1 {
                        a_mn[m][n] = p.weights[m][n].iter().map(|&(i, w)| w * (diags[n][i] - diags[n - 1][i])).sum();
                        if m >= 1 {
                            a_m[m] += to_f64(&p.consts.c[m][n]) * a_mn[m][n];
                        }
                    }
                }
            }
            let volume = p.quadrant.iter().map(|&i| diags[0][i]).sum::<f64>() / (p.l as f64).powi(d as i32);
            let error_term = if with_error_term {
                Some(error_term_from(gop, h, p.l, &lambda_diag)?)
            } else {
                None
            };
            Ok(SampleTerms {
                box_trace,
                a0,
                a_mn,
                a_m,
                raw,
                partition_free_printed: pf_p,
                partition_free_recurrence: pf_r,
                volume,
                error_term,
            })
        })
        .collect()
}

/// Sub-box of `B_R` cut by the faces of `Λ = {-L..L-1}^d` selected by
/// `faces[i]`: `-1` keeps `x_i ≥ -L`, `+1` keeps `x_i ≤ L-1`, `0` no cut.
fn face_box(d: usize, l: i64, r: i64, faces: &[i8]) -> Result<LatticeBox> {
    LatticeBox::new(
        (0..d).map(|i| if faces[i] < 0 { -l } else { -r }).collect(),
        (0..d).map(|i| if faces[i] > 0 { l - 1 } else { r }).collect(),
    )
}

/// Faces nearest to the corner sub-cube `σ` (bit `i` set ⇔ `x_i ≥ 0`).
fn corner_faces(d: usize, sigma: usize) -> Vec<i8> {
    (0..d).map(|i| if sigma >> i & 1 == 1 { 1 } else { -1 }).collect()
}

/// Distance coordinates of `x` inside corner `σ`: `y_i ∈ [0, L)` with `y_i = 0`
/// on the face.
fn corner_coords(x: &[i64], sigma: usize, l: i64) -> Vec<i64> {
    x.iter()
        .enumerate()
        .map(|(i, &xi)| if sigma >> i & 1 == 1 { l - 1 - xi } else { xi + l })
        .collect()
}

fn corner_of(x: &[i64]) -> usize {
    x.iter().enumerate().map(|(i, &xi)| usize::from(xi >= 0) << i).sum()
}

fn error_term_from(gop: &HermitianOperator, h: &ScalarFunction, l: i64, lambda_diag: &[f64]) -> Result<f64> {
    let big = gop.lattice_box();
    let (d, r) = (big.dim(), big.hi()[0]);
    let lambda = LatticeBox::cube(d, -l, l - 1)?;
    let mut total = 0.0;
    for sigma in 0..1usize << d {
        let fd = restricted_box_diagonal(gop, &face_box(d, l, r, &corner_faces(d, sigma))?, h)?;
        for (k, x) in lambda.sites().enumerate() {
            if corner_of(&x) == sigma {
                total += lambda_diag[k] - fd[big.index_of(&x).unwrap()];
            }
        }
    }
    Ok(total)
}

/// The corner error term `Σ_σ Tr(χ_{Q_σ}{h(g(H)_Λ) - f_d^σ})` of one sample,
/// where `Q_σ` is the corner sub-cube of `Λ` and `f_d^σ` cuts `B_R` by the
/// `d` faces of `Λ` meeting at that corner.
pub fn error_term(
    spec: &EnsembleSpec,
    sample_id: u64,
    g: &ScalarFunction,
    h: &ScalarFunction,
    d: usize,
    l: i64,
    r: i64,
) -> Result<f64> {
    if l < 1 || 2 * l > r {
        return Err(LabError::IndexRange(format!("need 1 ≤ L and 2L ≤ R, got L={l}, R={r}")));
    }
    let gop = sample_g(spec, sample_id, g, d, r)?;
    let lambda = LatticeBox::cube(d, -l, l - 1)?;
    let lambda_diag = function_diagonal(gop.sub_box(&lambda)?.matrix(), h)?;
    error_term_from(&gop, h, l, &lambda_diag)
}

/// Pointwise corner decomposition of one sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityProbe {
    pub d: usize,
    pub l: i64,
    pub r: i64,
    /// `Tr(χ_Λ{h(g(H)_Λ) - f_0})`.
    pub lhs: f64,
    /// `b_{n,j}` indexed `[n][j]`.
    pub b_nj: Vec<Vec<f64>>,
    /// `b_m = Σ_n b_{n,m-n}` indexed by `m`.
    pub b_m: Vec<f64>,
    pub error_term: f64,
    pub residual: f64,
    /// Scale of the summands, for judging the residual.
    pub scale: f64,
    /// Certified truncation tail, when a certificate was supplied.
    pub budget: Option<f64>,
}

impl IdentityProbe {
    /// Residual within rounding of the summands, or within the certified budget.
    pub fn holds(&self) -> bool {
        self.residual <= 1e-9 * self.scale.max(1.0) || self.budget.is_some_and(|b| self.residual <= b)
    }
}

/// Caches `h(χ_F g(H) χ_F)` diagonals keyed by the face set `F`.
struct FaceCache<'a> {
    gop: &'a HermitianOperator,
    h: &'a ScalarFunction,
    l: i64,
    map: HashMap<Vec<i8>, Vec<f64>>,
}

impl FaceCache<'_> {
    fn get(&mut self, faces: Vec<i8>) -> Result<&Vec<f64>> {
        if !self.map.contains_key(&faces) {
            let b = self.gop.lattice_box();
            let fb = face_box(b.dim(), self.l, b.hi()[0], &faces)?;
            let v = restricted_box_diagonal(self.gop, &fb, self.h)?;
            self.map.insert(faces.clone(), v);
        }
        Ok(&self.map[&faces])
    }
}

/// Evaluates `Tr(χ_Λ{h(g(H)_Λ) - f_0}) = Σ_m b_m + E` for one sample. Each
/// corner is handled in original coordinates: the half-spaces of the
/// transported model operators are the faces of `Λ` through that corner.
pub fn decomposition_identity_probe(
    spec: &EnsembleSpec,
    sample_id: u64,
    g: &ScalarFunction,
    h: &ScalarFunction,
    d: usize,
    l: i64,
    r: i64,
    certificate: Option<&DecayFitReport>,
) -> Result<IdentityProbe> {
    if l < 1 || 4 * l > r {
        return Err(LabError::IndexRange(format!("need 1 ≤ L and 2L ≤ R/2, got L={l}, R={r}")));
    }
    let gop = sample_g(spec, sample_id, g, d, r)?;
    let mut probe = identity_probe_from(&gop, h, l)?;
    probe.budget = certificate.map(|c| c.tail_budget(d, r - 2 * l));
    Ok(probe)
}

pub(crate) fn identity_probe_from(gop: &HermitianOperator, h: &ScalarFunction, l: i64) -> Result<IdentityProbe> {
    let big = gop.lattice_box().clone();
    let (d, r) = (big.dim(), big.hi()[0]);
    let lambda = LatticeBox::cube(d, -l, l - 1)?;
    let lambda_diag = function_diagonal(gop.sub_box(&lambda)?.matrix(), h)?;
    let mut cache = FaceCache {
        gop,
        h,
        l,
        map: HashMap::new(),
    };
    let f0 = cache.get(vec![0; d])?.clone();
    let mut scale = 0.0f64;
    let mut lhs = 0.0;
    let mut b_nj = vec![vec![0.0; d + 1]; d + 1];
    let mut e = 0.0;
    for (k, x) in lambda.sites().enumerate() {
        let gi = big.index_of(&x).unwrap();
        lhs += lambda_diag[k] - f0[gi];
        scale = scale.max(lambda_diag[k].abs()).max(f0[gi].abs());
    }
    for sigma in 0..1usize << d {
        let signs = corner_faces(d, sigma);
        let faces_of = |axes: &[usize]| -> Vec<i8> {
            let mut f = vec![0; d];
            axes.iter().for_each(|&a| f[a] = signs[a]);
            f
        };
        let fd = cache.get(signs.clone())?.clone();
        let points: Vec<(usize, usize, Vec<i64>)> = lambda
            .sites()
            .enumerate()
            .filter(|(_, x)| corner_of(x) == sigma)
            .map(|(k, x)| (k, big.index_of(&x).unwrap(), corner_coords(&x, sigma, l)))
            .collect();
        for (k, gi, _) in &points {
            e += lambda_diag[*k] - fd[*gi];
        }
        for n in 1..=d {
            for lax in 0..d {
                for kv in index_vectors(d, n - 1, lax) {
                    let mut head = kv;
                    head.push(lax);
                    let upper = cache.get(faces_of(&head))?.clone();
                    let lower = cache.get(faces_of(&head[..n - 1]))?.clone();
                    let rest: Vec<usize> = (0..d).filter(|a| !head.contains(a)).collect();
                    for (_, gi, y) in &points {
                        let lt = |a: usize, b: usize| (y[a], a) < (y[b], b);
                        if !(1..n).all(|i| lt(head[i - 1], head[i])) {
                            continue;
                        }
                        let diff = upper[*gi] - lower[*gi];
                        scale = scale.max(upper[*gi].abs());
                        for j in 0..=d - n {
                            let count = subsets(&rest, j).iter().filter(|ms| ms.iter().all(|&t| lt(t, lax))).count();
                            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                            b_nj[n][j] += sign * count as f64 * diff;
                        }
                    }
                }
            }
        }
    }
    let b_m: Vec<f64> = (0..=d)
        .map(|m| if m == 0 { 0.0 } else { (1..=m).map(|n| b_nj[n][m - n]).sum() })
        .collect();
    let residual = (lhs - b_m.iter().sum::<f64>() - e).abs();
    let _ = r;
    Ok(IdentityProbe {
        d,
        l,
        r,
        lhs,
        b_nj,
        b_m,
        error_term: e,
        residual,
        scale,
        budget: None,
    })
}

/// Monte Carlo coefficient estimates at one `L`.
#[allow(non_snake_case)]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientTable {
    pub d: usize,
    pub L: i64,
    pub R: i64,
    pub n_samples: usize,
    pub c: Vec<Vec<String>>,
    pub c_tilde_printed: Vec<Vec<String>>,
    pub c_tilde_recurrence: Vec<Vec<String>>,
    /// `A_m^{(L)}`, `m = 0..=d`.
    pub A_fv: Vec<Stat>,
    /// `A_{m,n}^{(L)}` indexed `[m][n]`.
    pub A_mn: Vec<Vec<Stat>>,
    pub E_L: Option<Stat>,
    pub partition_free: PartitionFree,
    /// Mean box trace `E Tr h(g(H)_Λ)` for `Λ` of side `2L`.
    pub box_trace: Stat,
}

/// Partition-free sums for both weight variants, with their raw terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionFree {
    pub printed: Vec<Stat>,
    pub recurrence: Vec<Stat>,
    /// `A_m - Σ_n c̃_{m,n} T_{m,n}` per sample, for each variant.
    pub printed_minus_a: Vec<Stat>,
    pub recurrence_minus_a: Vec<Stat>,
    pub raw_terms: Vec<Vec<Stat>>,
    /// `E Tr(f_0 χ_{[0,L)^d}) / L^d`, to compare with `A_0`.
    pub volume_density: Stat,
}

/// Which partition-free variant reproduces `A_m` (`m ≥ 1`) within `k`
/// combined standard errors of the paired difference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adjudication {
    pub m: usize,
    pub printed_matches: bool,
    pub recurrence_matches: bool,
    pub winner: Option<String>,
}

impl PartitionFree {
    pub fn adjudicate(&self, m: usize, k: f64) -> Adjudication {
        let ok = |s: &Stat| s.mean.abs() <= k * s.stderr || s.mean.abs() <= 1e-12;
        let p = ok(&self.printed_minus_a[m]);
        let r = ok(&self.recurrence_minus_a[m]);
        let winner = match (p, r) {
            (true, false) => Some("printed".to_string()),
            (false, true) => Some("recurrence".to_string()),
            _ => None,
        };
        Adjudication {
            m,
            printed_matches: p,
            recurrence_matches: r,
            winner,
        }
    }
}

fn stats_of(values: impl Iterator<Item = f64>) -> Stat {
    let mut a = MCAccumulator::new();
    values.for_each(|v| a.push(v));
    a.stat()
}

/// Reduces per-sample terms (in sample order) to a table.
pub fn tabulate(plan: &CoefficientPlan, samples: &[SampleTerms]) -> CoefficientTable {
    let d = plan.d;
    let col = |f: &dyn Fn(&SampleTerms) -> f64| stats_of(samples.iter().map(f));
    let grid = |f: &dyn Fn(&SampleTerms, usize, usize) -> f64| -> Vec<Vec<Stat>> {
        (0..=d).map(|m| (0..=d).map(|n| col(&|s| f(s, m, n))).collect()).collect()
    };
    let per_m = |f: &dyn Fn(&SampleTerms, usize) -> f64| -> Vec<Stat> { (0..=d).map(|m| col(&|s| f(s, m))).collect() };
    CoefficientTable {
        d,
        L: plan.l,
        R: plan.r,
        n_samples: samples.len(),
        c: rational_strings(&plan.consts.c),
        c_tilde_printed: rational_strings(&plan.consts.c_tilde_printed),
        c_tilde_recurrence: rational_strings(&plan.consts.c_tilde_recurrence),
        A_fv: per_m(&|s, m| s.a_m[m]),
        A_mn: grid(&|s, m, n| s.a_mn[m][n]),
        E_L: samples
            .iter()
            .all(|s| s.error_term.is_some())
            .then(|| col(&|s| s.error_term.unwrap())),
        partition_free: PartitionFree {
            printed: per_m(&|s, m| s.partition_free_printed[m]),
            recurrence: per_m(&|s, m| s.partition_free_recurrence[m]),
            printed_minus_a: per_m(&|s, m| s.a_m[m] - s.partition_free_printed[m]),
            recurrence_minus_a: per_m(&|s, m| s.a_m[m] - s.partition_free_recurrence[m]),
            raw_terms: grid(&|s, m, n| s.raw[m][n]),
            volume_density: col(&|s| s.volume),
        },
        box_trace: col(&|s| s.box_trace),
    }
}

/// Runs `per_sample` over `0..n_samples` in parallel and returns the results
/// in sample order.
pub fn map_samples<T, F>(n_samples: usize, per_sample: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync,
{
    (0..n_samples as u64)
        .into_par_iter()
        .map(|s| {
            per_sample(s).map_err(|e| LabError::Sample {
                sample: s,
                source: Box::new(e),
            })
        })
        .collect()
}

/// Monte Carlo coefficient tables for several `L` from shared samples.
#[allow(clippy::too_many_arguments)]
pub fn finite_volume_sweep(
    spec: &EnsembleSpec,
    g: &ScalarFunction,
    h: &ScalarFunction,
    d: usize,
    ls: &[i64],
    r: i64,
    n_samples: usize,
    with_error_term: bool,
) -> Result<Vec<CoefficientTable>> {
    let plans: Vec<CoefficientPlan> = ls.iter().map(|&l| CoefficientPlan::new(d, l, r)).collect::<Result<_>>()?;
    let per_sample = map_samples(n_samples, |s| {
        let gop = sample_g(spec, s, g, d, r)?;
        sample_terms(&gop, h, &plans, with_error_term)
    })?;
    Ok(plans
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let col: Vec<SampleTerms> = per_sample.iter().map(|v| v[i].clone()).collect();
            tabulate(p, &col)
        })
        .collect())
}

#[allow(clippy::too_many_arguments)]
pub fn finite_volume_coefficients(
    spec: &EnsembleSpec,
    g: &ScalarFunction,
    h: &ScalarFunction,
    d: usize,
    l: i64,
    r: i64,
    n_samples: usize,
) -> Result<CoefficientTable> {
    Ok(finite_volume_sweep(spec, g, h, d, &[l], r, n_samples, true)?.remove(0))
}

/// Partition-free sums for both weight variants at one `L`.
#[allow(clippy::too_many_arguments)]
pub fn partition_free_coefficients(
    spec: &EnsembleSpec,
    g: &ScalarFunction,
    h: &ScalarFunction,
    d: usize,
    l: i64,
    r: i64,
    n_samples: usize,
) -> Result<PartitionFree> {
    Ok(finite_volume_sweep(spec, g, h, d, &[l], r, n_samples, false)?
        .remove(0)
        .partition_free)
}

impl CoefficientTable {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("quantity,m,n,mean,stderr\n");
        let fmt = |q: &str, m: usize, n: String, st: &Stat| format!("{q},{m},{n},{},{}\n", st.mean, st.stderr);
        for (m, st) in self.A_fv.iter().enumerate() {
            s += &fmt("A_fv", m, String::new(), st);
        }
        for m in 1..=self.d {
            for n in 1..=m {
                s += &fmt("A_mn", m, n.to_string(), &self.A_mn[m][n]);
            }
        }
        for m in 0..=self.d {
            s += &fmt("partition_free_printed", m, String::new(), &self.partition_free.printed[m]);
            s += &fmt("partition_free_recurrence", m, String::new(), &self.partition_free.recurrence[m]);
        }
        if let Some(e) = &self.E_L {
            s += &fmt("E_L", 0, String::new(), e);
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functional_calculus::Smoothness;
    use crate::lattice_models::{apply_symmetry, SymmetryAction};

    fn bump() -> ScalarFunction {
        ScalarFunction::bump(2.0, 1.5, Smoothness::Finite(4)).unwrap()
    }

    fn sq() -> ScalarFunction {
        ScalarFunction::polynomial(vec![0.0, 0.0, 1.0])
    }

    #[test]
    fn identity_h_annihilates_coefficients() {
        let spec = EnsembleSpec::anderson(3.0, 11);
        for d in 1..=2 {
            let plans = vec![CoefficientPlan::new(d, 3, 7).unwrap()];
            let gop = sample_g(&spec, 0, &bump(), d, 7).unwrap();
            let t = &sample_terms(&gop, &ScalarFunction::identity(), &plans, true).unwrap()[0];
            for m in 1..=d {
                assert!(t.a_m[m].abs() < 1e-12, "d={d} m={m}: {}", t.a_m[m]);
            }
            assert_eq!(t.error_term, Some(0.0));
        }
    }

    #[test]
    fn identity_probe_is_exact() {
        let spec = EnsembleSpec::anderson(4.0, 3);
        for d in 1..=2 {
            let gop = sample_g(&spec, 1, &bump(), d, 8).unwrap();
            for h in [sq(), ScalarFunction::polynomial(vec![0.0, 1.0, -1.0, 0.5])] {
                let p = identity_probe_from(&gop, &h, 2).unwrap();
                assert!(p.residual <= 1e-10 * p.scale.max(1.0), "d={d} {p:?}");
                assert!(p.lhs.abs() > 1e-6);
            }
        }
    }

    #[test]
    fn identity_probe_d3() {
        let spec = EnsembleSpec::anderson(4.0, 3);
        let gop = sample_g(&spec, 0, &bump(), 3, 4).unwrap();
        let p = identity_probe_from(&gop, &sq(), 1).unwrap();
        assert!(p.residual <= 1e-10 * p.scale.max(1.0), "{p:?}");
    }

    #[test]
    fn corner_cut_matches_transported_frame() {
        // The corner σ = (x_1 ≥ 0, x_2 < 0) with both faces: reflect axis 1,
        // swap the axes, translate both faces to 0 (the reflected face sits at
        // 1 - L), restrict to the quarter space and compare with the direct cut.
        let (d, l, r) = (2usize, 2i64, 5i64);
        let gop = sample_g(&EnsembleSpec::anderson(4.0, 9), 2, &bump(), d, r).unwrap();
        let h = sq();
        let direct = restricted_box_diagonal(&gop, &face_box(d, l, r, &[1, -1]).unwrap(), &h).unwrap();

        let reflected = apply_symmetry(&gop, &SymmetryAction::Reflect(vec![true, false])).unwrap();
        let swapped = apply_symmetry(&reflected, &SymmetryAction::Permute(vec![1, 0])).unwrap();
        let moved = apply_symmetry(&swapped, &SymmetryAction::Translate(vec![l, l - 1])).unwrap();
        let fb = moved.lattice_box();
        let quarter = LatticeBox::new(vec![0, 0], fb.hi().to_vec()).unwrap();
        let frame = restricted_box_diagonal(&moved, &quarter, &h).unwrap();
        for x in LatticeBox::cube(2, -l, l - 1).unwrap().sites() {
            let y = [x[1] + l, -x[0] + l - 1];
            let a = direct[gop.lattice_box().index_of(&x).unwrap()];
            let b = frame[fb.index_of(&y).unwrap()];
            assert!((a - b).abs() < 1e-12, "{x:?}: {a} vs {b}");
        }
    }

    #[test]
    fn model_operator_examples() {
        let spec = EnsembleSpec::anderson(2.0, 5);
        let fam = model_operators(&spec, 0, &bump(), &ScalarFunction::zero(), 1, 4, None, None).unwrap();
        assert!(fam.f.iter().all(|f| crate::dense::max_abs(f.matrix()) == 0.0));
        let off = ScalarFunction::bump(40.0, 1.0, Smoothness::Finite(4)).unwrap();
        let fam = model_operators(&spec, 0, &off, &sq(), 2, 2, None, None).unwrap();
        assert!(fam.f.iter().all(|f| crate::dense::max_abs(f.matrix()) < 1e-14));
        assert!(matches!(
            model_operators(&spec, 0, &bump(), &sq(), 1, 4, None, Some(1e-6)),
            Err(LabError::MissingCertificate(_))
        ));
    }

    #[test]
    fn diagonal_path_matches_full_matrices() {
        let spec = EnsembleSpec::anderson(3.0, 2);
        let h = ScalarFunction::polynomial(vec![0.0, 0.3, -1.0, 0.7]);
        let fam = model_operators(&spec, 4, &bump(), &h, 2, 3, None, None).unwrap();
        let gop = sample_g(&spec, 4, &bump(), 2, 3).unwrap();
        let diags = model_diagonals(&gop, &h, 2).unwrap();
        for n in 0..=2 {
            for (a, b) in fam.f[n].diagonal_values().iter().zip(&diags[n]) {
                assert!((a - b).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn plan_rejects_large_l() {
        assert!(CoefficientPlan::new(1, 6, 10).is_err());
        assert!(CoefficientPlan::new(1, 5, 10).is_ok());
    }

    #[test]
    fn d1_recurrence_variant_is_a1() {
        let spec = EnsembleSpec::anderson(8.0, 1);
        let plans = vec![CoefficientPlan::new(1, 6, 20).unwrap()];
        let gop = sample_g(&spec, 0, &bump(), 1, 20).unwrap();
        let t = &sample_terms(&gop, &sq(), &plans, false).unwrap()[0];
        assert!((t.partition_free_recurrence[1] - t.a_m[1]).abs() < 1e-12);
        assert!((4.0 * t.partition_free_printed[1] - t.a_m[1]).abs() < 1e-12);
    }
}
