use std::collections::BTreeMap;

use faer::c64;
use serde::{Deserialize, Serialize};

use super::report::{DecayFitReport, DecayMode, Estimate};
use crate::error::{LabError, Result};
use crate::functional_calculus::{apply_scalar_function, restricted_function_diagonal, spectral_decompose, ScalarFunction};
use crate::lattice_models::{build_operator, sup_distance, EnsembleSpec, HermitianOperator, LatticeBox};
use crate::regions_traces::{boundary_sites, region_mask, schatten_norm, Region};
use crate::stats::{fit_line, t_quantile_975};
use crate::szego_coefficients::map_samples;

/// Values below this are treated as numerically zero in fits.
pub const VALUE_FLOOR: f64 = 1e-14;
/// Pairs at distance at most this are excluded from fits.
pub const NEAR_FIELD: f64 = 2.0;

/// Observed range of the spectrum of `g(H)` across samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralWindow {
    pub min: f64,
    pub max: f64,
}

impl Default for SpectralWindow {
    fn default() -> Self {
        Self {
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
        }
    }
}

impl SpectralWindow {
    pub fn observe(&mut self, eigenvalues: &[f64]) {
        for &e in eigenvalues {
            self.min = self.min.min(e);
            self.max = self.max.max(e);
        }
    }

    pub fn merge(&mut self, other: &SpectralWindow) {
        self.min = self.min.min(other.min);
        self.max = self.max.max(other.max);
    }

    pub fn is_empty(&self) -> bool {
        self.min > self.max
    }

    pub fn distance(&self, z: c64) -> f64 {
        let dx = if z.re < self.min {
            self.min - z.re
        } else if z.re > self.max {
            z.re - self.max
        } else {
            0.0
        };
        dx.hypot(z.im)
    }
}

/// Transformation applied before the straight-line fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FitMode {
    /// `log v` against `log r`.
    Polynomial,
    /// `log v` against `r`.
    Exponential,
    /// `log v` against `r^θ` for a fixed `θ`.
    Stretched { theta: f64 },
}

/// Fits `v ≈ C·rate(r)` to raw `(r, v)` pairs, dropping `r ≤ NEAR_FIELD` and
/// `v < VALUE_FLOOR`. The reported prefactor is the smallest `C` that
/// envelopes every retained pair under the fitted rate.
pub fn fit_pairs(pairs: &[(f64, f64)], mode: FitMode, n_samples: usize) -> Result<DecayFitReport> {
    let kept: Vec<(f64, f64)> = pairs
        .iter()
        .copied()
        .filter(|&(r, v)| r > NEAR_FIELD && v >= VALUE_FLOOR && v.is_finite())
        .collect();
    if kept.len() < 3 {
        return Err(LabError::DegenerateFit(format!(
            "{} usable pairs above the floor {VALUE_FLOOR:e} beyond distance {NEAR_FIELD}",
            kept.len()
        )));
    }
    let transform = |r: f64| match mode {
        FitMode::Polynomial => r.ln(),
        FitMode::Exponential => r,
        FitMode::Stretched { theta } => r.powf(theta),
    };
    let xs: Vec<f64> = kept.iter().map(|p| transform(p.0)).collect();
    let ys: Vec<f64> = kept.iter().map(|p| p.1.ln()).collect();
    let line = fit_line(&xs, &ys)?;
    let t = t_quantile_975(line.n - 2);
    let decay = -line.slope;
    let fitted = match mode {
        FitMode::Polynomial => DecayMode::Polynomial { q: decay },
        FitMode::Exponential => DecayMode::Exponential { mu: decay },
        FitMode::Stretched { theta } => DecayMode::Stretched { mu: decay, theta },
    };
    let prefactor = kept.iter().map(|&(r, v)| v / fitted.rate(r)).fold(0.0, f64::max);
    let lo = kept.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let hi = kept.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let mut flags = Vec::new();
    if decay <= 0.0 {
        flags.push("no decay: fitted rate is not positive".to_string());
    }
    Ok(DecayFitReport {
        mode: fitted,
        slope: Estimate {
            value: line.slope,
            ci95: t * line.slope_se,
        },
        intercept: Estimate {
            value: line.intercept,
            ci95: t * line.intercept_se,
        },
        prefactor,
        r_squared: line.r_squared,
        n_samples,
        distance_range: (lo, hi),
        pairs: pairs.to_vec(),
        flags,
    })
}

impl DecayFitReport {
    /// Recomputes the fit from the stored raw pairs.
    pub fn refit(&self) -> Result<DecayFitReport> {
        let mode = match self.mode {
            DecayMode::Polynomial { .. } => FitMode::Polynomial,
            DecayMode::Exponential { .. } => FitMode::Exponential,
            DecayMode::Stretched { theta, .. } => FitMode::Stretched { theta },
        };
        let mut r = fit_pairs(&self.pairs, mode, self.n_samples)?;
        r.flags = self.flags.clone();
        Ok(r)
    }

    /// The fitted decay exponent or rate (`q`, or `μ`).
    pub fn decay(&self) -> f64 {
        -self.slope.value
    }
}

fn sample_gop(spec: &EnsembleSpec, g: &ScalarFunction, lattice_box: &LatticeBox, s: u64) -> Result<HermitianOperator> {
    apply_scalar_function(&build_operator(spec, lattice_box, s)?, g)
}

/// Largest sampled Schatten-`p` norm of `χ_a g(H) χ_b` over cells of side
/// `cell` tiling the box from its lower corner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct A1Estimate {
    pub p: f64,
    pub cell: i64,
    pub estimate: f64,
    pub location: (Vec<i64>, Vec<i64>),
    pub sample: u64,
    pub n_samples: usize,
}

pub fn certify_a1(
    spec: &EnsembleSpec,
    g: &ScalarFunction,
    p: f64,
    lattice_box: &LatticeBox,
    n_samples: usize,
    cell: i64,
) -> Result<A1Estimate> {
    if !(p > 0.0) || cell < 1 {
        return Err(LabError::Precondition(format!("need p > 0 and cell ≥ 1, got p={p}, cell={cell}")));
    }
    let d = lattice_box.dim();
    // Cell corners and their site lists.
    let mut cells: BTreeMap<Vec<i64>, Vec<usize>> = BTreeMap::new();
    for (i, s) in lattice_box.sites().enumerate() {
        let key: Vec<i64> = (0..d).map(|k| (s[k] - lattice_box.lo()[k]).div_euclid(cell)).collect();
        cells.entry(key).or_default().push(i);
    }
    let cells: Vec<(Vec<i64>, Vec<usize>)> = cells.into_iter().collect();
    let per = map_samples(n_samples, |s| {
        let gop = sample_gop(spec, g, lattice_box, s)?;
        let m = gop.matrix();
        let mut best = (0.0f64, 0usize, 0usize);
        for (ia, (_, a)) in cells.iter().enumerate() {
            for (ib, (_, b)) in cells.iter().enumerate() {
                let v = if a.len() == 1 && b.len() == 1 {
                    m[(a[0], b[0])].norm()
                } else {
                    let block = faer::Mat::from_fn(a.len(), b.len(), |i, j| m[(a[i], b[j])]);
                    schatten_norm(block.as_ref(), p)?
                };
                if v > best.0 {
                    best = (v, ia, ib);
                }
            }
        }
        Ok(best)
    })?;
    let (s, &(v, ia, ib)) = per
        .iter()
        .enumerate()
        .fold((0, &(0.0, 0, 0)), |acc, (s, b)| if b.0 > acc.1 .0 { (s, b) } else { acc });
    let corner = |k: &Vec<i64>| -> Vec<i64> { (0..d).map(|i| lattice_box.lo()[i] + k[i] * cell).collect() };
    Ok(A1Estimate {
        p,
        cell,
        estimate: v,
        location: (corner(&cells[ia].0), corner(&cells[ib].0)),
        sample: s as u64,
        n_samples,
    })
}

/// Aggregation over samples and site pairs at a common distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregate {
    /// Largest value over samples and pairs.
    Max,
    /// Mean over samples and pairs.
    Mean,
}

/// Per-distance sums, maxima and counts of `|A[a][b]|` over `b ≥ a` in site
/// order, keyed by the sup distance.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct KernelShells {
    pub sum: Vec<f64>,
    pub max: Vec<f64>,
    pub count: Vec<usize>,
}

impl KernelShells {
    pub fn of(op: &HermitianOperator) -> Self {
        let b = op.lattice_box();
        let sites: Vec<Vec<i64>> = b.sites().collect();
        let rmax = (0..b.dim()).map(|k| b.side(k) as i64 - 1).max().unwrap_or(0) as usize;
        let m = op.matrix();
        let mut k = Self {
            sum: vec![0.0; rmax + 1],
            max: vec![0.0; rmax + 1],
            count: vec![0; rmax + 1],
        };
        for (i, a) in sites.iter().enumerate() {
            for (j, c) in sites.iter().enumerate().skip(i) {
                let r = sup_distance(a, c) as usize;
                let v = m[(i, j)].norm();
                k.sum[r] += v;
                k.max[r] = k.max[r].max(v);
                k.count[r] += 1;
            }
        }
        k
    }

    pub fn merge(&mut self, other: &KernelShells) {
        if self.count.len() < other.count.len() {
            self.sum.resize(other.sum.len(), 0.0);
            self.max.resize(other.max.len(), 0.0);
            self.count.resize(other.count.len(), 0);
        }
        for r in 0..other.count.len() {
            self.sum[r] += other.sum[r];
            self.max[r] = self.max[r].max(other.max[r]);
            self.count[r] += other.count[r];
        }
    }

    pub fn pairs(&self, aggregate: Aggregate) -> Vec<(f64, f64)> {
        (0..self.count.len())
            .filter(|&r| self.count[r] > 0)
            .map(|r| {
                let v = match aggregate {
                    Aggregate::Max => self.max[r],
                    Aggregate::Mean => self.sum[r] / self.count[r] as f64,
                };
                (r as f64, v)
            })
            .collect()
    }
}

/// `(r, value)` pairs of `|g(H)[a][b]|` against the sup distance `r = |a-b|`.
pub fn kernel_decay_pairs(
    spec: &EnsembleSpec,
    g: &ScalarFunction,
    lattice_box: &LatticeBox,
    n_samples: usize,
    aggregate: Aggregate,
) -> Result<Vec<(f64, f64)>> {
    let per = map_samples(n_samples, |s| Ok(KernelShells::of(&sample_gop(spec, g, lattice_box, s)?)))?;
    let mut total = KernelShells::default();
    per.iter().for_each(|k| total.merge(k));
    Ok(total.pairs(aggregate))
}

/// Kernel decay fit: polynomial mode on the sampled maximum, exponential and
/// stretched modes on the sample mean.
pub fn fit_kernel_decay(
    spec: &EnsembleSpec,
    g: &ScalarFunction,
    lattice_box: &LatticeBox,
    n_samples: usize,
    mode: FitMode,
) -> Result<DecayFitReport> {
    if (0..lattice_box.dim()).any(|k| lattice_box.side(k) < 16) {
        return Err(LabError::Precondition("kernel decay fits need box side ≥ 16".into()));
    }
    let aggregate = if mode == FitMode::Polynomial { Aggregate::Max } else { Aggregate::Mean };
    fit_pairs(&kernel_decay_pairs(spec, g, lattice_box, n_samples, aggregate)?, mode, n_samples)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoloConstant {
    pub q_prime: f64,
    pub value: f64,
    /// Share of the weighted sum carried by the outermost distance shell.
    pub last_shell_fraction: f64,
    /// Set when the outermost shell is not negligible: the sum may not have
    /// converged within the box.
    pub tail_flagged: bool,
}

/// `1 + sup_a Σ_b |A[a][b]| ((|a-b|+2)^{q'} - 1) + 1`, with `|a-b|` Euclidean.
pub fn holo_constant_of(op: &HermitianOperator, q_prime: f64) -> HoloConstant {
    let b = op.lattice_box();
    let sites: Vec<Vec<i64>> = b.sites().collect();
    let m = op.matrix();
    let mut best = 0.0f64;
    let mut best_last = 0.0;
    for (i, a) in sites.iter().enumerate() {
        let mut shells: BTreeMap<i64, f64> = BTreeMap::new();
        for (j, c) in sites.iter().enumerate() {
            let v = m[(i, j)].norm();
            if v == 0.0 {
                continue;
            }
            let dist = a.iter().zip(c).map(|(x, y)| ((x - y) as f64).powi(2)).sum::<f64>().sqrt();
            *shells.entry(sup_distance(a, c)).or_default() += v * ((dist + 2.0).powf(q_prime) - 1.0);
        }
        let total: f64 = shells.values().sum();
        if total > best {
            best = total;
            best_last = shells.iter().next_back().map_or(0.0, |(&r, &v)| if r > 0 { v } else { 0.0 });
        }
    }
    let fraction = if best > 0.0 { best_last / best } else { 0.0 };
    HoloConstant {
        q_prime,
        value: 2.0 + best,
        last_shell_fraction: fraction,
        tail_flagged: fraction > 1e-3,
    }
}

/// Largest sampled holomorphic-calculus constant of `g(H)` with
/// `q' = q̃ + d + ε/2`. A certified polynomial exponent `q ≤ 2d + q̃` makes
/// the sum divergent in infinite volume and is rejected.
pub fn holo_constant(
    spec: &EnsembleSpec,
    g: &ScalarFunction,
    q_tilde: f64,
    epsilon: f64,
    lattice_box: &LatticeBox,
    n_samples: usize,
    certified_q: Option<f64>,
) -> Result<HoloConstant> {
    let d = lattice_box.dim() as f64;
    if let Some(q) = certified_q {
        if q <= 2.0 * d + q_tilde {
            return Err(LabError::Divergent(format!(
                "certified exponent {q} does not exceed 2d + q̃ = {}",
                2.0 * d + q_tilde
            )));
        }
    }
    let q_prime = q_tilde + d + epsilon / 2.0;
    let per = map_samples(n_samples, |s| Ok(holo_constant_of(&sample_gop(spec, g, lattice_box, s)?, q_prime)))?;
    Ok(per
        .into_iter()
        .fold(None, |acc: Option<HoloConstant>, h| match acc {
            Some(a) if a.value >= h.value => Some(a),
            _ => Some(h),
        })
        .expect("at least one sample"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombesThomasReport {
    pub window: SpectralWindow,
    pub theta: f64,
    /// Pooled fit of `dist·E‖χ_a R_z χ_b‖` against `dist·|a-b|^θ`.
    pub fit: DecayFitReport,
    /// Largest `‖χ_a R_z χ_b‖ · dist(z, σ)` seen per sample; at most one.
    pub max_scaled_kernel: f64,
    pub bound_violations: usize,
}

/// Resolvent kernel decay of `A = g(H)` on the box for `z` outside the
/// observed spectral window. Kernel norms are averaged over samples and over
/// all pairs at a common sup distance.
pub fn combes_thomas_probe(
    spec: &EnsembleSpec,
    g: &ScalarFunction,
    lattice_box: &LatticeBox,
    n_samples: usize,
    z_grid: &[c64],
    theta: f64,
) -> Result<CombesThomasReport> {
    combes_thomas_core(spec, g, lattice_box, n_samples, z_grid, theta, None)
}

/// Variant comparing `R_z(A_G)` and `R_z(A_{G'})` for `G ⊂ G'`: the kernel
/// difference on `G` against the distance of `a` to the cut.
pub fn combes_thomas_restricted_probe(
    spec: &EnsembleSpec,
    g: &ScalarFunction,
    inner: &Region,
    outer: &Region,
    lattice_box: &LatticeBox,
    n_samples: usize,
    z_grid: &[c64],
    theta: f64,
) -> Result<CombesThomasReport> {
    combes_thomas_core(spec, g, lattice_box, n_samples, z_grid, theta, Some((inner, outer)))
}

fn combes_thomas_core(
    spec: &EnsembleSpec,
    g: &ScalarFunction,
    lattice_box: &LatticeBox,
    n_samples: usize,
    z_grid: &[c64],
    theta: f64,
    regions: Option<(&Region, &Region)>,
) -> Result<CombesThomasReport> {
    if z_grid.is_empty() || !(theta > 0.0) {
        return Err(LabError::Precondition("need a nonempty z grid and θ > 0".into()));
    }
    let decomps = map_samples(n_samples, |s| spectral_decompose(&sample_gop(spec, g, lattice_box, s)?))?;
    let mut window = SpectralWindow::default();
    decomps.iter().for_each(|d| window.observe(d.eigenvalues()));
    for z in z_grid {
        if window.distance(*z) <= 0.0 {
            return Err(LabError::NearSpectrum {
                re: z.re,
                im: z.im,
                distance: 0.0,
            });
        }
    }
    let sites: Vec<Vec<i64>> = lattice_box.sites().collect();
    let masks = match regions {
        Some((inner, outer)) => {
            let mi = region_mask(inner, lattice_box)?;
            let mo = region_mask(outer, lattice_box)?;
            let cut = boundary_sites(&mi, &mo)?;
            Some((mi, mo, cut))
        }
        None => None,
    };
    let mut pairs = Vec::new();
    let mut max_scaled = 0.0f64;
    let mut violations = 0;
    for &z in z_grid {
        let dist = window.distance(z);
        let mut sums: BTreeMap<i64, (f64, usize)> = BTreeMap::new();
        for dec in &decomps {
            let own = dec.distance_to_spectrum(z);
            match &masks {
                None => {
                    let r = dec.resolvent(z)?;
                    for (i, a) in sites.iter().enumerate() {
                        for (j, b) in sites.iter().enumerate().skip(i) {
                            let v = r[(i, j)].norm();
                            max_scaled = max_scaled.max(v * own);
                            if v > 1.0 / own + 1e-8 {
                                violations += 1;
                            }
                            let e = sums.entry(sup_distance(a, b)).or_default();
                            e.0 += v;
                            e.1 += 1;
                        }
                    }
                }
                Some((mi, mo, cut)) => {
                    let g_op = dec.apply(&ScalarFunction::identity())?;
                    let res = |mask: &crate::regions_traces::ProjectionMask| -> Result<(Vec<usize>, faer::Mat<c64>)> {
                        let idx = mask.indices();
                        let sub = crate::dense::gather(g_op.matrix(), &idx);
                        let sub = HermitianOperator::new(
                            LatticeBox::cube(1, 0, idx.len() as i64 - 1)?,
                            sub,
                            "restricted",
                        )?;
                        Ok((idx, spectral_decompose(&sub)?.resolvent(z)?))
                    };
                    let (ii, ri) = res(mi)?;
                    let (io, ro) = res(mo)?;
                    let pos_o: BTreeMap<usize, usize> = io.iter().enumerate().map(|(k, &i)| (i, k)).collect();
                    for (k, &i) in ii.iter().enumerate() {
                        let ko = pos_o[&i];
                        let v = (ri[(k, k)] - ro[(ko, ko)]).norm();
                        let dcut = cut.iter().map(|c| sup_distance(&sites[i], c)).min().unwrap_or(i64::MAX);
                        if dcut == i64::MAX {
                            continue;
                        }
                        let e = sums.entry(dcut).or_default();
                        e.0 += v;
                        e.1 += 1;
                    }
                }
            }
        }
        for (r, (s, n)) in sums {
            pairs.push((dist * (r as f64).powf(theta), dist * s / n as f64));
        }
    }
    // Distances here are already rescaled; fit on all pairs beyond the near field.
    let fit = fit_pairs(&pairs, FitMode::Exponential, n_samples)?;
    Ok(CombesThomasReport {
        window,
        theta,
        fit,
        max_scaled_kernel: max_scaled,
        bound_violations: violations,
    })
}

/// Fits `|E[(h(g(H)_G) - h(g(H)_{G'}))[a][a]]|` for `a ∈ G` against the sup
/// distance of `a` to the cut between `G` and `G'` in the polynomial mode;
/// the fitted exponent is `q̃`. Diagonal cells make the probe symmetric in
/// `(a, b)` by construction.
pub fn trace_difference_probe(
    spec: &EnsembleSpec,
    g: &ScalarFunction,
    h: &ScalarFunction,
    inner: &Region,
    outer: &Region,
    lattice_box: &LatticeBox,
    n_samples: usize,
) -> Result<DecayFitReport> {
    let pairs = trace_difference_pairs(spec, g, h, inner, outer, lattice_box, n_samples)?;
    fit_pairs(&pairs, FitMode::Polynomial, n_samples)
}

pub fn trace_difference_pairs(
    spec: &EnsembleSpec,
    g: &ScalarFunction,
    h: &ScalarFunction,
    inner: &Region,
    outer: &Region,
    lattice_box: &LatticeBox,
    n_samples: usize,
) -> Result<Vec<(f64, f64)>> {
    let mi = region_mask(inner, lattice_box)?;
    let mo = region_mask(outer, lattice_box)?;
    let cut = boundary_sites(&mi, &mo)?;
    if cut.is_empty() {
        return Err(LabError::Precondition("inner region has no boundary inside the outer region".into()));
    }
    let inner_idx = mi.indices();
    let dist: Vec<i64> = inner_idx
        .iter()
        .map(|&i| {
            let a = lattice_box.site(i);
            cut.iter().map(|c| sup_distance(&a, c)).min().unwrap()
        })
        .collect();
    let per = map_samples(n_samples, |s| {
        let gop = sample_gop(spec, g, lattice_box, s)?;
        let di = restricted_function_diagonal(gop.matrix(), mi.bits(), h)?;
        let do_ = restricted_function_diagonal(gop.matrix(), mo.bits(), h)?;
        Ok(inner_idx.iter().map(|&i| di[i] - do_[i]).collect::<Vec<f64>>())
    })?;
    let mut by_dist: BTreeMap<i64, (f64, usize)> = BTreeMap::new();
    for (k, &r) in dist.iter().enumerate() {
        let mean = per.iter().map(|v| v[k]).sum::<f64>() / per.len() as f64;
        let e = by_dist.entry(r).or_default();
        e.0 += mean;
        e.1 += 1;
    }
    Ok(by_dist.into_iter().map(|(r, (s, n))| (r as f64, (s / n as f64).abs())).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functional_calculus::Smoothness;
    use crate::regions_traces::parse_region;

    #[test]
    fn fit_recovers_synthetic_rates() {
        let pairs: Vec<(f64, f64)> = (1..30).map(|r| (r as f64, 3.0 * (-0.4 * r as f64).exp())).collect();
        let f = fit_pairs(&pairs, FitMode::Exponential, 1).unwrap();
        assert!((f.decay() - 0.4).abs() < 1e-10 && (f.prefactor - 3.0).abs() < 1e-9);
        assert!(f.r_squared > 0.999999);
        assert_eq!(f.refit().unwrap(), f);
        let pairs: Vec<(f64, f64)> = (1..30).map(|r| (r as f64, 2.0 * (r as f64).powf(-5.0))).collect();
        let f = fit_pairs(&pairs, FitMode::Polynomial, 1).unwrap();
        assert!((f.decay() - 5.0).abs() < 1e-10);
    }

    #[test]
    fn off_spectrum_is_degenerate() {
        let spec = EnsembleSpec::anderson(1.0, 1);
        let g = ScalarFunction::bump(40.0, 1.0, Smoothness::Finite(4)).unwrap();
        let b = LatticeBox::cube(1, 0, 19).unwrap();
        assert!(matches!(fit_kernel_decay(&spec, &g, &b, 2, FitMode::Exponential), Err(LabError::DegenerateFit(_))));
        assert_eq!(certify_a1(&spec, &g, 1.0, &b, 2, 1).unwrap().estimate, 0.0);
    }

    #[test]
    fn a1_bounded_by_sup_of_g() {
        let spec = EnsembleSpec::anderson(4.0, 2);
        let g = ScalarFunction::bump(3.0, 2.0, Smoothness::Finite(4)).unwrap();
        let b = LatticeBox::cube(1, 0, 15).unwrap();
        let a = certify_a1(&spec, &g, 1.0, &b, 3, 1).unwrap();
        assert!(a.estimate > 0.0 && a.estimate <= 1.0 + 1e-12);
        // Larger p gives the smaller norm on every block.
        let a1 = certify_a1(&spec, &g, 1.0, &b, 2, 4).unwrap();
        let a2 = certify_a1(&spec, &g, 2.0, &b, 2, 4).unwrap();
        assert!(a2.estimate <= a1.estimate + 1e-12);
    }

    #[test]
    fn holo_constant_examples() {
        let b = LatticeBox::cube(1, 0, 4).unwrap();
        let id = HermitianOperator::diagonal(b.clone(), &[1.0; 5], "id").unwrap();
        assert_eq!(holo_constant_of(&id, 2.0).value, 5.0);
        assert_eq!(holo_constant_of(&HermitianOperator::zeros(b.clone(), "0"), 2.0).value, 2.0);

        let v = 0.3;
        let m = faer::Mat::<f64>::from_fn(5, 5, |i, j| if i.abs_diff(j) == 1 { v } else { 0.0 });
        let band = HermitianOperator::from_real(b.clone(), m.as_ref(), "band").unwrap();
        // Interior rows have two neighbours at distance 1: 2v·(3 - 1).
        let brute = (0..5)
            .map(|a: usize| {
                (0..5)
                    .map(|c: usize| if a.abs_diff(c) == 1 { v * ((1.0 + 2.0) - 1.0) } else { 0.0 })
                    .sum::<f64>()
            })
            .fold(0.0, f64::max);
        let h = holo_constant_of(&band, 1.0);
        assert!((h.value - (2.0 + brute)).abs() < 1e-14);
        assert!((brute - 4.0 * v).abs() < 1e-14);
    }

    #[test]
    fn combes_thomas_hard_bound() {
        let spec = EnsembleSpec::anderson(4.0, 3);
        let g = ScalarFunction::identity();
        let b = LatticeBox::cube(1, 0, 23).unwrap();
        let z = [c64::new(-3.0, 0.0), c64::new(5.0, 2.0)];
        let rep = combes_thomas_probe(&spec, &g, &b, 3, &z, 1.0).unwrap();
        assert_eq!(rep.bound_violations, 0);
        assert!(rep.max_scaled_kernel <= 1.0 + 1e-8);
        assert!(rep.fit.decay() > 0.0);
        let inside = [c64::new(3.0, 0.0)];
        assert!(combes_thomas_probe(&spec, &g, &b, 2, &inside, 1.0).is_err());
    }

    #[test]
    fn trace_difference_vanishes_for_identity() {
        let spec = EnsembleSpec::anderson(4.0, 3);
        let g = ScalarFunction::bump(3.0, 2.0, Smoothness::Finite(4)).unwrap();
        let b = LatticeBox::cube(1, 0, 39).unwrap();
        let inner = parse_region("range(1,0,19)", 1).unwrap();
        let outer = parse_region("range(1,0,39)", 1).unwrap();
        let pairs = trace_difference_pairs(&spec, &g, &ScalarFunction::identity(), &inner, &outer, &b, 2).unwrap();
        assert!(pairs.iter().all(|p| p.1 == 0.0));
        assert!(trace_difference_probe(&spec, &g, &ScalarFunction::identity(), &inner, &outer, &b, 2).is_err());
        assert!(trace_difference_pairs(&spec, &g, &ScalarFunction::identity(), &outer, &inner, &b, 2).is_err());
    }
}
