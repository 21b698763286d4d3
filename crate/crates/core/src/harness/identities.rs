use faer::{c64, Mat};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::functional_calculus::ScalarFunction;
use crate::lattice_models::{site_uniform, EnsembleSpec, HermitianOperator, LatticeBox};
use crate::regions_traces::ProjectionMask;
use crate::szego_coefficients::{
    decomposition_identity_probe, inclusion_exclusion_check, sample_g, sample_terms, telescoping_check, CoefficientPlan,
    IdentityProbe, PermutationPartition,
};

/// Relative tolerance for floating-point identities.
pub const FLOAT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionCheck {
    pub d: usize,
    pub n: usize,
    pub blocks: usize,
    pub exact_cover: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InclusionExclusionCheck {
    pub d: usize,
    pub n: usize,
    pub l: usize,
    pub k: Vec<usize>,
    pub side: i64,
    pub residual: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelescopingCheck {
    pub d: usize,
    pub trial: u64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullityCheck {
    pub d: usize,
    /// `max_{m ≥ 1} |A_m^{(L)}|` for `h = id`.
    pub max_abs_a: f64,
    pub error_term: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub side: i64,
    pub partitions: Vec<PartitionCheck>,
    pub inclusion_exclusion: Vec<InclusionExclusionCheck>,
    pub telescoping: Vec<TelescopingCheck>,
    pub nullity: Vec<NullityCheck>,
    pub decomposition: Vec<IdentityProbe>,
    pub passed: bool,
}

/// Operators for the identity checks.
#[derive(Debug, Clone)]
pub struct IdentityInputs {
    pub spec: EnsembleSpec,
    pub g: ScalarFunction,
    pub h: ScalarFunction,
    pub seed: u64,
    pub telescoping_trials: u64,
}

fn random_hermitian(b: &LatticeBox, seed: u64, trial: u64, n: usize) -> Result<HermitianOperator> {
    let dim = b.site_count();
    let u = |i: usize, j: usize, part: i64| site_uniform(seed, trial, &[n as i64, i as i64, j as i64, part]) - 0.5;
    let m = Mat::from_fn(dim, dim, |i, j| match i.cmp(&j) {
        std::cmp::Ordering::Equal => c64::new(u(i, i, 0), 0.0),
        std::cmp::Ordering::Less => c64::new(u(i, j, 0), u(i, j, 1)),
        std::cmp::Ordering::Greater => c64::new(u(j, i, 0), -u(j, i, 1)),
    });
    HermitianOperator::new(b.clone(), m, format!("random f_{n}"))
}

/// Half-side and truncation radius of the decomposition probe in dimension `d`.
fn probe_size(d: usize) -> (i64, i64) {
    if d >= 3 {
        (1, 4)
    } else {
        (2, 8)
    }
}

/// Exact combinatorial identities on `{0..side-1}^d`, random telescoping
/// families, nullity for `h = id` and the pointwise corner decomposition.
pub fn identity_suite(dims: &[usize], side: i64, inputs: &IdentityInputs) -> Result<IdentityReport> {
    let mut partitions = Vec::new();
    let mut inclusion_exclusion = Vec::new();
    let mut telescoping = Vec::new();
    let mut nullity = Vec::new();
    let mut decomposition = Vec::new();
    for &d in dims {
        for n in 1..=d {
            let part = PermutationPartition::new(d, n)?;
            partitions.push(PartitionCheck {
                d,
                n,
                blocks: part.blocks.len(),
                exact_cover: part.is_exact_cover(),
            });
            for b in &part.blocks {
                inclusion_exclusion.push(InclusionExclusionCheck {
                    d,
                    n,
                    l: b.l,
                    k: b.k.clone(),
                    side,
                    residual: inclusion_exclusion_check(n, b.l, &b.k, side, d)?,
                });
            }
        }
        let cube = LatticeBox::cube(d, 0, side - 1)?;
        let probe = ProjectionMask::new(cube.clone(), vec![true; cube.site_count()])?;
        for trial in 0..inputs.telescoping_trials {
            let family: Vec<HermitianOperator> =
                (0..=d).map(|n| random_hermitian(&cube, inputs.seed, trial, n)).collect::<Result<_>>()?;
            telescoping.push(TelescopingCheck {
                d,
                trial,
                residual: telescoping_check(&family, &probe)?,
            });
        }
        let (l, r) = probe_size(d);
        if d <= 2 {
            let gop = sample_g(&inputs.spec, 0, &inputs.g, d, r)?;
            let plan = [CoefficientPlan::new(d, l, r)?];
            let t = &sample_terms(&gop, &ScalarFunction::identity(), &plan, true)?[0];
            nullity.push(NullityCheck {
                d,
                max_abs_a: t.a_m[1..].iter().fold(0.0, |a, v| a.max(v.abs())),
                error_term: t.error_term.unwrap_or(0.0),
            });
        }
        decomposition.push(decomposition_identity_probe(&inputs.spec, 0, &inputs.g, &inputs.h, d, l, r, None)?);
    }
    let passed = partitions.iter().all(|p| p.exact_cover)
        && inclusion_exclusion.iter().all(|c| c.residual == 0)
        && telescoping.iter().all(|c| c.residual <= FLOAT_TOL)
        && nullity.iter().all(|c| c.max_abs_a <= FLOAT_TOL && c.error_term.abs() <= FLOAT_TOL)
        && decomposition.iter().all(IdentityProbe::holds);
    Ok(IdentityReport {
        side,
        partitions,
        inclusion_exclusion,
        telescoping,
        nullity,
        decomposition,
        passed,
    })
}
