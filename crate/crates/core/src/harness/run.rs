use std::fs;
use std::path::Path;

use faer::c64;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, ExperimentKind};
use super::fit::{fit_expansion, fit_log_enhancement, CrossCheck, FitReport, LogEnhancementReport};
use super::identities::{identity_suite, IdentityInputs};
use super::szego1d::{szego_1d_suite, SymbolPair};
use crate::decay_verify::{
    certify_a1, combes_thomas_probe, fit_kernel_decay, fit_pairs, holo_constant, trace_difference_probe, A1Estimate,
    Aggregate, CombesThomasReport, DecayFitReport, FitMode, HoloConstant, KernelShells,
};
use crate::error::{LabError, Result};
use crate::functional_calculus::function_diagonal;
use crate::lattice_models::LatticeBox;
use crate::regions_traces::parse_region;
use crate::stats::{MCAccumulator, Stat};
use crate::szego_coefficients::{map_samples, sample_g, sample_terms, tabulate, CoefficientPlan, CoefficientTable};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_IDENTITY: i32 = 4;
pub const EXIT_ACCEPTANCE: i32 = 5;

/// Cross-check tolerance in combined standard errors.
pub const CROSS_CHECK_K: f64 = 3.0;

pub fn exit_code(e: &LabError) -> i32 {
    match e {
        LabError::Config(_) | LabError::InvalidEnsemble(..) => EXIT_CONFIG,
        LabError::IdentityFailure(_) => EXIT_IDENTITY,
        LabError::Sample { source, .. } => exit_code(source),
        _ => EXIT_NUMERIC,
    }
}

/// Runs `f` on a pool of `workers` threads, or on the global pool.
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| LabError::Config(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}

/// A result recorded in a report instead of aborting the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome<T> {
    Ok(T),
    Error(String),
}

impl<T> From<Result<T>> for Outcome<T> {
    fn from(r: Result<T>) -> Self {
        match r {
            Ok(v) => Outcome::Ok(v),
            Err(e) => Outcome::Error(e.to_string()),
        }
    }
}

impl<T> Outcome<T> {
    pub fn ok(&self) -> Option<&T> {
        match self {
            Outcome::Ok(v) => Some(v),
            Outcome::Error(_) => None,
        }
    }
}

/// Per-`L` tables, per-sample box traces and kernel shells from one pass
/// over the samples.
#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub tables: Vec<CoefficientTable>,
    /// `[sample][L index]`.
    pub traces: Vec<Vec<f64>>,
    pub kernel: KernelShells,
}

pub fn run_sweep(cfg: &ExperimentConfig, with_error_term: bool) -> Result<SweepOutcome> {
    let plans: Vec<CoefficientPlan> =
        cfg.l_grid.iter().map(|&l| CoefficientPlan::new(cfg.d, l, cfg.r)).collect::<Result<_>>()?;
    let per = map_samples(cfg.samples, |s| {
        let gop = sample_g(&cfg.spec, s, &cfg.g, cfg.d, cfg.r)?;
        Ok((sample_terms(&gop, &cfg.h, &plans, with_error_term)?, KernelShells::of(&gop)))
    })?;
    let mut kernel = KernelShells::default();
    per.iter().for_each(|(_, k)| kernel.merge(k));
    let tables = plans
        .iter()
        .enumerate()
        .map(|(i, p)| tabulate(p, &per.iter().map(|(t, _)| t[i].clone()).collect::<Vec<_>>()))
        .collect();
    let traces = per.iter().map(|(t, _)| t.iter().map(|x| x.box_trace).collect()).collect();
    Ok(SweepOutcome { tables, traces, kernel })
}

fn ells(cfg: &ExperimentConfig) -> Vec<f64> {
    cfg.l_grid.iter().map(|&l| 2.0 * l as f64).collect()
}

fn compare(m: usize, l: i64, fitted: Stat, formula: Stat) -> CrossCheck {
    let se = fitted.stderr.hypot(formula.stderr);
    let diff = (fitted.mean - formula.mean).abs();
    let z_score = if se > 0.0 {
        diff / se
    } else if diff <= 1e-9 * formula.mean.abs().max(1.0) {
        0.0
    } else {
        f64::INFINITY
    };
    CrossCheck {
        m,
        L: l,
        fitted,
        formula,
        z_score,
        agrees: z_score <= CROSS_CHECK_K,
        gated: m == 1,
    }
}

/// Sweep, expansion fit and (optionally) the cross-check against the
/// finite-volume formula at the largest `L`.
pub fn sweep_and_fit(cfg: &ExperimentConfig) -> Result<(FitReport, SweepOutcome)> {
    let sweep = run_sweep(cfg, false)?;
    let mut fit = fit_expansion(cfg.d, &ells(cfg), &sweep.traces)?;
    if cfg.cross_check {
        let t = sweep.tables.last().expect("non-empty grid");
        fit.cross_check = Some((0..=cfg.d).map(|m| compare(m, t.L, fit.a_hat[m], t.A_fv[m])).collect());
    }
    Ok((fit, sweep))
}

/// Kernel decay fits from merged shells: exponential on means, polynomial on
/// maxima.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelReport {
    pub exponential: Outcome<DecayFitReport>,
    pub polynomial: Outcome<DecayFitReport>,
}

pub fn kernel_report(k: &KernelShells, n_samples: usize) -> KernelReport {
    KernelReport {
        exponential: fit_pairs(&k.pairs(Aggregate::Mean), FitMode::Exponential, n_samples).into(),
        polynomial: fit_pairs(&k.pairs(Aggregate::Max), FitMode::Polynomial, n_samples).into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub kernel: KernelReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace_difference: Option<Outcome<DecayFitReport>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub combes_thomas: Option<Outcome<CombesThomasReport>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub holo_constant: Option<Outcome<HoloConstant>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a1: Option<Outcome<A1Estimate>>,
}

/// Full decay certification on `{-half..half}^d`.
pub fn verify_decay(cfg: &ExperimentConfig) -> Result<DecayReport> {
    let dc = &cfg.decay;
    let n = dc.samples.unwrap_or(cfg.samples);
    let b = LatticeBox::centered(cfg.d, dc.half_side)?;
    let kernel = KernelReport {
        exponential: fit_kernel_decay(&cfg.spec, &cfg.g, &b, n, FitMode::Exponential).into(),
        polynomial: fit_kernel_decay(&cfg.spec, &cfg.g, &b, n, FitMode::Polynomial).into(),
    };
    let trace_difference: Option<Outcome<DecayFitReport>> = (cfg.d == 1).then(|| {
        let l = dc.trace_l;
        let run = || -> Result<DecayFitReport> {
            let inner = parse_region(&format!("range(1,0,{})", 2 * l), 1)?;
            let outer = parse_region(&format!("range(1,0,{})", 4 * l), 1)?;
            let tb = LatticeBox::cube(1, 0, 4 * l)?;
            trace_difference_probe(&cfg.spec, &cfg.g, &cfg.h, &inner, &outer, &tb, n)
        };
        run().into()
    });
    let z: Vec<c64> = if dc.z.is_empty() {
        vec![c64::new(-1.0, 1.0)]
    } else {
        dc.z.iter().map(|&[re, im]| c64::new(re, im)).collect()
    };
    let combes_thomas = Some(combes_thomas_probe(&cfg.spec, &cfg.g, &b, n, &z, dc.theta).into());
    let q_tilde = trace_difference.as_ref().and_then(|t| t.ok()).map(|t| t.decay());
    let holo = q_tilde.map(|qt| {
        // Certified exponential decay dominates every polynomial rate.
        let exponential = kernel.exponential.ok().is_some_and(|e| e.decay() > 0.0 && e.r_squared >= 0.95);
        let certified = if exponential { None } else { kernel.polynomial.ok().map(|p| p.decay()) };
        holo_constant(&cfg.spec, &cfg.g, qt, dc.epsilon, &b, n, certified).into()
    });
    let a1 = Some(certify_a1(&cfg.spec, &cfg.g, 1.0, &b, n, 2).into());
    Ok(DecayReport {
        kernel,
        trace_difference,
        combes_thomas,
        holo_constant: holo,
        a1,
    })
}

/// Box traces `Tr h(g(H)_Λ)` per sample for every `L` of the grid.
pub fn box_traces(cfg: &ExperimentConfig) -> Result<Vec<Vec<f64>>> {
    map_samples(cfg.samples, |s| {
        let gop = sample_g(&cfg.spec, s, &cfg.g, cfg.d, cfg.r)?;
        cfg.l_grid
            .iter()
            .map(|&l| {
                let lam = LatticeBox::cube(cfg.d, -l, l - 1)?;
                Ok(function_diagonal(gop.sub_box(&lam)?.matrix(), &cfg.h)?.iter().sum())
            })
            .collect()
    })
}

pub fn log_enhancement_probe(cfg: &ExperimentConfig) -> Result<(LogEnhancementReport, Vec<Vec<f64>>)> {
    let traces = box_traces(cfg)?;
    Ok((fit_log_enhancement(cfg.d, &ells(cfg), &traces)?, traces))
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    fs::write(dir.join(name), contents).map_err(LabError::from)
}

fn write_json<T: Serialize>(dir: &Path, name: &str, v: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    write(dir, name, &s)
}

fn sweep_csv(ell: &[f64], traces: &[Vec<f64>]) -> String {
    let mut s = String::from("ell,trace_mean,trace_stderr,n_samples\n");
    for (i, l) in ell.iter().enumerate() {
        let a = MCAccumulator::from_values(&traces.iter().map(|r| r[i]).collect::<Vec<_>>());
        s += &format!("{l},{},{},{}\n", a.mean, a.stderr(), a.count);
    }
    s
}

fn coefficients_json(t: &CoefficientTable) -> Result<serde_json::Value> {
    let mut v = serde_json::to_value(t)?;
    let adj: Vec<_> = (1..=t.d).map(|m| t.partition_free.adjudicate(m, CROSS_CHECK_K)).collect();
    v["adjudication"] = serde_json::to_value(adj)?;
    Ok(v)
}

fn all_tables_csv(tables: &[CoefficientTable]) -> String {
    let mut s = String::from("L,quantity,m,n,mean,stderr\n");
    for t in tables {
        for line in t.to_csv().lines().skip(1) {
            s += &format!("{},{line}\n", t.L);
        }
    }
    s
}

/// Summary line and exit code of a finished run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunSummary {
    pub code: i32,
    pub message: String,
}

fn summary(code: i32, message: impl Into<String>) -> RunSummary {
    RunSummary {
        code,
        message: message.into(),
    }
}

/// Runs one experiment and writes its artifacts under `cfg.out`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunSummary> {
    fs::create_dir_all(&cfg.out).map_err(LabError::from)?;
    let out = cfg.out.as_path();
    with_workers(cfg.workers, || run_kind(cfg, out))?
}

fn run_kind(cfg: &ExperimentConfig, out: &Path) -> Result<RunSummary> {
    match cfg.kind {
        ExperimentKind::ExpansionFit => {
            let (fit, sweep) = sweep_and_fit(cfg)?;
            write(out, "sweep.csv", &sweep_csv(&ells(cfg), &sweep.traces))?;
            write_json(out, "fit-report.json", &fit)?;
            write_json(out, "coefficients.json", &coefficients_json(sweep.tables.last().unwrap())?)?;
            write(out, "coefficients.csv", &all_tables_csv(&sweep.tables))?;
            write_json(out, "decay-report.json", &kernel_report(&sweep.kernel, cfg.samples))?;
            let failed: Vec<usize> = fit
                .cross_check
                .iter()
                .flatten()
                .filter(|c| c.gated && !c.agrees)
                .map(|c| c.m)
                .collect();
            if failed.is_empty() {
                Ok(summary(EXIT_OK, format!("fitted {} coefficients", fit.a_hat.len())))
            } else {
                Ok(summary(EXIT_ACCEPTANCE, format!("cross-check failed for m = {failed:?}")))
            }
        }
        ExperimentKind::CoefficientFormula => {
            let sweep = run_sweep(cfg, true)?;
            write(out, "sweep.csv", &sweep_csv(&ells(cfg), &sweep.traces))?;
            write_json(out, "coefficients.json", &coefficients_json(sweep.tables.last().unwrap())?)?;
            write(out, "coefficients.csv", &all_tables_csv(&sweep.tables))?;
            write_json(out, "decay-report.json", &kernel_report(&sweep.kernel, cfg.samples))?;
            Ok(summary(EXIT_OK, format!("coefficient tables for {} values of L", sweep.tables.len())))
        }
        ExperimentKind::IdentityChecks => {
            let inputs = IdentityInputs {
                spec: cfg.spec.clone(),
                g: cfg.g.clone(),
                h: cfg.h.clone(),
                seed: cfg.spec.seed,
                telescoping_trials: cfg.samples as u64,
            };
            let report = identity_suite(&[cfg.d], 4, &inputs)?;
            write_json(out, "identities.json", &report)?;
            if report.passed {
                Ok(summary(EXIT_OK, "all identities hold"))
            } else {
                Ok(summary(EXIT_IDENTITY, "identity residuals above tolerance"))
            }
        }
        ExperimentKind::Szego1d => {
            let sc = cfg.szego1d.as_ref().ok_or_else(|| LabError::Config("missing [szego1d]".into()))?;
            let pair = SymbolPair::from_config(sc)?;
            let ls: Vec<usize> = if cfg.l_grid.is_empty() {
                vec![25, 50, 100, 200, 400]
            } else {
                cfg.l_grid.iter().map(|&l| l as usize).collect()
            };
            let h = (cfg.h.eval(0.0) == 0.0).then_some(&cfg.h);
            let report = szego_1d_suite(&pair, h, &ls)?;
            write_json(out, "szego1d.json", &report)?;
            write(out, "szego1d.csv", &report.to_csv())?;
            Ok(summary(EXIT_OK, format!("strong Szegő constant {}", report.strong_constant)))
        }
        ExperimentKind::LogEnhancement => {
            let (report, traces) = log_enhancement_probe(cfg)?;
            write(out, "sweep.csv", &sweep_csv(&ells(cfg), &traces))?;
            write_json(out, "log-enhancement.json", &report)?;
            Ok(summary(EXIT_OK, format!("alpha = {} ± {}", report.alpha.value, report.alpha.ci95)))
        }
        ExperimentKind::Verify => {
            let report = verify_decay(cfg)?;
            write_json(out, "decay-report.json", &report)?;
            match report.kernel.exponential.ok() {
                Some(f) if f.decay() > 0.0 => Ok(summary(EXIT_OK, format!("kernel decay rate {}", f.decay()))),
                _ => Ok(summary(EXIT_ACCEPTANCE, "no certified kernel decay")),
            }
        }
    }
}
