use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::functional_calculus::ScalarFunction;
use crate::lattice_models::EnsembleSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    ExpansionFit,
    CoefficientFormula,
    IdentityChecks,
    #[serde(rename = "szego_1d")]
    Szego1d,
    LogEnhancement,
    Verify,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExperiment {
    kind: ExperimentKind,
    #[serde(default = "one")]
    d: usize,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default = "one")]
    samples: usize,
    #[serde(default = "default_out")]
    out: PathBuf,
    #[serde(default)]
    workers: Option<usize>,
    #[serde(default = "yes")]
    cross_check: bool,
}

fn one() -> usize {
    1
}
fn yes() -> bool {
    true
}
fn default_out() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFunction {
    function: String,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    #[serde(rename = "L", default)]
    l: Vec<i64>,
    #[serde(rename = "R")]
    r: Option<i64>,
}

/// Decay certification settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecayConfig {
    /// Half-side of the box `{-half..half}^d` for kernel fits.
    #[serde(default = "default_half")]
    pub half_side: i64,
    #[serde(default)]
    pub samples: Option<usize>,
    /// `L` of the trace-difference probe (`G = [0,2L]`, `G' = [0,4L]`).
    #[serde(default = "default_trace_l")]
    pub trace_l: i64,
    #[serde(default = "default_theta")]
    pub theta: f64,
    /// Spectral parameters as `[re, im]`; empty picks one below the window.
    #[serde(default)]
    pub z: Vec<[f64; 2]>,
    #[serde(default = "default_eps")]
    pub epsilon: f64,
}

fn default_half() -> i64 {
    40
}
fn default_trace_l() -> i64 {
    30
}
fn default_theta() -> f64 {
    1.0
}
fn default_eps() -> f64 {
    0.5
}

impl Default for DecayConfig {
    fn default() -> Self {
        Self {
            half_side: default_half(),
            samples: None,
            trace_l: default_trace_l(),
            theta: default_theta(),
            z: vec![],
            epsilon: default_eps(),
        }
    }
}

/// Classical 1-D settings: a symbol by its Fourier coefficients or by those
/// of its logarithm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Szego1dConfig {
    /// `[k, re]` or `[k, re, im]` entries of `a`.
    #[serde(default)]
    pub coeffs: Vec<Vec<f64>>,
    /// `[k, re]` or `[k, re, im]` entries of `log a`.
    #[serde(default)]
    pub log_coeffs: Vec<Vec<f64>>,
    #[serde(default = "default_kmax")]
    pub k_max: usize,
}

fn default_kmax() -> usize {
    64
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    experiment: RawExperiment,
    #[serde(default)]
    ensemble: Option<toml::Table>,
    #[serde(default)]
    g: Option<RawFunction>,
    #[serde(default)]
    h: Option<RawFunction>,
    #[serde(default)]
    sweep: RawSweep,
    #[serde(default)]
    decay: DecayConfig,
    #[serde(default)]
    szego1d: Option<Szego1dConfig>,
}

/// Validated experiment configuration.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub d: usize,
    pub spec: EnsembleSpec,
    pub g: ScalarFunction,
    pub h: ScalarFunction,
    /// Half-sides `L`; the boxes are `{-L..L-1}^d` of side `ℓ = 2L`.
    pub l_grid: Vec<i64>,
    pub r: i64,
    pub samples: usize,
    pub out: PathBuf,
    pub workers: Option<usize>,
    pub cross_check: bool,
    pub decay: DecayConfig,
    pub szego1d: Option<Szego1dConfig>,
}

/// Command-line overrides.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub samples: Option<usize>,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
}

fn parse_function(f: Option<&RawFunction>, name: &str, default: &str) -> Result<ScalarFunction> {
    let src = f.map_or(default, |f| f.function.as_str());
    src.parse()
        .map_err(|e| LabError::Config(format!("[{name}] function `{src}`: {e}")))
}

impl ExperimentConfig {
    pub fn from_toml_str(src: &str, overrides: &Overrides) -> Result<Self> {
        let raw: RawConfig = toml::from_str(src).map_err(|e| LabError::Config(e.to_string()))?;
        let e = raw.experiment;
        let mut spec = match &raw.ensemble {
            Some(t) => EnsembleSpec::from_table(t)?,
            None => EnsembleSpec::free(),
        };
        if let Some(s) = overrides.seed.or(e.seed) {
            spec.seed = s;
        }
        let cfg = Self {
            kind: e.kind,
            d: e.d,
            spec,
            g: parse_function(raw.g.as_ref(), "g", "x")?,
            h: parse_function(raw.h.as_ref(), "h", "x")?,
            l_grid: raw.sweep.l,
            r: raw.sweep.r.unwrap_or(0),
            samples: overrides.samples.unwrap_or(e.samples),
            out: overrides.out.clone().unwrap_or(e.out),
            workers: overrides.workers.or(e.workers),
            cross_check: e.cross_check,
            decay: raw.decay,
            szego1d: raw.szego1d,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self> {
        let src = std::fs::read_to_string(path)
            .map_err(|e| LabError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&src, overrides)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.d) {
            return Err(LabError::Config(format!("d = {} outside 1..=3", self.d)));
        }
        if self.samples == 0 {
            return Err(LabError::Config("sample budget must be at least 1".into()));
        }
        if self.workers == Some(0) {
            return Err(LabError::Config("workers must be at least 1".into()));
        }
        let needs_grid = matches!(
            self.kind,
            ExperimentKind::ExpansionFit | ExperimentKind::CoefficientFormula | ExperimentKind::LogEnhancement
        );
        if needs_grid {
            if self.l_grid.is_empty() {
                return Err(LabError::Config("[sweep] L grid is empty".into()));
            }
            if self.l_grid[0] < 1 || self.l_grid.windows(2).any(|w| w[0] >= w[1]) {
                return Err(LabError::Config("[sweep] L grid must be positive and strictly increasing".into()));
            }
            let lmax = *self.l_grid.last().unwrap();
            if 2 * lmax > self.r {
                return Err(LabError::Config(format!("need 2·max(L) ≤ R, got max(L)={lmax}, R={}", self.r)));
            }
            self.spec.validate(self.d).map_err(|e| LabError::Config(e.to_string()))?;
        }
        if self.kind == ExperimentKind::ExpansionFit && self.l_grid.len() < self.d + 2 {
            return Err(LabError::Config(format!("expansion fit needs at least {} grid points", self.d + 2)));
        }
        if self.kind == ExperimentKind::Szego1d && self.szego1d.is_none() {
            return Err(LabError::Config("szego_1d needs a [szego1d] section".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
[experiment]
kind = "expansion_fit"
d = 1
seed = 7
samples = 4

[ensemble]
kind = "anderson"
W = 8.0

[g]
function = "bump(2,1.5,4)"

[h]
function = "poly(0,0,1)"

[sweep]
L = [4, 6, 8]
R = 20
"#;

    #[test]
    fn parses_and_overrides() {
        let c = ExperimentConfig::from_toml_str(BASE, &Overrides::default()).unwrap();
        assert_eq!((c.spec.seed, c.samples, c.r), (7, 4, 20));
        let o = Overrides {
            seed: Some(9),
            samples: Some(2),
            ..Default::default()
        };
        let c = ExperimentConfig::from_toml_str(BASE, &o).unwrap();
        assert_eq!((c.spec.seed, c.samples), (9, 2));
    }

    #[test]
    fn rejects_invalid() {
        for bad in [
            BASE.replace("L = [4, 6, 8]", "L = [4, 8, 6]"),
            BASE.replace("R = 20", "R = 10"),
            BASE.replace("samples = 4", "samples = 0"),
            BASE.replace("L = [4, 6, 8]", "L = [4, 6]"),
            BASE.replace("kind = \"expansion_fit\"", "kind = \"nope\""),
            BASE.replace("bump(2,1.5,4)", "bump(2"),
            BASE.replace("W = 8.0", "W = 8.0\nbogus = 1"),
        ] {
            assert!(matches!(ExperimentConfig::from_toml_str(&bad, &Overrides::default()), Err(LabError::Config(_))), "{bad}");
        }
    }
}
