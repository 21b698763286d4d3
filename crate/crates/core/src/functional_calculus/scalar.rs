use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

const ENVELOPE_SAMPLES: usize = 1000;
/// Sampling half-width used for envelope checks of functions without compact support.
const UNBOUNDED_SAMPLE_RADIUS: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Smoothness {
    /// Class `C^k`: the profile `(1 - t^2)^{k+1}`.
    Finite(u32),
    /// The profile `e · exp(-1/(1 - t^2))`.
    Infinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum EntireKind {
    Exp,
    Sin,
    Cos,
    Sinh,
    Cosh,
    /// `exp(-x^2)`.
    Gauss,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FunctionKind {
    /// `Σ c_k x^k`, coefficients in ascending order.
    Polynomial(Vec<f64>),
    Bump {
        center: f64,
        width: f64,
        smoothness: Smoothness,
    },
    /// `1` on `(a, b]`; use infinite endpoints for half-lines.
    Indicator { a: f64, b: f64 },
    Entire(EntireKind),
    /// `outer(inner(x))`.
    Compose(Box<ScalarFunction>, Box<ScalarFunction>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Support {
    Interval(f64, f64),
    All,
}

/// Growth bound `|f(x)| <= c |x|^gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub c: f64,
    pub gamma: f64,
}

/// A real-valued function of one real variable with analytic derivatives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarFunction {
    pub kind: FunctionKind,
    pub envelope: Option<Envelope>,
}

impl ScalarFunction {
    fn from_kind(kind: FunctionKind) -> Self {
        Self { kind, envelope: None }
    }

    pub fn polynomial(coeffs: Vec<f64>) -> Self {
        Self::from_kind(FunctionKind::Polynomial(coeffs))
    }

    pub fn identity() -> Self {
        Self::polynomial(vec![0.0, 1.0])
    }

    pub fn zero() -> Self {
        Self::polynomial(vec![])
    }

    pub fn bump(center: f64, width: f64, smoothness: Smoothness) -> Result<Self> {
        if !(width > 0.0 && width.is_finite() && center.is_finite()) {
            return Err(LabError::Config(format!("bump needs finite center and width > 0 (got {center}, {width})")));
        }
        Ok(Self::from_kind(FunctionKind::Bump {
            center,
            width,
            smoothness,
        }))
    }

    pub fn indicator(a: f64, b: f64) -> Result<Self> {
        if a.is_nan() || b.is_nan() || a >= b {
            return Err(LabError::Config(format!("indicator needs a < b (got {a}, {b})")));
        }
        Ok(Self::from_kind(FunctionKind::Indicator { a, b }))
    }

    pub fn entire(kind: EntireKind) -> Self {
        Self::from_kind(FunctionKind::Entire(kind))
    }

    pub fn compose(outer: ScalarFunction, inner: ScalarFunction) -> Self {
        Self::from_kind(FunctionKind::Compose(Box::new(outer), Box::new(inner)))
    }

    /// Declares `|f(x)| <= c |x|^gamma` and verifies it on 1000 sample points.
    pub fn with_envelope(mut self, c: f64, gamma: f64) -> Result<Self> {
        let (lo, hi) = match self.support() {
            Support::Interval(a, b) if a.is_finite() && b.is_finite() => (a, b),
            _ => (-UNBOUNDED_SAMPLE_RADIUS, UNBOUNDED_SAMPLE_RADIUS),
        };
        for j in 0..ENVELOPE_SAMPLES {
            let x = lo + (hi - lo) * j as f64 / (ENVELOPE_SAMPLES - 1) as f64;
            let bound = c * x.abs().powf(gamma);
            if self.eval(x).abs() > bound * (1.0 + 1e-12) + 1e-300 {
                return Err(LabError::EnvelopeViolated { c, gamma, x });
            }
        }
        self.envelope = Some(Envelope { c, gamma });
        Ok(self)
    }

    pub fn support(&self) -> Support {
        match &self.kind {
            FunctionKind::Bump { center, width, .. } => Support::Interval(center - width, center + width),
            FunctionKind::Indicator { a, b } => Support::Interval(*a, *b),
            FunctionKind::Polynomial(c) if c.iter().all(|&v| v == 0.0) => Support::Interval(0.0, 0.0),
            _ => Support::All,
        }
    }

    /// Largest derivative order available everywhere (`None` = unlimited).
    pub fn smoothness(&self) -> Option<u32> {
        match &self.kind {
            FunctionKind::Polynomial(_) | FunctionKind::Entire(_) => None,
            FunctionKind::Bump { smoothness, .. } => match smoothness {
                Smoothness::Finite(k) => Some(*k),
                Smoothness::Infinite => None,
            },
            FunctionKind::Indicator { .. } => Some(0),
            FunctionKind::Compose(o, i) => match (o.smoothness(), i.smoothness()) {
                (None, None) => None,
                (a, b) => Some(a.unwrap_or(u32::MAX).min(b.unwrap_or(u32::MAX))),
            },
        }
    }

    /// Coefficients when `f` is a polynomial of degree at most 2.
    pub fn as_low_degree_poly(&self) -> Option<[f64; 3]> {
        match &self.kind {
            FunctionKind::Polynomial(c) => {
                let deg = c.iter().rposition(|&v| v != 0.0).map_or(0, |p| p);
                (deg <= 2).then(|| [0, 1, 2].map(|k| c.get(k).copied().unwrap_or(0.0)))
            }
            _ => None,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match &self.kind {
            FunctionKind::Indicator { a, b } => {
                if *a < x && x <= *b {
                    1.0
                } else {
                    0.0
                }
            }
            FunctionKind::Compose(o, i) => o.eval(i.eval(x)),
            _ => self.derivative_unchecked(0, x),
        }
    }

    /// `f^{(r)}(x)`. Finite-smoothness bumps provide all orders piecewise
    /// (the order `k+1` derivative jumps at the support edges).
    pub fn derivative(&self, r: usize, x: f64) -> Result<f64> {
        self.check_derivatives(r)?;
        Ok(self.derivative_unchecked(r, x))
    }

    pub fn check_derivatives(&self, r: usize) -> Result<()> {
        match &self.kind {
            FunctionKind::Indicator { .. } if r > 0 => Err(LabError::DerivativesUnavailable(r)),
            FunctionKind::Compose(o, i) => {
                o.check_derivatives(r)?;
                i.check_derivatives(r)
            }
            _ => Ok(()),
        }
    }

    /// All derivatives `f, f', .., f^{(r)}` at `x`.
    pub fn derivatives(&self, r: usize, x: f64) -> Result<Vec<f64>> {
        self.check_derivatives(r)?;
        Ok(self.derivatives_unchecked(r, x))
    }

    fn derivative_unchecked(&self, r: usize, x: f64) -> f64 {
        match &self.kind {
            FunctionKind::Polynomial(c) => poly_derivative(c, r, x),
            _ => self.derivatives_unchecked(r, x)[r],
        }
    }

    fn derivatives_unchecked(&self, r: usize, x: f64) -> Vec<f64> {
        match &self.kind {
            FunctionKind::Polynomial(c) => (0..=r).map(|k| poly_derivative(c, k, x)).collect(),
            FunctionKind::Indicator { .. } => {
                let mut v = vec![0.0; r + 1];
                v[0] = self.eval(x);
                v
            }
            FunctionKind::Entire(kind) => entire_derivatives(*kind, r, x),
            FunctionKind::Bump {
                center,
                width,
                smoothness,
            } => {
                let t = (x - center) / width;
                let mut v = if t.abs() >= 1.0 {
                    vec![0.0; r + 1]
                } else {
                    match smoothness {
                        Smoothness::Finite(k) => {
                            let p = poly_bump(*k);
                            (0..=r).map(|j| poly_derivative(&p, j, t)).collect()
                        }
                        Smoothness::Infinite => exp_bump_derivatives(r, t),
                    }
                };
                let mut scale = 1.0;
                for item in v.iter_mut() {
                    *item *= scale;
                    scale /= width;
                }
                v
            }
            FunctionKind::Compose(o, i) => {
                let gi = i.derivatives_unchecked(r, x);
                let fo = o.derivatives_unchecked(r, gi[0]);
                faa_di_bruno(&fo, &gi)
            }
        }
    }
}

fn poly_derivative(c: &[f64], r: usize, x: f64) -> f64 {
    // Horner on the r-th derivative's coefficients.
    let mut acc = 0.0;
    for k in (r..c.len()).rev() {
        let falling: f64 = ((k - r + 1)..=k).map(|v| v as f64).product();
        acc = acc * x + c[k] * falling;
    }
    acc
}

/// Coefficients of `(1 - t^2)^{k+1}`.
fn poly_bump(k: u32) -> Vec<f64> {
    let m = (k + 1) as usize;
    let mut c = vec![0.0; 2 * m + 1];
    let mut binom = 1.0;
    for j in 0..=m {
        c[2 * j] = if j % 2 == 0 { binom } else { -binom };
        binom = binom * (m - j) as f64 / (j + 1) as f64;
    }
    c
}

/// Derivatives in `t` of `e · exp(φ(t))`, `φ = -1/(1 - t^2)`, `|t| < 1`.
fn exp_bump_derivatives(r: usize, t: f64) -> Vec<f64> {
    let f0 = (1.0 + (-1.0 / (1.0 - t * t))).exp();
    let mut f = vec![0.0; r + 1];
    f[0] = f0;
    if f0 == 0.0 {
        return f;
    }
    // φ = -(1/2)[1/(1-t) + 1/(1+t)]
    let (a, b) = (1.0 - t, 1.0 + t);
    let mut phi = vec![0.0; r + 1]; // phi[j] = φ^{(j)}
    let mut fact = 1.0;
    for (j, p) in phi.iter_mut().enumerate() {
        if j > 0 {
            fact *= j as f64;
        }
        let sgn = if j % 2 == 0 { 1.0 } else { -1.0 };
        *p = -0.5 * fact * (a.powi(-(j as i32) - 1) + sgn * b.powi(-(j as i32) - 1));
    }
    // f^{(m+1)} = Σ_j C(m, j) φ^{(j+1)} f^{(m-j)}
    for m in 0..r {
        let mut acc = 0.0;
        let mut binom = 1.0;
        for j in 0..=m {
            acc += binom * phi[j + 1] * f[m - j];
            binom = binom * (m - j) as f64 / (j + 1) as f64;
        }
        f[m + 1] = acc;
    }
    f
}

fn entire_derivatives(kind: EntireKind, r: usize, x: f64) -> Vec<f64> {
    match kind {
        EntireKind::Exp => vec![x.exp(); r + 1],
        EntireKind::Sin => (0..=r).map(|k| [x.sin(), x.cos(), -x.sin(), -x.cos()][k % 4]).collect(),
        EntireKind::Cos => (0..=r).map(|k| [x.cos(), -x.sin(), -x.cos(), x.sin()][k % 4]).collect(),
        EntireKind::Sinh => (0..=r).map(|k| if k % 2 == 0 { x.sinh() } else { x.cosh() }).collect(),
        EntireKind::Cosh => (0..=r).map(|k| if k % 2 == 0 { x.cosh() } else { x.sinh() }).collect(),
        EntireKind::Gauss => {
            // d^k exp(-x^2) = (-1)^k H_k(x) exp(-x^2), physicists' Hermite.
            let g = (-x * x).exp();
            let mut h = vec![1.0, 2.0 * x];
            while h.len() <= r {
                let k = h.len() - 1;
                h.push(2.0 * x * h[k] - 2.0 * k as f64 * h[k - 1]);
            }
            (0..=r).map(|k| if k % 2 == 0 { h[k] * g } else { -h[k] * g }).collect()
        }
    }
}

/// Derivatives of `f∘g` from `f^{(k)}(g(x))` and `g^{(k)}(x)` via partial
/// Bell polynomials.
fn faa_di_bruno(f: &[f64], g: &[f64]) -> Vec<f64> {
    let r = g.len() - 1;
    // bell[n][k] = B_{n,k}(g', g'', ...)
    let mut bell = vec![vec![0.0; r + 1]; r + 1];
    bell[0][0] = 1.0;
    for n in 1..=r {
        for k in 1..=n {
            let mut acc = 0.0;
            let mut binom = 1.0; // C(n-1, i-1)
            for i in 1..=(n - k + 1) {
                acc += binom * g[i] * bell[n - i][k - 1];
                binom = binom * (n - i) as f64 / i as f64;
            }
            bell[n][k] = acc;
        }
    }
    let mut out = vec![f[0]; r + 1];
    for n in 1..=r {
        out[n] = (1..=n).map(|k| f[k] * bell[n][k]).sum();
    }
    out
}

// ---------------------------------------------------------------------------
// Config syntax: bump(c,w,k|inf), poly(c0,c1,..), indicator(a,b),
// entire(exp|sin|cos|sinh|cosh|gauss), compose(f,g), x.

impl std::str::FromStr for ScalarFunction {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        let mut p = Parser { src: s, pos: 0 };
        let f = p.function()?;
        p.skip_ws();
        if p.pos != s.len() {
            return Err(p.error("trailing input"));
        }
        Ok(f)
    }
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, msg: &str) -> LabError {
        LabError::Config(format!("function `{}`: {msg} at offset {}", self.src, self.pos))
    }

    fn skip_ws(&mut self) {
        while self.src[self.pos..].starts_with(char::is_whitespace) {
            self.pos += self.src[self.pos..].chars().next().unwrap().len_utf8();
        }
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.src[self.pos..].starts_with(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.error(&format!("expected `{c}`")))
        }
    }

    fn word(&mut self) -> &str {
        self.skip_ws();
        let start = self.pos;
        let rest = &self.src[start..];
        let len = rest
            .find(|c: char| !(c.is_alphanumeric() || matches!(c, '_' | '.' | '+' | '-' | '∞')))
            .unwrap_or(rest.len());
        // Allow exponents such as 1e-3 but stop a leading sign from eating words.
        self.pos += len;
        &self.src[start..start + len]
    }

    fn number(&mut self) -> Result<f64> {
        let w = self.word().to_string();
        match w.as_str() {
            "inf" | "+inf" | "∞" | "+∞" => Ok(f64::INFINITY),
            "-inf" | "-∞" => Ok(f64::NEG_INFINITY),
            _ => w.parse().map_err(|_| self.error(&format!("bad number `{w}`"))),
        }
    }

    fn numbers(&mut self) -> Result<Vec<f64>> {
        let bracket = self.eat('[');
        let mut v = Vec::new();
        if !(bracket && self.eat(']')) {
            loop {
                v.push(self.number()?);
                if !self.eat(',') {
                    break;
                }
            }
            if bracket {
                self.expect(']')?;
            }
        }
        Ok(v)
    }

    fn function(&mut self) -> Result<ScalarFunction> {
        let name = self.word().to_string();
        if name == "x" || name == "identity" {
            return Ok(ScalarFunction::identity());
        }
        self.expect('(')?;
        let f = match name.as_str() {
            "poly" => ScalarFunction::polynomial(self.numbers()?),
            "bump" => {
                let c = self.number()?;
                self.expect(',')?;
                let w = self.number()?;
                let smooth = if self.eat(',') {
                    let s = self.number()?;
                    if s.is_infinite() {
                        Smoothness::Infinite
                    } else if s >= 0.0 && s.fract() == 0.0 {
                        Smoothness::Finite(s as u32)
                    } else {
                        return Err(self.error("smoothness must be a non-negative integer or inf"));
                    }
                } else {
                    Smoothness::Infinite
                };
                ScalarFunction::bump(c, w, smooth)?
            }
            "indicator" => {
                let a = self.number()?;
                self.expect(',')?;
                let b = self.number()?;
                ScalarFunction::indicator(a, b)?
            }
            "entire" => {
                let which = self.word().to_string();
                ScalarFunction::entire(match which.as_str() {
                    "exp" => EntireKind::Exp,
                    "sin" => EntireKind::Sin,
                    "cos" => EntireKind::Cos,
                    "sinh" => EntireKind::Sinh,
                    "cosh" => EntireKind::Cosh,
                    "gauss" => EntireKind::Gauss,
                    other => return Err(self.error(&format!("unknown entire function `{other}`"))),
                })
            }
            "compose" => {
                let outer = self.function()?;
                self.expect(',')?;
                let inner = self.function()?;
                ScalarFunction::compose(outer, inner)
            }
            other => return Err(self.error(&format!("unknown function `{other}`"))),
        };
        self.expect(')')?;
        Ok(f)
    }
}

impl fmt::Display for ScalarFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let num = |v: f64| {
            if v == f64::INFINITY {
                "inf".to_string()
            } else if v == f64::NEG_INFINITY {
                "-inf".to_string()
            } else {
                format!("{v:?}")
            }
        };
        match &self.kind {
            FunctionKind::Polynomial(c) => {
                write!(f, "poly({})", c.iter().map(|&v| num(v)).collect::<Vec<_>>().join(","))
            }
            FunctionKind::Bump {
                center,
                width,
                smoothness,
            } => {
                let s = match smoothness {
                    Smoothness::Finite(k) => k.to_string(),
                    Smoothness::Infinite => "inf".into(),
                };
                write!(f, "bump({},{},{s})", num(*center), num(*width))
            }
            FunctionKind::Indicator { a, b } => write!(f, "indicator({},{})", num(*a), num(*b)),
            FunctionKind::Entire(k) => write!(f, "entire({})", format!("{k:?}").to_lowercase()),
            FunctionKind::Compose(o, i) => write!(f, "compose({o},{i})"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn central_diff(f: &ScalarFunction, r: usize, x: f64) -> f64 {
        let h = 1e-4;
        (f.derivative(r, x + h).unwrap() - f.derivative(r, x - h).unwrap()) / (2.0 * h)
    }

    #[test]
    fn derivatives_agree_with_finite_differences() {
        let fs = [
            ScalarFunction::bump(0.3, 1.2, Smoothness::Finite(4)).unwrap(),
            ScalarFunction::bump(-0.5, 2.0, Smoothness::Infinite).unwrap(),
            ScalarFunction::entire(EntireKind::Gauss),
            ScalarFunction::compose(ScalarFunction::entire(EntireKind::Sin), ScalarFunction::polynomial(vec![0.5, 0.0, 1.0])),
        ];
        for f in &fs {
            for &x in &[-0.7, -0.1, 0.4, 0.8] {
                for r in 0..4 {
                    let fd = central_diff(f, r, x);
                    let an = f.derivative(r + 1, x).unwrap();
                    assert!((fd - an).abs() < 1e-5 * (1.0 + an.abs()), "{f} r={r} x={x}: {fd} vs {an}");
                }
            }
        }
    }

    #[test]
    fn bump_support_and_peak() {
        let f = ScalarFunction::bump(2.0, 1.5, Smoothness::Finite(4)).unwrap();
        assert_eq!(f.eval(2.0), 1.0);
        assert_eq!(f.eval(3.5), 0.0);
        assert_eq!(f.eval(0.4), 0.0);
        let g = ScalarFunction::bump(0.0, 1.0, Smoothness::Infinite).unwrap();
        assert!((g.eval(0.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn indicator_is_half_open() {
        let f = ScalarFunction::indicator(f64::NEG_INFINITY, 2.0).unwrap();
        assert_eq!([1.0, 2.0, 3.0].map(|x| f.eval(x)), [1.0, 1.0, 0.0]);
        assert!(matches!(f.derivative(1, 0.0), Err(LabError::DerivativesUnavailable(1))));
    }

    #[test]
    fn parse_and_display_roundtrip() {
        for s in [
            "bump(2.0,1.5,4)",
            "bump(0.0,1.0,inf)",
            "poly(0.0,0.0,1.0)",
            "indicator(-inf,2.0)",
            "entire(exp)",
            "compose(poly(1.0,2.0),entire(cos))",
        ] {
            let f: ScalarFunction = s.parse().unwrap();
            assert_eq!(f.to_string(), s);
        }
        let f: ScalarFunction = " bump(2, 1.5, 4) ".parse().unwrap();
        assert_eq!(f.to_string(), "bump(2.0,1.5,4)");
        assert!("bump(1)".parse::<ScalarFunction>().is_err());
        assert!("wiggle(1)".parse::<ScalarFunction>().is_err());
    }

    #[test]
    fn envelope_checked_on_construction() {
        let sq = ScalarFunction::polynomial(vec![0.0, 0.0, 1.0]);
        assert!(sq.clone().with_envelope(1.0, 2.0).is_ok());
        assert!(matches!(sq.with_envelope(1.0, 1.0), Err(LabError::EnvelopeViolated { .. })));
        let b = ScalarFunction::bump(2.0, 1.0, Smoothness::Finite(2)).unwrap();
        assert!(b.clone().with_envelope(1.0, 1.0).is_ok());
        assert!(b.with_envelope(0.1, 1.0).is_err());
    }

    #[test]
    fn low_degree_detection() {
        assert_eq!(ScalarFunction::identity().as_low_degree_poly(), Some([0.0, 1.0, 0.0]));
        assert_eq!(ScalarFunction::polynomial(vec![1.0, 0.0, 0.0, 0.0]).as_low_degree_poly(), Some([1.0, 0.0, 0.0]));
        assert_eq!(ScalarFunction::polynomial(vec![0.0, 0.0, 0.0, 1.0]).as_low_degree_poly(), None);
    }
}
