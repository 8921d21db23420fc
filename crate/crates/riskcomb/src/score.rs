//! Joint scoring functions for (VaR, ES) forecasts.
//!
//! The generic score has the form
//!
//! ```text
//! S(v, e, r) = (I - a)G1(v) - I*G1(r) + G2(e)*(e - v + I*(v - r)/a) - z2(e) + A(r)
//! ```
//!
//! with `I = I(r <= v)`, `a` the probability level, `G2 = z2'`, and five
//! concrete instances selected by [`ScoreVariant`]: the quantile score (QS,
//! VaR only), an asymmetric-Laplace form (AL), a square-root form (NZ), a
//! log-exponential form (FZG), and a quadratic form (AS) with a positive
//! constant `W`. Lower scores are better; the AL form is also used as the
//! estimation objective throughout the crate.

use crate::data::{Alpha, ForecastPair};
use crate::error::{Error, Result};

/// Guard for AL/NZ domain: these variants need es strictly below zero.
const ES_DOMAIN_GUARD: f64 = -1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreVariant {
    Qs,
    Al,
    Nz,
    Fzg,
    As,
}

impl ScoreVariant {
    pub const ALL: [ScoreVariant; 5] = [
        ScoreVariant::Qs,
        ScoreVariant::Al,
        ScoreVariant::Nz,
        ScoreVariant::Fzg,
        ScoreVariant::As,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScoreVariant::Qs => "QS",
            ScoreVariant::Al => "AL",
            ScoreVariant::Nz => "NZ",
            ScoreVariant::Fzg => "FZG",
            ScoreVariant::As => "AS",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "QS" => Ok(ScoreVariant::Qs),
            "AL" => Ok(ScoreVariant::Al),
            "NZ" => Ok(ScoreVariant::Nz),
            "FZG" => Ok(ScoreVariant::Fzg),
            "AS" => Ok(ScoreVariant::As),
            other => Err(Error::InvalidConfig(format!("unknown score variant `{other}`"))),
        }
    }
}

/// A score variant together with its probability level and, for the AS
/// variant, the positive constant `W` (default 4).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreSpec {
    pub variant: ScoreVariant,
    pub alpha: Alpha,
    pub w: f64,
}

impl ScoreSpec {
    pub fn new(variant: ScoreVariant, alpha: Alpha) -> Self {
        Self { variant, alpha, w: 4.0 }
    }

    pub fn with_w(variant: ScoreVariant, alpha: Alpha, w: f64) -> Result<Self> {
        if !(w > 0.0) {
            return Err(Error::InvalidParameter(format!("AS constant W must be > 0, got {w}")));
        }
        Ok(Self { variant, alpha, w })
    }

    /// AL-score spec at the same level, the estimation default.
    pub fn al(alpha: Alpha) -> Self {
        Self::new(ScoreVariant::Al, alpha)
    }
}

/// Score a single day. Requires `es <= var`; the AL and NZ variants
/// additionally require `es < 0`.
pub fn joint_score(spec: &ScoreSpec, var: f64, es: f64, r: f64) -> Result<f64> {
    if !var.is_finite() || !es.is_finite() || !r.is_finite() {
        return Err(Error::NonFinite {
            what: format!("joint_score inputs (var={var}, es={es}, r={r})"),
        });
    }
    if es > var {
        return Err(Error::InvalidParameter(format!(
            "joint_score needs es <= var, got var={var}, es={es}"
        )));
    }
    if matches!(spec.variant, ScoreVariant::Al | ScoreVariant::Nz) && es > ES_DOMAIN_GUARD {
        return Err(Error::Domain(format!(
            "{} score needs es < 0, got es={es}",
            spec.variant.name()
        )));
    }
    Ok(joint_score_unchecked(spec, var, es, r))
}

/// Score with no input validation. Out-of-domain inputs for AL/NZ produce
/// non-finite values; optimizers map those to +inf via [`score_or_inf`].
#[inline]
pub fn joint_score_unchecked(spec: &ScoreSpec, var: f64, es: f64, r: f64) -> f64 {
    let alpha = spec.alpha.value();
    let hit = if r <= var { 1.0 } else { 0.0 };
    // Shared term: e - v + I*(v - r)/alpha.
    let tail = es - var + hit * (var - r) / alpha;
    match spec.variant {
        ScoreVariant::Qs => (hit - alpha) * (var - r),
        ScoreVariant::Al => (-1.0 / es) * tail + (-es).ln() + 1.0 - (1.0 - alpha).ln(),
        ScoreVariant::Nz => {
            let root = (-es).sqrt();
            0.5 / root * tail + root
        }
        ScoreVariant::Fzg => {
            let sig = 1.0 / (1.0 + (-es).exp());
            (hit - alpha) * var - hit * r + sig * tail - (1.0 + es.exp()).ln() + 2.0f64.ln()
        }
        ScoreVariant::As => {
            let g1 = |x: f64| -0.5 * spec.w * x * x;
            (hit - alpha) * g1(var) - hit * g1(r) + alpha * es * tail - 0.5 * alpha * es * es
        }
    }
}

/// Like [`joint_score_unchecked`] but mapping any non-finite or out-of-domain
/// result to +inf, for use as an optimization objective.
#[inline]
pub fn score_or_inf(spec: &ScoreSpec, var: f64, es: f64, r: f64) -> f64 {
    if es > var {
        return f64::INFINITY;
    }
    if matches!(spec.variant, ScoreVariant::Al | ScoreVariant::Nz) && es > ES_DOMAIN_GUARD {
        return f64::INFINITY;
    }
    let s = joint_score_unchecked(spec, var, es, r);
    if s.is_finite() {
        s
    } else {
        f64::INFINITY
    }
}

/// Arithmetic mean of the daily joint score over an aligned span.
pub fn average_score(spec: &ScoreSpec, forecasts: &[ForecastPair], returns: &[f64]) -> Result<f64> {
    if forecasts.len() != returns.len() {
        return Err(Error::LengthMismatch {
            what: "average_score forecasts vs returns".into(),
            left: forecasts.len(),
            right: returns.len(),
        });
    }
    if forecasts.is_empty() {
        return Err(Error::InsufficientData { what: "average_score".into(), need: 1, got: 0 });
    }
    let mut sum = 0.0;
    for (pair, &r) in forecasts.iter().zip(returns) {
        sum += joint_score(spec, pair.var(), pair.es(), r)?;
    }
    Ok(sum / forecasts.len() as f64)
}

/// Daily scores for every method in a pool, M x T.
#[derive(Debug, Clone)]
pub struct ScoreMatrix {
    n_methods: usize,
    n_days: usize,
    /// Row-major M x T.
    values: Vec<f64>,
}

impl ScoreMatrix {
    #[inline]
    pub fn n_methods(&self) -> usize {
        self.n_methods
    }

    #[inline]
    pub fn n_days(&self) -> usize {
        self.n_days
    }

    #[inline]
    pub fn get(&self, method: usize, day: usize) -> f64 {
        self.values[method * self.n_days + day]
    }

    pub fn row(&self, method: usize) -> &[f64] {
        &self.values[method * self.n_days..(method + 1) * self.n_days]
    }

    /// Per-method sums over a day range `[start, end)`.
    pub fn row_sums(&self, start: usize, end: usize) -> Vec<f64> {
        (0..self.n_methods)
            .map(|m| self.row(m)[start..end].iter().sum())
            .collect()
    }
}

/// Score every (method, day) cell of a pool against aligned realized returns.
pub fn score_matrix(
    spec: &ScoreSpec,
    pool: &crate::data::ForecastPool,
    returns: &[f64],
) -> Result<ScoreMatrix> {
    if returns.len() != pool.n_days() {
        return Err(Error::LengthMismatch {
            what: "score_matrix pool days vs returns".into(),
            left: pool.n_days(),
            right: returns.len(),
        });
    }
    let mut values = Vec::with_capacity(pool.n_methods() * pool.n_days());
    for m in 0..pool.n_methods() {
        for (pair, &r) in pool.row(m).iter().zip(returns) {
            values.push(joint_score(spec, pair.var(), pair.es(), r)?);
        }
    }
    Ok(ScoreMatrix { n_methods: pool.n_methods(), n_days: pool.n_days(), values })
}

/// Write a score matrix as CSV `method_id,date,score`.
pub fn save_score_matrix(
    path: impl AsRef<std::path::Path>,
    pool: &crate::data::ForecastPool,
    matrix: &ScoreMatrix,
) -> Result<()> {
    let path = path.as_ref();
    let mut writer = csv::Writer::from_path(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: std::io::Error::new(std::io::ErrorKind::Other, e.to_string()),
    })?;
    writer
        .write_record(["method_id", "date", "score"])
        .map_err(|e| Error::Parse { path: path.display().to_string(), line: 0, msg: e.to_string() })?;
    for m in 0..matrix.n_methods() {
        for t in 0..matrix.n_days() {
            writer
                .write_record([
                    pool.method_ids()[m].clone(),
                    pool.dates()[t].to_string(),
                    crate::data::fmt_f64(matrix.get(m, t)),
                ])
                .map_err(|e| Error::Parse {
                    path: path.display().to_string(),
                    line: 0,
                    msg: e.to_string(),
                })?;
        }
    }
    writer.flush().map_err(|e| Error::Io { path: path.display().to_string(), source: e })?;
    Ok(())
}
