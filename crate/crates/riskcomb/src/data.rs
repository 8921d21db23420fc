//! Core data model: daily return series, (VaR, ES) forecast pairs, forecast
//! pools, and CSV ingestion.
//!
//! Conventions used throughout the crate:
//! - returns are daily log returns scaled by 100 (percent),
//! - VaR and ES are lower-tail quantities and therefore typically negative,
//! - ES never exceeds VaR (`es <= var`), the analogue of non-crossing quantiles,
//! - the spacing `var - es` is nonnegative by construction.
//!
//! All types are immutable after construction and safe to share across threads.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use chrono::NaiveDate;

use crate::error::{Error, Result};

/// Probability level of the lower tail, restricted to (0, 0.5).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Alpha(f64);

impl Alpha {
    pub fn new(level: f64) -> Result<Self> {
        if level.is_finite() && level > 0.0 && level < 0.5 {
            Ok(Self(level))
        } else {
            Err(Error::InvalidParameter(format!(
                "probability level must lie in (0, 0.5), got {level}"
            )))
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }
}

/// One method's one-day-ahead forecast: the VaR and the ES below it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForecastPair {
    var: f64,
    es: f64,
}

impl ForecastPair {
    pub fn new(var: f64, es: f64) -> Result<Self> {
        if !var.is_finite() || !es.is_finite() {
            return Err(Error::NonFinite {
                what: format!("forecast pair (var={var}, es={es})"),
            });
        }
        if es > var {
            return Err(Error::InvalidParameter(format!(
                "es must not exceed var, got var={var}, es={es}"
            )));
        }
        Ok(Self { var, es })
    }

    #[inline]
    pub fn var(self) -> f64 {
        self.var
    }

    #[inline]
    pub fn es(self) -> f64 {
        self.es
    }

    /// Nonnegative gap between the VaR and the ES.
    #[inline]
    pub fn spacing(self) -> Spacing {
        Spacing(self.var - self.es)
    }
}

/// The gap `var - es`, guaranteed nonnegative.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Spacing(f64);

impl Spacing {
    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }
}

/// Date-indexed daily log returns (x100) with optional range and
/// realized-variance columns.
#[derive(Debug, Clone)]
pub struct ReturnSeries {
    dates: Vec<NaiveDate>,
    returns: Vec<f64>,
    range: Option<Vec<f64>>,
    rv: Option<Vec<f64>>,
}

impl ReturnSeries {
    pub fn new(
        dates: Vec<NaiveDate>,
        returns: Vec<f64>,
        range: Option<Vec<f64>>,
        rv: Option<Vec<f64>>,
    ) -> Result<Self> {
        if dates.len() != returns.len() {
            return Err(Error::LengthMismatch {
                what: "dates vs returns".into(),
                left: dates.len(),
                right: returns.len(),
            });
        }
        for w in dates.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::NonMonotoneDates {
                    path: "<in-memory>".into(),
                    row: 0,
                    date: w[1],
                });
            }
        }
        if let Some(i) = returns.iter().position(|r| !r.is_finite()) {
            return Err(Error::NonFinite {
                what: format!("return at {}", dates[i]),
            });
        }
        for (name, col) in [("range", &range), ("rv", &rv)] {
            if let Some(col) = col {
                if col.len() != returns.len() {
                    return Err(Error::LengthMismatch {
                        what: format!("returns vs {name}"),
                        left: returns.len(),
                        right: col.len(),
                    });
                }
                if let Some(i) = col.iter().position(|v| !v.is_finite() || *v < 0.0) {
                    return Err(Error::NonFinite {
                        what: format!("{name} at {} (must be finite and >= 0)", dates[i]),
                    });
                }
            }
        }
        Ok(Self { dates, returns, range, rv })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.returns.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.returns.is_empty()
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn returns(&self) -> &[f64] {
        &self.returns
    }

    pub fn range(&self) -> Option<&[f64]> {
        self.range.as_deref()
    }

    pub fn rv(&self) -> Option<&[f64]> {
        self.rv.as_deref()
    }

    /// Index of `date` in the series, if present.
    pub fn position(&self, date: NaiveDate) -> Option<usize> {
        self.dates.binary_search(&date).ok()
    }
}

/// Column mapping for returns CSV files.
///
/// `high`/`low` are price columns from which the range is computed as
/// `100 * (ln high - ln low)`; `rv` is consumed as-is.
#[derive(Debug, Clone)]
pub struct ReturnsSchema {
    pub date: String,
    pub ret: String,
    pub high: String,
    pub low: String,
    pub rv: String,
}

impl Default for ReturnsSchema {
    fn default() -> Self {
        Self {
            date: "date".into(),
            ret: "return".into(),
            high: "high".into(),
            low: "low".into(),
            rv: "rv".into(),
        }
    }
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io { path: path.display().to_string(), source }
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { path: path.display().to_string(), line, msg: msg.into() }
}

fn parse_f64(path: &Path, line: usize, field: &str, raw: &str) -> Result<f64> {
    let v: f64 = raw
        .trim()
        .parse()
        .map_err(|_| parse_err(path, line, format!("cannot parse {field} value `{raw}`")))?;
    if !v.is_finite() {
        return Err(parse_err(path, line, format!("non-finite {field} value `{raw}`")));
    }
    Ok(v)
}

fn parse_date(path: &Path, line: usize, raw: &str) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(raw.trim(), "%Y-%m-%d")
        .map_err(|_| parse_err(path, line, format!("cannot parse date `{raw}` (expected ISO-8601)")))
}

/// Load a returns CSV with header `date,return[,high,low][,rv]` (column names
/// configurable via `schema`). High/low price columns, when both present, are
/// converted to the daily range `100 * (ln high - ln low)`.
pub fn load_returns(path: impl AsRef<Path>, schema: &ReturnsSchema) -> Result<ReturnSeries> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => io_err(
                path,
                std::io::Error::new(std::io::ErrorKind::NotFound, e.to_string()),
            ),
            _ => parse_err(path, 0, e.to_string()),
        })?;

    let headers = reader
        .headers()
        .map_err(|e| parse_err(path, 1, e.to_string()))?
        .clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let date_idx = col(&schema.date).ok_or_else(|| Error::MissingColumn {
        path: path.display().to_string(),
        column: schema.date.clone(),
    })?;
    let ret_idx = col(&schema.ret).ok_or_else(|| Error::MissingColumn {
        path: path.display().to_string(),
        column: schema.ret.clone(),
    })?;
    let high_idx = col(&schema.high);
    let low_idx = col(&schema.low);
    if high_idx.is_some() != low_idx.is_some() {
        return Err(Error::MissingColumn {
            path: path.display().to_string(),
            column: if high_idx.is_some() { schema.low.clone() } else { schema.high.clone() },
        });
    }
    let rv_idx = col(&schema.rv);

    let mut dates = Vec::new();
    let mut returns = Vec::new();
    let mut range = high_idx.map(|_| Vec::new());
    let mut rv = rv_idx.map(|_| Vec::new());

    for (i, record) in reader.records().enumerate() {
        let line = i + 2; // 1-based, after header
        let record = record.map_err(|e| parse_err(path, line, e.to_string()))?;
        let field = |idx: usize| -> Result<&str> {
            record
                .get(idx)
                .ok_or_else(|| parse_err(path, line, "row has too few fields"))
        };

        let date = parse_date(path, line, field(date_idx)?)?;
        if let Some(last) = dates.last() {
            if date <= *last {
                return Err(Error::NonMonotoneDates {
                    path: path.display().to_string(),
                    row: line,
                    date,
                });
            }
        }
        dates.push(date);
        returns.push(parse_f64(path, line, "return", field(ret_idx)?)?);

        if let (Some(hi), Some(lo)) = (high_idx, low_idx) {
            let h = parse_f64(path, line, "high", field(hi)?)?;
            let l = parse_f64(path, line, "low", field(lo)?)?;
            if h < l || l <= 0.0 {
                return Err(parse_err(
                    path,
                    line,
                    format!("invalid high/low pair ({h}, {l}); need high >= low > 0"),
                ));
            }
            range.as_mut().unwrap().push(100.0 * (h.ln() - l.ln()));
        }
        if let Some(ri) = rv_idx {
            let v = parse_f64(path, line, "rv", field(ri)?)?;
            if v < 0.0 {
                return Err(parse_err(path, line, format!("negative rv value {v}")));
            }
            rv.as_mut().unwrap().push(v);
        }
    }

    ReturnSeries::new(dates, returns, range, rv)
}

/// Format a float with 17 significant digits so that parse(write(x)) == x bitwise.
pub(crate) fn fmt_f64(v: f64) -> String {
    let mut s = String::new();
    write!(s, "{v:.16e}").unwrap();
    s
}

/// Write a returns CSV with header `date,return[,rv]`.
///
/// The range column is derived from high/low prices at load time and is not
/// written back; save/load round trips therefore apply to returns and rv.
pub fn save_returns(path: impl AsRef<Path>, series: &ReturnSeries) -> Result<()> {
    let path = path.as_ref();
    let mut writer = csv::Writer::from_path(path).map_err(|e| {
        io_err(path, std::io::Error::new(std::io::ErrorKind::Other, e.to_string()))
    })?;
    let has_rv = series.rv().is_some();
    let mut header = vec!["date", "return"];
    if has_rv {
        header.push("rv");
    }
    writer
        .write_record(&header)
        .map_err(|e| parse_err(path, 0, e.to_string()))?;
    for i in 0..series.len() {
        let mut row = vec![series.dates()[i].to_string(), fmt_f64(series.returns()[i])];
        if let Some(rv) = series.rv() {
            row.push(fmt_f64(rv[i]));
        }
        writer
            .write_record(&row)
            .map_err(|e| parse_err(path, i + 2, e.to_string()))?;
    }
    writer
        .flush()
        .map_err(|e| io_err(path, e))?;
    Ok(())
}

/// M methods by T days of forecast pairs.
///
/// `dates` are the one-day-ahead target days the forecasts apply to, so a
/// column aligns with the realized return of the same date.
#[derive(Debug, Clone)]
pub struct ForecastPool {
    method_ids: Vec<String>,
    dates: Vec<NaiveDate>,
    /// Row-major M x T.
    entries: Vec<ForecastPair>,
}

impl ForecastPool {
    pub fn new(
        method_ids: Vec<String>,
        dates: Vec<NaiveDate>,
        entries: Vec<ForecastPair>,
    ) -> Result<Self> {
        if method_ids.is_empty() || dates.is_empty() {
            return Err(Error::InvalidParameter(
                "forecast pool needs at least one method and one date".into(),
            ));
        }
        for w in dates.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::NonMonotoneDates {
                    path: "<in-memory pool>".into(),
                    row: 0,
                    date: w[1],
                });
            }
        }
        if entries.len() != method_ids.len() * dates.len() {
            return Err(Error::LengthMismatch {
                what: "pool entries vs methods x dates".into(),
                left: entries.len(),
                right: method_ids.len() * dates.len(),
            });
        }
        Ok(Self { method_ids, dates, entries })
    }

    #[inline]
    pub fn n_methods(&self) -> usize {
        self.method_ids.len()
    }

    #[inline]
    pub fn n_days(&self) -> usize {
        self.dates.len()
    }

    pub fn method_ids(&self) -> &[String] {
        &self.method_ids
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn method_index(&self, id: &str) -> Option<usize> {
        self.method_ids.iter().position(|m| m == id)
    }

    #[inline]
    pub fn get(&self, method: usize, day: usize) -> ForecastPair {
        self.entries[method * self.dates.len() + day]
    }

    /// One method's forecasts across all days.
    pub fn row(&self, method: usize) -> &[ForecastPair] {
        let t = self.dates.len();
        &self.entries[method * t..(method + 1) * t]
    }

    /// All methods' forecasts for one day.
    pub fn column(&self, day: usize) -> Vec<ForecastPair> {
        (0..self.n_methods()).map(|m| self.get(m, day)).collect()
    }

    /// Pool restricted to day indices `[start, end)`.
    pub fn slice_days(&self, start: usize, end: usize) -> ForecastPool {
        assert!(start < end && end <= self.n_days());
        let mut entries = Vec::with_capacity(self.n_methods() * (end - start));
        for m in 0..self.n_methods() {
            entries.extend_from_slice(&self.row(m)[start..end]);
        }
        ForecastPool {
            method_ids: self.method_ids.clone(),
            dates: self.dates[start..end].to_vec(),
            entries,
        }
    }
}

/// Load a long-format pool CSV with header `date,method_id,var,es`.
///
/// Methods are ordered by first appearance; dates ascending. A ragged panel
/// (any method missing any date), a duplicate cell, or any cell with
/// `es > var` is an error naming the offending cell.
pub fn load_pool(path: impl AsRef<Path>) -> Result<ForecastPool> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => io_err(
                path,
                std::io::Error::new(std::io::ErrorKind::NotFound, e.to_string()),
            ),
            _ => parse_err(path, 0, e.to_string()),
        })?;

    let headers = reader
        .headers()
        .map_err(|e| parse_err(path, 1, e.to_string()))?
        .clone();
    let idx_of = |name: &str| -> Result<usize> {
        headers.iter().position(|h| h == name).ok_or_else(|| Error::MissingColumn {
            path: path.display().to_string(),
            column: name.into(),
        })
    };
    let (di, mi, vi, ei) = (idx_of("date")?, idx_of("method_id")?, idx_of("var")?, idx_of("es")?);

    let mut method_ids: Vec<String> = Vec::new();
    let mut cells: Vec<(usize, NaiveDate, ForecastPair)> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| parse_err(path, line, e.to_string()))?;
        let field = |idx: usize| -> Result<&str> {
            record
                .get(idx)
                .ok_or_else(|| parse_err(path, line, "row has too few fields"))
        };
        let date = parse_date(path, line, field(di)?)?;
        let method = field(mi)?.to_string();
        let var = parse_f64(path, line, "var", field(vi)?)?;
        let es = parse_f64(path, line, "es", field(ei)?)?;
        if es > var {
            return Err(Error::EsExceedsVar { method, date, var, es });
        }
        let m_idx = match method_ids.iter().position(|m| *m == method) {
            Some(j) => j,
            None => {
                method_ids.push(method);
                method_ids.len() - 1
            }
        };
        cells.push((m_idx, date, ForecastPair::new(var, es)?));
    }

    let dates: Vec<NaiveDate> = cells
        .iter()
        .map(|(_, d, _)| *d)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if method_ids.is_empty() || dates.is_empty() {
        return Err(parse_err(path, 0, "empty pool file"));
    }

    let t = dates.len();
    let date_index = |d: &NaiveDate| dates.binary_search(d).unwrap();
    let mut entries: Vec<Option<ForecastPair>> = vec![None; method_ids.len() * t];
    for (m, d, pair) in cells {
        let slot = &mut entries[m * t + date_index(&d)];
        if slot.is_some() {
            return Err(Error::DuplicateCell { method: method_ids[m].clone(), date: d });
        }
        *slot = Some(pair);
    }
    if let Some(hole) = entries.iter().position(|e| e.is_none()) {
        return Err(Error::RaggedPanel { method: method_ids[hole / t].clone() });
    }

    ForecastPool::new(method_ids, dates, entries.into_iter().map(|e| e.unwrap()).collect())
}

/// Write a pool CSV in canonical order (date ascending, then method order),
/// bit-exact for round trips.
pub fn save_pool(path: impl AsRef<Path>, pool: &ForecastPool) -> Result<()> {
    let path = path.as_ref();
    let mut writer = csv::Writer::from_path(path).map_err(|e| {
        io_err(path, std::io::Error::new(std::io::ErrorKind::Other, e.to_string()))
    })?;
    writer
        .write_record(["date", "method_id", "var", "es"])
        .map_err(|e| parse_err(path, 0, e.to_string()))?;
    for (t, date) in pool.dates().iter().enumerate() {
        for (m, id) in pool.method_ids().iter().enumerate() {
            let pair = pool.get(m, t);
            writer
                .write_record([
                    date.to_string(),
                    id.clone(),
                    fmt_f64(pair.var()),
                    fmt_f64(pair.es()),
                ])
                .map_err(|e| parse_err(path, 0, e.to_string()))?;
        }
    }
    writer.flush().map_err(|e| io_err(path, e))?;
    Ok(())
}

/// Elementwise `var - es` across a pool, M rows of T spacings.
pub fn spacing_of(pool: &ForecastPool) -> Vec<Vec<Spacing>> {
    (0..pool.n_methods())
        .map(|m| pool.row(m).iter().map(|p| p.spacing()).collect())
        .collect()
}

/// Moment-based descriptive statistics of a return series.
///
/// `std` uses the sample (n-1) denominator; skewness and kurtosis are the
/// third and fourth standardized central moments with the population (n)
/// denominator, and kurtosis is raw (not excess).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummaryStats {
    pub n: usize,
    pub mean: f64,
    pub median: f64,
    pub min: f64,
    pub max: f64,
    pub std: f64,
    pub skewness: f64,
    pub kurtosis: f64,
}

pub fn describe(series: &ReturnSeries) -> Result<SummaryStats> {
    let n = series.len();
    if n < 2 {
        return Err(Error::InsufficientData { what: "describe".into(), need: 2, got: n });
    }
    // Moments are accumulated over the sorted values so that reordering the
    // series cannot change the floating-point result.
    let mut sorted = series.returns().to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let nf = n as f64;
    let mean = sorted.iter().sum::<f64>() / nf;
    let mut m2 = 0.0;
    let mut m3 = 0.0;
    let mut m4 = 0.0;
    for &x in &sorted {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    let var_sample = m2 / (nf - 1.0);
    m2 /= nf;
    m3 /= nf;
    m4 /= nf;
    let (skewness, kurtosis) = if m2 > 0.0 {
        (m3 / m2.powf(1.5), m4 / (m2 * m2))
    } else {
        (0.0, 0.0)
    };

    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };

    Ok(SummaryStats {
        n,
        mean,
        median,
        min: sorted[0],
        max: sorted[n - 1],
        std: var_sample.sqrt(),
        skewness,
        kurtosis,
    })
}
