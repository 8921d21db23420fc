//! Individual forecasting method families and pool generation.
//!
//! The standard pool crosses seven families into 90 methods: historical
//! simulation and Gaussian windows over four window lengths, EWMA, 54
//! (GJR-)GARCH variants (2 recursions x 3 drivers x 3 innovation
//! distributions x 3 tails), 18 CAViaR variants (3 drivers x 3 forms x 2 ES
//! links), and 9 CARE variants (3 drivers x 3 forms). Every method re-fits on
//! a trailing window at each forecast origin and emits a one-day-ahead
//! (VaR, ES) pair satisfying `es <= var`.

pub mod caviar;
pub mod care;
pub mod evt;
pub mod garch;
pub mod simple;

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;
use rayon::prelude::*;

use crate::data::{Alpha, ForecastPair, ForecastPool, ReturnSeries};
use crate::dist::{student_t_var_es_standardized, ForecastDistribution};
use crate::error::{Error, Result};

pub use caviar::{caviar_fit_forecast, RecursionData};
pub use care::care_fit_forecast;
pub use evt::evt_var_es;
pub use garch::{fit_garch, garch_tail_forecast};
pub use simple::{ewma_forecast, gaussian_window_forecast, hs_forecast};

/// Data series feeding a volatility or quantile recursion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Driver {
    Return,
    Range,
    Rv,
}

impl Driver {
    fn tag(self) -> &'static str {
        match self {
            Driver::Return => "",
            Driver::Range => "Range-",
            Driver::Rv => "RV-",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GarchDist {
    Gaussian,
    StudentT,
    SkewT,
}

impl GarchDist {
    fn tag(self) -> &'static str {
        match self {
            GarchDist::Gaussian => "Gaussian",
            GarchDist::StudentT => "t",
            GarchDist::SkewT => "skewt",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GarchTail {
    Native,
    Evt,
    Fhs,
}

impl GarchTail {
    fn tag(self) -> &'static str {
        match self {
            GarchTail::Native => "",
            GarchTail::Evt => "-EVT",
            GarchTail::Fhs => "-FHS",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CaviarForm {
    Sav,
    As,
    Ig,
}

impl CaviarForm {
    fn tag(self) -> &'static str {
        match self {
            CaviarForm::Sav => "SAV",
            CaviarForm::As => "AS",
            CaviarForm::Ig => "IG",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EsLink {
    Multiplicative,
    Additive,
}

impl EsLink {
    fn tag(self) -> &'static str {
        match self {
            EsLink::Multiplicative => "Multiplicative",
            EsLink::Additive => "Additive",
        }
    }
}

/// One individual forecasting method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MethodSpec {
    Hs { window: usize },
    GaussianWindow { window: usize },
    Ewma,
    Garch { leverage: bool, driver: Driver, dist: GarchDist, tail: GarchTail },
    Caviar { driver: Driver, form: CaviarForm, es_link: EsLink },
    Care { driver: Driver, form: CaviarForm },
}

impl MethodSpec {
    /// Stable identifier used in pool files and reports.
    pub fn id(&self) -> String {
        match *self {
            MethodSpec::Hs { window } => format!("HS-{window}"),
            MethodSpec::GaussianWindow { window } => format!("Gaussian-{window}"),
            MethodSpec::Ewma => "EWMA".into(),
            MethodSpec::Garch { leverage, driver, dist, tail } => format!(
                "{}GARCH-{}{}{}",
                if leverage { "GJR-" } else { "" },
                driver.tag(),
                dist.tag(),
                tail.tag()
            ),
            MethodSpec::Caviar { driver, form, es_link } => {
                format!("CAViaR-{}{}-{}", driver.tag(), form.tag(), es_link.tag())
            }
            MethodSpec::Care { driver, form } => {
                format!("CARE-{}{}", driver.tag(), form.tag())
            }
        }
    }

    /// Parse an identifier produced by [`MethodSpec::id`].
    pub fn parse(id: &str) -> Result<Self> {
        let err = || Error::InvalidConfig(format!("unknown method id `{id}`"));
        if let Some(rest) = id.strip_prefix("HS-") {
            return Ok(MethodSpec::Hs { window: rest.parse().map_err(|_| err())? });
        }
        if let Some(rest) = id.strip_prefix("Gaussian-") {
            return Ok(MethodSpec::GaussianWindow { window: rest.parse().map_err(|_| err())? });
        }
        if id == "EWMA" {
            return Ok(MethodSpec::Ewma);
        }
        let parse_driver = |s: &str| -> (Driver, String) {
            if let Some(rest) = s.strip_prefix("Range-") {
                (Driver::Range, rest.to_string())
            } else if let Some(rest) = s.strip_prefix("RV-") {
                (Driver::Rv, rest.to_string())
            } else {
                (Driver::Return, s.to_string())
            }
        };
        let parse_form = |s: &str| -> Option<CaviarForm> {
            match s {
                "SAV" => Some(CaviarForm::Sav),
                "AS" => Some(CaviarForm::As),
                "IG" => Some(CaviarForm::Ig),
                _ => None,
            }
        };
        if let Some(rest) = id.strip_prefix("CAViaR-") {
            let (driver, rest) = parse_driver(rest);
            let (form_s, link_s) = rest.split_once('-').ok_or_else(err)?;
            let form = parse_form(form_s).ok_or_else(err)?;
            let es_link = match link_s {
                "Multiplicative" => EsLink::Multiplicative,
                "Additive" => EsLink::Additive,
                _ => return Err(err()),
            };
            return Ok(MethodSpec::Caviar { driver, form, es_link });
        }
        if let Some(rest) = id.strip_prefix("CARE-") {
            let (driver, rest) = parse_driver(rest);
            let form = parse_form(&rest).ok_or_else(err)?;
            return Ok(MethodSpec::Care { driver, form });
        }
        let (leverage, rest) = match id.strip_prefix("GJR-GARCH-") {
            Some(rest) => (true, rest),
            None => (false, id.strip_prefix("GARCH-").ok_or_else(err)?),
        };
        let (driver, rest) = parse_driver(rest);
        let (dist_s, tail) = if let Some(d) = rest.strip_suffix("-EVT") {
            (d.to_string(), GarchTail::Evt)
        } else if let Some(d) = rest.strip_suffix("-FHS") {
            (d.to_string(), GarchTail::Fhs)
        } else {
            (rest, GarchTail::Native)
        };
        let dist = match dist_s.as_str() {
            "Gaussian" => GarchDist::Gaussian,
            "t" => GarchDist::StudentT,
            "skewt" => GarchDist::SkewT,
            _ => return Err(err()),
        };
        Ok(MethodSpec::Garch { leverage, driver, dist, tail })
    }

    /// The extra data column this method needs, if any.
    pub fn required_column(&self) -> Option<Driver> {
        match *self {
            MethodSpec::Garch { driver, .. }
            | MethodSpec::Caviar { driver, .. }
            | MethodSpec::Care { driver, .. } => match driver {
                Driver::Return => None,
                d => Some(d),
            },
            _ => None,
        }
    }
}

/// The full cross-product of 90 methods; HS and Gaussian windows use
/// {100, 250, 500, est_window}.
pub fn standard_pool_specs(est_window: usize) -> Vec<MethodSpec> {
    let mut specs = Vec::with_capacity(90);
    for w in [100, 250, 500, est_window] {
        specs.push(MethodSpec::Hs { window: w });
    }
    for w in [100, 250, 500, est_window] {
        specs.push(MethodSpec::GaussianWindow { window: w });
    }
    specs.push(MethodSpec::Ewma);
    for leverage in [false, true] {
        for driver in [Driver::Return, Driver::Range, Driver::Rv] {
            for dist in [GarchDist::Gaussian, GarchDist::StudentT, GarchDist::SkewT] {
                for tail in [GarchTail::Native, GarchTail::Evt, GarchTail::Fhs] {
                    specs.push(MethodSpec::Garch { leverage, driver, dist, tail });
                }
            }
        }
    }
    for driver in [Driver::Return, Driver::Range, Driver::Rv] {
        for form in [CaviarForm::Sav, CaviarForm::As, CaviarForm::Ig] {
            for es_link in [EsLink::Multiplicative, EsLink::Additive] {
                specs.push(MethodSpec::Caviar { driver, form, es_link });
            }
        }
    }
    for driver in [Driver::Return, Driver::Range, Driver::Rv] {
        for form in [CaviarForm::Sav, CaviarForm::As, CaviarForm::Ig] {
            specs.push(MethodSpec::Care { driver, form });
        }
    }
    specs
}

fn missing_column(driver: Driver) -> Error {
    Error::MissingColumn {
        path: "<return series>".into(),
        column: match driver {
            Driver::Range => "range (high/low)".into(),
            Driver::Rv => "rv".into(),
            Driver::Return => "return".into(),
        },
    }
}

/// One-day-ahead forecast for the day at `target_idx`, fitted on the
/// `est_window` days ending at `target_idx - 1`. HS and Gaussian windows use
/// their own (shorter) window lengths inside that history.
pub fn forecast_at(
    spec: &MethodSpec,
    series: &ReturnSeries,
    target_idx: usize,
    est_window: usize,
    alpha: Alpha,
) -> Result<(ForecastPair, Option<ForecastDistribution>)> {
    if target_idx < est_window {
        return Err(Error::InsufficientData {
            what: format!("history before {}", spec.id()),
            need: est_window,
            got: target_idx,
        });
    }
    let lo = target_idx - est_window;
    let returns = &series.returns()[lo..target_idx];

    let garch_driver = |driver: Driver| -> Result<Vec<f64>> {
        Ok(match driver {
            Driver::Return => returns.iter().map(|&r| r * r).collect(),
            Driver::Range => {
                let range = series.range().ok_or_else(|| missing_column(driver))?;
                range[lo..target_idx].iter().map(|&x| x * x).collect()
            }
            Driver::Rv => {
                let rv = series.rv().ok_or_else(|| missing_column(driver))?;
                rv[lo..target_idx].to_vec()
            }
        })
    };
    let magnitude = |driver: Driver| -> Result<Vec<f64>> {
        Ok(match driver {
            Driver::Return => returns.iter().map(|&r| r.abs()).collect(),
            Driver::Range => {
                let range = series.range().ok_or_else(|| missing_column(driver))?;
                range[lo..target_idx].to_vec()
            }
            Driver::Rv => {
                let rv = series.rv().ok_or_else(|| missing_column(driver))?;
                rv[lo..target_idx].iter().map(|&v| v.sqrt()).collect()
            }
        })
    };

    match *spec {
        MethodSpec::Hs { window } => {
            if target_idx < window {
                return Err(Error::InsufficientData {
                    what: spec.id(),
                    need: window,
                    got: target_idx,
                });
            }
            let pair = hs_forecast(&series.returns()[target_idx - window..target_idx], alpha)?;
            Ok((pair, None))
        }
        MethodSpec::GaussianWindow { window } => {
            if target_idx < window {
                return Err(Error::InsufficientData {
                    what: spec.id(),
                    need: window,
                    got: target_idx,
                });
            }
            let (pair, sd) =
                gaussian_window_forecast(&series.returns()[target_idx - window..target_idx], alpha)?;
            Ok((pair, Some(ForecastDistribution::Gaussian { sd })))
        }
        MethodSpec::Ewma => {
            let (pair, sd) = ewma_forecast(returns, alpha)?;
            Ok((pair, Some(ForecastDistribution::Gaussian { sd })))
        }
        MethodSpec::Garch { leverage, driver, dist, tail } => {
            let drv = garch_driver(driver)?;
            let fit = fit_garch(returns, &drv, leverage, dist)?;
            garch_tail_forecast(&fit, returns, dist, tail, alpha)
        }
        MethodSpec::Caviar { driver, form, es_link } => {
            let mags = magnitude(driver)?;
            let data = RecursionData::new(returns, &mags, driver == Driver::Return);
            let fit = caviar_fit_forecast(&data, form, es_link, alpha)?;
            Ok((fit.pair, None))
        }
        MethodSpec::Care { driver, form } => {
            let mags = magnitude(driver)?;
            let data = RecursionData::new(returns, &mags, driver == Driver::Return);
            let fit = care_fit_forecast(&data, form, alpha)?;
            Ok((fit.pair, None))
        }
    }
}

/// Roll every method over the series: origins are the days from `est_window`
/// on, each forecast fitted on the trailing window. Failures carry the
/// (method, date) context.
pub fn generate_pool(
    specs: &[MethodSpec],
    series: &ReturnSeries,
    est_window: usize,
    alpha: Alpha,
) -> Result<ForecastPool> {
    if series.len() < est_window + 1 {
        return Err(Error::InsufficientData {
            what: "pool generation".into(),
            need: est_window + 1,
            got: series.len(),
        });
    }
    for spec in specs {
        if let Some(driver) = spec.required_column() {
            match driver {
                Driver::Range if series.range().is_none() => return Err(missing_column(driver)),
                Driver::Rv if series.rv().is_none() => return Err(missing_column(driver)),
                _ => {}
            }
        }
    }
    let targets: Vec<usize> = (est_window..series.len()).collect();
    let dates: Vec<NaiveDate> = targets.iter().map(|&i| series.dates()[i]).collect();

    let rows: Vec<Result<Vec<ForecastPair>>> = specs
        .par_iter()
        .map(|spec| {
            targets
                .par_iter()
                .map(|&i| {
                    forecast_at(spec, series, i, est_window, alpha).map(|(p, _)| p).map_err(|e| {
                        Error::OptimizationFailed(format!(
                            "method {} at {}: {e}",
                            spec.id(),
                            series.dates()[i]
                        ))
                    })
                })
                .collect()
        })
        .collect();

    let mut entries = Vec::with_capacity(specs.len() * targets.len());
    for row in rows {
        entries.extend(row?);
    }
    ForecastPool::new(specs.iter().map(|s| s.id()).collect(), dates, entries)
}

/// Per-forecaster distortion applied to the true (VaR, spacing) path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MethodDistortion {
    /// Multiplicative bias on the VaR (1 = unbiased).
    pub var_bias: f64,
    /// Multiplicative bias on the spacing.
    pub spacing_bias: f64,
    /// Lognormal noise scale applied to both components.
    pub noise_sd: f64,
}

/// GARCH-t data-generating process plus per-method distortions for the
/// synthetic validation pool.
#[derive(Debug, Clone)]
pub struct DgpConfig {
    pub omega: f64,
    pub arch: f64,
    pub garch: f64,
    pub nu: f64,
    pub alpha: Alpha,
    pub distortions: Vec<MethodDistortion>,
    pub seed: u64,
}

impl DgpConfig {
    /// Percent-scale daily-return defaults with`m` forecasters whose biases
    /// spread deterministically around one.
    pub fn synthetic(m: usize, bias_spread: f64, noise_sd: f64, alpha: Alpha, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xD6_0B);
        let distortions = (0..m)
            .map(|_| MethodDistortion {
                var_bias: 1.0 + bias_spread * rng.gen_range(-1.0..1.0),
                spacing_bias: 1.0 + bias_spread * rng.gen_range(-1.0..1.0),
                noise_sd,
            })
            .collect();
        Self { omega: 0.05, arch: 0.09, garch: 0.89, nu: 7.0, alpha, distortions, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega > 0.0) || self.arch < 0.0 || self.garch < 0.0 {
            return Err(Error::InvalidParameter("DGP coefficients must be positive".into()));
        }
        if self.arch + self.garch >= 1.0 {
            return Err(Error::InvalidParameter(format!(
                "DGP not stationary: arch + garch = {}",
                self.arch + self.garch
            )));
        }
        if !(self.nu > 2.0) {
            return Err(Error::InvalidParameter(format!("DGP nu must exceed 2, got {}", self.nu)));
        }
        if self.distortions.is_empty() {
            return Err(Error::InvalidParameter("DGP needs at least one forecaster".into()));
        }
        for d in &self.distortions {
            if d.var_bias <= 0.0 || d.spacing_bias < 0.0 || d.noise_sd < 0.0 {
                return Err(Error::InvalidParameter(format!("invalid distortion {d:?}")));
            }
        }
        Ok(())
    }
}

/// Synthetic pool: returns simulated from the GARCH-t DGP, the true
/// conditional (VaR, ES) path, and one distorted forecaster per configured
/// distortion. Deterministic under the seed.
pub fn synth_pool(cfg: &DgpConfig, t: usize) -> Result<(ForecastPool, ReturnSeries, Vec<ForecastPair>)> {
    cfg.validate()?;
    if t < 2 {
        return Err(Error::InvalidParameter("synthetic series needs t >= 2".into()));
    }
    let m = cfg.distortions.len();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let t_dist = rand_distr::StudentT::new(cfg.nu).map_err(|e| {
        Error::InvalidParameter(format!("StudentT({}) sampler: {e}", cfg.nu))
    })?;
    let t_scale = ((cfg.nu - 2.0) / cfg.nu).sqrt();
    let (qz, esz) = student_t_var_es_standardized(cfg.nu, cfg.alpha)?;

    let burn = 500;
    let mut s2 = cfg.omega / (1.0 - cfg.arch - cfg.garch);
    let mut r_prev = 0.0;
    let mut returns = Vec::with_capacity(t);
    let mut truth = Vec::with_capacity(t);
    let mut entries = vec![ForecastPair::new(-1.0, -1.0).unwrap(); m * t];
    for i in 0..burn + t {
        if i > 0 {
            s2 = cfg.omega + cfg.arch * r_prev * r_prev + cfg.garch * s2;
        }
        let sigma = s2.sqrt();
        let z: f64 = t_dist.sample(&mut rng);
        let day = i as i64 - burn as i64;
        if day >= 0 {
            let di = day as usize;
            // Truth for day di is known before r_di realizes.
            let true_pair = ForecastPair::new(sigma * qz, sigma * esz)?;
            truth.push(true_pair);
            for (mi, d) in cfg.distortions.iter().enumerate() {
                let (n1, n2): (f64, f64) = (rng.gen_range(0.0f64..1.0), rng.gen_range(0.0f64..1.0));
                let (g1, g2) = gauss_pair(n1, n2);
                let var = true_pair.var() * d.var_bias * (d.noise_sd * g1).exp();
                let spacing =
                    true_pair.spacing().value() * d.spacing_bias * (d.noise_sd * g2).exp();
                entries[mi * t + di] = ForecastPair::new(var, var - spacing)?;
            }
        }
        r_prev = sigma * z * t_scale;
        if day >= 0 {
            returns.push(r_prev);
        }
    }

    let start = NaiveDate::from_ymd_opt(2000, 1, 3).unwrap();
    let dates: Vec<NaiveDate> = (0..t).map(|i| start + chrono::Days::new(i as u64)).collect();
    let series = ReturnSeries::new(dates.clone(), returns, None, None)?;
    let pool = ForecastPool::new(
        (0..m).map(|i| format!("synth-{i:02}")).collect(),
        dates,
        entries,
    )?;
    Ok((pool, series, truth))
}

#[inline]
fn gauss_pair(u1: f64, u2: f64) -> (f64, f64) {
    let r = (-2.0 * u1.max(1e-12).ln()).sqrt();
    let theta = 2.0 * std::f64::consts::PI * u2;
    (r * theta.cos(), r * theta.sin())
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::Days;

    fn alpha() -> Alpha {
        Alpha::new(0.025).unwrap()
    }

    #[test]
    fn standard_pool_has_ninety_unique_ids() {
        let specs = standard_pool_specs(1800);
        assert_eq!(specs.len(), 90);
        let ids: std::collections::BTreeSet<String> = specs.iter().map(|s| s.id()).collect();
        assert_eq!(ids.len(), 90);
        assert!(ids.contains("HS-250"));
        assert!(ids.contains("GJR-GARCH-RV-skewt-FHS"));
        assert!(ids.contains("CAViaR-Range-AS-Additive"));
        assert!(ids.contains("CARE-RV-IG"));
    }

    #[test]
    fn ids_round_trip_through_parse() {
        for spec in standard_pool_specs(900) {
            let back = MethodSpec::parse(&spec.id()).unwrap();
            assert_eq!(back, spec, "id {}", spec.id());
        }
        assert!(MethodSpec::parse("GARCH-banana").is_err());
    }

    fn constant_series(n: usize) -> ReturnSeries {
        let start = NaiveDate::from_ymd_opt(2015, 1, 1).unwrap();
        ReturnSeries::new(
            (0..n).map(|i| start + Days::new(i as u64)).collect(),
            vec![0.3; n],
            None,
            None,
        )
        .unwrap()
    }

    #[test]
    fn hs_pool_on_constant_series_is_constant() {
        let series = constant_series(160);
        let pool =
            generate_pool(&[MethodSpec::Hs { window: 100 }], &series, 120, alpha()).unwrap();
        assert_eq!(pool.n_methods(), 1);
        assert_eq!(pool.n_days(), 40);
        for t in 0..pool.n_days() {
            assert_eq!(pool.get(0, t).var(), 0.3);
            assert_eq!(pool.get(0, t).es(), 0.3);
        }
    }

    #[test]
    fn pool_dimensions_follow_est_window() {
        let series = constant_series(300);
        let pool =
            generate_pool(&[MethodSpec::Hs { window: 50 }], &series, 200, alpha()).unwrap();
        assert_eq!(pool.n_days(), 100);
        let pool900 =
            generate_pool(&[MethodSpec::Hs { window: 50 }], &series, 100, alpha()).unwrap();
        assert_eq!(pool900.n_days(), 200);
    }

    #[test]
    fn range_method_requires_range_column() {
        let series = constant_series(400);
        let spec = MethodSpec::Caviar {
            driver: Driver::Range,
            form: CaviarForm::Sav,
            es_link: EsLink::Multiplicative,
        };
        let err = generate_pool(&[spec], &series, 300, alpha()).unwrap_err();
        assert!(matches!(err, Error::MissingColumn { .. }));
    }

    #[test]
    fn synth_pool_zero_noise_equals_truth() {
        let mut cfg = DgpConfig::synthetic(3, 0.0, 0.0, alpha(), 5);
        cfg.distortions.iter_mut().for_each(|d| {
            d.var_bias = 1.0;
            d.spacing_bias = 1.0;
        });
        let (pool, series, truth) = synth_pool(&cfg, 50).unwrap();
        assert_eq!(pool.n_days(), 50);
        assert_eq!(series.len(), 50);
        for mi in 0..3 {
            for t in 0..50 {
                assert_eq!(pool.get(mi, t), truth[t]);
            }
        }
    }

    #[test]
    fn synth_pool_is_deterministic() {
        let cfg = DgpConfig::synthetic(4, 0.1, 0.05, alpha(), 99);
        let (pool_a, series_a, _) = synth_pool(&cfg, 80).unwrap();
        let (pool_b, series_b, _) = synth_pool(&cfg, 80).unwrap();
        assert_eq!(series_a.returns(), series_b.returns());
        for mi in 0..4 {
            for t in 0..80 {
                assert_eq!(pool_a.get(mi, t), pool_b.get(mi, t));
            }
        }
    }

    #[test]
    fn true_var_path_hits_at_alpha_rate() {
        let cfg = DgpConfig::synthetic(1, 0.0, 0.0, alpha(), 17);
        let (_, series, truth) = synth_pool(&cfg, 10_000).unwrap();
        let hits = series
            .returns()
            .iter()
            .zip(&truth)
            .filter(|(r, pair)| **r < pair.var())
            .count();
        // Binomial 99% band around 250 of 10000.
        let expected = 250.0;
        let sd = (10_000.0f64 * 0.025 * 0.975).sqrt();
        assert!(
            (hits as f64 - expected).abs() < 2.6 * sd,
            "hits {hits} outside band around {expected}"
        );
    }
}
