//! The nineteen forecast combining methods.
//!
//! Combiners split into a fit step, run on a trailing training window of pool
//! forecasts and realized returns, and an apply step that turns one day's
//! column of method forecasts into a single combined (VaR, ES) pair. Methods
//! without tunable parameters (simple average, median, probability averaging,
//! deepest point) have a trivial fit step. The grand average consumes the
//! other combiners' outputs and is assembled by the caller via
//! [`meta::grand_average`].

pub mod central;
pub mod interval;
pub mod meta;
pub mod weighted;

use rayon::prelude::*;

use crate::data::{ForecastPair, ForecastPool};
use crate::dist::CandidateGrid;
use crate::error::{Error, Result};
use crate::score::{score_or_inf, ScoreSpec};

pub use central::{
    kde_mode, median_combine, mode_combine, optimize_trim, silverman_bandwidth, simple_average,
    trimmed_combine, KdeSpec, TrimKind, TrimOutcome, TrimSearch, TrimSpec,
};
pub use interval::{
    deepest_combine, halfspace_depth, method_cdf, probability_average, simplicial_depth, x_grid,
    CdfCurve, DepthNotion, VarRule,
};
pub use meta::{fit_stc, grand_average, stc_combine, stc_weight, StcParams};
pub use weighted::{
    fit_minimum_score, fit_minimum_score_ridge, minimum_score_combine, optimize_temperature,
    relative_score_combine, relative_score_weights, weighted_median_combine, MinScoreMode,
    RelCombineStyle, RelScoreConfig, RidgeConfig, WeightVector,
};

/// A contiguous day range of a pool, avoiding copies in rolling windows.
#[derive(Debug, Clone, Copy)]
pub struct PoolView<'a> {
    pool: &'a ForecastPool,
    start: usize,
    end: usize,
}

impl<'a> PoolView<'a> {
    pub fn new(pool: &'a ForecastPool, start: usize, end: usize) -> Self {
        assert!(start < end && end <= pool.n_days());
        Self { pool, start, end }
    }

    pub fn full(pool: &'a ForecastPool) -> Self {
        Self::new(pool, 0, pool.n_days())
    }

    /// Sub-range in view-relative day indices.
    pub fn subview(&self, start: usize, end: usize) -> PoolView<'a> {
        PoolView::new(self.pool, self.start + start, self.start + end)
    }

    #[inline]
    pub fn n_methods(&self) -> usize {
        self.pool.n_methods()
    }

    #[inline]
    pub fn n_days(&self) -> usize {
        self.end - self.start
    }

    #[inline]
    pub fn get(&self, method: usize, day: usize) -> ForecastPair {
        self.pool.get(method, self.start + day)
    }

    pub fn column(&self, day: usize) -> Vec<ForecastPair> {
        (0..self.n_methods()).map(|m| self.get(m, day)).collect()
    }
}

/// The nineteen combining methods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CombinerKind {
    SimpleAverage,
    Median,
    Mode,
    TrimmedSymmetric,
    TrimmedExterior,
    TrimmedInterior,
    TrimmedLower,
    TrimmedHigher,
    TrimmedFlexible,
    ProbabilityAverage,
    HalfspaceDeepest,
    SimplicialDeepest,
    RelativeScore,
    RelativeScoreWeightedMedian,
    MinimumScore,
    MinimumScoreRatio,
    MinimumScoreRidge,
    SmoothTransition,
    GrandAverage,
}

impl CombinerKind {
    pub const ALL: [CombinerKind; 19] = [
        CombinerKind::SimpleAverage,
        CombinerKind::Median,
        CombinerKind::Mode,
        CombinerKind::TrimmedSymmetric,
        CombinerKind::TrimmedExterior,
        CombinerKind::TrimmedInterior,
        CombinerKind::TrimmedLower,
        CombinerKind::TrimmedHigher,
        CombinerKind::TrimmedFlexible,
        CombinerKind::ProbabilityAverage,
        CombinerKind::HalfspaceDeepest,
        CombinerKind::SimplicialDeepest,
        CombinerKind::RelativeScore,
        CombinerKind::RelativeScoreWeightedMedian,
        CombinerKind::MinimumScore,
        CombinerKind::MinimumScoreRatio,
        CombinerKind::MinimumScoreRidge,
        CombinerKind::SmoothTransition,
        CombinerKind::GrandAverage,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CombinerKind::SimpleAverage => "simple-average",
            CombinerKind::Median => "median",
            CombinerKind::Mode => "mode",
            CombinerKind::TrimmedSymmetric => "trimmed-symmetric",
            CombinerKind::TrimmedExterior => "trimmed-exterior",
            CombinerKind::TrimmedInterior => "trimmed-interior",
            CombinerKind::TrimmedLower => "trimmed-lower",
            CombinerKind::TrimmedHigher => "trimmed-higher",
            CombinerKind::TrimmedFlexible => "trimmed-flexible",
            CombinerKind::ProbabilityAverage => "probability-average",
            CombinerKind::HalfspaceDeepest => "halfspace-deepest",
            CombinerKind::SimplicialDeepest => "simplicial-deepest",
            CombinerKind::RelativeScore => "relative-score",
            CombinerKind::RelativeScoreWeightedMedian => "relative-score-weighted-median",
            CombinerKind::MinimumScore => "minimum-score",
            CombinerKind::MinimumScoreRatio => "minimum-score-ratio",
            CombinerKind::MinimumScoreRidge => "minimum-score-ridge",
            CombinerKind::SmoothTransition => "smooth-transition",
            CombinerKind::GrandAverage => "grand-average",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        CombinerKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown combiner `{s}`")))
    }
}

/// Tuning knobs shared by the combiner engine.
#[derive(Debug, Clone)]
pub struct CombineSettings {
    /// Estimation score (the AL instance throughout).
    pub score: ScoreSpec,
    /// VaR extraction rule for probability averaging.
    pub var_rule: VarRule,
    /// Ridge penalty search for the regularized minimum-score combiner.
    pub ridge: RidgeConfig,
    /// Multiples of the Silverman bandwidth searched for the KDE mode.
    pub kde_factors: Vec<f64>,
}

impl CombineSettings {
    pub fn new(score: ScoreSpec) -> Self {
        Self {
            score,
            var_rule: VarRule::Interpolated,
            ridge: RidgeConfig::default(),
            kde_factors: vec![0.25, 0.5, 1.0, 2.0, 4.0],
        }
    }
}

/// A combiner with its window-fitted parameters, ready to be applied to one
/// day's column.
#[derive(Debug, Clone)]
pub enum FittedCombiner {
    SimpleAverage,
    Median,
    Mode { factor_var: f64, factor_spacing: f64 },
    Trimmed(TrimSpec),
    ProbabilityAverage,
    Deepest(DepthNotion),
    RelativeScore { weights: WeightVector },
    RelScoreMedian { weights: WeightVector },
    MinimumScore { mode: MinScoreMode, wv: WeightVector, w2: WeightVector },
    SmoothTransition { params: StcParams, inner_weights: WeightVector },
}

/// In-sample KDE factor selection: grid over factor pairs scored by the mean
/// joint score of the mode-combined path.
fn fit_mode_factors(
    train: &PoolView,
    returns: &[f64],
    settings: &CombineSettings,
) -> Result<(f64, f64)> {
    let days = train.n_days();
    let factors = &settings.kde_factors;
    // Mode paths per factor, for each component separately.
    let mut var_paths: Vec<Vec<f64>> = vec![Vec::with_capacity(days); factors.len()];
    let mut spacing_paths: Vec<Vec<f64>> = vec![Vec::with_capacity(days); factors.len()];
    for j in 0..days {
        let col = train.column(j);
        let vars: Vec<f64> = col.iter().map(|p| p.var()).collect();
        let spacings: Vec<f64> = col.iter().map(|p| p.spacing().value()).collect();
        let sil_v = silverman_bandwidth(&vars);
        let sil_s = silverman_bandwidth(&spacings);
        for (fi, &f) in factors.iter().enumerate() {
            var_paths[fi].push(kde_mode(&vars, f * sil_v));
            spacing_paths[fi].push(kde_mode(&spacings, (f * sil_s).max(1e-9)).max(0.0));
        }
    }
    let mut best: Option<(f64, (f64, f64))> = None;
    for (vi, &fv) in factors.iter().enumerate() {
        for (si, &fs) in factors.iter().enumerate() {
            let mut sum = 0.0;
            for j in 0..days {
                let var = var_paths[vi][j];
                let es = var - spacing_paths[si][j];
                sum += score_or_inf(&settings.score, var, es, returns[j]);
            }
            let obj = sum / days as f64;
            if obj.is_finite() && best.as_ref().map_or(true, |(b, _)| obj < *b) {
                best = Some((obj, (fv, fs)));
            }
        }
    }
    best.map(|(_, f)| f)
        .ok_or_else(|| Error::OptimizationFailed("KDE bandwidth selection found no finite objective".into()))
}

/// Fit one combiner on the training window. `SmoothTransition` and
/// `GrandAverage` are handled by [`fit_all`] because they depend on other
/// combiners.
fn fit_one(
    kind: CombinerKind,
    train: &PoolView,
    returns: &[f64],
    settings: &CombineSettings,
) -> Result<FittedCombiner> {
    match kind {
        CombinerKind::SimpleAverage => Ok(FittedCombiner::SimpleAverage),
        CombinerKind::Median => Ok(FittedCombiner::Median),
        CombinerKind::Mode => {
            let (fv, fs) = fit_mode_factors(train, returns, settings)?;
            Ok(FittedCombiner::Mode { factor_var: fv, factor_spacing: fs })
        }
        CombinerKind::TrimmedSymmetric
        | CombinerKind::TrimmedExterior
        | CombinerKind::TrimmedInterior
        | CombinerKind::TrimmedLower
        | CombinerKind::TrimmedHigher => {
            let trim_kind = match kind {
                CombinerKind::TrimmedSymmetric => TrimKind::Symmetric,
                CombinerKind::TrimmedExterior => TrimKind::Exterior,
                CombinerKind::TrimmedInterior => TrimKind::Interior,
                CombinerKind::TrimmedLower => TrimKind::Lower,
                _ => TrimKind::Higher,
            };
            let spec = optimize_trim(TrimSearch::Fixed(trim_kind), train, returns, &settings.score)?;
            Ok(FittedCombiner::Trimmed(spec))
        }
        CombinerKind::TrimmedFlexible => {
            let spec = optimize_trim(TrimSearch::Flexible, train, returns, &settings.score)?;
            Ok(FittedCombiner::Trimmed(spec))
        }
        CombinerKind::ProbabilityAverage => Ok(FittedCombiner::ProbabilityAverage),
        CombinerKind::HalfspaceDeepest => Ok(FittedCombiner::Deepest(DepthNotion::Halfspace)),
        CombinerKind::SimplicialDeepest => Ok(FittedCombiner::Deepest(DepthNotion::Simplicial)),
        CombinerKind::RelativeScore | CombinerKind::RelativeScoreWeightedMedian => {
            let style = if kind == CombinerKind::RelativeScore {
                RelCombineStyle::Mean
            } else {
                RelCombineStyle::Median
            };
            let cfg = optimize_temperature(train, returns, &settings.score, style)?;
            let mut summed = vec![0.0; train.n_methods()];
            for i in 0..train.n_methods() {
                for j in 0..train.n_days() {
                    let p = train.get(i, j);
                    summed[i] +=
                        crate::score::joint_score(&settings.score, p.var(), p.es(), returns[j])?;
                }
            }
            let weights = relative_score_weights(&cfg, &summed)?;
            Ok(match style {
                RelCombineStyle::Mean => FittedCombiner::RelativeScore { weights },
                RelCombineStyle::Median => FittedCombiner::RelScoreMedian { weights },
            })
        }
        CombinerKind::MinimumScore => {
            let (wv, w2) = fit_minimum_score(train, returns, &settings.score, MinScoreMode::Spacing)?;
            Ok(FittedCombiner::MinimumScore { mode: MinScoreMode::Spacing, wv, w2 })
        }
        CombinerKind::MinimumScoreRatio => {
            let (wv, w2) = fit_minimum_score(train, returns, &settings.score, MinScoreMode::Ratio)?;
            Ok(FittedCombiner::MinimumScore { mode: MinScoreMode::Ratio, wv, w2 })
        }
        CombinerKind::MinimumScoreRidge => {
            let (wv, w2, _) =
                fit_minimum_score_ridge(train, returns, &settings.score, &settings.ridge)?;
            Ok(FittedCombiner::MinimumScore { mode: MinScoreMode::Spacing, wv, w2 })
        }
        CombinerKind::SmoothTransition | CombinerKind::GrandAverage => {
            Err(Error::InvalidConfig(format!("{} is fitted by fit_all", kind.name())))
        }
    }
}

/// Apply a fitted combiner to one day's column.
pub fn apply_combiner(
    fitted: &FittedCombiner,
    column: &[ForecastPair],
    grid: &CandidateGrid,
    settings: &CombineSettings,
) -> Result<ForecastPair> {
    match fitted {
        FittedCombiner::SimpleAverage => simple_average(column),
        FittedCombiner::Median => median_combine(column),
        FittedCombiner::Mode { factor_var, factor_spacing } => {
            let vars: Vec<f64> = column.iter().map(|p| p.var()).collect();
            let spacings: Vec<f64> = column.iter().map(|p| p.spacing().value()).collect();
            let spec = KdeSpec::new(
                (factor_var * silverman_bandwidth(&vars)).max(1e-9),
                (factor_spacing * silverman_bandwidth(&spacings)).max(1e-9),
            )?;
            mode_combine(column, &spec)
        }
        FittedCombiner::Trimmed(spec) => trimmed_combine(column, spec).map(|o| o.pair),
        FittedCombiner::ProbabilityAverage => {
            let curves: Vec<CdfCurve> = column
                .iter()
                .map(|&pair| method_cdf(pair, None, grid, settings.score.alpha))
                .collect::<Result<_>>()?;
            probability_average(&curves, settings.score.alpha, settings.var_rule)
        }
        FittedCombiner::Deepest(notion) => deepest_combine(column, *notion).map(|(_, p)| p),
        FittedCombiner::RelativeScore { weights } => relative_score_combine(weights, column),
        FittedCombiner::RelScoreMedian { weights } => weighted_median_combine(weights, column),
        FittedCombiner::MinimumScore { mode, wv, w2 } => {
            minimum_score_combine(wv, w2, *mode, column)
        }
        FittedCombiner::SmoothTransition { params, inner_weights } => {
            let pair1 = simple_average(column)?;
            let pair2 = relative_score_combine(inner_weights, column)?;
            // The transition variable is the mean VaR of the pool column.
            Ok(stc_combine(params, pair1, pair2, pair1.var()))
        }
    }
}

/// Everything fitted at one forecast origin: the first 18 combiners (the
/// grand average has no parameters and is assembled from their outputs).
pub struct FittedSet {
    pub fits: Vec<(CombinerKind, Result<FittedCombiner>)>,
}

/// Fit every requested combiner on the training window. The smooth transition
/// is fitted after relative score, whose in-window path it blends with the
/// simple average.
pub fn fit_all(
    kinds: &[CombinerKind],
    train: &PoolView,
    returns: &[f64],
    settings: &CombineSettings,
) -> FittedSet {
    let independent: Vec<(CombinerKind, Result<FittedCombiner>)> = kinds
        .par_iter()
        .filter(|k| !matches!(k, CombinerKind::SmoothTransition | CombinerKind::GrandAverage))
        .map(|&k| (k, fit_one(k, train, returns, settings)))
        .collect();

    let mut fits = independent;
    if kinds.contains(&CombinerKind::SmoothTransition) {
        let stc = fit_stc_combiner(&fits, train, returns, settings);
        fits.push((CombinerKind::SmoothTransition, stc));
    }
    // Preserve the canonical order.
    fits.sort_by_key(|(k, _)| CombinerKind::ALL.iter().position(|c| c == k).unwrap());
    FittedSet { fits }
}

fn fit_stc_combiner(
    fits: &[(CombinerKind, Result<FittedCombiner>)],
    train: &PoolView,
    returns: &[f64],
    settings: &CombineSettings,
) -> Result<FittedCombiner> {
    // Reuse the relative-score fit when present, otherwise fit one here.
    let inner_weights = match fits.iter().find(|(k, _)| *k == CombinerKind::RelativeScore) {
        Some((_, Ok(FittedCombiner::RelativeScore { weights }))) => weights.clone(),
        Some((_, Err(e))) => {
            return Err(Error::AllInputsFailed(format!(
                "smooth transition needs the relative-score combiner, which failed: {e}"
            )))
        }
        _ => match fit_one(CombinerKind::RelativeScore, train, returns, settings)? {
            FittedCombiner::RelativeScore { weights } => weights,
            _ => unreachable!(),
        },
    };

    let days = train.n_days();
    let mut path_a = Vec::with_capacity(days);
    let mut path_b = Vec::with_capacity(days);
    let mut transition = Vec::with_capacity(days);
    for j in 0..days {
        let col = train.column(j);
        let sa = simple_average(&col)?;
        let rs = relative_score_combine(&inner_weights, &col)?;
        transition.push(sa.var());
        path_a.push(sa);
        path_b.push(rs);
    }
    let params = fit_stc(&path_a, &path_b, &transition, returns, &settings.score)?;
    Ok(FittedCombiner::SmoothTransition { params, inner_weights })
}

/// Apply a fitted set to one day's column, assembling the grand average from
/// the other combiners' successful outputs (itself excluded).
pub fn apply_all(
    set: &FittedSet,
    include_grand: bool,
    column: &[ForecastPair],
    grid: &CandidateGrid,
    settings: &CombineSettings,
) -> Vec<(CombinerKind, Result<ForecastPair>)> {
    let mut out: Vec<(CombinerKind, Result<ForecastPair>)> = set
        .fits
        .iter()
        .map(|(k, fit)| {
            let pair = match fit {
                Ok(f) => apply_combiner(f, column, grid, settings),
                Err(e) => Err(Error::OptimizationFailed(format!("{} fit failed: {e}", k.name()))),
            };
            (*k, pair)
        })
        .collect();
    if include_grand {
        let inputs: Vec<Option<ForecastPair>> =
            out.iter().map(|(_, r)| r.as_ref().ok().copied()).collect();
        let grand = grand_average(&inputs).map(|(p, _)| p);
        out.push((CombinerKind::GrandAverage, grand));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Alpha;
    use crate::methods::{synth_pool, DgpConfig};
    use std::sync::OnceLock;

    fn alpha() -> Alpha {
        Alpha::new(0.025).unwrap()
    }

    fn grid() -> &'static CandidateGrid {
        static GRID: OnceLock<CandidateGrid> = OnceLock::new();
        GRID.get_or_init(|| crate::dist::build_candidate_grid(alpha()).unwrap())
    }

    #[test]
    fn names_round_trip() {
        assert_eq!(CombinerKind::ALL.len(), 19);
        for kind in CombinerKind::ALL {
            assert_eq!(CombinerKind::parse(kind.name()).unwrap(), kind);
        }
        assert!(CombinerKind::parse("nope").is_err());
    }

    #[test]
    fn fit_and_apply_all_on_synthetic_pool() {
        let cfg = DgpConfig::synthetic(8, 0.08, 0.05, alpha(), 21);
        let (pool, series, _) = synth_pool(&cfg, 260).unwrap();
        let train = PoolView::new(&pool, 0, 250);
        let returns = &series.returns()[..250];
        let settings = CombineSettings::new(ScoreSpec::al(alpha()));

        let set = fit_all(&CombinerKind::ALL, &train, returns, &settings);
        assert_eq!(set.fits.len(), 18);
        for (kind, fit) in &set.fits {
            assert!(fit.is_ok(), "{} failed: {:?}", kind.name(), fit.as_ref().err());
        }

        let today = pool.column(250);
        let outputs = apply_all(&set, true, &today, grid(), &settings);
        assert_eq!(outputs.len(), 19);
        for (kind, out) in &outputs {
            let pair = out.as_ref().unwrap_or_else(|e| panic!("{} failed: {e}", kind.name()));
            assert!(pair.es() <= pair.var(), "{} crossed", kind.name());
            assert!(pair.var() < 0.0, "{} nonnegative VaR", kind.name());
        }
    }

    #[test]
    fn grand_average_excludes_itself_and_uses_the_rest() {
        let cfg = DgpConfig::synthetic(5, 0.0, 0.0, alpha(), 22);
        let (pool, series, truth) = synth_pool(&cfg, 220).unwrap();
        let train = PoolView::new(&pool, 0, 210);
        let returns = &series.returns()[..210];
        let settings = CombineSettings::new(ScoreSpec::al(alpha()));
        // All forecasters equal the truth, so every combiner output equals the
        // truth and so does their average.
        let kinds = [
            CombinerKind::SimpleAverage,
            CombinerKind::Median,
            CombinerKind::GrandAverage,
        ];
        let set = fit_all(&kinds, &train, returns, &settings);
        let outputs = apply_all(&set, true, &pool.column(210), grid(), &settings);
        let grand = outputs
            .iter()
            .find(|(k, _)| *k == CombinerKind::GrandAverage)
            .unwrap()
            .1
            .as_ref()
            .unwrap()
            .clone();
        let expect = truth[210];
        assert!((grand.var() - expect.var()).abs() < 1e-9);
        assert!((grand.es() - expect.es()).abs() < 1e-9);
    }
}
