//! Performance-based weighted combiners.
//!
//! Relative-score weighting turns each method's joint score summed over the
//! estimation window into softmax weights with a temperature parameter; the
//! same weights combine the VaRs and the ESs (or their componentwise weighted
//! medians). Minimum-score weighting directly searches two simplex weight
//! vectors, one for the VaR and one for the spacing (or the ES/VaR ratio),
//! minimizing the in-sample average joint score, optionally with ridge
//! penalties selected on a chronological 75:25 holdout.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::ForecastPair;
use crate::error::{Error, Result};
use crate::optim::{golden_section, nelder_mead, softmax};
use crate::score::{joint_score, score_or_inf, ScoreSpec};

use super::PoolView;

/// Simplex-constrained combining weights: entries in [0, 1] summing to one
/// within 1e-10 (checked, then normalized exactly).
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.is_empty() {
            return Err(Error::InvalidParameter("empty weight vector".into()));
        }
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidParameter(format!(
                "weights must sum to one within 1e-10, got {sum}"
            )));
        }
        for &x in &w {
            if !(-1e-12..=1.0 + 1e-12).contains(&x) {
                return Err(Error::InvalidParameter(format!("weight {x} outside [0, 1]")));
            }
        }
        Ok(Self(w.into_iter().map(|x| (x / sum).clamp(0.0, 1.0)).collect()))
    }

    pub fn equal(m: usize) -> Self {
        Self(vec![1.0 / m as f64; m])
    }

    pub fn one_hot(m: usize, idx: usize) -> Self {
        let mut w = vec![0.0; m];
        w[idx] = 1.0;
        Self(w)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Temperature of the relative-score softmax.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelScoreConfig {
    pub temperature: f64,
}

impl RelScoreConfig {
    pub fn new(temperature: f64) -> Result<Self> {
        if temperature < 0.0 || !temperature.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "relative-score temperature must be >= 0, got {temperature}"
            )));
        }
        Ok(Self { temperature })
    }
}

/// Softmax weights decreasing in the summed historical score,
/// `w_m ~ exp(-lambda * S_m)`, computed with max subtraction.
pub fn relative_score_weights(cfg: &RelScoreConfig, summed_scores: &[f64]) -> Result<WeightVector> {
    if summed_scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite { what: "summed scores".into() });
    }
    let logits: Vec<f64> = summed_scores.iter().map(|&s| -cfg.temperature * s).collect();
    WeightVector::new(softmax(&logits))
}

/// Weighted means of the VaRs and the ESs with one shared weight vector.
pub fn relative_score_combine(weights: &WeightVector, column: &[ForecastPair]) -> Result<ForecastPair> {
    if weights.len() != column.len() {
        return Err(Error::LengthMismatch {
            what: "weights vs column".into(),
            left: weights.len(),
            right: column.len(),
        });
    }
    let mut var = 0.0;
    let mut es = 0.0;
    for (w, p) in weights.as_slice().iter().zip(column) {
        var += w * p.var();
        es += w * p.es();
    }
    ForecastPair::new(var, es.min(var))
}

fn weighted_median(values: &mut Vec<(f64, f64)>) -> f64 {
    values.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut cum = 0.0;
    for &(v, w) in values.iter() {
        cum += w;
        if cum >= 0.5 {
            return v;
        }
    }
    values.last().unwrap().0
}

/// Componentwise weighted median: the smallest value whose cumulative weight
/// (ascending) reaches one half.
pub fn weighted_median_combine(
    weights: &WeightVector,
    column: &[ForecastPair],
) -> Result<ForecastPair> {
    if weights.len() != column.len() {
        return Err(Error::LengthMismatch {
            what: "weights vs column".into(),
            left: weights.len(),
            right: column.len(),
        });
    }
    let mut vars: Vec<(f64, f64)> = column
        .iter()
        .zip(weights.as_slice())
        .map(|(p, &w)| (p.var(), w))
        .collect();
    let mut ess: Vec<(f64, f64)> = column
        .iter()
        .zip(weights.as_slice())
        .map(|(p, &w)| (p.es(), w))
        .collect();
    let var = weighted_median(&mut vars);
    let es = weighted_median(&mut ess);
    ForecastPair::new(var, es.min(var))
}

/// Whether the minimum-score second component models the spacing or the
/// ES/VaR ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MinScoreMode {
    Spacing,
    Ratio,
}

/// Day-major training arrays for the weight optimizers.
struct TrainData {
    m: usize,
    days: usize,
    /// vars[j*m + i]
    vars: Vec<f64>,
    /// spacing or ratio, same layout
    second: Vec<f64>,
    returns: Vec<f64>,
}

impl TrainData {
    fn build(train: &PoolView, returns: &[f64], mode: MinScoreMode) -> Result<Self> {
        let m = train.n_methods();
        let days = train.n_days();
        let mut vars = Vec::with_capacity(m * days);
        let mut second = Vec::with_capacity(m * days);
        for j in 0..days {
            for i in 0..m {
                let p = train.get(i, j);
                if mode == MinScoreMode::Ratio && p.var() >= 0.0 {
                    return Err(Error::Domain(format!(
                        "ratio mode needs all VaR forecasts < 0, found {} (method {j})",
                        p.var()
                    )));
                }
                vars.push(p.var());
                second.push(match mode {
                    MinScoreMode::Spacing => p.spacing().value(),
                    MinScoreMode::Ratio => p.es() / p.var(),
                });
            }
        }
        Ok(Self { m, days, vars, second, returns: returns.to_vec() })
    }

    /// Mean joint score of the combined path for explicit weight vectors.
    fn objective(&self, wv: &[f64], w2: &[f64], mode: MinScoreMode, spec: &ScoreSpec) -> f64 {
        let mut sum = 0.0;
        for j in 0..self.days {
            let base = j * self.m;
            let mut var = 0.0;
            let mut sec = 0.0;
            for i in 0..self.m {
                var += wv[i] * self.vars[base + i];
                sec += w2[i] * self.second[base + i];
            }
            let es = match mode {
                MinScoreMode::Spacing => var - sec,
                MinScoreMode::Ratio => var * sec,
            };
            let s = score_or_inf(spec, var, es, self.returns[j]);
            if !s.is_finite() {
                return f64::INFINITY;
            }
            sum += s;
        }
        sum / self.days as f64
    }

    /// Per-method scores summed over the window (relative-score warm start).
    fn summed_scores(&self, spec: &ScoreSpec, mode: MinScoreMode) -> Vec<f64> {
        let mut sums = vec![0.0; self.m];
        for j in 0..self.days {
            let base = j * self.m;
            for i in 0..self.m {
                let var = self.vars[base + i];
                let es = match mode {
                    MinScoreMode::Spacing => var - self.second[base + i],
                    MinScoreMode::Ratio => var * self.second[base + i],
                };
                sums[i] += score_or_inf(spec, var, es, self.returns[j]);
            }
        }
        sums
    }
}

fn softmax_pair(theta: &[f64], m: usize) -> (Vec<f64>, Vec<f64>) {
    (softmax(&theta[..m]), softmax(&theta[m..]))
}

/// Deterministic start table: equal weights, a relative-score warm start,
/// eight seeded perturbations, and the best single method.
fn weight_starts(m: usize, summed: &[f64], seed: u64) -> Vec<Vec<f64>> {
    let mut starts = Vec::with_capacity(11);
    starts.push(vec![0.0; 2 * m]);
    // Relative-score warm start at unit temperature, used for both simplices.
    let warm = softmax(&summed.iter().map(|&s| -s).collect::<Vec<f64>>());
    let warm_theta: Vec<f64> = warm.iter().map(|&w| (w + 1e-12).ln()).collect();
    let mut both = warm_theta.clone();
    both.extend_from_slice(&warm_theta);
    starts.push(both);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..8 {
        starts.push((0..2 * m).map(|_| rng.gen_range(-0.5..0.5)).collect());
    }
    // Best historical single method as a near-vertex start.
    let best = summed
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, _)| i)
        .unwrap_or(0);
    let mut vertex = vec![0.0; 2 * m];
    vertex[best] = 25.0;
    vertex[m + best] = 25.0;
    starts.push(vertex);
    starts
}

fn optimize_weights(
    data: &TrainData,
    mode: MinScoreMode,
    spec: &ScoreSpec,
    penalties: (f64, f64),
    starts: &[Vec<f64>],
    max_evals: usize,
) -> Result<(WeightVector, WeightVector, f64)> {
    let m = data.m;
    let (l1, l2) = penalties;
    let penalized = |wv: &[f64], w2: &[f64]| -> f64 {
        let base = data.objective(wv, w2, mode, spec);
        if !base.is_finite() {
            return f64::INFINITY;
        }
        base + l1 * wv.iter().map(|w| w * w).sum::<f64>()
            + l2 * w2.iter().map(|w| w * w).sum::<f64>()
    };

    let mut best: Option<(f64, Vec<f64>, Vec<f64>)> = None;
    let consider = |obj: f64, wv: Vec<f64>, w2: Vec<f64>, best: &mut Option<(f64, Vec<f64>, Vec<f64>)>| {
        if obj.is_finite() && best.as_ref().map_or(true, |(b, _, _)| obj < *b) {
            *best = Some((obj, wv, w2));
        }
    };

    for start in starts {
        let mut f = |theta: &[f64]| {
            let (wv, w2) = softmax_pair(theta, m);
            penalized(&wv, &w2)
        };
        let out = nelder_mead(&mut f, start, 0.4, max_evals, 1e-10);
        let (wv, w2) = softmax_pair(&out.x, m);
        let obj = penalized(&wv, &w2);
        consider(obj, wv, w2, &mut best);
    }
    // Exact vertex and equal-weight candidates keep the optimizer honest: the
    // returned objective can never lose to the simple average or to any
    // single method.
    let equal = vec![1.0 / m as f64; m];
    consider(penalized(&equal, &equal), equal.clone(), equal, &mut best);
    for i in 0..m {
        let mut v = vec![0.0; m];
        v[i] = 1.0;
        consider(penalized(&v, &v), v.clone(), v, &mut best);
    }

    let (obj, wv, w2) =
        best.ok_or_else(|| Error::OptimizationFailed("minimum-score: no finite start".into()))?;
    Ok((WeightVector::new(wv)?, WeightVector::new(w2)?, obj))
}

/// Fit the two simplex weight vectors of minimum-score combining by softmax
/// reparameterization and multi-start simplex search.
pub fn fit_minimum_score(
    train: &PoolView,
    returns: &[f64],
    spec: &ScoreSpec,
    mode: MinScoreMode,
) -> Result<(WeightVector, WeightVector)> {
    if returns.len() != train.n_days() {
        return Err(Error::LengthMismatch {
            what: "fit_minimum_score days".into(),
            left: train.n_days(),
            right: returns.len(),
        });
    }
    if returns.len() < 100 {
        return Err(Error::InsufficientData {
            what: "minimum-score training span".into(),
            need: 100,
            got: returns.len(),
        });
    }
    let data = TrainData::build(train, returns, mode)?;
    let summed = data.summed_scores(spec, mode);
    let starts = weight_starts(data.m, &summed, 0x3D_5C_0E);
    let (wv, w2, _) = optimize_weights(&data, mode, spec, (0.0, 0.0), &starts, 4000)?;
    Ok((wv, w2))
}

/// Combine one day's column with fitted minimum-score weights.
pub fn minimum_score_combine(
    wv: &WeightVector,
    w2: &WeightVector,
    mode: MinScoreMode,
    column: &[ForecastPair],
) -> Result<ForecastPair> {
    if wv.len() != column.len() || w2.len() != column.len() {
        return Err(Error::LengthMismatch {
            what: "minimum_score_combine".into(),
            left: wv.len(),
            right: column.len(),
        });
    }
    let mut var = 0.0;
    let mut sec = 0.0;
    for i in 0..column.len() {
        var += wv.as_slice()[i] * column[i].var();
        sec += w2.as_slice()[i]
            * match mode {
                MinScoreMode::Spacing => column[i].spacing().value(),
                MinScoreMode::Ratio => {
                    if column[i].var() >= 0.0 {
                        return Err(Error::Domain("ratio mode needs var < 0".into()));
                    }
                    column[i].es() / column[i].var()
                }
            };
    }
    let es = match mode {
        MinScoreMode::Spacing => var - sec,
        MinScoreMode::Ratio => var * sec,
    };
    ForecastPair::new(var, es.min(var))
}

/// Ridge-penalty configuration for regularized minimum-score combining.
#[derive(Debug, Clone)]
pub struct RidgeConfig {
    /// Shared penalty axis searched for both lambda_1 and lambda_2.
    pub penalty_axis: Vec<f64>,
    pub holdout_fraction: f64,
}

impl Default for RidgeConfig {
    fn default() -> Self {
        // {0} plus 13 log-spaced points on [1e-4, 1e2].
        let mut axis = vec![0.0];
        for i in 0..13 {
            axis.push(10f64.powf(-4.0 + 6.0 * i as f64 / 12.0));
        }
        Self { penalty_axis: axis, holdout_fraction: 0.25 }
    }
}

/// Regularized minimum-score fit: for each penalty pair, fit on the
/// chronologically first 1 - holdout fraction of the window, select penalties
/// by unpenalized score on the rest, then refit on the whole window.
pub fn fit_minimum_score_ridge(
    train: &PoolView,
    returns: &[f64],
    spec: &ScoreSpec,
    cfg: &RidgeConfig,
) -> Result<(WeightVector, WeightVector, (f64, f64))> {
    if !(cfg.holdout_fraction > 0.0 && cfg.holdout_fraction < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "holdout fraction must lie in (0,1), got {}",
            cfg.holdout_fraction
        )));
    }
    if returns.len() != train.n_days() {
        return Err(Error::LengthMismatch {
            what: "ridge fit days".into(),
            left: train.n_days(),
            right: returns.len(),
        });
    }
    let t = returns.len();
    if t < 100 {
        return Err(Error::InsufficientData {
            what: "ridge training span".into(),
            need: 100,
            got: t,
        });
    }
    let n_train = ((1.0 - cfg.holdout_fraction) * t as f64).floor() as usize;
    let n_train = n_train.clamp(1, t - 1);
    let mode = MinScoreMode::Spacing;

    let fit_view = train.subview(0, n_train);
    let val_view = train.subview(n_train, t);
    let fit_data = TrainData::build(&fit_view, &returns[..n_train], mode)?;
    let val_data = TrainData::build(&val_view, &returns[n_train..], mode)?;
    let summed = fit_data.summed_scores(spec, mode);

    // Unpenalized solution on the training segment seeds every cell.
    let full_starts = weight_starts(fit_data.m, &summed, 0x3D_5C_0E);
    let (uw_v, uw_2, _) = optimize_weights(&fit_data, mode, spec, (0.0, 0.0), &full_starts, 4000)?;
    let unpen_theta: Vec<f64> = uw_v
        .as_slice()
        .iter()
        .chain(uw_2.as_slice())
        .map(|&w| (w + 1e-12).ln())
        .collect();
    let cell_starts = vec![vec![0.0; 2 * fit_data.m], unpen_theta.clone()];

    let mut best: Option<(f64, (f64, f64))> = None;
    for &l1 in &cfg.penalty_axis {
        for &l2 in &cfg.penalty_axis {
            let (wv, w2, _) =
                optimize_weights(&fit_data, mode, spec, (l1, l2), &cell_starts, 2500)?;
            let val = val_data.objective(wv.as_slice(), w2.as_slice(), mode, spec);
            if val.is_finite() && best.as_ref().map_or(true, |(b, _)| val < *b) {
                best = Some((val, (l1, l2)));
            }
        }
    }
    let (_, chosen) = best
        .ok_or_else(|| Error::OptimizationFailed("ridge holdout: no finite validation".into()))?;

    // Refit on the whole window at the chosen penalties.
    let full_data = TrainData::build(train, returns, mode)?;
    let full_summed = full_data.summed_scores(spec, mode);
    let mut refit_starts = weight_starts(full_data.m, &full_summed, 0x3D_5C_0E);
    refit_starts.push(unpen_theta);
    let (wv, w2, _) = optimize_weights(&full_data, mode, spec, chosen, &refit_starts, 4000)?;
    Ok((wv, w2, chosen))
}

/// How the relative-score weights are turned into a combined pair when
/// optimizing the temperature.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelCombineStyle {
    Mean,
    Median,
}

/// In-sample temperature search: a log-spaced grid {0} and 25 points on
/// [1e-4, 1e2], refined by golden section around the grid argmin.
pub fn optimize_temperature(
    train: &PoolView,
    returns: &[f64],
    spec: &ScoreSpec,
    style: RelCombineStyle,
) -> Result<RelScoreConfig> {
    if returns.len() != train.n_days() {
        return Err(Error::LengthMismatch {
            what: "optimize_temperature days".into(),
            left: train.n_days(),
            right: returns.len(),
        });
    }
    if returns.len() < 100 {
        return Err(Error::InsufficientData {
            what: "temperature training span".into(),
            need: 100,
            got: returns.len(),
        });
    }
    let m = train.n_methods();
    let days = train.n_days();
    let mut summed = vec![0.0; m];
    for i in 0..m {
        for j in 0..days {
            let p = train.get(i, j);
            summed[i] += joint_score(spec, p.var(), p.es(), returns[j])?;
        }
    }

    let columns: Vec<Vec<ForecastPair>> = (0..days).map(|j| train.column(j)).collect();
    let objective = |lambda: f64| -> f64 {
        let Ok(weights) = relative_score_weights(&RelScoreConfig { temperature: lambda }, &summed)
        else {
            return f64::INFINITY;
        };
        let mut sum = 0.0;
        for (j, col) in columns.iter().enumerate() {
            let pair = match style {
                RelCombineStyle::Mean => relative_score_combine(&weights, col),
                RelCombineStyle::Median => weighted_median_combine(&weights, col),
            };
            let Ok(pair) = pair else { return f64::INFINITY };
            let s = score_or_inf(spec, pair.var(), pair.es(), returns[j]);
            if !s.is_finite() {
                return f64::INFINITY;
            }
            sum += s;
        }
        sum / days as f64
    };

    let mut grid = vec![0.0];
    for i in 0..25 {
        grid.push(10f64.powf(-4.0 + 6.0 * i as f64 / 24.0));
    }
    let mut best_idx = 0;
    let mut best_obj = f64::INFINITY;
    for (i, &l) in grid.iter().enumerate() {
        let obj = objective(l);
        if obj < best_obj {
            best_obj = obj;
            best_idx = i;
        }
    }
    if best_idx == 0 {
        return RelScoreConfig::new(0.0);
    }
    // Golden-section refinement on the log scale between the neighbors.
    let lo = grid[best_idx - 1].max(1e-6);
    let hi = if best_idx + 1 < grid.len() { grid[best_idx + 1] } else { grid[best_idx] };
    let mut f_log = |x: f64| objective(x.exp());
    let (xlog, refined_obj) = golden_section(&mut f_log, lo.ln(), hi.ln(), 1e-6, 100);
    let lambda = if refined_obj < best_obj { xlog.exp() } else { grid[best_idx] };
    RelScoreConfig::new(lambda)
}
