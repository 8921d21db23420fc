//! Central-tendency combiners (simple average, median, KDE mode) and the six
//! trimmed means with in-sample trimming-parameter optimization.
//!
//! Trimming treats the VaR forecasts and ES forecasts as separate sorted
//! samples. The five fixed kinds trim, per component, a count `n` from one or
//! both ends; the flexible kind carries a signed count per component where a
//! positive value trims from the lower end and a negative value from the
//! upper end. A combined pair that crosses is clamped to `es = var` with the
//! event reported, but candidates that ever cross in-sample are excluded
//! during optimization before clamping is considered.

use crate::data::ForecastPair;
use crate::error::{Error, Result};
use crate::optim::golden_section;
use crate::score::{score_or_inf, ScoreSpec};

use super::PoolView;

/// Componentwise mean.
pub fn simple_average(column: &[ForecastPair]) -> Result<ForecastPair> {
    if column.is_empty() {
        return Err(Error::InsufficientData { what: "simple_average".into(), need: 1, got: 0 });
    }
    let m = column.len() as f64;
    let var = column.iter().map(|p| p.var()).sum::<f64>() / m;
    let es = column.iter().map(|p| p.es()).sum::<f64>() / m;
    ForecastPair::new(var, es.min(var))
}

fn median_of_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Componentwise median; even counts use the midpoint of the central order
/// statistics.
pub fn median_combine(column: &[ForecastPair]) -> Result<ForecastPair> {
    if column.is_empty() {
        return Err(Error::InsufficientData { what: "median_combine".into(), need: 1, got: 0 });
    }
    let mut vars: Vec<f64> = column.iter().map(|p| p.var()).collect();
    let mut ess: Vec<f64> = column.iter().map(|p| p.es()).collect();
    vars.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ess.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let var = median_of_sorted(&vars);
    let es = median_of_sorted(&ess);
    ForecastPair::new(var, es.min(var))
}

/// Gaussian-kernel bandwidths for the VaR values and the spacings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KdeSpec {
    pub bandwidth_var: f64,
    pub bandwidth_spacing: f64,
}

impl KdeSpec {
    pub fn new(bandwidth_var: f64, bandwidth_spacing: f64) -> Result<Self> {
        if !(bandwidth_var > 0.0) || !(bandwidth_spacing > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "KDE bandwidths must be positive, got ({bandwidth_var}, {bandwidth_spacing})"
            )));
        }
        Ok(Self { bandwidth_var, bandwidth_spacing })
    }
}

/// Silverman's rule-of-thumb bandwidth.
pub fn silverman_bandwidth(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = (values.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0).max(1.0))
        .sqrt();
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let q = |p: f64| {
        let h = (sorted.len() - 1) as f64 * p;
        let lo = h.floor() as usize;
        let hi = (lo + 1).min(sorted.len() - 1);
        sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
    };
    let iqr = q(0.75) - q(0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    (0.9 * spread * n.powf(-0.2)).max(1e-6)
}

/// Mode of a Gaussian KDE: argmax on a 512-point grid spanning
/// `[min - 3bw, max + 3bw]`, refined by golden section around the best grid
/// point. Exact ties keep the more negative location.
pub fn kde_mode(values: &[f64], bandwidth: f64) -> f64 {
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if min == max {
        return min;
    }
    let density = |x: f64| -> f64 {
        values
            .iter()
            .map(|&v| {
                let u = (x - v) / bandwidth;
                (-0.5 * u * u).exp()
            })
            .sum()
    };
    let lo = min - 3.0 * bandwidth;
    let hi = max + 3.0 * bandwidth;
    let n = 512;
    let step = (hi - lo) / (n - 1) as f64;
    let mut best_i = 0usize;
    let mut best_f = f64::NEG_INFINITY;
    for i in 0..n {
        let f = density(lo + i as f64 * step);
        if f > best_f {
            best_f = f;
            best_i = i;
        }
    }
    let a = lo + best_i.saturating_sub(1) as f64 * step;
    let b = lo + (best_i + 1).min(n - 1) as f64 * step;
    let (x, _) = golden_section(&mut |x| -density(x), a, b, 1e-10, 200);
    x
}

/// Mode combining: KDE mode of the VaRs and of the spacings, the ES following
/// as `var_mode - spacing_mode`.
pub fn mode_combine(column: &[ForecastPair], spec: &KdeSpec) -> Result<ForecastPair> {
    if column.len() < 2 {
        return Err(Error::InsufficientData { what: "mode_combine".into(), need: 2, got: column.len() });
    }
    let vars: Vec<f64> = column.iter().map(|p| p.var()).collect();
    let spacings: Vec<f64> = column.iter().map(|p| p.spacing().value()).collect();
    let var = kde_mode(&vars, spec.bandwidth_var);
    let spacing = kde_mode(&spacings, spec.bandwidth_spacing).max(0.0);
    ForecastPair::new(var, var - spacing)
}

/// The five fixed trimmed-mean kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TrimKind {
    Symmetric,
    Exterior,
    Interior,
    Lower,
    Higher,
}

impl TrimKind {
    pub const ALL: [TrimKind; 5] = [
        TrimKind::Symmetric,
        TrimKind::Exterior,
        TrimKind::Interior,
        TrimKind::Lower,
        TrimKind::Higher,
    ];

    /// Largest legal n for a pool of `m` methods.
    pub fn max_n(self, m: usize) -> usize {
        match self {
            TrimKind::Symmetric => (m.saturating_sub(2)) / 2,
            _ => m - 1,
        }
    }

    /// Per-component (lower, upper) trim counts.
    fn counts(self, n: usize) -> TrimCounts {
        match self {
            TrimKind::Symmetric => TrimCounts { var_lo: n, var_hi: n, es_lo: n, es_hi: n },
            TrimKind::Exterior => TrimCounts { var_lo: 0, var_hi: n, es_lo: n, es_hi: 0 },
            TrimKind::Interior => TrimCounts { var_lo: n, var_hi: 0, es_lo: 0, es_hi: n },
            TrimKind::Lower => TrimCounts { var_lo: n, var_hi: 0, es_lo: n, es_hi: 0 },
            TrimKind::Higher => TrimCounts { var_lo: 0, var_hi: n, es_lo: 0, es_hi: n },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct TrimCounts {
    var_lo: usize,
    var_hi: usize,
    es_lo: usize,
    es_hi: usize,
}

impl TrimCounts {
    fn from_flexible(n_var: i64, n_es: i64) -> Self {
        let split = |n: i64| -> (usize, usize) {
            if n >= 0 {
                (n as usize, 0)
            } else {
                (0, (-n) as usize)
            }
        };
        let (var_lo, var_hi) = split(n_var);
        let (es_lo, es_hi) = split(n_es);
        TrimCounts { var_lo, var_hi, es_lo, es_hi }
    }
}

/// A trimming parameterization: one of the five fixed kinds with count `n`,
/// or the flexible kind with signed per-component counts (positive trims the
/// lower end, negative the upper end).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrimSpec {
    Fixed { kind: TrimKind, n: usize },
    Flexible { n_var: i64, n_es: i64 },
}

impl TrimSpec {
    pub fn validate(&self, m: usize) -> Result<()> {
        let ok = match *self {
            TrimSpec::Fixed { kind, n } => n <= kind.max_n(m),
            TrimSpec::Flexible { n_var, n_es } => {
                n_var.unsigned_abs() as usize <= m - 1 && n_es.unsigned_abs() as usize <= m - 1
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("trim spec {self:?} illegal for M={m}")))
        }
    }

    fn counts(&self) -> TrimCounts {
        match *self {
            TrimSpec::Fixed { kind, n } => kind.counts(n),
            TrimSpec::Flexible { n_var, n_es } => TrimCounts::from_flexible(n_var, n_es),
        }
    }
}

/// Result of a trimmed combine, reporting whether the crossing clamp fired.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrimOutcome {
    pub pair: ForecastPair,
    pub clamped: bool,
}

fn trimmed_mean_sorted(sorted: &[f64], lo: usize, hi: usize) -> Option<f64> {
    let m = sorted.len();
    if lo + hi >= m {
        return None;
    }
    let slice = &sorted[lo..m - hi];
    Some(slice.iter().sum::<f64>() / slice.len() as f64)
}

/// Sort-trim-average combine for any trim spec.
pub fn trimmed_combine(column: &[ForecastPair], spec: &TrimSpec) -> Result<TrimOutcome> {
    let m = column.len();
    if m == 0 {
        return Err(Error::InsufficientData { what: "trimmed_combine".into(), need: 1, got: 0 });
    }
    spec.validate(m)?;
    let c = spec.counts();
    let mut vars: Vec<f64> = column.iter().map(|p| p.var()).collect();
    let mut ess: Vec<f64> = column.iter().map(|p| p.es()).collect();
    vars.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ess.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let var = trimmed_mean_sorted(&vars, c.var_lo, c.var_hi).ok_or_else(|| {
        Error::InvalidParameter(format!("over-trimming: no VaR forecast survives {spec:?}"))
    })?;
    let es = trimmed_mean_sorted(&ess, c.es_lo, c.es_hi).ok_or_else(|| {
        Error::InvalidParameter(format!("over-trimming: no ES forecast survives {spec:?}"))
    })?;
    let clamped = es > var;
    if clamped {
        log::debug!("trimmed combine clamped es {es} to var {var} for {spec:?}");
    }
    Ok(TrimOutcome { pair: ForecastPair::new(var, es.min(var))?, clamped })
}

/// Per-day sorted columns and prefix sums over a training window, making each
/// trim candidate O(1) per day.
pub(crate) struct TrimTrainCache {
    /// Per day: prefix sums of sorted VaRs (len m+1).
    pvar: Vec<Vec<f64>>,
    pes: Vec<Vec<f64>>,
    m: usize,
}

impl TrimTrainCache {
    pub fn new(view: &PoolView) -> Self {
        let m = view.n_methods();
        let mut pvar = Vec::with_capacity(view.n_days());
        let mut pes = Vec::with_capacity(view.n_days());
        for j in 0..view.n_days() {
            let mut vars: Vec<f64> = (0..m).map(|mi| view.get(mi, j).var()).collect();
            let mut ess: Vec<f64> = (0..m).map(|mi| view.get(mi, j).es()).collect();
            vars.sort_by(|a, b| a.partial_cmp(b).unwrap());
            ess.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let prefix = |xs: &[f64]| {
                let mut p = Vec::with_capacity(xs.len() + 1);
                p.push(0.0);
                let mut acc = 0.0;
                for &x in xs {
                    acc += x;
                    p.push(acc);
                }
                p
            };
            pvar.push(prefix(&vars));
            pes.push(prefix(&ess));
        }
        Self { pvar, pes, m }
    }

    /// Combined (var, es) for day `j` under the given counts; `None` on
    /// over-trimming.
    #[inline]
    fn combined(&self, j: usize, c: &TrimCounts) -> Option<(f64, f64)> {
        let m = self.m;
        if c.var_lo + c.var_hi >= m || c.es_lo + c.es_hi >= m {
            return None;
        }
        let pv = &self.pvar[j];
        let pe = &self.pes[j];
        let var = (pv[m - c.var_hi] - pv[c.var_lo]) / (m - c.var_lo - c.var_hi) as f64;
        let es = (pe[m - c.es_hi] - pe[c.es_lo]) / (m - c.es_lo - c.es_hi) as f64;
        Some((var, es))
    }

    /// Mean joint score over the window; `None` when the candidate crosses on
    /// any day (exclusion rule) or over-trims.
    fn score(&self, c: &TrimCounts, returns: &[f64], spec: &ScoreSpec) -> Option<f64> {
        let mut sum = 0.0;
        for (j, &r) in returns.iter().enumerate() {
            let (var, es) = self.combined(j, c)?;
            if es > var {
                return None;
            }
            let s = score_or_inf(spec, var, es, r);
            if !s.is_finite() {
                return None;
            }
            sum += s;
        }
        Some(sum / returns.len() as f64)
    }
}

/// Search space of trim optimization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrimSearch {
    Fixed(TrimKind),
    Flexible,
}

/// Signed counts in the canonical tie-break order 0, +1, -1, +2, -2, ...
fn signed_order(max_abs: usize) -> Vec<i64> {
    let mut out = vec![0i64];
    for a in 1..=max_abs as i64 {
        out.push(a);
        out.push(-a);
    }
    out
}

/// Exhaustive in-sample search for the trimming parameter minimizing the mean
/// joint score of the combined forecasts. Candidates that ever cross
/// in-sample are excluded; ties keep the smaller |n| (flexible: |n_var| major,
/// positive sign first). Falls back to no trimming when everything else is
/// excluded.
pub fn optimize_trim(
    search: TrimSearch,
    train: &PoolView,
    returns: &[f64],
    spec: &ScoreSpec,
) -> Result<TrimSpec> {
    if returns.len() != train.n_days() {
        return Err(Error::LengthMismatch {
            what: "optimize_trim days".into(),
            left: train.n_days(),
            right: returns.len(),
        });
    }
    if returns.len() < 50 {
        return Err(Error::InsufficientData {
            what: "trim optimization span".into(),
            need: 50,
            got: returns.len(),
        });
    }
    let cache = TrimTrainCache::new(train);
    let m = train.n_methods();

    let mut best: Option<(f64, TrimSpec)> = None;
    let mut consider = |candidate: TrimSpec, cache: &TrimTrainCache| {
        let score = cache.score(&candidate.counts(), returns, spec);
        if let Some(s) = score {
            if best.as_ref().map_or(true, |(b, _)| s < *b) {
                best = Some((s, candidate));
            }
        }
    };

    match search {
        TrimSearch::Fixed(kind) => {
            for n in 0..=kind.max_n(m) {
                consider(TrimSpec::Fixed { kind, n }, &cache);
            }
        }
        TrimSearch::Flexible => {
            for &n_var in &signed_order(m - 1) {
                for &n_es in &signed_order(m - 1) {
                    consider(TrimSpec::Flexible { n_var, n_es }, &cache);
                }
            }
        }
    }

    Ok(best.map(|(_, spec)| spec).unwrap_or_else(|| {
        log::warn!("all trim candidates excluded; falling back to no trimming");
        match search {
            TrimSearch::Fixed(kind) => TrimSpec::Fixed { kind, n: 0 },
            TrimSearch::Flexible => TrimSpec::Flexible { n_var: 0, n_es: 0 },
        }
    }))
}

/// Number of candidates the flexible search enumerates, `(2(M-1)+1)^2`.
pub fn flexible_search_size(m: usize) -> usize {
    let per_axis = 2 * (m - 1) + 1;
    per_axis * per_axis
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pair(var: f64, es: f64) -> ForecastPair {
        ForecastPair::new(var, es).unwrap()
    }

    fn random_column(rng: &mut ChaCha8Rng, m: usize) -> Vec<ForecastPair> {
        (0..m)
            .map(|_| {
                let var = -rng.gen_range(0.2..4.0);
                let spacing = rng.gen_range(0.0..2.0);
                pair(var, var - spacing)
            })
            .collect()
    }

    #[test]
    fn simple_average_hand_values() {
        let out = simple_average(&[pair(-1.0, -2.0), pair(-3.0, -4.0)]).unwrap();
        assert_eq!(out, pair(-2.0, -3.0));
        let single = simple_average(&[pair(-1.5, -2.5)]).unwrap();
        assert_eq!(single, pair(-1.5, -2.5));
    }

    #[test]
    fn simple_average_matches_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let column = random_column(&mut rng, 90);
        let out = simple_average(&column).unwrap();
        let mut var = 0.0;
        let mut es = 0.0;
        for p in &column {
            var += p.var();
            es += p.es();
        }
        assert_relative_eq!(out.var(), var / 90.0, epsilon = 1e-12);
        assert_relative_eq!(out.es(), es / 90.0, epsilon = 1e-12);
    }

    #[test]
    fn median_hand_values() {
        let col = [pair(-1.0, -1.5), pair(-2.0, -2.5), pair(-3.0, -3.5)];
        assert_eq!(median_combine(&col).unwrap().var(), -2.0);
        let col4 = [pair(-1.0, -1.5), pair(-2.0, -2.5), pair(-3.0, -3.5), pair(-4.0, -4.5)];
        assert_eq!(median_combine(&col4).unwrap().var(), -2.5);
    }

    #[test]
    fn median_components_never_cross_on_dominated_columns() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..1000 {
            let column = random_column(&mut rng, 9);
            let out = median_combine(&column).unwrap();
            assert!(out.es() <= out.var());
        }
    }

    #[test]
    fn kde_point_mass_returns_value() {
        let col = vec![pair(-2.0, -3.0); 10];
        let spec = KdeSpec::new(0.5, 0.5).unwrap();
        let out = mode_combine(&col, &spec).unwrap();
        assert_eq!(out.var(), -2.0);
        assert_eq!(out.es(), -3.0);
    }

    #[test]
    fn kde_bimodal_lands_on_a_mode() {
        let mut values = vec![-1.0; 45];
        values.extend(vec![-3.0; 45]);
        let mode = kde_mode(&values, 0.1);
        assert!(
            (mode + 1.0).abs() < 0.05 || (mode + 3.0).abs() < 0.05,
            "mode {mode} not at either peak"
        );
    }

    #[test]
    fn kde_mode_recovers_unimodal_center() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut hits = 0;
        let trials = 40;
        for _ in 0..trials {
            let values: Vec<f64> = (0..90)
                .map(|_| {
                    let u1: f64 = rng.gen_range(1e-12..1.0);
                    let u2: f64 = rng.gen_range(0.0..1.0);
                    -2.0 + 0.5 * (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
                })
                .collect();
            let bw = silverman_bandwidth(&values);
            let mode = kde_mode(&values, bw);
            if (mode + 2.0).abs() < 0.5 * bw + 0.25 {
                hits += 1;
            }
        }
        assert!(hits as f64 >= 0.9 * trials as f64, "only {hits}/{trials} near the true mode");
    }

    #[test]
    fn all_kinds_with_zero_trim_equal_simple_average() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let column = random_column(&mut rng, 7);
        let avg = simple_average(&column).unwrap();
        for kind in TrimKind::ALL {
            let out = trimmed_combine(&column, &TrimSpec::Fixed { kind, n: 0 }).unwrap();
            assert_eq!(out.pair.var(), avg.var(), "{kind:?}");
            assert_eq!(out.pair.es(), avg.es(), "{kind:?}");
            assert!(!out.clamped);
        }
        let flex = trimmed_combine(&column, &TrimSpec::Flexible { n_var: 0, n_es: 0 }).unwrap();
        assert_eq!(flex.pair.var(), avg.var());
    }

    #[test]
    fn symmetric_hand_value() {
        let column = [
            pair(-1.0, -2.0),
            pair(-1.2, -2.2),
            pair(-1.4, -2.4),
            pair(-1.6, -2.6),
            pair(-1.8, -2.8),
        ];
        let out = trimmed_combine(&column, &TrimSpec::Fixed { kind: TrimKind::Symmetric, n: 1 })
            .unwrap();
        assert_relative_eq!(out.pair.var(), -1.4, epsilon = 1e-12);
    }

    /// Enumerate-sort oracle over random columns for every kind and legal n.
    #[test]
    fn trims_match_enumerate_sort_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for m in [5usize, 10] {
            for _ in 0..50 {
                let column = random_column(&mut rng, m);
                let mut vars: Vec<f64> = column.iter().map(|p| p.var()).collect();
                let mut ess: Vec<f64> = column.iter().map(|p| p.es()).collect();
                vars.sort_by(|a, b| a.partial_cmp(b).unwrap());
                ess.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
                for kind in TrimKind::ALL {
                    for n in 0..=kind.max_n(m) {
                        let out =
                            trimmed_combine(&column, &TrimSpec::Fixed { kind, n }).unwrap();
                        let (vl, vh, el, eh) = match kind {
                            TrimKind::Symmetric => (n, n, n, n),
                            TrimKind::Exterior => (0, n, n, 0),
                            TrimKind::Interior => (n, 0, 0, n),
                            TrimKind::Lower => (n, 0, n, 0),
                            TrimKind::Higher => (0, n, 0, n),
                        };
                        let var = mean(&vars[vl..m - vh]);
                        let es = mean(&ess[el..m - eh]);
                        assert_eq!(out.pair.var(), var, "{kind:?} n={n}");
                        assert_eq!(out.pair.es(), es.min(var), "{kind:?} n={n}");
                    }
                }
            }
        }
    }

    #[test]
    fn flexible_mimics_one_sided_kinds_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..200 {
            let m = rng.gen_range(4..12);
            let column = random_column(&mut rng, m);
            let n = rng.gen_range(0..m - 1) as i64;
            let cases = [
                (TrimKind::Exterior, (-n, n)),
                (TrimKind::Interior, (n, -n)),
                (TrimKind::Lower, (n, n)),
                (TrimKind::Higher, (-n, -n)),
            ];
            for (kind, (n_var, n_es)) in cases {
                let fixed =
                    trimmed_combine(&column, &TrimSpec::Fixed { kind, n: n as usize }).unwrap();
                let flex =
                    trimmed_combine(&column, &TrimSpec::Flexible { n_var, n_es }).unwrap();
                assert_eq!(fixed.pair, flex.pair, "{kind:?} n={n}");
            }
        }
    }

    #[test]
    fn clamp_fires_only_for_crossing_kinds() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut exterior_clamps = 0;
        for _ in 0..10_000 {
            let column = random_column(&mut rng, 6);
            for kind in [TrimKind::Symmetric, TrimKind::Lower, TrimKind::Higher] {
                for n in 0..=kind.max_n(6) {
                    let out = trimmed_combine(&column, &TrimSpec::Fixed { kind, n }).unwrap();
                    assert!(!out.clamped, "{kind:?} n={n} clamped on a dominated column");
                }
            }
            for n in 0..=TrimKind::Exterior.max_n(6) {
                if trimmed_combine(&column, &TrimSpec::Fixed { kind: TrimKind::Exterior, n })
                    .unwrap()
                    .clamped
                {
                    exterior_clamps += 1;
                }
            }
        }
        // Exterior trimming narrows the interval and is allowed to clamp.
        assert!(exterior_clamps > 0);
    }

    #[test]
    fn over_trimming_is_an_error() {
        let column = vec![pair(-1.0, -2.0); 4];
        assert!(trimmed_combine(&column, &TrimSpec::Flexible { n_var: 4, n_es: 0 }).is_err());
    }

    #[test]
    fn flexible_search_size_for_ninety_methods() {
        // (2(M-1)+1)^2 candidates: 179 signed counts per axis for M = 90.
        assert_eq!(flexible_search_size(90), 179 * 179);
        assert_eq!(signed_order(89).len(), 179);
    }

    #[test]
    fn permutation_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let column = random_column(&mut rng, 8);
        let mut shuffled = column.clone();
        shuffled.swap(0, 5);
        shuffled.swap(2, 7);
        // The mean is order-invariant up to summation rounding; the sorting
        // combiners are bitwise invariant.
        let a = simple_average(&column).unwrap();
        let b = simple_average(&shuffled).unwrap();
        assert_relative_eq!(a.var(), b.var(), epsilon = 1e-12);
        assert_relative_eq!(a.es(), b.es(), epsilon = 1e-12);
        assert_eq!(median_combine(&column).unwrap(), median_combine(&shuffled).unwrap());
        let spec = TrimSpec::Fixed { kind: TrimKind::Exterior, n: 2 };
        assert_eq!(
            trimmed_combine(&column, &spec).unwrap().pair,
            trimmed_combine(&shuffled, &spec).unwrap().pair
        );
    }
}
