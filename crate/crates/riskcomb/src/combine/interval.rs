//! Interval-forecast-inspired combiners: probability averaging of inferred
//! CDFs, and deepest-point selection under halfspace or simplicial depth.
//!
//! Probability averaging samples one CDF per method on a fixed grid of 1000
//! equally spaced points on [-20, 20] (percent-return units), averages the
//! curves pointwise, reads the VaR off the mean curve at level alpha, and
//! integrates the discretized tail for the ES. Methods with a native
//! parametric distribution are sampled directly; all others go through the
//! skew-t candidate-grid fit.

use std::sync::LazyLock;

use crate::data::{Alpha, ForecastPair};
use crate::dist::{CandidateGrid, ForecastDistribution};
use crate::error::{Error, Result};

pub const X_GRID_LEN: usize = 1000;
pub const X_GRID_MIN: f64 = -20.0;
pub const X_GRID_MAX: f64 = 20.0;

static X_GRID: LazyLock<Vec<f64>> = LazyLock::new(|| {
    (0..X_GRID_LEN)
        .map(|i| {
            X_GRID_MIN + (X_GRID_MAX - X_GRID_MIN) * (i as f64 / (X_GRID_LEN - 1) as f64)
        })
        .collect()
});

/// The shared x-axis grid.
pub fn x_grid() -> &'static [f64] {
    &X_GRID
}

/// A CDF sampled on the shared grid; nondecreasing values in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct CdfCurve {
    ps: Vec<f64>,
}

impl CdfCurve {
    pub fn new(ps: Vec<f64>) -> Result<Self> {
        if ps.len() != X_GRID_LEN {
            return Err(Error::LengthMismatch {
                what: "cdf curve grid".into(),
                left: ps.len(),
                right: X_GRID_LEN,
            });
        }
        let mut last = 0.0;
        for (i, &p) in ps.iter().enumerate() {
            if !((-1e-12..=1.0 + 1e-12).contains(&p)) || p < last - 1e-12 {
                return Err(Error::InvalidParameter(format!(
                    "cdf curve not monotone in [0,1] at index {i} (p={p})"
                )));
            }
            last = p;
        }
        Ok(Self { ps })
    }

    pub fn from_fn(cdf: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(x_grid().iter().map(|&x| cdf(x)).collect())
    }

    pub fn ps(&self) -> &[f64] {
        &self.ps
    }
}

/// One method's CDF: the native distribution when the forecaster exposes one,
/// otherwise the skew-t inferred from its (VaR, ES) via the candidate grid.
pub fn method_cdf(
    pair: ForecastPair,
    native: Option<&ForecastDistribution>,
    grid: &CandidateGrid,
    _alpha: Alpha,
) -> Result<CdfCurve> {
    match native {
        Some(dist) => CdfCurve::from_fn(|x| dist.cdf(x)),
        None => {
            let fit = grid.fit_skewt_to_var_es(pair);
            CdfCurve::from_fn(|x| crate::dist::skewt_cdf(&fit.params, x))
        }
    }
}

/// How the VaR is read off the mean CDF.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarRule {
    /// Linear interpolation between the bracketing grid points (default).
    Interpolated,
    /// The smallest grid x whose CDF reaches alpha (strict step rule).
    GridStep,
}

/// Pointwise-mean CDF combined into a (VaR, ES) pair.
///
/// ES is the discretized tail integral: CDF increments times cell midpoints,
/// summed over the cells below the VaR and divided by alpha. Under the
/// interpolated rule the boundary cell is included fractionally up to the
/// VaR, carrying the mass `alpha - F(x_K)`; the ES is then a convex
/// combination of midpoints at or below the VaR, so the pair cannot cross.
/// (Whole cells only, as under the strict grid-step rule, bias the tail mean
/// by up to `step * f(VaR) * |VaR| / alpha`, which is an order of magnitude
/// above the grid resolution.)
pub fn probability_average(
    curves: &[CdfCurve],
    alpha: Alpha,
    rule: VarRule,
) -> Result<ForecastPair> {
    if curves.is_empty() {
        return Err(Error::InsufficientData { what: "probability_average".into(), need: 1, got: 0 });
    }
    let m = curves.len() as f64;
    let xs = x_grid();
    let mean: Vec<f64> = (0..X_GRID_LEN)
        .map(|i| curves.iter().map(|c| c.ps[i]).sum::<f64>() / m)
        .collect();

    let a = alpha.value();
    let idx = mean.iter().position(|&p| p >= a).ok_or(Error::GridRangeExceeded { alpha: a })?;
    if idx == 0 {
        // Alpha is already exceeded at the left edge; the VaR lies below the grid.
        return Err(Error::GridRangeExceeded { alpha: a });
    }
    let var = match rule {
        VarRule::GridStep => xs[idx],
        VarRule::Interpolated => {
            let (x0, x1) = (xs[idx - 1], xs[idx]);
            let (p0, p1) = (mean[idx - 1], mean[idx]);
            x0 + (a - p0) * (x1 - x0) / (p1 - p0)
        }
    };

    let mut es_sum = 0.0;
    let mut last_full = 0usize;
    for i in 1..X_GRID_LEN {
        if xs[i] > var {
            break;
        }
        es_sum += (mean[i] - mean[i - 1]) * 0.5 * (xs[i] + xs[i - 1]);
        last_full = i;
    }
    if rule == VarRule::Interpolated {
        // Fractional boundary cell from the last grid point up to the VaR.
        let boundary_mass = a - mean[last_full];
        if boundary_mass > 0.0 {
            es_sum += boundary_mass * 0.5 * (xs[last_full] + var);
        }
    }
    let es = es_sum / a;
    if es > var {
        return Err(Error::Domain(format!(
            "probability-average discretization produced es {es} above var {var}; \
             curves are too concentrated for the x grid"
        )));
    }
    ForecastPair::new(var, es)
}

/// Exact sample halfspace depth of `p` in the cloud: the minimum over all
/// closed halfspaces with boundary through `p` of the fraction of points
/// contained.
///
/// The minimum over directions is attained just past a boundary orthogonal to
/// some point direction, so it suffices to check, for each point vector v,
/// the two normals rot90(v) with the boundary points split by rotation side;
/// all sign tests reduce to cross/dot products.
pub fn halfspace_depth(points: &[(f64, f64)], p: (f64, f64)) -> f64 {
    let n = points.len();
    assert!(n >= 1);
    let vs: Vec<(f64, f64)> = points
        .iter()
        .map(|&(x, y)| (x - p.0, y - p.1))
        .filter(|&(dx, dy)| dx != 0.0 || dy != 0.0)
        .collect();
    let coincident = n - vs.len();
    if vs.is_empty() {
        return 1.0;
    }
    let mut best = n; // closed halfspace containing everything
    for vi in &vs {
        // Normal u = rot90(vi): u.vj = cross(vi, vj); boundary points split by
        // the sign of cross(u, vj) = -dot(vi, vj). The opposite normal flips
        // both signs.
        let mut pos = 0usize;
        let mut neg = 0usize;
        let mut b_speared = 0usize; // boundary, dot < 0 (kept when rotating one way)
        let mut b_aligned = 0usize; // boundary, dot > 0
        for vj in &vs {
            let cross = vi.0 * vj.1 - vi.1 * vj.0;
            if cross > 0.0 {
                pos += 1;
            } else if cross < 0.0 {
                neg += 1;
            } else {
                let dot = vi.0 * vj.0 + vi.1 * vj.1;
                if dot > 0.0 {
                    b_aligned += 1;
                } else {
                    b_speared += 1;
                }
            }
        }
        // Halfspace on the positive side of u, rotated to keep only one
        // boundary group; same for the opposite normal.
        best = best
            .min(coincident + pos + b_aligned.min(b_speared))
            .min(coincident + neg + b_aligned.min(b_speared));
    }
    best as f64 / n as f64
}

/// Exact sample simplicial depth of `p`: the fraction of closed triangles on
/// point triples that contain `p` (triples involving `p` itself count when
/// `p` is a data point). Sign tests are cached pairwise, so the triple loop
/// costs three lookups each.
pub fn simplicial_depth(points: &[(f64, f64)], p: (f64, f64)) -> Result<f64> {
    let n = points.len();
    if n < 3 {
        return Err(Error::InsufficientData { what: "simplicial_depth".into(), need: 3, got: n });
    }
    let vs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x - p.0, y - p.1)).collect();
    // sign(cross(v_i, v_j)) gives the edge test sign for triangle edges
    // through p: cross(x_j - x_i, p - x_i) = cross(v_i, v_j).
    let mut sign = vec![0i8; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let c = vs[i].0 * vs[j].1 - vs[i].1 * vs[j].0;
            let s = if c > 0.0 {
                1
            } else if c < 0.0 {
                -1
            } else {
                0
            };
            sign[i * n + j] = s;
            sign[j * n + i] = -s;
        }
    }
    let mut contained = 0usize;
    for i in 0..n {
        for j in (i + 1)..n {
            let s_ij = sign[i * n + j];
            for k in (j + 1)..n {
                let s_jk = sign[j * n + k];
                let s_ki = sign[k * n + i];
                let any_pos = s_ij > 0 || s_jk > 0 || s_ki > 0;
                let any_neg = s_ij < 0 || s_jk < 0 || s_ki < 0;
                let inside = if !any_pos && !any_neg {
                    // Vertices collinear through p: closed-segment test via
                    // projections on any nonzero vertex direction.
                    let d = [vs[i], vs[j], vs[k]]
                        .into_iter()
                        .find(|v| v.0 != 0.0 || v.1 != 0.0);
                    match d {
                        None => true, // all vertices equal p
                        Some(d) => {
                            let ts =
                                [vs[i], vs[j], vs[k]].map(|v| v.0 * d.0 + v.1 * d.1);
                            let min = ts.iter().cloned().fold(f64::INFINITY, f64::min);
                            let max = ts.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                            min <= 0.0 && 0.0 <= max
                        }
                    }
                } else {
                    !(any_pos && any_neg)
                };
                if inside {
                    contained += 1;
                }
            }
        }
    }
    let total = n * (n - 1) * (n - 2) / 6;
    Ok(contained as f64 / total as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DepthNotion {
    Halfspace,
    Simplicial,
}

/// The deepest data point of the column; ties resolved by distance to the
/// componentwise median, then by lowest method index. The returned pair is
/// always one method's own forecast.
pub fn deepest_combine(
    column: &[ForecastPair],
    notion: DepthNotion,
) -> Result<(usize, ForecastPair)> {
    let m = column.len();
    if m < 3 {
        return Err(Error::InsufficientData { what: "deepest_combine".into(), need: 3, got: m });
    }
    let points: Vec<(f64, f64)> = column.iter().map(|p| (p.var(), p.es())).collect();

    let mut vars: Vec<f64> = points.iter().map(|p| p.0).collect();
    let mut ess: Vec<f64> = points.iter().map(|p| p.1).collect();
    vars.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ess.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mid = |s: &[f64]| {
        if m % 2 == 1 {
            s[m / 2]
        } else {
            0.5 * (s[m / 2 - 1] + s[m / 2])
        }
    };
    let center = (mid(&vars), mid(&ess));

    let mut best: Option<(f64, f64, usize)> = None; // (depth, -dist to center, index)
    for (i, &pt) in points.iter().enumerate() {
        let depth = match notion {
            DepthNotion::Halfspace => halfspace_depth(&points, pt),
            DepthNotion::Simplicial => simplicial_depth(&points, pt)?,
        };
        let dist = ((pt.0 - center.0).powi(2) + (pt.1 - center.1).powi(2)).sqrt();
        let better = match &best {
            None => true,
            Some((bd, bdist, _)) => depth > *bd || (depth == *bd && dist < *bdist),
        };
        if better {
            best = Some((depth, dist, i));
        }
    }
    let (_, _, idx) = best.unwrap();
    Ok((idx, column[idx]))
}

/// Dump per-method curves and their mean as CSV `x,<id...>,mean` for figure
/// reproduction.
pub fn save_curves_csv(
    path: impl AsRef<std::path::Path>,
    ids: &[String],
    curves: &[CdfCurve],
) -> Result<()> {
    let path = path.as_ref();
    let mut writer = csv::Writer::from_path(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: std::io::Error::new(std::io::ErrorKind::Other, e.to_string()),
    })?;
    let mut header = vec!["x".to_string()];
    header.extend(ids.iter().cloned());
    header.push("mean".into());
    writer
        .write_record(&header)
        .map_err(|e| Error::Parse { path: path.display().to_string(), line: 0, msg: e.to_string() })?;
    let m = curves.len() as f64;
    for (i, &x) in x_grid().iter().enumerate() {
        let mut row = vec![format!("{x}")];
        let mut sum = 0.0;
        for c in curves {
            sum += c.ps[i];
            row.push(format!("{}", c.ps[i]));
        }
        row.push(format!("{}", sum / m));
        writer.write_record(&row).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: i + 2,
            msg: e.to_string(),
        })?;
    }
    writer.flush().map_err(|e| Error::Io { path: path.display().to_string(), source: e })?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::{gaussian_var_es, normal_cdf};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn alpha() -> Alpha {
        Alpha::new(0.025).unwrap()
    }

    fn square_plus_center() -> Vec<(f64, f64)> {
        vec![(0.0, 0.0), (0.0, 1.0), (1.0, 1.0), (1.0, 0.0), (0.5, 0.5)]
    }

    #[test]
    fn halfspace_hand_values_on_square() {
        let pts = square_plus_center();
        assert_eq!(halfspace_depth(&pts, (0.5, 0.5)), 3.0 / 5.0);
        assert_eq!(halfspace_depth(&pts, (0.0, 0.0)), 1.0 / 5.0);
    }

    #[test]
    fn halfspace_outside_hull_is_zero() {
        let pts = square_plus_center();
        assert_eq!(halfspace_depth(&pts, (5.0, 5.0)), 0.0);
    }

    #[test]
    fn simplicial_hand_values_on_square() {
        let pts = square_plus_center();
        assert_eq!(simplicial_depth(&pts, (0.5, 0.5)).unwrap(), 1.0);
        assert_eq!(simplicial_depth(&pts, (0.0, 0.0)).unwrap(), 6.0 / 10.0);
    }

    #[test]
    fn simplicial_outside_hull_is_zero() {
        let pts = square_plus_center();
        assert_eq!(simplicial_depth(&pts, (5.0, 5.0)).unwrap(), 0.0);
    }

    /// Independent brute force: enumerate midpoint directions between all
    /// critical angles and count closed halfspaces directly.
    fn halfspace_depth_brute(points: &[(f64, f64)], p: (f64, f64)) -> f64 {
        let n = points.len();
        let vs: Vec<(f64, f64)> = points
            .iter()
            .map(|&(x, y)| (x - p.0, y - p.1))
            .filter(|&(dx, dy)| dx != 0.0 || dy != 0.0)
            .collect();
        let coincident = n - vs.len();
        if vs.is_empty() {
            return 1.0;
        }
        let mut angles: Vec<f64> = Vec::new();
        for v in &vs {
            let a = v.1.atan2(v.0);
            angles.push(a + std::f64::consts::FRAC_PI_2);
            angles.push(a - std::f64::consts::FRAC_PI_2);
        }
        let tau = 2.0 * std::f64::consts::PI;
        for a in &mut angles {
            *a = a.rem_euclid(tau);
        }
        angles.sort_by(|a, b| a.partial_cmp(b).unwrap());
        angles.dedup();
        let mut best = n;
        let k = angles.len();
        for i in 0..k {
            let next = angles[(i + 1) % k] + if i + 1 == k { tau } else { 0.0 };
            let mid = 0.5 * (angles[i] + next);
            let u = (mid.cos(), mid.sin());
            let count = vs.iter().filter(|v| u.0 * v.0 + u.1 * v.1 >= 0.0).count();
            best = best.min(coincident + count);
        }
        best as f64 / n as f64
    }

    #[test]
    fn halfspace_matches_direction_enumeration_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let m = rng.gen_range(4..=30);
            let pts: Vec<(f64, f64)> = (0..m)
                .map(|_| (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)))
                .collect();
            for &p in pts.iter().take(4) {
                let fast = halfspace_depth(&pts, p);
                let brute = halfspace_depth_brute(&pts, p);
                assert_eq!(fast, brute, "pts {pts:?} p {p:?}");
            }
        }
    }

    #[test]
    fn depth_values_are_multiples_of_one_over_m() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..50 {
            let m = rng.gen_range(3..=20);
            let pts: Vec<(f64, f64)> = (0..m)
                .map(|_| (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)))
                .collect();
            let d = halfspace_depth(&pts, pts[0]);
            let scaled = d * m as f64;
            assert!((scaled - scaled.round()).abs() < 1e-12);
            assert!(d <= 0.5 + 1.0 / m as f64 + 1e-12);
        }
    }

    #[test]
    fn deepest_combine_returns_center_of_symmetric_cloud() {
        // Four points mirror-symmetric about the center (-2, -3), all with
        // valid es <= var.
        let column = vec![
            ForecastPair::new(-1.0, -2.5).unwrap(),
            ForecastPair::new(-3.0, -3.5).unwrap(),
            ForecastPair::new(-2.0, -3.0).unwrap(), // center, also a data point
            ForecastPair::new(-1.5, -2.0 - 0.0).unwrap(),
            ForecastPair::new(-2.5, -4.0).unwrap(),
        ];
        for notion in [DepthNotion::Halfspace, DepthNotion::Simplicial] {
            let (idx, pair) = deepest_combine(&column, notion).unwrap();
            assert_eq!(idx, 2, "{notion:?}");
            assert_eq!(pair, column[2]);
        }
    }

    #[test]
    fn deepest_combine_scale_equivariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..30 {
            let column: Vec<ForecastPair> = (0..15)
                .map(|_| {
                    let var = -rng.gen_range(0.5..3.0);
                    ForecastPair::new(var, var - rng.gen_range(0.0..1.5)).unwrap()
                })
                .collect();
            let scaled: Vec<ForecastPair> = column
                .iter()
                .map(|p| ForecastPair::new(2.5 * p.var(), 2.5 * p.es()).unwrap())
                .collect();
            for notion in [DepthNotion::Halfspace, DepthNotion::Simplicial] {
                let (i1, _) = deepest_combine(&column, notion).unwrap();
                let (i2, _) = deepest_combine(&scaled, notion).unwrap();
                assert_eq!(i1, i2, "{notion:?}");
            }
        }
    }

    #[test]
    fn native_gaussian_curve_is_sampled_exactly() {
        // No grid needed for a native handle; use a tiny throwaway fit grid.
        let dist = ForecastDistribution::Gaussian { sd: 1.0 };
        let curve = CdfCurve::from_fn(|x| dist.cdf(x)).unwrap();
        for (i, &x) in x_grid().iter().enumerate().step_by(100) {
            assert_relative_eq!(curve.ps()[i], normal_cdf(x), epsilon = 1e-12);
        }
    }

    #[test]
    fn probability_average_single_gaussian_matches_closed_form() {
        let dist = ForecastDistribution::Gaussian { sd: 1.0 };
        let curve = CdfCurve::from_fn(|x| dist.cdf(x)).unwrap();
        let pair = probability_average(&[curve.clone()], alpha(), VarRule::Interpolated).unwrap();
        let truth = gaussian_var_es(0.0, 1.0, alpha()).unwrap();
        let step = (X_GRID_MAX - X_GRID_MIN) / (X_GRID_LEN - 1) as f64;
        assert!((pair.var() - truth.var()).abs() < step, "var {} vs {}", pair.var(), truth.var());
        assert!((pair.es() - truth.es()).abs() < step, "es {} vs {}", pair.es(), truth.es());

        // Averaging identical curves is idempotent (bitwise when the count is
        // a power of two, so the mean introduces no rounding).
        let many = vec![curve.clone(), curve.clone(), curve.clone(), curve];
        let pair_many = probability_average(&many, alpha(), VarRule::Interpolated).unwrap();
        assert_eq!(pair, pair_many);
    }

    #[test]
    fn probability_average_widens_relative_to_quantile_average() {
        // Two Gaussians with sds 1 and 3: the mixture quantile is more extreme
        // than the average of the two quantiles.
        let d1 = ForecastDistribution::Gaussian { sd: 1.0 };
        let d3 = ForecastDistribution::Gaussian { sd: 3.0 };
        let curves = vec![
            CdfCurve::from_fn(|x| d1.cdf(x)).unwrap(),
            CdfCurve::from_fn(|x| d3.cdf(x)).unwrap(),
        ];
        let combined = probability_average(&curves, alpha(), VarRule::Interpolated).unwrap();

        let q1 = gaussian_var_es(0.0, 1.0, alpha()).unwrap();
        let q3 = gaussian_var_es(0.0, 3.0, alpha()).unwrap();
        let quantile_avg_var = 0.5 * (q1.var() + q3.var());
        assert!(
            combined.var() <= quantile_avg_var,
            "prob-avg var {} vs quantile-avg {}",
            combined.var(),
            quantile_avg_var
        );

        // Direct mixture-CDF root-finding oracle.
        let mixture = |x: f64| 0.5 * (d1.cdf(x) + d3.cdf(x));
        let mut f = |x: f64| mixture(x) - 0.025;
        let root = crate::optim::find_root_monotone(&mut f, -15.0, 0.0, 1e-12, 200).unwrap();
        assert!((combined.var() - root).abs() < 0.05, "var {} vs mixture root {root}", combined.var());
    }

    #[test]
    fn grid_step_rule_returns_grid_point() {
        let d = ForecastDistribution::Gaussian { sd: 1.0 };
        let curve = CdfCurve::from_fn(|x| d.cdf(x)).unwrap();
        let pair = probability_average(&[curve], alpha(), VarRule::GridStep).unwrap();
        let is_grid_point = x_grid().iter().any(|&x| x == pair.var());
        assert!(is_grid_point);
    }

    #[test]
    fn out_of_range_mass_is_an_explicit_error() {
        // A distribution far outside the grid never reaches alpha on it.
        let curve = CdfCurve::from_fn(|x| if x < 19.9 { 0.0 } else { 1e-6 }).unwrap();
        let err = probability_average(&[curve], alpha(), VarRule::Interpolated).unwrap_err();
        assert!(matches!(err, Error::GridRangeExceeded { .. }));
    }
}
