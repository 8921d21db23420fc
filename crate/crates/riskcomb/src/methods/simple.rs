//! Nonparametric and simple parametric forecasters: historical simulation,
//! Gaussian window, and EWMA variance with Gaussian tails.

use crate::data::{Alpha, ForecastPair};
use crate::dist::gaussian_var_es;
use crate::error::{Error, Result};

/// Variance floor guarding degenerate (constant) windows.
pub(crate) const VARIANCE_FLOOR: f64 = 1e-12;

/// Linear-interpolation empirical quantile (type 7) of a sorted slice.
pub(crate) fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    debug_assert!(n > 0);
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    if lo + 1 >= n {
        return sorted[n - 1];
    }
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
}

/// Historical simulation: the empirical alpha-quantile as VaR and the mean of
/// returns strictly below it as ES. A window with no return below the
/// quantile degenerates to `es = var` (logged).
pub fn hs_forecast(window: &[f64], alpha: Alpha) -> Result<ForecastPair> {
    let need = (1.0 / alpha.value()).ceil() as usize;
    if window.len() < need {
        return Err(Error::InsufficientData {
            what: "historical simulation window".into(),
            need,
            got: window.len(),
        });
    }
    let mut sorted = window.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let var = quantile_sorted(&sorted, alpha.value());
    let mut sum = 0.0;
    let mut count = 0usize;
    for &r in &sorted {
        if r < var {
            sum += r;
            count += 1;
        } else {
            break;
        }
    }
    let es = if count > 0 {
        sum / count as f64
    } else {
        log::warn!("historical simulation window has no exceedance below the quantile; es = var");
        var
    };
    ForecastPair::new(var, es.min(var))
}

/// Sample standard deviation (n-1 denominator) with a degenerate-window floor.
pub(crate) fn sample_std(window: &[f64]) -> f64 {
    let n = window.len() as f64;
    let mean = window.iter().sum::<f64>() / n;
    let ss: f64 = window.iter().map(|&x| (x - mean) * (x - mean)).sum();
    (ss / (n - 1.0)).max(VARIANCE_FLOOR).sqrt()
}

/// Zero-mean Gaussian with the window's sample standard deviation.
pub fn gaussian_window_forecast(window: &[f64], alpha: Alpha) -> Result<(ForecastPair, f64)> {
    if window.len() < 2 {
        return Err(Error::InsufficientData {
            what: "gaussian window".into(),
            need: 2,
            got: window.len(),
        });
    }
    let sd = sample_std(window);
    Ok((gaussian_var_es(0.0, sd, alpha)?, sd))
}

/// EWMA variance recursion `v_t = 0.94 v_{t-1} + 0.06 r_{t-1}^2`, warm-started
/// at the window's mean square, with Gaussian tails at the one-step-ahead
/// volatility. Returns the pair and the forecast sd.
pub fn ewma_forecast(window: &[f64], alpha: Alpha) -> Result<(ForecastPair, f64)> {
    if window.len() < 2 {
        return Err(Error::InsufficientData { what: "ewma window".into(), need: 2, got: window.len() });
    }
    let mut v = window.iter().map(|&r| r * r).sum::<f64>() / window.len() as f64;
    for &r in window {
        v = 0.94 * v + 0.06 * r * r;
    }
    let sd = v.max(VARIANCE_FLOOR).sqrt();
    Ok((gaussian_var_es(0.0, sd, alpha)?, sd))
}

/// One-step EWMA variance path over a window, for tests and diagnostics.
pub fn ewma_variance_path(window: &[f64]) -> Vec<f64> {
    let mut v = window.iter().map(|&r| r * r).sum::<f64>() / window.len() as f64;
    let mut path = Vec::with_capacity(window.len());
    for &r in window {
        v = 0.94 * v + 0.06 * r * r;
        path.push(v);
    }
    path
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn alpha() -> Alpha {
        Alpha::new(0.025).unwrap()
    }

    #[test]
    fn hs_matches_sort_oracle() {
        let window: Vec<f64> = (0..100).map(|i| -5.0 + 0.1 * i as f64).collect();
        let pair = hs_forecast(&window, alpha()).unwrap();

        // Sort-based oracle computed independently.
        let mut sorted = window.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let h: f64 = 99.0 * 0.025;
        let lo = h.floor() as usize;
        let var_oracle = sorted[lo] + (h - lo as f64) * (sorted[lo + 1] - sorted[lo]);
        let below: Vec<f64> = sorted.iter().copied().filter(|&r| r < var_oracle).collect();
        let es_oracle = below.iter().sum::<f64>() / below.len() as f64;

        assert_relative_eq!(pair.var(), var_oracle, epsilon = 1e-12);
        assert_relative_eq!(pair.es(), es_oracle, epsilon = 1e-12);
    }

    #[test]
    fn hs_constant_window_degenerates() {
        let window = vec![0.5; 80];
        let pair = hs_forecast(&window, alpha()).unwrap();
        assert_eq!(pair.var(), 0.5);
        assert_eq!(pair.es(), 0.5);
    }

    #[test]
    fn hs_median_at_half_alpha() {
        // alpha = 0.45 (valid range is open at 0.5) on a symmetric window:
        // quantile close to the median.
        let window: Vec<f64> = (-50..=50).map(|i| i as f64).collect();
        let pair = hs_forecast(&window, Alpha::new(0.45).unwrap()).unwrap();
        assert_relative_eq!(pair.var(), -5.0, epsilon = 1e-9);
    }

    #[test]
    fn hs_rejects_short_window() {
        assert!(hs_forecast(&[0.0; 10], alpha()).is_err());
    }

    #[test]
    fn ewma_decays_after_single_shock() {
        let mut window = vec![0.0; 40];
        window[20] = 3.0;
        let path = ewma_variance_path(&window);
        // After the shock the variance decays by exactly 0.94 per day.
        for day in 22..27 {
            assert_relative_eq!(path[day] / path[day - 1], 0.94, epsilon = 1e-12);
        }
    }

    #[test]
    fn ewma_zero_series_hits_floor() {
        let (pair, sd) = ewma_forecast(&vec![0.0; 50], alpha()).unwrap();
        assert_relative_eq!(sd, VARIANCE_FLOOR.sqrt(), epsilon = 1e-15);
        assert!(pair.var() > -1e-4 && pair.var() < 0.0);
    }

    #[test]
    fn ewma_composes_with_gaussian_tail() {
        let window: Vec<f64> = (0..100).map(|i| ((i * 37) % 13) as f64 * 0.3 - 1.8).collect();
        let (pair, sd) = ewma_forecast(&window, alpha()).unwrap();
        let direct = gaussian_var_es(0.0, sd, alpha()).unwrap();
        assert_eq!(pair, direct);
    }

    #[test]
    fn gaussian_window_uses_sample_std() {
        let window = vec![-1.0, 1.0, -1.0, 1.0];
        let (pair, sd) = gaussian_window_forecast(&window, alpha()).unwrap();
        // Sample std of {-1,1,-1,1} is sqrt(4/3).
        assert_relative_eq!(sd, (4.0f64 / 3.0).sqrt(), epsilon = 1e-12);
        assert!(pair.es() < pair.var() && pair.var() < 0.0);
    }
}
