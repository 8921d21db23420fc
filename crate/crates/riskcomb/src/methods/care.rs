//! Conditional autoregressive expectile (CARE) forecasters.
//!
//! An expectile recursion (same SAV/AS/IG forms as the quantile recursions)
//! is fit by asymmetric least squares at expectile level tau. The VaR is the
//! expectile whose in-sample exceedance proportion equals alpha, located by
//! bisection on tau, and the ES follows from the expectile identity
//! `ES = e*(1 + tau/((1-2tau)alpha)) - tau*mean(r)/((1-2tau)alpha)`.

use crate::data::{Alpha, ForecastPair};
use crate::error::{Error, Result};
use crate::optim::{multi_start_nelder_mead, perturbed_starts};

use super::caviar::{quantile_path, RecursionData};
use super::simple::quantile_sorted;
use super::CaviarForm;

fn natural_params(form: CaviarForm, theta: &[f64]) -> Vec<f64> {
    match form {
        CaviarForm::Sav | CaviarForm::As => theta.to_vec(),
        CaviarForm::Ig => vec![theta[0].exp(), theta[1].exp(), 1.0 / (1.0 + (-theta[2]).exp())],
    }
}

fn dim(form: CaviarForm) -> usize {
    match form {
        CaviarForm::Sav => 3,
        CaviarForm::As => 4,
        CaviarForm::Ig => 3,
    }
}

/// One asymmetric-least-squares fit at a fixed tau.
#[derive(Debug, Clone)]
pub struct CareFitAtTau {
    pub theta: Vec<f64>,
    pub expectile_path: Vec<f64>,
    pub expectile_next: f64,
    pub exceed_proportion: f64,
    pub objective: f64,
}

/// Fit the expectile recursion at level tau by asymmetric least squares.
pub fn fit_care_at_tau(
    data: &RecursionData,
    form: CaviarForm,
    tau: f64,
    e0: f64,
    warm: Option<&[f64]>,
) -> Result<CareFitAtTau> {
    let t = data.returns.len();
    let objective = |theta: &[f64]| -> f64 {
        let beta = natural_params(form, theta);
        let Some((path, _)) = quantile_path(form, &beta, data, e0) else {
            return f64::INFINITY;
        };
        let mut sum = 0.0;
        for (&r, &e) in data.returns.iter().zip(&path) {
            let w = if r <= e { 1.0 - tau } else { tau };
            sum += w * (r - e) * (r - e);
        }
        sum / t as f64
    };

    let base = match form {
        CaviarForm::Sav => vec![0.05 * e0, -0.1, 0.85],
        CaviarForm::As => vec![0.05 * e0, -0.03, -0.15, 0.85],
        CaviarForm::Ig => vec![(0.1 * e0 * e0).max(1e-8).ln(), (0.1f64).ln(), 2.0],
    };
    let mut starts = perturbed_starts(&base, 4, 0.3, 0xCA_8E);
    if let Some(w) = warm {
        starts.insert(0, w.to_vec());
    }

    let mut f = |theta: &[f64]| objective(theta);
    let out = multi_start_nelder_mead(&mut f, &starts, 0.25, 350 * dim(form), 1e-12)
        .map_err(|_| Error::OptimizationFailed(format!("CARE {form:?} at tau={tau}")))?;

    let beta = natural_params(form, &out.x);
    let (path, next) = quantile_path(form, &beta, data, e0)
        .ok_or_else(|| Error::OptimizationFailed("CARE optimum explodes".into()))?;
    let exceed = path.iter().zip(data.returns).filter(|(e, r)| *r < *e).count() as f64 / t as f64;
    Ok(CareFitAtTau {
        theta: out.x,
        expectile_path: path,
        expectile_next: next,
        exceed_proportion: exceed,
        objective: out.fx,
    })
}

/// Fitted CARE model at the matched tau.
#[derive(Debug, Clone)]
pub struct CareFit {
    pub tau: f64,
    pub pair: ForecastPair,
    pub exceed_proportion: f64,
}

/// Fit a CARE model: bisection on tau until the in-sample exceedance
/// proportion of the fitted expectile path matches alpha, then the expectile
/// identity for the ES.
pub fn care_fit_forecast(
    data: &RecursionData,
    form: CaviarForm,
    alpha: Alpha,
) -> Result<CareFit> {
    let t = data.returns.len();
    if t < 250 {
        return Err(Error::InsufficientData {
            what: "CARE estimation window".into(),
            need: 250,
            got: t,
        });
    }
    let a = alpha.value();
    let mut sorted = data.returns.to_vec();
    sorted.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let e0 = quantile_sorted(&sorted, a);

    let (mut lo, mut hi) = (1e-6, 0.45);
    let fit_lo = fit_care_at_tau(data, form, lo, e0, None)?;
    let fit_hi = fit_care_at_tau(data, form, hi, e0, Some(&fit_lo.theta))?;
    if fit_lo.exceed_proportion > a || fit_hi.exceed_proportion < a {
        return Err(Error::NonConvergence(format!(
            "CARE tau bisection cannot bracket alpha={a}: proportions [{}, {}]",
            fit_lo.exceed_proportion, fit_hi.exceed_proportion
        )));
    }

    let tol_prop = 0.5 / t as f64;
    let mut best = fit_lo.clone();
    let mut best_tau = lo;
    let mut warm = fit_lo.theta.clone();
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        let fit = fit_care_at_tau(data, form, mid, e0, Some(&warm))?;
        warm = fit.theta.clone();
        if (fit.exceed_proportion - a).abs() < (best.exceed_proportion - a).abs() {
            best = fit.clone();
            best_tau = mid;
        }
        if (fit.exceed_proportion - a).abs() <= tol_prop || (hi - lo) < 1e-7 {
            break;
        }
        if fit.exceed_proportion < a {
            lo = mid;
        } else {
            hi = mid;
        }
    }

    let tau = best_tau;
    let mean_r = data.returns.iter().sum::<f64>() / t as f64;
    let load = tau / ((1.0 - 2.0 * tau) * a);
    let var = best.expectile_next;
    let es = (1.0 + load) * var - load * mean_r;
    let pair = ForecastPair::new(var, es.min(var))?;
    Ok(CareFit { tau, pair, exceed_proportion: best.exceed_proportion })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::methods::garch::simulate_garch_gaussian;

    fn alpha() -> Alpha {
        Alpha::new(0.025).unwrap()
    }

    #[test]
    fn exceedance_proportion_increases_with_tau() {
        let returns = simulate_garch_gaussian(0.05, 0.1, 0.85, 700, 43);
        let mags: Vec<f64> = returns.iter().map(|r| r.abs()).collect();
        let data = RecursionData::new(&returns, &mags, true);
        let e0 = -1.5;
        let mut last = -1.0;
        for tau in [0.001, 0.01, 0.05, 0.15] {
            let fit = fit_care_at_tau(&data, CaviarForm::Sav, tau, e0, None).unwrap();
            assert!(
                fit.exceed_proportion >= last - 0.01,
                "tau {tau}: {} after {last}",
                fit.exceed_proportion
            );
            last = fit.exceed_proportion;
        }
    }

    #[test]
    fn tau_half_expectile_tracks_mean() {
        // At tau = 0.5 asymmetric least squares is plain least squares, so the
        // fitted path sits near the (zero) conditional mean.
        let returns = simulate_garch_gaussian(0.05, 0.1, 0.85, 700, 47);
        let mags: Vec<f64> = returns.iter().map(|r| r.abs()).collect();
        let data = RecursionData::new(&returns, &mags, true);
        let fit = fit_care_at_tau(&data, CaviarForm::Sav, 0.5, 0.0, None).unwrap();
        let mean_e = fit.expectile_path.iter().sum::<f64>() / fit.expectile_path.len() as f64;
        let sd_r = (returns.iter().map(|r| r * r).sum::<f64>() / returns.len() as f64).sqrt();
        assert!(mean_e.abs() < 0.2 * sd_r, "mean expectile {mean_e}, sd {sd_r}");
    }

    #[test]
    fn care_matches_alpha_exceedance_and_orders_pair() {
        let returns = simulate_garch_gaussian(0.05, 0.1, 0.85, 1000, 53);
        let mags: Vec<f64> = returns.iter().map(|r| r.abs()).collect();
        let data = RecursionData::new(&returns, &mags, true);
        let fit = care_fit_forecast(&data, CaviarForm::Sav, alpha()).unwrap();
        assert!((fit.exceed_proportion - 0.025).abs() < 0.01, "prop {}", fit.exceed_proportion);
        assert!(fit.pair.es() <= fit.pair.var());
        assert!(fit.pair.var() < 0.0);
        assert!(fit.tau < 0.025, "tau {} should sit below alpha", fit.tau);
    }

    #[test]
    fn care_sav_var_close_to_true_var_rms() {
        let (omega, arch, garch) = (0.05, 0.10, 0.85);
        let returns = simulate_garch_gaussian(omega, arch, garch, 1500, 59);
        let mags: Vec<f64> = returns.iter().map(|r| r.abs()).collect();
        let data = RecursionData::new(&returns, &mags, true);
        let fit = care_fit_forecast(&data, CaviarForm::Sav, alpha()).unwrap();

        // True one-step conditional VaR from the DGP.
        let mut s2 = omega / (1.0 - arch - garch);
        for i in 1..returns.len() {
            s2 = omega + arch * returns[i - 1] * returns[i - 1] + garch * s2;
        }
        let s2_next = omega + arch * returns.last().unwrap().powi(2) + garch * s2;
        let true_var = s2_next.sqrt() * crate::dist::normal_quantile(0.025);
        let rel = (fit.pair.var() - true_var).abs() / true_var.abs();
        assert!(rel < 0.25, "relative error {rel}");
    }
}
