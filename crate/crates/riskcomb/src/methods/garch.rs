//! GARCH(1,1) and GJR-GARCH(1,1) forecasters with Gaussian, standardized
//! Student-t, or skew-t innovations, driven by squared returns, squared
//! ranges, or realized variance, and three tail procedures: the fitted
//! distribution itself, peaks-over-threshold on standardized residuals, or
//! filtered historical simulation.
//!
//! The variance recursion is
//!
//! ```text
//! s2_t = omega + a*x_{t-1} + g*I(r_{t-1} < 0)*r_{t-1}^2 + b*s2_{t-1}
//! ```
//!
//! where `x` is the driver series. Under range/RV drivers the asymmetric term
//! keeps the squared return so the leverage effect remains identified.
//! Constraints (`omega > 0`, nonnegative coefficients, persistence below one)
//! are enforced by smooth reparameterization so the simplex search stays
//! unconstrained.

use crate::data::{Alpha, ForecastPair};
use crate::dist::{
    gaussian_var_es, student_t_var_es_standardized, ForecastDistribution, SkewTParams,
};
use crate::error::{Error, Result};
use crate::optim::{multi_start_nelder_mead, nelder_mead};

use super::evt::evt_var_es;
use super::simple::hs_forecast;
use super::{GarchDist, GarchTail};

const LN_2PI: f64 = 1.837_877_066_409_345_3;
const MAX_PERSISTENCE: f64 = 0.9999;

/// Natural-scale GARCH parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GarchParams {
    pub omega: f64,
    pub arch: f64,
    pub leverage: f64,
    pub garch: f64,
    pub nu: Option<f64>,
    pub skew: Option<f64>,
}

/// A fitted model with its in-sample variance path and one-step forecast.
#[derive(Debug, Clone)]
pub struct GarchFit {
    pub params: GarchParams,
    pub log_likelihood: f64,
    pub sigma2_path: Vec<f64>,
    pub sigma2_next: f64,
}

/// Innovation log density at standardized unit variance.
enum InnovationDensity {
    Gaussian,
    StudentT { nu: f64, ln_norm: f64, t_scale: f64 },
    SkewT { nu: f64, skew: f64, consts: crate::dist::skewt::SkewTConsts },
}

impl InnovationDensity {
    fn new(dist: GarchDist, nu: f64, skew: f64) -> Self {
        match dist {
            GarchDist::Gaussian => InnovationDensity::Gaussian,
            GarchDist::StudentT => {
                // Standardized t: f(z) = s * f_T(s z) with s = sqrt(nu/(nu-2)).
                let ln_norm = statrs::function::gamma::ln_gamma(0.5 * (nu + 1.0))
                    - statrs::function::gamma::ln_gamma(0.5 * nu)
                    - 0.5 * (nu * std::f64::consts::PI).ln();
                InnovationDensity::StudentT { nu, ln_norm, t_scale: (nu / (nu - 2.0)).sqrt() }
            }
            GarchDist::SkewT => InnovationDensity::SkewT {
                nu,
                skew,
                consts: crate::dist::skewt::consts(nu, skew),
            },
        }
    }

    #[inline]
    fn ln_pdf(&self, z: f64) -> f64 {
        match self {
            InnovationDensity::Gaussian => -0.5 * z * z - 0.5 * LN_2PI,
            InnovationDensity::StudentT { nu, ln_norm, t_scale } => {
                let w = z * t_scale;
                ln_norm - 0.5 * (nu + 1.0) * (1.0 + w * w / nu).ln() + t_scale.ln()
            }
            InnovationDensity::SkewT { nu, skew, consts } => {
                crate::dist::skewt::ln_pdf_standardized(consts, *nu, *skew, z)
            }
        }
    }
}

/// In-sample variance path plus one-step-ahead variance for given parameters.
pub fn variance_path(
    params: &GarchParams,
    returns: &[f64],
    driver: &[f64],
) -> (Vec<f64>, f64) {
    let t = returns.len();
    let s2_init = returns.iter().map(|&r| r * r).sum::<f64>() / t as f64;
    let mut path = Vec::with_capacity(t);
    let mut s2 = s2_init.max(1e-12);
    path.push(s2);
    let step = |s2_prev: f64, x_prev: f64, r_prev: f64| {
        params.omega
            + params.arch * x_prev
            + params.leverage * if r_prev < 0.0 { r_prev * r_prev } else { 0.0 }
            + params.garch * s2_prev
    };
    for i in 1..t {
        s2 = step(s2, driver[i - 1], returns[i - 1]);
        path.push(s2);
    }
    let next = step(s2, driver[t - 1], returns[t - 1]);
    (path, next)
}

struct Transform {
    leverage: bool,
    dist: GarchDist,
}

impl Transform {
    fn dim(&self) -> usize {
        3 + usize::from(self.leverage)
            + match self.dist {
                GarchDist::Gaussian => 0,
                GarchDist::StudentT => 1,
                GarchDist::SkewT => 2,
            }
    }

    fn to_params(&self, theta: &[f64]) -> GarchParams {
        let sigmoid = |x: f64| 1.0 / (1.0 + (-x).exp());
        let omega = theta[0].exp();
        let p = MAX_PERSISTENCE * sigmoid(theta[1]);
        let s = sigmoid(theta[2]);
        let mut idx = 3;
        let g = if self.leverage {
            idx += 1;
            sigmoid(theta[3])
        } else {
            0.0
        };
        // arch + leverage/2 + garch = p by construction.
        let arch = p * s * (1.0 - g);
        let leverage = 2.0 * p * s * g;
        let garch = p * (1.0 - s);
        let (nu, skew) = match self.dist {
            GarchDist::Gaussian => (None, None),
            GarchDist::StudentT => (Some(2.1 + 300.0 * sigmoid(theta[idx])), None),
            GarchDist::SkewT => (
                Some(2.1 + 300.0 * sigmoid(theta[idx])),
                Some(0.99 * theta[idx + 1].tanh()),
            ),
        };
        GarchParams { omega, arch, leverage, garch, nu, skew }
    }

    fn to_theta(&self, params: &GarchParams) -> Vec<f64> {
        let logit = |x: f64| (x / (1.0 - x)).ln();
        let p = (params.arch + 0.5 * params.leverage + params.garch).min(0.999 * MAX_PERSISTENCE);
        let arch_share = ((params.arch + 0.5 * params.leverage) / p).clamp(1e-6, 1.0 - 1e-6);
        let mut theta = vec![params.omega.max(1e-12).ln(), logit(p / MAX_PERSISTENCE), logit(arch_share)];
        if self.leverage {
            let half = 0.5 * params.leverage;
            let g = (half / (params.arch + half).max(1e-12)).clamp(1e-6, 1.0 - 1e-6);
            theta.push(logit(g));
        }
        match self.dist {
            GarchDist::Gaussian => {}
            GarchDist::StudentT => {
                theta.push(logit(((params.nu.unwrap_or(8.0) - 2.1) / 300.0).clamp(1e-6, 1.0 - 1e-6)));
            }
            GarchDist::SkewT => {
                theta.push(logit(((params.nu.unwrap_or(8.0) - 2.1) / 300.0).clamp(1e-6, 1.0 - 1e-6)));
                theta.push((params.skew.unwrap_or(0.0) / 0.99).clamp(-0.999, 0.999).atanh());
            }
        }
        theta
    }
}

fn negative_log_likelihood(params: &GarchParams, returns: &[f64], driver: &[f64]) -> f64 {
    let density = InnovationDensity::new(
        match (params.nu, params.skew) {
            (None, _) => GarchDist::Gaussian,
            (Some(_), None) => GarchDist::StudentT,
            (Some(_), Some(_)) => GarchDist::SkewT,
        },
        params.nu.unwrap_or(0.0),
        params.skew.unwrap_or(0.0),
    );
    let (path, _) = variance_path(params, returns, driver);
    let mut ll = 0.0;
    for (&r, &s2) in returns.iter().zip(&path) {
        if !(s2 > 0.0) || !s2.is_finite() {
            return f64::INFINITY;
        }
        let sigma = s2.sqrt();
        ll += density.ln_pdf(r / sigma) - sigma.ln();
    }
    if ll.is_finite() {
        -ll
    } else {
        f64::INFINITY
    }
}

fn moment_starts(returns: &[f64], leverage: bool, dist: GarchDist) -> Vec<Vec<f64>> {
    let var = returns.iter().map(|&r| r * r).sum::<f64>() / returns.len() as f64;
    let tf = Transform { leverage, dist };
    let configs: [(f64, f64, f64); 5] = [
        (0.05, 0.90, 8.0),
        (0.10, 0.85, 5.0),
        (0.03, 0.94, 15.0),
        (0.15, 0.75, 8.0),
        (0.08, 0.88, 6.0),
    ];
    configs
        .iter()
        .map(|&(a, b, nu)| {
            let lev = if leverage { a } else { 0.0 };
            let params = GarchParams {
                omega: (var * (1.0 - a - b - 0.5 * lev)).max(1e-8),
                arch: a,
                leverage: lev,
                garch: b,
                nu: matches!(dist, GarchDist::StudentT | GarchDist::SkewT).then_some(nu),
                skew: matches!(dist, GarchDist::SkewT).then_some(0.0),
            };
            tf.to_theta(&params)
        })
        .collect()
}

/// Maximum-likelihood fit of (GJR-)GARCH(1,1) under the given innovation
/// distribution. Five deterministic moment-based starts; the skew-t fit warm
/// starts from the Gaussian solution with nu = 8, skew = 0.
pub fn fit_garch(
    returns: &[f64],
    driver: &[f64],
    leverage: bool,
    dist: GarchDist,
) -> Result<GarchFit> {
    if returns.len() != driver.len() {
        return Err(Error::LengthMismatch {
            what: "garch returns vs driver".into(),
            left: returns.len(),
            right: driver.len(),
        });
    }
    if returns.len() < 250 {
        return Err(Error::InsufficientData {
            what: "garch estimation window".into(),
            need: 250,
            got: returns.len(),
        });
    }

    let tf = Transform { leverage, dist };
    let mut starts = moment_starts(returns, leverage, dist);
    if matches!(dist, GarchDist::SkewT) {
        let gauss = fit_garch(returns, driver, leverage, GarchDist::Gaussian)?;
        let warm = GarchParams { nu: Some(8.0), skew: Some(0.0), ..gauss.params };
        starts.insert(0, tf.to_theta(&warm));
    }

    let mut objective = |theta: &[f64]| negative_log_likelihood(&tf.to_params(theta), returns, driver);
    let budget = 900 * tf.dim();
    let out = multi_start_nelder_mead(&mut objective, &starts, 0.25, budget, 1e-9)
        .map_err(|_| Error::OptimizationFailed("garch MLE: all starts failed".into()))?;
    let params = tf.to_params(&out.x);
    let (sigma2_path, sigma2_next) = variance_path(&params, returns, driver);
    Ok(GarchFit { params, log_likelihood: -out.fx, sigma2_path, sigma2_next })
}

/// One-day-ahead (VaR, ES) from a fitted model under the requested tail
/// procedure, plus the native forecast distribution when one exists.
pub fn garch_tail_forecast(
    fit: &GarchFit,
    returns: &[f64],
    dist: GarchDist,
    tail: GarchTail,
    alpha: Alpha,
) -> Result<(ForecastPair, Option<ForecastDistribution>)> {
    let sigma = fit.sigma2_next.max(1e-12).sqrt();
    match tail {
        GarchTail::Native => match dist {
            GarchDist::Gaussian => Ok((
                gaussian_var_es(0.0, sigma, alpha)?,
                Some(ForecastDistribution::Gaussian { sd: sigma }),
            )),
            GarchDist::StudentT => {
                let nu = fit.params.nu.expect("t fit carries nu");
                let (q, es) = student_t_var_es_standardized(nu, alpha)?;
                Ok((
                    ForecastPair::new(sigma * q, sigma * es)?,
                    Some(ForecastDistribution::StudentT { sd: sigma, nu }),
                ))
            }
            GarchDist::SkewT => {
                let params = SkewTParams::new(
                    sigma,
                    fit.params.nu.expect("skewt fit carries nu"),
                    fit.params.skew.expect("skewt fit carries skew"),
                )?;
                let pair = crate::dist::skewt_var_es(&params, alpha)?;
                Ok((pair, Some(ForecastDistribution::SkewT(params))))
            }
        },
        GarchTail::Evt | GarchTail::Fhs => {
            let residuals: Vec<f64> = returns
                .iter()
                .zip(&fit.sigma2_path)
                .map(|(&r, &s2)| r / s2.max(1e-12).sqrt())
                .collect();
            let pair = match tail {
                GarchTail::Evt => {
                    let (vz, ez) = evt_var_es(&residuals, alpha)?;
                    ForecastPair::new(sigma * vz, sigma * ez)?
                }
                _ => {
                    let hs = hs_forecast(&residuals, alpha)?;
                    ForecastPair::new(sigma * hs.var(), sigma * hs.es())?
                }
            };
            Ok((pair, None))
        }
    }
}

/// Simulate a Gaussian-innovation GARCH path, for tests and examples.
#[doc(hidden)]
pub fn simulate_garch_gaussian(
    omega: f64,
    arch: f64,
    garch: f64,
    n: usize,
    seed: u64,
) -> Vec<f64> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut s2 = omega / (1.0 - arch - garch);
    let mut out = Vec::with_capacity(n);
    let burn = 300;
    let mut r_prev = 0.0;
    for i in 0..n + burn {
        if i > 0 {
            s2 = omega + arch * r_prev * r_prev + garch * s2;
        }
        let u1: f64 = rng.gen_range(1e-12..1.0);
        let u2: f64 = rng.gen_range(0.0..1.0);
        let z = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
        r_prev = s2.sqrt() * z;
        if i >= burn {
            out.push(r_prev);
        }
    }
    out
}

/// Fit only from a fixed start, for diagnostics.
#[doc(hidden)]
pub fn fit_garch_single_start(
    returns: &[f64],
    driver: &[f64],
    leverage: bool,
    dist: GarchDist,
    start: &GarchParams,
    max_evals: usize,
) -> GarchFit {
    let tf = Transform { leverage, dist };
    let mut objective = |theta: &[f64]| negative_log_likelihood(&tf.to_params(theta), returns, driver);
    let out = nelder_mead(&mut objective, &tf.to_theta(start), 0.25, max_evals, 1e-9);
    let params = tf.to_params(&out.x);
    let (sigma2_path, sigma2_next) = variance_path(&params, returns, driver);
    GarchFit { params, log_likelihood: -out.fx, sigma2_path, sigma2_next }
}
