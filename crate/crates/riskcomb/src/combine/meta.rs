//! Combiners of combiners: smooth transition between two combining methods,
//! and the simple average of all other combiners' outputs.

use crate::data::ForecastPair;
use crate::error::{Error, Result};
use crate::optim::nelder_mead;
use crate::score::{score_or_inf, ScoreSpec};

/// Logistic transition parameters with the training-window standardization of
/// the transition variable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StcParams {
    pub beta0: f64,
    pub beta1: f64,
    pub z_mean: f64,
    pub z_sd: f64,
}

impl StcParams {
    pub fn new(beta0: f64, beta1: f64, z_mean: f64, z_sd: f64) -> Result<Self> {
        if !(z_sd > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "transition-variable sd must be positive, got {z_sd}"
            )));
        }
        Ok(Self { beta0, beta1, z_mean, z_sd })
    }
}

/// Logistic weight on the first method, evaluated on the standardized
/// transition variable; strictly inside (0, 1) for finite parameters.
pub fn stc_weight(params: &StcParams, z: f64) -> f64 {
    let z_std = (z - params.z_mean) / params.z_sd;
    1.0 / (1.0 + (-(params.beta0 + params.beta1 * z_std)).exp())
}

/// Blend two forecasts: the VaRs directly, the ESs through the blended
/// spacing so the pair cannot cross.
pub fn stc_combine(
    params: &StcParams,
    pair1: ForecastPair,
    pair2: ForecastPair,
    z: f64,
) -> ForecastPair {
    let f = stc_weight(params, z);
    let var = f * pair1.var() + (1.0 - f) * pair2.var();
    let spacing = f * pair1.spacing().value() + (1.0 - f) * pair2.spacing().value();
    ForecastPair::new(var, var - spacing).expect("nonnegative blended spacing")
}

/// Fit the transition parameters by minimizing the in-sample average joint
/// score of the blended path. Two-dimensional simplex search from the starts
/// (0,0) and (+-2, +-2); the transition variable is standardized by its
/// training mean and sd.
pub fn fit_stc(
    path_a: &[ForecastPair],
    path_b: &[ForecastPair],
    transition: &[f64],
    returns: &[f64],
    spec: &ScoreSpec,
) -> Result<StcParams> {
    let t = returns.len();
    if path_a.len() != t || path_b.len() != t || transition.len() != t {
        return Err(Error::LengthMismatch {
            what: "fit_stc aligned spans".into(),
            left: path_a.len().min(path_b.len()).min(transition.len()),
            right: t,
        });
    }
    if t < 100 {
        return Err(Error::InsufficientData { what: "stc training span".into(), need: 100, got: t });
    }
    let z_mean = transition.iter().sum::<f64>() / t as f64;
    let z_var = transition.iter().map(|&z| (z - z_mean) * (z - z_mean)).sum::<f64>() / t as f64;
    let z_sd = z_var.sqrt().max(1e-9);

    let objective = |beta: &[f64]| -> f64 {
        let params = StcParams { beta0: beta[0], beta1: beta[1], z_mean, z_sd };
        let mut sum = 0.0;
        for j in 0..t {
            let pair = stc_combine(&params, path_a[j], path_b[j], transition[j]);
            let s = score_or_inf(spec, pair.var(), pair.es(), returns[j]);
            if !s.is_finite() {
                return f64::INFINITY;
            }
            sum += s;
        }
        sum / t as f64
    };

    let starts: [[f64; 2]; 5] = [[0.0, 0.0], [2.0, 2.0], [2.0, -2.0], [-2.0, 2.0], [-2.0, -2.0]];
    let mut best: Option<(f64, [f64; 2])> = None;
    for start in starts {
        let mut f = |x: &[f64]| objective(x);
        let out = nelder_mead(&mut f, &start, 0.5, 800, 1e-12);
        if out.fx.is_finite() && best.as_ref().map_or(true, |(b, _)| out.fx < *b) {
            best = Some((out.fx, [out.x[0], out.x[1]]));
        }
    }
    let (_, beta) =
        best.ok_or_else(|| Error::OptimizationFailed("stc: no finite start".into()))?;
    StcParams::new(beta[0], beta[1], z_mean, z_sd)
}

/// Componentwise mean of the available combiner outputs, reporting how many
/// were used; failed combiners are excluded, never imputed.
pub fn grand_average(outputs: &[Option<ForecastPair>]) -> Result<(ForecastPair, usize)> {
    let available: Vec<ForecastPair> = outputs.iter().filter_map(|o| *o).collect();
    if available.is_empty() {
        return Err(Error::AllInputsFailed("grand average".into()));
    }
    let excluded = outputs.len() - available.len();
    if excluded > 0 {
        log::warn!("grand average excluding {excluded} failed combiner(s), using {}", available.len());
    }
    let n = available.len() as f64;
    let var = available.iter().map(|p| p.var()).sum::<f64>() / n;
    let es = available.iter().map(|p| p.es()).sum::<f64>() / n;
    Ok((ForecastPair::new(var, es.min(var))?, available.len()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Alpha;
    use approx::assert_relative_eq;

    fn pair(var: f64, es: f64) -> ForecastPair {
        ForecastPair::new(var, es).unwrap()
    }

    fn spec() -> ScoreSpec {
        ScoreSpec::al(Alpha::new(0.025).unwrap())
    }

    #[test]
    fn flat_logistic_is_half() {
        let p = StcParams::new(0.0, 0.0, 0.0, 1.0).unwrap();
        for z in [-5.0, 0.0, 7.0] {
            assert_eq!(stc_weight(&p, z), 0.5);
        }
    }

    #[test]
    fn logistic_limits() {
        let p = StcParams::new(0.0, 3.0, 0.0, 1.0).unwrap();
        assert!(stc_weight(&p, 100.0) > 0.999);
        assert!(stc_weight(&p, -100.0) < 0.001);
        for z in [-3.0, 0.0, 3.0] {
            let w = stc_weight(&p, z);
            assert!(w > 0.0 && w < 1.0);
        }
    }

    #[test]
    fn weight_hand_value() {
        // beta0=1, beta1=2, standardized z = 0.5 -> 1/(1+e^-2) = 0.8808.
        let p = StcParams::new(1.0, 2.0, 0.0, 1.0).unwrap();
        let w = stc_weight(&p, 0.5);
        assert_relative_eq!(w, 1.0 / (1.0 + (-2.0f64).exp()), epsilon = 1e-12);
        assert!((w - 0.8808).abs() < 5e-5);
    }

    #[test]
    fn combine_boundaries_and_midpoint() {
        let a = pair(-1.0, -2.0);
        let b = pair(-3.0, -4.0);
        // Saturated weight on method 1.
        let p1 = StcParams::new(60.0, 0.0, 0.0, 1.0).unwrap();
        let out = stc_combine(&p1, a, b, 0.0);
        assert_relative_eq!(out.var(), a.var(), epsilon = 1e-12);
        assert_relative_eq!(out.es(), a.es(), epsilon = 1e-12);

        let p_half = StcParams::new(0.0, 0.0, 0.0, 1.0).unwrap();
        let mid = stc_combine(&p_half, a, b, 0.0);
        assert_eq!(mid, pair(-2.0, -3.0));
    }

    #[test]
    fn combine_matches_formula_on_random_blends() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(18);
        for _ in 0..100 {
            let a = {
                let v = -rng.gen_range(0.5..3.0);
                pair(v, v - rng.gen_range(0.0..1.0))
            };
            let b = {
                let v = -rng.gen_range(0.5..3.0);
                pair(v, v - rng.gen_range(0.0..1.0))
            };
            let params = StcParams::new(
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(0.5..2.0),
            )
            .unwrap();
            let z = rng.gen_range(-3.0..3.0);
            let out = stc_combine(&params, a, b, z);
            let f = stc_weight(&params, z);
            assert_relative_eq!(out.var(), f * a.var() + (1.0 - f) * b.var(), epsilon = 1e-12);
            let spacing = f * a.spacing().value() + (1.0 - f) * b.spacing().value();
            assert_relative_eq!(out.es(), out.var() - spacing, epsilon = 1e-12);
            assert!(out.es() <= out.var());
        }
    }

    #[test]
    fn identical_inputs_keep_origin_start() {
        let a: Vec<ForecastPair> = (0..120).map(|i| pair(-1.0 - 0.001 * i as f64, -2.0)).collect();
        let z: Vec<f64> = (0..120).map(|i| (i as f64 * 0.1).sin()).collect();
        let returns = vec![0.0; 120];
        let params = fit_stc(&a, &a, &z, &returns, &spec()).unwrap();
        // The objective is flat, so the (0,0) start is retained.
        assert_eq!((params.beta0, params.beta1), (0.0, 0.0));
    }

    #[test]
    fn better_method_gets_most_weight() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(19);
        let returns: Vec<f64> = (0..300)
            .map(|_| {
                let u1: f64 = rng.gen_range(1e-12..1.0);
                let u2: f64 = rng.gen_range(0.0..1.0);
                (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
            })
            .collect();
        // Method A well calibrated, method B far too shallow.
        let a = vec![pair(-1.96, -2.34); 300];
        let b = vec![pair(-0.3, -0.33); 300];
        let z: Vec<f64> = (0..300).map(|i| (i as f64 * 0.05).sin()).collect();
        let params = fit_stc(&a, &b, &z, &returns, &spec()).unwrap();
        let high_weight_days = z
            .iter()
            .filter(|&&zv| stc_weight(&params, zv) > 0.5)
            .count();
        assert!(
            high_weight_days as f64 >= 0.9 * z.len() as f64,
            "only {high_weight_days} of {} days favor the better method",
            z.len()
        );

        // Optimizer sanity: fitted objective no worse than the flat start.
        let objective = |p: &StcParams| -> f64 {
            let mut sum = 0.0;
            for j in 0..300 {
                let out = stc_combine(p, a[j], b[j], z[j]);
                sum += score_or_inf(&spec(), out.var(), out.es(), returns[j]);
            }
            sum / 300.0
        };
        let flat = StcParams::new(0.0, 0.0, params.z_mean, params.z_sd).unwrap();
        assert!(objective(&params) <= objective(&flat) + 1e-12);
    }

    #[test]
    fn fit_invariant_to_affine_rescaling_of_transition() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(20);
        let returns: Vec<f64> = (0..150).map(|_| rng.gen_range(-2.0..1.5)).collect();
        let a: Vec<ForecastPair> = (0..150)
            .map(|_| {
                let v = -rng.gen_range(1.0..2.0);
                pair(v, v - 0.5)
            })
            .collect();
        let b: Vec<ForecastPair> = (0..150)
            .map(|_| {
                let v = -rng.gen_range(0.3..0.9);
                pair(v, v - 0.2)
            })
            .collect();
        let z: Vec<f64> = (0..150).map(|i| (i as f64 * 0.07).cos()).collect();
        let z_scaled: Vec<f64> = z.iter().map(|&v| 37.0 * v - 250.0).collect();

        let p1 = fit_stc(&a, &b, &z, &returns, &spec()).unwrap();
        let p2 = fit_stc(&a, &b, &z_scaled, &returns, &spec()).unwrap();
        for j in 0..150 {
            let w1 = stc_weight(&p1, z[j]);
            let w2 = stc_weight(&p2, z_scaled[j]);
            assert!((w1 - w2).abs() < 1e-6, "day {j}: {w1} vs {w2}");
        }
    }

    #[test]
    fn grand_average_counts_exclusions() {
        let outputs = vec![
            Some(pair(-1.0, -2.0)),
            None,
            Some(pair(-3.0, -4.0)),
        ];
        let (out, used) = grand_average(&outputs).unwrap();
        assert_eq!(used, 2);
        assert_eq!(out, pair(-2.0, -3.0));

        let all_same = vec![Some(pair(-1.5, -2.5)); 18];
        let (out, used) = grand_average(&all_same).unwrap();
        assert_eq!(used, 18);
        assert_eq!(out, pair(-1.5, -2.5));

        assert!(grand_average(&[None, None]).is_err());
    }
}
