//! Derivative-free optimization and small numerical routines shared across
//! the crate: Nelder-Mead simplex search with deterministic multi-starts,
//! golden-section line search, monotone root finding, adaptive Simpson
//! quadrature, and a symmetric positive-definite solve.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Result of a simplex search.
#[derive(Debug, Clone)]
pub struct OptimOutcome {
    pub x: Vec<f64>,
    pub fx: f64,
    pub evals: usize,
}

/// Nelder-Mead with the dimension-adaptive coefficients of Gao and Han.
/// Deterministic given the start point. Returns the best vertex found even
/// when the evaluation budget is exhausted; callers treat a non-finite best
/// objective as failure.
pub fn nelder_mead(
    f: &mut dyn FnMut(&[f64]) -> f64,
    x0: &[f64],
    initial_step: f64,
    max_evals: usize,
    ftol: f64,
) -> OptimOutcome {
    let n = x0.len();
    assert!(n >= 1);
    let nf = n as f64;
    let (refl, exp, contr, shrink) = (1.0, 1.0 + 2.0 / nf, 0.75 - 0.5 / nf, 1.0 - 1.0 / nf);

    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| -> f64 {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    // Initial simplex: x0 plus a step along each axis.
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let f0 = eval(x0, &mut evals);
    simplex.push((x0.to_vec(), f0));
    for i in 0..n {
        let mut xi = x0.to_vec();
        let step = if xi[i].abs() > 1.0 { initial_step * xi[i].abs() } else { initial_step };
        xi[i] += step;
        let fi = eval(&xi, &mut evals);
        simplex.push((xi, fi));
    }

    let order = |s: &mut Vec<(Vec<f64>, f64)>| {
        s.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
    };
    order(&mut simplex);

    while evals < max_evals {
        let spread = simplex[n].1 - simplex[0].1;
        if spread.abs() < ftol && simplex[n].1.is_finite() {
            break;
        }

        // Centroid of all but the worst.
        let mut centroid = vec![0.0; n];
        for v in simplex.iter().take(n) {
            for (c, x) in centroid.iter_mut().zip(&v.0) {
                *c += x / nf;
            }
        }

        let lerp = |a: &[f64], b: &[f64], t: f64| -> Vec<f64> {
            a.iter().zip(b).map(|(ai, bi)| ai + t * (bi - ai)).collect()
        };

        let worst = simplex[n].0.clone();
        let x_r = lerp(&centroid, &worst, -refl);
        let f_r = eval(&x_r, &mut evals);

        if f_r < simplex[0].1 {
            let x_e = lerp(&centroid, &worst, -refl * exp);
            let f_e = eval(&x_e, &mut evals);
            simplex[n] = if f_e < f_r { (x_e, f_e) } else { (x_r, f_r) };
        } else if f_r < simplex[n - 1].1 {
            simplex[n] = (x_r, f_r);
        } else {
            let (x_c, f_c) = if f_r < simplex[n].1 {
                let x = lerp(&centroid, &worst, -refl * contr);
                let fx = eval(&x, &mut evals);
                (x, fx)
            } else {
                let x = lerp(&centroid, &worst, contr);
                let fx = eval(&x, &mut evals);
                (x, fx)
            };
            if f_c < simplex[n].1.min(f_r) {
                simplex[n] = (x_c, f_c);
            } else {
                let best = simplex[0].0.clone();
                for v in simplex.iter_mut().skip(1) {
                    v.0 = lerp(&best, &v.0, shrink);
                    v.1 = eval(&v.0, &mut evals);
                }
            }
        }
        order(&mut simplex);
    }

    OptimOutcome { x: simplex[0].0.clone(), fx: simplex[0].1, evals }
}

/// Run Nelder-Mead from each start and keep the best in-objective outcome.
/// Starts are tried in order; ties keep the first-found.
pub fn multi_start_nelder_mead(
    f: &mut dyn FnMut(&[f64]) -> f64,
    starts: &[Vec<f64>],
    initial_step: f64,
    max_evals_per_start: usize,
    ftol: f64,
) -> Result<OptimOutcome> {
    let mut best: Option<OptimOutcome> = None;
    for start in starts {
        let outcome = nelder_mead(f, start, initial_step, max_evals_per_start, ftol);
        if !outcome.fx.is_finite() {
            continue;
        }
        let improved = match &best {
            None => true,
            Some(b) => outcome.fx < b.fx,
        };
        if improved {
            best = Some(outcome);
        }
    }
    best.ok_or_else(|| {
        Error::OptimizationFailed("no start produced a finite objective".into())
    })
}

/// Deterministic multi-start table: the base point, then `extra` seeded
/// Gaussian perturbations of it.
pub fn perturbed_starts(base: &[f64], extra: usize, scale: f64, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut starts = vec![base.to_vec()];
    for _ in 0..extra {
        let x: Vec<f64> = base
            .iter()
            .map(|&b| {
                // Box-Muller from two uniform draws keeps rand_distr out of the hot path.
                let u1: f64 = rng.gen_range(1e-12..1.0);
                let u2: f64 = rng.gen_range(0.0..1.0);
                let z = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
                b + scale * z
            })
            .collect();
        starts.push(x);
    }
    starts
}

/// Golden-section minimization of a unimodal function on [a, b].
pub fn golden_section(
    f: &mut dyn FnMut(f64) -> f64,
    mut a: f64,
    mut b: f64,
    xtol: f64,
    max_iters: usize,
) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..max_iters {
        if (b - a).abs() < xtol {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    let fx = f(x);
    if fx <= fc && fx <= fd {
        (x, fx)
    } else if fc <= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Root of a monotone nondecreasing function on [lo, hi] via bisection with
/// secant acceleration. Requires f(lo) <= 0 <= f(hi).
pub fn find_root_monotone(
    f: &mut dyn FnMut(f64) -> f64,
    mut lo: f64,
    mut hi: f64,
    xtol: f64,
    max_iters: usize,
) -> Result<f64> {
    let mut flo = f(lo);
    let mut fhi = f(hi);
    if flo > 0.0 || fhi < 0.0 {
        return Err(Error::NonConvergence(format!(
            "root not bracketed: f({lo})={flo}, f({hi})={fhi}"
        )));
    }
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    for _ in 0..max_iters {
        if (hi - lo).abs() < xtol {
            return Ok(0.5 * (lo + hi));
        }
        // Secant candidate, fall back to midpoint when it degenerates.
        let mut mid = if (fhi - flo).abs() > 1e-300 {
            lo - flo * (hi - lo) / (fhi - flo)
        } else {
            0.5 * (lo + hi)
        };
        let margin = 0.01 * (hi - lo);
        if !(mid > lo + margin && mid < hi - margin) {
            mid = 0.5 * (lo + hi);
        }
        let fmid = f(mid);
        if fmid == 0.0 {
            return Ok(mid);
        }
        if fmid < 0.0 {
            lo = mid;
            flo = fmid;
        } else {
            hi = mid;
            fhi = fmid;
        }
    }
    Err(Error::NonConvergence(format!(
        "root finder exceeded {max_iters} iterations (bracket [{lo}, {hi}])"
    )))
}

/// Adaptive Simpson quadrature of f on [a, b] with absolute tolerance `tol`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: usize,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
                + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
    }
    if a == b {
        return 0.0;
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = simpson(fa, fm, fb, a, b);
    recurse(f, a, b, fa, fm, fb, whole, tol, 48)
}

/// Solve A x = b for symmetric positive-definite A (row-major n x n) via
/// Cholesky. Fails on non-PD input.
pub fn solve_spd(a: &[f64], b: &[f64], n: usize, context: &str) -> Result<Vec<f64>> {
    assert_eq!(a.len(), n * n);
    assert_eq!(b.len(), n);
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[i * n + j];
            for k in 0..j {
                sum -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if sum <= 1e-12 {
                    return Err(Error::SingularRegression(context.to_string()));
                }
                l[i * n + i] = sum.sqrt();
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }
    // Forward then backward substitution.
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut sum = b[i];
        for k in 0..i {
            sum -= l[i * n + k] * y[k];
        }
        y[i] = sum / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut sum = y[i];
        for k in (i + 1)..n {
            sum -= l[k * n + i] * x[k];
        }
        x[i] = sum / l[i * n + i];
    }
    Ok(x)
}

/// Numerically stable softmax; the output sums to one up to rounding and is
/// renormalized exactly.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|&v| (v - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    for v in &mut out {
        *v /= sum;
    }
    out
}
