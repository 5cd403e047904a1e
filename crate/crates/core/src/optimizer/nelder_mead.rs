//! Nelder–Mead simplex minimization with dimension-adaptive coefficients
//! (Gao & Han), so the outer shape search in 8–16 dimensions does not stall.

use super::OptimizerError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadOptions {
    pub max_iterations: usize,
    /// Stop once every vertex is within this distance of the best vertex.
    pub tolerance: f64,
    /// Minimum initial step per coordinate.
    pub step_floor: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NelderMeadResult {
    pub argmin: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

/// Minimizes `objective` from `start`. NaN and infinite values are treated as
/// `+∞`, so infeasible points simply lose every comparison.
pub fn nelder_mead<F>(
    mut objective: F,
    start: &[f64],
    opts: &NelderMeadOptions,
) -> Result<NelderMeadResult, OptimizerError>
where
    F: FnMut(&[f64]) -> f64,
{
    let dim = start.len();
    if dim == 0 {
        return Err(OptimizerError::InvalidConfig("empty start vector".into()));
    }
    let mut evaluations = 0usize;
    let mut eval = |x: &[f64]| {
        evaluations += 1;
        let v = objective(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let f0 = eval(start);
    if !f0.is_finite() {
        return Err(OptimizerError::ObjectiveNotFinite);
    }

    let d = dim as f64;
    let (alpha, beta, gamma, delta) = (1.0, 1.0 + 2.0 / d, 0.75 - 0.5 / d, 1.0 - 1.0 / d);

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
    simplex.push((start.to_vec(), f0));
    for i in 0..dim {
        let mut x = start.to_vec();
        x[i] += (0.1 * x[i].abs()).max(opts.step_floor);
        let fx = eval(&x);
        simplex.push((x, fx));
    }

    let mut iterations = 0;
    let mut converged = false;
    let mut centroid = vec![0.0; dim];
    let point = |c: &[f64], worst: &[f64], t: f64| -> Vec<f64> {
        c.iter()
            .zip(worst)
            .map(|(ci, wi)| ci + t * (ci - wi))
            .collect()
    };

    while iterations < opts.max_iterations {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = &simplex[0].0;
        let diameter = simplex[1..]
            .iter()
            .map(|(x, _)| {
                x.iter()
                    .zip(best)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max);
        if diameter < opts.tolerance {
            converged = true;
            break;
        }
        iterations += 1;

        centroid.iter_mut().for_each(|c| *c = 0.0);
        for (x, _) in &simplex[..dim] {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi / d;
            }
        }
        let worst = simplex[dim].0.clone();
        let (f_best, f_second_worst, f_worst) = (simplex[0].1, simplex[dim - 1].1, simplex[dim].1);

        let xr = point(&centroid, &worst, alpha);
        let fr = eval(&xr);
        if fr < f_best {
            let xe = point(&centroid, &worst, alpha * beta);
            let fe = eval(&xe);
            simplex[dim] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < f_second_worst {
            simplex[dim] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < f_worst {
            let xc = point(&centroid, &worst, alpha * gamma);
            let fc = eval(&xc);
            (xc, fc)
        } else {
            let xc = point(&centroid, &worst, -gamma);
            let fc = eval(&xc);
            (xc, fc)
        };
        if fc < fr.min(f_worst) {
            simplex[dim] = (xc, fc);
            continue;
        }
        // Shrink toward the best vertex.
        let x0 = simplex[0].0.clone();
        for (x, fx) in simplex.iter_mut().skip(1) {
            for (xi, bi) in x.iter_mut().zip(&x0) {
                *xi = bi + delta * (*xi - bi);
            }
            *fx = eval(x);
        }
    }

    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (argmin, value) = simplex.swap_remove(0);
    Ok(NelderMeadResult {
        argmin,
        value,
        iterations,
        evaluations,
        converged,
    })
}
