//! Damped Gauss-Newton (Levenberg-Marquardt) least squares for small
//! parameter vectors, with a forward-difference Jacobian.

use nalgebra::{DMatrix, DVector};

/// Result of a least-squares run. `converged` is false when the iteration
/// budget ran out before the convergence tests fired; `params` and `rms`
/// then hold the best point visited.
#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub params: Vec<f64>,
    pub rms: f64,
    pub iterations: usize,
    pub converged: bool,
}

const LAMBDA_UP: f64 = 10.0;
const LAMBDA_DOWN: f64 = 0.1;
const COST_TOL: f64 = 1e-14;
const STEP_TOL: f64 = 1e-12;

/// Minimizes the sum of squared residuals of `residuals` starting from
/// `x0`. `residuals` fills a slice of length `n_residuals` for a given
/// parameter vector.
pub fn levenberg_marquardt<F>(
    residuals: &F,
    x0: &[f64],
    n_residuals: usize,
    max_iterations: usize,
) -> FitOutcome
where
    F: Fn(&[f64], &mut [f64]),
{
    let n_par = x0.len();
    let mut x = x0.to_vec();
    let mut r = vec![0.0; n_residuals];
    residuals(&x, &mut r);
    let mut cost = sq_norm(&r);
    let mut lambda = 1e-3;

    let mut best_x = x.clone();
    let mut best_cost = cost;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < max_iterations {
        iterations += 1;

        // forward-difference Jacobian
        let mut jac = DMatrix::zeros(n_residuals, n_par);
        let mut probe = vec![0.0; n_residuals];
        for j in 0..n_par {
            let h = 1e-7 * x[j].abs().max(1e-7);
            let mut xh = x.clone();
            xh[j] += h;
            residuals(&xh, &mut probe);
            for i in 0..n_residuals {
                jac[(i, j)] = (probe[i] - r[i]) / h;
            }
        }
        let jt = jac.transpose();
        let jtj = &jt * &jac;
        let g = &jt * DVector::from_column_slice(&r);

        let mut stepped = false;
        for _ in 0..16 {
            let mut damped = jtj.clone();
            for j in 0..n_par {
                damped[(j, j)] += lambda * jtj[(j, j)].max(1e-30);
            }
            let Some(delta) = damped.lu().solve(&(-&g)) else {
                lambda *= LAMBDA_UP;
                continue;
            };
            let trial: Vec<f64> = x.iter().zip(delta.iter()).map(|(a, d)| a + d).collect();
            residuals(&trial, &mut probe);
            let trial_cost = sq_norm(&probe);
            if trial_cost.is_finite() && trial_cost < cost {
                let rel_drop = (cost - trial_cost) / cost.max(f64::MIN_POSITIVE);
                let step_small = delta
                    .iter()
                    .zip(&x)
                    .all(|(d, a)| d.abs() <= STEP_TOL * (a.abs() + STEP_TOL));
                x = trial;
                r.copy_from_slice(&probe);
                cost = trial_cost;
                lambda = (lambda * LAMBDA_DOWN).max(1e-14);
                stepped = true;
                if cost < best_cost {
                    best_cost = cost;
                    best_x = x.clone();
                }
                if rel_drop < COST_TOL || step_small {
                    converged = true;
                }
                break;
            }
            lambda *= LAMBDA_UP;
        }
        if !stepped {
            // no downhill step found at any damping: stationary point
            converged = true;
        }
        if converged {
            break;
        }
    }

    FitOutcome {
        rms: (best_cost / n_residuals as f64).sqrt(),
        params: best_x,
        iterations,
        converged,
    }
}

fn sq_norm(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn recovers_exponential_parameters() {
        // y = 2.5 exp(-1.3 x), fit (a, k) from 50 samples
        let xs: Vec<f64> = (0..50).map(|i| 0.1 * i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.5 * (-1.3 * x).exp()).collect();
        let res = |p: &[f64], out: &mut [f64]| {
            for (i, (x, y)) in xs.iter().zip(&ys).enumerate() {
                out[i] = p[0] * (p[1] * x).exp() - y;
            }
        };
        let fit = levenberg_marquardt(&res, &[1.0, -1.0], xs.len(), 200);
        assert!(fit.converged);
        assert_abs_diff_eq!(fit.params[0], 2.5, epsilon = 1e-8);
        assert_abs_diff_eq!(fit.params[1], -1.3, epsilon = 1e-8);
        assert!(fit.rms < 1e-10);
    }

    #[test]
    fn reports_budget_exhaustion() {
        let res = |p: &[f64], out: &mut [f64]| {
            for (i, o) in out.iter_mut().enumerate() {
                *o = (p[0] - 3.0) * (i as f64 + 1.0) + (p[0] - 3.0).powi(3);
            }
        };
        let fit = levenberg_marquardt(&res, &[50.0], 5, 1);
        assert!(!fit.converged);
        assert_eq!(fit.iterations, 1);
    }

    #[test]
    fn quadratic_bowl_in_two_parameters() {
        let res = |p: &[f64], out: &mut [f64]| {
            out[0] = p[0] - 1.0;
            out[1] = 10.0 * (p[1] + 2.0);
        };
        let fit = levenberg_marquardt(&res, &[8.0, 9.0], 2, 100);
        assert!(fit.converged);
        assert_abs_diff_eq!(fit.params[0], 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(fit.params[1], -2.0, epsilon = 1e-9);
    }
}
