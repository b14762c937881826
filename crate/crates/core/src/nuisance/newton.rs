//! Damped Newton-Raphson (IRLS) driver shared by the logistic fitters.

use serde::{Deserialize, Serialize};

use crate::linalg;

/// Stopping and failure controls for the likelihood maximizers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IrlsOptions {
    /// Bound on the max-norm of the per-observation mean score.
    pub tol: f64,
    pub max_iter: usize,
    /// Euclidean coefficient norm treated as evidence of separation.
    pub max_coef_norm: f64,
}

impl Default for IrlsOptions {
    fn default() -> Self {
        IrlsOptions {
            tol: 1e-8,
            max_iter: 100,
            max_coef_norm: 1e3,
        }
    }
}

/// Newton steps larger than this (max-norm) block a convergence declaration.
const STEP_TOL: f64 = 1e-6;
/// |linear predictor| beyond which a non-converged fit is called separated.
const ETA_SEPARATION: f64 = 30.0;
const MAX_HALVINGS: usize = 50;

pub(crate) trait LikelihoodProblem {
    fn dim(&self) -> usize;
    fn n_obs(&self) -> usize;
    fn log_likelihood(&self, theta: &[f64]) -> f64;
    /// Score vector and observed information (negative Hessian, row-major).
    fn score_and_information(&self, theta: &[f64]) -> (Vec<f64>, Vec<f64>);
    fn max_abs_linear_predictor(&self, theta: &[f64]) -> f64;
}

#[derive(Debug, Clone)]
pub(crate) struct NewtonFit {
    pub theta: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub gradient_norm: f64,
    pub log_likelihood: f64,
    pub path: Vec<f64>,
}

#[derive(Debug, Clone)]
pub(crate) enum NewtonFailure {
    Singular(usize),
    Separation(String),
}

pub(crate) fn maximize<P: LikelihoodProblem>(
    problem: &P,
    init: Vec<f64>,
    opts: &IrlsOptions,
) -> Result<NewtonFit, NewtonFailure> {
    let d = problem.dim();
    let n = problem.n_obs().max(1) as f64;
    let mut theta = init;
    let mut ll = problem.log_likelihood(&theta);
    let mut path = vec![ll];
    let mut iterations = 0;
    let mut converged = false;
    let mut gradient_norm;

    loop {
        let (score, info) = problem.score_and_information(&theta);
        gradient_norm = linalg::max_abs(&score) / n;
        let step = match linalg::solve_spd(&info, d, &score) {
            Ok(s) => s,
            Err(col) => {
                if problem.max_abs_linear_predictor(&theta) > ETA_SEPARATION {
                    return Err(NewtonFailure::Separation(format!(
                        "information matrix degenerate with |linear predictor| > {ETA_SEPARATION}"
                    )));
                }
                return Err(NewtonFailure::Singular(col));
            }
        };
        if gradient_norm <= opts.tol && linalg::max_abs(&step) <= STEP_TOL {
            converged = true;
            break;
        }
        if iterations >= opts.max_iter {
            break;
        }

        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let cand: Vec<f64> = theta.iter().zip(&step).map(|(t, s)| t + scale * s).collect();
            let ll_c = problem.log_likelihood(&cand);
            if ll_c >= ll {
                accepted = Some((cand, ll_c));
                break;
            }
            scale *= 0.5;
        }
        let Some((cand, ll_c)) = accepted else {
            // no ascent direction left at working precision
            converged = gradient_norm <= opts.tol;
            break;
        };
        theta = cand;
        ll = ll_c;
        path.push(ll);
        iterations += 1;

        let norm = linalg::norm2(&theta);
        if norm > opts.max_coef_norm {
            return Err(NewtonFailure::Separation(format!(
                "coefficient norm {norm:.3e} exceeds bound {:.3e}",
                opts.max_coef_norm
            )));
        }
    }

    if !converged && problem.max_abs_linear_predictor(&theta) > ETA_SEPARATION {
        return Err(NewtonFailure::Separation(format!(
            "no convergence after {iterations} iterations with fitted probabilities at the boundary"
        )));
    }

    Ok(NewtonFit {
        theta,
        converged,
        iterations,
        gradient_norm,
        log_likelihood: ll,
        path,
    })
}

/// Numerically stable `ln(1 + e^x)`.
pub(crate) fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub fn expit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}
