use serde::{Deserialize, Serialize};

use super::design::{Design, DesignMatrix};
use super::newton::{self, expit, softplus, IrlsOptions, LikelihoodProblem, NewtonFailure};
use crate::error::{Error, Result};

/// Binary logistic regression fitted by iteratively reweighted least squares.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub design: Design,
    pub coefficients: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub final_gradient_norm: f64,
    pub log_likelihood: f64,
    /// Log-likelihood after each accepted step, starting value first.
    #[serde(skip)]
    pub log_likelihood_path: Vec<f64>,
}

impl LogisticModel {
    /// Probability of the positive class at covariate row `x`.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        self.design.check_row(x)?;
        Ok(self.predict_unchecked(x))
    }

    pub(crate) fn predict_unchecked(&self, x: &[f64]) -> f64 {
        expit(self.design.linear_predictor(&self.coefficients, x))
    }
}

struct BinaryProblem<'a> {
    x: &'a DesignMatrix,
    y: &'a [bool],
}

impl LikelihoodProblem for BinaryProblem<'_> {
    fn dim(&self) -> usize {
        self.x.n_cols
    }

    fn n_obs(&self) -> usize {
        self.x.n_rows
    }

    fn log_likelihood(&self, beta: &[f64]) -> f64 {
        self.x
            .rows()
            .zip(self.y)
            .map(|(r, &yi)| {
                let eta = crate::linalg::dot(r, beta);
                (if yi { eta } else { 0.0 }) - softplus(eta)
            })
            .sum()
    }

    fn score_and_information(&self, beta: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let k = self.x.n_cols;
        let mut score = vec![0.0; k];
        let mut info = vec![0.0; k * k];
        for (r, &yi) in self.x.rows().zip(self.y) {
            let mu = expit(crate::linalg::dot(r, beta));
            let resid = f64::from(u8::from(yi)) - mu;
            let w = mu * (1.0 - mu);
            for a in 0..k {
                score[a] += r[a] * resid;
                let wa = w * r[a];
                for b in 0..=a {
                    info[a * k + b] += wa * r[b];
                }
            }
        }
        for a in 0..k {
            for b in 0..a {
                info[b * k + a] = info[a * k + b];
            }
        }
        (score, info)
    }

    fn max_abs_linear_predictor(&self, beta: &[f64]) -> f64 {
        self.x
            .rows()
            .map(|r| crate::linalg::dot(r, beta).abs())
            .fold(0.0, f64::max)
    }
}

/// Fits `Pr[y = 1 | x]` with the given design on covariate rows `xs`.
pub fn fit_logistic<'a>(
    design: &Design,
    xs: impl IntoIterator<Item = &'a [f64]>,
    y: &[bool],
    opts: &IrlsOptions,
) -> Result<LogisticModel> {
    let x = design.matrix(xs)?;
    let fit = fit_logistic_matrix(&x, y, opts).map_err(|e| match e {
        Error::SingularDesign { column, .. } => Error::SingularDesign {
            column,
            name: design.column_label(column),
        },
        other => other,
    })?;
    Ok(LogisticModel {
        design: design.clone(),
        ..fit
    })
}

pub(crate) fn fit_logistic_matrix(x: &DesignMatrix, y: &[bool], opts: &IrlsOptions) -> Result<LogisticModel> {
    if y.len() != x.n_rows {
        return Err(Error::DimensionMismatch {
            expected: x.n_rows,
            got: y.len(),
        });
    }
    let successes = y.iter().filter(|&&v| v).count();
    if successes == 0 || successes == y.len() {
        return Err(Error::DegenerateOutcome(format!(
            "binary outcome has a single class ({successes} of {} positive)",
            y.len()
        )));
    }
    let mut init = vec![0.0; x.n_cols];
    // intercept-only MLE as the starting point
    init[0] = newton::logit(successes as f64 / y.len() as f64);
    let problem = BinaryProblem { x, y };
    let fit = newton::maximize(&problem, init, opts).map_err(|f| match f {
        NewtonFailure::Singular(column) => Error::SingularDesign {
            column,
            name: format!("column {column}"),
        },
        NewtonFailure::Separation(msg) => Error::Separation(msg),
    })?;
    Ok(LogisticModel {
        design: Design::intercept_only(0),
        coefficients: fit.theta,
        converged: fit.converged,
        iterations: fit.iterations,
        final_gradient_norm: fit.gradient_norm,
        log_likelihood: fit.log_likelihood,
        log_likelihood_path: fit.path,
    })
}
