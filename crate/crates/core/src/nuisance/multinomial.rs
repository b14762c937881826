use serde::{Deserialize, Serialize};

use super::design::{Design, DesignMatrix};
use super::newton::{self, IrlsOptions, LikelihoodProblem, NewtonFailure};
use crate::error::{Error, Result};
use crate::linalg::dot;

/// Baseline-category multinomial logit. `categories[0]` is the reference and
/// has no coefficients; `coefficients[j]` belongs to `categories[j + 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultinomialLogisticModel {
    pub design: Design,
    pub categories: Vec<u32>,
    pub coefficients: Vec<Vec<f64>>,
    pub converged: bool,
    pub iterations: usize,
    pub final_gradient_norm: f64,
    pub log_likelihood: f64,
    #[serde(skip)]
    pub log_likelihood_path: Vec<f64>,
}

impl MultinomialLogisticModel {
    /// Category probabilities in `categories` order.
    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.design.check_row(x)?;
        Ok(self.predict_unchecked(x))
    }

    pub(crate) fn predict_unchecked(&self, x: &[f64]) -> Vec<f64> {
        let mut eta = Vec::with_capacity(self.categories.len());
        eta.push(0.0);
        eta.extend(self.coefficients.iter().map(|b| self.design.linear_predictor(b, x)));
        softmax(&eta)
    }

    /// Probability of a single category, `None` if the label is unknown.
    pub fn probability_of(&self, x: &[f64], category: u32) -> Option<f64> {
        let j = self.categories.iter().position(|&c| c == category)?;
        Some(self.predict_unchecked(x)[j])
    }
}

fn softmax(eta: &[f64]) -> Vec<f64> {
    let m = eta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut p: Vec<f64> = eta.iter().map(|e| (e - m).exp()).collect();
    let s: f64 = p.iter().sum();
    for v in &mut p {
        *v /= s;
    }
    p
}

fn log_sum_exp(eta: &[f64]) -> f64 {
    let m = eta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + eta.iter().map(|e| (e - m).exp()).sum::<f64>().ln()
}

struct CategoricalProblem<'a> {
    x: &'a DesignMatrix,
    /// index into the category list for each row
    y: &'a [usize],
    n_categories: usize,
}

impl CategoricalProblem<'_> {
    fn etas(&self, r: &[f64], theta: &[f64], out: &mut Vec<f64>) {
        let k = self.x.n_cols;
        out.clear();
        out.push(0.0);
        for j in 1..self.n_categories {
            out.push(dot(r, &theta[(j - 1) * k..j * k]));
        }
    }
}

impl LikelihoodProblem for CategoricalProblem<'_> {
    fn dim(&self) -> usize {
        (self.n_categories - 1) * self.x.n_cols
    }

    fn n_obs(&self) -> usize {
        self.x.n_rows
    }

    fn log_likelihood(&self, theta: &[f64]) -> f64 {
        let mut eta = Vec::with_capacity(self.n_categories);
        self.x
            .rows()
            .zip(self.y)
            .map(|(r, &yi)| {
                self.etas(r, theta, &mut eta);
                eta[yi] - log_sum_exp(&eta)
            })
            .sum()
    }

    fn score_and_information(&self, theta: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let k = self.x.n_cols;
        let m = self.n_categories - 1;
        let d = m * k;
        let mut score = vec![0.0; d];
        let mut info = vec![0.0; d * d];
        let mut eta = Vec::with_capacity(self.n_categories);
        for (r, &yi) in self.x.rows().zip(self.y) {
            self.etas(r, theta, &mut eta);
            let mu = softmax(&eta);
            for j in 0..m {
                let resid = f64::from(u8::from(yi == j + 1)) - mu[j + 1];
                for a in 0..k {
                    score[j * k + a] += r[a] * resid;
                }
                for l in 0..=j {
                    let w = if l == j {
                        mu[j + 1] * (1.0 - mu[j + 1])
                    } else {
                        -mu[j + 1] * mu[l + 1]
                    };
                    for a in 0..k {
                        let wa = w * r[a];
                        for b in 0..k {
                            info[(j * k + a) * d + (l * k + b)] += wa * r[b];
                        }
                    }
                }
            }
        }
        // fill upper block triangle
        for row in 0..d {
            for col in (row + 1)..d {
                if col / k > row / k {
                    info[row * d + col] = info[col * d + row];
                }
            }
        }
        (score, info)
    }

    fn max_abs_linear_predictor(&self, theta: &[f64]) -> f64 {
        let mut eta = Vec::with_capacity(self.n_categories);
        self.x
            .rows()
            .map(|r| {
                self.etas(r, theta, &mut eta);
                eta.iter().fold(0.0_f64, |m, e| m.max(e.abs()))
            })
            .fold(0.0, f64::max)
    }
}

/// Fits category probabilities of `labels` given covariate rows `xs`.
/// Categories are the sorted distinct labels; the smallest is the reference.
pub fn fit_multinomial<'a>(
    design: &Design,
    xs: impl IntoIterator<Item = &'a [f64]>,
    labels: &[u32],
    opts: &IrlsOptions,
) -> Result<MultinomialLogisticModel> {
    let mut categories: Vec<u32> = labels.to_vec();
    categories.sort_unstable();
    categories.dedup();
    fit_multinomial_with_categories(design, xs, labels, &categories, opts)
}

/// As [`fit_multinomial`] with an explicit category list; every listed
/// category must be observed and every label must be listed.
pub fn fit_multinomial_with_categories<'a>(
    design: &Design,
    xs: impl IntoIterator<Item = &'a [f64]>,
    labels: &[u32],
    categories: &[u32],
    opts: &IrlsOptions,
) -> Result<MultinomialLogisticModel> {
    let x = design.matrix(xs)?;
    if labels.len() != x.n_rows {
        return Err(Error::DimensionMismatch {
            expected: x.n_rows,
            got: labels.len(),
        });
    }
    if categories.len() < 2 {
        return Err(Error::DegenerateOutcome(format!(
            "categorical outcome needs at least 2 categories, found {}",
            categories.len()
        )));
    }
    let mut counts = vec![0usize; categories.len()];
    let y = labels
        .iter()
        .map(|l| {
            let j = categories
                .iter()
                .position(|c| c == l)
                .ok_or_else(|| Error::Validation(format!("label {l} is not a listed category")))?;
            counts[j] += 1;
            Ok(j)
        })
        .collect::<Result<Vec<_>>>()?;
    if let Some(j) = counts.iter().position(|&c| c == 0) {
        return Err(Error::DegenerateOutcome(format!(
            "category {} has no observations",
            categories[j]
        )));
    }

    let k = x.n_cols;
    let mut init = vec![0.0; (categories.len() - 1) * k];
    for j in 1..categories.len() {
        init[(j - 1) * k] = (counts[j] as f64 / counts[0] as f64).ln();
    }
    let problem = CategoricalProblem {
        x: &x,
        y: &y,
        n_categories: categories.len(),
    };
    let fit = newton::maximize(&problem, init, opts).map_err(|f| match f {
        NewtonFailure::Singular(column) => {
            let c = column % k;
            Error::SingularDesign {
                column: c,
                name: design.column_label(c),
            }
        }
        NewtonFailure::Separation(msg) => Error::Separation(msg),
    })?;
    Ok(MultinomialLogisticModel {
        design: design.clone(),
        categories: categories.to_vec(),
        coefficients: fit.theta.chunks(k).map(<[f64]>::to_vec).collect(),
        converged: fit.converged,
        iterations: fit.iterations,
        final_gradient_norm: fit.gradient_norm,
        log_likelihood: fit.log_likelihood,
        log_likelihood_path: fit.path,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn saturated_intercepts_reproduce_shares() {
        let labels: Vec<u32> = (0..100).map(|i| if i < 20 { 0 } else if i < 50 { 1 } else { 2 }).collect();
        let xs = vec![Vec::<f64>::new(); 100];
        let m = fit_multinomial(&Design::intercept_only(0), xs.iter().map(Vec::as_slice), &labels, &IrlsOptions::default()).unwrap();
        let p = m.predict(&[]).unwrap();
        for (got, want) in p.iter().zip([0.2, 0.3, 0.5]) {
            assert!((got - want).abs() < 1e-12, "{p:?}");
        }
    }

    #[test]
    fn zero_coefficients_are_uniform() {
        let m = MultinomialLogisticModel {
            design: Design::main_effects(1),
            categories: vec![1, 2, 3],
            coefficients: vec![vec![0.0, 0.0], vec![0.0, 0.0]],
            converged: true,
            iterations: 0,
            final_gradient_norm: 0.0,
            log_likelihood: 0.0,
            log_likelihood_path: vec![],
        };
        let p = m.predict(&[4.2]).unwrap();
        for v in p {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
        assert_eq!(m.probability_of(&[0.0], 9), None);
    }

    #[test]
    fn single_category_rejected() {
        let xs = vec![Vec::<f64>::new(); 5];
        assert!(fit_multinomial(&Design::intercept_only(0), xs.iter().map(Vec::as_slice), &[3; 5], &IrlsOptions::default()).is_err());
    }

    #[test]
    fn missing_listed_category_rejected() {
        let xs = vec![Vec::<f64>::new(); 4];
        let r = fit_multinomial_with_categories(
            &Design::intercept_only(0),
            xs.iter().map(Vec::as_slice),
            &[1, 2, 1, 2],
            &[1, 2, 3],
            &IrlsOptions::default(),
        );
        assert!(matches!(r, Err(Error::DegenerateOutcome(_))));
    }
}
