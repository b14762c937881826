use serde::{Deserialize, Serialize};

use super::design::{Design, DesignMatrix};
use crate::error::{Error, Result};
use crate::linalg;

/// Least-squares outcome regression, intercept first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub design: Design,
    pub coefficients: Vec<f64>,
}

impl LinearModel {
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        self.design.check_row(x)?;
        Ok(self.predict_unchecked(x))
    }

    pub(crate) fn predict_unchecked(&self, x: &[f64]) -> f64 {
        self.design.linear_predictor(&self.coefficients, x)
    }
}

/// Fits `y ~ design` by least squares on the covariate rows `xs`.
pub fn fit_ols<'a>(design: &Design, xs: impl IntoIterator<Item = &'a [f64]>, y: &[f64]) -> Result<LinearModel> {
    let x = design.matrix(xs)?;
    let coefficients = fit_ols_matrix(&x, y).map_err(|e| match e {
        Error::SingularDesign { column, .. } => Error::SingularDesign {
            column,
            name: design.column_label(column),
        },
        other => other,
    })?;
    Ok(LinearModel {
        design: design.clone(),
        coefficients,
    })
}

/// Least-squares coefficients for an explicit design matrix.
pub fn fit_ols_matrix(x: &DesignMatrix, y: &[f64]) -> Result<Vec<f64>> {
    if y.len() != x.n_rows {
        return Err(Error::DimensionMismatch {
            expected: x.n_rows,
            got: y.len(),
        });
    }
    if x.n_rows < x.n_cols {
        return Err(Error::SingularDesign {
            column: x.n_rows,
            name: format!("column {} (fewer rows than columns)", x.n_rows),
        });
    }
    let gram = x.gram(None);
    let rhs = x.t_mul(y);
    linalg::solve_spd(&gram, x.n_cols, &rhs).map_err(|column| Error::SingularDesign {
        column,
        name: format!("column {column}"),
    })
}

/// Residual sum of squares of `y` against `x b`.
pub fn residual_sum_of_squares(x: &DesignMatrix, b: &[f64], y: &[f64]) -> f64 {
    x.mul(b).iter().zip(y).map(|(f, yi)| (yi - f).powi(2)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(v: &[f64]) -> Vec<Vec<f64>> {
        v.iter().map(|&x| vec![x]).collect()
    }

    #[test]
    fn exact_interpolation() {
        let xs = rows(&[0.0, 1.0, 2.0]);
        let m = fit_ols(&Design::main_effects(1), xs.iter().map(Vec::as_slice), &[1.0, 2.0, 3.0]).unwrap();
        assert!((m.coefficients[0] - 1.0).abs() < 1e-12);
        assert!((m.coefficients[1] - 1.0).abs() < 1e-12);
        assert!((m.predict(&[2.0]).unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn constant_outcome() {
        let xs = rows(&[0.3, -1.0, 2.5, 4.0]);
        let m = fit_ols(&Design::main_effects(1), xs.iter().map(Vec::as_slice), &[7.0; 4]).unwrap();
        assert!((m.coefficients[0] - 7.0).abs() < 1e-12);
        assert!(m.coefficients[1].abs() < 1e-12);
    }

    #[test]
    fn singular_design_names_column() {
        let xs: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64, 2.0 * i as f64]).collect();
        let y: Vec<f64> = (0..5).map(|i| i as f64).collect();
        match fit_ols(&Design::main_effects(2), xs.iter().map(Vec::as_slice), &y) {
            Err(Error::SingularDesign { column, name }) => {
                assert_eq!(column, 2);
                assert_eq!(name, "x2");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn prediction_length_mismatch() {
        let m = LinearModel {
            design: Design::main_effects(1),
            coefficients: vec![1.0, 1.0],
        };
        assert!(matches!(m.predict(&[1.0, 2.0]), Err(Error::DimensionMismatch { .. })));
        assert_eq!(m.predict(&[2.0]).unwrap(), 3.0);
    }
}
