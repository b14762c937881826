use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Regression design: an intercept followed by one column per term, where a
/// term is the product of the listed covariates (a single index is a main
/// effect, two indices an interaction).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Design {
    pub n_covariates: usize,
    pub terms: Vec<Vec<usize>>,
}

impl Design {
    /// Intercept plus main effects of all `p` covariates.
    pub fn main_effects(p: usize) -> Self {
        Design {
            n_covariates: p,
            terms: (0..p).map(|j| vec![j]).collect(),
        }
    }

    pub fn intercept_only(p: usize) -> Self {
        Design {
            n_covariates: p,
            terms: Vec::new(),
        }
    }

    /// Intercept plus main effects of the listed covariates.
    pub fn from_columns(p: usize, columns: &[usize]) -> Result<Self> {
        Self::from_terms(p, columns.iter().map(|&c| vec![c]).collect())
    }

    pub fn from_terms(p: usize, terms: Vec<Vec<usize>>) -> Result<Self> {
        for t in &terms {
            if t.is_empty() {
                return Err(Error::Config("design term with no covariates".into()));
            }
            if let Some(&c) = t.iter().find(|&&c| c >= p) {
                return Err(Error::Config(format!(
                    "design refers to covariate index {c}, but only {p} covariates exist"
                )));
            }
        }
        Ok(Design { n_covariates: p, terms })
    }

    pub fn with_interaction(mut self, i: usize, j: usize) -> Result<Self> {
        if i >= self.n_covariates || j >= self.n_covariates {
            return Err(Error::Config(format!("interaction ({i}, {j}) out of range")));
        }
        self.terms.push(vec![i, j]);
        Ok(self)
    }

    /// Number of design columns, intercept included.
    pub fn width(&self) -> usize {
        1 + self.terms.len()
    }

    pub fn fill_row(&self, x: &[f64], out: &mut [f64]) {
        out[0] = 1.0;
        for (k, term) in self.terms.iter().enumerate() {
            out[k + 1] = term.iter().map(|&c| x[c]).product();
        }
    }

    pub fn row(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.width()];
        self.fill_row(x, &mut out);
        out
    }

    pub fn check_row(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n_covariates {
            return Err(Error::DimensionMismatch {
                expected: self.n_covariates,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Linear predictor for coefficients `beta` at covariate row `x`.
    pub fn linear_predictor(&self, beta: &[f64], x: &[f64]) -> f64 {
        let mut eta = beta[0];
        for (k, term) in self.terms.iter().enumerate() {
            eta += beta[k + 1] * term.iter().map(|&c| x[c]).product::<f64>();
        }
        eta
    }

    pub fn column_label(&self, column: usize) -> String {
        if column == 0 {
            return "intercept".into();
        }
        self.terms[column - 1]
            .iter()
            .map(|c| format!("x{}", c + 1))
            .collect::<Vec<_>>()
            .join(":")
    }

    /// Materializes the design matrix for the given covariate rows.
    pub fn matrix<'a>(&self, rows: impl IntoIterator<Item = &'a [f64]>) -> Result<DesignMatrix> {
        let k = self.width();
        let mut data = Vec::new();
        let mut n = 0;
        let mut buf = vec![0.0; k];
        for x in rows {
            self.check_row(x)?;
            self.fill_row(x, &mut buf);
            data.extend_from_slice(&buf);
            n += 1;
        }
        Ok(DesignMatrix { n_rows: n, n_cols: k, data })
    }
}

/// Dense row-major design matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub n_rows: usize,
    pub n_cols: usize,
    pub data: Vec<f64>,
}

impl DesignMatrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_cols = rows.first().map_or(0, Vec::len);
        if let Some(r) = rows.iter().find(|r| r.len() != n_cols) {
            return Err(Error::DimensionMismatch {
                expected: n_cols,
                got: r.len(),
            });
        }
        Ok(DesignMatrix {
            n_rows: rows.len(),
            n_cols,
            data: rows.concat(),
        })
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.n_cols.max(1)).take(self.n_rows)
    }

    /// Weighted Gram matrix `X' W X` (row-major, full storage).
    pub(crate) fn gram(&self, weights: Option<&[f64]>) -> Vec<f64> {
        let k = self.n_cols;
        let mut g = vec![0.0; k * k];
        for (i, r) in self.rows().enumerate() {
            let w = weights.map_or(1.0, |w| w[i]);
            for a in 0..k {
                let wa = w * r[a];
                for b in 0..=a {
                    g[a * k + b] += wa * r[b];
                }
            }
        }
        for a in 0..k {
            for b in 0..a {
                g[b * k + a] = g[a * k + b];
            }
        }
        g
    }

    /// `X' v`
    pub(crate) fn t_mul(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_cols];
        for (r, &vi) in self.rows().zip(v) {
            for (o, x) in out.iter_mut().zip(r) {
                *o += x * vi;
            }
        }
        out
    }

    /// `X b`
    pub(crate) fn mul(&self, b: &[f64]) -> Vec<f64> {
        self.rows().map(|r| crate::linalg::dot(r, b)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interaction_terms_multiply() {
        let d = Design::main_effects(2).with_interaction(0, 1).unwrap();
        assert_eq!(d.row(&[2.0, 3.0]), vec![1.0, 2.0, 3.0, 6.0]);
        assert_eq!(d.column_label(3), "x1:x2");
        assert_eq!(d.linear_predictor(&[1.0, 1.0, 1.0, 1.0], &[2.0, 3.0]), 12.0);
    }

    #[test]
    fn rejects_out_of_range_columns() {
        assert!(Design::from_columns(2, &[0, 2]).is_err());
    }
}
