//! Check of the observable implication of transportability: within a
//! treatment arm, the conditional outcome mean given covariates should be the
//! same in every trial.
//!
//! Among trial rows with `A = a`, a restricted linear model (intercept plus
//! design covariates) is compared with an expanded model that adds trial
//! indicators and trial-by-covariate interactions, using the nested-model F
//! test. A small p-value is evidence against homogeneity. The report is a
//! diagnostic, not a gate on the estimators.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor};

use crate::data::{ObservationTable, TreatmentLevel, TrialId};
use crate::error::{Error, Result};
use crate::nuisance::{fit_ols_matrix, residual_sum_of_squares, Design, DesignMatrix};

pub const SUPPORT_CAVEAT: &str = "The test compares conditional outcome means over the covariate range of the \
trials; it cannot restrict the comparison to covariate values supported in the target population.";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialDeviation {
    pub trial: TrialId,
    /// Intercept shift followed by slope shifts, relative to the reference trial.
    pub coefficients: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomogeneityReport {
    pub treatment: TreatmentLevel,
    pub trials: Vec<TrialId>,
    pub reference_trial: TrialId,
    pub n_rows: usize,
    pub statistic: f64,
    pub df_numerator: usize,
    pub df_denominator: usize,
    pub p_value: f64,
    pub rss_restricted: f64,
    pub rss_expanded: f64,
    pub deviations: Vec<TrialDeviation>,
    pub note: String,
}

/// F test of equal conditional outcome means across trials within arm `a`.
pub fn test_mean_homogeneity(table: &ObservationTable, a: TreatmentLevel, design: &Design) -> Result<HomogeneityReport> {
    if design.n_covariates != table.n_covariates() {
        return Err(Error::DimensionMismatch {
            expected: table.n_covariates(),
            got: design.n_covariates,
        });
    }
    let rows: Vec<usize> = (0..table.len())
        .filter(|&i| table.participates(i) && table.treatment(i) == Some(a))
        .collect();
    let mut trials: Vec<TrialId> = rows.iter().map(|&i| table.trial(i)).collect();
    trials.sort_unstable();
    trials.dedup();
    if trials.len() < 2 {
        return Err(Error::NotApplicable(format!(
            "treatment level {a} occurs in {} trial(s); the homogeneity test needs at least 2",
            trials.len()
        )));
    }

    let y: Vec<f64> = rows.iter().map(|&i| table.outcome(i).unwrap()).collect();
    let restricted = design.matrix(rows.iter().map(|&i| table.x(i)))?;
    let q = restricted.n_cols;
    let k = trials.len();
    let width = k * q;
    let mut data = Vec::with_capacity(rows.len() * width);
    for (r, &i) in restricted.rows().zip(&rows) {
        data.extend_from_slice(r);
        let s = table.trial(i);
        for &other in &trials[1..] {
            let on = f64::from(u8::from(s == other));
            data.extend(r.iter().map(|v| v * on));
        }
    }
    let expanded = DesignMatrix {
        n_rows: rows.len(),
        n_cols: width,
        data,
    };
    let label = |column: usize| -> String {
        if column < q {
            design.column_label(column)
        } else {
            let t = trials[1 + (column - q) / q];
            format!("trial{t}:{}", design.column_label(column % q))
        }
    };
    if rows.len() <= width {
        return Err(Error::SingularDesign {
            column: rows.len().min(width - 1),
            name: format!("{} rows cannot support {width} expanded-model columns", rows.len()),
        });
    }
    let rename = |e: Error, lab: &dyn Fn(usize) -> String| match e {
        Error::SingularDesign { column, .. } => Error::SingularDesign {
            column,
            name: lab(column),
        },
        other => other,
    };
    let beta_r = fit_ols_matrix(&restricted, &y).map_err(|e| rename(e, &|c| design.column_label(c)))?;
    let beta_e = fit_ols_matrix(&expanded, &y).map_err(|e| rename(e, &label))?;
    let rss_r = residual_sum_of_squares(&restricted, &beta_r, &y);
    let rss_e = residual_sum_of_squares(&expanded, &beta_e, &y).min(rss_r);

    let df1 = width - q;
    let df2 = rows.len() - width;
    let statistic = if rss_e > 0.0 {
        ((rss_r - rss_e) / df1 as f64) / (rss_e / df2 as f64)
    } else {
        f64::INFINITY
    };
    let p_value = if statistic.is_finite() {
        let f = FisherSnedecor::new(df1 as f64, df2 as f64).map_err(|e| Error::Validation(e.to_string()))?;
        f.sf(statistic).clamp(0.0, 1.0)
    } else {
        0.0
    };

    let deviations = trials[1..]
        .iter()
        .enumerate()
        .map(|(j, &t)| TrialDeviation {
            trial: t,
            coefficients: beta_e[(j + 1) * q..(j + 2) * q].to_vec(),
        })
        .collect();

    Ok(HomogeneityReport {
        treatment: a,
        trials: trials.clone(),
        reference_trial: trials[0],
        n_rows: rows.len(),
        statistic,
        df_numerator: df1,
        df_denominator: df2,
        p_value,
        rss_restricted: rss_r,
        rss_expanded: rss_e,
        deviations,
        note: SUPPORT_CAVEAT.to_string(),
    })
}
