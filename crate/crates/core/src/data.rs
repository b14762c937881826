//! Observation schema for pooled trial and target-sample data.
//!
//! Every row carries a trial identifier: `0` marks a member of the target
//! population sample, `1..=m` one of the randomized trials. Trial rows must
//! carry a treatment code and an outcome; target rows only need covariates.
//! Any treatment or outcome values present on target rows are kept but never
//! read by the transport estimators.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Treatment code from the finite treatment set shared by all trials.
pub type TreatmentLevel = u32;

/// Trial identifier; `0` is the target population sample.
pub type TrialId = u32;

pub const TARGET_TRIAL: TrialId = 0;

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub trial: TrialId,
    pub treatment: Option<TreatmentLevel>,
    pub outcome: Option<f64>,
    pub covariates: Vec<f64>,
}

impl Observation {
    pub fn trial_row(trial: TrialId, treatment: TreatmentLevel, outcome: f64, covariates: Vec<f64>) -> Self {
        Observation {
            trial,
            treatment: Some(treatment),
            outcome: Some(outcome),
            covariates,
        }
    }

    pub fn target_row(covariates: Vec<f64>) -> Self {
        Observation {
            trial: TARGET_TRIAL,
            treatment: None,
            outcome: None,
            covariates,
        }
    }

    /// Participation indicator R.
    pub fn participates(&self) -> bool {
        self.trial != TARGET_TRIAL
    }
}

/// Borrowed view of one row of an [`ObservationTable`].
#[derive(Debug, Clone, Copy)]
pub struct Row<'a> {
    pub index: usize,
    pub trial: TrialId,
    pub treatment: Option<TreatmentLevel>,
    pub outcome: Option<f64>,
    pub covariates: &'a [f64],
}

impl Row<'_> {
    pub fn participates(&self) -> bool {
        self.trial != TARGET_TRIAL
    }

    /// True for a trial row assigned to `level`.
    pub fn is_trial_arm(&self, level: TreatmentLevel) -> bool {
        self.participates() && self.treatment == Some(level)
    }
}

/// Validated, immutable pooled dataset (column-major storage, row-major covariates).
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationTable {
    trial: Vec<TrialId>,
    treatment: Vec<Option<TreatmentLevel>>,
    outcome: Vec<Option<f64>>,
    covariates: Vec<f64>,
    n_covariates: usize,
    covariate_names: Vec<String>,
    treatment_levels: Vec<TreatmentLevel>,
    trial_ids: Vec<TrialId>,
    n_target: usize,
}

impl ObservationTable {
    /// Builds a table with default covariate names `x1..xp`.
    pub fn from_rows(rows: Vec<Observation>) -> Result<Self> {
        let p = rows.first().map_or(0, |r| r.covariates.len());
        let names = (1..=p).map(|j| format!("x{j}")).collect();
        Self::with_names(rows, names)
    }

    pub fn with_names(rows: Vec<Observation>, covariate_names: Vec<String>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Validation("table has no rows".into()));
        }
        let p = covariate_names.len();
        let n = rows.len();
        let mut table = ObservationTable {
            trial: Vec::with_capacity(n),
            treatment: Vec::with_capacity(n),
            outcome: Vec::with_capacity(n),
            covariates: Vec::with_capacity(n * p),
            n_covariates: p,
            covariate_names,
            treatment_levels: Vec::new(),
            trial_ids: Vec::new(),
            n_target: 0,
        };
        for (i, row) in rows.into_iter().enumerate() {
            table.push_checked(i, row)?;
        }
        table.finish()?;
        Ok(table)
    }

    fn push_checked(&mut self, i: usize, row: Observation) -> Result<()> {
        if row.covariates.len() != self.n_covariates {
            return Err(Error::RowValidation {
                row: i,
                message: format!(
                    "expected {} covariates, found {}",
                    self.n_covariates,
                    row.covariates.len()
                ),
            });
        }
        if let Some(j) = row.covariates.iter().position(|v| !v.is_finite()) {
            return Err(Error::RowValidation {
                row: i,
                message: format!("covariate {} is not finite", self.covariate_names[j]),
            });
        }
        if row.participates() {
            if row.treatment.is_none() {
                return Err(Error::RowValidation {
                    row: i,
                    message: format!("trial {} row has no treatment", row.trial),
                });
            }
            match row.outcome {
                None => {
                    return Err(Error::RowValidation {
                        row: i,
                        message: format!("trial {} row has no outcome", row.trial),
                    })
                }
                Some(y) if !y.is_finite() => {
                    return Err(Error::RowValidation {
                        row: i,
                        message: "outcome is not finite".into(),
                    })
                }
                Some(_) => {}
            }
        } else if let Some(y) = row.outcome {
            if !y.is_finite() {
                return Err(Error::RowValidation {
                    row: i,
                    message: "outcome is not finite".into(),
                });
            }
        }
        self.trial.push(row.trial);
        self.treatment.push(row.treatment);
        self.outcome.push(row.outcome);
        self.covariates.extend_from_slice(&row.covariates);
        Ok(())
    }

    fn finish(&mut self) -> Result<()> {
        let mut levels = BTreeSet::new();
        let mut trials = BTreeSet::new();
        let mut n_target = 0;
        for i in 0..self.trial.len() {
            if self.trial[i] == TARGET_TRIAL {
                n_target += 1;
            } else {
                trials.insert(self.trial[i]);
                // presence checked in push_checked
                levels.insert(self.treatment[i].unwrap());
            }
        }
        if n_target == 0 {
            return Err(Error::Validation("table has no target-population rows (trial = 0)".into()));
        }
        if trials.is_empty() {
            return Err(Error::Validation("table has no trial rows (trial >= 1)".into()));
        }
        for (i, a) in self.treatment.iter().enumerate() {
            if let Some(a) = a {
                if !levels.contains(a) {
                    return Err(Error::RowValidation {
                        row: i,
                        message: format!("treatment level {a} never occurs among trial participants"),
                    });
                }
            }
        }
        self.treatment_levels = levels.into_iter().collect();
        self.trial_ids = trials.into_iter().collect();
        self.n_target = n_target;
        Ok(())
    }

    /// New table made of the given row indices (with repetition), revalidated.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let p = self.n_covariates;
        let mut out = ObservationTable {
            trial: Vec::with_capacity(indices.len()),
            treatment: Vec::with_capacity(indices.len()),
            outcome: Vec::with_capacity(indices.len()),
            covariates: Vec::with_capacity(indices.len() * p),
            n_covariates: p,
            covariate_names: self.covariate_names.clone(),
            treatment_levels: Vec::new(),
            trial_ids: Vec::new(),
            n_target: 0,
        };
        if indices.is_empty() {
            return Err(Error::Validation("table has no rows".into()));
        }
        for &i in indices {
            out.trial.push(self.trial[i]);
            out.treatment.push(self.treatment[i]);
            out.outcome.push(self.outcome[i]);
            out.covariates.extend_from_slice(self.x(i));
        }
        out.finish()?;
        Ok(out)
    }

    /// Copy of the table with trial ids remapped through `map`; target rows stay at 0.
    pub fn relabel_trials(&self, map: impl Fn(TrialId) -> TrialId) -> Result<Self> {
        let rows = self
            .observations()
            .map(|mut o| {
                if o.participates() {
                    o.trial = map(o.trial);
                }
                o
            })
            .collect();
        Self::with_names(rows, self.covariate_names.clone())
    }

    /// Copy of the table with `f` applied to every present outcome.
    pub fn map_outcomes(&self, f: impl Fn(f64) -> f64) -> Self {
        let mut out = self.clone();
        for y in out.outcome.iter_mut().flatten() {
            *y = f(*y);
        }
        out
    }

    pub fn len(&self) -> usize {
        self.trial.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trial.is_empty()
    }

    pub fn n_covariates(&self) -> usize {
        self.n_covariates
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    pub fn treatment_levels(&self) -> &[TreatmentLevel] {
        &self.treatment_levels
    }

    /// Distinct trial ids (excluding the target sample), sorted.
    pub fn trial_ids(&self) -> &[TrialId] {
        &self.trial_ids
    }

    pub fn n_trials(&self) -> usize {
        self.trial_ids.len()
    }

    pub fn n_target(&self) -> usize {
        self.n_target
    }

    pub fn n_trial_rows(&self) -> usize {
        self.len() - self.n_target
    }

    pub fn trial_size(&self, trial: TrialId) -> usize {
        self.trial.iter().filter(|&&s| s == trial).count()
    }

    pub fn x(&self, i: usize) -> &[f64] {
        &self.covariates[i * self.n_covariates..(i + 1) * self.n_covariates]
    }

    pub fn trial(&self, i: usize) -> TrialId {
        self.trial[i]
    }

    pub fn participates(&self, i: usize) -> bool {
        self.trial[i] != TARGET_TRIAL
    }

    pub fn treatment(&self, i: usize) -> Option<TreatmentLevel> {
        self.treatment[i]
    }

    pub fn outcome(&self, i: usize) -> Option<f64> {
        self.outcome[i]
    }

    pub fn row(&self, i: usize) -> Row<'_> {
        Row {
            index: i,
            trial: self.trial[i],
            treatment: self.treatment[i],
            outcome: self.outcome[i],
            covariates: self.x(i),
        }
    }

    pub fn rows(&self) -> impl Iterator<Item = Row<'_>> + '_ {
        (0..self.len()).map(move |i| self.row(i))
    }

    pub fn observations(&self) -> impl Iterator<Item = Observation> + '_ {
        self.rows().map(|r| Observation {
            trial: r.trial,
            treatment: r.treatment,
            outcome: r.outcome,
            covariates: r.covariates.to_vec(),
        })
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.covariate_names.iter().position(|c| c == name)
    }
}

/// Column-name mapping for CSV ingestion. Every other column is a covariate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvSchema {
    pub trial: String,
    pub treatment: String,
    pub outcome: String,
}

impl Default for CsvSchema {
    fn default() -> Self {
        CsvSchema {
            trial: "trial".into(),
            treatment: "treatment".into(),
            outcome: "outcome".into(),
        }
    }
}

pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<ObservationTable> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, schema)
}

pub fn read_csv<R: Read>(reader: R, schema: &CsvSchema) -> Result<ObservationTable> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("missing column '{name}'")))
    };
    let trial_col = find(&schema.trial)?;
    let treatment_col = find(&schema.treatment)?;
    let outcome_col = find(&schema.outcome)?;
    let covariate_cols: Vec<usize> = (0..headers.len())
        .filter(|&c| c != trial_col && c != treatment_col && c != outcome_col)
        .collect();
    let names: Vec<String> = covariate_cols.iter().map(|&c| headers[c].to_string()).collect();

    let mut rows = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let cell = |c: usize| record.get(c).unwrap_or("").trim();
        let trial: TrialId = cell(trial_col).parse().map_err(|_| Error::RowValidation {
            row: i,
            message: format!("trial id '{}' is not a non-negative integer", cell(trial_col)),
        })?;
        let treatment = match cell(treatment_col) {
            "" => None,
            s => Some(s.parse::<TreatmentLevel>().map_err(|_| Error::RowValidation {
                row: i,
                message: format!("treatment '{s}' is not a non-negative integer code"),
            })?),
        };
        let outcome = match cell(outcome_col) {
            "" => None,
            s => Some(s.parse::<f64>().map_err(|_| Error::RowValidation {
                row: i,
                message: format!("outcome '{s}' is not a number"),
            })?),
        };
        let covariates = covariate_cols
            .iter()
            .map(|&c| {
                cell(c).parse::<f64>().map_err(|_| Error::RowValidation {
                    row: i,
                    message: format!("covariate {} = '{}' is not a number", &headers[c], cell(c)),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(Observation {
            trial,
            treatment,
            outcome,
            covariates,
        });
    }
    ObservationTable::with_names(rows, names)
}

pub fn write_csv(table: &ObservationTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv_to(table, file)
}

/// Canonical layout: `trial,treatment,outcome,<covariates>`, input row order,
/// empty cells for absent values, shortest round-trip float formatting.
pub fn write_csv_to<W: Write>(table: &ObservationTable, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec!["trial".to_string(), "treatment".to_string(), "outcome".to_string()];
    header.extend(table.covariate_names().iter().cloned());
    wtr.write_record(&header)?;
    let mut record = Vec::with_capacity(header.len());
    for row in table.rows() {
        record.clear();
        record.push(row.trial.to_string());
        record.push(row.treatment.map(|a| a.to_string()).unwrap_or_default());
        record.push(row.outcome.map(|y| y.to_string()).unwrap_or_default());
        record.extend(row.covariates.iter().map(|v| v.to_string()));
        wtr.write_record(&record)?;
    }
    wtr.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const FOUR_ROWS: &str = "trial,treatment,outcome,x\n1,1,2.0,0.5\n1,0,1.0,-0.5\n2,1,3.0,1.0\n0,,,0.0\n";

    #[test]
    fn reads_four_row_example() {
        let t = read_csv(FOUR_ROWS.as_bytes(), &CsvSchema::default()).unwrap();
        assert_eq!(t.len(), 4);
        assert_eq!(t.n_target(), 1);
        assert_eq!(t.n_trials(), 2);
        assert_eq!(t.treatment_levels(), &[0, 1]);
        assert_eq!(t.covariate_names(), &["x".to_string()]);
        assert!(t.participates(0));
        assert!(!t.participates(3));
    }

    #[test]
    fn writes_empty_cells_for_target_row() {
        let t = read_csv(FOUR_ROWS.as_bytes(), &CsvSchema::default()).unwrap();
        let mut buf = Vec::new();
        write_csv_to(&t, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[0], "trial,treatment,outcome,x");
        assert_eq!(lines[4], "0,,,0");
    }

    #[test]
    fn missing_outcome_names_row() {
        let csv = "trial,treatment,outcome,x\n1,1,2.0,0.5\n1,0,,-0.5\n0,,,0.0\n";
        match read_csv(csv.as_bytes(), &CsvSchema::default()) {
            Err(Error::RowValidation { row, message }) => {
                assert_eq!(row, 1);
                assert!(message.contains("outcome"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_column_is_schema_error() {
        let csv = "trial,arm,outcome,x\n1,1,2.0,0.5\n";
        assert!(matches!(
            read_csv(csv.as_bytes(), &CsvSchema::default()),
            Err(Error::Schema(_))
        ));
    }

    #[test]
    fn non_finite_covariate_rejected() {
        let csv = "trial,treatment,outcome,x\n1,1,2.0,NaN\n0,,,0.0\n";
        assert!(matches!(
            read_csv(csv.as_bytes(), &CsvSchema::default()),
            Err(Error::RowValidation { row: 0, .. })
        ));
    }

    #[test]
    fn negative_trial_rejected() {
        let csv = "trial,treatment,outcome,x\n-1,1,2.0,0.1\n0,,,0.0\n";
        assert!(read_csv(csv.as_bytes(), &CsvSchema::default()).is_err());
    }

    #[test]
    fn empty_table_rejected() {
        assert!(ObservationTable::from_rows(vec![]).is_err());
    }

    #[test]
    fn target_treatment_outside_trial_levels_rejected() {
        let rows = vec![
            Observation::trial_row(1, 0, 1.0, vec![0.0]),
            Observation {
                trial: 0,
                treatment: Some(3),
                outcome: Some(1.0),
                covariates: vec![0.0],
            },
        ];
        assert!(ObservationTable::from_rows(rows).is_err());
    }

    #[test]
    fn requires_both_target_and_trial_rows() {
        let only_trial = vec![Observation::trial_row(1, 0, 1.0, vec![0.0])];
        assert!(ObservationTable::from_rows(only_trial).is_err());
        let only_target = vec![Observation::target_row(vec![0.0])];
        assert!(ObservationTable::from_rows(only_target).is_err());
    }

    #[test]
    fn target_rows_may_carry_outcomes() {
        let rows = vec![
            Observation::trial_row(1, 0, 1.0, vec![0.0]),
            Observation {
                trial: 0,
                treatment: Some(0),
                outcome: Some(4.0),
                covariates: vec![0.0],
            },
        ];
        let t = ObservationTable::from_rows(rows).unwrap();
        assert_eq!(t.outcome(1), Some(4.0));
    }
}
