//! Nonparametric percentile bootstrap over the full estimation pipeline.
//!
//! Each replicate resamples rows with replacement, refits every working
//! model and recomputes the estimates. Replicate `b` draws its indices from
//! a stream keyed by `(master_seed, b)`, so intervals are identical for any
//! worker count.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{ObservationTable, TreatmentLevel};
use crate::error::{Error, Result};
use crate::estimators::report::point_statistics;
use crate::estimators::{estimate, BootstrapInfo, EstimateReport, EstimatorKind, Interval, ModelSpec};
use crate::rng::{self, domain};
use crate::stats;

/// Largest tolerated share of failed replicates.
pub const MAX_FAILURE_RATE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResamplingScheme {
    /// Draw n rows from all rows.
    Pooled,
    /// Draw n0 target rows and n - n0 trial rows separately.
    StratifiedByR,
}

impl ResamplingScheme {
    pub fn label(self) -> &'static str {
        match self {
            ResamplingScheme::Pooled => "pooled",
            ResamplingScheme::StratifiedByR => "stratified_by_r",
        }
    }
}

impl std::str::FromStr for ResamplingScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pooled" => Ok(ResamplingScheme::Pooled),
            "stratified_by_r" | "stratified" => Ok(ResamplingScheme::StratifiedByR),
            other => Err(Error::Config(format!("unknown resampling scheme '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub replicates: usize,
    pub level: f64,
    pub master_seed: u64,
    pub scheme: ResamplingScheme,
    /// Worker threads; `None` uses the global pool. Never affects results.
    #[serde(skip)]
    pub workers: Option<usize>,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            replicates: 10_000,
            level: 0.95,
            master_seed: 0,
            scheme: ResamplingScheme::Pooled,
            workers: None,
        }
    }
}

impl BootstrapConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replicates < 2 {
            return Err(Error::Config(format!(
                "bootstrap needs at least 2 replicates, got {}",
                self.replicates
            )));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::Config(format!("confidence level must lie in (0, 1), got {}", self.level)));
        }
        Ok(())
    }
}

/// Row indices for one bootstrap replicate.
pub fn resample_indices<R: Rng + ?Sized>(table: &ObservationTable, scheme: ResamplingScheme, rng: &mut R) -> Vec<usize> {
    let n = table.len();
    match scheme {
        ResamplingScheme::Pooled => (0..n).map(|_| rng.random_range(0..n)).collect(),
        ResamplingScheme::StratifiedByR => {
            let (target, trial): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| !table.participates(i));
            let mut out = Vec::with_capacity(n);
            out.extend((0..target.len()).map(|_| target[rng.random_range(0..target.len())]));
            out.extend((0..trial.len()).map(|_| trial[rng.random_range(0..trial.len())]));
            out
        }
    }
}

/// Statistic vectors from the successful replicates, in replicate order.
#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapDraws {
    pub values: Vec<Vec<f64>>,
    pub failures: Vec<(usize, String)>,
    pub replicates: usize,
}

impl BootstrapDraws {
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.values.iter().map(|v| v[j]).collect()
    }

    /// Percentile interval for statistic `j` at confidence `level`.
    pub fn percentile_interval(&self, j: usize, level: f64) -> Interval {
        let sorted = stats::sorted(&self.column(j));
        let alpha = 1.0 - level;
        Interval {
            lower: stats::order_statistic_quantile(&sorted, alpha / 2.0),
            upper: stats::order_statistic_quantile(&sorted, 1.0 - alpha / 2.0),
        }
    }

    pub fn standard_error(&self, j: usize) -> f64 {
        stats::variance(&self.column(j)).sqrt()
    }
}

pub(crate) fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(f()),
        Some(w) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w.max(1))
                .build()
                .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Runs `statistic` on `config.replicates` resampled tables. Replicates whose
/// statistic fails (or whose resample is not a valid table) are recorded and
/// excluded; more than [`MAX_FAILURE_RATE`] of them is an error.
pub fn bootstrap<F>(table: &ObservationTable, config: &BootstrapConfig, statistic: F) -> Result<BootstrapDraws>
where
    F: Fn(&ObservationTable) -> Result<Vec<f64>> + Sync,
{
    config.validate()?;
    let run = |b: usize| -> Result<Vec<f64>> {
        let mut rng = rng::stream(config.master_seed, &[domain::BOOTSTRAP, b as u64]);
        let idx = resample_indices(table, config.scheme, &mut rng);
        let replicate = table.select(&idx)?;
        statistic(&replicate)
    };
    let outcomes: Vec<Result<Vec<f64>>> =
        with_workers(config.workers, || (0..config.replicates).into_par_iter().map(run).collect())?;

    let mut values = Vec::with_capacity(config.replicates);
    let mut failures = Vec::new();
    for (b, r) in outcomes.into_iter().enumerate() {
        match r {
            Ok(v) => values.push(v),
            Err(e) => failures.push((b, e.to_string())),
        }
    }
    let rate = failures.len() as f64 / config.replicates as f64;
    if rate > MAX_FAILURE_RATE || values.len() < 2 {
        let first = failures.first().map(|(b, m)| format!(" (first: replicate {b}: {m})")).unwrap_or_default();
        return Err(Error::Inference(format!(
            "{} of {} bootstrap replicates failed{first}; consider the stratified_by_r scheme or simpler working models",
            failures.len(),
            config.replicates
        )));
    }
    Ok(BootstrapDraws {
        values,
        failures,
        replicates: config.replicates,
    })
}

/// Point estimates from the original data with percentile intervals from
/// refitting the whole pipeline on each replicate.
pub fn bootstrap_ci(
    table: &ObservationTable,
    spec: &ModelSpec,
    kind: EstimatorKind,
    arms: &[TreatmentLevel],
    contrasts: &[(TreatmentLevel, TreatmentLevel)],
    config: &BootstrapConfig,
) -> Result<EstimateReport> {
    config.validate()?;
    let mut report = estimate(table, spec, kind, arms, contrasts)?;
    let draws = bootstrap(table, config, |t| point_statistics(t, spec, kind, arms, contrasts))?;
    let n_arms = report.arms.len();
    for (j, arm) in report.arms.iter_mut().enumerate() {
        arm.ci = Some(draws.percentile_interval(j, config.level));
    }
    for (j, c) in report.contrasts.iter_mut().enumerate() {
        c.ci = Some(draws.percentile_interval(n_arms + j, config.level));
    }
    report.bootstrap = Some(BootstrapInfo {
        method: "percentile".into(),
        scheme: config.scheme.label().into(),
        level: config.level,
        replicates: config.replicates,
        failures: draws.failures.len(),
        master_seed: config.master_seed,
    });
    Ok(report)
}
