use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::scenario::{Intercepts, Scenario, ScenarioConfig, N_TRIALS};
use super::truth::TruthEstimate;
use crate::data::TrialId;
use crate::error::{Error, Result};
use crate::estimators::{fit_bundle, psi, EstimatorKind, ModelSpec, PerTrialSpec, TreatmentSpec};
use crate::inference::with_workers;
use crate::nuisance::Design;
use crate::rng::{self, domain};
use crate::stats::Moments;

/// Largest tolerated share of failed replications per scenario.
pub const MAX_REPLICATION_FAILURE_RATE: f64 = 0.01;

fn default_replications() -> usize {
    10_000
}
fn default_seed() -> u64 {
    1
}
fn default_estimators() -> Vec<EstimatorKind> {
    EstimatorKind::ALL.to_vec()
}
fn default_balanced() -> Vec<bool> {
    vec![true, false]
}
fn default_txam() -> Vec<bool> {
    vec![false, true]
}

/// Full factorial over scenario axes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridAxes {
    pub n: Vec<usize>,
    pub n_trial_total: Vec<usize>,
    #[serde(default = "default_balanced")]
    pub balanced: Vec<bool>,
    #[serde(default = "default_txam")]
    pub txam_varies: Vec<bool>,
}

/// A simulation run as read from a TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default = "default_seed")]
    pub master_seed: u64,
    /// Monte Carlo draw for the true target means; exact quadrature when absent.
    #[serde(default)]
    pub oracle_draw_size: Option<usize>,
    #[serde(default = "default_estimators")]
    pub estimators: Vec<EstimatorKind>,
    #[serde(default)]
    pub grid: Option<GridAxes>,
    #[serde(default)]
    pub scenario: Vec<ScenarioConfig>,
}

impl GridConfig {
    /// All 24 benchmark scenarios with 10000 replications.
    pub fn full() -> Self {
        GridConfig {
            replications: 10_000,
            master_seed: default_seed(),
            oracle_draw_size: None,
            estimators: default_estimators(),
            grid: Some(GridAxes {
                n: vec![10_000, 100_000],
                n_trial_total: vec![1000, 2000, 5000],
                balanced: default_balanced(),
                txam_varies: default_txam(),
            }),
            scenario: Vec::new(),
        }
    }

    /// The eight n = 10000 scenarios with 1000 replications.
    pub fn desk() -> Self {
        GridConfig {
            replications: 1000,
            grid: Some(GridAxes {
                n: vec![10_000],
                n_trial_total: vec![1000, 5000],
                balanced: default_balanced(),
                txam_varies: default_txam(),
            }),
            ..GridConfig::full()
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "full" => Ok(GridConfig::full()),
            "desk" => Ok(GridConfig::desk()),
            other => Err(Error::Config(format!("unknown preset '{other}' (expected full or desk)"))),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Scenarios in grid order (n, total trial size, balanced, varying
    /// assignment) followed by explicitly listed ones.
    pub fn scenarios(&self) -> Result<Vec<ScenarioConfig>> {
        let mut out = Vec::new();
        if let Some(g) = &self.grid {
            for &n in &g.n {
                for &m in &g.n_trial_total {
                    for &b in &g.balanced {
                        for &t in &g.txam_varies {
                            out.push(ScenarioConfig::new(n, m, b, t));
                        }
                    }
                }
            }
        }
        out.extend(self.scenario.iter().cloned());
        if out.is_empty() {
            return Err(Error::Config("the configuration defines no scenarios".into()));
        }
        Ok(out)
    }

    pub fn options(&self) -> RunOptions {
        RunOptions {
            replications: self.replications,
            master_seed: self.master_seed,
            oracle_draw_size: self.oracle_draw_size,
            estimators: self.estimators.clone(),
            workers: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub replications: usize,
    pub master_seed: u64,
    /// Monte Carlo draw for the true target means; exact quadrature when `None`.
    pub oracle_draw_size: Option<usize>,
    pub estimators: Vec<EstimatorKind>,
    /// Worker threads; never affects results.
    pub workers: Option<usize>,
}

impl RunOptions {
    fn validate(&self) -> Result<()> {
        if self.replications < 2 {
            return Err(Error::Config("at least 2 replications are required".into()));
        }
        if self.estimators.is_empty() {
            return Err(Error::Config("no estimators selected".into()));
        }
        Ok(())
    }
}

/// Bias and variance of one estimator for one arm in one scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub estimator: EstimatorKind,
    pub arm: u32,
    pub truth: f64,
    pub mean: f64,
    pub bias: f64,
    pub variance: f64,
    /// Monte Carlo standard error of `bias`.
    pub bias_std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSummary {
    pub config: ScenarioConfig,
    pub intercepts: Intercepts,
    pub truth: [TruthEstimate; 2],
    pub cells: Vec<CellSummary>,
    pub successful: usize,
    pub failures: Vec<(usize, String)>,
    /// Average realized size of trials 1..=3 and of the target sample.
    pub mean_trial_sizes: [f64; N_TRIALS],
    pub mean_target_size: f64,
}

impl ScenarioSummary {
    pub fn cell(&self, estimator: EstimatorKind, arm: u32) -> Option<&CellSummary> {
        self.cells.iter().find(|c| c.estimator == estimator && c.arm == arm)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub replications: usize,
    pub master_seed: u64,
    pub oracle_draw_size: Option<usize>,
    pub estimators: Vec<EstimatorKind>,
    pub scenarios: Vec<ScenarioSummary>,
}

impl Scenario {
    /// Known randomization probabilities `{trial: {0: 1 - p, 1: p}}`.
    pub fn known_per_trial(&self) -> BTreeMap<TrialId, BTreeMap<u32, f64>> {
        self.config
            .assignment_probabilities()
            .iter()
            .enumerate()
            .map(|(s, &p)| (s as TrialId + 1, BTreeMap::from([(0, 1.0 - p), (1, p)])))
            .collect()
    }

    /// Working models of the benchmark analysis: main effects everywhere,
    /// with the pooled treatment model a main-effects logistic regression.
    pub fn main_effects_spec(&self) -> ModelSpec {
        ModelSpec::main_effects(self.config.covariate_dim())
    }

    /// Correctly specified pooled treatment probability: a main-effects
    /// multinomial trial-allocation model mixed over the known per-trial
    /// randomization probabilities.
    pub fn mixture_treatment_spec(&self) -> TreatmentSpec {
        TreatmentSpec::TrialMixture {
            allocation_design: Design::main_effects(self.config.covariate_dim()),
            per_trial: self.known_per_trial(),
        }
    }

    /// Main effects for outcome and participation, correctly specified
    /// treatment probabilities, and known per-trial probabilities.
    pub fn correct_spec(&self) -> ModelSpec {
        ModelSpec {
            treatment: self.mixture_treatment_spec(),
            per_trial_treatment: PerTrialSpec::Known {
                per_trial: self.known_per_trial(),
            },
            ..self.main_effects_spec()
        }
    }
}

/// Runs every scenario with the benchmark working models.
pub fn run_grid(configs: &[ScenarioConfig], options: &RunOptions) -> Result<SimulationSummary> {
    run_grid_with(configs, options, Scenario::main_effects_spec)
}

/// Runs every scenario, fitting the working models chosen by `spec_for`.
/// Replication `r` of scenario `k` uses the stream `(master_seed, k, r)`.
pub fn run_grid_with<F>(configs: &[ScenarioConfig], options: &RunOptions, spec_for: F) -> Result<SimulationSummary>
where
    F: Fn(&Scenario) -> ModelSpec + Sync,
{
    options.validate()?;
    let mut scenarios = Vec::with_capacity(configs.len());
    for (k, config) in configs.iter().enumerate() {
        let scenario = Scenario::new(config.clone())?;
        let spec = spec_for(&scenario);
        scenarios.push(run_scenario(&scenario, k as u64, &spec, options)?);
    }
    Ok(SimulationSummary {
        replications: options.replications,
        master_seed: options.master_seed,
        oracle_draw_size: options.oracle_draw_size,
        estimators: options.estimators.clone(),
        scenarios,
    })
}

struct Replication {
    /// `values[j][a]` for estimator j and arm a.
    values: Vec<[f64; 2]>,
    trial_sizes: [usize; N_TRIALS],
    target_size: usize,
}

fn replicate(scenario: &Scenario, key: u64, r: usize, spec: &ModelSpec, kinds: &[EstimatorKind], seed: u64) -> Result<Replication> {
    let mut rng = rng::stream(seed, &[domain::SIMULATION, key, r as u64]);
    let cohort = scenario.generate_cohort(&mut rng)?;
    let table = &cohort.table;
    let bundle = fit_bundle(table, spec)?;
    let mut values = Vec::with_capacity(kinds.len());
    for &kind in kinds {
        values.push([psi(kind, table, &bundle, 0)?, psi(kind, table, &bundle, 1)?]);
    }
    let mut trial_sizes = [0; N_TRIALS];
    for (s, size) in trial_sizes.iter_mut().enumerate() {
        *size = table.trial_size(s as TrialId + 1);
    }
    Ok(Replication {
        values,
        trial_sizes,
        target_size: table.n_target(),
    })
}

fn run_scenario(scenario: &Scenario, key: u64, spec: &ModelSpec, options: &RunOptions) -> Result<ScenarioSummary> {
    let truth = match options.oracle_draw_size {
        Some(draw) => scenario.true_means(draw, options.master_seed)?,
        None => scenario.exact_means().map(|value| TruthEstimate { value, std_error: 0.0 }),
    };
    let kinds = &options.estimators;
    let results: Vec<Result<Replication>> = with_workers(options.workers, || {
        (0..options.replications)
            .into_par_iter()
            .map(|r| replicate(scenario, key, r, spec, kinds, options.master_seed))
            .collect()
    })?;

    let mut ok = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for (r, res) in results.into_iter().enumerate() {
        match res {
            Ok(v) => ok.push(v),
            Err(e) => failures.push((r, e.to_string())),
        }
    }
    let c = &scenario.config;
    if failures.len() as f64 > MAX_REPLICATION_FAILURE_RATE * options.replications as f64 || ok.len() < 2 {
        return Err(Error::Simulation(format!(
            "{} of {} replications failed in scenario n={} n_trial_total={} balanced={} txam_varies={} (first: {})",
            failures.len(),
            options.replications,
            c.n,
            c.n_trial_total,
            c.balanced,
            c.txam_varies,
            failures.first().map(|(r, m)| format!("replication {r}: {m}")).unwrap_or_default()
        )));
    }

    let mut cells = Vec::new();
    for arm in 0..2u32 {
        for (j, &kind) in kinds.iter().enumerate() {
            let v: Vec<f64> = ok.iter().map(|rep| rep.values[j][arm as usize]).collect();
            let m = Moments::of(&v);
            let t = truth[arm as usize].value;
            cells.push(CellSummary {
                estimator: kind,
                arm,
                truth: t,
                mean: m.mean,
                bias: m.mean - t,
                variance: m.variance(),
                bias_std_error: (m.variance() / m.count as f64).sqrt(),
            });
        }
    }
    let count = ok.len() as f64;
    let mut mean_trial_sizes = [0.0; N_TRIALS];
    for (s, slot) in mean_trial_sizes.iter_mut().enumerate() {
        *slot = ok.iter().map(|rep| rep.trial_sizes[s] as f64).sum::<f64>() / count;
    }
    let mean_target_size = ok.iter().map(|rep| rep.target_size as f64).sum::<f64>() / count;

    Ok(ScenarioSummary {
        config: scenario.config.clone(),
        intercepts: scenario.intercepts,
        truth,
        cells,
        successful: ok.len(),
        failures,
        mean_trial_sizes,
        mean_target_size,
    })
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "Yes"
    } else {
        "No"
    }
}

fn fmt(v: f64) -> String {
    format!("{v:.6}")
}

impl SimulationSummary {
    fn metric_csv(&self, metric: impl Fn(&CellSummary) -> f64) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["a", "n", "n_trial_total", "balanced", "txam_varies"];
        header.extend(self.estimators.iter().map(|k| k.short()));
        w.write_record(&header)?;
        for arm in 0..2u32 {
            for s in &self.scenarios {
                let c = &s.config;
                let mut rec = vec![
                    arm.to_string(),
                    c.n.to_string(),
                    c.n_trial_total.to_string(),
                    yes_no(c.balanced).into(),
                    yes_no(c.txam_varies).into(),
                ];
                for &k in &self.estimators {
                    rec.push(s.cell(k, arm).map(&metric).map(fmt).unwrap_or_default());
                }
                w.write_record(&rec)?;
            }
        }
        finish(w)
    }

    /// Bias table: one row per arm and scenario, one column per estimator.
    pub fn bias_csv(&self) -> Result<String> {
        self.metric_csv(|c| c.bias)
    }

    pub fn variance_csv(&self) -> Result<String> {
        self.metric_csv(|c| c.variance)
    }

    /// Solved intercepts, true target means and realized sample sizes.
    pub fn scenarios_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "n",
            "n_trial_total",
            "balanced",
            "txam_varies",
            "beta0",
            "gamma0",
            "zeta0",
            "psi0",
            "psi1",
            "mean_n1",
            "mean_n2",
            "mean_n3",
            "mean_n_target",
            "failures",
        ])?;
        for s in &self.scenarios {
            let c = &s.config;
            w.write_record([
                c.n.to_string(),
                c.n_trial_total.to_string(),
                yes_no(c.balanced).into(),
                yes_no(c.txam_varies).into(),
                fmt(s.intercepts.beta0),
                fmt(s.intercepts.gamma0),
                fmt(s.intercepts.zeta0),
                fmt(s.truth[0].value),
                fmt(s.truth[1].value),
                format!("{:.2}", s.mean_trial_sizes[0]),
                format!("{:.2}", s.mean_trial_sizes[1]),
                format!("{:.2}", s.mean_trial_sizes[2]),
                format!("{:.2}", s.mean_target_size),
                s.failures.len().to_string(),
            ])?;
        }
        finish(w)
    }

    /// Writes `bias.csv`, `variance.csv` and `scenarios.csv` into `dir`.
    pub fn write_tables(&self, dir: impl AsRef<Path>) -> Result<Vec<std::path::PathBuf>> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut written = Vec::new();
        for (name, body) in [
            ("bias.csv", self.bias_csv()?),
            ("variance.csv", self.variance_csv()?),
            ("scenarios.csv", self.scenarios_csv()?),
        ] {
            let path = dir.join(name);
            std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
            written.push(path);
        }
        Ok(written)
    }
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Serialization(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Serialization(e.to_string()))
}
