use serde::{Deserialize, Serialize};

use super::calibrate::{solve_allocation_intercepts, solve_intercept};
use super::cohort::CovariateSampler;
use crate::error::{Error, Result};
use crate::rng::{self, domain};

/// Number of trials in the simulated collection.
pub const N_TRIALS: usize = 3;

/// Full parameterization of one simulation scenario. Defaults are the
/// benchmark design: three equicorrelated standard normal covariates,
/// logistic selection, multinomial allocation to three trials, and linear
/// potential outcome models with standard normal errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Cohort size (trial participants plus target sample).
    pub n: usize,
    /// Expected total number of trial participants.
    pub n_trial_total: usize,
    /// Equal trial sizes when true, otherwise a 4:2:1 ratio.
    pub balanced: bool,
    /// Treatment probabilities (1/2, 1/3, 2/3) by trial when true, 1/2 in all trials otherwise.
    pub txam_varies: bool,
    #[serde(default = "defaults::correlation")]
    pub correlation: f64,
    #[serde(default = "defaults::selection_slopes")]
    pub selection_slopes: Vec<f64>,
    /// Slopes of the trial-2 versus trial-1 logit.
    #[serde(default = "defaults::allocation_slopes_2")]
    pub allocation_slopes_2: Vec<f64>,
    /// Slopes of the trial-3 versus trial-1 logit.
    #[serde(default = "defaults::allocation_slopes_3")]
    pub allocation_slopes_3: Vec<f64>,
    /// Intercept then slopes of the mean of Y^0.
    #[serde(default = "defaults::theta0")]
    pub theta0: Vec<f64>,
    /// Intercept then slopes of the mean of Y^1.
    #[serde(default = "defaults::theta1")]
    pub theta1: Vec<f64>,
    /// Size of the covariate draw used to solve the intercepts.
    #[serde(default = "defaults::calibration_draw_size")]
    pub calibration_draw_size: usize,
    #[serde(default = "defaults::calibration_seed")]
    pub calibration_seed: u64,
}

mod defaults {
    pub fn correlation() -> f64 {
        0.5
    }
    pub fn selection_slopes() -> Vec<f64> {
        vec![2f64.ln(); 3]
    }
    pub fn allocation_slopes_2() -> Vec<f64> {
        vec![1.5f64.ln(); 3]
    }
    pub fn allocation_slopes_3() -> Vec<f64> {
        vec![0.75f64.ln(); 3]
    }
    pub fn theta0() -> Vec<f64> {
        vec![1.5, 1.0, 1.0, 1.0]
    }
    pub fn theta1() -> Vec<f64> {
        vec![0.5, -1.0, -1.0, -1.0]
    }
    pub fn calibration_draw_size() -> usize {
        400_000
    }
    pub fn calibration_seed() -> u64 {
        0x7261_6e73_706f_7274
    }
}

impl ScenarioConfig {
    pub fn new(n: usize, n_trial_total: usize, balanced: bool, txam_varies: bool) -> Self {
        ScenarioConfig {
            n,
            n_trial_total,
            balanced,
            txam_varies,
            correlation: defaults::correlation(),
            selection_slopes: defaults::selection_slopes(),
            allocation_slopes_2: defaults::allocation_slopes_2(),
            allocation_slopes_3: defaults::allocation_slopes_3(),
            theta0: defaults::theta0(),
            theta1: defaults::theta1(),
            calibration_draw_size: defaults::calibration_draw_size(),
            calibration_seed: defaults::calibration_seed(),
        }
    }

    pub fn covariate_dim(&self) -> usize {
        self.selection_slopes.len()
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.covariate_dim();
        if p == 0 {
            return Err(Error::Config("selection_slopes must not be empty".into()));
        }
        if self.n_trial_total == 0 || self.n_trial_total >= self.n {
            return Err(Error::Config(format!(
                "n_trial_total must satisfy 0 < n_trial_total < n (got {} and n = {})",
                self.n_trial_total, self.n
            )));
        }
        for (name, v, len) in [
            ("allocation_slopes_2", &self.allocation_slopes_2, p),
            ("allocation_slopes_3", &self.allocation_slopes_3, p),
            ("theta0", &self.theta0, p + 1),
            ("theta1", &self.theta1, p + 1),
        ] {
            if v.len() != len {
                return Err(Error::Config(format!("{name} must have length {len}, got {}", v.len())));
            }
        }
        let lower = -1.0 / (p as f64 - 1.0).max(1.0);
        if !(self.correlation > lower && self.correlation < 1.0) {
            return Err(Error::Config(format!(
                "correlation {} does not give a positive-definite matrix",
                self.correlation
            )));
        }
        if self.calibration_draw_size < 1000 {
            return Err(Error::Config("calibration_draw_size must be at least 1000".into()));
        }
        Ok(())
    }

    /// Expected shares of trials 1, 2, 3 among participants.
    pub fn trial_shares(&self) -> [f64; N_TRIALS] {
        if self.balanced {
            [1.0 / 3.0; N_TRIALS]
        } else {
            [4.0 / 7.0, 2.0 / 7.0, 1.0 / 7.0]
        }
    }

    /// Pr[A = 1 | S = s] for trials 1, 2, 3.
    pub fn assignment_probabilities(&self) -> [f64; N_TRIALS] {
        if self.txam_varies {
            [0.5, 1.0 / 3.0, 2.0 / 3.0]
        } else {
            [0.5; N_TRIALS]
        }
    }

    pub fn theta(&self, a: u32) -> &[f64] {
        if a == 1 {
            &self.theta1
        } else {
            &self.theta0
        }
    }
}

/// Intercepts solved for a scenario on its calibration draw.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intercepts {
    /// Selection-model intercept.
    pub beta0: f64,
    /// Trial-2 allocation intercept.
    pub gamma0: f64,
    /// Trial-3 allocation intercept.
    pub zeta0: f64,
}

/// A validated scenario with its solved intercepts.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub intercepts: Intercepts,
    pub(crate) sampler: CovariateSampler,
}

impl Scenario {
    pub fn new(config: ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let sampler = CovariateSampler::new(config.covariate_dim(), config.correlation)?;
        let mut rng = rng::stream(config.calibration_seed, &[domain::CALIBRATION]);
        let draw: Vec<Vec<f64>> = (0..config.calibration_draw_size).map(|_| sampler.sample(&mut rng)).collect();

        let target = config.n_trial_total as f64 / config.n as f64 * draw.len() as f64;
        let beta0 = solve_intercept(target, &config.selection_slopes, &draw)?;
        let weights: Vec<f64> = draw
            .iter()
            .map(|x| crate::nuisance::expit(beta0 + crate::linalg::dot(&config.selection_slopes, x)))
            .collect();
        let (gamma0, zeta0) = solve_allocation_intercepts(
            &config.allocation_slopes_2,
            &config.allocation_slopes_3,
            &draw,
            &weights,
            config.trial_shares(),
        )?;
        Ok(Scenario {
            config,
            intercepts: Intercepts { beta0, gamma0, zeta0 },
            sampler,
        })
    }

    /// Pr[R = 1 | x]
    pub fn participation_probability(&self, x: &[f64]) -> f64 {
        crate::nuisance::expit(self.intercepts.beta0 + crate::linalg::dot(&self.config.selection_slopes, x))
    }

    /// Pr[S = s | x, R = 1] for s = 1, 2, 3.
    pub fn allocation_probabilities(&self, x: &[f64]) -> [f64; N_TRIALS] {
        let e2 = (self.intercepts.gamma0 + crate::linalg::dot(&self.config.allocation_slopes_2, x)).exp();
        let e3 = (self.intercepts.zeta0 + crate::linalg::dot(&self.config.allocation_slopes_3, x)).exp();
        let denom = 1.0 + e2 + e3;
        [1.0 / denom, e2 / denom, e3 / denom]
    }

    /// E[Y^a | x]
    pub fn outcome_mean(&self, a: u32, x: &[f64]) -> f64 {
        let theta = self.config.theta(a);
        theta[0] + crate::linalg::dot(&theta[1..], x)
    }
}
