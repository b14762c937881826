use rand::Rng;
use rand_distr::StandardNormal;

use super::scenario::Scenario;
use crate::data::{Observation, ObservationTable};
use crate::error::{Error, Result};
use crate::linalg::Cholesky;
use crate::rng::{self, domain};

/// Equicorrelated multivariate normal with unit variances.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct CovariateSampler {
    dim: usize,
    lower: Vec<f64>,
}

impl CovariateSampler {
    pub(crate) fn new(dim: usize, correlation: f64) -> Result<Self> {
        let sigma: Vec<f64> = (0..dim * dim)
            .map(|k| if k / dim == k % dim { 1.0 } else { correlation })
            .collect();
        let chol = Cholesky::factor(&sigma, dim)
            .map_err(|_| Error::Config(format!("correlation {correlation} is not positive definite")))?;
        Ok(CovariateSampler {
            dim,
            lower: chol.lower().to_vec(),
        })
    }

    pub(crate) fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let z: Vec<f64> = (0..self.dim).map(|_| rng.sample(StandardNormal)).collect();
        (0..self.dim)
            .map(|i| (0..=i).map(|k| self.lower[i * self.dim + k] * z[k]).sum())
            .collect()
    }
}

/// One simulated cohort: the observed table plus the potential outcomes
/// `[Y^0, Y^1]` of every row, target rows included.
#[derive(Debug, Clone)]
pub struct SimulatedCohort {
    pub table: ObservationTable,
    pub potential: Vec<[f64; 2]>,
}

impl Scenario {
    /// Draws a cohort of `n` individuals. Participants are allocated to
    /// trials 1..=3 and randomized within trial; non-participants form the
    /// target sample and carry covariates only.
    pub fn generate_cohort<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<SimulatedCohort> {
        let assign = self.config.assignment_probabilities();
        let mut rows = Vec::with_capacity(self.config.n);
        let mut potential = Vec::with_capacity(self.config.n);
        for _ in 0..self.config.n {
            let x = self.sampler.sample(rng);
            let participates = rng.random::<f64>() < self.participation_probability(&x);
            let y0 = self.outcome_mean(0, &x) + rng.sample::<f64, _>(StandardNormal);
            let y1 = self.outcome_mean(1, &x) + rng.sample::<f64, _>(StandardNormal);
            potential.push([y0, y1]);
            if participates {
                let probs = self.allocation_probabilities(&x);
                let u: f64 = rng.random();
                let s = if u < probs[0] {
                    0
                } else if u < probs[0] + probs[1] {
                    1
                } else {
                    2
                };
                let a = u32::from(rng.random::<f64>() < assign[s]);
                let y = if a == 1 { y1 } else { y0 };
                rows.push(Observation::trial_row(s as u32 + 1, a, y, x));
            } else {
                rows.push(Observation::target_row(x));
            }
        }
        let table = ObservationTable::from_rows(rows).map_err(|e| Error::Simulation(format!("degenerate cohort: {e}")))?;
        Ok(SimulatedCohort { table, potential })
    }

    /// Cohort for replication `r` under `master_seed`.
    pub fn generate(&self, master_seed: u64, replication: u64) -> Result<SimulatedCohort> {
        let mut rng = rng::stream(master_seed, &[domain::SIMULATION, replication]);
        self.generate_cohort(&mut rng)
    }
}
