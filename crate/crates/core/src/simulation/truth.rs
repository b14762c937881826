use serde::{Deserialize, Serialize};

use super::scenario::Scenario;
use crate::error::{Error, Result};
use crate::rng::{self, domain};

/// Smallest accepted Monte Carlo draw for the true target mean.
pub const MIN_ORACLE_DRAW: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruthEstimate {
    pub value: f64,
    pub std_error: f64,
}

impl Scenario {
    /// `E[Y^a | R = 0]` for a = 0 and a = 1, by weighting the conditional
    /// outcome means of a large covariate draw with `Pr[R = 0 | X]`. The draw
    /// is made of antithetic pairs `(x, -x)`, each pair one Monte Carlo unit.
    pub fn true_means(&self, draw_size: usize, seed: u64) -> Result<[TruthEstimate; 2]> {
        if draw_size < MIN_ORACLE_DRAW {
            return Err(Error::Config(format!(
                "oracle draw size must be at least {MIN_ORACLE_DRAW}, got {draw_size}"
            )));
        }
        let pairs = draw_size / 2;
        let mut rng = rng::stream(seed, &[domain::TRUTH]);
        let mut w = Vec::with_capacity(pairs);
        let mut m = [Vec::with_capacity(pairs), Vec::with_capacity(pairs)];
        for _ in 0..pairs {
            let x = self.sampler.sample(&mut rng);
            let neg: Vec<f64> = x.iter().map(|v| -v).collect();
            let (wp, wn) = (1.0 - self.participation_probability(&x), 1.0 - self.participation_probability(&neg));
            w.push(wp + wn);
            for a in 0..2 {
                m[a].push(wp * self.outcome_mean(a as u32, &x) + wn * self.outcome_mean(a as u32, &neg));
            }
        }
        let w_sum = pairwise_sum(&w);
        let units = pairs as f64;
        Ok([0, 1].map(|a| {
            let value = pairwise_sum(&m[a]) / w_sum;
            // Delta-method error of a ratio of means.
            let resid: Vec<f64> = w.iter().zip(&m[a]).map(|(w, wm)| wm - w * value).collect();
            let mean_w = w_sum / units;
            let var = crate::stats::variance(&resid) / (mean_w * mean_w);
            TruthEstimate {
                value,
                std_error: (var / units).sqrt(),
            }
        }))
    }

    /// `E[Y^a | R = 0]` for a = 0 and a = 1 by one-dimensional quadrature.
    ///
    /// Selection depends on X only through `v = s . X` with `v ~ N(0, s' S s)`,
    /// and `E[X | v] = S s v / (s' S s)`, so both the participation weight and
    /// the linear outcome mean reduce to integrals over `v`.
    pub fn exact_means(&self) -> [f64; 2] {
        let c = &self.config;
        let s = &c.selection_slopes;
        let total: f64 = s.iter().sum();
        let sigma_s: Vec<f64> = s.iter().map(|v| (1.0 - c.correlation) * v + c.correlation * total).collect();
        let var_v = crate::linalg::dot(s, &sigma_s);
        let beta0 = self.intercepts.beta0;
        if var_v <= 0.0 {
            return [0, 1].map(|a| c.theta(a)[0]);
        }
        let sd = var_v.sqrt();
        let k = [0, 1].map(|a| crate::linalg::dot(&c.theta(a)[1..], &sigma_s) / var_v);

        // Composite Simpson on t = v / sd over [-12, 12].
        const STEPS: usize = 24_000;
        let h = 24.0 / STEPS as f64;
        let (mut e_w, mut e_wv) = (0.0, 0.0);
        for j in 0..=STEPS {
            let t = -12.0 + j as f64 * h;
            let coef = if j == 0 || j == STEPS {
                1.0
            } else if j % 2 == 1 {
                4.0
            } else {
                2.0
            };
            let v = sd * t;
            let f = coef * (-0.5 * t * t).exp() * (1.0 - crate::nuisance::expit(beta0 + v));
            e_w += f;
            e_wv += f * v;
        }
        [0, 1].map(|a| c.theta(a)[0] + k[a as usize] * e_wv / e_w)
    }

    pub fn true_psi(&self, a: u32, draw_size: usize, seed: u64) -> Result<TruthEstimate> {
        if a > 1 {
            return Err(Error::Config(format!("simulated treatment levels are 0 and 1, got {a}")));
        }
        Ok(self.true_means(draw_size, seed)?[a as usize])
    }
}

fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 256 {
        v.iter().sum()
    } else {
        let (l, r) = v.split_at(v.len() / 2);
        pairwise_sum(l) + pairwise_sum(r)
    }
}
