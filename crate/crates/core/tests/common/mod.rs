#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::StandardNormal;
use transportability::nuisance::Design;
use transportability::rng;
use transportability::{Observation, ObservationTable};

/// Table with `n_trials` trials of `per_trial` rows, `n_target` target rows,
/// `p` standard normal covariates, randomized binary treatment and a linear
/// outcome with noise.
pub fn random_table(seed: u64, n_trials: u32, per_trial: usize, n_target: usize, p: usize) -> ObservationTable {
    let mut r = rng::stream(seed, &[0xfeed]);
    let mut rows = Vec::new();
    for s in 1..=n_trials {
        for i in 0..per_trial {
            let x: Vec<f64> = (0..p).map(|_| r.sample::<f64, _>(StandardNormal) + 0.3 * s as f64).collect();
            let a = (i % 2) as u32;
            let y = 1.0 + x.iter().sum::<f64>() * if a == 1 { -1.0 } else { 0.5 } + r.sample::<f64, _>(StandardNormal);
            rows.push(Observation::trial_row(s, a, y, x));
        }
    }
    for _ in 0..n_target {
        let x: Vec<f64> = (0..p).map(|_| r.sample(StandardNormal)).collect();
        rows.push(Observation::target_row(x));
    }
    ObservationTable::from_rows(rows).unwrap()
}

/// Dense solve by Gaussian elimination with partial pivoting.
#[allow(clippy::needless_range_loop)]
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for c in 0..n {
        let piv = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        a.swap(c, piv);
        b.swap(c, piv);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= f * a[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for c in (0..n).rev() {
        let s: f64 = (c + 1..n).map(|k| a[c][k] * x[k]).sum();
        x[c] = (b[c] - s) / a[c][c];
    }
    x
}

pub fn uniform(r: &mut impl Rng) -> f64 {
    r.random()
}

/// Binary-covariate table in which every covariate cell holds trial rows of
/// both arms, plus random extra trial and target rows.
pub fn discrete_table(seed: u64, p: usize, n: usize) -> ObservationTable {
    let mut r = rng::stream(seed, &[0xd15c]);
    let cells = 1usize << p;
    let bits = |c: usize| -> Vec<f64> { (0..p).map(|j| ((c >> j) & 1) as f64).collect() };
    let mut rows = Vec::new();
    for c in 0..cells {
        for a in 0..2 {
            let y = c as f64 + a as f64 + r.random::<f64>();
            rows.push(Observation::trial_row(1 + r.random_range(0..2), a, y, bits(c)));
        }
        rows.push(Observation::target_row(bits(c)));
    }
    while rows.len() < n {
        let c = r.random_range(0..cells);
        if r.random::<f64>() < 0.5 {
            let a = r.random_range(0..2);
            let y = (c * c) as f64 * 0.1 - a as f64 + 2.0 * r.random::<f64>();
            rows.push(Observation::trial_row(1 + r.random_range(0..2), a, y, bits(c)));
        } else {
            rows.push(Observation::target_row(bits(c)));
        }
    }
    ObservationTable::from_rows(rows).unwrap()
}

pub fn saturated(p: usize) -> Design {
    let terms: Vec<Vec<usize>> = (1usize..(1 << p))
        .map(|m| (0..p).filter(|j| (m >> j) & 1 == 1).collect())
        .collect();
    Design::from_terms(p, terms).unwrap()
}

/// Average over target rows of the trial-arm outcome mean in the row's cell.
pub fn stratified_oracle(t: &ObservationTable, a: u32) -> f64 {
    let mut cell: BTreeMap<Vec<u64>, (f64, f64)> = BTreeMap::new();
    let key = |x: &[f64]| x.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    for i in 0..t.len() {
        if t.participates(i) && t.treatment(i) == Some(a) {
            let e = cell.entry(key(t.x(i))).or_default();
            e.0 += t.outcome(i).unwrap();
            e.1 += 1.0;
        }
    }
    let mut total = 0.0;
    for i in 0..t.len() {
        if !t.participates(i) {
            let (s, c) = cell[&key(t.x(i))];
            total += s / c;
        }
    }
    total / t.n_target() as f64
}
