//! Intercepts chosen so that expected counts hit their targets on a fixed
//! covariate draw.

use crate::error::{Error, Result};
use crate::linalg::dot;
use crate::nuisance::expit;

const BRACKET: f64 = 60.0;

fn bisect(target: f64, mut f: impl FnMut(f64) -> f64) -> Result<f64> {
    let (mut lo, mut hi) = (-BRACKET, BRACKET);
    if f(lo) > target || f(hi) < target {
        return Err(Error::Simulation(format!(
            "expected count {target} cannot be reached with an intercept in [-{BRACKET}, {BRACKET}]"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Intercept `b0` with `sum_i expit(b0 + slopes . x_i)` equal to
/// `target_count` to within half a unit.
pub fn solve_intercept(target_count: f64, slopes: &[f64], covariates: &[Vec<f64>]) -> Result<f64> {
    let lin: Vec<f64> = covariates.iter().map(|x| dot(slopes, x)).collect();
    let expected = |b0: f64| lin.iter().map(|l| expit(b0 + l)).sum::<f64>();
    let b0 = bisect(target_count, expected)?;
    let achieved = expected(b0);
    if (achieved - target_count).abs() > 0.5 {
        return Err(Error::Simulation(format!(
            "intercept search reached expected count {achieved}, target {target_count}"
        )));
    }
    Ok(b0)
}

/// Intercepts of the two non-reference logits of a three-category
/// multinomial model so that weighted expected category shares match
/// `shares`, to a relative tolerance of 1e-3 per category.
///
/// The share equations are the stationarity conditions of the convex
/// function `sum_i w_i log(1 + e2_i + e3_i) - W (t2 g0 + t3 z0)`, which is
/// minimized by damped Newton steps.
pub fn solve_allocation_intercepts(
    slopes_2: &[f64],
    slopes_3: &[f64],
    covariates: &[Vec<f64>],
    weights: &[f64],
    shares: [f64; 3],
) -> Result<(f64, f64)> {
    let total: f64 = weights.iter().sum();
    let l2: Vec<f64> = covariates.iter().map(|x| dot(slopes_2, x)).collect();
    let l3: Vec<f64> = covariates.iter().map(|x| dot(slopes_3, x)).collect();
    // Objective, expected shares and share Jacobian at (g0, z0), per unit weight.
    let evaluate = |g0: f64, z0: f64| -> (f64, [f64; 3], [f64; 3]) {
        let (mut obj, mut p, mut jac) = (0.0, [0.0; 3], [0.0; 3]);
        for i in 0..weights.len() {
            let (a, b) = (g0 + l2[i], z0 + l3[i]);
            let m = a.max(b).max(0.0);
            let (e1, e2, e3) = ((-m).exp(), (a - m).exp(), (b - m).exp());
            let d = e1 + e2 + e3;
            let (p2, p3) = (e2 / d, e3 / d);
            let w = weights[i];
            obj += w * (m + d.ln());
            p[0] += w * e1 / d;
            p[1] += w * p2;
            p[2] += w * p3;
            jac[0] += w * p2 * (1.0 - p2);
            jac[1] -= w * p2 * p3;
            jac[2] += w * p3 * (1.0 - p3);
        }
        obj = obj / total - shares[1] * g0 - shares[2] * z0;
        (obj, p.map(|v| v / total), jac.map(|v| v / total))
    };

    let (mut g0, mut z0) = ((shares[1] / shares[0]).ln(), (shares[2] / shares[0]).ln());
    let (mut obj, mut p, mut jac) = evaluate(g0, z0);
    for _ in 0..100 {
        let (r2, r3) = (p[1] - shares[1], p[2] - shares[2]);
        let det = jac[0] * jac[2] - jac[1] * jac[1];
        if r2.abs().max(r3.abs()) < 1e-12 || !(det > 0.0) {
            break;
        }
        let dg = (jac[2] * r2 - jac[1] * r3) / det;
        let dz = (jac[0] * r3 - jac[1] * r2) / det;
        let mut t = 1.0;
        let mut accepted = false;
        while t > 1e-6 {
            let next = evaluate(g0 - t * dg, z0 - t * dz);
            if next.0 <= obj {
                g0 -= t * dg;
                z0 -= t * dz;
                (obj, p, jac) = next;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        // No decrease means the objective is flat to rounding error.
        if !accepted {
            break;
        }
    }
    for k in 0..3 {
        if !(((p[k] - shares[k]) / shares[k]).abs() <= 1e-3) {
            return Err(Error::Simulation(format!(
                "allocation intercepts give share {} for trial {}, target {}",
                p[k],
                k + 1,
                shares[k]
            )));
        }
    }
    Ok((g0, z0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_slopes_give_logit_of_share() {
        let xs: Vec<Vec<f64>> = (0..100).map(|i| vec![i as f64 / 50.0 - 1.0]).collect();
        let b0 = solve_intercept(25.0, &[0.0], &xs).unwrap();
        assert!((b0 - (1.0f64 / 3.0).ln()).abs() < 1e-8);

        let w = vec![1.0; xs.len()];
        let (g, z) = solve_allocation_intercepts(&[0.0], &[0.0], &xs, &w, [4.0 / 7.0, 2.0 / 7.0, 1.0 / 7.0]).unwrap();
        assert!((g - 0.5f64.ln()).abs() < 1e-8);
        assert!((z - 0.25f64.ln()).abs() < 1e-8);
    }

    #[test]
    fn unreachable_target_is_an_error() {
        let xs = vec![vec![0.0]; 10];
        assert!(solve_intercept(11.0, &[1.0], &xs).is_err());
    }
}
