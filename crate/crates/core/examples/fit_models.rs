//! Fits the three kinds of working model on a simulated cohort and prints
//! the coefficients.

use transportability::nuisance::{fit_logistic, fit_multinomial, fit_ols, Design, IrlsOptions};
use transportability::simulation::{Scenario, ScenarioConfig};

fn main() -> transportability::Result<()> {
    let scenario = Scenario::new(ScenarioConfig::new(20_000, 2000, false, false))?;
    let table = scenario.generate(1, 0)?.table;
    let design = Design::main_effects(table.n_covariates());
    let opts = IrlsOptions::default();

    // Participation: everyone.
    let rows: Vec<&[f64]> = (0..table.len()).map(|i| table.x(i)).collect();
    let r: Vec<bool> = (0..table.len()).map(|i| table.participates(i)).collect();
    let participation = fit_logistic(&design, rows.iter().copied(), &r, &opts)?;
    println!("participation {:.3?} ({} iterations)", participation.coefficients, participation.iterations);
    println!("  generating intercept {:.3}, slopes ln 2 = {:.3}", scenario.intercepts.beta0, 2f64.ln());

    // Trial allocation among participants.
    let trial_rows: Vec<usize> = (0..table.len()).filter(|&i| table.participates(i)).collect();
    let labels: Vec<u32> = trial_rows.iter().map(|&i| table.trial(i)).collect();
    let allocation = fit_multinomial(&design, trial_rows.iter().map(|&i| table.x(i)), &labels, &opts)?;
    println!("allocation {:.3?}", allocation.coefficients);

    // Outcome within the treated.
    let treated: Vec<usize> = trial_rows.iter().copied().filter(|&i| table.treatment(i) == Some(1)).collect();
    let y: Vec<f64> = treated.iter().map(|&i| table.outcome(i).unwrap()).collect();
    let outcome = fit_ols(&design, treated.iter().map(|&i| table.x(i)), &y)?;
    println!("outcome under a = 1 {:.3?}, generating {:?}", outcome.coefficients, scenario.config.theta(1));
    Ok(())
}
