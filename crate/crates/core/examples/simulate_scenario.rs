//! Bias and variance of the three estimators in one benchmark scenario.
//!
//! cargo run --release --example simulate_scenario -- [replications] [n_trial_total] [varying]

use transportability::simulation::{run_grid, RunOptions, ScenarioConfig};
use transportability::EstimatorKind;

fn main() -> transportability::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let replications = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(200);
    let n_trial_total = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1000);
    let varying = args.get(3).is_some_and(|s| s == "varying");

    let config = ScenarioConfig::new(10_000, n_trial_total, true, varying);
    let options = RunOptions {
        replications,
        master_seed: 2024,
        oracle_draw_size: None,
        estimators: EstimatorKind::ALL.to_vec(),
        workers: None,
    };
    let start = std::time::Instant::now();
    let summary = run_grid(&[config], &options)?;
    let s = &summary.scenarios[0];
    println!(
        "intercepts: beta0 {:.4} gamma0 {:.4} zeta0 {:.4}",
        s.intercepts.beta0, s.intercepts.gamma0, s.intercepts.zeta0
    );
    println!("truth: psi(0) {:.4} psi(1) {:.4}", s.truth[0].value, s.truth[1].value);
    println!("mean trial sizes {:?}, target {:.1}", s.mean_trial_sizes, s.mean_target_size);
    for c in &s.cells {
        println!(
            "a={} {:<10} bias {:+.4} (se {:.4})  variance {:.4}",
            c.arm, c.estimator, c.bias, c.bias_std_error, c.variance
        );
    }
    println!("{} replications in {:.1?}", replications, start.elapsed());
    Ok(())
}
