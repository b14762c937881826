//! Percentile bootstrap intervals for the augmented estimator.
//!
//! cargo run --release --example bootstrap_interval -- [replicates]

use transportability::simulation::{Scenario, ScenarioConfig};
use transportability::{bootstrap_ci, BootstrapConfig, EstimatorKind};

fn main() -> transportability::Result<()> {
    let replicates = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(200);
    let scenario = Scenario::new(ScenarioConfig::new(10_000, 2000, true, true))?;
    let table = scenario.generate(8, 0)?.table;
    let config = BootstrapConfig {
        replicates,
        master_seed: 3,
        ..Default::default()
    };
    let report = bootstrap_ci(&table, &scenario.correct_spec(), EstimatorKind::Augmented, &[0, 1], &[(1, 0)], &config)?;
    println!("{}", report.to_json()?);
    Ok(())
}
