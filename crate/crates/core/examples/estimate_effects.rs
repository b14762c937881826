//! Point estimates, influence-function standard errors and contrasts of all
//! three estimators on one simulated cohort.

use transportability::simulation::{Scenario, ScenarioConfig};
use transportability::{estimate, EstimatorKind};

fn main() -> transportability::Result<()> {
    let scenario = Scenario::new(ScenarioConfig::new(10_000, 5000, true, false))?;
    let table = scenario.generate(42, 0)?.table;
    let truth = scenario.exact_means();
    println!("target rows {}, trial rows {}", table.n_target(), table.n_trial_rows());
    println!("true psi(0) {:.4} psi(1) {:.4} delta {:.4}", truth[0], truth[1], truth[1] - truth[0]);

    for kind in EstimatorKind::ALL {
        let report = estimate(&table, &scenario.main_effects_spec(), kind, &[0, 1], &[(1, 0)])?;
        for arm in &report.arms {
            let se = arm.variance.map(|v| format!(" (se {:.4})", v.sqrt())).unwrap_or_default();
            println!("{kind:?} psi({}) {:.4}{se}", arm.level, arm.estimate);
        }
        println!("{kind:?} delta {:.4}", report.contrast(1, 0).unwrap().estimate);
    }
    Ok(())
}
