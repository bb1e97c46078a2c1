//! Single-object evaluation of the bounding-box heuristic, the random
//! policy and the oracle-backed upper bound on both object levels.

use grasplab::bench::{run_single_object_eval, ExperimentSpec};
use grasplab::config::Preset;
use grasplab::policy::Policy;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = ExperimentSpec::named("t5", Preset::desk())?;
    for policy in [Policy::Random, Policy::Heuristic, Policy::Oracle { window: 9 }] {
        let report = run_single_object_eval(&spec, &policy)?;
        println!("{}", policy.name());
        for row in &report.objects {
            println!("  {:16} {:>2}/{}", row.object, row.metrics.successes, row.metrics.attempts);
        }
        for a in &report.aggregates {
            println!("  {:16} {:.3}", a.name, a.metrics.success_rate);
        }
    }
    Ok(())
}
