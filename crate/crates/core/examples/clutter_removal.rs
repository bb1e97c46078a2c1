//! Clutter removal with the oracle-backed policy: five trials of ten mixed
//! objects under a budget of twenty attempts.

use grasplab::bench::{run_clutter_removal, ExperimentSpec};
use grasplab::config::Preset;
use grasplab::policy::Policy;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = ExperimentSpec::named("t5", Preset::desk())?;
    let report = run_clutter_removal(&spec, &Policy::Oracle { window: 9 })?;
    for t in &report.trials {
        println!(
            "trial {}: {} objects, {}/{} picks, cleared {}",
            t.trial, t.objects, t.metrics.successes, t.metrics.attempts, t.cleared
        );
    }
    let all = report.overall();
    println!("success rate {:.3}, t_c {:.4} s, {:.1} picks per hour", all.success_rate, all.t_c, all.mpph);
    Ok(())
}
