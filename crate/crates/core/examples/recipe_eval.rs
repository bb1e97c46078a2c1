//! Trains one named recipe end to end (collection included) and compares
//! the dense policy with the heuristic on both object levels.
//!
//! `cargo run --release --example recipe_eval -- t3-precise 0`

use grasplab::bench::{run_single_object_eval, train_recipe, ExperimentSpec, SourceCache};
use grasplab::config::Preset;
use grasplab::policy::Policy;
use std::sync::Arc;
use std::time::Instant;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let name = args.next().unwrap_or_else(|| "t3-precise".into());
    let seed: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(0);
    let mut spec = ExperimentSpec::named(&name, Preset::desk())?;
    spec.seeds = vec![seed];

    let t = Instant::now();
    let (model, data, curve) = train_recipe(&spec, seed, &mut SourceCache::new())?;
    let last = curve.last().expect("at least one epoch");
    println!(
        "{name}: {} records, trained in {:.0} s, final loss {:.3}",
        data.len(),
        t.elapsed().as_secs_f64(),
        last.mean_loss
    );

    let dense = Policy::Dense { model: Arc::new(model), patch: spec.preset.patch };
    for policy in [dense, Policy::Heuristic] {
        let report = run_single_object_eval(&spec, &policy)?;
        let rates: Vec<String> =
            report.aggregates.iter().map(|a| format!("{} {:.3}", a.name, a.metrics.success_rate)).collect();
        println!("{:10} {}", policy.name(), rates.join("  "));
    }
    Ok(())
}
