//! Collects a small dataset, trains the desk network on it and reports the
//! per-epoch loss and accuracy.

use grasplab::collect::{collect, CollectConfig};
use grasplab::config::Preset;
use grasplab::gripper::GripperSpec;
use grasplab::learn::{train, ModelParams, TrainConfig};
use grasplab::scene::{Material, ObjectSet};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let preset = Preset::desk();
    let cfg = CollectConfig::desk(vec![ObjectSet::SoftToys25], GripperSpec::two_finger(Material::Rigid), 1500, 3);
    let ds = collect(&cfg)?;
    println!("{} records, {} successes", ds.records.len(), ds.manifest.counts.successes);

    let init = ModelParams::init(preset.net.clone(), 3)?;
    let tc = TrainConfig { epochs: 8, seed: 3, ..TrainConfig::default() };
    let (model, curve) = train(&init, &ds.records, &tc)?;
    for e in &curve {
        println!("epoch {:2}  loss {:.4}  accuracy {:.3}", e.epoch, e.mean_loss, e.train_accuracy);
    }
    println!("model hash {}", model.content_hash());
    Ok(())
}
