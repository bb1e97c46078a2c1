//! One fully convolutional pass against 1000 sampled crops on the same
//! 256 px image.

use grasplab::bench::{clutter_scene, ExperimentSpec};
use grasplab::config::Preset;
use grasplab::learn::ModelParams;
use grasplab::policy::{dense_policy, sampled_policy, Observation};
use grasplab::render::render;
use std::time::Instant;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let preset = Preset::desk();
    let spec = ExperimentSpec::named("t5", preset.clone())?;
    let scene = clutter_scene(&spec, 1)?;
    let image = render(&scene, &preset.camera);
    // untrained weights: the timing does not depend on them
    let model = ModelParams::init(preset.net.clone(), 1)?;
    let obs = Observation { image: &image, camera: &preset.camera, workspace: preset.workspace, seed: 1, truth: None };

    let t = Instant::now();
    let dense = dense_policy(&model, &obs, &preset.patch)?;
    let t_dense = t.elapsed();
    let t = Instant::now();
    let sampled = sampled_policy(&model, &obs, &preset.patch, 1000, false)?;
    let t_sampled = t.elapsed();

    println!("dense   {:>8.2?}  grasp at ({:.0}, {:.0}) bin {}", t_dense, dense.u.x, dense.u.y, dense.bin.index());
    println!("sampled {:>8.2?}  grasp at ({:.0}, {:.0}) bin {}", t_sampled, sampled.u.x, sampled.u.y, sampled.bin.index());
    Ok(())
}
