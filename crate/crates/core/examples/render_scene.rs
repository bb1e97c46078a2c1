//! Renders a clutter scene and one grasp patch as binary PPM files.
//!
//! `cargo run --release --example render_scene -- [out_dir]`

use grasplab::bench::{clutter_scene, ExperimentSpec};
use grasplab::config::Preset;
use grasplab::render::{render, ImageGrid};
use std::io::Write;
use std::path::{Path, PathBuf};

fn write_ppm(img: &ImageGrid, path: &Path) -> std::io::Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write!(f, "P6\n{} {}\n255\n", img.width(), img.height())?;
    let bytes: Vec<u8> = img.data().iter().map(|&v| (v * 255.0).round() as u8).collect();
    f.write_all(&bytes)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(std::env::temp_dir);
    std::fs::create_dir_all(&out)?;
    let preset = Preset::desk();
    let spec = ExperimentSpec::named("t5", preset.clone())?;
    let scene = clutter_scene(&spec, 4)?;
    let image = render(&scene, &preset.camera);
    write_ppm(&image, &out.join("scene.ppm"))?;

    let first = &scene.objects[0];
    let center = grasplab::geometry::Vec2::new(first.pose.x, first.pose.y);
    let patch = preset.patch.extract(&image, &preset.camera, center);
    write_ppm(&patch, &out.join("patch.ppm"))?;
    println!("{} objects; wrote scene.ppm and the {} px patch of {} to {}", scene.len(), patch.width(), first.model.id, out.display());
    Ok(())
}
