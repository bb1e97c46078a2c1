//! Self-supervised collection with random grasps on soft toys, saved to a
//! dataset directory and read back.
//!
//! `cargo run --release --example collect_dataset -- [attempts] [dir]`

use grasplab::collect::{collect, load_dataset, save_dataset, CollectConfig};
use grasplab::gripper::GripperSpec;
use grasplab::scene::{Material, ObjectSet};
use std::path::PathBuf;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let attempts: usize = args.next().map(|a| a.parse()).transpose()?.unwrap_or(500);
    let dir = args.next().map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("grasplab-collect"));

    let cfg = CollectConfig::desk(vec![ObjectSet::SoftToys25], GripperSpec::two_finger(Material::Rigid), attempts, 7);
    let ds = collect(&cfg)?;
    let c = &ds.manifest.counts;
    println!("{}: {} attempts, {} successes ({:.1}%)", cfg.tag(), c.attempts, c.successes, 100.0 * ds.success_rate());

    save_dataset(&ds, &dir)?;
    let back = load_dataset(&dir)?;
    assert_eq!(back.records.len(), ds.records.len());
    println!("saved and reloaded {} records from {}", back.records.len(), dir.display());
    Ok(())
}
