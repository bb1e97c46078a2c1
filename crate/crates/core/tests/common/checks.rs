//! Exhaustive grid checks shared by the property tests and the acceptance
//! harness. Each returns a short summary or the first violation.

use super::{grid_over, random_scene, reference_map};
use grasplab::geometry::{Aabb, Vec2};
use grasplab::gripper::{GripperSpec, InteractionClass};
use grasplab::oracle::{
    bin_center, brute_force_success_map, execute_grasp_logged, GraspConfig, GraspOutcome, GridSpec, OracleConfig,
    SuccessMap,
};
use grasplab::scene::{Material, ObjectModel, PlacedObject, Pose2D, Scene, ShapeSpec};

pub const BINS: usize = 18;
pub const SCENES: u64 = 10;

pub fn grippers() -> Vec<GripperSpec> {
    let mut g = Vec::new();
    for fingers in [2, 4] {
        for m in [Material::Rigid, Material::Soft] {
            g.push(GripperSpec::new(fingers, m));
        }
    }
    g
}

fn subset(small: &SuccessMap, big: &SuccessMap) -> Option<usize> {
    (0..small.cells.len()).find(|&c| small.cells[c] && !big.cells[c])
}

pub fn oracle_equivalence() -> Result<String, String> {
    let cfg = OracleConfig::default();
    let (mut cells, mut successes) = (0, 0);
    for seed in 0..SCENES {
        let scene = random_scene(seed);
        let grid = grid_over(&scene);
        for g in grippers() {
            let lib = brute_force_success_map(&scene, &g, &grid, BINS, &cfg);
            let reference = reference_map(&scene, &g, &grid, BINS, &cfg);
            if lib.cells.len() != reference.len() {
                return Err(format!("scene {seed}: map sizes differ"));
            }
            if let Some(c) = (0..reference.len()).find(|&c| lib.cells[c] != reference[c]) {
                return Err(format!("scene {seed}, {}F {:?}: cell {c} differs", g.n_fingers, g.material));
            }
            cells += reference.len();
            successes += lib.count();
        }
    }
    Ok(format!("{SCENES} scenes x 4 grippers, {cells} grasps identical ({successes} successes)"))
}

pub fn estops_only_rigid_rigid() -> Result<String, String> {
    let cfg = OracleConfig::default();
    let mut stops = 0;
    for seed in 0..SCENES {
        let scene = random_scene(seed);
        let grid = grid_over(&scene);
        for g in grippers() {
            for i in 0..grid.nx {
                for j in 0..grid.ny {
                    let p = grid.cell_center(i, j);
                    for k in 0..BINS {
                        let u = GraspConfig { x: p.x, y: p.y, phi: bin_center(k, BINS) };
                        let (outcome, class) = execute_grasp_logged(&scene, &g, &u, &cfg);
                        if outcome == GraspOutcome::EmergencyStop {
                            stops += 1;
                            if class != Some(InteractionClass::RigidRigid) || g.material != Material::Rigid {
                                return Err(format!("scene {seed}: stop with {class:?} at {u:?}"));
                            }
                        }
                    }
                }
            }
        }
    }
    if stops == 0 {
        return Err("no emergency stop occurred".into());
    }
    Ok(format!("{stops} stops, all rigid on rigid"))
}

pub fn soft_fingers_dominate() -> Result<String, String> {
    let cfg = OracleConfig::default();
    let (mut rigid_total, mut soft_total) = (0, 0);
    for seed in 0..SCENES {
        let scene = random_scene(seed);
        let grid = grid_over(&scene);
        for fingers in [2, 4] {
            let rigid = brute_force_success_map(&scene, &GripperSpec::new(fingers, Material::Rigid), &grid, BINS, &cfg);
            let soft = brute_force_success_map(&scene, &GripperSpec::new(fingers, Material::Soft), &grid, BINS, &cfg);
            if let Some(c) = subset(&rigid, &soft) {
                return Err(format!("scene {seed}, {fingers}F: rigid succeeds at cell {c}, soft does not"));
            }
            rigid_total += rigid.count();
            soft_total += soft.count();
        }
    }
    Ok(format!("rigid {rigid_total} successes, soft {soft_total}"))
}

fn soft_copy(scene: &Scene) -> Scene {
    let objects = scene
        .objects
        .iter()
        .map(|o| PlacedObject { model: ObjectModel { material: Material::Soft, ..o.model.clone() }, pose: o.pose })
        .collect();
    Scene::new(scene.workspace, objects).expect("same placement")
}

/// Single soft objects no wider than the opening, at cells inside the
/// footprint.
pub fn soft_objects_ignore_angle() -> Result<String, String> {
    let cfg = OracleConfig::default();
    let mut checked = 0;
    for seed in 0..SCENES {
        let scene = random_scene(seed);
        for o in &scene.objects {
            let fp = o.footprint();
            let poly = fp.to_polygon();
            let v = poly.vertices();
            let diameter = v.iter().flat_map(|a| v.iter().map(move |b| (*a - *b).norm())).fold(0.0, f64::max);
            if diameter > 160.0 {
                continue;
            }
            let single = soft_copy(&Scene::new(scene.workspace, vec![o.clone()]).expect("one object"));
            let grid = grid_over(&single);
            for g in grippers() {
                let map = brute_force_success_map(&single, &g, &grid, BINS, &cfg);
                for i in 0..grid.nx {
                    for j in 0..grid.ny {
                        if !fp.contains(grid.cell_center(i, j)) {
                            continue;
                        }
                        checked += 1;
                        let first = map.get(i, j, 0);
                        if (0..BINS).any(|k| map.get(i, j, k) != first) {
                            return Err(format!("scene {seed}, {}: cell ({i}, {j}) depends on the angle", o.model.id));
                        }
                    }
                }
            }
        }
    }
    if checked < 100 {
        return Err(format!("only {checked} cells inside soft footprints"));
    }
    Ok(format!("{checked} interior cells constant over {BINS} bins"))
}

pub fn four_fingers_cover_two_on_circles() -> Result<String, String> {
    let cfg = OracleConfig::default();
    let workspace = Aabb::new(Vec2::new(0.0, 0.0), Vec2::new(260.0, 260.0));
    let grid = GridSpec::over(Aabb::new(Vec2::new(67.0, 71.0), Vec2::new(191.0, 195.0)), 21, 21);
    let (mut two_total, mut four_total) = (0, 0);
    for (n, radius) in [12.0, 18.0, 25.0, 30.0, 35.0].into_iter().enumerate() {
        for material in [Material::Rigid, Material::Soft] {
            let model = ObjectModel {
                id: "disc".into(),
                shape: ShapeSpec::Circle { radius },
                material,
                height_mm: 30.0 + 8.0 * n as f64,
                mass_g: 80.0,
                color: [0.5, 0.5, 0.5],
            };
            let pose = Pose2D::new(127.0 + n as f64, 131.0, 0.3);
            let scene = Scene::new(workspace, vec![PlacedObject { model, pose }]).expect("disc fits");
            for finger in [Material::Rigid, Material::Soft] {
                let two = brute_force_success_map(&scene, &GripperSpec::new(2, finger), &grid, BINS, &cfg);
                let four = brute_force_success_map(&scene, &GripperSpec::new(4, finger), &grid, BINS, &cfg);
                if two.count() == 0 {
                    return Err(format!("r {radius}: two fingers never succeed"));
                }
                if let Some(c) = subset(&two, &four) {
                    return Err(format!("r {radius} {material:?} object, {finger:?} fingers: cell {c}"));
                }
                two_total += two.count();
                four_total += four.count();
            }
        }
    }
    Ok(format!("2F {two_total} successes, 4F {four_total}"))
}
