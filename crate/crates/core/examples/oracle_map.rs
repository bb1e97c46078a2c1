//! Brute-force success map of one grasp scene, printed as a character grid
//! of how many of the 18 closing angles succeed at each centre.

use grasplab::geometry::{Aabb, Vec2};
use grasplab::gripper::GripperSpec;
use grasplab::oracle::{brute_force_success_map, GridSpec, OracleConfig};
use grasplab::scene::{Material, ObjectModel, PlacedObject, Pose2D, Scene, ShapeSpec};

fn main() {
    let workspace = Aabb::new(Vec2::new(0.0, 0.0), Vec2::new(400.0, 400.0));
    let box_ = ObjectModel {
        id: "box".into(),
        shape: ShapeSpec::Rect { w: 90.0, h: 38.0 },
        material: Material::Rigid,
        height_mm: 40.0,
        mass_g: 300.0,
        color: [0.8, 0.3, 0.2],
    };
    let ball = ObjectModel {
        id: "ball".into(),
        shape: ShapeSpec::Circle { radius: 30.0 },
        material: Material::Soft,
        height_mm: 55.0,
        mass_g: 60.0,
        color: [0.2, 0.5, 0.8],
    };
    let scene = Scene::new(
        workspace,
        vec![
            PlacedObject { model: box_, pose: Pose2D::new(150.0, 200.0, 0.5) },
            PlacedObject { model: ball, pose: Pose2D::new(260.0, 210.0, 0.0) },
        ],
    )
    .expect("objects fit");

    let grid = GridSpec::over(Aabb::new(Vec2::new(80.0, 130.0), Vec2::new(320.0, 280.0)), 48, 30);
    for (name, gripper) in [
        ("rigid 2-finger", GripperSpec::two_finger(Material::Rigid)),
        ("soft 4-finger", GripperSpec::four_finger(Material::Soft)),
    ] {
        let map = brute_force_success_map(&scene, &gripper, &grid, 18, &OracleConfig::default());
        println!("{name}: {} successful grasps of {}", map.count(), map.cells.len());
        for j in (0..grid.ny).rev() {
            let row: String = (0..grid.nx)
                .map(|i| match (0..18).filter(|&k| map.get(i, j, k)).count() {
                    0 => '.',
                    n if n < 6 => '+',
                    n if n < 18 => '*',
                    _ => '#',
                })
                .collect();
            println!("  {row}");
        }
    }
}
