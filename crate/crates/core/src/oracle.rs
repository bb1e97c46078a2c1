//! Deterministic grasp-outcome simulator.
//!
//! A grasp attempt runs three stages. The pads first descend at full
//! opening; touching a tall object is an emergency stop for rigid pads on
//! rigid objects and is otherwise absorbed by the soft party up to its
//! conforming depth. The jaws then close along the grasp axis onto the
//! first object met from each side. Finally the closing axis must line up
//! with the target's narrow direction and the grasp centre must sit close
//! enough to the target, within the tolerances of the finger/object pair.

use crate::geometry::{axis_distance, Aabb, ConvexPolygon, Vec2};
use crate::gripper::{classify_interaction, GripperSpec, InteractionClass};
use crate::scene::{polygon_extent, Band, Footprint, Material, Scene};
use crate::seeding::{derive_seed, mix64};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GraspError {
    #[error("grasp angle {0} outside [0, π)")]
    PhiOutOfRange(f64),
    #[error("grasp centre ({0}, {1}) not finite")]
    NonFinite(f64, f64),
}

/// Planar grasp: centre in mm and closing-axis angle in `[0, π)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraspConfig {
    pub x: f64,
    pub y: f64,
    pub phi: f64,
}

impl GraspConfig {
    pub fn new(x: f64, y: f64, phi: f64) -> Result<Self, GraspError> {
        if !(0.0..PI).contains(&phi) {
            return Err(GraspError::PhiOutOfRange(phi));
        }
        if !x.is_finite() || !y.is_finite() {
            return Err(GraspError::NonFinite(x, y));
        }
        Ok(Self { x, y, phi })
    }

    pub fn center(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    pub fn inside(&self, workspace: &Aabb) -> bool {
        workspace.contains(self.center())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FailureReason {
    NoContact,
    TooWide,
    BadAlignment,
    MultiObjectPinch,
    InsufficientPurchase,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum GraspOutcome {
    Success { object: String },
    Failure { reason: FailureReason },
    EmergencyStop,
}

impl GraspOutcome {
    pub fn is_success(&self) -> bool {
        matches!(self, GraspOutcome::Success { .. })
    }

    fn fail(reason: FailureReason) -> Self {
        GraspOutcome::Failure { reason }
    }
}

/// Optional Bernoulli flip of outcomes that have a target object.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelNoise {
    pub rate: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    /// Objects at or below this height never obstruct descending pads.
    pub descent_clearance: f64,
    /// Conforming depth of soft objects when pads land on them.
    pub object_soft_depth: f64,
    #[serde(default)]
    pub label_noise: Option<LabelNoise>,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self { descent_clearance: 25.0, object_soft_depth: 20.0, label_noise: None }
    }
}

/// Provenance of one attempt, written as one JSON line per attempt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttemptLog {
    pub u: GraspConfig,
    pub gripper: GripperSpec,
    pub outcome: GraspOutcome,
    /// Interaction with the contacted (or nearest) object, if any.
    pub interaction: Option<InteractionClass>,
    pub scene_hash: String,
    pub seed: u64,
}

/// Step of the narrow-axis sweep.
pub const WIDTH_SWEEP_STEPS: usize = 180;

struct Prepared<'a> {
    scene: &'a Scene,
    fps: Vec<Footprint>,
    polys: Vec<ConvexPolygon>,
    boxes: Vec<Aabb>,
}

impl<'a> Prepared<'a> {
    fn new(scene: &'a Scene) -> Self {
        let fps: Vec<Footprint> = scene.objects.iter().map(|o| o.footprint()).collect();
        let polys = fps.iter().map(|f| f.to_polygon()).collect();
        let boxes = fps.iter().map(|f| f.aabb()).collect();
        Self { scene, fps, polys, boxes }
    }

    fn extent(&self, idx: usize, dir: Vec2, band: Band) -> f64 {
        match &self.fps[idx] {
            f @ Footprint::Circle { .. } => f.extent_along(dir, band),
            _ => polygon_extent(&self.polys[idx], dir, band),
        }
    }

    /// Direction in `[0, π)` minimising the banded extent, 1° sweep, first
    /// minimum wins.
    fn narrow_axis(&self, idx: usize, center: Vec2, span: f64) -> f64 {
        let mut best = (f64::INFINITY, 0usize);
        for k in 0..WIDTH_SWEEP_STEPS {
            let ang = k as f64 * PI / WIDTH_SWEEP_STEPS as f64;
            let w = self.extent(idx, Vec2::from_angle(ang), Band { center, width: span });
            if w < best.0 {
                best = (w, k);
            }
        }
        best.1 as f64 * PI / WIDTH_SWEEP_STEPS as f64
    }
}

/// Result of the geometric stages, before any label noise.
struct Evaluation {
    outcome: GraspOutcome,
    target: Option<usize>,
    contact: Option<usize>,
}

fn evaluate(
    prep: &Prepared<'_>,
    gripper: &GripperSpec,
    u: &GraspConfig,
    cfg: &OracleConfig,
    axis_cache: &mut Vec<(usize, f64)>,
) -> Evaluation {
    let objects = &prep.scene.objects;
    let dir = Vec2::from_angle(u.phi);
    let center = u.center();

    // descent at full opening
    let pads = gripper.pad_polygons(u, gripper.max_open).expect("max_open is in range");
    let pad_boxes: Vec<Aabb> = pads.iter().map(|p| p.aabb()).collect();
    let mut blocked: Option<usize> = None;
    for (i, obj) in objects.iter().enumerate() {
        if obj.model.height_mm <= cfg.descent_clearance {
            continue;
        }
        for (pad, pb) in pads.iter().zip(&pad_boxes) {
            if !pb.overlaps(&prep.boxes[i]) {
                continue;
            }
            let depth = pad.penetration_depth(&prep.polys[i]);
            if depth <= 0.0 {
                continue;
            }
            let class = classify_interaction(gripper.material, obj.model.material);
            if class == InteractionClass::RigidRigid {
                return Evaluation { outcome: GraspOutcome::EmergencyStop, target: None, contact: Some(i) };
            }
            let mut absorb: f64 = 0.0;
            if gripper.material == Material::Soft {
                absorb = absorb.max(gripper.soft_depth);
            }
            if obj.model.material == Material::Soft {
                absorb = absorb.max(cfg.object_soft_depth);
            }
            if depth > absorb && blocked.is_none() {
                blocked = Some(i);
            }
        }
    }
    if let Some(i) = blocked {
        return Evaluation { outcome: GraspOutcome::fail(FailureReason::NoContact), target: None, contact: Some(i) };
    }

    // closing along the pad-centre segment
    let half = 0.5 * gripper.max_open;
    let a = center - dir * half;
    let b = center + dir * half;
    let mut from_a: Option<(f64, usize)> = None;
    let mut from_b: Option<(f64, usize)> = None;
    for (i, fp) in prep.fps.iter().enumerate() {
        if let Some((t0, t1)) = fp.segment_interval(a, b) {
            if from_a.map_or(true, |(t, _)| t0 < t) {
                from_a = Some((t0, i));
            }
            if from_b.map_or(true, |(t, _)| t1 > t) {
                from_b = Some((t1, i));
            }
        }
    }
    let (ia, ib) = match (from_a, from_b) {
        (Some((_, ia)), Some((_, ib))) => (ia, ib),
        _ => return Evaluation { outcome: GraspOutcome::fail(FailureReason::NoContact), target: None, contact: None },
    };
    if ia != ib {
        return Evaluation {
            outcome: GraspOutcome::fail(FailureReason::MultiObjectPinch),
            target: None,
            contact: Some(ia),
        };
    }
    let t = ia;
    let span = gripper.effective_span();
    let width = prep.extent(t, dir, Band { center, width: span });
    if width > gripper.max_open || width < gripper.min_close {
        return Evaluation { outcome: GraspOutcome::fail(FailureReason::TooWide), target: Some(t), contact: Some(t) };
    }

    // alignment and purchase
    let model = &objects[t].model;
    let (pos_tol, ang_tol) = gripper.tolerance_budget(model);
    let beta = match prep.fps[t] {
        Footprint::Circle { .. } => 0.0,
        _ => {
            let axis = match axis_cache.iter().find(|(i, _)| *i == t) {
                Some(&(_, ax)) => ax,
                None => {
                    let ax = prep.narrow_axis(t, center, span);
                    axis_cache.push((t, ax));
                    ax
                }
            };
            axis_distance(u.phi, axis)
        }
    };
    let outcome = if beta > ang_tol {
        GraspOutcome::fail(FailureReason::BadAlignment)
    } else if prep.fps[t].distance(center) > pos_tol {
        GraspOutcome::fail(FailureReason::InsufficientPurchase)
    } else {
        GraspOutcome::Success { object: model.id.clone() }
    };
    Evaluation { outcome, target: Some(t), contact: Some(t) }
}

fn apply_noise(eval: Evaluation, scene: &Scene, u: &GraspConfig, noise: &LabelNoise) -> Evaluation {
    let (target, outcome) = match (eval.target, &eval.outcome) {
        (Some(t), GraspOutcome::Success { .. }) => (t, GraspOutcome::fail(FailureReason::InsufficientPurchase)),
        (Some(t), GraspOutcome::Failure { .. }) => {
            (t, GraspOutcome::Success { object: scene.objects[t].model.id.clone() })
        }
        _ => return eval,
    };
    let id = scene.objects[target].model.id.bytes().fold(0u64, |h, b| mix64(h ^ b as u64));
    let h = derive_seed(noise.seed, &[u.x.to_bits(), u.y.to_bits(), u.phi.to_bits(), id]);
    let draw = (h >> 11) as f64 / (1u64 << 53) as f64;
    if draw < noise.rate {
        Evaluation { outcome, target: Some(target), contact: eval.contact }
    } else {
        eval
    }
}

fn finish(scene: &Scene, outcome: &GraspOutcome) -> Scene {
    match outcome {
        GraspOutcome::Success { object } => scene.remove_object(object).expect("target is in the scene"),
        _ => scene.clone(),
    }
}

/// Runs one grasp attempt. Total: every input yields an outcome; on
/// success the grasped object is removed from the returned scene.
pub fn execute_grasp(scene: &Scene, gripper: &GripperSpec, u: &GraspConfig, cfg: &OracleConfig) -> (GraspOutcome, Scene) {
    let (outcome, _) = execute_grasp_logged(scene, gripper, u, cfg);
    let next = finish(scene, &outcome);
    (outcome, next)
}

/// Outcome plus the interaction class of the contacted object.
pub fn execute_grasp_logged(
    scene: &Scene,
    gripper: &GripperSpec,
    u: &GraspConfig,
    cfg: &OracleConfig,
) -> (GraspOutcome, Option<InteractionClass>) {
    let prep = Prepared::new(scene);
    let mut cache = Vec::new();
    let mut eval = evaluate(&prep, gripper, u, cfg, &mut cache);
    if let Some(noise) = &cfg.label_noise {
        eval = apply_noise(eval, scene, u, noise);
    }
    let class = eval.contact.map(|i| classify_interaction(gripper.material, scene.objects[i].model.material));
    (eval.outcome, class)
}

/// Grid of grasp centres over a rectangular region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub region: Aabb,
    pub nx: usize,
    pub ny: usize,
}

impl GridSpec {
    pub fn over(region: Aabb, nx: usize, ny: usize) -> Self {
        Self { region, nx, ny }
    }

    pub fn cell_center(&self, i: usize, j: usize) -> Vec2 {
        Vec2::new(
            self.region.min.x + (i as f64 + 0.5) * self.region.width() / self.nx as f64,
            self.region.min.y + (j as f64 + 0.5) * self.region.height() / self.ny as f64,
        )
    }
}

/// Bin-centre angle for bin `k` of `n_bins`.
pub fn bin_center(k: usize, n_bins: usize) -> f64 {
    (k as f64 + 0.5) * PI / n_bins as f64
}

/// Success indicator over `nx × ny × n_bins` grasps, indexed
/// `(i * ny + j) * n_bins + k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuccessMap {
    pub nx: usize,
    pub ny: usize,
    pub n_bins: usize,
    pub cells: Vec<bool>,
}

impl SuccessMap {
    pub fn get(&self, i: usize, j: usize, k: usize) -> bool {
        self.cells[(i * self.ny + j) * self.n_bins + k]
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }
}

/// Exhaustive evaluation of `execute_grasp` at every cell centre and bin
/// centre. Cells are independent and may be evaluated in any order.
pub fn brute_force_success_map(
    scene: &Scene,
    gripper: &GripperSpec,
    grid: &GridSpec,
    n_bins: usize,
    cfg: &OracleConfig,
) -> SuccessMap {
    assert!(grid.nx >= 1 && grid.ny >= 1 && n_bins >= 1);
    let prep = Prepared::new(scene);
    let cells: Vec<bool> = (0..grid.nx * grid.ny)
        .into_par_iter()
        .flat_map_iter(|c| {
            let (i, j) = (c / grid.ny, c % grid.ny);
            let p = grid.cell_center(i, j);
            let mut cache = Vec::new();
            (0..n_bins)
                .map(|k| {
                    let u = GraspConfig { x: p.x, y: p.y, phi: bin_center(k, n_bins) };
                    let mut eval = evaluate(&prep, gripper, &u, cfg, &mut cache);
                    if let Some(noise) = &cfg.label_noise {
                        eval = apply_noise(eval, scene, &u, noise);
                    }
                    eval.outcome.is_success()
                })
                .collect::<Vec<_>>()
        })
        .collect();
    SuccessMap { nx: grid.nx, ny: grid.ny, n_bins, cells }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{ObjectModel, PlacedObject, Pose2D, ShapeSpec};

    fn bin() -> Aabb {
        Aabb::new(Vec2::new(0.0, 0.0), Vec2::new(400.0, 400.0))
    }

    fn object(id: &str, shape: ShapeSpec, material: Material, h: f64) -> ObjectModel {
        ObjectModel { id: id.into(), shape, material, height_mm: h, mass_g: 50.0, color: [0.3, 0.3, 0.8] }
    }

    fn scene_with(objs: Vec<(ObjectModel, Pose2D)>) -> Scene {
        Scene::new(bin(), objs.into_iter().map(|(model, pose)| PlacedObject { model, pose }).collect()).unwrap()
    }

    fn g(x: f64, y: f64, phi: f64) -> GraspConfig {
        GraspConfig::new(x, y, phi).unwrap()
    }

    #[test]
    fn rect_closing_across_short_side_succeeds() {
        let s = scene_with(vec![(
            object("r", ShapeSpec::Rect { w: 40.0, h: 20.0 }, Material::Rigid, 50.0),
            Pose2D::new(200.0, 200.0, 0.0),
        )]);
        let grip = GripperSpec::two_finger(Material::Rigid);
        let cfg = OracleConfig::default();
        let (o, next) = execute_grasp(&s, &grip, &g(200.0, 200.0, 0.5 * PI), &cfg);
        assert_eq!(o, GraspOutcome::Success { object: "r".into() });
        assert!(next.is_empty());
        // closing along the long side is misaligned
        let (o, next) = execute_grasp(&s, &grip, &g(200.0, 200.0, 0.0), &cfg);
        assert_eq!(o, GraspOutcome::Failure { reason: FailureReason::BadAlignment });
        assert_eq!(next, s);
    }

    #[test]
    fn rigid_pad_on_tall_rigid_object_stops() {
        let s = scene_with(vec![
            (object("a", ShapeSpec::Circle { radius: 15.0 }, Material::Rigid, 50.0), Pose2D::new(200.0, 200.0, 0.0)),
            (object("b", ShapeSpec::Circle { radius: 15.0 }, Material::Rigid, 50.0), Pose2D::new(280.0, 200.0, 0.0)),
        ]);
        let cfg = OracleConfig::default();
        let (o, next) = execute_grasp(&s, &GripperSpec::two_finger(Material::Rigid), &g(200.0, 200.0, 0.0), &cfg);
        assert_eq!(o, GraspOutcome::EmergencyStop);
        assert_eq!(next, s);
        // soft pads conform around the same contact
        let (o, _) = execute_grasp(&s, &GripperSpec::two_finger(Material::Soft), &g(200.0, 200.0, 0.0), &cfg);
        assert_ne!(o, GraspOutcome::EmergencyStop);
    }

    #[test]
    fn soft_toy_any_angle_when_centered_inside() {
        let s = scene_with(vec![(
            object("t", ShapeSpec::Ellipse { a: 35.0, b: 20.0 }, Material::Soft, 40.0),
            Pose2D::new(150.0, 150.0, 0.7),
        )]);
        for grip in [GripperSpec::two_finger(Material::Rigid), GripperSpec::four_finger(Material::Soft)] {
            for k in 0..18 {
                let (o, _) = execute_grasp(&s, &grip, &g(155.0, 152.0, bin_center(k, 18)), &OracleConfig::default());
                assert!(o.is_success(), "bin {k}: {o:?}");
            }
        }
    }

    #[test]
    fn empty_background_is_no_contact() {
        let s = Scene::empty(bin());
        let (o, _) = execute_grasp(&s, &GripperSpec::default(), &g(100.0, 100.0, 0.3), &OracleConfig::default());
        assert_eq!(o, GraspOutcome::Failure { reason: FailureReason::NoContact });
    }

    #[test]
    fn two_objects_on_axis_pinch() {
        let s = scene_with(vec![
            (object("a", ShapeSpec::Circle { radius: 10.0 }, Material::Rigid, 10.0), Pose2D::new(180.0, 200.0, 0.0)),
            (object("b", ShapeSpec::Circle { radius: 10.0 }, Material::Rigid, 10.0), Pose2D::new(220.0, 200.0, 0.0)),
        ]);
        let (o, _) = execute_grasp(&s, &GripperSpec::default(), &g(200.0, 200.0, 0.0), &OracleConfig::default());
        assert_eq!(o, GraspOutcome::Failure { reason: FailureReason::MultiObjectPinch });
    }

    #[test]
    fn plate_too_wide_at_centre_but_not_at_rim() {
        let s = scene_with(vec![(
            object("p", ShapeSpec::Circle { radius: 85.0 }, Material::Rigid, 20.0),
            Pose2D::new(200.0, 200.0, 0.0),
        )]);
        let grip = GripperSpec::four_finger(Material::Soft);
        let cfg = OracleConfig::default();
        let (o, _) = execute_grasp(&s, &grip, &g(200.0, 200.0, 0.0), &cfg);
        assert_eq!(o, GraspOutcome::Failure { reason: FailureReason::TooWide });
        // near the rim, closing tangentially
        let (o, _) = execute_grasp(&s, &grip, &g(200.0, 270.0, 0.0), &cfg);
        assert!(o.is_success(), "{o:?}");
    }

    #[test]
    fn circle_center_succeeds_for_every_bin() {
        let s = scene_with(vec![(
            object("c", ShapeSpec::Circle { radius: 25.0 }, Material::Rigid, 50.0),
            Pose2D::new(210.0, 190.0, 0.0),
        )]);
        let grid = GridSpec::over(Aabb::new(Vec2::new(200.0, 180.0), Vec2::new(220.0, 200.0)), 1, 1);
        let m = brute_force_success_map(&s, &GripperSpec::default(), &grid, 18, &OracleConfig::default());
        assert_eq!(m.count(), 18);
    }

    #[test]
    fn empty_scene_map_all_false() {
        let m = brute_force_success_map(
            &Scene::empty(bin()),
            &GripperSpec::default(),
            &GridSpec::over(bin(), 5, 4),
            18,
            &OracleConfig::default(),
        );
        assert_eq!(m.cells.len(), 5 * 4 * 18);
        assert_eq!(m.count(), 0);
    }

    #[test]
    fn phi_range_checked() {
        assert_eq!(GraspConfig::new(0.0, 0.0, PI), Err(GraspError::PhiOutOfRange(PI)));
        assert!(GraspConfig::new(0.0, 0.0, -0.1).is_err());
        assert!(GraspConfig::new(f64::NAN, 0.0, 0.0).is_err());
    }

    #[test]
    fn full_noise_flips_targeted_outcomes() {
        let s = scene_with(vec![(
            object("c", ShapeSpec::Circle { radius: 25.0 }, Material::Rigid, 50.0),
            Pose2D::new(200.0, 200.0, 0.0),
        )]);
        let cfg = OracleConfig { label_noise: Some(LabelNoise { rate: 1.0, seed: 3 }), ..Default::default() };
        let (o, next) = execute_grasp(&s, &GripperSpec::default(), &g(200.0, 200.0, 0.0), &cfg);
        assert!(!o.is_success());
        assert_eq!(next, s);
        let (o, _) = execute_grasp(&s, &GripperSpec::default(), &g(10.0, 10.0, 0.0), &cfg);
        assert_eq!(o, GraspOutcome::Failure { reason: FailureReason::NoContact });
    }
}
