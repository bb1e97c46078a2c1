//! Planar workspace, object models and random placement.

mod footprint;
pub mod presets;

pub use footprint::{polygon_extent, Band, Footprint, CURVE_SEGMENTS};
pub use presets::{ObjectSet, ObjectSetPreset};

use crate::geometry::{point_segment_distance, Aabb, ConvexPolygon, Vec2};
use crate::seeding::rng_for;
use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::f64::consts::TAU;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SceneError {
    #[error("placement exhausted after {tries} tries ({placed} of {requested} objects placed)")]
    PlacementExhausted { tries: usize, placed: usize, requested: usize },
    #[error("requested {count} objects but only {available} members given")]
    TooFewMembers { count: usize, available: usize },
    #[error("unknown object id {0:?}")]
    UnknownObject(String),
    #[error("invalid object {id:?}: {reason}")]
    InvalidObject { id: String, reason: String },
    #[error("object {0:?} lies outside the workspace")]
    OutsideWorkspace(String),
    #[error("duplicate object id {0:?}")]
    DuplicateId(String),
}

/// Rejection-sampling budget shared by all objects of one placement call.
pub const PLACEMENT_TRIES: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose2D {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose2D {
    /// Pose with `theta` wrapped into `[0, 2π)`.
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        let mut t = theta.rem_euclid(TAU);
        if t >= TAU {
            t = 0.0;
        }
        Self { x, y, theta: t }
    }

    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShapeSpec {
    Circle { radius: f64 },
    Rect { w: f64, h: f64 },
    Ellipse { a: f64, b: f64 },
    /// Counter-clockwise vertices in the object frame (mm).
    ConvexPolygon { vertices: Vec<[f64; 2]> },
}

impl ShapeSpec {
    pub fn validate(&self) -> Result<(), String> {
        let ok = match self {
            ShapeSpec::Circle { radius } => *radius > 0.0,
            ShapeSpec::Rect { w, h } => *w > 0.0 && *h > 0.0,
            ShapeSpec::Ellipse { a, b } => *a > 0.0 && *b > 0.0,
            ShapeSpec::ConvexPolygon { vertices } => {
                ConvexPolygon::new(vertices.iter().map(|v| Vec2::new(v[0], v[1])).collect()).is_some()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(format!("degenerate shape {self:?}"))
        }
    }

    pub fn footprint(&self, pose: &Pose2D) -> Footprint {
        let c = pose.position();
        match self {
            ShapeSpec::Circle { radius } => Footprint::Circle { center: c, radius: *radius },
            ShapeSpec::Ellipse { a, b } => Footprint::Ellipse { center: c, a: *a, b: *b, theta: pose.theta },
            ShapeSpec::Rect { w, h } => Footprint::Polygon(ConvexPolygon::rect(*w, *h).transformed(pose.theta, c)),
            ShapeSpec::ConvexPolygon { vertices } => {
                let poly = ConvexPolygon::new(vertices.iter().map(|v| Vec2::new(v[0], v[1])).collect())
                    .expect("validated polygon");
                Footprint::Polygon(poly.transformed(pose.theta, c))
            }
        }
    }

    pub fn area(&self) -> f64 {
        self.footprint(&Pose2D::new(0.0, 0.0, 0.0)).area()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Material {
    Rigid,
    Soft,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectModel {
    pub id: String,
    pub shape: ShapeSpec,
    pub material: Material,
    pub height_mm: f64,
    pub mass_g: f64,
    pub color: [f32; 3],
}

impl ObjectModel {
    pub fn validate(&self) -> Result<(), SceneError> {
        let bad = |reason: String| SceneError::InvalidObject { id: self.id.clone(), reason };
        self.shape.validate().map_err(bad)?;
        if !(self.height_mm > 0.0) {
            return Err(bad("height must be positive".into()));
        }
        if !(self.mass_g > 0.0) {
            return Err(bad("mass must be positive".into()));
        }
        if self.color.iter().any(|c| !(0.0..=1.0).contains(c)) {
            return Err(bad("color outside [0,1]".into()));
        }
        if self.color == [1.0, 1.0, 1.0] {
            return Err(bad("color equals the white background".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacedObject {
    #[serde(flatten)]
    pub model: ObjectModel,
    pub pose: Pose2D,
}

impl PlacedObject {
    pub fn footprint(&self) -> Footprint {
        self.model.shape.footprint(&self.pose)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub workspace: Aabb,
    pub objects: Vec<PlacedObject>,
}

impl Scene {
    pub fn empty(workspace: Aabb) -> Self {
        Self { workspace, objects: Vec::new() }
    }

    /// Builds a scene after checking ids, object validity and containment.
    pub fn new(workspace: Aabb, objects: Vec<PlacedObject>) -> Result<Self, SceneError> {
        let scene = Self { workspace, objects };
        scene.validate()?;
        Ok(scene)
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        let mut seen = std::collections::HashSet::new();
        for o in &self.objects {
            o.model.validate()?;
            if !seen.insert(o.model.id.as_str()) {
                return Err(SceneError::DuplicateId(o.model.id.clone()));
            }
            if !self.workspace.contains_box(&o.footprint().aabb()) {
                return Err(SceneError::OutsideWorkspace(o.model.id.clone()));
            }
        }
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn get(&self, id: &str) -> Option<&PlacedObject> {
        self.objects.iter().find(|o| o.model.id == id)
    }

    /// Scene without object `id`; all other poses unchanged.
    pub fn remove_object(&self, id: &str) -> Result<Scene, SceneError> {
        let idx = self
            .objects
            .iter()
            .position(|o| o.model.id == id)
            .ok_or_else(|| SceneError::UnknownObject(id.to_string()))?;
        let mut objects = self.objects.clone();
        objects.remove(idx);
        Ok(Scene { workspace: self.workspace, objects })
    }

    /// Stable content hash (hex SHA-256 of the JSON document).
    pub fn content_hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("scene serializes");
        hex_digest(&json)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene serializes")
    }

    pub fn from_json(s: &str) -> Result<Scene, serde_json::Error> {
        serde_json::from_str(s)
    }
}

pub(crate) fn hex_digest(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Width of the object's footprint inside `band`, measured along `direction`.
pub fn extent_along(object: &ObjectModel, pose: &Pose2D, direction: Vec2, band: Band) -> f64 {
    object.shape.footprint(pose).extent_along(direction, band)
}

/// Placement parameters besides the member list.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub workspace: Aabb,
    pub count: usize,
    /// Max pairwise overlap as a fraction of the smaller footprint area.
    pub overlap_frac: f64,
    pub seed: u64,
}

/// Inscribed and enclosing discs about the centroid, used to settle most
/// overlap tests without clipping.
struct Discs {
    center: Vec2,
    inner: f64,
    outer: f64,
}

impl Discs {
    fn of(poly: &ConvexPolygon) -> Self {
        let center = poly.centroid();
        let v = poly.vertices();
        let outer = v.iter().map(|&p| (p - center).norm()).fold(0.0, f64::max);
        let inner = (0..v.len())
            .map(|i| point_segment_distance(center, v[i], v[(i + 1) % v.len()]))
            .fold(f64::INFINITY, f64::min);
        Self { center, inner, outer }
    }
}

/// Picks `count` members at random and drops them into the workspace by
/// rejection sampling. Pure in all arguments.
pub fn place_randomly(members: &[ObjectModel], placement: &Placement) -> Result<Scene, SceneError> {
    let Placement { workspace, count, overlap_frac, seed } = *placement;
    if count > members.len() {
        return Err(SceneError::TooFewMembers { count, available: members.len() });
    }
    for m in members {
        m.validate()?;
    }
    let mut rng = rng_for(seed, &[0x5ce4e]);
    let chosen = sample(&mut rng, members.len(), count).into_vec();
    let mut placed: Vec<PlacedObject> = Vec::with_capacity(count);
    let mut polys: Vec<(ConvexPolygon, f64, Discs)> = Vec::with_capacity(count);
    let mut tries = 0usize;
    for &idx in &chosen {
        let model = &members[idx];
        let area = model.shape.area();
        loop {
            if tries >= PLACEMENT_TRIES {
                return Err(SceneError::PlacementExhausted { tries, placed: placed.len(), requested: count });
            }
            tries += 1;
            let theta = rng.gen_range(0.0..TAU);
            let local = model.shape.footprint(&Pose2D::new(0.0, 0.0, theta)).aabb();
            let (x0, x1) = (workspace.min.x - local.min.x, workspace.max.x - local.max.x);
            let (y0, y1) = (workspace.min.y - local.min.y, workspace.max.y - local.max.y);
            if x0 > x1 || y0 > y1 {
                continue;
            }
            let x = if x1 > x0 { rng.gen_range(x0..=x1) } else { x0 };
            let y = if y1 > y0 { rng.gen_range(y0..=y1) } else { y0 };
            let pose = Pose2D::new(x, y, theta);
            let fp = model.shape.footprint(&pose);
            if !workspace.contains_box(&fp.aabb()) {
                continue;
            }
            let poly = fp.to_polygon();
            let discs = Discs::of(&poly);
            let ok = polys.iter().all(|(other, other_area, od)| {
                let d = (discs.center - od.center).norm();
                if d >= discs.outer + od.outer {
                    return true;
                }
                if overlap_frac == 0.0 && d < discs.inner + od.inner {
                    return false;
                }
                let inter = poly.intersection_area(other);
                inter <= overlap_frac * area.min(*other_area) + 1e-9
            });
            if ok {
                polys.push((poly, area, discs));
                placed.push(PlacedObject { model: model.clone(), pose });
                break;
            }
        }
    }
    Ok(Scene { workspace, objects: placed })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn circle(id: &str, r: f64) -> ObjectModel {
        ObjectModel {
            id: id.into(),
            shape: ShapeSpec::Circle { radius: r },
            material: Material::Rigid,
            height_mm: 50.0,
            mass_g: 100.0,
            color: [0.8, 0.1, 0.1],
        }
    }

    fn bin() -> Aabb {
        Aabb::new(Vec2::new(0.0, 0.0), Vec2::new(400.0, 400.0))
    }

    #[test]
    fn single_circle_always_fits_and_is_deterministic() {
        let p = Placement { workspace: bin(), count: 1, overlap_frac: 0.0, seed: 7 };
        let a = place_randomly(&[circle("c", 30.0)], &p).unwrap();
        let b = place_randomly(&[circle("c", 30.0)], &p).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 1);
        assert!(bin().contains_box(&a.objects[0].footprint().aabb()));
    }

    #[test]
    fn exhausted_when_bin_too_small() {
        let small = Aabb::new(Vec2::new(0.0, 0.0), Vec2::new(50.0, 50.0));
        let p = Placement { workspace: small, count: 1, overlap_frac: 0.0, seed: 1 };
        assert!(matches!(
            place_randomly(&[circle("c", 30.0)], &p),
            Err(SceneError::PlacementExhausted { .. })
        ));
    }

    #[test]
    fn remove_object_cases() {
        let p = Placement { workspace: bin(), count: 1, overlap_frac: 0.0, seed: 3 };
        let s = place_randomly(&[circle("c", 30.0)], &p).unwrap();
        assert!(s.remove_object("c").unwrap().is_empty());
        assert_eq!(s.remove_object("zz"), Err(SceneError::UnknownObject("zz".into())));

        let members: Vec<_> = (0..10).map(|i| circle(&format!("o{i}"), 20.0)).collect();
        let p = Placement { workspace: bin(), count: 10, overlap_frac: 0.0, seed: 5 };
        let s = place_randomly(&members, &p).unwrap();
        let id = s.objects[4].model.id.clone();
        let r = s.remove_object(&id).unwrap();
        assert_eq!(r.len(), 9);
        for o in &r.objects {
            assert_eq!(s.get(&o.model.id).unwrap().pose, o.pose);
        }
    }

    #[test]
    fn rejects_white_and_bad_dims() {
        let mut o = circle("w", 10.0);
        o.color = [1.0, 1.0, 1.0];
        assert!(o.validate().is_err());
        let mut o = circle("h", 10.0);
        o.height_mm = 0.0;
        assert!(o.validate().is_err());
        assert!(ShapeSpec::Rect { w: 0.0, h: 1.0 }.validate().is_err());
    }

    #[test]
    fn pose_theta_wraps() {
        let p = Pose2D::new(0.0, 0.0, -0.5);
        assert!((p.theta - (TAU - 0.5)).abs() < 1e-12);
        assert_eq!(Pose2D::new(0.0, 0.0, TAU).theta, 0.0);
    }

    #[test]
    fn rect_extent_axis_aligned() {
        let o = ObjectModel { shape: ShapeSpec::Rect { w: 40.0, h: 20.0 }, ..circle("r", 1.0) };
        let pose = Pose2D::new(100.0, 100.0, 0.0);
        let w = extent_along(&o, &pose, Vec2::new(1.0, 0.0), Band { center: pose.position(), width: 30.0 });
        assert!((w - 40.0).abs() < 1e-12);
    }

    #[test]
    fn scene_json_round_trip() {
        let members: Vec<_> = (0..4).map(|i| circle(&format!("o{i}"), 15.0 + i as f64)).collect();
        let s = place_randomly(&members, &Placement { workspace: bin(), count: 4, overlap_frac: 0.15, seed: 9 })
            .unwrap();
        let back = Scene::from_json(&s.to_json()).unwrap();
        assert_eq!(s, back);
        assert_eq!(s.content_hash(), back.content_hash());
    }
}
