//! Grasp selection over rendered images.
//!
//! Every policy returns a grasp whose angle is exactly a bin centre. The
//! learned policies only look at the image; the oracle-backed policy reads
//! the true scene and exists as an upper bound for evaluation.

use crate::geometry::{min_area_rect, Aabb, Vec2};
use crate::gripper::GripperSpec;
use crate::learn::{angle_to_bin, bin_to_angle, dense_predict, predict_bins, AngleBin, LearnError, ModelParams};
use crate::oracle::{brute_force_success_map, GraspConfig, GridSpec, OracleConfig};
use crate::render::{crop_patch, resize, resize_to, CameraModel, ImageGrid};
use crate::scene::Scene;
use crate::seeding::{label, rng_for};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use std::sync::Arc;
use thiserror::Error;

/// Pixels with any channel below this are foreground.
pub const FOREGROUND_THRESHOLD: f32 = 0.98;
/// Minimum-rectangle aspect ratio below which the heuristic treats the
/// blob as round and closes along bin 0.
pub const ROUND_ASPECT: f64 = 1.08;
pub const DEFAULT_SAMPLES: usize = 1000;

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("image has no foreground pixels")]
    NoForeground,
    #[error("oracle policy needs the true scene")]
    NoGroundTruth,
    #[error(transparent)]
    Learn(#[from] LearnError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PolicySource {
    Random,
    Heuristic,
    LearnedSampled,
    LearnedDense,
    Oracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraspProposal {
    pub u: GraspConfig,
    pub bin: AngleBin,
    /// Predicted success probability; 1.0 for non-learned policies.
    pub score: f64,
    pub source: PolicySource,
}

/// Patch geometry: crop side in image pixels and network input side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchSpec {
    pub crop: usize,
    pub input: usize,
}

impl PatchSpec {
    pub fn desk() -> Self {
        Self { crop: 40, input: 32 }
    }

    pub fn paper() -> Self {
        Self { crop: 160, input: 227 }
    }

    /// Network input patch for a grasp centred at `center_mm`.
    pub fn extract(&self, image: &ImageGrid, camera: &CameraModel, center_mm: Vec2) -> ImageGrid {
        self.extract_px(image, camera.world_to_pixel(center_mm))
    }

    pub fn extract_px(&self, image: &ImageGrid, center_px: Vec2) -> ImageGrid {
        resize(&crop_patch(image, center_px, self.crop), self.input)
    }
}

/// Everything a policy may look at for one decision.
#[derive(Debug, Clone, Copy)]
pub struct Observation<'a> {
    pub image: &'a ImageGrid,
    pub camera: &'a CameraModel,
    pub workspace: Aabb,
    /// Seed for stochastic policies.
    pub seed: u64,
    /// True scene, for the oracle-backed policy only.
    pub truth: Option<Truth<'a>>,
}

#[derive(Debug, Clone, Copy)]
pub struct Truth<'a> {
    pub scene: &'a Scene,
    pub gripper: &'a GripperSpec,
    pub oracle: &'a OracleConfig,
}

fn proposal(x: f64, y: f64, bin: AngleBin, score: f64, source: PolicySource) -> GraspProposal {
    let u = GraspConfig::new(x, y, bin_to_angle(bin)).expect("bin centres are in range");
    GraspProposal { u, bin, score, source }
}

/// Uniform centre over the workspace and uniform bin.
pub fn random_policy_with<R: Rng>(workspace: &Aabb, rng: &mut R) -> GraspProposal {
    let x = rng.gen_range(workspace.min.x..workspace.max.x);
    let y = rng.gen_range(workspace.min.y..workspace.max.y);
    let bin = AngleBin::new(rng.gen_range(0..crate::learn::N_BINS)).unwrap();
    proposal(x, y, bin, 1.0, PolicySource::Random)
}

pub fn random_policy(workspace: &Aabb, seed: u64) -> GraspProposal {
    random_policy_with(workspace, &mut rng_for(seed, &[label("random-policy")]))
}

pub fn foreground_mask(image: &ImageGrid) -> Vec<bool> {
    let mut mask = Vec::with_capacity(image.height() * image.width());
    for r in 0..image.height() {
        for c in 0..image.width() {
            mask.push(image.is_foreground(r, c, FOREGROUND_THRESHOLD));
        }
    }
    mask
}

/// 4-connected components; returns the pixel list of the largest one
/// (first found in raster order on ties).
pub fn largest_component(mask: &[bool], height: usize, width: usize) -> Vec<(usize, usize)> {
    let mut seen = vec![false; mask.len()];
    let mut best: Vec<(usize, usize)> = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..mask.len() {
        if !mask[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        let mut comp = Vec::new();
        while let Some(i) = queue.pop_front() {
            let (r, c) = (i / width, i % width);
            comp.push((r, c));
            let mut visit = |j: usize| {
                if mask[j] && !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            };
            if r > 0 {
                visit(i - width);
            }
            if r + 1 < height {
                visit(i + width);
            }
            if c > 0 {
                visit(i - 1);
            }
            if c + 1 < width {
                visit(i + 1);
            }
        }
        if comp.len() > best.len() {
            best = comp;
        }
    }
    best
}

/// Grasp at the centre of the largest blob's minimum-area rectangle,
/// closing across its short side.
pub fn heuristic_policy(image: &ImageGrid, camera: &CameraModel) -> Result<GraspProposal, PolicyError> {
    let mask = foreground_mask(image);
    let comp = largest_component(&mask, image.height(), image.width());
    if comp.is_empty() {
        return Err(PolicyError::NoForeground);
    }
    let pts: Vec<Vec2> = comp.iter().map(|&(r, c)| Vec2::new(c as f64 + 0.5, r as f64 + 0.5)).collect();
    let rect = min_area_rect(&pts).expect("non-empty point set");
    let (long, short) = (rect.len_a.max(rect.len_b), rect.len_a.min(rect.len_b));
    let phi = if long < ROUND_ASPECT * short { 0.0 } else { rect.narrow_axis() };
    let bin = angle_to_bin(phi.rem_euclid(std::f64::consts::PI))?;
    let c = camera.pixel_to_world(rect.center);
    Ok(proposal(c.x, c.y, bin, 1.0, PolicySource::Heuristic))
}

/// Square dilation of a mask by `r` pixels (Chebyshev radius).
pub fn dilate(mask: &[bool], height: usize, width: usize, r: usize) -> Vec<bool> {
    let pass = |src: &[bool], along_rows: bool| -> Vec<bool> {
        let (outer, inner) = if along_rows { (height, width) } else { (width, height) };
        let mut out = vec![false; src.len()];
        for o in 0..outer {
            let idx = |i: usize| if along_rows { o * width + i } else { i * width + o };
            let mut last: Option<usize> = None;
            // distance to the nearest set pixel on the left, then the right
            let mut near = vec![usize::MAX; inner];
            for i in 0..inner {
                if src[idx(i)] {
                    last = Some(i);
                }
                if let Some(l) = last {
                    near[i] = i - l;
                }
            }
            last = None;
            for i in (0..inner).rev() {
                if src[idx(i)] {
                    last = Some(i);
                }
                if let Some(l) = last {
                    near[i] = near[i].min(l - i);
                }
                out[idx(i)] = near[i] <= r;
            }
        }
        out
    };
    let h = pass(mask, true);
    pass(&h, false)
}

/// Best `(score, y, x, bin)` among candidate pixel centres, ties to the
/// lowest `(y, x, bin)`.
pub fn evaluate_candidates(
    params: &ModelParams,
    image: &ImageGrid,
    patch: &PatchSpec,
    centers_px: &[Vec2],
) -> Result<Option<(f64, Vec2, AngleBin)>, PolicyError> {
    let mut best: Option<(f32, Vec2, usize)> = None;
    for &c in centers_px {
        let q = predict_bins(params, &patch.extract_px(image, c))?;
        for (k, &v) in q.iter().enumerate() {
            let better = match best {
                None => true,
                Some((bv, bc, bk)) => {
                    v > bv || (v == bv && (c.y, c.x, k) < (bc.y, bc.x, bk))
                }
            };
            if better {
                best = Some((v, c, k));
            }
        }
    }
    Ok(best.map(|(v, c, k)| (v as f64, c, AngleBin::new(k).unwrap())))
}

/// Sliding-window sampling: `n_samples` random pixel centres on the
/// foreground dilated by half a crop (or the whole image with
/// `full_image`), all bins scored, argmax returned.
pub fn sampled_policy(
    params: &ModelParams,
    obs: &Observation<'_>,
    patch: &PatchSpec,
    n_samples: usize,
    full_image: bool,
) -> Result<GraspProposal, PolicyError> {
    let (h, w) = (obs.image.height(), obs.image.width());
    let mask = foreground_mask(obs.image);
    if !mask.iter().any(|&m| m) {
        return Err(PolicyError::NoForeground);
    }
    let region = if full_image { vec![true; h * w] } else { dilate(&mask, h, w, patch.crop / 2) };
    let pool: Vec<Vec2> = (0..h * w)
        .filter(|&i| region[i])
        .map(|i| Vec2::new((i % w) as f64 + 0.5, (i / w) as f64 + 0.5))
        .filter(|&p| obs.workspace.contains(obs.camera.pixel_to_world(p)))
        .collect();
    if pool.is_empty() {
        return Err(PolicyError::NoForeground);
    }
    let mut rng = rng_for(obs.seed, &[label("sampled-policy")]);
    let centers: Vec<Vec2> = (0..n_samples.max(1)).map(|_| pool[rng.gen_range(0..pool.len())]).collect();
    let (score, c, bin) = evaluate_candidates(params, obs.image, patch, &centers)?.expect("at least one candidate");
    let p = obs.camera.pixel_to_world(c);
    Ok(proposal(p.x, p.y, bin, score, PolicySource::LearnedSampled))
}

/// Image rescaled so that one crop becomes one network input, plus the
/// per-axis scale actually applied.
fn net_view(image: &ImageGrid, patch: &PatchSpec) -> (ImageGrid, f64, f64) {
    if patch.crop == patch.input {
        return (image.clone(), 1.0, 1.0);
    }
    let s = patch.input as f64 / patch.crop as f64;
    let h = ((image.height() as f64 * s).round() as usize).max(1);
    let w = ((image.width() as f64 * s).round() as usize).max(1);
    (resize_to(image, h, w), w as f64 / image.width() as f64, h as f64 / image.height() as f64)
}

/// One fully convolutional pass over the whole image, global argmax over
/// cells inside the workspace and bins, ties to the lowest `(row, col, bin)`.
pub fn dense_policy(params: &ModelParams, obs: &Observation<'_>, patch: &PatchSpec) -> Result<GraspProposal, PolicyError> {
    let (view, sx, sy) = net_view(obs.image, patch);
    let map = dense_predict(params, &view)?;
    let mut best: Option<(f32, usize, usize, usize)> = None;
    for row in 0..map.rows {
        for col in 0..map.cols {
            let px = Vec2::new(
                (map.offset + col * map.stride) as f64 / sx,
                (map.offset + row * map.stride) as f64 / sy,
            );
            if !obs.workspace.contains(obs.camera.pixel_to_world(px)) {
                continue;
            }
            for k in 0..map.n_bins {
                let v = map.get(row, col, k);
                if best.map_or(true, |(bv, ..)| v > bv) {
                    best = Some((v, row, col, k));
                }
            }
        }
    }
    let (v, row, col, k) = best.ok_or(PolicyError::NoForeground)?;
    let px = Vec2::new((map.offset + col * map.stride) as f64 / sx, (map.offset + row * map.stride) as f64 / sy);
    let p = obs.camera.pixel_to_world(px);
    Ok(proposal(p.x, p.y, AngleBin::new(k).unwrap(), v as f64, PolicySource::LearnedDense))
}

/// Cheating upper bound: scans each object's bounding box with the
/// oracle and returns the first successful grasp found.
pub fn oracle_policy(obs: &Observation<'_>, window: usize) -> Result<GraspProposal, PolicyError> {
    let truth = obs.truth.ok_or(PolicyError::NoGroundTruth)?;
    let n_bins = crate::learn::N_BINS;
    for n in [window, 2 * window + 1] {
        for obj in &truth.scene.objects {
            let bb = obj.footprint().aabb();
            let region = Aabb::new(obs.workspace.clamp(bb.min), obs.workspace.clamp(bb.max));
            if region.width() <= 0.0 || region.height() <= 0.0 {
                continue;
            }
            let grid = GridSpec::over(region, n, n);
            let map = brute_force_success_map(truth.scene, truth.gripper, &grid, n_bins, truth.oracle);
            if let Some(idx) = map.cells.iter().position(|&s| s) {
                let (cell, k) = (idx / n_bins, idx % n_bins);
                let c = grid.cell_center(cell / grid.ny, cell % grid.ny);
                return Ok(proposal(c.x, c.y, AngleBin::new(k).unwrap(), 1.0, PolicySource::Oracle));
            }
        }
    }
    let mut p = random_policy(&obs.workspace, obs.seed);
    p.source = PolicySource::Oracle;
    p.score = 0.0;
    Ok(p)
}

/// Serializable policy choice, as written under `"policy"` in experiment
/// configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PolicyConfig {
    Random,
    Heuristic,
    Sampled {
        #[serde(default = "default_samples")]
        n_samples: usize,
        #[serde(default)]
        full_image: bool,
    },
    Dense,
    Oracle {
        #[serde(default = "default_window")]
        window: usize,
    },
}

fn default_samples() -> usize {
    DEFAULT_SAMPLES
}

fn default_window() -> usize {
    9
}

/// A ready-to-run policy.
#[derive(Debug, Clone)]
pub enum Policy {
    Random,
    Heuristic,
    Sampled { model: Arc<ModelParams>, patch: PatchSpec, n_samples: usize, full_image: bool },
    Dense { model: Arc<ModelParams>, patch: PatchSpec },
    Oracle { window: usize },
}

impl Policy {
    pub fn from_config(cfg: &PolicyConfig, model: Option<Arc<ModelParams>>, patch: PatchSpec) -> Option<Self> {
        Some(match *cfg {
            PolicyConfig::Random => Policy::Random,
            PolicyConfig::Heuristic => Policy::Heuristic,
            PolicyConfig::Sampled { n_samples, full_image } => Policy::Sampled { model: model?, patch, n_samples, full_image },
            PolicyConfig::Dense => Policy::Dense { model: model?, patch },
            PolicyConfig::Oracle { window } => Policy::Oracle { window },
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Policy::Random => "random",
            Policy::Heuristic => "heuristic",
            Policy::Sampled { .. } => "sampled",
            Policy::Dense { .. } => "dense",
            Policy::Oracle { .. } => "oracle",
        }
    }

    pub fn model(&self) -> Option<&ModelParams> {
        match self {
            Policy::Sampled { model, .. } | Policy::Dense { model, .. } => Some(model),
            _ => None,
        }
    }

    pub fn propose(&self, obs: &Observation<'_>) -> Result<GraspProposal, PolicyError> {
        match self {
            Policy::Random => Ok(random_policy(&obs.workspace, obs.seed)),
            Policy::Heuristic => heuristic_policy(obs.image, obs.camera),
            Policy::Sampled { model, patch, n_samples, full_image } => {
                sampled_policy(model, obs, patch, *n_samples, *full_image)
            }
            Policy::Dense { model, patch } => dense_policy(model, obs, patch),
            Policy::Oracle { window } => oracle_policy(obs, *window),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learn::NetSpec;
    use crate::render::render;
    use crate::scene::{Material, ObjectModel, PlacedObject, Pose2D, ShapeSpec};
    use std::f64::consts::PI;

    fn bin() -> Aabb {
        Aabb::new(Vec2::new(0.0, 0.0), Vec2::new(400.0, 400.0))
    }

    fn one(shape: ShapeSpec, theta: f64) -> Scene {
        let model = ObjectModel {
            id: "o".into(),
            shape,
            material: Material::Rigid,
            height_mm: 40.0,
            mass_g: 10.0,
            color: [0.2, 0.3, 0.7],
        };
        Scene::new(bin(), vec![PlacedObject { model, pose: Pose2D::new(200.0, 200.0, theta) }]).unwrap()
    }

    #[test]
    fn random_policy_is_seeded_and_inside() {
        assert_eq!(random_policy(&bin(), 3), random_policy(&bin(), 3));
        let mut rng = rng_for(1, &[]);
        let mut counts = [0usize; 18];
        for _ in 0..10_000 {
            let p = random_policy_with(&bin(), &mut rng);
            assert!(bin().contains(p.u.center()));
            assert_eq!(p.u.phi, bin_to_angle(p.bin));
            counts[p.bin.index()] += 1;
        }
        assert!(counts.iter().all(|&c| (300..=900).contains(&c)), "{counts:?}");
    }

    #[test]
    fn heuristic_closes_across_short_side() {
        let cam = CameraModel::desk();
        let img = render(&one(ShapeSpec::Rect { w: 40.0, h: 20.0 }, 0.0), &cam);
        let p = heuristic_policy(&img, &cam).unwrap();
        assert_eq!(p.bin.index(), 9);
        assert!((p.u.center() - Vec2::new(200.0, 200.0)).norm() < 1.0);
        let img = render(&one(ShapeSpec::Rect { w: 40.0, h: 20.0 }, -60f64.to_radians()), &cam);
        // long side at -60°, closing axis at 30°
        assert_eq!(heuristic_policy(&img, &cam).unwrap().bin.index(), 3);
    }

    #[test]
    fn symmetries_move_the_heuristic_bin() {
        let cam = CameraModel::desk();
        for deg in [13.0, 57.0, 124.0] {
            let img = render(&one(ShapeSpec::Rect { w: 90.0, h: 30.0 }, f64::to_radians(deg)), &cam);
            let bin = heuristic_policy(&img, &cam).unwrap().bin;
            for t in 0..8 {
                let moved = heuristic_policy(&img.dihedral(t), &cam).unwrap().bin;
                assert_eq!(moved, bin.dihedral(t), "{deg}° under {t}");
            }
        }
    }

    #[test]
    fn heuristic_round_blob_uses_bin_zero() {
        let cam = CameraModel::desk();
        let img = render(&one(ShapeSpec::Circle { radius: 30.0 }, 0.0), &cam);
        assert_eq!(heuristic_policy(&img, &cam).unwrap().bin.index(), 0);
        let blank = ImageGrid::white(64, 64);
        assert!(matches!(heuristic_policy(&blank, &cam), Err(PolicyError::NoForeground)));
    }

    #[test]
    fn heuristic_tracks_rotation() {
        let cam = CameraModel::desk();
        let bin_at = |deg: f64| {
            let img = render(&one(ShapeSpec::Rect { w: 90.0, h: 30.0 }, deg.to_radians()), &cam);
            heuristic_policy(&img, &cam).unwrap().bin.index()
        };
        for base in [3.0, 27.0, 44.0, 71.0, 136.0] {
            assert_eq!(bin_at(base + 10.0), (bin_at(base) + 1) % 18, "at {base}°");
        }
    }

    #[test]
    fn dilation_radius() {
        let mut m = vec![false; 7 * 7];
        m[3 * 7 + 3] = true;
        let d = dilate(&m, 7, 7, 2);
        assert_eq!(d.iter().filter(|&&v| v).count(), 25);
        assert!(d[1 * 7 + 1] && !d[0]);
    }

    #[test]
    fn dense_matches_exhaustive_sampling_when_unscaled() {
        let params = ModelParams::init(NetSpec::desk_small(), 4).unwrap();
        let patch = PatchSpec { crop: 32, input: 32 };
        let cam = CameraModel::desk();
        let scene = one(ShapeSpec::Rect { w: 60.0, h: 25.0 }, 0.4);
        let img = render(&scene, &cam);
        let obs = Observation { image: &img, camera: &cam, workspace: bin(), seed: 0, truth: None };
        let dense = dense_policy(&params, &obs, &patch).unwrap();
        let n = params.net.output_size(256).unwrap();
        let centers: Vec<Vec2> = (0..n)
            .flat_map(|r| (0..n).map(move |c| Vec2::new((16 + 8 * c) as f64, (16 + 8 * r) as f64)))
            .collect();
        let (score, c, bin) = evaluate_candidates(&params, &img, &patch, &centers).unwrap().unwrap();
        assert_eq!(dense.bin, bin);
        assert_eq!(dense.u.center(), cam.pixel_to_world(c));
        assert!((dense.score - score).abs() < 1e-6);
    }

    #[test]
    fn constant_image_dense_ties_to_first_cell() {
        let params = ModelParams::init(NetSpec::desk_small(), 4).unwrap();
        let cam = CameraModel::desk();
        let img = ImageGrid::filled(256, 256, [0.5, 0.5, 0.5]);
        let obs = Observation { image: &img, camera: &cam, workspace: bin(), seed: 0, truth: None };
        let p = dense_policy(&params, &obs, &PatchSpec { crop: 32, input: 32 }).unwrap();
        assert_eq!(p.u.center(), cam.pixel_to_world(Vec2::new(16.0, 16.0)));
        let q = predict_bins(&params, &crop_patch(&img, Vec2::new(16.0, 16.0), 32)).unwrap();
        let top = q.iter().cloned().fold(f32::NEG_INFINITY, f32::max);
        assert_eq!(p.bin.index(), q.iter().position(|&v| v == top).unwrap());
    }

    #[test]
    fn sampled_with_one_sample_is_bin_argmax() {
        let params = ModelParams::init(NetSpec::desk_small(), 4).unwrap();
        let cam = CameraModel::desk();
        let img = render(&one(ShapeSpec::Circle { radius: 30.0 }, 0.0), &cam);
        let obs = Observation { image: &img, camera: &cam, workspace: bin(), seed: 5, truth: None };
        let patch = PatchSpec::desk();
        let p = sampled_policy(&params, &obs, &patch, 1, false).unwrap();
        let q = predict_bins(&params, &patch.extract(&img, &cam, p.u.center())).unwrap();
        let top = q.iter().cloned().fold(f32::NEG_INFINITY, f32::max);
        assert_eq!(p.score, top as f64);
        assert_eq!(p.u.phi, bin_to_angle(p.bin));
        assert!(p.u.phi < PI);
    }

    #[test]
    fn oracle_policy_finds_a_success() {
        let scene = one(ShapeSpec::Rect { w: 60.0, h: 25.0 }, 0.4);
        let cam = CameraModel::desk();
        let img = render(&scene, &cam);
        let g = GripperSpec::two_finger(Material::Rigid);
        let oc = OracleConfig::default();
        let truth = Truth { scene: &scene, gripper: &g, oracle: &oc };
        let obs = Observation { image: &img, camera: &cam, workspace: bin(), seed: 0, truth: Some(truth) };
        let p = oracle_policy(&obs, 9).unwrap();
        let (o, _) = crate::oracle::execute_grasp(&scene, &g, &p.u, &oc);
        assert!(o.is_success());
    }
}
