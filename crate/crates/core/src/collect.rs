//! Self-supervised data collection, dataset mixing and dataset files.
//!
//! A dataset directory holds `manifest.json`, `records.jsonl` (one line of
//! metadata per training record), `patches.bin` (all patches as raw
//! little-endian `f32`, located by the offsets in the records) and
//! `attempts.jsonl` (every attempt, including emergency stops).

use crate::geometry::{Aabb, Vec2};
use crate::gripper::GripperSpec;
use crate::learn::{angle_to_bin, load_model, AngleBin, Example, LearnError, ModelParams};
use crate::oracle::{execute_grasp_logged, AttemptLog, GraspConfig, GraspOutcome, OracleConfig};
use crate::policy::{dense_policy, random_policy, Observation, PatchSpec, PolicyError};
use crate::render::{render, CameraModel, ImageGrid};
use crate::scene::{hex_digest, place_randomly, Material, ObjectModel, ObjectSet, Placement, Scene, SceneError};
use crate::seeding::{derive_seed, label, rng_for};
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::ops::Range;
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const DATASET_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CollectError {
    #[error("invalid collection config: {0}")]
    InvalidConfig(String),
    #[error("cannot load guiding model: {0}")]
    ModelLoad(LearnError),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error("source {source_index} has {available} records, {needed} requested")]
    InsufficientSource { source_index: usize, needed: usize, available: usize },
    #[error("dataset manifest mismatch: {0}")]
    ManifestMismatch(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("malformed dataset file: {0}")]
    Json(#[from] serde_json::Error),
}

/// How grasps are proposed while collecting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CollectPolicy {
    Random,
    /// Dense argmax of a trained model with probability `1 - epsilon`,
    /// a random grasp otherwise.
    Guided { model: PathBuf, epsilon: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResetRule {
    /// Fresh random placement before every attempt.
    #[default]
    EveryAttempt,
    /// Keep the scene between attempts, removing grasped objects, and
    /// re-place once it is empty.
    WhenCleared,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollectConfig {
    /// Object sets pooled into one member list.
    pub objects: Vec<ObjectSet>,
    pub gripper: GripperSpec,
    pub policy: CollectPolicy,
    pub n_attempts: usize,
    pub objects_per_scene: usize,
    #[serde(default)]
    pub reset: ResetRule,
    pub seed: u64,
    pub workspace: Aabb,
    pub camera: CameraModel,
    pub patch: PatchSpec,
    #[serde(default)]
    pub oracle: OracleConfig,
    #[serde(default = "default_overlap")]
    pub overlap_frac: f64,
}

fn default_overlap() -> f64 {
    0.0
}

impl CollectConfig {
    /// Desk-scale defaults: 400 mm bin on the 256 px camera.
    pub fn desk(objects: Vec<ObjectSet>, gripper: GripperSpec, n_attempts: usize, seed: u64) -> Self {
        Self {
            objects,
            gripper,
            policy: CollectPolicy::Random,
            n_attempts,
            objects_per_scene: 4,
            reset: ResetRule::EveryAttempt,
            seed,
            workspace: Aabb::new(Vec2::new(0.0, 0.0), Vec2::new(400.0, 400.0)),
            camera: CameraModel::desk(),
            patch: PatchSpec::desk(),
            oracle: OracleConfig::default(),
            overlap_frac: 0.0,
        }
    }

    pub fn guided(mut self, model: PathBuf, epsilon: f64) -> Self {
        self.policy = CollectPolicy::Guided { model, epsilon };
        self
    }

    pub fn validate(&self) -> Result<(), CollectError> {
        let bad = |s: String| Err(CollectError::InvalidConfig(s));
        if self.n_attempts == 0 {
            return bad("n_attempts must be at least 1".into());
        }
        if self.objects.is_empty() || self.objects_per_scene == 0 {
            return bad("need at least one object set and one object per scene".into());
        }
        if let CollectPolicy::Guided { epsilon, .. } = self.policy {
            if !(0.0..=1.0).contains(&epsilon) {
                return bad(format!("epsilon {epsilon} outside [0, 1]"));
            }
        }
        if !self.camera.covers(&self.workspace) {
            return bad("camera does not cover the workspace".into());
        }
        self.gripper.validate().map_err(|e| CollectError::InvalidConfig(e.to_string()))
    }

    pub fn members(&self) -> Vec<ObjectModel> {
        self.objects.iter().flat_map(|s| s.members()).collect()
    }

    /// Object-material tag: `Soft`, `Rigid` or `Mixed`.
    pub fn object_tag(&self) -> String {
        material_tag(&self.members())
    }

    /// Dataset name in the `2Finger-RigidSoft-5K` style.
    pub fn tag(&self) -> String {
        let mut t = format!(
            "{}Finger-{:?}{}-{}",
            self.gripper.n_fingers,
            self.gripper.material,
            self.object_tag(),
            size_tag(self.n_attempts)
        );
        if matches!(self.policy, CollectPolicy::Guided { .. }) {
            t.push_str("-Guided");
        }
        t
    }

    pub fn content_hash(&self) -> String {
        hex_digest(serde_json::to_string(self).expect("config serializes").as_bytes())
    }
}

fn material_tag(members: &[ObjectModel]) -> String {
    let soft = members.iter().any(|m| m.material == Material::Soft);
    let rigid = members.iter().any(|m| m.material == Material::Rigid);
    match (soft, rigid) {
        (true, false) => "Soft",
        (false, true) => "Rigid",
        _ => "Mixed",
    }
    .into()
}

fn size_tag(n: usize) -> String {
    if n >= 1000 && n % 100 == 0 {
        let k = n as f64 / 1000.0;
        if n % 1000 == 0 {
            format!("{}K", n / 1000)
        } else {
            format!("{k}K")
        }
    } else {
        n.to_string()
    }
}

/// One labelled training example.
#[derive(Debug, Clone, PartialEq)]
pub struct GraspRecord {
    pub patch: ImageGrid,
    pub u: GraspConfig,
    pub bin: AngleBin,
    pub reward: bool,
    pub outcome: GraspOutcome,
    pub gripper_tag: String,
    pub object_tag: String,
    pub policy_tag: String,
    pub scene_seed: u64,
    pub attempt: usize,
}

impl Example for GraspRecord {
    fn patch(&self) -> &ImageGrid {
        &self.patch
    }
    fn bin(&self) -> AngleBin {
        self.bin
    }
    fn reward(&self) -> bool {
        self.reward
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Counts {
    pub attempts: usize,
    pub total: usize,
    pub successes: usize,
    pub failures: usize,
    pub emergency_stops: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceShare {
    pub tag: String,
    pub config_hash: String,
    pub records: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub tag: String,
    pub counts: Counts,
    pub gripper_tags: Vec<String>,
    pub object_tags: Vec<String>,
    pub config_hash: String,
    pub seed: u64,
    pub patch_shape: [usize; 3],
    pub sources: Vec<SourceShare>,
    /// SHA-256 of `patches.bin`; filled in when saved.
    #[serde(default)]
    pub patches_sha256: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub manifest: Manifest,
    pub records: Vec<GraspRecord>,
    pub attempts: Vec<AttemptLog>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn success_rate(&self) -> f64 {
        let c = &self.manifest.counts;
        if c.attempts == 0 {
            0.0
        } else {
            c.successes as f64 / c.attempts as f64
        }
    }

    /// First `n` records as a new dataset.
    pub fn prefix(&self, n: usize) -> Result<Dataset, CollectError> {
        if n > self.records.len() {
            return Err(CollectError::InsufficientSource { source_index: 0, needed: n, available: self.records.len() });
        }
        let records = self.records[..n].to_vec();
        let mut manifest = self.manifest.clone();
        manifest.counts = record_counts(&records, n, 0);
        manifest.tag = format!("{}[..{n}]", self.manifest.tag);
        Ok(Dataset { manifest, records, attempts: Vec::new() })
    }
}

fn record_counts(records: &[GraspRecord], attempts: usize, emergency_stops: usize) -> Counts {
    let successes = records.iter().filter(|r| r.reward).count();
    Counts { attempts, total: records.len(), successes, failures: records.len() - successes, emergency_stops }
}

fn distinct(it: impl Iterator<Item = String>) -> Vec<String> {
    let mut v: Vec<String> = it.collect();
    v.sort();
    v.dedup();
    v
}

struct Attempt {
    record: Option<GraspRecord>,
    log: AttemptLog,
}

/// Random placement; crowded draws are retried with derived seeds and, as a
/// last resort, with one object fewer.
fn scene_for(cfg: &CollectConfig, members: &[ObjectModel], seed: u64) -> Result<Scene, SceneError> {
    let mut count = cfg.objects_per_scene.min(members.len());
    loop {
        let mut last = None;
        for retry in 0..PLACEMENT_RETRIES {
            let s = if retry == 0 { seed } else { derive_seed(seed, &[label("replace"), retry]) };
            let placement = Placement { workspace: cfg.workspace, count, overlap_frac: cfg.overlap_frac, seed: s };
            match place_randomly(members, &placement) {
                Ok(scene) => return Ok(scene),
                Err(e @ SceneError::PlacementExhausted { .. }) => last = Some(e),
                Err(e) => return Err(e),
            }
        }
        if count == 1 {
            return Err(last.expect("at least one retry ran"));
        }
        count -= 1;
    }
}

const PLACEMENT_RETRIES: u64 = 8;

fn attempt_on(
    cfg: &CollectConfig,
    guide: Option<(&ModelParams, f64)>,
    scene: &Scene,
    scene_seed: u64,
    index: usize,
) -> Result<Attempt, CollectError> {
    let image = render(scene, &cfg.camera);
    let policy_seed = derive_seed(cfg.seed, &[label("collect-policy"), index as u64]);
    let explore = rng_for(cfg.seed, &[label("collect-explore"), index as u64]).gen::<f64>();
    let (u, policy_tag) = match guide {
        Some((model, eps)) if explore >= eps => {
            let obs = Observation { image: &image, camera: &cfg.camera, workspace: cfg.workspace, seed: policy_seed, truth: None };
            (dense_policy(model, &obs, &cfg.patch)?.u, "guided")
        }
        _ => (random_policy(&cfg.workspace, policy_seed).u, "random"),
    };
    let (outcome, interaction) = execute_grasp_logged(scene, &cfg.gripper, &u, &cfg.oracle);
    let log = AttemptLog {
        u,
        gripper: cfg.gripper,
        outcome: outcome.clone(),
        interaction,
        scene_hash: scene.content_hash(),
        seed: scene_seed,
    };
    let record = (outcome != GraspOutcome::EmergencyStop).then(|| GraspRecord {
        patch: cfg.patch.extract(&image, &cfg.camera, u.center()),
        u,
        bin: angle_to_bin(u.phi).expect("proposals use bin centres"),
        reward: outcome.is_success(),
        outcome,
        gripper_tag: cfg.gripper.tag(),
        object_tag: cfg.object_tag(),
        policy_tag: policy_tag.into(),
        scene_seed,
        attempt: index,
    });
    Ok(Attempt { record, log })
}

fn guide_of<'a>(cfg: &CollectConfig, model: Option<&'a ModelParams>) -> Result<Option<(&'a ModelParams, f64)>, CollectError> {
    match (&cfg.policy, model) {
        (CollectPolicy::Random, _) => Ok(None),
        (CollectPolicy::Guided { epsilon, .. }, Some(m)) => {
            if m.net.input != cfg.patch.input {
                return Err(CollectError::InvalidConfig(format!(
                    "model input {} differs from patch input {}",
                    m.net.input, cfg.patch.input
                )));
            }
            Ok(Some((m, *epsilon)))
        }
        (CollectPolicy::Guided { model, .. }, None) => Err(CollectError::ModelLoad(LearnError::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("guided collection needs a model ({})", model.display()),
        )))),
    }
}

/// Attempts `range` of a fresh-placement run. Each attempt depends only on
/// the seed and its index, so shards can run anywhere and be concatenated.
pub fn collect_shard(
    cfg: &CollectConfig,
    model: Option<&ModelParams>,
    range: Range<usize>,
) -> Result<(Vec<GraspRecord>, Vec<AttemptLog>), CollectError> {
    cfg.validate()?;
    if cfg.reset != ResetRule::EveryAttempt {
        return Err(CollectError::InvalidConfig("only fresh-placement runs can be sharded".into()));
    }
    let guide = guide_of(cfg, model)?;
    let members = cfg.members();
    let attempts: Vec<Attempt> = range
        .into_par_iter()
        .map(|i| {
            let scene_seed = derive_seed(cfg.seed, &[label("collect-scene"), i as u64]);
            let scene = scene_for(cfg, &members, scene_seed)?;
            attempt_on(cfg, guide, &scene, scene_seed, i)
        })
        .collect::<Result<_, _>>()?;
    Ok(split(attempts))
}

fn split(attempts: Vec<Attempt>) -> (Vec<GraspRecord>, Vec<AttemptLog>) {
    let mut records = Vec::with_capacity(attempts.len());
    let mut logs = Vec::with_capacity(attempts.len());
    for a in attempts {
        records.extend(a.record);
        logs.push(a.log);
    }
    (records, logs)
}

/// Runs a collection with an already loaded guiding model (ignored for
/// random collection).
pub fn collect_with(cfg: &CollectConfig, model: Option<&ModelParams>) -> Result<Dataset, CollectError> {
    cfg.validate()?;
    let (records, logs) = match cfg.reset {
        ResetRule::EveryAttempt => collect_shard(cfg, model, 0..cfg.n_attempts)?,
        ResetRule::WhenCleared => {
            let guide = guide_of(cfg, model)?;
            let members = cfg.members();
            let mut out = Vec::with_capacity(cfg.n_attempts);
            let mut scene: Option<(Scene, u64)> = None;
            for i in 0..cfg.n_attempts {
                let (current, seed) = match scene.take() {
                    Some((s, seed)) if !s.is_empty() => (s, seed),
                    _ => {
                        let seed = derive_seed(cfg.seed, &[label("collect-scene"), i as u64]);
                        (scene_for(cfg, &members, seed)?, seed)
                    }
                };
                let a = attempt_on(cfg, guide, &current, seed, i)?;
                let next = match &a.log.outcome {
                    GraspOutcome::Success { object } => current.remove_object(object)?,
                    _ => current,
                };
                scene = Some((next, seed));
                out.push(a);
            }
            split(out)
        }
    };
    let e_stops = logs.iter().filter(|l| l.outcome == GraspOutcome::EmergencyStop).count();
    let manifest = Manifest {
        format_version: DATASET_FORMAT_VERSION,
        tag: cfg.tag(),
        counts: record_counts(&records, logs.len(), e_stops),
        gripper_tags: vec![cfg.gripper.tag()],
        object_tags: vec![cfg.object_tag()],
        config_hash: cfg.content_hash(),
        seed: cfg.seed,
        patch_shape: [cfg.patch.input, cfg.patch.input, ImageGrid::CHANNELS],
        sources: Vec::new(),
        patches_sha256: String::new(),
    };
    Ok(Dataset { manifest, records, attempts: logs })
}

/// Runs a collection, loading the guiding model from disk when needed.
pub fn collect(cfg: &CollectConfig) -> Result<Dataset, CollectError> {
    let model = match &cfg.policy {
        CollectPolicy::Random => None,
        CollectPolicy::Guided { model, .. } => Some(load_model(model).map_err(CollectError::ModelLoad)?),
    };
    collect_with(cfg, model.as_ref())
}

/// Record counts per source: `floor(p·total)` each, then the leftover
/// units to the largest fractional parts (earlier sources win ties).
pub fn largest_remainder(proportions: &[f64], total: usize) -> Vec<usize> {
    let raw: Vec<f64> = proportions.iter().map(|p| p * total as f64).collect();
    let mut counts: Vec<usize> = raw.iter().map(|r| r.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..raw.len()).collect();
    order.sort_by(|&a, &b| (raw[b] - raw[b].floor()).total_cmp(&(raw[a] - raw[a].floor())).then(a.cmp(&b)));
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

/// Draws `total` records without replacement, split across sources by
/// `proportions`, and shuffles them.
pub fn mix(sources: &[&Dataset], proportions: &[f64], total: usize, seed: u64) -> Result<Dataset, CollectError> {
    if sources.is_empty() || sources.len() != proportions.len() {
        return Err(CollectError::InvalidConfig("need one proportion per source".into()));
    }
    if proportions.iter().any(|p| !(*p >= 0.0)) || (proportions.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(CollectError::InvalidConfig(format!("proportions {proportions:?} must be non-negative and sum to 1")));
    }
    let shape = sources[0].manifest.patch_shape;
    if sources.iter().any(|s| s.manifest.patch_shape != shape) {
        return Err(CollectError::InvalidConfig("sources have different patch shapes".into()));
    }
    let counts = largest_remainder(proportions, total);
    let mut records = Vec::with_capacity(total);
    let mut shares = Vec::with_capacity(sources.len());
    for (i, (src, &n)) in sources.iter().zip(&counts).enumerate() {
        if n > src.records.len() {
            return Err(CollectError::InsufficientSource { source_index: i, needed: n, available: src.records.len() });
        }
        let mut rng = rng_for(seed, &[label("mix-source"), i as u64]);
        let mut idx = rand::seq::index::sample(&mut rng, src.records.len(), n).into_vec();
        idx.sort_unstable();
        records.extend(idx.into_iter().map(|j| src.records[j].clone()));
        shares.push(SourceShare { tag: src.manifest.tag.clone(), config_hash: src.manifest.config_hash.clone(), records: n });
    }
    records.shuffle(&mut rng_for(seed, &[label("mix-shuffle")]));
    let tag = shares
        .iter()
        .map(|s| format!("{}x{}", s.records, s.tag))
        .collect::<Vec<_>>()
        .join("+");
    let manifest = Manifest {
        format_version: DATASET_FORMAT_VERSION,
        tag,
        counts: record_counts(&records, records.len(), 0),
        gripper_tags: distinct(records.iter().map(|r| r.gripper_tag.clone())),
        object_tags: distinct(records.iter().map(|r| r.object_tag.clone())),
        config_hash: hex_digest(serde_json::to_string(&(&shares, proportions, total, seed)).unwrap().as_bytes()),
        seed,
        patch_shape: shape,
        sources: shares,
        patches_sha256: String::new(),
    };
    Ok(Dataset { manifest, records, attempts: Vec::new() })
}

/// Per-record line of `records.jsonl`.
#[derive(Serialize, Deserialize)]
struct RecordLine {
    u: GraspConfig,
    bin: AngleBin,
    reward: u8,
    outcome: GraspOutcome,
    gripper_tag: String,
    object_tag: String,
    policy_tag: String,
    scene_seed: u64,
    attempt: usize,
    patch_offset: usize,
    patch_len: usize,
}

fn patches_bytes(records: &[GraspRecord]) -> Vec<u8> {
    let mut buf = Vec::with_capacity(records.iter().map(|r| r.patch.data().len() * 4).sum());
    for r in records {
        for v in r.patch.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    buf
}

pub fn save_dataset(ds: &Dataset, dir: &Path) -> Result<(), CollectError> {
    fs::create_dir_all(dir)?;
    let patches = patches_bytes(&ds.records);
    fs::write(dir.join("patches.bin"), &patches)?;

    let mut w = BufWriter::new(File::create(dir.join("records.jsonl"))?);
    let mut offset = 0;
    for r in &ds.records {
        let len = r.patch.data().len();
        let line = RecordLine {
            u: r.u,
            bin: r.bin,
            reward: r.reward as u8,
            outcome: r.outcome.clone(),
            gripper_tag: r.gripper_tag.clone(),
            object_tag: r.object_tag.clone(),
            policy_tag: r.policy_tag.clone(),
            scene_seed: r.scene_seed,
            attempt: r.attempt,
            patch_offset: offset,
            patch_len: len,
        };
        serde_json::to_writer(&mut w, &line)?;
        w.write_all(b"\n")?;
        offset += len;
    }
    w.flush()?;

    let mut w = BufWriter::new(File::create(dir.join("attempts.jsonl"))?);
    for a in &ds.attempts {
        serde_json::to_writer(&mut w, a)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;

    let mut manifest = ds.manifest.clone();
    manifest.patches_sha256 = hex_digest(&patches);
    fs::write(dir.join("manifest.json"), serde_json::to_vec_pretty(&manifest)?)?;
    Ok(())
}

fn jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>, CollectError> {
    let mut out = Vec::new();
    for line in BufReader::new(File::open(path)?).lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

pub fn load_dataset(dir: &Path) -> Result<Dataset, CollectError> {
    let mut manifest: Manifest = serde_json::from_slice(&fs::read(dir.join("manifest.json"))?)?;
    let mismatch = |s: String| Err(CollectError::ManifestMismatch(s));
    if manifest.format_version != DATASET_FORMAT_VERSION {
        return mismatch(format!("format version {}", manifest.format_version));
    }
    let mut bytes = Vec::new();
    File::open(dir.join("patches.bin"))?.read_to_end(&mut bytes)?;
    if !manifest.patches_sha256.is_empty() && hex_digest(&bytes) != manifest.patches_sha256 {
        return mismatch("patches.bin hash differs from manifest".into());
    }
    if bytes.len() % 4 != 0 {
        return mismatch(format!("patches.bin length {} is not a multiple of 4", bytes.len()));
    }
    let floats: Vec<f32> = bytes.chunks_exact(4).map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]])).collect();
    let [h, w, c] = manifest.patch_shape;
    let lines: Vec<RecordLine> = jsonl(&dir.join("records.jsonl"))?;
    let mut records = Vec::with_capacity(lines.len());
    let mut expected = 0;
    for l in lines {
        if l.patch_len != h * w * c || l.patch_offset != expected || l.patch_offset + l.patch_len > floats.len() {
            return mismatch(format!("record for attempt {} points outside patches.bin", l.attempt));
        }
        expected += l.patch_len;
        let patch = ImageGrid::from_raw(h, w, floats[l.patch_offset..l.patch_offset + l.patch_len].to_vec())
            .expect("length checked");
        if (l.reward == 1) != l.outcome.is_success() || l.reward > 1 {
            return mismatch(format!("reward disagrees with outcome at attempt {}", l.attempt));
        }
        records.push(GraspRecord {
            patch,
            u: l.u,
            bin: l.bin,
            reward: l.reward == 1,
            outcome: l.outcome,
            gripper_tag: l.gripper_tag,
            object_tag: l.object_tag,
            policy_tag: l.policy_tag,
            scene_seed: l.scene_seed,
            attempt: l.attempt,
        });
    }
    if expected != floats.len() {
        return mismatch(format!("patches.bin holds {} floats, records use {expected}", floats.len()));
    }
    let attempts_path = dir.join("attempts.jsonl");
    let attempts: Vec<AttemptLog> = if attempts_path.exists() { jsonl(&attempts_path)? } else { Vec::new() };
    let stored = manifest.counts;
    let recomputed = record_counts(&records, stored.attempts, stored.emergency_stops);
    if recomputed != stored {
        return mismatch(format!("manifest counts {stored:?} but records give {recomputed:?}"));
    }
    manifest.patches_sha256 = hex_digest(&bytes);
    Ok(Dataset { manifest, records, attempts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learn::{save_model, NetSpec};

    fn cfg(objects: Vec<ObjectSet>, material: Material, n: usize, seed: u64) -> CollectConfig {
        CollectConfig::desk(objects, GripperSpec::two_finger(material), n, seed)
    }

    #[test]
    fn deterministic_and_reward_consistent() {
        let c = cfg(vec![ObjectSet::SoftToys25], Material::Rigid, 10, 7);
        let a = collect(&c).unwrap();
        let b = collect(&c).unwrap();
        assert_eq!(a, b);
        for r in &a.records {
            assert_eq!(r.reward, r.outcome.is_success());
            assert_eq!((r.patch.height(), r.patch.width()), (32, 32));
        }
        let n = &a.manifest.counts;
        assert_eq!(n.successes + n.failures, n.total);
        assert_eq!(n.total + n.emergency_stops, n.attempts);
        assert_eq!(a.manifest.tag, "2Finger-RigidSoft-10");
    }

    #[test]
    fn shards_concatenate_to_full_run() {
        let c = cfg(vec![ObjectSet::Level1, ObjectSet::Level2], Material::Rigid, 24, 3);
        let full = collect(&c).unwrap();
        let mut records = Vec::new();
        let mut logs = Vec::new();
        for r in [0..5, 5..17, 17..24] {
            let (rec, log) = collect_shard(&c, None, r).unwrap();
            records.extend(rec);
            logs.extend(log);
        }
        assert_eq!(records, full.records);
        assert_eq!(logs, full.attempts);
    }

    #[test]
    fn emergency_stops_are_counted_not_recorded() {
        let c = cfg(vec![ObjectSet::Level1], Material::Rigid, 200, 1);
        let ds = collect(&c).unwrap();
        assert!(ds.manifest.counts.emergency_stops > 0);
        assert!(ds.records.iter().all(|r| r.outcome != GraspOutcome::EmergencyStop));
        let stops = ds.attempts.iter().filter(|a| a.outcome == GraspOutcome::EmergencyStop).count();
        assert_eq!(stops, ds.manifest.counts.emergency_stops);
    }

    #[test]
    fn guided_with_full_exploration_equals_random() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.bin");
        save_model(&ModelParams::init(NetSpec::desk_small(), 1).unwrap(), &path).unwrap();
        let random = cfg(vec![ObjectSet::SoftToys25], Material::Rigid, 12, 9);
        let guided = random.clone().guided(path.clone(), 1.0);
        assert_eq!(collect(&random).unwrap().records, collect(&guided).unwrap().records);
        let greedy = random.clone().guided(path, 0.0);
        assert!(collect(&greedy).unwrap().records.iter().all(|r| r.policy_tag == "guided"));
    }

    #[test]
    fn guided_without_model_file_fails() {
        let c = cfg(vec![ObjectSet::SoftToys25], Material::Rigid, 2, 0).guided("/nonexistent/m.bin".into(), 0.2);
        assert!(matches!(collect(&c), Err(CollectError::ModelLoad(_))));
    }

    #[test]
    fn config_validation() {
        let mut c = cfg(vec![ObjectSet::SoftToys25], Material::Rigid, 0, 0);
        assert!(matches!(c.validate(), Err(CollectError::InvalidConfig(_))));
        c.n_attempts = 1;
        c = c.guided("m.bin".into(), 1.5);
        assert!(matches!(c.validate(), Err(CollectError::InvalidConfig(_))));
    }

    #[test]
    fn when_cleared_keeps_the_scene() {
        let mut c = cfg(vec![ObjectSet::SoftToys25], Material::Rigid, 30, 2);
        c.reset = ResetRule::WhenCleared;
        let ds = collect(&c).unwrap();
        let seeds: std::collections::HashSet<u64> = ds.attempts.iter().map(|a| a.seed).collect();
        assert!(seeds.len() < 30);
    }

    #[test]
    fn largest_remainder_rule() {
        assert_eq!(largest_remainder(&[0.5, 0.5], 5000), vec![2500, 2500]);
        assert_eq!(largest_remainder(&[0.5, 0.5], 3), vec![2, 1]);
        assert_eq!(largest_remainder(&[1.0], 17), vec![17]);
        assert_eq!(largest_remainder(&[0.2, 0.3, 0.5], 7), vec![1, 2, 4]);
    }

    #[test]
    fn mix_draws_verbatim_records() {
        let a = collect(&cfg(vec![ObjectSet::SoftToys25], Material::Rigid, 20, 1)).unwrap();
        let b = collect(&cfg(vec![ObjectSet::Level1], Material::Soft, 20, 2)).unwrap();
        let m = mix(&[&a, &b], &[0.5, 0.5], 9, 4).unwrap();
        assert_eq!(m.len(), 9);
        assert_eq!(m.manifest.sources.iter().map(|s| s.records).collect::<Vec<_>>(), vec![5, 4]);
        for r in &m.records {
            let hits = a.records.iter().chain(&b.records).filter(|s| *s == r).count();
            assert_eq!(hits, 1);
        }
        let one = mix(&[&a], &[1.0], 5, 0).unwrap();
        assert!(one.records.iter().all(|r| a.records.contains(r)));
        assert!(matches!(mix(&[&a, &b], &[0.5, 0.5], 1000, 0), Err(CollectError::InsufficientSource { .. })));
        assert!(matches!(mix(&[&a, &b], &[0.5, 0.6], 4, 0), Err(CollectError::InvalidConfig(_))));
    }

    #[test]
    fn save_load_round_trip_and_corruption() {
        let ds = collect(&cfg(vec![ObjectSet::Level1], Material::Soft, 15, 5)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_dataset(&ds, dir.path()).unwrap();
        let back = load_dataset(dir.path()).unwrap();
        assert_eq!(back.records, ds.records);
        assert_eq!(back.attempts, ds.attempts);
        assert_eq!(back.manifest.counts, ds.manifest.counts);

        let p = dir.path().join("patches.bin");
        let mut bytes = fs::read(&p).unwrap();
        bytes.truncate(bytes.len() - 4);
        fs::write(&p, &bytes).unwrap();
        assert!(matches!(load_dataset(dir.path()), Err(CollectError::ManifestMismatch(_))));
    }
}
