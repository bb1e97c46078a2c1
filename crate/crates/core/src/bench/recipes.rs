//! Training recipes: which collected datasets are mixed, in what shares,
//! and how the resulting model is tested.

use super::{BenchError, DEFAULT_TE};
use crate::collect::{collect_with, mix, CollectConfig, CollectPolicy, Dataset};
use crate::config::Preset;
use crate::gripper::GripperSpec;
use crate::learn::{train, EpochStats, ModelParams, TrainConfig};
use crate::oracle::OracleConfig;
use crate::policy::PolicyConfig;
use crate::scene::{Material, ObjectSet};
use crate::seeding::{derive_seed, label};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;

/// Dataset family such as `4Finger-SoftRigid-Guided`: finger count, pad
/// material, object material (soft toys or the rigid levels) and whether
/// a trained model proposed the grasps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct SourceTag {
    pub fingers: u8,
    pub finger: Material,
    pub object: Material,
    pub guided: bool,
}

impl SourceTag {
    pub const RIGID_SOFT_2F: SourceTag = SourceTag { fingers: 2, finger: Material::Rigid, object: Material::Soft, guided: false };

    pub fn objects(&self) -> Vec<ObjectSet> {
        match self.object {
            Material::Soft => vec![ObjectSet::SoftToys25],
            Material::Rigid => vec![ObjectSet::Level1, ObjectSet::Level2],
        }
    }

    pub fn gripper(&self) -> GripperSpec {
        GripperSpec::new(self.fingers, self.finger)
    }
}

impl fmt::Display for SourceTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}Finger-{:?}{:?}", self.fingers, self.finger, self.object)?;
        if self.guided {
            f.write_str("-Guided")?;
        }
        Ok(())
    }
}

impl FromStr for SourceTag {
    type Err = String;
    /// Accepts size tokens (`-5K`) anywhere after the pair and ignores them.
    fn from_str(s: &str) -> Result<Self, String> {
        let err = || format!("bad dataset tag {s:?}, expected e.g. 2Finger-RigidSoft or 4Finger-SoftRigid-Guided");
        let mut parts = s.split('-');
        let fingers = match parts.next() {
            Some("2Finger") => 2,
            Some("4Finger") => 4,
            _ => return Err(err()),
        };
        let (finger, object) = match parts.next() {
            Some("RigidRigid") => (Material::Rigid, Material::Rigid),
            Some("RigidSoft") => (Material::Rigid, Material::Soft),
            Some("SoftRigid") => (Material::Soft, Material::Rigid),
            Some("SoftSoft") => (Material::Soft, Material::Soft),
            _ => return Err(err()),
        };
        let mut guided = false;
        for p in parts {
            if p.eq_ignore_ascii_case("guided") {
                guided = true;
            } else if !p.trim_end_matches(['K', 'k']).chars().all(|c| c.is_ascii_digit() || c == '.') {
                return Err(err());
            }
        }
        Ok(SourceTag { fingers, finger, object, guided })
    }
}

impl TryFrom<String> for SourceTag {
    type Error = String;
    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

impl From<SourceTag> for String {
    fn from(t: SourceTag) -> String {
        t.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecipePart {
    pub source: SourceTag,
    pub proportion: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingRecipe {
    pub parts: Vec<RecipePart>,
    /// Records in the mixed training set.
    pub total: usize,
    /// Attempts per random-policy source collection.
    pub source_attempts: usize,
    /// Attempts per guided source collection.
    pub guided_attempts: usize,
    pub epsilon: f64,
    pub objects_per_scene: usize,
    /// Source whose model guides the guided collections.
    pub guide: SourceTag,
}

impl TrainingRecipe {
    fn desk(parts: &[(&str, f64)]) -> Self {
        Self {
            parts: parts
                .iter()
                .map(|&(t, p)| RecipePart { source: t.parse().expect("built-in tag"), proportion: p })
                .collect(),
            total: 4000,
            source_attempts: 4000,
            guided_attempts: 2000,
            epsilon: 0.2,
            objects_per_scene: 4,
            guide: SourceTag::RIGID_SOFT_2F,
        }
    }
}

/// Everything needed to train and test one recipe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub name: String,
    pub recipe: TrainingRecipe,
    pub test_gripper: GripperSpec,
    pub test_objects: Vec<ObjectSet>,
    pub attempts_per_object: usize,
    pub seeds: Vec<u64>,
    /// Clutter-removal trials and attempt budget per trial.
    pub trials: usize,
    pub budget: usize,
    /// Objects drawn from each rigid level for a clutter scene.
    pub clutter_per_level: usize,
    /// Allowed footprint overlap in clutter scenes.
    pub clutter_overlap: f64,
    pub t_e: f64,
    pub preset: Preset,
    pub train: TrainConfig,
    pub policy: PolicyConfig,
    #[serde(default)]
    pub oracle: OracleConfig,
}

const RECIPES: [(&str, &[(&str, f64)], u8); 8] = [
    ("t1", &[("2Finger-RigidSoft", 1.0)], 4),
    ("t2", &[("4Finger-SoftRigid", 1.0)], 4),
    ("t3", &[("2Finger-RigidSoft", 0.5), ("4Finger-SoftRigid", 0.5)], 4),
    ("t4", &[("2Finger-RigidSoft", 0.5), ("4Finger-SoftRigid-Guided", 0.5)], 4),
    ("t5", &[("2Finger-RigidSoft", 0.5), ("2Finger-SoftRigid-Guided", 0.5)], 4),
    ("t6", &[("2Finger-RigidSoft", 0.5), ("4Finger-SoftRigid-Guided", 0.5)], 2),
    ("t7", &[("2Finger-RigidSoft", 0.5), ("2Finger-SoftRigid-Guided", 0.5)], 2),
    // the t3 mix with both halves collected by the two-finger gripper
    ("t3-precise", &[("2Finger-RigidSoft", 0.5), ("2Finger-SoftRigid", 0.5)], 4),
];

pub fn recipe_names() -> Vec<&'static str> {
    RECIPES.iter().map(|r| r.0).collect()
}

impl ExperimentSpec {
    /// Named desk-scale recipe: `t1`..`t7` or `t3-precise`.
    pub fn named(name: &str, preset: Preset) -> Result<Self, BenchError> {
        let &(n, parts, test_fingers) = RECIPES
            .iter()
            .find(|r| r.0.eq_ignore_ascii_case(name))
            .ok_or_else(|| BenchError::InvalidSpec(format!("unknown recipe {name:?}; known: {:?}", recipe_names())))?;
        Ok(Self {
            name: n.into(),
            recipe: TrainingRecipe::desk(parts),
            test_gripper: GripperSpec::new(test_fingers, Material::Soft),
            test_objects: vec![ObjectSet::Level1, ObjectSet::Level2],
            attempts_per_object: 10,
            seeds: vec![0],
            trials: 5,
            budget: 20,
            clutter_per_level: 5,
            clutter_overlap: 0.2,
            t_e: DEFAULT_TE,
            preset,
            train: TrainConfig::default(),
            policy: PolicyConfig::Dense,
            oracle: OracleConfig::default(),
        })
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |s: &str| Err(BenchError::InvalidSpec(s.into()));
        if self.attempts_per_object == 0 {
            return bad("attempts per object must be at least 1");
        }
        if self.seeds.is_empty() {
            return bad("need at least one seed");
        }
        if self.test_objects.is_empty() {
            return bad("need at least one test object set");
        }
        if !(self.t_e > 0.0) {
            return bad("t_e must be positive");
        }
        if self.recipe.parts.is_empty() {
            return bad("recipe has no parts");
        }
        if (self.recipe.parts.iter().map(|p| p.proportion).sum::<f64>() - 1.0).abs() > 1e-9 {
            return bad("recipe proportions must sum to 1");
        }
        if self.preset.net.input != self.preset.patch.input {
            return bad("network input differs from patch input");
        }
        self.test_gripper.validate().map_err(|e| BenchError::InvalidSpec(e.to_string()))?;
        self.train.validate()?;
        Ok(())
    }

    pub fn content_hash(&self) -> String {
        crate::scene::hex_digest(serde_json::to_string(self).expect("spec serializes").as_bytes())
    }
}

/// Collection config for one source of a recipe under a base seed.
pub fn source_config(spec: &ExperimentSpec, tag: SourceTag, seed: u64) -> CollectConfig {
    let r = &spec.recipe;
    let n = if tag.guided { r.guided_attempts } else { r.source_attempts };
    let mut cfg = CollectConfig::desk(tag.objects(), tag.gripper(), n, derive_seed(seed, &[label("source"), label(&tag.to_string())]));
    cfg.objects_per_scene = r.objects_per_scene;
    cfg.workspace = spec.preset.workspace;
    cfg.camera = spec.preset.camera;
    cfg.patch = spec.preset.patch;
    cfg.oracle = spec.oracle;
    cfg
}

/// Collected datasets and guide models, reused across recipes that share
/// sources under the same seed.
#[derive(Default)]
pub struct SourceCache {
    datasets: HashMap<(SourceTag, u64, usize), Arc<Dataset>>,
    guides: HashMap<(SourceTag, u64), Arc<ModelParams>>,
}

impl SourceCache {
    pub fn new() -> Self {
        Self::default()
    }
}

fn train_seeded(spec: &ExperimentSpec, data: &Dataset, seed: u64, stream: &str) -> Result<(ModelParams, Vec<EpochStats>), BenchError> {
    let init = ModelParams::init(spec.preset.net.clone(), derive_seed(seed, &[label("init"), label(stream)]))?;
    let cfg = TrainConfig { seed: derive_seed(seed, &[label("train"), label(stream)]), ..spec.train };
    Ok(train(&init, &data.records, &cfg)?)
}

/// Dataset for `tag` under `seed`, collecting it (and its guide model)
/// on first use.
pub fn collect_source(
    spec: &ExperimentSpec,
    tag: SourceTag,
    seed: u64,
    cache: &mut SourceCache,
) -> Result<Arc<Dataset>, BenchError> {
    let n = if tag.guided { spec.recipe.guided_attempts } else { spec.recipe.source_attempts };
    if let Some(d) = cache.datasets.get(&(tag, seed, n)) {
        return Ok(d.clone());
    }
    let mut cfg = source_config(spec, tag, seed);
    let ds = if tag.guided {
        let guide = spec.recipe.guide;
        if guide.guided {
            return Err(BenchError::InvalidSpec("the guide source cannot itself be guided".into()));
        }
        let model = match cache.guides.get(&(guide, seed)) {
            Some(m) => m.clone(),
            None => {
                let data = collect_source(spec, guide, seed, cache)?;
                let (m, _) = train_seeded(spec, &data, seed, "guide")?;
                let m = Arc::new(m);
                cache.guides.insert((guide, seed), m.clone());
                m
            }
        };
        cfg.policy = CollectPolicy::Guided {
            model: PathBuf::from(format!("model:{}", model.content_hash())),
            epsilon: spec.recipe.epsilon,
        };
        collect_with(&cfg, Some(&model))?
    } else {
        collect_with(&cfg, None)?
    };
    let ds = Arc::new(ds);
    cache.datasets.insert((tag, seed, n), ds.clone());
    Ok(ds)
}

/// Mixed training set of `total` records for the recipe under `seed`.
pub fn build_training_set(
    spec: &ExperimentSpec,
    seed: u64,
    total: usize,
    cache: &mut SourceCache,
) -> Result<Dataset, BenchError> {
    let mut sources = Vec::with_capacity(spec.recipe.parts.len());
    for p in &spec.recipe.parts {
        sources.push(collect_source(spec, p.source, seed, cache)?);
    }
    let refs: Vec<&Dataset> = sources.iter().map(|d| d.as_ref()).collect();
    let props: Vec<f64> = spec.recipe.parts.iter().map(|p| p.proportion).collect();
    Ok(mix(&refs, &props, total, derive_seed(seed, &[label("mix")]))?)
}

/// Collects, mixes and trains the recipe's model under `seed`.
pub fn train_recipe(
    spec: &ExperimentSpec,
    seed: u64,
    cache: &mut SourceCache,
) -> Result<(ModelParams, Dataset, Vec<EpochStats>), BenchError> {
    spec.validate()?;
    let data = build_training_set(spec, seed, spec.recipe.total, cache)?;
    let (model, curve) = train_seeded(spec, &data, seed, &format!("recipe-{}", data.len()))?;
    Ok((model, data, curve))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tags_parse_and_print() {
        for t in ["2Finger-RigidSoft", "4Finger-SoftRigid-Guided", "2Finger-RigidRigid"] {
            assert_eq!(t.parse::<SourceTag>().unwrap().to_string(), t);
        }
        let t: SourceTag = "4Finger-SoftRigid-2.5K-Guided".parse().unwrap();
        assert!(t.guided && t.fingers == 4 && t.finger == Material::Soft && t.object == Material::Rigid);
        assert!("3Finger-SoftRigid".parse::<SourceTag>().is_err());
        assert!("2Finger-SoftRigid-Fast".parse::<SourceTag>().is_err());
    }

    #[test]
    fn table_recipes() {
        for name in recipe_names() {
            let s = ExperimentSpec::named(name, Preset::desk()).unwrap();
            s.validate().unwrap();
            let json = serde_json::to_string(&s).unwrap();
            assert_eq!(serde_json::from_str::<ExperimentSpec>(&json).unwrap(), s);
        }
        let t4 = ExperimentSpec::named("t4", Preset::desk()).unwrap();
        assert_eq!(t4.test_gripper.n_fingers, 4);
        assert_eq!(t4.recipe.parts[1].source.to_string(), "4Finger-SoftRigid-Guided");
        assert_eq!(ExperimentSpec::named("t7", Preset::desk()).unwrap().test_gripper.n_fingers, 2);
        assert!(ExperimentSpec::named("t9", Preset::desk()).is_err());
    }
}
