//! Evaluation loops.

use super::recipes::{build_training_set, ExperimentSpec, SourceCache};
use super::report::{AggregateRow, BenchReport, ObjectRow, ReportKind, TrialRow};
use super::{BenchError, Metrics};
use crate::learn::{train, ModelParams, TrainConfig};
use crate::oracle::{execute_grasp, GraspOutcome};
use crate::policy::{Observation, Policy, Truth};
use crate::render::render;
use crate::scene::{place_randomly, ObjectModel, ObjectSet, Placement, Scene, SceneError};
use crate::seeding::{derive_seed, label, rng_for};
use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::Arc;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

struct Step {
    outcome: GraspOutcome,
    next: Scene,
    t_c: f64,
}

/// Renders, proposes (timed) and executes one attempt.
fn step(spec: &ExperimentSpec, policy: &Policy, scene: &Scene, seed: u64) -> Result<Step, BenchError> {
    let image = render(scene, &spec.preset.camera);
    let obs = Observation {
        image: &image,
        camera: &spec.preset.camera,
        workspace: spec.preset.workspace,
        seed,
        truth: Some(Truth { scene, gripper: &spec.test_gripper, oracle: &spec.oracle }),
    };
    let start = Instant::now();
    let proposal = policy.propose(&obs)?;
    let t_c = start.elapsed().as_secs_f64();
    let (outcome, next) = execute_grasp(scene, &spec.test_gripper, &proposal.u, &spec.oracle);
    Ok(Step { outcome, next, t_c })
}

fn single_object_scene(spec: &ExperimentSpec, model: &ObjectModel, seed: u64) -> Result<Scene, SceneError> {
    place_randomly(
        std::slice::from_ref(model),
        &Placement { workspace: spec.preset.workspace, count: 1, overlap_frac: 0.0, seed },
    )
}

/// Every test object gets `attempts_per_object` fresh single-object scenes
/// per seed. Scene and policy seeds depend only on (seed, object, attempt),
/// so different policies see identical scenes.
pub fn run_single_object_eval(spec: &ExperimentSpec, policy: &Policy) -> Result<BenchReport, BenchError> {
    spec.validate()?;
    let started_unix = unix_now();
    let objects: Vec<(ObjectSet, ObjectModel)> =
        spec.test_objects.iter().flat_map(|&s| s.members().into_iter().map(move |m| (s, m))).collect();
    let cells: Vec<(usize, u64, usize)> = (0..objects.len())
        .flat_map(|o| spec.seeds.iter().flat_map(move |&s| (0..spec.attempts_per_object).map(move |a| (o, s, a))))
        .collect();
    let results: Vec<(usize, Step)> = cells
        .par_iter()
        .map(|&(o, seed, a)| {
            let id = label(&objects[o].1.id);
            let scene = single_object_scene(spec, &objects[o].1, derive_seed(seed, &[label("eval-scene"), id, a as u64]))?;
            let s = step(spec, policy, &scene, derive_seed(seed, &[label("eval-policy"), id, a as u64]))?;
            Ok((o, s))
        })
        .collect::<Result<_, BenchError>>()?;

    let mut tallies = vec![(0usize, 0usize, 0usize, 0.0f64); objects.len()];
    for (o, s) in &results {
        let t = &mut tallies[*o];
        t.0 += 1;
        t.1 += s.outcome.is_success() as usize;
        t.2 += (s.outcome == GraspOutcome::EmergencyStop) as usize;
        t.3 += s.t_c;
    }
    let mut rows = Vec::with_capacity(objects.len());
    for ((set, m), &(n, s, e, t)) in objects.iter().zip(&tallies) {
        rows.push(ObjectRow { object: m.id.clone(), set: set.name().into(), metrics: Metrics::from_counts(n, s, e, t, spec.t_e)? });
    }
    let mut aggregates = Vec::new();
    for set in &spec.test_objects {
        let members = rows.iter().filter(|r| r.set == set.name()).map(|r| &r.metrics);
        aggregates.push(AggregateRow { name: set.name().into(), metrics: Metrics::pooled(members, spec.t_e)? });
    }
    aggregates.push(AggregateRow { name: "all".into(), metrics: Metrics::pooled(rows.iter().map(|r| &r.metrics), spec.t_e)? });
    Ok(BenchReport {
        kind: ReportKind::SingleObject,
        name: spec.name.clone(),
        policy: policy.name().into(),
        config_hash: spec.content_hash(),
        model_hash: policy.model().map(ModelParams::content_hash),
        seeds: spec.seeds.clone(),
        objects: rows,
        trials: Vec::new(),
        aggregates,
        started_unix,
        finished_unix: unix_now(),
    })
}

/// `clutter_per_level` objects from each rigid level, placed with the
/// spec's overlap allowance. Crowded draws are re-placed under derived
/// seeds.
pub fn clutter_scene(spec: &ExperimentSpec, seed: u64) -> Result<Scene, SceneError> {
    let mut rng = rng_for(seed, &[label("clutter-members")]);
    let mut members = Vec::new();
    for set in [ObjectSet::Level1, ObjectSet::Level2] {
        let all = set.members();
        let k = spec.clutter_per_level.min(all.len());
        let mut idx = sample(&mut rng, all.len(), k).into_vec();
        idx.sort_unstable();
        members.extend(idx.into_iter().map(|i| all[i].clone()));
    }
    let mut last = None;
    for retry in 0..64u64 {
        let placement = Placement {
            workspace: spec.preset.workspace,
            count: members.len(),
            overlap_frac: spec.clutter_overlap,
            seed: derive_seed(seed, &[label("clutter-place"), retry]),
        };
        match place_randomly(&members, &placement) {
            Ok(s) => return Ok(s),
            Err(e @ SceneError::PlacementExhausted { .. }) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.expect("retries ran"))
}

/// Clears a shared clutter scene until empty or out of budget, for
/// `trials` trials per seed.
pub fn run_clutter_removal(spec: &ExperimentSpec, policy: &Policy) -> Result<BenchReport, BenchError> {
    spec.validate()?;
    let n_objects = 2 * spec.clutter_per_level;
    if spec.trials == 0 || n_objects > spec.budget {
        return Err(BenchError::InvalidSpec(format!(
            "need at least one trial and a budget of at least {n_objects} attempts"
        )));
    }
    let started_unix = unix_now();
    let cells: Vec<(u64, usize)> = spec.seeds.iter().flat_map(|&s| (0..spec.trials).map(move |t| (s, t))).collect();
    let trials: Vec<TrialRow> = cells
        .par_iter()
        .enumerate()
        .map(|(i, &(seed, trial))| {
            let trial_seed = derive_seed(seed, &[label("clutter-trial"), trial as u64]);
            let mut scene = clutter_scene(spec, trial_seed)?;
            let objects = scene.len();
            let (mut attempts, mut successes, mut stops, mut t_c) = (0, 0, 0, 0.0);
            while !scene.is_empty() && attempts < spec.budget {
                let s = step(spec, policy, &scene, derive_seed(trial_seed, &[label("clutter-policy"), attempts as u64]))?;
                attempts += 1;
                successes += s.outcome.is_success() as usize;
                stops += (s.outcome == GraspOutcome::EmergencyStop) as usize;
                t_c += s.t_c;
                scene = s.next;
            }
            Ok(TrialRow {
                trial: i,
                seed: trial_seed,
                objects,
                cleared: scene.is_empty(),
                metrics: Metrics::from_counts(attempts, successes, stops, t_c, spec.t_e)?,
            })
        })
        .collect::<Result<_, BenchError>>()?;
    let all = Metrics::pooled(trials.iter().map(|t| &t.metrics), spec.t_e)?;
    Ok(BenchReport {
        kind: ReportKind::Clutter,
        name: spec.name.clone(),
        policy: policy.name().into(),
        config_hash: spec.content_hash(),
        model_hash: policy.model().map(ModelParams::content_hash),
        seeds: spec.seeds.clone(),
        objects: Vec::new(),
        trials,
        aggregates: vec![AggregateRow { name: "all".into(), metrics: all }],
        started_unix,
        finished_unix: unix_now(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationPoint {
    pub size: usize,
    /// Overall success rate per seed, in seed order.
    pub per_seed: Vec<f64>,
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationCurve {
    pub recipe: String,
    pub seeds: Vec<u64>,
    pub points: Vec<AblationPoint>,
}

impl AblationCurve {
    pub fn means(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.mean).collect()
    }
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 { v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (mean, var.sqrt())
}

/// One model per (size, seed), trained on the first `size` records of the
/// seed's mixed dataset and scored by single-object evaluation under that
/// seed.
pub fn run_ablation(
    spec: &ExperimentSpec,
    sizes: &[usize],
    seeds: &[u64],
    cache: &mut SourceCache,
) -> Result<AblationCurve, BenchError> {
    spec.validate()?;
    if sizes.is_empty() || sizes.contains(&0) || sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(BenchError::InvalidSpec(format!("sizes {sizes:?} must be positive and strictly ascending")));
    }
    if seeds.is_empty() {
        return Err(BenchError::InvalidSpec("need at least one seed".into()));
    }
    let max = *sizes.last().unwrap();
    let mut rates = vec![Vec::with_capacity(seeds.len()); sizes.len()];
    for &seed in seeds {
        let full = build_training_set(spec, seed, max, cache)?;
        let mut eval = spec.clone();
        eval.seeds = vec![seed];
        for (i, &n) in sizes.iter().enumerate() {
            let data = full.prefix(n)?;
            let init = ModelParams::init(spec.preset.net.clone(), derive_seed(seed, &[label("init"), label("ablation")]))?;
            let cfg = TrainConfig { seed: derive_seed(seed, &[label("train"), label("ablation"), n as u64]), ..spec.train };
            let (model, _) = train(&init, &data.records, &cfg)?;
            let policy = Policy::from_config(&spec.policy, Some(Arc::new(model)), spec.preset.patch)
                .ok_or_else(|| BenchError::InvalidSpec("ablation needs a learned policy".into()))?;
            rates[i].push(run_single_object_eval(&eval, &policy)?.overall().success_rate);
        }
    }
    let points = sizes
        .iter()
        .zip(rates)
        .map(|(&size, per_seed)| {
            let (mean, sd) = mean_sd(&per_seed);
            AblationPoint { size, per_seed, mean, sd }
        })
        .collect();
    Ok(AblationCurve { recipe: spec.name.clone(), seeds: seeds.to_vec(), points })
}
