//! Experiment harness: metrics, training recipes, single-object and
//! clutter-removal evaluation, data-size ablation and report files.

mod recipes;
mod report;
mod run;

pub use recipes::{
    build_training_set, collect_source, recipe_names, source_config, train_recipe, ExperimentSpec, RecipePart,
    SourceCache, SourceTag, TrainingRecipe,
};
pub use report::{emit_report, AggregateRow, BenchReport, ObjectRow, ReportKind, TrialRow};
pub use run::{
    clutter_scene, run_ablation, run_clutter_removal, run_single_object_eval, AblationCurve, AblationPoint,
};

use crate::collect::CollectError;
use crate::learn::LearnError;
use crate::policy::PolicyError;
use crate::scene::SceneError;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default simulated execution time per attempt, in seconds.
pub const DEFAULT_TE: f64 = 10.4;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("t_c + t_e must be positive, got {0}")]
    NonPositiveTime(f64),
    #[error("invalid experiment: {0}")]
    InvalidSpec(String),
    #[error("cannot load model: {0}")]
    ModelLoad(LearnError),
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error(transparent)]
    Collect(#[from] CollectError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Mean picks per hour: `3600 · success_rate / (t_c + t_e)` with times in
/// seconds.
pub fn compute_mpph(success_rate: f64, t_c: f64, t_e: f64) -> Result<f64, BenchError> {
    let t = t_c + t_e;
    if !(t > 0.0) {
        return Err(BenchError::NonPositiveTime(t));
    }
    Ok(3600.0 * success_rate / t)
}

/// Attempt counts and timing for one row of a report. Emergency stops are
/// failures here.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub attempts: usize,
    pub successes: usize,
    pub failures: usize,
    pub emergency_stops: usize,
    pub success_rate: f64,
    /// Mean measured grasp computation time, seconds.
    pub t_c: f64,
    /// Simulated execution time per attempt, seconds.
    pub t_e: f64,
    pub mpph: f64,
}

impl Metrics {
    /// From counts and the summed computation time over all attempts.
    pub fn from_counts(
        attempts: usize,
        successes: usize,
        emergency_stops: usize,
        t_c_total: f64,
        t_e: f64,
    ) -> Result<Self, BenchError> {
        assert!(successes + emergency_stops <= attempts, "more outcomes than attempts");
        let success_rate = if attempts == 0 { 0.0 } else { successes as f64 / attempts as f64 };
        let t_c = if attempts == 0 { 0.0 } else { t_c_total / attempts as f64 };
        Ok(Self {
            attempts,
            successes,
            failures: attempts - successes,
            emergency_stops,
            success_rate,
            t_c,
            t_e,
            mpph: compute_mpph(success_rate, t_c, t_e)?,
        })
    }

    /// Pools rows: counts add, `t_c` is attempt-weighted.
    pub fn pooled<'a>(rows: impl IntoIterator<Item = &'a Metrics>, t_e: f64) -> Result<Self, BenchError> {
        let (mut a, mut s, mut e, mut t) = (0, 0, 0, 0.0);
        for m in rows {
            a += m.attempts;
            s += m.successes;
            e += m.emergency_stops;
            t += m.t_c * m.attempts as f64;
        }
        Self::from_counts(a, s, e, t, t_e)
    }

    /// Whether `mpph` agrees with the row's own rate and times.
    pub fn mpph_consistent(&self, tol: f64) -> bool {
        compute_mpph(self.success_rate, self.t_c, self.t_e).map_or(false, |m| (m - self.mpph).abs() <= tol)
    }
}

/// Reported success rate and MPPH of the four methods in the paper's
/// clutter-removal table, with their `t_c` and `t_e`.
pub const PAPER_CLUTTER_ROWS: [(f64, f64, f64, f64); 4] = [
    (0.3505, 10.3, 11.2, 104.34),
    (0.6667, 10.1, 10.4, 208.13),
    (0.8197, 10.2, 10.3, 255.90),
    (0.7463, 0.16, 10.4, 452.28),
];

/// `reported / (success_rate / (t_c + t_e))` per row of
/// [`PAPER_CLUTTER_ROWS`].
pub fn paper_mpph_constants() -> Vec<f64> {
    PAPER_CLUTTER_ROWS.iter().map(|&(sr, tc, te, mpph)| mpph / (sr / (tc + te))).collect()
}
