//! Grasp-learning lab: a planar bin-picking simulator, a patch-based grasp
//! success classifier and the benchmark harness around them.

pub mod bench;
pub mod collect;
pub mod config;
pub mod geometry;
pub mod gripper;
pub mod learn;
pub mod oracle;
pub mod policy;
pub mod render;
pub mod scene;
pub mod seeding;
