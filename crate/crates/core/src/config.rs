//! Scale presets shared by collection, training and evaluation.

use crate::geometry::{Aabb, Vec2};
use crate::learn::NetSpec;
use crate::policy::PatchSpec;
use crate::render::CameraModel;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PresetName {
    Desk,
    Paper,
}

impl FromStr for PresetName {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "desk" => Ok(PresetName::Desk),
            "paper" => Ok(PresetName::Paper),
            _ => Err(format!("unknown preset {s:?} (expected desk or paper)")),
        }
    }
}

impl fmt::Display for PresetName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PresetName::Desk => "desk",
            PresetName::Paper => "paper",
        })
    }
}

/// Camera, workspace, patch geometry and network for one scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preset {
    pub name: PresetName,
    pub camera: CameraModel,
    pub workspace: Aabb,
    pub patch: PatchSpec,
    pub net: NetSpec,
}

impl Preset {
    /// 256 px images of a 400 mm bin, 40 px crops fed to the 32 px net.
    pub fn desk() -> Self {
        Self {
            name: PresetName::Desk,
            camera: CameraModel::desk(),
            workspace: Aabb::new(Vec2::new(0.0, 0.0), Vec2::new(400.0, 400.0)),
            patch: PatchSpec::desk(),
            net: NetSpec::desk(),
        }
    }

    /// 1280×720 frames, 160 px crops resized to the 227 px net.
    pub fn paper() -> Self {
        Self {
            name: PresetName::Paper,
            camera: CameraModel::paper(),
            workspace: Aabb::new(Vec2::new(0.0, 0.0), Vec2::new(400.0, 400.0)),
            patch: PatchSpec::paper(),
            net: NetSpec::paper(),
        }
    }

    pub fn by_name(name: PresetName) -> Self {
        match name {
            PresetName::Desk => Self::desk(),
            PresetName::Paper => Self::paper(),
        }
    }
}
