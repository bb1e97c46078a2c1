//! Gripper configurations and the finger/object interaction taxonomy.

use crate::geometry::{ConvexPolygon, Vec2};
use crate::oracle::GraspConfig;
use crate::scene::{Material, ObjectModel};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

pub type FingerMaterial = Material;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum InteractionClass {
    RigidRigid,
    RigidSoft,
    SoftRigid,
    SoftSoft,
}

/// Finger material first, object material second.
pub fn classify_interaction(finger: FingerMaterial, object: Material) -> InteractionClass {
    match (finger, object) {
        (Material::Rigid, Material::Rigid) => InteractionClass::RigidRigid,
        (Material::Rigid, Material::Soft) => InteractionClass::RigidSoft,
        (Material::Soft, Material::Rigid) => InteractionClass::SoftRigid,
        (Material::Soft, Material::Soft) => InteractionClass::SoftSoft,
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum GripperError {
    #[error("opening {opening} mm outside [{min}, {max}]")]
    OpeningOutOfRange { opening: f64, min: f64, max: f64 },
    #[error("invalid gripper: {0}")]
    Invalid(String),
}

/// Base tolerances and the parameters that scale the soft bonus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToleranceModel {
    pub pos_tol0: f64,
    pub ang_tol0: f64,
    /// Object height at which a soft finger reaches its full bonus.
    pub h_ref: f64,
    /// Extra positional slack when pinching a soft object.
    pub pinch_margin: f64,
}

impl Default for ToleranceModel {
    fn default() -> Self {
        Self { pos_tol0: 4.0, ang_tol0: 10f64.to_radians(), h_ref: 40.0, pinch_margin: 6.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GripperSpec {
    pub n_fingers: u8,
    pub material: FingerMaterial,
    pub pad_w: f64,
    pub pad_len: f64,
    pub pad_gap: f64,
    pub max_open: f64,
    pub min_close: f64,
    pub soft_depth: f64,
    pub soft_angle: f64,
    #[serde(default)]
    pub tolerance: ToleranceModel,
}

impl GripperSpec {
    pub fn new(n_fingers: u8, material: FingerMaterial) -> Self {
        let soft = material == Material::Soft;
        Self {
            n_fingers,
            material,
            pad_w: 10.0,
            pad_len: 30.0,
            pad_gap: 24.0,
            max_open: 160.0,
            min_close: 0.0,
            soft_depth: if soft { 12.0 } else { 0.0 },
            soft_angle: if soft { 15f64.to_radians() } else { 0.0 },
            tolerance: ToleranceModel::default(),
        }
    }

    pub fn two_finger(material: FingerMaterial) -> Self {
        Self::new(2, material)
    }

    pub fn four_finger(material: FingerMaterial) -> Self {
        Self::new(4, material)
    }

    /// Same geometry with the other pad material.
    pub fn with_material(&self, material: FingerMaterial) -> Self {
        let mut g = Self::new(self.n_fingers, material);
        g.pad_w = self.pad_w;
        g.pad_len = self.pad_len;
        g.pad_gap = self.pad_gap;
        g.max_open = self.max_open;
        g.min_close = self.min_close;
        g.tolerance = self.tolerance;
        g
    }

    pub fn validate(&self) -> Result<(), GripperError> {
        let bad = |s: &str| Err(GripperError::Invalid(s.to_string()));
        if self.n_fingers != 2 && self.n_fingers != 4 {
            return bad("n_fingers must be 2 or 4");
        }
        if !(self.max_open > self.min_close && self.min_close >= 0.0) {
            return bad("need max_open > min_close >= 0");
        }
        if !(self.pad_w > 0.0 && self.pad_len > 0.0) {
            return bad("pad dimensions must be positive");
        }
        if self.n_fingers == 4 && !(self.pad_gap > 0.0) {
            return bad("4-finger pad_gap must be positive");
        }
        if self.material == Material::Rigid && (self.soft_depth != 0.0 || self.soft_angle != 0.0) {
            return bad("rigid pads have no soft depth or angle");
        }
        Ok(())
    }

    /// Pad extent perpendicular to the closing axis.
    pub fn effective_span(&self) -> f64 {
        if self.n_fingers == 4 {
            self.pad_len + self.pad_gap
        } else {
            self.pad_len
        }
    }

    /// Short tag such as `2Finger-Rigid`.
    pub fn tag(&self) -> String {
        format!("{}Finger-{:?}", self.n_fingers, self.material)
    }

    /// Pad rectangles for grasp `u` at `opening` mm.
    pub fn pad_polygons(&self, u: &GraspConfig, opening: f64) -> Result<Vec<ConvexPolygon>, GripperError> {
        if !(opening >= self.min_close && opening <= self.max_open) {
            return Err(GripperError::OpeningOutOfRange { opening, min: self.min_close, max: self.max_open });
        }
        let d = Vec2::from_angle(u.phi);
        let n = d.perp();
        let c = Vec2::new(u.x, u.y);
        let offsets: &[f64] = if self.n_fingers == 4 { &[-0.5, 0.5] } else { &[0.0] };
        let pad = ConvexPolygon::rect(self.pad_w, self.pad_len);
        let mut pads = Vec::with_capacity(2 * offsets.len());
        for side in [-1.0, 1.0] {
            for &o in offsets {
                let center = c + d * (side * 0.5 * opening) + n * (o * self.pad_gap);
                pads.push(pad.transformed(u.phi, center));
            }
        }
        Ok(pads)
    }

    /// Positional (mm) and angular (rad) tolerance for grasping `object`.
    pub fn tolerance_budget(&self, object: &ObjectModel) -> (f64, f64) {
        let t = &self.tolerance;
        let mut pos = t.pos_tol0;
        let mut ang = t.ang_tol0;
        if self.material == Material::Soft {
            let f = (object.height_mm / t.h_ref).clamp(0.0, 1.0);
            pos += self.soft_depth * f;
            ang += self.soft_angle * f;
        }
        if object.material == Material::Soft {
            ang = PI;
            pos += t.pinch_margin;
        }
        if self.n_fingers == 4 {
            pos *= self.effective_span() / self.pad_len;
        }
        (pos, ang)
    }
}

impl Default for GripperSpec {
    fn default() -> Self {
        Self::two_finger(Material::Rigid)
    }
}
