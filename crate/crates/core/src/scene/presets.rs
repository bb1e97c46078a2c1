//! Object-set analogs: 25 soft toys and two eight-object rigid levels.
//!
//! Dimensions are fixed analogs chosen for a graded difficulty ordering,
//! not measurements of the physical objects. Level 1 is mostly round and
//! medium sized with two wide plates that cannot be pinched across their
//! centre; Level 2 holds low, thin and box-like items.

use super::{Material, ObjectModel, ShapeSpec};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ObjectSet {
    #[serde(rename = "SoftToys25")]
    SoftToys25,
    #[serde(rename = "Level1-8")]
    Level1,
    #[serde(rename = "Level2-8")]
    Level2,
}

impl ObjectSet {
    pub const ALL: [ObjectSet; 3] = [ObjectSet::SoftToys25, ObjectSet::Level1, ObjectSet::Level2];

    pub fn name(self) -> &'static str {
        match self {
            ObjectSet::SoftToys25 => "SoftToys25",
            ObjectSet::Level1 => "Level1-8",
            ObjectSet::Level2 => "Level2-8",
        }
    }

    pub fn preset(self) -> ObjectSetPreset {
        let members = match self {
            ObjectSet::SoftToys25 => soft_toys(),
            ObjectSet::Level1 => level1(),
            ObjectSet::Level2 => level2(),
        };
        ObjectSetPreset { name: self, members }
    }

    pub fn members(self) -> Vec<ObjectModel> {
        self.preset().members
    }
}

impl fmt::Display for ObjectSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ObjectSet {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        ObjectSet::ALL
            .into_iter()
            .find(|o| o.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown object set {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectSetPreset {
    pub name: ObjectSet,
    pub members: Vec<ObjectModel>,
}

impl ObjectSetPreset {
    pub fn min_height(&self) -> f64 {
        self.members.iter().map(|m| m.height_mm).fold(f64::INFINITY, f64::min)
    }

    /// Population variance of footprint areas (mm⁴).
    pub fn size_variance(&self) -> f64 {
        let areas: Vec<f64> = self.members.iter().map(|m| m.shape.area()).collect();
        let n = areas.len() as f64;
        let mean = areas.iter().sum::<f64>() / n;
        areas.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n
    }
}

fn obj(id: &str, shape: ShapeSpec, material: Material, height: f64, mass: f64, color: [f32; 3]) -> ObjectModel {
    ObjectModel { id: id.to_string(), shape, material, height_mm: height, mass_g: mass, color }
}

fn rigid(id: &str, shape: ShapeSpec, height: f64, mass: f64, color: [f32; 3]) -> ObjectModel {
    obj(id, shape, Material::Rigid, height, mass, color)
}

fn circle(r: f64) -> ShapeSpec {
    ShapeSpec::Circle { radius: r }
}

fn ellipse(a: f64, b: f64) -> ShapeSpec {
    ShapeSpec::Ellipse { a, b }
}

fn rect(w: f64, h: f64) -> ShapeSpec {
    ShapeSpec::Rect { w, h }
}

fn poly(v: &[[f64; 2]]) -> ShapeSpec {
    ShapeSpec::ConvexPolygon { vertices: v.to_vec() }
}

/// Regular `n`-gon with circumradius `r`, centred at the origin.
fn regular(n: usize, r: f64) -> ShapeSpec {
    let v: Vec<[f64; 2]> = (0..n)
        .map(|i| {
            let t = std::f64::consts::TAU * i as f64 / n as f64;
            [r * t.cos(), r * t.sin()]
        })
        .collect();
    poly(&v)
}

/// Stadium of total length `len` and width `w`, ends approximated by
/// half-octagons.
fn capsule(len: f64, w: f64) -> ShapeSpec {
    let r = 0.5 * w;
    let cx = 0.5 * len - r;
    let mut v = Vec::new();
    for i in 0..=4 {
        let t = -std::f64::consts::FRAC_PI_2 + std::f64::consts::PI * i as f64 / 4.0;
        v.push([cx + r * t.cos(), r * t.sin()]);
    }
    for i in 0..=4 {
        let t = std::f64::consts::FRAC_PI_2 + std::f64::consts::PI * i as f64 / 4.0;
        v.push([-cx + r * t.cos(), r * t.sin()]);
    }
    poly(&v)
}

fn soft_toys() -> Vec<ObjectModel> {
    use Material::Soft;
    let specs: [(&str, ShapeSpec, f64, f64, [f32; 3]); 25] = [
        ("toy-bear", circle(30.0), 60.0, 90.0, [0.62, 0.40, 0.22]),
        ("toy-duck", ellipse(36.0, 26.0), 55.0, 70.0, [0.95, 0.82, 0.10]),
        ("toy-frog", ellipse(32.0, 24.0), 40.0, 60.0, [0.20, 0.70, 0.25]),
        ("toy-pig", circle(28.0), 50.0, 75.0, [0.95, 0.60, 0.70]),
        ("toy-star", regular(5, 36.0), 30.0, 40.0, [0.90, 0.75, 0.05]),
        ("toy-cube", rect(48.0, 48.0), 48.0, 60.0, [0.20, 0.40, 0.85]),
        ("toy-carrot", capsule(84.0, 28.0), 30.0, 35.0, [0.95, 0.45, 0.05]),
        ("toy-whale", ellipse(40.0, 22.0), 38.0, 55.0, [0.15, 0.35, 0.60]),
        ("toy-ball", circle(24.0), 48.0, 30.0, [0.85, 0.10, 0.15]),
        ("toy-bunny", ellipse(30.0, 26.0), 65.0, 70.0, [0.80, 0.78, 0.74]),
        ("toy-cat", circle(32.0), 45.0, 85.0, [0.45, 0.45, 0.45]),
        ("toy-owl", regular(6, 30.0), 55.0, 60.0, [0.55, 0.30, 0.55]),
        ("toy-fish", ellipse(42.0, 18.0), 30.0, 40.0, [0.10, 0.65, 0.75]),
        ("toy-heart", regular(5, 30.0), 35.0, 30.0, [0.90, 0.15, 0.40]),
        ("toy-turtle", ellipse(34.0, 28.0), 32.0, 65.0, [0.30, 0.55, 0.20]),
        ("toy-lion", circle(34.0), 58.0, 95.0, [0.85, 0.60, 0.20]),
        ("toy-mouse", ellipse(26.0, 18.0), 30.0, 25.0, [0.60, 0.60, 0.65]),
        ("toy-pillow", rect(70.0, 40.0), 30.0, 45.0, [0.70, 0.85, 0.95]),
        ("toy-bee", ellipse(30.0, 22.0), 40.0, 30.0, [0.95, 0.85, 0.20]),
        ("toy-dino", poly(&[[-40.0, -18.0], [36.0, -20.0], [40.0, 6.0], [-6.0, 24.0], [-38.0, 12.0]]), 42.0, 70.0, [0.35, 0.75, 0.45]),
        ("toy-octopus", regular(8, 32.0), 36.0, 50.0, [0.70, 0.25, 0.70]),
        ("toy-banana", capsule(78.0, 24.0), 26.0, 30.0, [0.98, 0.90, 0.35]),
        ("toy-penguin", ellipse(28.0, 22.0), 60.0, 55.0, [0.10, 0.10, 0.15]),
        ("toy-donut", circle(27.0), 30.0, 35.0, [0.85, 0.55, 0.35]),
        ("toy-block", rect(56.0, 34.0), 34.0, 40.0, [0.25, 0.60, 0.90]),
    ];
    specs.into_iter().map(|(id, s, h, m, c)| obj(id, s, Soft, h, m, c)).collect()
}

fn level1() -> Vec<ObjectModel> {
    vec![
        rigid("softball", circle(45.0), 70.0, 190.0, [0.90, 0.85, 0.30]),
        rigid("baseball", circle(37.0), 70.0, 145.0, [0.85, 0.80, 0.72]),
        rigid("plastic-apple", circle(36.0), 65.0, 70.0, [0.80, 0.10, 0.10]),
        rigid("plastic-orange", circle(33.0), 62.0, 50.0, [0.95, 0.55, 0.05]),
        rigid("mug", circle(40.0), 60.0, 120.0, [0.70, 0.15, 0.15]),
        rigid("peach", circle(29.0), 55.0, 40.0, [0.98, 0.65, 0.45]),
        rigid("plate", circle(85.0), 20.0, 280.0, [0.55, 0.75, 0.90]),
        rigid("skillet-lid", circle(90.0), 22.0, 300.0, [0.35, 0.35, 0.40]),
    ]
}

fn level2() -> Vec<ObjectModel> {
    vec![
        rigid("banana", capsule(120.0, 20.0), 15.0, 66.0, [0.95, 0.85, 0.15]),
        rigid("mustard-bottle", poly(&[[-70.0, -27.0], [45.0, -27.0], [70.0, -10.0], [70.0, 10.0], [45.0, 27.0], [-70.0, 27.0]]), 32.0, 430.0, [0.95, 0.80, 0.05]),
        rigid("cracker-box", rect(230.0, 150.0), 40.0, 410.0, [0.75, 0.20, 0.10]),
        rigid("sugar-box", rect(90.0, 38.0), 38.0, 510.0, [0.85, 0.85, 0.55]),
        rigid("marker", rect(110.0, 16.0), 14.0, 16.0, [0.10, 0.10, 0.10]),
        rigid("clamp", poly(&[[-45.0, -20.0], [55.0, -20.0], [-45.0, 30.0]]), 25.0, 200.0, [0.10, 0.25, 0.80]),
        rigid("pudding-box", rect(88.0, 70.0), 30.0, 190.0, [0.55, 0.35, 0.20]),
        rigid("power-drill", poly(&[[-65.0, -22.0], [40.0, -30.0], [70.0, 0.0], [40.0, 30.0], [-65.0, 22.0]]), 45.0, 900.0, [0.20, 0.55, 0.60]),
    ]
}
