//! Shared fixtures: a from-scratch reference grasp oracle and small random
//! scenes for checking the library oracle against it.

#![allow(dead_code)]

pub mod checks;

use grasplab::geometry::{Aabb, Vec2};
use grasplab::gripper::GripperSpec;
use grasplab::oracle::{GridSpec, OracleConfig};
use grasplab::scene::{place_randomly, Material, ObjectModel, PlacedObject, Placement, Scene, ShapeSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

/// Vertices used for a circle wherever contact is tested against a polygon.
const CIRCLE_SEGMENTS: usize = 256;
const AXIS_STEPS: usize = 180;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefOutcome {
    Success(usize),
    NoContact,
    TooWide,
    BadAlignment,
    Pinch,
    Purchase,
    EStop,
}

#[derive(Debug, Clone)]
enum Shape {
    Circle { c: [f64; 2], r: f64 },
    Poly(Vec<[f64; 2]>),
}

#[derive(Debug, Clone)]
struct Body {
    shape: Shape,
    /// Polygon used for pad contact (the circle's 256-gon for circles).
    hull: Vec<[f64; 2]>,
    soft: bool,
    height: f64,
}

fn add(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] + b[0], a[1] + b[1]]
}
fn sub(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}
fn scale(a: [f64; 2], s: f64) -> [f64; 2] {
    [a[0] * s, a[1] * s]
}
fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}
fn cross(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}
fn rot(p: [f64; 2], t: f64) -> [f64; 2] {
    let (s, c) = t.sin_cos();
    [c * p[0] - s * p[1], s * p[0] + c * p[1]]
}

fn bodies(scene: &Scene) -> Vec<Body> {
    scene
        .objects
        .iter()
        .map(|o| {
            let p = [o.pose.x, o.pose.y];
            let local: Vec<[f64; 2]> = match &o.model.shape {
                ShapeSpec::Circle { .. } => Vec::new(),
                ShapeSpec::Rect { w, h } => {
                    vec![[-w / 2.0, -h / 2.0], [w / 2.0, -h / 2.0], [w / 2.0, h / 2.0], [-w / 2.0, h / 2.0]]
                }
                ShapeSpec::ConvexPolygon { vertices } => vertices.clone(),
                ShapeSpec::Ellipse { .. } => panic!("reference oracle covers circles and polygons only"),
            };
            let (shape, hull) = match &o.model.shape {
                ShapeSpec::Circle { radius } => {
                    let hull = (0..CIRCLE_SEGMENTS)
                        .map(|i| {
                            let t = 2.0 * PI * i as f64 / CIRCLE_SEGMENTS as f64;
                            add(p, [radius * t.cos(), radius * t.sin()])
                        })
                        .collect();
                    (Shape::Circle { c: p, r: *radius }, hull)
                }
                _ => {
                    let w: Vec<[f64; 2]> = local.iter().map(|&v| add(rot(v, o.pose.theta), p)).collect();
                    (Shape::Poly(w.clone()), w)
                }
            };
            Body { shape, hull, soft: o.model.material == Material::Soft, height: o.model.height_mm }
        })
        .collect()
}

/// Outline of a placed object as counter-clockwise vertices, circles and
/// ellipses sampled at 256 points.
pub fn outline(o: &PlacedObject) -> Vec<[f64; 2]> {
    let p = [o.pose.x, o.pose.y];
    let local: Vec<[f64; 2]> = match &o.model.shape {
        ShapeSpec::Circle { radius } => ring(*radius, *radius),
        ShapeSpec::Ellipse { a, b } => ring(*a, *b),
        ShapeSpec::Rect { w, h } => vec![[-w / 2.0, -h / 2.0], [w / 2.0, -h / 2.0], [w / 2.0, h / 2.0], [-w / 2.0, h / 2.0]],
        ShapeSpec::ConvexPolygon { vertices } => vertices.clone(),
    };
    local.iter().map(|&v| add(rot(v, o.pose.theta), p)).collect()
}

fn ring(a: f64, b: f64) -> Vec<[f64; 2]> {
    (0..CIRCLE_SEGMENTS)
        .map(|i| {
            let t = 2.0 * PI * i as f64 / CIRCLE_SEGMENTS as f64;
            [a * t.cos(), b * t.sin()]
        })
        .collect()
}

pub fn area(poly: &[[f64; 2]]) -> f64 {
    0.5 * (0..poly.len()).map(|i| cross(poly[i], poly[(i + 1) % poly.len()])).sum::<f64>()
}

/// Area of the intersection of two convex counter-clockwise polygons.
pub fn intersection_area(a: &[[f64; 2]], b: &[[f64; 2]]) -> f64 {
    let mut out = a.to_vec();
    for i in 0..b.len() {
        if out.is_empty() {
            return 0.0;
        }
        let e = sub(b[(i + 1) % b.len()], b[i]);
        // outward normal of a counter-clockwise edge
        let n = [e[1], -e[0]];
        out = clip(&out, n, dot(n, b[i]));
    }
    if out.len() < 3 {
        0.0
    } else {
        area(&out)
    }
}

fn project(poly: &[[f64; 2]], axis: [f64; 2]) -> (f64, f64) {
    poly.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
        let d = dot(v, axis);
        (lo.min(d), hi.max(d))
    })
}

/// Smallest overlap over the edge normals of both polygons; 0 if separated.
fn overlap_depth(a: &[[f64; 2]], b: &[[f64; 2]]) -> f64 {
    let mut depth = f64::INFINITY;
    for poly in [a, b] {
        for i in 0..poly.len() {
            let e = sub(poly[(i + 1) % poly.len()], poly[i]);
            let len = dot(e, e).sqrt();
            let axis = [-e[1] / len, e[0] / len];
            let (a0, a1) = project(a, axis);
            let (b0, b1) = project(b, axis);
            let o = a1.min(b1) - a0.max(b0);
            if o <= 0.0 {
                return 0.0;
            }
            depth = depth.min(o);
        }
    }
    depth
}

/// Keeps the part of `poly` with `dot(p, n) <= c`.
fn clip(poly: &[[f64; 2]], n: [f64; 2], c: f64) -> Vec<[f64; 2]> {
    let mut out = Vec::new();
    for i in 0..poly.len() {
        let (p, q) = (poly[i], poly[(i + 1) % poly.len()]);
        let (dp, dq) = (dot(p, n) - c, dot(q, n) - c);
        if dp <= 0.0 {
            out.push(p);
        }
        if (dp < 0.0 && dq > 0.0) || (dp > 0.0 && dq < 0.0) {
            out.push(add(p, scale(sub(q, p), dp / (dp - dq))));
        }
    }
    out
}

/// Parameter range of segment `a + t (b - a)`, t in [0, 1], inside the body.
fn chord(body: &Body, a: [f64; 2], b: [f64; 2]) -> Option<(f64, f64)> {
    let d = sub(b, a);
    match &body.shape {
        Shape::Circle { c, r } => {
            let f = sub(a, *c);
            let (qa, qb, qc) = (dot(d, d), 2.0 * dot(f, d), dot(f, f) - r * r);
            let disc = qb * qb - 4.0 * qa * qc;
            if disc < 0.0 {
                return None;
            }
            let s = disc.sqrt();
            let (t0, t1) = (((-qb - s) / (2.0 * qa)).max(0.0), ((-qb + s) / (2.0 * qa)).min(1.0));
            (t0 <= t1).then_some((t0, t1))
        }
        Shape::Poly(v) => {
            let (mut t0, mut t1) = (0.0f64, 1.0f64);
            for i in 0..v.len() {
                let e = sub(v[(i + 1) % v.len()], v[i]);
                // inside is left of each counter-clockwise edge
                let num = cross(e, sub(a, v[i]));
                let den = cross(e, d);
                if den == 0.0 {
                    if num < 0.0 {
                        return None;
                    }
                    continue;
                }
                let t = -num / den;
                if den > 0.0 {
                    t0 = t0.max(t);
                } else {
                    t1 = t1.min(t);
                }
                if t0 > t1 {
                    return None;
                }
            }
            Some((t0, t1))
        }
    }
}

/// Extent along `dir` of the body within the strip of half width `half`
/// around the line through `center` along `dir`.
fn band_extent(body: &Body, center: [f64; 2], dir: [f64; 2], half: f64) -> f64 {
    let n = [-dir[1], dir[0]];
    match &body.shape {
        Shape::Circle { c, r } => {
            let off = dot(sub(*c, center), n);
            // nearest strip offset to the circle's centre line
            let nearest = if off.abs() <= half { 0.0 } else { off.abs() - half };
            if nearest > *r {
                0.0
            } else {
                2.0 * (r * r - nearest * nearest).max(0.0).sqrt()
            }
        }
        Shape::Poly(v) => {
            let m = dot(center, n);
            let s = clip(&clip(v, n, m + half), scale(n, -1.0), -(m - half));
            if s.is_empty() {
                return 0.0;
            }
            let (lo, hi) = project(&s, dir);
            hi - lo
        }
    }
}

fn distance(body: &Body, p: [f64; 2]) -> f64 {
    match &body.shape {
        Shape::Circle { c, r } => (dot(sub(p, *c), sub(p, *c)).sqrt() - r).max(0.0),
        Shape::Poly(v) => {
            let inside = (0..v.len()).all(|i| cross(sub(v[(i + 1) % v.len()], v[i]), sub(p, v[i])) >= 0.0);
            if inside {
                return 0.0;
            }
            (0..v.len())
                .map(|i| {
                    let (a, b) = (v[i], v[(i + 1) % v.len()]);
                    let ab = sub(b, a);
                    let t = (dot(sub(p, a), ab) / dot(ab, ab)).clamp(0.0, 1.0);
                    let q = sub(p, add(a, scale(ab, t)));
                    dot(q, q).sqrt()
                })
                .fold(f64::INFINITY, f64::min)
        }
    }
}

fn tolerances(g: &GripperSpec, soft_obj: bool, height: f64) -> (f64, f64) {
    let t = &g.tolerance;
    let (mut pos, mut ang) = (t.pos_tol0, t.ang_tol0);
    if g.material == Material::Soft {
        let f = (height / t.h_ref).clamp(0.0, 1.0);
        pos += g.soft_depth * f;
        ang += g.soft_angle * f;
    }
    if soft_obj {
        ang = PI;
        pos += t.pinch_margin;
    }
    if g.n_fingers == 4 {
        pos *= (g.pad_len + g.pad_gap) / g.pad_len;
    }
    (pos, ang)
}

fn pads(g: &GripperSpec, c: [f64; 2], phi: f64) -> Vec<Vec<[f64; 2]>> {
    let d = [phi.cos(), phi.sin()];
    let n = [-d[1], d[0]];
    let rows: &[f64] = if g.n_fingers == 4 { &[-0.5, 0.5] } else { &[0.0] };
    let mut out = Vec::new();
    for side in [-1.0, 1.0] {
        for &r in rows {
            let pc = add(add(c, scale(d, side * 0.5 * g.max_open)), scale(n, r * g.pad_gap));
            let (hw, hl) = (0.5 * g.pad_w, 0.5 * g.pad_len);
            out.push(
                [[-hw, -hl], [hw, -hl], [hw, hl], [-hw, hl]]
                    .iter()
                    .map(|&[a, b]| add(pc, add(scale(d, a), scale(n, b))))
                    .collect(),
            );
        }
    }
    out
}

fn angle_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(PI);
    d.min(PI - d)
}

/// One grasp through the reference stages.
pub fn reference_outcome(scene: &Scene, g: &GripperSpec, cfg: &OracleConfig, x: f64, y: f64, phi: f64) -> RefOutcome {
    reference_with(&bodies(scene), g, cfg, [x, y], phi)
}

fn reference_with(bs: &[Body], g: &GripperSpec, cfg: &OracleConfig, c: [f64; 2], phi: f64) -> RefOutcome {
    let finger_soft = g.material == Material::Soft;
    let mut blocked = false;
    for b in bs.iter().filter(|b| b.height > cfg.descent_clearance) {
        for pad in pads(g, c, phi) {
            let depth = overlap_depth(&pad, &b.hull);
            if depth <= 0.0 {
                continue;
            }
            if !finger_soft && !b.soft {
                return RefOutcome::EStop;
            }
            let give = if b.soft { cfg.object_soft_depth } else { 0.0 }.max(if finger_soft { g.soft_depth } else { 0.0 });
            blocked |= depth > give;
        }
    }
    if blocked {
        return RefOutcome::NoContact;
    }

    let d = [phi.cos(), phi.sin()];
    let a = sub(c, scale(d, 0.5 * g.max_open));
    let e = add(c, scale(d, 0.5 * g.max_open));
    let mut first: Option<(f64, usize)> = None;
    let mut last: Option<(f64, usize)> = None;
    for (i, b) in bs.iter().enumerate() {
        if let Some((t0, t1)) = chord(b, a, e) {
            if first.map_or(true, |(t, _)| t0 < t) {
                first = Some((t0, i));
            }
            if last.map_or(true, |(t, _)| t1 > t) {
                last = Some((t1, i));
            }
        }
    }
    let (Some((_, i)), Some((_, j))) = (first, last) else {
        return RefOutcome::NoContact;
    };
    if i != j {
        return RefOutcome::Pinch;
    }
    let b = &bs[i];
    let span = if g.n_fingers == 4 { g.pad_len + g.pad_gap } else { g.pad_len };
    let w = band_extent(b, c, d, 0.5 * span);
    if w > g.max_open || w < g.min_close {
        return RefOutcome::TooWide;
    }
    let beta = match b.shape {
        Shape::Circle { .. } => 0.0,
        Shape::Poly(_) => {
            let mut best = (f64::INFINITY, 0.0);
            for k in 0..AXIS_STEPS {
                let t = k as f64 * PI / AXIS_STEPS as f64;
                let w = band_extent(b, c, [t.cos(), t.sin()], 0.5 * span);
                if w < best.0 {
                    best = (w, t);
                }
            }
            angle_gap(phi, best.1)
        }
    };
    let (pos_tol, ang_tol) = tolerances(g, b.soft, b.height);
    if beta > ang_tol {
        RefOutcome::BadAlignment
    } else if distance(b, c) > pos_tol {
        RefOutcome::Purchase
    } else {
        RefOutcome::Success(i)
    }
}

/// Reference success indicator in the library's `(i * ny + j) * bins + k`
/// layout.
pub fn reference_map(scene: &Scene, g: &GripperSpec, grid: &GridSpec, n_bins: usize, cfg: &OracleConfig) -> Vec<bool> {
    let bs = bodies(scene);
    let mut out = Vec::with_capacity(grid.nx * grid.ny * n_bins);
    for i in 0..grid.nx {
        for j in 0..grid.ny {
            let p = grid.cell_center(i, j);
            for k in 0..n_bins {
                let phi = (k as f64 + 0.5) * PI / n_bins as f64;
                out.push(matches!(reference_with(&bs, g, cfg, [p.x, p.y], phi), RefOutcome::Success(_)));
            }
        }
    }
    out
}

pub fn random_model(rng: &mut ChaCha8Rng, id: usize) -> ObjectModel {
    let shape = match rng.gen_range(0..3) {
        0 => ShapeSpec::Circle { radius: rng.gen_range(12.0..60.0) },
        1 => ShapeSpec::Rect { w: rng.gen_range(15.0..200.0), h: rng.gen_range(12.0..60.0) },
        _ => {
            let (w, h) = (rng.gen_range(30.0..90.0), rng.gen_range(20.0..50.0));
            ShapeSpec::ConvexPolygon { vertices: vec![[-w / 2.0, -h / 2.0], [w / 2.0, -h / 2.0], [0.1 * w, h / 2.0]] }
        }
    };
    let material = if rng.gen_bool(0.5) { Material::Soft } else { Material::Rigid };
    ObjectModel {
        id: format!("obj{id}"),
        shape,
        material,
        height_mm: rng.gen_range(10.0..80.0),
        mass_g: 100.0,
        color: [0.4, 0.4, 0.4],
    }
}

/// Up to three random circles, rectangles and triangles in a 260 mm bin,
/// allowed to overlap a little so that pinches occur.
pub fn random_scene(seed: u64) -> Scene {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let count = rng.gen_range(1..=3);
    let members: Vec<ObjectModel> = (0..count).map(|i| random_model(&mut rng, i)).collect();
    let workspace = Aabb::new(Vec2::new(0.0, 0.0), Vec2::new(260.0, 260.0));
    place_randomly(&members, &Placement { workspace, count, overlap_frac: 0.05, seed: rng.gen() })
        .expect("small scenes always place")
}

/// 21 × 21 grid over the objects' bounding box, padded by 30 mm.
pub fn grid_over(scene: &Scene) -> GridSpec {
    let mut lo = Vec2::new(f64::INFINITY, f64::INFINITY);
    let mut hi = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for o in &scene.objects {
        let b = o.footprint().aabb();
        lo = Vec2::new(lo.x.min(b.min.x), lo.y.min(b.min.y));
        hi = Vec2::new(hi.x.max(b.max.x), hi.y.max(b.max.y));
    }
    let pad = Vec2::new(30.0, 30.0);
    GridSpec::over(Aabb::new(lo - pad, hi + pad), 21, 21)
}
