//! Planar primitives: vectors, convex polygons, hulls, clipping and
//! minimum-area rectangles.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Unit vector at angle `theta` from the +x axis.
    pub fn from_angle(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Self { x: c, y: s }
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    /// Counter-clockwise perpendicular.
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    pub fn rotate(self, theta: f64) -> Vec2 {
        let (s, c) = theta.sin_cos();
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn normalized(self) -> Vec2 {
        let n = self.norm();
        Vec2::new(self.x / n, self.y / n)
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Axis-aligned rectangle `[min.x, max.x] × [min.y, max.y]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Vec2,
    pub max: Vec2,
}

impl Aabb {
    pub fn new(min: Vec2, max: Vec2) -> Self {
        Self { min, max }
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    pub fn center(&self) -> Vec2 {
        Vec2::new(0.5 * (self.min.x + self.max.x), 0.5 * (self.min.y + self.max.y))
    }

    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn contains_box(&self, o: &Aabb) -> bool {
        o.min.x >= self.min.x && o.max.x <= self.max.x && o.min.y >= self.min.y && o.max.y <= self.max.y
    }

    pub fn overlaps(&self, o: &Aabb) -> bool {
        self.min.x <= o.max.x && o.min.x <= self.max.x && self.min.y <= o.max.y && o.min.y <= self.max.y
    }

    pub fn clamp(&self, p: Vec2) -> Vec2 {
        Vec2::new(p.x.clamp(self.min.x, self.max.x), p.y.clamp(self.min.y, self.max.y))
    }
}

/// Convex polygon with counter-clockwise vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexPolygon {
    verts: Vec<Vec2>,
}

impl ConvexPolygon {
    /// Builds a polygon, reversing clockwise input. Returns `None` for
    /// fewer than three vertices, zero area or a non-convex ring.
    pub fn new(mut verts: Vec<Vec2>) -> Option<Self> {
        if verts.len() < 3 {
            return None;
        }
        let a = signed_area(&verts);
        if !(a.abs() > 1e-12) {
            return None;
        }
        if a < 0.0 {
            verts.reverse();
        }
        let n = verts.len();
        for i in 0..n {
            let a = verts[i];
            let b = verts[(i + 1) % n];
            let c = verts[(i + 2) % n];
            if (b - a).cross(c - b) < -1e-9 {
                return None;
            }
        }
        Some(Self { verts })
    }

    pub(crate) fn from_ccw_unchecked(verts: Vec<Vec2>) -> Self {
        Self { verts }
    }

    /// Axis-aligned rectangle of size `w × h` centred at the origin.
    pub fn rect(w: f64, h: f64) -> Self {
        let (hw, hh) = (0.5 * w, 0.5 * h);
        Self::from_ccw_unchecked(vec![
            Vec2::new(-hw, -hh),
            Vec2::new(hw, -hh),
            Vec2::new(hw, hh),
            Vec2::new(-hw, hh),
        ])
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.verts
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.verts)
    }

    pub fn centroid(&self) -> Vec2 {
        let n = self.verts.len();
        let (mut cx, mut cy, mut a2) = (0.0, 0.0, 0.0);
        for i in 0..n {
            let p = self.verts[i];
            let q = self.verts[(i + 1) % n];
            let c = p.cross(q);
            a2 += c;
            cx += (p.x + q.x) * c;
            cy += (p.y + q.y) * c;
        }
        Vec2::new(cx / (3.0 * a2), cy / (3.0 * a2))
    }

    pub fn transformed(&self, rot: f64, t: Vec2) -> Self {
        Self::from_ccw_unchecked(self.verts.iter().map(|&v| v.rotate(rot) + t).collect())
    }

    pub fn aabb(&self) -> Aabb {
        let mut min = Vec2::new(f64::INFINITY, f64::INFINITY);
        let mut max = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for v in &self.verts {
            min.x = min.x.min(v.x);
            min.y = min.y.min(v.y);
            max.x = max.x.max(v.x);
            max.y = max.y.max(v.y);
        }
        Aabb::new(min, max)
    }

    /// Point-in-polygon, boundary inclusive.
    pub fn contains(&self, p: Vec2) -> bool {
        let n = self.verts.len();
        (0..n).all(|i| {
            let a = self.verts[i];
            let b = self.verts[(i + 1) % n];
            (b - a).cross(p - a) >= 0.0
        })
    }

    /// Euclidean distance from `p` to the polygon (0 inside).
    pub fn distance(&self, p: Vec2) -> f64 {
        if self.contains(p) {
            return 0.0;
        }
        let n = self.verts.len();
        (0..n)
            .map(|i| point_segment_distance(p, self.verts[i], self.verts[(i + 1) % n]))
            .fold(f64::INFINITY, f64::min)
    }

    /// Projection interval of the vertices onto `dir`.
    pub fn project(&self, dir: Vec2) -> (f64, f64) {
        self.verts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            let t = v.dot(dir);
            (lo.min(t), hi.max(t))
        })
    }

    /// Keeps the part on the side `n·p <= c` (Sutherland–Hodgman, single plane).
    pub fn clip_half_plane(&self, n: Vec2, c: f64) -> Option<ConvexPolygon> {
        let out = clip_ring(&self.verts, n, c);
        if out.len() < 3 || signed_area(&out) <= 1e-12 {
            None
        } else {
            Some(Self::from_ccw_unchecked(out))
        }
    }

    /// Intersection with another convex polygon.
    pub fn intersection(&self, other: &ConvexPolygon) -> Option<ConvexPolygon> {
        let mut ring = self.verts.clone();
        let m = other.verts.len();
        for i in 0..m {
            let a = other.verts[i];
            let b = other.verts[(i + 1) % m];
            // outward normal of a ccw edge
            let n = Vec2::new(b.y - a.y, a.x - b.x);
            ring = clip_ring(&ring, n, n.dot(a));
            if ring.len() < 3 {
                return None;
            }
        }
        if signed_area(&ring) <= 1e-12 {
            None
        } else {
            Some(Self::from_ccw_unchecked(ring))
        }
    }

    pub fn intersection_area(&self, other: &ConvexPolygon) -> f64 {
        if !self.aabb().overlaps(&other.aabb()) {
            return 0.0;
        }
        self.intersection(other).map_or(0.0, |p| p.area())
    }

    /// Minimum translation distance separating the two polygons (0 when
    /// disjoint or merely touching). Separating-axis test over both edge sets.
    pub fn penetration_depth(&self, other: &ConvexPolygon) -> f64 {
        let mut best = f64::INFINITY;
        for poly in [self, other] {
            let n = poly.verts.len();
            for i in 0..n {
                let e = poly.verts[(i + 1) % n] - poly.verts[i];
                let axis = e.perp().normalized();
                let (a0, a1) = self.project(axis);
                let (b0, b1) = other.project(axis);
                let overlap = a1.min(b1) - a0.max(b0);
                if overlap <= 0.0 {
                    return 0.0;
                }
                best = best.min(overlap);
            }
        }
        best
    }

    /// Parameter interval `[t0, t1]` (within `[0, 1]`) of the segment
    /// `a + t (b - a)` that lies inside the polygon (Cyrus–Beck).
    pub fn segment_interval(&self, a: Vec2, b: Vec2) -> Option<(f64, f64)> {
        let d = b - a;
        let (mut t0, mut t1) = (0.0_f64, 1.0_f64);
        let n = self.verts.len();
        for i in 0..n {
            let p = self.verts[i];
            let q = self.verts[(i + 1) % n];
            let normal = Vec2::new(q.y - p.y, p.x - q.x);
            let num = normal.dot(p - a);
            let den = normal.dot(d);
            if den.abs() < 1e-15 {
                if num < 0.0 {
                    return None;
                }
            } else {
                let t = num / den;
                if den > 0.0 {
                    t1 = t1.min(t);
                } else {
                    t0 = t0.max(t);
                }
            }
            if t0 > t1 {
                return None;
            }
        }
        Some((t0, t1))
    }
}

fn clip_ring(ring: &[Vec2], n: Vec2, c: f64) -> Vec<Vec2> {
    let mut out = Vec::with_capacity(ring.len() + 2);
    let len = ring.len();
    for i in 0..len {
        let p = ring[i];
        let q = ring[(i + 1) % len];
        let dp = n.dot(p) - c;
        let dq = n.dot(q) - c;
        if dp <= 0.0 {
            out.push(p);
        }
        if (dp < 0.0 && dq > 0.0) || (dp > 0.0 && dq < 0.0) {
            let t = dp / (dp - dq);
            out.push(p + (q - p) * t);
        }
    }
    out
}

pub fn signed_area(ring: &[Vec2]) -> f64 {
    let n = ring.len();
    0.5 * (0..n).map(|i| ring[i].cross(ring[(i + 1) % n])).sum::<f64>()
}

pub fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let len2 = ab.dot(ab);
    let t = if len2 > 0.0 { ((p - a).dot(ab) / len2).clamp(0.0, 1.0) } else { 0.0 };
    (a + ab * t - p).norm()
}

/// Convex hull by Andrew's monotone chain. Collinear points are dropped;
/// output is counter-clockwise starting from the lowest-x point.
pub fn convex_hull(points: &[Vec2]) -> Vec<Vec2> {
    let mut pts: Vec<Vec2> = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<Vec2> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Vec2>> =
            if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
        for &p in iter {
            while hull.len() >= start + 2 {
                let a = hull[hull.len() - 2];
                let b = hull[hull.len() - 1];
                if (b - a).cross(p - b) <= 0.0 {
                    hull.pop();
                } else {
                    break;
                }
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

/// Oriented rectangle: centre, unit axis of the first side and side lengths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedRect {
    pub center: Vec2,
    /// Angle of the first side in `[0, π)`.
    pub angle: f64,
    pub len_a: f64,
    /// Side perpendicular to `angle`.
    pub len_b: f64,
}

impl OrientedRect {
    pub fn area(&self) -> f64 {
        self.len_a * self.len_b
    }

    /// Direction (in `[0, π)`) along which the rectangle is narrowest.
    /// Squares resolve to the smaller of the two axis angles.
    pub fn narrow_axis(&self) -> f64 {
        let other = (self.angle + 0.5 * PI).rem_euclid(PI);
        let rel = (self.len_a - self.len_b).abs() / self.len_a.max(self.len_b).max(1e-12);
        if rel <= 1e-9 {
            self.angle.min(other)
        } else if self.len_a < self.len_b {
            self.angle
        } else {
            other
        }
    }
}

/// Minimum-area enclosing rectangle of a point set via rotating calipers
/// over the convex hull: one hull edge is flush with a rectangle side.
pub fn min_area_rect(points: &[Vec2]) -> Option<OrientedRect> {
    let hull = convex_hull(points);
    match hull.len() {
        0 => return None,
        1 => {
            return Some(OrientedRect { center: hull[0], angle: 0.0, len_a: 0.0, len_b: 0.0 });
        }
        2 => {
            let d = hull[1] - hull[0];
            return Some(OrientedRect {
                center: (hull[0] + hull[1]) * 0.5,
                angle: d.y.atan2(d.x).rem_euclid(PI),
                len_a: d.norm(),
                len_b: 0.0,
            });
        }
        _ => {}
    }
    let n = hull.len();
    let mut best: Option<OrientedRect> = None;
    // caliper indices for the extreme points along u (max), v (max), u (min)
    let (mut j, mut k, mut l) = (1usize, 1usize, 0usize);
    for i in 0..n {
        let u = (hull[(i + 1) % n] - hull[i]).normalized();
        let v = u.perp();
        while (hull[(j + 1) % n] - hull[j]).dot(u) > 1e-12 {
            j = (j + 1) % n;
        }
        if i == 0 {
            k = j;
        }
        while (hull[(k + 1) % n] - hull[k]).dot(v) > 1e-12 {
            k = (k + 1) % n;
        }
        if i == 0 {
            l = k;
        }
        while (hull[(l + 1) % n] - hull[l]).dot(u) < -1e-12 {
            l = (l + 1) % n;
        }
        let umax = (hull[j] - hull[i]).dot(u);
        let umin = (hull[l] - hull[i]).dot(u);
        let vmax = (hull[k] - hull[i]).dot(v);
        let len_a = umax - umin;
        let len_b = vmax;
        let area = len_a * len_b;
        let better = match &best {
            None => true,
            Some(b) => area < b.area() * (1.0 - 1e-9),
        };
        if better {
            let center = hull[i] + u * (0.5 * (umax + umin)) + v * (0.5 * vmax);
            best = Some(OrientedRect { center, angle: u.y.atan2(u.x).rem_euclid(PI), len_a, len_b });
        }
    }
    best
}

/// Smallest absolute difference between two axis directions modulo π.
pub fn axis_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(PI);
    d.min(PI - d)
}
