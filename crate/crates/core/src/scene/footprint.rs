//! World-space footprints of posed objects.

use crate::geometry::{Aabb, ConvexPolygon, Vec2};
use std::f64::consts::PI;

/// Vertex count used when a curved footprint is approximated by a polygon.
pub const CURVE_SEGMENTS: usize = 256;

/// Footprint of a posed object in world millimetres.
#[derive(Debug, Clone)]
pub enum Footprint {
    Circle { center: Vec2, radius: f64 },
    Ellipse { center: Vec2, a: f64, b: f64, theta: f64 },
    Polygon(ConvexPolygon),
}

/// Strip `{p : |(p - center)·n| <= width/2}` where `n` is normal to the
/// measuring direction.
#[derive(Debug, Clone, Copy)]
pub struct Band {
    pub center: Vec2,
    pub width: f64,
}

impl Footprint {
    pub fn aabb(&self) -> Aabb {
        match self {
            Footprint::Circle { center, radius } => Aabb::new(
                Vec2::new(center.x - radius, center.y - radius),
                Vec2::new(center.x + radius, center.y + radius),
            ),
            Footprint::Ellipse { center, a, b, theta } => {
                let (s, c) = theta.sin_cos();
                let hx = ((a * c).powi(2) + (b * s).powi(2)).sqrt();
                let hy = ((a * s).powi(2) + (b * c).powi(2)).sqrt();
                Aabb::new(Vec2::new(center.x - hx, center.y - hy), Vec2::new(center.x + hx, center.y + hy))
            }
            Footprint::Polygon(p) => p.aabb(),
        }
    }

    pub fn area(&self) -> f64 {
        match self {
            Footprint::Circle { radius, .. } => PI * radius * radius,
            Footprint::Ellipse { a, b, .. } => PI * a * b,
            Footprint::Polygon(p) => p.area(),
        }
    }

    pub fn center(&self) -> Vec2 {
        match self {
            Footprint::Circle { center, .. } | Footprint::Ellipse { center, .. } => *center,
            Footprint::Polygon(p) => p.centroid(),
        }
    }

    /// Boundary inclusive.
    pub fn contains(&self, p: Vec2) -> bool {
        match self {
            Footprint::Circle { center, radius } => {
                let d = p - *center;
                d.dot(d) <= radius * radius
            }
            Footprint::Ellipse { center, a, b, theta } => {
                let q = (p - *center).rotate(-theta);
                (q.x / a).powi(2) + (q.y / b).powi(2) <= 1.0
            }
            Footprint::Polygon(poly) => poly.contains(p),
        }
    }

    /// Distance from `p` to the footprint, 0 inside.
    pub fn distance(&self, p: Vec2) -> f64 {
        match self {
            Footprint::Circle { center, radius } => ((p - *center).norm() - radius).max(0.0),
            Footprint::Ellipse { center, a, b, theta } => {
                let q = (p - *center).rotate(-theta);
                if (q.x / a).powi(2) + (q.y / b).powi(2) <= 1.0 {
                    0.0
                } else {
                    ellipse_distance(*a, *b, q)
                }
            }
            Footprint::Polygon(poly) => poly.distance(p),
        }
    }

    /// Polygonal version; exact for polygons, inscribed for curves.
    pub fn to_polygon(&self) -> ConvexPolygon {
        match self {
            Footprint::Circle { center, radius } => {
                ellipse_polygon(*center, *radius, *radius, 0.0, CURVE_SEGMENTS)
            }
            Footprint::Ellipse { center, a, b, theta } => ellipse_polygon(*center, *a, *b, *theta, CURVE_SEGMENTS),
            Footprint::Polygon(p) => p.clone(),
        }
    }

    /// Width of `footprint ∩ band` measured along `dir` (unit). The band is
    /// aligned with `dir`; 0 when the band misses the footprint.
    pub fn extent_along(&self, dir: Vec2, band: Band) -> f64 {
        let n = dir.perp();
        let half = 0.5 * band.width;
        match self {
            Footprint::Circle { center, radius } => {
                // offset of the circle centre inside band coordinates
                let s = (*center - band.center).dot(n);
                let lo = s - half;
                let hi = s + half;
                // n-offsets relative to the circle centre covered by the band
                let (t0, t1) = (-hi, -lo);
                if t0 > *radius || t1 < -radius {
                    return 0.0;
                }
                let closest = if t0 <= 0.0 && t1 >= 0.0 { 0.0 } else { t0.abs().min(t1.abs()) };
                2.0 * (radius * radius - closest * closest).max(0.0).sqrt()
            }
            _ => polygon_extent(&self.to_polygon(), dir, band),
        }
    }

    /// Parameter interval of segment `a → b` inside the footprint.
    pub fn segment_interval(&self, a: Vec2, b: Vec2) -> Option<(f64, f64)> {
        match self {
            Footprint::Circle { center, radius } => conic_interval(a - *center, b - *center, *radius, *radius),
            Footprint::Ellipse { center, a: ea, b: eb, theta } => {
                conic_interval((a - *center).rotate(-theta), (b - *center).rotate(-theta), *ea, *eb)
            }
            Footprint::Polygon(p) => p.segment_interval(a, b),
        }
    }
}

/// `extent_along` for a polygon already in world coordinates.
pub fn polygon_extent(poly: &ConvexPolygon, dir: Vec2, band: Band) -> f64 {
    let n = dir.perp();
    let half = 0.5 * band.width;
    let c = band.center.dot(n);
    // cheap reject before clipping
    let (lo, hi) = poly.project(n);
    if lo > c + half || hi < c - half {
        return 0.0;
    }
    let clipped = poly.clip_half_plane(n, c + half).and_then(|p| p.clip_half_plane(-n, -(c - half)));
    match clipped {
        Some(p) => {
            let (lo, hi) = p.project(dir);
            hi - lo
        }
        None => 0.0,
    }
}

fn conic_interval(p0: Vec2, p1: Vec2, a: f64, b: f64) -> Option<(f64, f64)> {
    // scale to the unit circle and solve |p0 + t d|² = 1
    let s0 = Vec2::new(p0.x / a, p0.y / b);
    let d = Vec2::new((p1.x - p0.x) / a, (p1.y - p0.y) / b);
    let qa = d.dot(d);
    let qb = 2.0 * s0.dot(d);
    let qc = s0.dot(s0) - 1.0;
    if qa <= 0.0 {
        return if qc <= 0.0 { Some((0.0, 1.0)) } else { None };
    }
    let disc = qb * qb - 4.0 * qa * qc;
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    let t0 = ((-qb - sq) / (2.0 * qa)).max(0.0);
    let t1 = ((-qb + sq) / (2.0 * qa)).min(1.0);
    if t0 > t1 {
        None
    } else {
        Some((t0, t1))
    }
}

pub(crate) fn ellipse_polygon(center: Vec2, a: f64, b: f64, theta: f64, n: usize) -> ConvexPolygon {
    let verts = (0..n)
        .map(|i| {
            let t = 2.0 * PI * i as f64 / n as f64;
            Vec2::new(a * t.cos(), b * t.sin()).rotate(theta) + center
        })
        .collect();
    ConvexPolygon::from_ccw_unchecked(verts)
}

/// Distance from an exterior point `q` (ellipse frame) to the ellipse
/// `x²/a² + y²/b² = 1`, by bisection on the Lagrange parameter.
fn ellipse_distance(a: f64, b: f64, q: Vec2) -> f64 {
    let (px, py) = (q.x.abs(), q.y.abs());
    // closest point (x, y) = (a² px / (a² + t), b² py / (b² + t)) with t >= 0
    let f = |t: f64| {
        let x = a * px / (a * a + t);
        let y = b * py / (b * b + t);
        x * x + y * y - 1.0
    };
    let mut lo = 0.0;
    let mut hi = (a.max(b)) * (px.hypot(py)) + a * a + b * b;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi.max(1.0) {
            break;
        }
    }
    let t = 0.5 * (lo + hi);
    let x = a * a * px / (a * a + t);
    let y = b * b * py / (b * b + t);
    (px - x).hypot(py - y)
}
