//! Synthetic top-down camera.
//!
//! Pixel `(row, col)` covers world-pixel square `[col, col+1) × [row, row+1)`
//! and is sampled at its centre. Image x runs along world x and image rows
//! along world y.

use crate::geometry::{Aabb, Vec2};
use crate::scene::Scene;
use crate::seeding::rng_for;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::io::{self, Read, Write};

/// H×W×3 colour grid, row-major, channels interleaved, values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGrid {
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl ImageGrid {
    pub const CHANNELS: usize = 3;

    pub fn filled(height: usize, width: usize, color: [f32; 3]) -> Self {
        assert!(height >= 1 && width >= 1, "image dimensions must be positive");
        let mut data = Vec::with_capacity(height * width * 3);
        for _ in 0..height * width {
            data.extend_from_slice(&color);
        }
        Self { height, width, data }
    }

    pub fn white(height: usize, width: usize) -> Self {
        Self::filled(height, width, [1.0; 3])
    }

    /// Takes ownership of raw HWC data; values are clamped into `[0, 1]`.
    pub fn from_raw(height: usize, width: usize, mut data: Vec<f32>) -> Option<Self> {
        if height == 0 || width == 0 || data.len() != height * width * 3 {
            return None;
        }
        for v in &mut data {
            *v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
        }
        Some(Self { height, width, data })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_raw(self) -> Vec<f32> {
        self.data
    }

    pub fn pixel(&self, row: usize, col: usize) -> [f32; 3] {
        let i = (row * self.width + col) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set_pixel(&mut self, row: usize, col: usize, color: [f32; 3]) {
        let i = (row * self.width + col) * 3;
        self.data[i..i + 3].copy_from_slice(&color.map(|c| c.clamp(0.0, 1.0)));
    }

    /// True when any channel is darker than `threshold`.
    pub fn is_foreground(&self, row: usize, col: usize, threshold: f32) -> bool {
        self.pixel(row, col).iter().any(|&c| c < threshold)
    }

    /// Symmetry `t` (0..8) of a square grid: columns mirrored when `t >= 4`,
    /// then `t % 4` quarter turns.
    pub fn dihedral(&self, t: usize) -> ImageGrid {
        assert_eq!(self.height, self.width, "dihedral transforms need a square grid");
        assert!(t < 8, "dihedral index out of range");
        let n = self.width;
        let mut out = self.clone();
        for r in 0..n {
            for c in 0..n {
                // source pixel of output (r, c): undo the turns, then the mirror
                let (mut sr, mut sc) = (r, c);
                for _ in 0..t % 4 {
                    (sr, sc) = (n - 1 - sc, sr);
                }
                if t >= 4 {
                    sc = n - 1 - sc;
                }
                let (i, j) = ((r * n + c) * 3, (sr * n + sc) * 3);
                out.data[i..i + 3].copy_from_slice(&self.data[j..j + 3]);
            }
        }
        out
    }
}

/// Affine world→pixel map `px = offset + scale · mm` and image size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    /// Pixels per millimetre.
    pub scale: f64,
    pub offset: Vec2,
    pub height: usize,
    pub width: usize,
}

impl CameraModel {
    /// 400 mm bin onto a 256 px square.
    pub fn desk() -> Self {
        Self { scale: 0.64, offset: Vec2::new(0.0, 0.0), height: 256, width: 256 }
    }

    /// 1280×720 frame with the 400 mm bin centred and filling the height.
    pub fn paper() -> Self {
        Self { scale: 1.8, offset: Vec2::new(280.0, 0.0), height: 720, width: 1280 }
    }

    pub fn world_to_pixel(&self, p: Vec2) -> Vec2 {
        self.offset + p * self.scale
    }

    pub fn pixel_to_world(&self, p: Vec2) -> Vec2 {
        (p - self.offset) * (1.0 / self.scale)
    }

    /// Whether the workspace projects inside the image.
    pub fn covers(&self, workspace: &Aabb) -> bool {
        let a = self.world_to_pixel(workspace.min);
        let b = self.world_to_pixel(workspace.max);
        let eps = 1e-9;
        self.scale > 0.0
            && a.x >= -eps
            && a.y >= -eps
            && b.x <= self.width as f64 + eps
            && b.y <= self.height as f64 + eps
    }

    /// World position of the centre of pixel `(row, col)`.
    pub fn pixel_center_world(&self, row: usize, col: usize) -> Vec2 {
        self.pixel_to_world(Vec2::new(col as f64 + 0.5, row as f64 + 0.5))
    }
}

/// Flat-colour rendering on a white background. Later objects paint over
/// earlier ones.
pub fn render(scene: &Scene, camera: &CameraModel) -> ImageGrid {
    let mut img = ImageGrid::white(camera.height, camera.width);
    for obj in &scene.objects {
        let fp = obj.footprint();
        let bb = fp.aabb();
        let lo = camera.world_to_pixel(bb.min);
        let hi = camera.world_to_pixel(bb.max);
        let c0 = (lo.x - 0.5).ceil().max(0.0) as usize;
        let r0 = (lo.y - 0.5).ceil().max(0.0) as usize;
        let c1 = ((hi.x - 0.5).floor() + 1.0).clamp(0.0, camera.width as f64) as usize;
        let r1 = ((hi.y - 0.5).floor() + 1.0).clamp(0.0, camera.height as f64) as usize;
        for r in r0..r1 {
            for c in c0..c1 {
                if fp.contains(camera.pixel_center_world(r, c)) {
                    img.set_pixel(r, c, obj.model.color);
                }
            }
        }
    }
    img
}

/// `render` plus i.i.d. Gaussian pixel noise, clamped to `[0, 1]`.
pub fn render_noisy(scene: &Scene, camera: &CameraModel, sigma: f64, seed: u64) -> ImageGrid {
    let mut img = render(scene, camera);
    if sigma > 0.0 {
        let mut rng = rng_for(seed, &[crate::seeding::label("render-noise")]);
        let normal = Normal::new(0.0, sigma).expect("sigma is finite and positive");
        for v in &mut img.data {
            *v = (*v as f64 + normal.sample(&mut rng)).clamp(0.0, 1.0) as f32;
        }
    }
    img
}

/// `crop × crop` window centred at `center_px`; outside the image is white.
pub fn crop_patch(image: &ImageGrid, center_px: Vec2, crop: usize) -> ImageGrid {
    assert!(crop >= 1, "crop must be positive");
    let top = (center_px.y - 0.5 * crop as f64).round() as i64;
    let left = (center_px.x - 0.5 * crop as f64).round() as i64;
    let mut out = ImageGrid::white(crop, crop);
    for r in 0..crop {
        let sr = top + r as i64;
        if sr < 0 || sr >= image.height as i64 {
            continue;
        }
        let c_lo = (-left).clamp(0, crop as i64) as usize;
        let c_hi = (image.width as i64 - left).clamp(0, crop as i64) as usize;
        if c_lo >= c_hi {
            continue;
        }
        let src = (sr as usize * image.width + (left + c_lo as i64) as usize) * 3;
        let dst = (r * crop + c_lo) * 3;
        let n = (c_hi - c_lo) * 3;
        out.data[dst..dst + n].copy_from_slice(&image.data[src..src + n]);
    }
    out
}

fn sample_coords(out: usize, inp: usize) -> Vec<(usize, usize, f32)> {
    let ratio = inp as f64 / out as f64;
    (0..out)
        .map(|d| {
            let s = ((d as f64 + 0.5) * ratio - 0.5).clamp(0.0, (inp - 1) as f64);
            let i0 = s.floor() as usize;
            let i1 = (i0 + 1).min(inp - 1);
            (i0, i1, (s - i0 as f64) as f32)
        })
        .collect()
}

/// Bilinear resampling with half-pixel centres and edge clamping.
pub fn resize_to(image: &ImageGrid, out_h: usize, out_w: usize) -> ImageGrid {
    assert!(out_h >= 1 && out_w >= 1, "output size must be positive");
    if out_h == image.height && out_w == image.width {
        return image.clone();
    }
    let rows = sample_coords(out_h, image.height);
    let cols = sample_coords(out_w, image.width);
    let mut data = Vec::with_capacity(out_h * out_w * 3);
    for &(r0, r1, fy) in &rows {
        for &(c0, c1, fx) in &cols {
            for ch in 0..3 {
                let at = |r: usize, c: usize| image.data[(r * image.width + c) * 3 + ch];
                let top = at(r0, c0) + (at(r0, c1) - at(r0, c0)) * fx;
                let bot = at(r1, c0) + (at(r1, c1) - at(r1, c0)) * fx;
                // a constant input must come back bit-equal
                let v = if fy == 0.0 { top } else { top + (bot - top) * fy };
                data.push(v.clamp(0.0, 1.0));
            }
        }
    }
    ImageGrid { height: out_h, width: out_w, data }
}

pub fn resize(image: &ImageGrid, out_size: usize) -> ImageGrid {
    resize_to(image, out_size, out_size)
}

/// Network input patch for a grasp centred at world point `center_mm`.
pub fn grasp_patch(image: &ImageGrid, camera: &CameraModel, center_mm: Vec2, crop: usize, input: usize) -> ImageGrid {
    resize(&crop_patch(image, camera.world_to_pixel(center_mm), crop), input)
}

const MAGIC: &[u8; 4] = b"IMG1";

pub fn write_image<W: Write>(mut w: W, image: &ImageGrid) -> io::Result<()> {
    let h = u16::try_from(image.height).map_err(|_| io::Error::new(io::ErrorKind::InvalidInput, "height > u16"))?;
    let wd = u16::try_from(image.width).map_err(|_| io::Error::new(io::ErrorKind::InvalidInput, "width > u16"))?;
    w.write_all(MAGIC)?;
    w.write_all(&h.to_le_bytes())?;
    w.write_all(&wd.to_le_bytes())?;
    let mut buf = Vec::with_capacity(image.data.len() * 4);
    for v in &image.data {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)
}

pub fn read_image<R: Read>(mut r: R) -> io::Result<ImageGrid> {
    let mut head = [0u8; 8];
    r.read_exact(&mut head)?;
    if &head[..4] != MAGIC {
        return Err(io::Error::new(io::ErrorKind::InvalidData, "bad image magic"));
    }
    let h = u16::from_le_bytes([head[4], head[5]]) as usize;
    let w = u16::from_le_bytes([head[6], head[7]]) as usize;
    let mut bytes = vec![0u8; h * w * 3 * 4];
    r.read_exact(&mut bytes)?;
    let data = bytes.chunks_exact(4).map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]])).collect();
    ImageGrid::from_raw(h, w, data).ok_or_else(|| io::Error::new(io::ErrorKind::InvalidData, "bad image size"))
}
