use super::{AngleBin, Layer, LearnError, NetSpec};
use crate::render::ImageGrid;
use crate::seeding::{label, rng_for};
use num_traits::Float;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Feature map, row-major with channels innermost.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorMap<T> {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub data: Vec<T>,
}

impl<T: Float> TensorMap<T> {
    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        Self { height, width, channels, data: vec![T::zero(); height * width * channels] }
    }

    pub fn at(&self, row: usize, col: usize) -> &[T] {
        let i = (row * self.width + col) * self.channels;
        &self.data[i..i + self.channels]
    }
}

/// Network input: inverted intensities, so the white background is zero.
pub fn image_to_input<T: Float>(img: &ImageGrid) -> TensorMap<T> {
    TensorMap {
        height: img.height(),
        width: img.width(),
        channels: 3,
        data: img.data().iter().map(|&v| T::from(1.0 - v).unwrap()).collect(),
    }
}

/// Trained or initialised weights of a [`NetSpec`], flattened layer by
/// layer as `[ky][kx][ci][co]` weights followed by `co` biases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub net: NetSpec,
    pub seed: u64,
    params: Vec<f32>,
}

impl ModelParams {
    pub fn zeros(net: NetSpec) -> Result<Self, LearnError> {
        net.validate()?;
        let n = net.param_count();
        Ok(Self { net, seed: 0, params: vec![0.0; n] })
    }

    /// He-normal weights, zero biases.
    pub fn init(net: NetSpec, seed: u64) -> Result<Self, LearnError> {
        net.validate()?;
        let mut params = vec![0.0f32; net.param_count()];
        let ch = net.channels();
        for (i, (l, &(off, wlen, _))) in net.layers.iter().zip(&net.param_layout()).enumerate() {
            if let Layer::Conv { k, .. } = *l {
                let fan_in = (k * k * ch[i]) as f64;
                let normal = Normal::new(0.0, (2.0 / fan_in).sqrt()).unwrap();
                let mut rng = rng_for(seed, &[label("he-init"), i as u64]);
                for w in &mut params[off..off + wlen] {
                    *w = normal.sample(&mut rng) as f32;
                }
            }
        }
        Ok(Self { net, seed, params })
    }

    pub fn from_parts(net: NetSpec, seed: u64, params: Vec<f32>) -> Result<Self, LearnError> {
        net.validate()?;
        if params.len() != net.param_count() {
            return Err(LearnError::ShapeMismatch(format!(
                "{} parameters for a net of {}",
                params.len(),
                net.param_count()
            )));
        }
        if params.iter().any(|v| !v.is_finite()) {
            return Err(LearnError::ShapeMismatch("non-finite parameter".into()));
        }
        Ok(Self { net, seed, params })
    }

    pub fn params(&self) -> &[f32] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f32] {
        &mut self.params
    }

    /// Weights and biases of layer `i` (empty for pools).
    pub fn layer(&self, i: usize) -> (&[f32], &[f32]) {
        let (off, w, b) = self.net.param_layout()[i];
        (&self.params[off..off + w], &self.params[off + w..off + w + b])
    }

    pub fn converted<T: Float>(&self) -> Vec<T> {
        self.params.iter().map(|&v| T::from(v).unwrap()).collect()
    }

    /// Hex SHA-256 of the parameter bytes.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        for v in &self.params {
            h.update(v.to_le_bytes());
        }
        crate::scene::hex_digest(&h.finalize())
    }
}

/// Every intermediate map of one forward pass, for backprop.
#[derive(Debug, Clone)]
pub struct Tape<T> {
    /// `maps[0]` is the input, `maps[i + 1]` the output of layer `i`.
    pub maps: Vec<TensorMap<T>>,
    argmax: Vec<Vec<u32>>,
}

impl<T: Float> Tape<T> {
    pub fn output(&self) -> &TensorMap<T> {
        self.maps.last().unwrap()
    }

    /// Whether two passes of the same net share every ReLU on/off state and
    /// every pooling winner, i.e. lie on the same linear piece.
    pub fn same_piece(&self, other: &Tape<T>, net: &NetSpec) -> bool {
        if self.argmax != other.argmax {
            return false;
        }
        net.layers.iter().enumerate().all(|(i, l)| match l {
            Layer::Conv { relu: true, .. } => self.maps[i + 1]
                .data
                .iter()
                .zip(&other.maps[i + 1].data)
                .all(|(a, b)| (*a > T::zero()) == (*b > T::zero())),
            _ => true,
        })
    }
}

fn check_input<T>(net: &NetSpec, params: &[T], x: &TensorMap<T>) -> Result<(), LearnError> {
    if params.len() != net.param_count() {
        return Err(LearnError::ShapeMismatch(format!("{} parameters, net needs {}", params.len(), net.param_count())));
    }
    if x.channels != net.in_channels {
        return Err(LearnError::ShapeMismatch(format!("{} input channels, net needs {}", x.channels, net.in_channels)));
    }
    let rf = net.receptive_field();
    if x.height < rf || x.width < rf {
        return Err(LearnError::ShapeMismatch(format!("{}×{} input below receptive field {rf}", x.height, x.width)));
    }
    Ok(())
}

fn conv_forward<T: Float>(x: &TensorMap<T>, w: &[T], b: &[T], k: usize, s: usize, co: usize, relu: bool) -> TensorMap<T> {
    let ci = x.channels;
    let oh = (x.height - k) / s + 1;
    let ow = (x.width - k) / s + 1;
    let mut out = TensorMap::zeros(oh, ow, co);
    for oy in 0..oh {
        for ox in 0..ow {
            let o = &mut out.data[(oy * ow + ox) * co..][..co];
            o.copy_from_slice(b);
            for ky in 0..k {
                let row = (oy * s + ky) * x.width;
                for kx in 0..k {
                    let xp = &x.data[(row + ox * s + kx) * ci..][..ci];
                    let wb = &w[(ky * k + kx) * ci * co..][..ci * co];
                    for (&v, wr) in xp.iter().zip(wb.chunks_exact(co)) {
                        if v == T::zero() {
                            continue;
                        }
                        for (oo, &ww) in o.iter_mut().zip(wr) {
                            *oo = *oo + v * ww;
                        }
                    }
                }
            }
            if relu {
                for v in o.iter_mut() {
                    *v = v.max(T::zero());
                }
            }
        }
    }
    out
}

fn pool_forward<T: Float>(x: &TensorMap<T>, k: usize, s: usize) -> (TensorMap<T>, Vec<u32>) {
    let c = x.channels;
    let oh = (x.height - k) / s + 1;
    let ow = (x.width - k) / s + 1;
    let mut out = TensorMap::zeros(oh, ow, c);
    let mut arg = vec![0u32; oh * ow * c];
    for oy in 0..oh {
        for ox in 0..ow {
            let base = (oy * ow + ox) * c;
            for ch in 0..c {
                let mut best = T::neg_infinity();
                let mut bi = 0usize;
                for ky in 0..k {
                    for kx in 0..k {
                        let i = ((oy * s + ky) * x.width + ox * s + kx) * c + ch;
                        if x.data[i] > best {
                            best = x.data[i];
                            bi = i;
                        }
                    }
                }
                out.data[base + ch] = best;
                arg[base + ch] = bi as u32;
            }
        }
    }
    (out, arg)
}

fn run<T: Float>(net: &NetSpec, params: &[T], input: TensorMap<T>, keep: bool) -> (Vec<TensorMap<T>>, Vec<Vec<u32>>) {
    let layout = net.param_layout();
    let mut maps = vec![input];
    let mut argmax = Vec::new();
    for (l, &(off, wlen, blen)) in net.layers.iter().zip(&layout) {
        let x = maps.last().unwrap();
        let y = match *l {
            Layer::Conv { k, s, c, relu } => {
                conv_forward(x, &params[off..off + wlen], &params[off + wlen..off + wlen + blen], k, s, c, relu)
            }
            Layer::MaxPool { k, s } => {
                let (y, a) = pool_forward(x, k, s);
                if keep {
                    argmax.push(a);
                }
                y
            }
        };
        if !keep {
            maps.clear();
        }
        maps.push(y);
    }
    (maps, argmax)
}

/// Raw logits: `H'×W'×2·n_bins`, channel `2k` fail and `2k+1` success.
pub fn forward<T: Float>(net: &NetSpec, params: &[T], input: &TensorMap<T>) -> Result<TensorMap<T>, LearnError> {
    check_input(net, params, input)?;
    let (mut maps, _) = run(net, params, input.clone(), false);
    Ok(maps.pop().unwrap())
}

pub fn forward_tape<T: Float>(net: &NetSpec, params: &[T], input: TensorMap<T>) -> Result<Tape<T>, LearnError> {
    check_input(net, params, &input)?;
    let (maps, argmax) = run(net, params, input, true);
    Ok(Tape { maps, argmax })
}

/// Accumulates the parameter gradient of a scalar whose gradient with
/// respect to the output map is `dout` into `grad`.
pub fn backward<T: Float>(net: &NetSpec, params: &[T], tape: &Tape<T>, dout: &[T], grad: &mut [T]) {
    assert_eq!(dout.len(), tape.output().data.len());
    assert_eq!(grad.len(), params.len());
    let layout = net.param_layout();
    let mut g: Vec<T> = dout.to_vec();
    let mut pool_i = tape.argmax.len();
    for (li, l) in net.layers.iter().enumerate().rev() {
        let x = &tape.maps[li];
        let y = &tape.maps[li + 1];
        let need_dx = li > 0;
        match *l {
            Layer::Conv { k, s, c: co, relu } => {
                let (off, wlen, _) = layout[li];
                if relu {
                    for (gv, &yv) in g.iter_mut().zip(&y.data) {
                        if yv <= T::zero() {
                            *gv = T::zero();
                        }
                    }
                }
                let ci = x.channels;
                let w = &params[off..off + wlen];
                let (gw, rest) = grad[off..].split_at_mut(wlen);
                let gb = &mut rest[..co];
                let mut dx = if need_dx { vec![T::zero(); x.data.len()] } else { Vec::new() };
                for oy in 0..y.height {
                    for ox in 0..y.width {
                        let go = &g[(oy * y.width + ox) * co..][..co];
                        if go.iter().all(|&v| v == T::zero()) {
                            continue;
                        }
                        for (b, &v) in gb.iter_mut().zip(go) {
                            *b = *b + v;
                        }
                        for ky in 0..k {
                            let row = (oy * s + ky) * x.width;
                            for kx in 0..k {
                                let xi = (row + ox * s + kx) * ci;
                                let wo = (ky * k + kx) * ci * co;
                                for c in 0..ci {
                                    let xv = x.data[xi + c];
                                    let wr = &w[wo + c * co..][..co];
                                    let gwr = &mut gw[wo + c * co..][..co];
                                    if xv != T::zero() {
                                        for (a, &gv) in gwr.iter_mut().zip(go) {
                                            *a = *a + xv * gv;
                                        }
                                    }
                                    if need_dx {
                                        let mut acc = T::zero();
                                        for (&wv, &gv) in wr.iter().zip(go) {
                                            acc = acc + wv * gv;
                                        }
                                        dx[xi + c] = dx[xi + c] + acc;
                                    }
                                }
                            }
                        }
                    }
                }
                g = dx;
            }
            Layer::MaxPool { .. } => {
                pool_i -= 1;
                let mut dx = vec![T::zero(); x.data.len()];
                for (&gv, &i) in g.iter().zip(&tape.argmax[pool_i]) {
                    dx[i as usize] = dx[i as usize] + gv;
                }
                g = dx;
            }
        }
    }
}

/// Success probability of a (fail, success) logit pair.
pub(crate) fn success_prob(fail: f32, success: f32) -> f32 {
    (1.0 / (1.0 + ((fail as f64) - (success as f64)).exp())) as f32
}

fn check_patch(params: &ModelParams, patch: &ImageGrid) -> Result<(), LearnError> {
    let n = params.net.input;
    if patch.height() != n || patch.width() != n {
        return Err(LearnError::ShapeMismatch(format!("{}×{} patch, net input is {n}", patch.height(), patch.width())));
    }
    Ok(())
}

/// Success probability of every bin for one input patch.
pub fn predict_bins(params: &ModelParams, patch: &ImageGrid) -> Result<Vec<f32>, LearnError> {
    check_patch(params, patch)?;
    let out = forward(&params.net, params.params(), &image_to_input::<f32>(patch))?;
    Ok(out.data.chunks_exact(2).map(|p| success_prob(p[0], p[1])).collect())
}

pub fn predict_q(params: &ModelParams, patch: &ImageGrid, bin: AngleBin) -> Result<f64, LearnError> {
    Ok(predict_bins(params, patch)?[bin.index()] as f64)
}

/// Per-cell, per-bin success probabilities over a whole image. Cell
/// `(row, col)` scores the patch centred at pixel
/// `(offset + col·stride, offset + row·stride)` in `(x, y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMap {
    pub rows: usize,
    pub cols: usize,
    pub n_bins: usize,
    pub stride: usize,
    pub offset: usize,
    pub scores: Vec<f32>,
}

impl DenseMap {
    pub fn get(&self, row: usize, col: usize, bin: usize) -> f32 {
        self.scores[(row * self.cols + col) * self.n_bins + bin]
    }

    /// Global argmax, ties to the lowest `(row, col, bin)`.
    pub fn argmax(&self) -> (usize, usize, usize, f32) {
        let mut best = (0, f32::NEG_INFINITY);
        for (i, &v) in self.scores.iter().enumerate() {
            if v > best.1 {
                best = (i, v);
            }
        }
        let (i, v) = best;
        let cell = i / self.n_bins;
        (cell / self.cols, cell % self.cols, i % self.n_bins, v)
    }
}

pub fn dense_predict(params: &ModelParams, image: &ImageGrid) -> Result<DenseMap, LearnError> {
    let out = forward(&params.net, params.params(), &image_to_input::<f32>(image))?;
    Ok(DenseMap {
        rows: out.height,
        cols: out.width,
        n_bins: params.net.n_bins,
        stride: params.net.total_stride(),
        offset: params.net.offset(),
        scores: out.data.chunks_exact(2).map(|p| success_prob(p[0], p[1])).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec2;
    use crate::render::crop_patch;

    #[test]
    fn zero_weights_give_zero_logits() {
        let p = ModelParams::zeros(NetSpec::desk()).unwrap();
        let img = ImageGrid::filled(32, 32, [0.2, 0.5, 0.9]);
        let out = forward(&p.net, p.params(), &image_to_input::<f32>(&img)).unwrap();
        assert_eq!((out.height, out.width, out.channels), (1, 1, 36));
        assert!(out.data.iter().all(|&v| v == 0.0));
        assert_eq!(predict_q(&p, &img, AngleBin::new(4).unwrap()).unwrap(), 0.5);
    }

    #[test]
    fn single_pointwise_conv_by_hand() {
        let net = NetSpec {
            name: "pointwise".into(),
            input: 1,
            in_channels: 3,
            n_bins: 1,
            layers: vec![Layer::Conv { k: 1, s: 1, c: 2, relu: false }],
        };
        // w[ci][co], then bias
        let params = [1.0, 0.0, 0.0, 2.0, -1.0, 0.5, 0.1, -0.2];
        let x = TensorMap { height: 2, width: 1, channels: 3, data: vec![1.0, 2.0, 3.0, 0.0, -1.0, 4.0] };
        let y = forward::<f64>(&net, &params, &x).unwrap();
        // row 0: (1·1 + 2·0 + 3·(-1) + 0.1, 1·0 + 2·2 + 3·0.5 - 0.2)
        let expect = [-1.9, 5.3, -3.9, -0.2];
        for (a, b) in y.data.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn dense_map_shape_and_equivalence() {
        let p = ModelParams::init(NetSpec::desk_small(), 5).unwrap();
        let mut img = ImageGrid::white(64, 72);
        for r in 10..40 {
            for c in 20..50 {
                img.set_pixel(r, c, [0.1, (r as f32) / 64.0, (c as f32) / 72.0]);
            }
        }
        let d = dense_predict(&p, &img).unwrap();
        assert_eq!((d.rows, d.cols), (5, 6));
        for row in 0..d.rows {
            for col in 0..d.cols {
                let c = Vec2::new((d.offset + col * d.stride) as f64, (d.offset + row * d.stride) as f64);
                let q = predict_bins(&p, &crop_patch(&img, c, 32)).unwrap();
                for k in 0..18 {
                    assert!((q[k] - d.get(row, col, k)).abs() <= 1e-5);
                }
            }
        }
    }

    #[test]
    fn probabilities_pair_to_one() {
        for (f, s) in [(0.0f32, 0.0f32), (3.0, -2.0), (-40.0, 40.0)] {
            let p = success_prob(f, s);
            let q = success_prob(s, f);
            assert!((p + q - 1.0).abs() < 1e-6);
            assert!((0.0..=1.0).contains(&p));
        }
    }

    #[test]
    fn init_is_seeded() {
        let a = ModelParams::init(NetSpec::desk(), 1).unwrap();
        assert_eq!(a, ModelParams::init(NetSpec::desk(), 1).unwrap());
        assert_ne!(a.params(), ModelParams::init(NetSpec::desk(), 2).unwrap().params());
        let (_, b) = a.layer(0);
        assert!(b.iter().all(|&v| v == 0.0));
    }
}
