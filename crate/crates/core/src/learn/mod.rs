//! Angular-bin grasp classifier trained from scratch.
//!
//! The network maps a square RGB patch to 36 logits, one (fail, success)
//! pair per 10° bin of the closing angle. Only the pair of the bin that was
//! actually tried carries a loss. All layers are valid (unpadded)
//! convolutions or max-pools, so the same weights run over a whole image
//! and yield one prediction per stride step.

mod io;
mod net;
mod train;

pub use io::{load_model, read_model, save_model, write_model, MODEL_FORMAT_VERSION};
pub use net::{
    backward, dense_predict, forward, forward_tape, image_to_input, predict_bins, predict_q, DenseMap, ModelParams,
    Tape, TensorMap,
};
pub use train::{
    accuracy, gradient_check, GradCheck, masked_loss, masked_loss_grad, train, write_loss_csv, EpochStats, Example, TrainConfig,
};

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

pub const N_BINS: usize = 18;

#[derive(Debug, Error)]
pub enum LearnError {
    #[error("angle {0} outside [0, π)")]
    PhiOutOfRange(f64),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("invalid network: {0}")]
    InvalidNet(String),
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("model version mismatch: {0}")]
    VersionMismatch(String),
    #[error("model checksum mismatch: {0}")]
    ChecksumMismatch(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One of the discretised closing angles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AngleBin(u8);

impl AngleBin {
    pub fn new(index: usize) -> Option<Self> {
        (index < N_BINS).then_some(AngleBin(index as u8))
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn all() -> impl Iterator<Item = AngleBin> {
        (0..N_BINS as u8).map(AngleBin)
    }

    /// The bin a grasp lands in after [`ImageGrid::dihedral`]`(t)` of its
    /// patch. A mirror sends φ to π − φ and a quarter turn adds π/2.
    ///
    /// [`ImageGrid::dihedral`]: crate::render::ImageGrid::dihedral
    pub fn dihedral(self, t: usize) -> AngleBin {
        assert!(t < 8, "dihedral index out of range");
        let mut k = self.index();
        if t >= 4 {
            k = N_BINS - 1 - k;
        }
        AngleBin(((k + (t % 4) * N_BINS / 2) % N_BINS) as u8)
    }
}

pub fn angle_to_bin(phi: f64) -> Result<AngleBin, LearnError> {
    if !(0.0..PI).contains(&phi) {
        return Err(LearnError::PhiOutOfRange(phi));
    }
    let k = (phi / (PI / N_BINS as f64)).floor() as usize;
    Ok(AngleBin(k.min(N_BINS - 1) as u8))
}

/// Bin centre in radians.
pub fn bin_to_angle(bin: AngleBin) -> f64 {
    (bin.0 as f64 + 0.5) * PI / N_BINS as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum Layer {
    Conv { k: usize, s: usize, c: usize, relu: bool },
    MaxPool { k: usize, s: usize },
}

impl Layer {
    pub const fn conv(k: usize, s: usize, c: usize) -> Self {
        Layer::Conv { k, s, c, relu: true }
    }

    pub fn kernel(&self) -> usize {
        match *self {
            Layer::Conv { k, .. } | Layer::MaxPool { k, .. } => k,
        }
    }

    pub fn stride(&self) -> usize {
        match *self {
            Layer::Conv { s, .. } | Layer::MaxPool { s, .. } => s,
        }
    }
}

/// Layer list of the classifier plus the patch size it is trained on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetSpec {
    pub name: String,
    pub input: usize,
    pub in_channels: usize,
    pub n_bins: usize,
    pub layers: Vec<Layer>,
}

impl NetSpec {
    /// 32 px patches, receptive field 32, total stride 8.
    pub fn desk() -> Self {
        Self {
            name: "desk".into(),
            input: 32,
            in_channels: 3,
            n_bins: N_BINS,
            layers: vec![
                Layer::conv(4, 2, 32),
                Layer::MaxPool { k: 3, s: 2 },
                Layer::conv(3, 1, 32),
                Layer::conv(3, 2, 32),
                Layer::conv(2, 1, 64),
                Layer::conv(1, 1, 64),
                Layer::Conv { k: 1, s: 1, c: 2 * N_BINS, relu: false },
            ],
        }
    }

    /// Small variant used by tests: same geometry, fewer channels.
    pub fn desk_small() -> Self {
        Self {
            name: "desk-small".into(),
            input: 32,
            in_channels: 3,
            n_bins: N_BINS,
            layers: vec![
                Layer::conv(4, 2, 6),
                Layer::MaxPool { k: 3, s: 2 },
                Layer::conv(3, 1, 6),
                Layer::conv(3, 2, 8),
                Layer::conv(2, 1, 8),
                Layer::Conv { k: 1, s: 1, c: 2 * N_BINS, relu: false },
            ],
        }
    }

    /// AlexNet-shaped 227 px network with a fully convolutional head,
    /// receptive field 227 and total stride 32.
    pub fn paper() -> Self {
        Self {
            name: "paper".into(),
            input: 227,
            in_channels: 3,
            n_bins: N_BINS,
            layers: vec![
                Layer::conv(11, 4, 96),
                Layer::MaxPool { k: 3, s: 2 },
                Layer::conv(5, 1, 256),
                Layer::MaxPool { k: 3, s: 2 },
                Layer::conv(3, 1, 384),
                Layer::conv(3, 1, 384),
                Layer::conv(3, 1, 256),
                Layer::MaxPool { k: 3, s: 2 },
                Layer::conv(2, 1, 4096),
                Layer::conv(1, 1, 1024),
                Layer::Conv { k: 1, s: 1, c: 2 * N_BINS, relu: false },
            ],
        }
    }

    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "desk" => Some(Self::desk()),
            "desk-small" => Some(Self::desk_small()),
            "paper" => Some(Self::paper()),
            _ => None,
        }
    }

    pub fn total_stride(&self) -> usize {
        self.layers.iter().map(Layer::stride).product()
    }

    pub fn receptive_field(&self) -> usize {
        self.layers.iter().rev().fold(1, |r, l| (r - 1) * l.stride() + l.kernel())
    }

    /// Pixel offset of the first output cell's patch centre.
    pub fn offset(&self) -> usize {
        self.receptive_field() / 2
    }

    /// Output side length for an input side, if the input is large enough.
    pub fn output_size(&self, mut n: usize) -> Option<usize> {
        for l in &self.layers {
            if n < l.kernel() {
                return None;
            }
            n = (n - l.kernel()) / l.stride() + 1;
        }
        Some(n)
    }

    /// Channel count entering each layer, plus the final output count.
    pub fn channels(&self) -> Vec<usize> {
        let mut ch = vec![self.in_channels];
        for l in &self.layers {
            let c = match *l {
                Layer::Conv { c, .. } => c,
                Layer::MaxPool { .. } => *ch.last().unwrap(),
            };
            ch.push(c);
        }
        ch
    }

    /// `(weight_offset, weight_len, bias_len)` per layer; pools have zero
    /// lengths.
    pub fn param_layout(&self) -> Vec<(usize, usize, usize)> {
        let ch = self.channels();
        let mut off = 0;
        self.layers
            .iter()
            .enumerate()
            .map(|(i, l)| match *l {
                Layer::Conv { k, c, .. } => {
                    let w = k * k * ch[i] * c;
                    let entry = (off, w, c);
                    off += w + c;
                    entry
                }
                Layer::MaxPool { .. } => (off, 0, 0),
            })
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.param_layout().iter().map(|(_, w, b)| w + b).sum()
    }

    pub fn validate(&self) -> Result<(), LearnError> {
        let bad = |s: String| Err(LearnError::InvalidNet(s));
        if self.layers.is_empty() || self.in_channels == 0 || self.n_bins == 0 {
            return bad("empty network".into());
        }
        for l in &self.layers {
            if l.kernel() == 0 || l.stride() == 0 {
                return bad(format!("zero kernel or stride in {l:?}"));
            }
            if let Layer::Conv { c: 0, .. } = l {
                return bad("conv with zero channels".into());
            }
        }
        match self.layers.last() {
            Some(&Layer::Conv { k: 1, s: 1, c, relu: false }) if c == 2 * self.n_bins => {}
            other => return bad(format!("final layer must be a linear 1×1 conv to {} channels, got {other:?}", 2 * self.n_bins)),
        }
        if self.receptive_field() > self.input {
            return bad(format!("receptive field {} exceeds input {}", self.receptive_field(), self.input));
        }
        if self.output_size(self.input) != Some(1) {
            return bad(format!("input {} does not reduce to a single cell", self.input));
        }
        Ok(())
    }
}
