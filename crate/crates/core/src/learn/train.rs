use super::net::{backward, forward, forward_tape, image_to_input, success_prob, ModelParams};
use super::{AngleBin, Layer, LearnError};
use crate::render::ImageGrid;
use crate::seeding::{label, rng_for};
use num_traits::Float;
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

/// One labelled grasp attempt as seen by the learner.
pub trait Example {
    fn patch(&self) -> &ImageGrid;
    fn bin(&self) -> AngleBin;
    fn reward(&self) -> bool;
}

impl Example for (ImageGrid, AngleBin, bool) {
    fn patch(&self) -> &ImageGrid {
        &self.0
    }
    fn bin(&self) -> AngleBin {
        self.1
    }
    fn reward(&self) -> bool {
        self.2
    }
}

/// Cross-entropy of the active bin's two-way softmax.
pub fn masked_loss<T: Float>(logits: &[T], bin: AngleBin, reward: bool) -> T {
    let (zf, zs) = (logits[2 * bin.index()], logits[2 * bin.index() + 1]);
    let m = zf.max(zs);
    let lse = m + ((zf - m).exp() + (zs - m).exp()).ln();
    lse - if reward { zs } else { zf }
}

/// Loss and its gradient with respect to all logits; only the active pair
/// is non-zero.
pub fn masked_loss_grad<T: Float>(logits: &[T], bin: AngleBin, reward: bool) -> (T, Vec<T>) {
    let k = bin.index();
    let (zf, zs) = (logits[2 * k], logits[2 * k + 1]);
    let ps = T::one() / (T::one() + (zf - zs).exp());
    let pf = T::one() - ps;
    let mut g = vec![T::zero(); logits.len()];
    if reward {
        g[2 * k] = pf;
        g[2 * k + 1] = ps - T::one();
    } else {
        g[2 * k] = pf - T::one();
        g[2 * k + 1] = ps;
    }
    (masked_loss(logits, bin, reward), g)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Draw half of every minibatch from each class.
    pub balanced: bool,
    #[serde(default)]
    pub weight_decay: f64,
    /// Present every sample under a random symmetry of the square patch,
    /// with its bin moved to match.
    #[serde(default)]
    pub augment: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { lr: 0.01, momentum: 0.9, batch_size: 32, epochs: 20, seed: 0, balanced: true, weight_decay: 0.0, augment: false }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), LearnError> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(LearnError::InvalidConfig("learning rate must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(LearnError::InvalidConfig("batch size must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(LearnError::InvalidConfig("momentum must be in [0, 1)".into()));
        }
        if self.weight_decay < 0.0 {
            return Err(LearnError::InvalidConfig("weight decay must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean_loss: f64,
    pub train_accuracy: f64,
}

struct StepResult {
    loss: f64,
    correct: bool,
    grad: Vec<f32>,
}

fn sample_step<E: Example>(params: &ModelParams, e: &E, t: usize) -> Result<StepResult, LearnError> {
    let (input, bin) = if t == 0 {
        (image_to_input::<f32>(e.patch()), e.bin())
    } else {
        (image_to_input::<f32>(&e.patch().dihedral(t)), e.bin().dihedral(t))
    };
    let tape = forward_tape(&params.net, params.params(), input)?;
    let logits = &tape.output().data;
    if logits.len() != 2 * params.net.n_bins {
        return Err(LearnError::ShapeMismatch(format!("patch yields {} logits", logits.len())));
    }
    let (loss, dl) = masked_loss_grad(logits, bin, e.reward());
    let k = bin.index();
    let correct = (success_prob(logits[2 * k], logits[2 * k + 1]) > 0.5) == e.reward();
    let mut grad = vec![0.0f32; params.params().len()];
    backward(&params.net, params.params(), &tape, &dl, &mut grad);
    Ok(StepResult { loss: loss as f64, correct, grad })
}

/// `(index, symmetry)` lists for one epoch.
fn epoch_batches<E: Example>(data: &[E], cfg: &TrainConfig, epoch: usize) -> Vec<Vec<(usize, usize)>> {
    let batches = epoch_order(data, cfg, epoch);
    if !cfg.augment {
        return batches.into_iter().map(|b| b.into_iter().map(|i| (i, 0)).collect()).collect();
    }
    let mut rng = rng_for(cfg.seed, &[label("train-augment"), epoch as u64]);
    batches.into_iter().map(|b| b.into_iter().map(|i| (i, rng.gen_range(0..8))).collect()).collect()
}

fn epoch_order<E: Example>(data: &[E], cfg: &TrainConfig, epoch: usize) -> Vec<Vec<usize>> {
    let mut rng = rng_for(cfg.seed, &[label("train-order"), epoch as u64]);
    let n = data.len();
    let steps = n.div_ceil(cfg.batch_size);
    let (mut pos, mut neg): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| data[i].reward());
    if cfg.balanced && !pos.is_empty() && !neg.is_empty() {
        pos.shuffle(&mut rng);
        neg.shuffle(&mut rng);
        let half = cfg.batch_size / 2;
        let (mut ip, mut ineg) = (0usize, 0usize);
        (0..steps)
            .map(|s| {
                // odd batch sizes alternate which class gets the extra slot
                let np = if cfg.batch_size % 2 == 1 && s % 2 == 0 { half + 1 } else { half };
                let mut b = Vec::with_capacity(cfg.batch_size);
                for _ in 0..np {
                    b.push(pos[ip % pos.len()]);
                    ip += 1;
                }
                for _ in np..cfg.batch_size {
                    b.push(neg[ineg % neg.len()]);
                    ineg += 1;
                }
                b
            })
            .collect()
    } else {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        order.chunks(cfg.batch_size).map(|c| c.to_vec()).collect()
    }
}

/// Minibatch SGD with momentum on the mean masked loss. Per-sample
/// gradients may be computed in parallel but are always summed in batch
/// order, so a fixed seed reproduces the same weights bit for bit.
pub fn train<E: Example + Sync>(
    init: &ModelParams,
    data: &[E],
    cfg: &TrainConfig,
) -> Result<(ModelParams, Vec<EpochStats>), LearnError> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(LearnError::EmptyDataset);
    }
    let mut params = init.clone();
    let mut velocity = vec![0.0f32; params.params().len()];
    let mut curve = Vec::with_capacity(cfg.epochs);
    let (lr, mu, wd) = (cfg.lr as f32, cfg.momentum as f32, cfg.weight_decay as f32);
    for epoch in 0..cfg.epochs {
        let (mut loss_sum, mut correct, mut seen) = (0.0f64, 0usize, 0usize);
        for batch in epoch_batches(data, cfg, epoch) {
            let results: Vec<StepResult> = batch
                .par_iter()
                .map(|&(i, t)| sample_step(&params, &data[i], t))
                .collect::<Result<_, _>>()?;
            let mut grad = vec![0.0f32; velocity.len()];
            for r in &results {
                loss_sum += r.loss;
                correct += r.correct as usize;
                for (g, &v) in grad.iter_mut().zip(&r.grad) {
                    *g += v;
                }
            }
            seen += results.len();
            let scale = 1.0 / results.len() as f32;
            for ((p, v), g) in params.params_mut().iter_mut().zip(velocity.iter_mut()).zip(&grad) {
                let g = g * scale + wd * *p;
                *v = mu * *v + g;
                *p -= lr * *v;
            }
        }
        curve.push(EpochStats {
            epoch: epoch + 1,
            mean_loss: loss_sum / seen as f64,
            train_accuracy: correct as f64 / seen as f64,
        });
    }
    Ok((params, curve))
}

/// Fraction of examples whose active-bin prediction matches the label.
pub fn accuracy<E: Example>(params: &ModelParams, data: &[E]) -> Result<f64, LearnError> {
    let mut ok = 0usize;
    for e in data {
        let out = forward(&params.net, params.params(), &image_to_input::<f32>(e.patch()))?;
        let k = e.bin().index();
        ok += ((success_prob(out.data[2 * k], out.data[2 * k + 1]) > 0.5) == e.reward()) as usize;
    }
    Ok(ok as f64 / data.len().max(1) as f64)
}

pub fn write_loss_csv(path: &Path, curve: &[EpochStats]) -> std::io::Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "epoch,mean_loss,train_accuracy")?;
    for e in curve {
        writeln!(f, "{},{},{}", e.epoch, e.mean_loss, e.train_accuracy)?;
    }
    f.flush()
}

/// Result of [`gradient_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    /// Largest `|g_a - g_n| / max(|g_a|, |g_n|, 1e-8)` over checked weights.
    pub max_rel_error: f64,
    pub checked: usize,
    /// Draws skipped because `w ± ε` crossed a ReLU or pooling switch.
    pub kinks: usize,
}

/// Central finite differences against backprop on `n_weights` parameters
/// spread evenly over the conv layers. The analytic gradient is computed
/// at precision `A` and the difference quotient at precision `R`.
/// A draw whose `±ε` evaluations land on a different linear piece than the
/// base point is redrawn, since the difference quotient is then not a
/// derivative of anything.
pub fn gradient_check<A: Float, R: Float>(
    params: &ModelParams,
    patch: &ImageGrid,
    bin: AngleBin,
    reward: bool,
    epsilon: f64,
    n_weights: usize,
    seed: u64,
) -> Result<GradCheck, LearnError> {
    let net = &params.net;
    let pa: Vec<A> = params.converted();
    let tape_a = forward_tape(net, &pa, image_to_input::<A>(patch))?;
    let (_, dl) = masked_loss_grad(&tape_a.output().data, bin, reward);
    let mut grad = vec![A::zero(); pa.len()];
    backward(net, &pa, &tape_a, &dl, &mut grad);

    let mut p: Vec<R> = params.converted();
    let input = image_to_input::<R>(patch);
    let tape = forward_tape(net, &p, input.clone())?;
    let conv_layers: Vec<(usize, usize)> = net
        .layers
        .iter()
        .zip(net.param_layout())
        .filter(|(l, _)| matches!(l, Layer::Conv { .. }))
        .map(|(_, (off, w, b))| (off, w + b))
        .collect();
    let mut rng = rng_for(seed, &[label("gradient-check")]);
    let eps = R::from(epsilon).unwrap();
    let two = R::one() + R::one();
    let mut out = GradCheck { max_rel_error: 0.0, checked: 0, kinks: 0 };
    let max_draws = 50 * n_weights.max(1);
    let mut draws = 0;
    while out.checked < n_weights && draws < max_draws {
        draws += 1;
        let (off, len) = conv_layers[out.checked % conv_layers.len()];
        let idx = off + rng.gen_range(0..len);
        let orig = p[idx];
        p[idx] = orig + eps;
        let tp = forward_tape(net, &p, input.clone())?;
        p[idx] = orig - eps;
        let tm = forward_tape(net, &p, input.clone())?;
        p[idx] = orig;
        if !tape.same_piece(&tp, net) || !tape.same_piece(&tm, net) {
            out.kinks += 1;
            continue;
        }
        let lp = masked_loss(&tp.output().data, bin, reward);
        let lm = masked_loss(&tm.output().data, bin, reward);
        let gn = ((lp - lm) / (two * eps)).to_f64().unwrap();
        let ga = grad[idx].to_f64().unwrap();
        let rel = (ga - gn).abs() / ga.abs().max(gn.abs()).max(1e-8);
        out.max_rel_error = out.max_rel_error.max(rel);
        out.checked += 1;
    }
    Ok(out)
}
