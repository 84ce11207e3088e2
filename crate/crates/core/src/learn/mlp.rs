//! One-hidden-layer perceptron with tanh units, trained by mini-batch
//! gradient descent on cross-entropy with L2 on the weight matrices.
//!
//! Parameters live in one flat vector: `W1` (`n_in x hidden`, row per
//! input), `b1`, `W2` (`hidden x n_out`, row per hidden unit), `b2`. Binary
//! mode has a single logistic output scoring class 1.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::MlpConfig;
use super::LearnError;
use crate::matrix::{SparseMatrix, SparseRow};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MlpMode {
    Multiclass,
    Binary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpShape {
    pub n_in: usize,
    pub hidden: usize,
    pub n_out: usize,
}

impl MlpShape {
    pub fn n_params(&self) -> usize {
        self.n_in * self.hidden + self.hidden + self.hidden * self.n_out + self.n_out
    }

    fn w1(&self) -> std::ops::Range<usize> {
        0..self.n_in * self.hidden
    }

    fn b1(&self) -> std::ops::Range<usize> {
        let s = self.n_in * self.hidden;
        s..s + self.hidden
    }

    fn w2(&self) -> std::ops::Range<usize> {
        let s = self.n_in * self.hidden + self.hidden;
        s..s + self.hidden * self.n_out
    }

    fn b2(&self) -> std::ops::Range<usize> {
        let s = self.n_params() - self.n_out;
        s..s + self.n_out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub shape: MlpShape,
    pub mode: MlpMode,
    pub params: Vec<f64>,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Adds `v * src` into `dst`.
fn axpy(dst: &mut [f64], v: f64, src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += v * s;
    }
}

/// Output logits from hidden pre-activations already holding `W1^T x`.
fn finish_forward(shape: &MlpShape, params: &[f64], h: &mut [f64], out: &mut [f64]) {
    let b1 = &params[shape.b1()];
    for (hk, b) in h.iter_mut().zip(b1) {
        *hk = (*hk + b).tanh();
    }
    out.copy_from_slice(&params[shape.b2()]);
    let w2 = &params[shape.w2()];
    for (k, &hk) in h.iter().enumerate() {
        axpy(out, hk, &w2[k * shape.n_out..(k + 1) * shape.n_out]);
    }
}

fn forward_sparse(shape: &MlpShape, params: &[f64], row: SparseRow<'_>, h: &mut [f64], out: &mut [f64]) {
    h.fill(0.0);
    let w1 = &params[shape.w1()];
    for (j, v) in row.iter() {
        axpy(h, v, &w1[j * shape.hidden..(j + 1) * shape.hidden]);
    }
    finish_forward(shape, params, h, out);
}

/// Turns logits into probabilities in place and returns the cross-entropy
/// for target `y`, leaving `out` = dLoss/dLogits.
fn loss_and_delta(mode: MlpMode, out: &mut [f64], y: usize) -> f64 {
    match mode {
        MlpMode::Binary => {
            let z = out[0];
            let t = if y == 1 { 1.0 } else { 0.0 };
            // softplus(z) - t z
            let loss = z.max(0.0) + (-z.abs()).exp().ln_1p() - t * z;
            out[0] = sigmoid(z) - t;
            loss
        }
        MlpMode::Multiclass => {
            let m = out.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let zy = out[y] - m;
            let mut sum = 0.0;
            for o in out.iter_mut() {
                *o = (*o - m).exp();
                sum += *o;
            }
            let loss = sum.ln() - zy;
            for o in out.iter_mut() {
                *o /= sum;
            }
            out[y] -= 1.0;
            loss
        }
    }
}

struct Workspace {
    h: Vec<f64>,
    out: Vec<f64>,
    dh: Vec<f64>,
}

impl Workspace {
    fn new(shape: &MlpShape) -> Self {
        Workspace { h: vec![0.0; shape.hidden], out: vec![0.0; shape.n_out], dh: vec![0.0; shape.hidden] }
    }
}

/// Zeroes negligible backward signals so saturated units cannot fill the
/// gradient with subnormal floats, which are very slow to compute with.
fn flush(d: f64) -> f64 {
    if d.abs() < 1e-150 {
        0.0
    } else {
        d
    }
}

/// Accumulates `weight * dLoss_row/dparams` into `grad`; returns the row loss.
fn backprop_row(
    shape: &MlpShape,
    mode: MlpMode,
    params: &[f64],
    row: SparseRow<'_>,
    y: usize,
    weight: f64,
    ws: &mut Workspace,
    grad: &mut [f64],
) -> f64 {
    forward_sparse(shape, params, row, &mut ws.h, &mut ws.out);
    let loss = loss_and_delta(mode, &mut ws.out, y);
    ws.out.iter_mut().for_each(|d| *d = flush(*d));
    let (n_out, hidden) = (shape.n_out, shape.hidden);
    let w2 = &params[shape.w2()];
    let w2_off = shape.w2().start;
    for k in 0..hidden {
        let hk = ws.h[k];
        let w2k = &w2[k * n_out..(k + 1) * n_out];
        let mut back = 0.0;
        for o in 0..n_out {
            back += w2k[o] * ws.out[o];
        }
        axpy(&mut grad[w2_off + k * n_out..w2_off + (k + 1) * n_out], weight * hk, &ws.out);
        ws.dh[k] = flush(back * (1.0 - hk * hk));
    }
    let b2 = shape.b2();
    axpy(&mut grad[b2], weight, &ws.out);
    let b1 = shape.b1();
    axpy(&mut grad[b1], weight, &ws.dh);
    for (j, v) in row.iter() {
        let s = j * hidden;
        axpy(&mut grad[s..s + hidden], weight * v, &ws.dh);
    }
    loss
}

fn add_l2(shape: &MlpShape, params: &[f64], l2: f64, grad: &mut [f64]) -> f64 {
    if l2 == 0.0 {
        return 0.0;
    }
    let mut pen = 0.0;
    for r in [shape.w1(), shape.w2()] {
        for i in r {
            pen += params[i] * params[i];
            grad[i] += l2 * params[i];
        }
    }
    0.5 * l2 * pen
}

/// Weighted mean cross-entropy over all rows plus `l2/2 * |W|^2`, and its
/// gradient with respect to the flat parameter vector.
pub fn loss_and_gradient(
    shape: &MlpShape,
    mode: MlpMode,
    params: &[f64],
    x: &SparseMatrix,
    y: &[usize],
    weights: Option<&[f64]>,
    l2: f64,
) -> (f64, Vec<f64>) {
    let rows: Vec<usize> = (0..x.rows()).collect();
    let mut grad = vec![0.0; shape.n_params()];
    let mut ws = Workspace::new(shape);
    let loss = batch_gradient(shape, mode, params, x, y, weights, &rows, &mut ws, &mut grad);
    let pen = add_l2(shape, params, l2, &mut grad);
    (loss + pen, grad)
}

/// Weighted-mean loss of `rows`, writing its gradient (without L2) to `grad`.
#[allow(clippy::too_many_arguments)]
fn batch_gradient(
    shape: &MlpShape,
    mode: MlpMode,
    params: &[f64],
    x: &SparseMatrix,
    y: &[usize],
    weights: Option<&[f64]>,
    rows: &[usize],
    ws: &mut Workspace,
    grad: &mut [f64],
) -> f64 {
    grad.fill(0.0);
    let total: f64 = match weights {
        Some(w) => rows.iter().map(|&r| w[r]).sum(),
        None => rows.len() as f64,
    };
    let mut loss = 0.0;
    for &r in rows {
        let w = weights.map_or(1.0, |w| w[r]) / total;
        loss += w * backprop_row(shape, mode, params, x.row(r), y[r], w, ws, grad);
    }
    loss
}

fn initial_params<R: Rng>(shape: &MlpShape, mode: MlpMode, y: &[usize], weights: Option<&[f64]>, rng: &mut R) -> Vec<f64> {
    let mut p = vec![0.0; shape.n_params()];
    let a = (6.0 / (shape.n_in + shape.hidden) as f64).sqrt();
    for v in &mut p[shape.w1()] {
        *v = rng.gen_range(-a..a);
    }
    let classes = match mode {
        MlpMode::Binary => 2,
        MlpMode::Multiclass => shape.n_out,
    };
    let mut freq = vec![0.0; classes];
    for (i, &c) in y.iter().enumerate() {
        freq[c] += weights.map_or(1.0, |w| w[i]);
    }
    let total: f64 = freq.iter().sum();
    // Unseen classes get a small floor so the prior stays finite.
    let prior: Vec<f64> = freq.iter().map(|f| (f / total).max(1e-12)).collect();
    let b2 = shape.b2();
    match mode {
        MlpMode::Binary => p[b2.start] = (prior[1] / prior[0]).ln(),
        MlpMode::Multiclass => {
            for (slot, q) in p[b2].iter_mut().zip(&prior) {
                *slot = q.ln();
            }
        }
    }
    p
}

#[allow(clippy::too_many_arguments)]
pub fn train(
    x: &SparseMatrix,
    y: &[usize],
    n_classes: usize,
    weights: Option<&[f64]>,
    cfg: &MlpConfig,
    seed: u64,
    mode: MlpMode,
) -> Result<Mlp, LearnError> {
    // Fit on max-abs scaled inputs, then fold the factors into the input
    // weights so the network reads raw inputs.
    if let Some((scaled, factor)) = x.max_abs_scale() {
        let mut net = train_unscaled(&scaled, y, n_classes, weights, cfg, seed, mode)?;
        let hidden = net.shape.hidden;
        let w1 = &mut net.params[net.shape.w1()];
        for (j, f) in factor.iter().enumerate() {
            w1[j * hidden..(j + 1) * hidden].iter_mut().for_each(|w| *w *= f);
        }
        return Ok(net);
    }
    train_unscaled(x, y, n_classes, weights, cfg, seed, mode)
}

#[allow(clippy::too_many_arguments)]
fn train_unscaled(
    x: &SparseMatrix,
    y: &[usize],
    n_classes: usize,
    weights: Option<&[f64]>,
    cfg: &MlpConfig,
    seed: u64,
    mode: MlpMode,
) -> Result<Mlp, LearnError> {
    let shape = MlpShape {
        n_in: x.cols(),
        hidden: cfg.hidden,
        n_out: if mode == MlpMode::Binary { 1 } else { n_classes },
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = initial_params(&shape, mode, y, weights, &mut rng);
    let mut grad = vec![0.0; shape.n_params()];
    let mut ws = Workspace::new(&shape);
    let n = x.rows();
    let mut order: Vec<usize> = (0..n).collect();
    let full_batch = cfg.batch >= n;
    for epoch in 0..cfg.epochs {
        if !full_batch {
            order.shuffle(&mut rng);
        }
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch) {
            let loss = batch_gradient(&shape, mode, &params, x, y, weights, batch, &mut ws, &mut grad);
            let pen = add_l2(&shape, &params, cfg.l2, &mut grad);
            epoch_loss += loss + pen;
            for (p, g) in params.iter_mut().zip(&grad) {
                *p -= cfg.learning_rate * g;
            }
        }
        if !epoch_loss.is_finite() {
            log::error!("mlp loss {epoch_loss} at epoch {epoch} (lr {}, hidden {})", cfg.learning_rate, cfg.hidden);
            return Err(LearnError::NonFiniteLoss { epoch, loss: epoch_loss });
        }
    }
    Ok(Mlp { shape, mode, params })
}

impl Mlp {
    /// Class probabilities; binary mode returns `[1 - p, p]`.
    pub fn predict_dense(&self, x: &[f64]) -> Vec<f64> {
        let mut h = vec![0.0; self.shape.hidden];
        let mut out = vec![0.0; self.shape.n_out];
        self.logits_with(|j| x[j], &mut h, &mut out);
        match self.mode {
            MlpMode::Binary => {
                let p = sigmoid(out[0]);
                vec![1.0 - p, p]
            }
            MlpMode::Multiclass => {
                let m = out.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let mut sum = 0.0;
                for o in out.iter_mut() {
                    *o = (*o - m).exp();
                    sum += *o;
                }
                out.iter_mut().for_each(|o| *o /= sum);
                out
            }
        }
    }

    /// Logits for an input given as a per-column accessor.
    pub fn logits_with<F: Fn(usize) -> f64>(&self, value: F, h: &mut [f64], out: &mut [f64]) {
        let s = &self.shape;
        h.fill(0.0);
        let w1 = &self.params[s.w1()];
        for j in 0..s.n_in {
            let v = value(j);
            if v != 0.0 {
                axpy(h, v, &w1[j * s.hidden..(j + 1) * s.hidden]);
            }
        }
        finish_forward(s, &self.params, h, out);
    }

    /// Positive-class probability of a binary network whose inputs are 0/1,
    /// given the set inputs as bits of `mask`. Matches `prob_positive_with`
    /// on the corresponding 0/1 values.
    pub fn prob_positive_mask(&self, mask: u64, h: &mut [f64]) -> f64 {
        let s = &self.shape;
        h.fill(0.0);
        let w1 = &self.params[s.w1()];
        let mut bits = mask;
        while bits != 0 {
            let j = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            axpy(h, 1.0, &w1[j * s.hidden..(j + 1) * s.hidden]);
        }
        let mut out = [0.0];
        finish_forward(s, &self.params, h, &mut out);
        sigmoid(out[0])
    }

    /// Positive-class probability of a binary network.
    pub fn prob_positive_with<F: Fn(usize) -> f64>(&self, value: F) -> f64 {
        debug_assert_eq!(self.mode, MlpMode::Binary);
        let mut h = vec![0.0; self.shape.hidden];
        let mut out = [0.0];
        self.logits_with(value, &mut h, &mut out);
        sigmoid(out[0])
    }

    /// Mean cross-entropy on a dataset (no penalty term).
    pub fn data_loss(&self, x: &SparseMatrix, y: &[usize]) -> f64 {
        let mut ws = Workspace::new(&self.shape);
        let mut total = 0.0;
        for r in 0..x.rows() {
            forward_sparse(&self.shape, &self.params, x.row(r), &mut ws.h, &mut ws.out);
            total += loss_and_delta(self.mode, &mut ws.out, y[r]);
        }
        total / x.rows() as f64
    }
}
