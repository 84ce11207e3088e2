//! Discrete AdaBoost over decision stumps.

use serde::{Deserialize, Serialize};

use super::config::BoostConfig;
use crate::matrix::SparseMatrix;

/// `h(x) = polarity` when `x[feature] > threshold`, else `-polarity`. A
/// stump without a feature always outputs `polarity`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stump {
    pub feature: Option<u32>,
    pub threshold: f64,
    pub polarity: f64,
    pub alpha: f64,
}

impl Stump {
    pub fn output<F: Fn(usize) -> f64>(&self, value: &F) -> f64 {
        match self.feature {
            None => self.polarity,
            Some(f) if value(f as usize) > self.threshold => self.polarity,
            Some(_) => -self.polarity,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Stumps {
    pub stumps: Vec<Stump>,
}

impl Stumps {
    /// `sum(alpha h) / sum(alpha)`, in [-1, 1]; 0 for an empty ensemble.
    pub fn margin<F: Fn(usize) -> f64>(&self, value: F) -> f64 {
        let total: f64 = self.stumps.iter().map(|s| s.alpha).sum();
        if total <= 0.0 {
            return 0.0;
        }
        self.stumps.iter().map(|s| s.alpha * s.output(&value)).sum::<f64>() / total
    }

    /// Positive-class score `(1 + margin) / 2`.
    pub fn probability<F: Fn(usize) -> f64>(&self, value: F) -> f64 {
        (0.5 * (1.0 + self.margin(value))).clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundStats {
    pub epsilon: f64,
    /// Product of `2 sqrt(eps (1 - eps))` so far; bounds the weighted
    /// training error from above.
    pub bound: f64,
    pub weighted_error: f64,
}

pub fn train(x: &SparseMatrix, y: &[u8], weights: Option<&[f64]>, cfg: &BoostConfig) -> Stumps {
    train_with_history(x, y, weights, cfg).0
}

struct Best {
    err: f64,
    feature: Option<u32>,
    threshold: f64,
    polarity: f64,
}

pub fn train_with_history(x: &SparseMatrix, y: &[u8], weights: Option<&[f64]>, cfg: &BoostConfig) -> (Stumps, Vec<RoundStats>) {
    let n = x.rows();
    let dense = x.to_dense();
    let d = x.cols();
    // Non-constant features with their rows sorted by value.
    let mut sorted: Vec<(u32, Vec<(f64, u32)>)> = Vec::new();
    for f in 0..d {
        let mut col: Vec<(f64, u32)> = (0..n).map(|r| (dense.get(r, f), r as u32)).collect();
        col.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        if col.first().map(|c| c.0) != col.last().map(|c| c.0) {
            sorted.push((f as u32, col));
        }
    }
    let init: Vec<f64> = weights.map_or_else(|| vec![1.0; n], <[f64]>::to_vec);
    let total: f64 = init.iter().sum();
    let mut w: Vec<f64> = init.iter().map(|v| v / total).collect();
    let ys: Vec<f64> = y.iter().map(|&t| if t == 1 { 1.0 } else { -1.0 }).collect();
    let mut model = Stumps::default();
    let mut history = Vec::new();
    let mut bound = 1.0;
    let mut margins = vec![0.0; n];

    for _ in 0..cfg.rounds {
        let pos: f64 = (0..n).filter(|&i| ys[i] > 0.0).map(|i| w[i]).sum();
        let all: f64 = w.iter().sum();
        let neg = all - pos;
        let mut best = if neg <= pos {
            Best { err: neg, feature: None, threshold: 0.0, polarity: 1.0 }
        } else {
            Best { err: pos, feature: None, threshold: 0.0, polarity: -1.0 }
        };
        for (f, col) in &sorted {
            // Weight of each class at or below the threshold.
            let (mut lp, mut ln) = (0.0, 0.0);
            for i in 0..n - 1 {
                let (v, r) = col[i];
                if ys[r as usize] > 0.0 {
                    lp += w[r as usize];
                } else {
                    ln += w[r as usize];
                }
                let next = col[i + 1].0;
                if v == next {
                    continue;
                }
                // polarity +1: positives predicted above the threshold.
                let err_plus = lp + (neg - ln);
                let err_minus = all - err_plus;
                let thr = 0.5 * (v + next);
                let thr = if thr < next { thr } else { v };
                if err_plus < best.err {
                    best = Best { err: err_plus, feature: Some(*f), threshold: thr, polarity: 1.0 };
                }
                if err_minus < best.err {
                    best = Best { err: err_minus, feature: Some(*f), threshold: thr, polarity: -1.0 };
                }
            }
        }
        let epsilon = (best.err / all).max(0.0);
        if epsilon >= 0.5 {
            break;
        }
        let clamped = epsilon.max(1e-10);
        let alpha = 0.5 * ((1.0 - clamped) / clamped).ln();
        let stump = Stump { feature: best.feature, threshold: best.threshold, polarity: best.polarity, alpha };
        let mut z = 0.0;
        for i in 0..n {
            let h = stump.output(&|f| dense.get(i, f));
            margins[i] += alpha * h;
            w[i] *= (-alpha * ys[i] * h).exp();
            z += w[i];
        }
        w.iter_mut().for_each(|v| *v /= z);
        model.stumps.push(stump);
        bound *= 2.0 * (clamped * (1.0 - clamped)).sqrt();
        let weighted_error: f64 = (0..n)
            .filter(|&i| margins[i] * ys[i] <= 0.0)
            .map(|i| init[i] / total)
            .sum();
        history.push(RoundStats { epsilon, bound, weighted_error });
        if epsilon <= 1e-12 {
            break;
        }
    }
    (model, history)
}
