//! Linear max-margin classifier: L2-regularized hinge loss minimized by
//! stochastic subgradient descent with a decaying step and an unregularized
//! bias. The best iterate by full objective is returned.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::SvmConfig;
use crate::matrix::{SparseMatrix, SparseRow};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub weights: Vec<f64>,
    pub bias: f64,
}

pub fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl Linear {
    pub fn zeros(d: usize) -> Self {
        Linear { weights: vec![0.0; d], bias: 0.0 }
    }

    pub fn margin_sparse(&self, row: SparseRow<'_>) -> f64 {
        self.bias + row.iter().map(|(j, v)| self.weights[j] * v).sum::<f64>()
    }

    pub fn margin_with<F: Fn(usize) -> f64>(&self, value: F) -> f64 {
        let mut m = self.bias;
        for (j, w) in self.weights.iter().enumerate() {
            if *w != 0.0 {
                m += w * value(j);
            }
        }
        m
    }

    /// Signed margin squashed by a unit logistic.
    pub fn probability_dense(&self, x: &[f64]) -> f64 {
        logistic(self.margin_with(|j| x[j]))
    }
}

pub fn lambda(cfg: &SvmConfig, n: usize) -> f64 {
    1.0 / (cfg.c * n as f64)
}

fn sign(t: u8) -> f64 {
    if t == 1 {
        1.0
    } else {
        -1.0
    }
}

/// `lambda/2 |w|^2 + mean hinge`.
pub fn objective(model: &Linear, x: &SparseMatrix, y: &[u8], lambda: f64) -> f64 {
    let reg: f64 = model.weights.iter().map(|w| w * w).sum();
    let hinge: f64 = (0..x.rows())
        .map(|r| (1.0 - sign(y[r]) * model.margin_sparse(x.row(r))).max(0.0))
        .sum();
    0.5 * lambda * reg + hinge / x.rows() as f64
}

/// `y[r] == 1` marks the positive class.
/// Fits on max-abs scaled inputs and returns weights for raw inputs.
pub fn train(x: &SparseMatrix, y: &[u8], cfg: &SvmConfig, seed: u64) -> Linear {
    match x.max_abs_scale() {
        Some((scaled, factor)) => {
            let mut lin = train_with_history(&scaled, y, cfg, seed).0;
            lin.weights.iter_mut().zip(&factor).for_each(|(w, f)| *w *= f);
            lin
        }
        None => train_with_history(x, y, cfg, seed).0,
    }
}

/// Also returns the objective after every epoch, starting with the zero
/// vector at index 0.
pub fn train_with_history(x: &SparseMatrix, y: &[u8], cfg: &SvmConfig, seed: u64) -> (Linear, Vec<f64>) {
    let n = x.rows();
    let d = x.cols();
    let lam = lambda(cfg, n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // w = scale * v keeps the shrink step O(1).
    let mut v = vec![0.0; d];
    let mut scale = 1.0;
    let mut bias = 0.0;
    let mut best = Linear::zeros(d);
    let mut best_obj = objective(&best, x, y, lam);
    let mut history = vec![best_obj];
    let mut order: Vec<usize> = (0..n).collect();
    let mut t = 0usize;
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for &r in &order {
            t += 1;
            let eta = cfg.learning_rate / (1.0 + cfg.learning_rate * lam * t as f64);
            let row = x.row(r);
            let yr = sign(y[r]);
            let margin = yr * (scale * row.iter().map(|(j, xv)| v[j] * xv).sum::<f64>() + bias);
            scale *= 1.0 - eta * lam;
            if margin < 1.0 {
                let step = eta * yr / scale;
                for (j, xv) in row.iter() {
                    v[j] += step * xv;
                }
                bias += eta * yr;
            }
            if scale < 1e-100 {
                v.iter_mut().for_each(|e| *e *= scale);
                scale = 1.0;
            }
        }
        let current = Linear { weights: v.iter().map(|e| e * scale).collect(), bias };
        let obj = objective(&current, x, y, lam);
        history.push(obj);
        if obj < best_obj {
            best_obj = obj;
            best = current;
        }
    }
    (best, history)
}
