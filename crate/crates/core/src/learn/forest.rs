//! Random decision forest: bootstrap samples, Gini splits, per-node feature
//! subsampling, one class vote per tree.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ForestConfig;
use crate::matrix::FeatureMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Leaf { class: u32 },
    /// Rows with `x[feature] <= threshold` go left.
    Split { feature: u32, threshold: f64, left: u32, right: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> usize {
        let mut at = 0usize;
        loop {
            match self.nodes[at] {
                Node::Leaf { class } => return class as usize,
                Node::Split { feature, threshold, left, right } => {
                    at = if x[feature as usize] <= threshold { left } else { right } as usize;
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, at: usize) -> usize {
            match t.nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(t, left as usize).max(go(t, right as usize)),
            }
        }
        go(self, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub n_classes: usize,
    pub trees: Vec<Tree>,
}

impl Forest {
    /// Fraction of trees voting for each class.
    pub fn vote_fractions(&self, x: &[f64]) -> Vec<f64> {
        let mut v = vec![0.0; self.n_classes];
        for t in &self.trees {
            v[t.predict(x)] += 1.0;
        }
        let n = self.trees.len() as f64;
        v.iter_mut().for_each(|s| *s /= n);
        v
    }
}

/// `n` row indices drawn uniformly with replacement.
pub fn bootstrap<R: Rng>(n: usize, rng: &mut R) -> Vec<usize> {
    (0..n).map(|_| rng.gen_range(0..n)).collect()
}

/// Rows never drawn into `in_bag`, ascending.
pub fn out_of_bag(n: usize, in_bag: &[usize]) -> Vec<usize> {
    let mut seen = vec![false; n];
    for &i in in_bag {
        seen[i] = true;
    }
    (0..n).filter(|&i| !seen[i]).collect()
}

pub fn features_per_node(cfg: &ForestConfig, d: usize) -> usize {
    let m = match cfg.feature_subsample {
        None => (d as f64).sqrt().floor() as usize,
        Some(f) => (f * d as f64).ceil() as usize,
    };
    m.clamp(1, d.max(1))
}

pub fn train(x: &FeatureMatrix, y: &[usize], n_classes: usize, cfg: &ForestConfig, seed: u64) -> Forest {
    let (n, d) = (x.rows(), x.cols());
    let mut cols = vec![0.0; n * d];
    for r in 0..n {
        for (c, &v) in x.row(r).iter().enumerate() {
            cols[c * n + r] = v;
        }
    }
    let data = Columns { n, d, cols, y, n_classes };
    let mtry = features_per_node(cfg, d);
    let trees = (0..cfg.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ t as u64);
            let sample = bootstrap(n, &mut rng);
            grow(&data, sample, cfg, mtry, &mut rng)
        })
        .collect();
    Forest { n_classes, trees }
}

struct Columns<'a> {
    n: usize,
    d: usize,
    cols: Vec<f64>,
    y: &'a [usize],
    n_classes: usize,
}

impl Columns<'_> {
    fn value(&self, feature: usize, row: u32) -> f64 {
        self.cols[feature * self.n + row as usize]
    }
}

struct Scratch {
    left: Vec<u32>,
    right: Vec<u32>,
    node: Vec<u32>,
    touched: Vec<u32>,
    vals: Vec<(f64, u32)>,
}

fn grow<R: Rng>(data: &Columns<'_>, sample: Vec<usize>, cfg: &ForestConfig, mtry: usize, rng: &mut R) -> Tree {
    let mut idx: Vec<u32> = sample.into_iter().map(|i| i as u32).collect();
    let mut features: Vec<u32> = (0..data.d as u32).collect();
    let k = data.n_classes;
    let mut s = Scratch { left: vec![0; k], right: vec![0; k], node: vec![0; k], touched: Vec::new(), vals: Vec::new() };
    let mut nodes = vec![Node::Leaf { class: 0 }];
    // (start, end, depth, node slot)
    let mut stack = vec![(0usize, idx.len(), 0usize, 0usize)];
    while let Some((start, end, depth, slot)) = stack.pop() {
        let rows = &idx[start..end];
        s.touched.clear();
        for &r in rows {
            let c = data.y[r as usize];
            if s.node[c] == 0 {
                s.touched.push(c as u32);
            }
            s.node[c] += 1;
        }
        s.touched.sort_unstable();
        let majority = s.touched.iter().copied().max_by_key(|&c| (s.node[c as usize], std::cmp::Reverse(c))).unwrap_or(0);
        let n = rows.len();
        let split = if s.touched.len() > 1 && depth < cfg.max_depth && n >= 2 * cfg.min_leaf {
            best_split(data, rows, &mut features, mtry, cfg.min_leaf, &mut s, rng)
        } else {
            None
        };
        for &c in &s.touched {
            s.node[c as usize] = 0;
        }
        match split {
            None => nodes[slot] = Node::Leaf { class: majority },
            Some((feature, threshold)) => {
                let mut mid = start;
                for i in start..end {
                    if data.value(feature, idx[i]) <= threshold {
                        idx.swap(i, mid);
                        mid += 1;
                    }
                }
                let (l, r) = (nodes.len(), nodes.len() + 1);
                nodes.push(Node::Leaf { class: 0 });
                nodes.push(Node::Leaf { class: 0 });
                nodes[slot] = Node::Split { feature: feature as u32, threshold, left: l as u32, right: r as u32 };
                stack.push((mid, end, depth + 1, r));
                stack.push((start, mid, depth + 1, l));
            }
        }
    }
    Tree { nodes }
}

/// Searches up to `mtry` non-constant features drawn without replacement.
/// Node class counts are in `s.node` for the classes in `s.touched`.
fn best_split<R: Rng>(
    data: &Columns<'_>,
    rows: &[u32],
    features: &mut [u32],
    mtry: usize,
    min_leaf: usize,
    s: &mut Scratch,
    rng: &mut R,
) -> Option<(usize, f64)> {
    let n = rows.len();
    let node_sq: f64 = s.touched.iter().map(|&c| (s.node[c as usize] as f64).powi(2)).sum();
    let mut best: Option<(f64, usize, f64)> = None;
    let mut evaluated = 0;
    let d = features.len();
    for drawn in 0..d {
        if evaluated == mtry {
            break;
        }
        let pick = rng.gen_range(drawn..d);
        features.swap(drawn, pick);
        let f = features[drawn] as usize;

        s.vals.clear();
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &r in rows {
            let v = data.value(f, r);
            lo = lo.min(v);
            hi = hi.max(v);
            s.vals.push((v, data.y[r as usize] as u32));
        }
        if lo == hi {
            continue;
        }
        evaluated += 1;
        s.vals.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for &c in &s.touched {
            s.right[c as usize] = s.node[c as usize];
            s.left[c as usize] = 0;
        }
        let (mut sl, mut sr) = (0.0f64, node_sq);
        for i in 0..n - 1 {
            let c = s.vals[i].1 as usize;
            sl += 2.0 * s.left[c] as f64 + 1.0;
            sr -= 2.0 * s.right[c] as f64 - 1.0;
            s.left[c] += 1;
            s.right[c] -= 1;
            let nl = i + 1;
            if s.vals[i].0 == s.vals[i + 1].0 || nl < min_leaf || n - nl < min_leaf {
                continue;
            }
            let score = sl / nl as f64 + sr / (n - nl) as f64;
            if best.map_or(true, |(b, _, _)| score > b) {
                let thr = 0.5 * (s.vals[i].0 + s.vals[i + 1].0);
                // Midpoint can round up to the right value for adjacent floats.
                let thr = if thr < s.vals[i + 1].0 { thr } else { s.vals[i].0 };
                best = Some((score, f, thr));
            }
        }
    }
    best.map(|(_, f, t)| (f, t))
}
