//! Binary training on compact per-pair datasets.
//!
//! A pair dataset keeps only the columns that are non-zero somewhere in its
//! rows and remaps them to local indices. The trained model carries the map
//! back to global columns, so columns the pair never saw contribute nothing.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::mlp::{self, Mlp, MlpMode};
use super::{boost, svm, LearnError, Linear, Stumps};
use crate::matrix::{SparseMatrix, SparseRow};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinaryFamily {
    Svm,
    Boost,
    Mlp,
}

impl fmt::Display for BinaryFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BinaryFamily::Svm => "svm",
            BinaryFamily::Boost => "boost",
            BinaryFamily::Mlp => "mlp",
        })
    }
}

impl FromStr for BinaryFamily {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "svm" => Ok(BinaryFamily::Svm),
            "boost" => Ok(BinaryFamily::Boost),
            "mlp" => Ok(BinaryFamily::Mlp),
            other => Err(format!("unknown binary family {other:?}")),
        }
    }
}

/// Rows of two classes with columns restricted to those they use.
/// `y[r] == 1` marks the second (positive) class.
#[derive(Debug, Clone, PartialEq)]
pub struct PairData {
    /// Global column of each local column, ascending.
    pub features: Vec<u32>,
    pub x: SparseMatrix,
    pub y: Vec<u8>,
    /// Multiplicities after merging identical rows.
    pub weights: Option<Vec<f64>>,
    pub n_negative: usize,
    pub n_positive: usize,
}

impl PairData {
    /// `negative` and `positive` index rows of `x`. With `dedupe`, identical
    /// (row, label) pairs merge into one weighted row.
    pub fn build(x: &SparseMatrix, negative: &[usize], positive: &[usize], dedupe: bool) -> PairData {
        let mut features: Vec<u32> = negative
            .iter()
            .chain(positive)
            .flat_map(|&r| x.row(r).indices.iter().copied())
            .collect();
        features.sort_unstable();
        features.dedup();
        let local = |g: u32| features.binary_search(&g).expect("column collected above") as u32;

        let mut out = SparseMatrix::new(features.len());
        let mut y = Vec::with_capacity(negative.len() + positive.len());
        let mut weights = Vec::new();
        let mut seen: HashMap<(Vec<u32>, Vec<u64>, u8), usize> = HashMap::new();
        let labelled = negative.iter().map(|&r| (r, 0u8)).chain(positive.iter().map(|&r| (r, 1u8)));
        for (r, label) in labelled {
            let row = x.row(r);
            let idx: Vec<u32> = row.indices.iter().map(|&g| local(g)).collect();
            if dedupe {
                let key = (idx.clone(), row.values.iter().map(|v| v.to_bits()).collect(), label);
                if let Some(&slot) = seen.get(&key) {
                    weights[slot] += 1.0;
                    continue;
                }
                seen.insert(key, weights.len());
                weights.push(1.0);
            }
            out.push_row(idx.into_iter().zip(row.values.iter().copied()));
            y.push(label);
        }
        PairData {
            features,
            x: out,
            y,
            weights: dedupe.then_some(weights),
            n_negative: negative.len(),
            n_positive: positive.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinaryBody {
    Linear(Linear),
    Stumps(Stumps),
    Mlp(Mlp),
    /// Fixed positive-class probability.
    Constant { p: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryModel {
    /// Global column of each model input; `None` means inputs are global.
    pub features: Option<Vec<u32>>,
    pub body: BinaryBody,
}

impl BinaryModel {
    /// Positive-class probability for a dense row in global columns.
    pub fn prob_positive(&self, x: &[f64]) -> f64 {
        match &self.features {
            Some(map) => self.body_prob(|l| x[map[l] as usize]),
            None => self.body_prob(|j| x[j]),
        }
    }

    /// `prob_positive` for every row of `x`. Rows whose restriction to the
    /// model's inputs is a 0/1 pattern share one evaluation per pattern.
    pub fn prob_positive_rows(&self, x: &SparseMatrix, out: &mut [f64]) {
        debug_assert_eq!(out.len(), x.rows());
        if let BinaryBody::Constant { p } = self.body {
            out.fill(p);
            return;
        }
        let map = match &self.features {
            Some(map) if map.len() < 64 => map,
            _ => {
                let mut dense = vec![0.0; x.cols()];
                for (r, o) in out.iter_mut().enumerate() {
                    let row = x.row(r);
                    for (j, v) in row.iter() {
                        dense[j] = v;
                    }
                    *o = self.prob_positive(&dense);
                    for (j, _) in row.iter() {
                        dense[j] = 0.0;
                    }
                }
                return;
            }
        };
        let mut local = vec![u8::MAX; x.cols()];
        for (l, &g) in map.iter().enumerate() {
            local[g as usize] = l as u8;
        }
        if let BinaryBody::Linear(lin) = &self.body {
            for (r, o) in out.iter_mut().enumerate() {
                let row = x.row(r);
                let mut m = lin.bias;
                for (&g, &v) in row.indices.iter().zip(row.values) {
                    let l = local[g as usize];
                    if l != u8::MAX && lin.weights[l as usize] != 0.0 {
                        m += lin.weights[l as usize] * v;
                    }
                }
                *o = svm::logistic(m);
            }
            return;
        }
        // Open-addressing table of pattern -> probability. With at most 63
        // inputs no pattern equals the empty marker.
        let slots = (2 * x.rows()).next_power_of_two().max(16);
        let mut cache = vec![(u64::MAX, 0.0f64); slots];
        let mut hidden = match &self.body {
            BinaryBody::Mlp(net) => vec![0.0; net.shape.hidden],
            _ => Vec::new(),
        };
        for (r, o) in out.iter_mut().enumerate() {
            let row = x.row(r);
            let mut mask = 0u64;
            let mut binary = true;
            for (&g, &v) in row.indices.iter().zip(row.values) {
                let l = local[g as usize];
                if l != u8::MAX {
                    binary &= v == 1.0;
                    mask |= 1 << l;
                }
            }
            *o = if binary {
                let mut slot = (mask.wrapping_mul(0x9E37_79B9_7F4A_7C15) >> 32) as usize & (slots - 1);
                while cache[slot].0 != mask && cache[slot].0 != u64::MAX {
                    slot = (slot + 1) & (slots - 1);
                }
                if cache[slot].0 == mask {
                    cache[slot].1
                } else {
                    let p = match &self.body {
                        BinaryBody::Mlp(net) if net.mode == MlpMode::Binary => net.prob_positive_mask(mask, &mut hidden),
                        _ => self.body_prob(|l| ((mask >> l) & 1) as f64),
                    };
                    cache[slot] = (mask, p);
                    p
                }
            } else {
                let value = |l: usize| row.iter().find(|&(j, _)| j == map[l] as usize).map_or(0.0, |(_, v)| v);
                self.body_prob(value)
            };
        }
    }

    /// `prob_positive` for one sparse row, bit-identical to the dense call.
    /// `hidden` is scratch space for binary-input networks.
    pub fn prob_positive_sparse(&self, row: SparseRow<'_>, hidden: &mut Vec<f64>) -> f64 {
        let lookup = |g: u32| row.indices.binary_search(&g).map_or(0.0, |k| row.values[k]);
        let map = match (&self.body, &self.features) {
            (BinaryBody::Constant { p }, _) => return *p,
            (_, None) => return self.body_prob(|j| lookup(j as u32)),
            (_, Some(map)) if map.len() >= 64 => return self.body_prob(|l| lookup(map[l])),
            (_, Some(map)) => map,
        };
        if let BinaryBody::Linear(lin) = &self.body {
            let mut m = lin.bias;
            for (&g, &v) in row.indices.iter().zip(row.values) {
                if let Ok(l) = map.binary_search(&g) {
                    if lin.weights[l] != 0.0 {
                        m += lin.weights[l] * v;
                    }
                }
            }
            return svm::logistic(m);
        }
        let mut mask = 0u64;
        let mut binary = true;
        for (&g, &v) in row.indices.iter().zip(row.values) {
            if let Ok(l) = map.binary_search(&g) {
                binary &= v == 1.0;
                mask |= 1 << l;
            }
        }
        if !binary {
            return self.body_prob(|l| lookup(map[l]));
        }
        match &self.body {
            BinaryBody::Mlp(net) if net.mode == MlpMode::Binary => {
                hidden.resize(net.shape.hidden, 0.0);
                net.prob_positive_mask(mask, hidden)
            }
            _ => self.body_prob(|l| ((mask >> l) & 1) as f64),
        }
    }

    /// Probability from a function giving each model input's value.
    pub fn body_prob<F: Fn(usize) -> f64>(&self, value: F) -> f64 {
        match &self.body {
            BinaryBody::Constant { p } => *p,
            BinaryBody::Linear(l) => svm::logistic(l.margin_with(value)),
            BinaryBody::Stumps(s) => s.probability(value),
            BinaryBody::Mlp(m) => m.prob_positive_with(value),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinaryTrainer {
    pub family: BinaryFamily,
    pub config: TrainConfig,
}

impl BinaryTrainer {
    pub fn new(family: BinaryFamily, config: TrainConfig) -> Self {
        BinaryTrainer { family, config }
    }

    pub fn validate(&self) -> Result<(), LearnError> {
        match self.family {
            BinaryFamily::Svm => self.config.svm.validate(),
            BinaryFamily::Boost => self.config.boost.validate(),
            BinaryFamily::Mlp => self.config.binary_mlp.validate(),
        }
    }

    /// Merging duplicates is exact for boosting and for full-batch
    /// gradient descent; stochastic updates see every copy.
    pub fn dedupes(&self, rows: usize) -> bool {
        match self.family {
            BinaryFamily::Svm => false,
            BinaryFamily::Boost => true,
            BinaryFamily::Mlp => rows <= self.config.binary_mlp.batch,
        }
    }

    pub fn pair_data(&self, x: &SparseMatrix, negative: &[usize], positive: &[usize]) -> PairData {
        PairData::build(x, negative, positive, self.dedupes(negative.len() + positive.len()))
    }

    pub fn train(&self, data: &PairData, seed: u64) -> Result<BinaryModel, LearnError> {
        let features = Some(data.features.clone());
        if data.n_negative == 0 || data.n_positive == 0 {
            let p = if data.n_positive > 0 { 1.0 } else { 0.0 };
            return Ok(BinaryModel { features, body: BinaryBody::Constant { p } });
        }
        let w = data.weights.as_deref();
        let body = match self.family {
            BinaryFamily::Svm => BinaryBody::Linear(svm::train(&data.x, &data.y, &self.config.svm, seed)),
            BinaryFamily::Boost => BinaryBody::Stumps(boost::train(&data.x, &data.y, w, &self.config.boost)),
            BinaryFamily::Mlp => {
                let y: Vec<usize> = data.y.iter().map(|&t| t as usize).collect();
                BinaryBody::Mlp(mlp::train(&data.x, &y, 2, w, &self.config.binary_mlp.as_mlp(), seed, MlpMode::Binary)?)
            }
        };
        Ok(BinaryModel { features, body })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::FeatureMatrix;

    fn fixture() -> SparseMatrix {
        FeatureMatrix::from_rows(&[
            vec![1.0, 0.0, 0.0, 1.0, 0.0],
            vec![1.0, 0.0, 0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0, 0.0, 1.0],
        ])
        .to_sparse()
    }

    #[test]
    fn pair_data_uses_local_columns() {
        let x = fixture();
        let p = PairData::build(&x, &[0, 1], &[3], false);
        assert_eq!(p.features, vec![0, 1, 3, 4]);
        assert_eq!(p.x.rows(), 3);
        assert_eq!(p.x.row(2).indices, &[1, 3]);
        assert_eq!(p.y, vec![0, 0, 1]);
        assert_eq!(p.weights, None);

        let d = PairData::build(&x, &[0, 1], &[3], true);
        assert_eq!(d.x.rows(), 2);
        assert_eq!(d.weights, Some(vec![2.0, 1.0]));
        assert_eq!((d.n_negative, d.n_positive), (2, 1));
    }

    #[test]
    fn empty_side_gives_constant() {
        let x = fixture();
        let t = BinaryTrainer::new(BinaryFamily::Svm, TrainConfig::default());
        let m = t.train(&t.pair_data(&x, &[], &[2]), 0).unwrap();
        assert_eq!(m.body, BinaryBody::Constant { p: 1.0 });
    }

    #[test]
    fn batched_rows_match_single_rows() {
        let x = FeatureMatrix::from_rows(&[
            vec![1.0, 0.0, 0.0, 1.0, 0.0],
            vec![1.0, 0.0, 0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0, 0.0, 1.0],
            vec![0.0, 2.0, 0.0, 1.0, 0.0],
            vec![0.0, 0.0, 0.0, 0.0, 0.0],
        ])
        .to_sparse();
        let dense = x.to_dense();
        let mut cfg = TrainConfig::default();
        cfg.binary_mlp.hidden = 3;
        cfg.binary_mlp.epochs = 50;
        cfg.boost.rounds = 5;
        for family in [BinaryFamily::Svm, BinaryFamily::Boost, BinaryFamily::Mlp] {
            let t = BinaryTrainer::new(family, cfg.clone());
            for (neg, pos) in [(&[0usize, 1][..], &[2usize, 3][..]), (&[4], &[3]), (&[], &[3])] {
                let m = t.train(&t.pair_data(&x, neg, pos), 5).unwrap();
                let mut out = vec![0.0; x.rows()];
                m.prob_positive_rows(&x, &mut out);
                for r in 0..x.rows() {
                    assert_eq!(out[r].to_bits(), m.prob_positive(dense.row(r)).to_bits(), "{family} row {r}");
                    let sparse = m.prob_positive_sparse(x.row(r), &mut Vec::new());
                    assert_eq!(out[r].to_bits(), sparse.to_bits(), "{family} sparse row {r}");
                }
            }
        }
    }

    #[test]
    fn every_family_separates_a_pair() {
        let x = fixture();
        let dense = x.to_dense();
        let mut cfg = TrainConfig::default();
        cfg.binary_mlp.hidden = 4;
        cfg.binary_mlp.epochs = 200;
        for family in [BinaryFamily::Svm, BinaryFamily::Boost, BinaryFamily::Mlp] {
            let t = BinaryTrainer::new(family, cfg.clone());
            let m = t.train(&t.pair_data(&x, &[0, 1], &[2, 3]), 5).unwrap();
            for r in 0..4 {
                let p = m.prob_positive(dense.row(r));
                assert_eq!(p > 0.5, r >= 2, "{family} row {r}: {p}");
            }
        }
    }
}
