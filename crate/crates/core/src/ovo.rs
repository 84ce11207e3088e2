//! One-vs-one assembly of binary classifiers, the vote/confidence decision
//! rule and the cross-classifier ensemble.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::learn::{
    self, BinaryFamily, BinaryModel, BinaryTrainer, ClassIndex, ClassifierKind, LearnError, MlpMode, Model, TrainConfig,
};
use crate::matrix::{FeatureMatrix, SparseRow};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OvoError {
    #[error("one-vs-one needs at least two classes, found {0}")]
    SingleClass(usize),
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error("the ensemble classifier has no single model; train its members instead")]
    EnsembleNotTrainable,
}

pub fn n_pairs(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// All `(i, j)` with `i < j` in lexicographic order; position = pair index.
pub fn pair_list(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect()
}

pub fn pair_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * n - i * (i + 1) / 2 + (j - i - 1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OvoModel {
    pub classes: Vec<String>,
    pub n_features: usize,
    pub family: BinaryFamily,
    pub seed: u64,
    /// Indexed by `pair_index`; each scores the higher-indexed class.
    pub pairs: Vec<BinaryModel>,
}

/// Pair `k` trains on rows of its two classes only, with seed `seed ^ k`.
pub fn train_ovo(trainer: &BinaryTrainer, x: &FeatureMatrix, y: &[String], seed: u64) -> Result<OvoModel, OvoError> {
    if x.rows() != y.len() {
        return Err(LearnError::LengthMismatch { rows: x.rows(), labels: y.len() }.into());
    }
    trainer.validate()?;
    let ci = ClassIndex::new(y);
    let n = ci.classes.len();
    if n < 2 {
        return Err(OvoError::SingleClass(n));
    }
    let mut rows = vec![Vec::new(); n];
    for (r, &c) in ci.y.iter().enumerate() {
        rows[c].push(r);
    }
    let sparse = x.to_sparse();
    let pairs = pair_list(n)
        .into_par_iter()
        .enumerate()
        .map(|(k, (i, j))| {
            let data = trainer.pair_data(&sparse, &rows[i], &rows[j]);
            trainer.train(&data, seed ^ k as u64)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(OvoModel { classes: ci.classes, n_features: x.cols(), family: trainer.family, seed, pairs })
}

#[derive(Debug, Clone, PartialEq)]
pub struct OvoPrediction {
    pub class: usize,
    pub votes: Vec<u32>,
    pub confidences: Vec<f64>,
    pub tie_broken: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OvoWinner {
    pub class: usize,
    pub confidence_sum: f64,
    pub tie_broken: bool,
}

/// Per-thread state for `OvoModel::winner`; `stamp[k] == epoch` marks pair
/// `k` as scored for the current row.
struct Scratch {
    n: usize,
    epoch: u32,
    stamp: Vec<u32>,
    probs: Vec<f64>,
    losses: Vec<u32>,
    played: Vec<u32>,
    next: Vec<usize>,
    heap: BinaryHeap<Reverse<(u32, usize)>>,
    hidden: Vec<f64>,
}

impl Scratch {
    fn new(n: usize) -> Self {
        Scratch {
            n,
            epoch: 0,
            stamp: vec![0; n_pairs(n)],
            probs: vec![0.0; n_pairs(n)],
            losses: vec![0; n],
            played: vec![0; n],
            next: vec![0; n],
            heap: BinaryHeap::with_capacity(2 * n),
            hidden: Vec::new(),
        }
    }

    fn reset(&mut self) {
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.stamp.fill(0);
            self.epoch = 1;
        }
        self.losses.fill(0);
        self.played.fill(0);
        self.next.fill(0);
        self.heap.clear();
        self.heap.extend((0..self.n).map(|c| Reverse((0, c))));
    }
}

/// Most votes wins; a vote tie goes to the tied class with the largest
/// confidence sum, then to the lowest index.
pub fn decide(votes: &[u32], confidences: &[f64]) -> (usize, bool) {
    let top = votes.iter().copied().max().unwrap_or(0);
    let mut tied = (0..votes.len()).filter(|&c| votes[c] == top);
    let first = tied.next().unwrap_or(0);
    let mut winner = first;
    let mut broken = false;
    for c in tied {
        broken = true;
        if confidences[c] > confidences[winner] {
            winner = c;
        }
    }
    (winner, broken)
}

/// Votes and confidence sums from positive-class probabilities listed in
/// pair order.
pub fn tally(n: usize, probs: &[f64]) -> (Vec<u32>, Vec<f64>) {
    let mut votes = vec![0u32; n];
    let mut conf = vec![0.0; n];
    let mut k = 0;
    for i in 0..n {
        for j in i + 1..n {
            add_pair(&mut votes, &mut conf, i, j, probs[k]);
            k += 1;
        }
    }
    (votes, conf)
}

fn add_pair(votes: &mut [u32], conf: &mut [f64], i: usize, j: usize, p: f64) {
    if p > 0.5 {
        votes[j] += 1;
    } else {
        votes[i] += 1;
    }
    conf[i] += 1.0 - p;
    conf[j] += p;
}

const PAIR_CHUNK: usize = 512;

impl OvoModel {
    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    fn check_dim(&self, found: usize) -> Result<(), LearnError> {
        if found != self.n_features {
            return Err(LearnError::DimensionMismatch { expected: self.n_features, found });
        }
        Ok(())
    }

    pub fn predict(&self, x: &[f64]) -> Result<OvoPrediction, LearnError> {
        self.check_dim(x.len())?;
        Ok(self.scores(&FeatureMatrix::from_vec(1, x.len(), x.to_vec())).remove(0))
    }

    /// Pairs are scored in chunks, each pair over all rows at once; per
    /// row, votes and confidences are still summed in pair order.
    pub fn predict_batch(&self, x: &FeatureMatrix) -> Result<Vec<OvoPrediction>, LearnError> {
        self.check_dim(x.cols())?;
        Ok(self.scores(x))
    }

    /// Winner, its confidence sum and the tie flag for each row, equal to
    /// `predict_batch` but evaluating only the pairs needed to fix the
    /// winner. The class with the fewest losses so far plays its next pair;
    /// once every unfinished class has lost more often than some finished
    /// one, the vote is settled.
    pub fn predict_winners(&self, x: &FeatureMatrix) -> Result<Vec<OvoWinner>, LearnError> {
        self.check_dim(x.cols())?;
        let sparse = x.to_sparse();
        Ok((0..x.rows())
            .into_par_iter()
            .map_init(|| Scratch::new(self.classes.len()), |s, r| self.winner(sparse.row(r), s))
            .collect())
    }

    fn winner(&self, row: SparseRow<'_>, s: &mut Scratch) -> OvoWinner {
        let n = self.classes.len();
        s.reset();
        let mut best = u32::MAX;
        while let Some(Reverse((l, c))) = s.heap.pop() {
            if l != s.losses[c] || s.played[c] as usize == n - 1 {
                continue;
            }
            if l > best {
                break;
            }
            let mut o = s.next[c];
            while o == c || s.stamp[pair_index(n, o.min(c), o.max(c))] == s.epoch {
                o += 1;
            }
            s.next[c] = o + 1;
            let (i, j) = (o.min(c), o.max(c));
            let k = pair_index(n, i, j);
            let p = self.pairs[k].prob_positive_sparse(row, &mut s.hidden);
            s.stamp[k] = s.epoch;
            s.probs[k] = p;
            let loser = if p > 0.5 { i } else { j };
            s.losses[loser] += 1;
            for m in [i, j] {
                s.played[m] += 1;
                if s.played[m] as usize == n - 1 {
                    best = best.min(s.losses[m]);
                } else if m == c || m == loser {
                    s.heap.push(Reverse((s.losses[m], m)));
                }
            }
        }
        let mut out = OvoWinner { class: usize::MAX, confidence_sum: 0.0, tie_broken: false };
        for c in (0..n).filter(|&c| s.played[c] as usize == n - 1 && s.losses[c] == best) {
            let mut sum = 0.0;
            for o in (0..n).filter(|&o| o != c) {
                sum += if o < c { s.probs[pair_index(n, o, c)] } else { 1.0 - s.probs[pair_index(n, c, o)] };
            }
            if out.class == usize::MAX {
                out = OvoWinner { class: c, confidence_sum: sum, tie_broken: false };
            } else {
                out.tie_broken = true;
                if sum > out.confidence_sum {
                    out.class = c;
                    out.confidence_sum = sum;
                }
            }
        }
        out
    }

    fn scores(&self, x: &FeatureMatrix) -> Vec<OvoPrediction> {
        let n = self.classes.len();
        let rows = x.rows();
        let sparse = x.to_sparse();
        let pairs = pair_list(n);
        // Class-major so each pair updates two contiguous runs.
        let mut votes = vec![0u32; n * rows];
        let mut conf = vec![0.0; n * rows];
        let mut probs = vec![0.0; PAIR_CHUNK * rows];
        for (c, chunk) in self.pairs.chunks(PAIR_CHUNK).enumerate() {
            let buf = &mut probs[..chunk.len() * rows];
            if rows == 0 {
                break;
            }
            buf.par_chunks_mut(rows).zip(chunk).for_each(|(out, m)| m.prob_positive_rows(&sparse, out));
            for (k, p) in buf.chunks(rows).enumerate() {
                let (i, j) = pairs[c * PAIR_CHUNK + k];
                for (r, &p) in p.iter().enumerate() {
                    if p > 0.5 {
                        votes[j * rows + r] += 1;
                    } else {
                        votes[i * rows + r] += 1;
                    }
                    conf[i * rows + r] += 1.0 - p;
                    conf[j * rows + r] += p;
                }
            }
        }
        (0..rows)
            .map(|r| {
                let votes: Vec<u32> = (0..n).map(|c| votes[c * rows + r]).collect();
                let confidences: Vec<f64> = (0..n).map(|c| conf[c * rows + r]).collect();
                let (class, tie_broken) = decide(&votes, &confidences);
                OvoPrediction { class, votes, confidences, tie_broken }
            })
            .collect()
    }
}

/// A trained multi-class classifier of any family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classifier {
    Single(Model),
    Ovo(OvoModel),
}

pub fn train_classifier(
    kind: ClassifierKind,
    x: &FeatureMatrix,
    y: &[String],
    cfg: &TrainConfig,
    seed: u64,
) -> Result<Classifier, OvoError> {
    match kind {
        ClassifierKind::Forest => Ok(Classifier::Single(learn::train_forest(x, y, &cfg.forest, seed)?)),
        ClassifierKind::Mlp => Ok(Classifier::Single(learn::train_mlp(x, y, &cfg.mlp, seed, MlpMode::Multiclass)?)),
        ClassifierKind::Ensemble => Err(OvoError::EnsembleNotTrainable),
        binary => {
            let family = binary.binary_family().expect("remaining kinds are binary");
            let trainer = BinaryTrainer::new(family, cfg.clone());
            Ok(Classifier::Ovo(train_ovo(&trainer, x, y, seed)?))
        }
    }
}

/// Anything that labels rows and reports a confidence in [0, 1] for the
/// chosen class.
pub trait MultiClassPredictor: Sync {
    fn classes(&self) -> &[String];
    fn predict_with_confidence(&self, x: &FeatureMatrix) -> Result<Vec<(usize, f64)>, LearnError>;
}

impl MultiClassPredictor for Model {
    fn classes(&self) -> &[String] {
        &self.classes
    }

    fn predict_with_confidence(&self, x: &FeatureMatrix) -> Result<Vec<(usize, f64)>, LearnError> {
        (0..x.rows()).into_par_iter().map(|r| self.predict_index(x.row(r))).collect()
    }
}

impl MultiClassPredictor for OvoModel {
    fn classes(&self) -> &[String] {
        &self.classes
    }

    /// Confidence is the winner's confidence sum over its `N - 1` pairs.
    fn predict_with_confidence(&self, x: &FeatureMatrix) -> Result<Vec<(usize, f64)>, LearnError> {
        let denom = (self.classes.len() - 1) as f64;
        Ok(self.predict_winners(x)?.into_iter().map(|w| (w.class, w.confidence_sum / denom)).collect())
    }
}

impl MultiClassPredictor for Classifier {
    fn classes(&self) -> &[String] {
        match self {
            Classifier::Single(m) => m.classes(),
            Classifier::Ovo(m) => m.classes(),
        }
    }

    fn predict_with_confidence(&self, x: &FeatureMatrix) -> Result<Vec<(usize, f64)>, LearnError> {
        match self {
            Classifier::Single(m) => m.predict_with_confidence(x),
            Classifier::Ovo(m) => m.predict_with_confidence(x),
        }
    }
}

impl Classifier {
    pub fn n_features(&self) -> usize {
        match self {
            Classifier::Single(m) => m.n_features,
            Classifier::Ovo(m) => m.n_features,
        }
    }
}

pub const MODEL_FORMAT: &str = "gab-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelFileError {
    #[error("not a model file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("format tag {0:?} is not {MODEL_FORMAT:?}")]
    Format(String),
    #[error("model version {found} is not supported (expected {MODEL_VERSION})")]
    Version { found: u32 },
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

/// Versioned JSON container for a trained classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    pub classifier: ClassifierKind,
    pub n_features: usize,
    /// Column names of the encoded inputs, when known.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub columns: Vec<String>,
    pub model: Classifier,
}

impl ModelFile {
    pub fn new(classifier: ClassifierKind, model: Classifier) -> Self {
        ModelFile {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_VERSION,
            classifier,
            n_features: model.n_features(),
            columns: Vec::new(),
            model,
        }
    }

    pub fn write<W: std::io::Write>(&self, out: W) -> Result<(), ModelFileError> {
        serde_json::to_writer(out, self)?;
        Ok(())
    }

    pub fn read<R: std::io::Read>(input: R) -> Result<ModelFile, ModelFileError> {
        let v: serde_json::Value = serde_json::from_reader(input)?;
        let format = v.get("format").and_then(|f| f.as_str()).unwrap_or("");
        if format != MODEL_FORMAT {
            return Err(ModelFileError::Format(format.to_string()));
        }
        let version = v.get("version").and_then(|f| f.as_u64()).unwrap_or(0) as u32;
        if version != MODEL_VERSION {
            return Err(ModelFileError::Version { found: version });
        }
        Ok(serde_json::from_value(v)?)
    }
}

/// Majority label among `(label, confidence)` votes; ties go to the highest
/// mean confidence, then to the smallest label. `None` for no votes.
pub fn ensemble_vote<S: AsRef<str>>(members: &[(S, f64)]) -> Option<String> {
    let mut tally: BTreeMap<&str, (usize, f64)> = BTreeMap::new();
    for (label, conf) in members {
        let e = tally.entry(label.as_ref()).or_insert((0, 0.0));
        e.0 += 1;
        e.1 += conf;
    }
    let mut best: Option<(&str, usize, f64)> = None;
    for (label, (count, sum)) in tally {
        let mean = sum / count as f64;
        let better = match best {
            None => true,
            Some((_, bc, bm)) => count > bc || (count == bc && mean > bm),
        };
        if better {
            best = Some((label, count, mean));
        }
    }
    best.map(|(l, _, _)| l.to_string())
}

/// Ensemble label for one input.
pub fn predict_ensemble(models: &[(&str, &dyn MultiClassPredictor)], x: &[f64]) -> Result<Option<String>, LearnError> {
    let row = FeatureMatrix::from_vec(1, x.len(), x.to_vec());
    let mut votes = Vec::with_capacity(models.len());
    for (_, m) in models {
        let (c, conf) = m.predict_with_confidence(&row)?[0];
        votes.push((m.classes()[c].clone(), conf));
    }
    Ok(ensemble_vote(&votes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn labels(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn pair_indexing() {
        for n in 2..12 {
            let list = pair_list(n);
            assert_eq!(list.len(), n_pairs(n));
            for (k, &(i, j)) in list.iter().enumerate() {
                assert_eq!(pair_index(n, i, j), k);
            }
        }
        assert_eq!(n_pairs(455), 103_285);
    }

    #[test]
    fn three_way_cycle_breaks_by_confidence() {
        // A beats B (0.9), B beats C (0.6), C beats A (0.55 for C).
        let probs = [0.1, 0.55, 0.4];
        let (votes, conf) = tally(3, &probs);
        assert_eq!(votes, vec![1, 1, 1]);
        let expect = [0.9 + 0.45, 0.1 + 0.6, 0.55 + 0.4];
        for (c, e) in conf.iter().zip(expect) {
            assert!((c - e).abs() < 1e-12);
        }
        assert_eq!(decide(&votes, &conf), (0, true));
        assert_eq!(decide(&[2, 1, 0], &[0.0, 5.0, 5.0]), (0, false));
        assert_eq!(decide(&[1, 1], &[1.0, 1.0]), (0, true));
    }

    #[test]
    fn trains_one_model_per_pair_on_its_rows_only() {
        let x = FeatureMatrix::from_rows(&[
            vec![1.0, 0.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0, 0.0],
            vec![0.0, 0.0, 1.0, 0.0],
            vec![0.0, 0.0, 0.0, 1.0],
        ]);
        let y = labels(&["a", "b", "c", "c"]);
        let t = BinaryTrainer::new(BinaryFamily::Svm, TrainConfig::default());
        let m = train_ovo(&t, &x, &y, 3).unwrap();
        assert_eq!(m.pairs.len(), 3);
        // Each pair only knows the columns its two classes use.
        assert_eq!(m.pairs[0].features.as_deref(), Some(&[0u32, 1][..]));
        assert_eq!(m.pairs[1].features.as_deref(), Some(&[0u32, 2, 3][..]));
        assert_eq!(m.pairs[2].features.as_deref(), Some(&[1u32, 2, 3][..]));
        for r in 0..4 {
            assert_eq!(m.classes[m.predict(x.row(r)).unwrap().class], y[r]);
        }
        assert!(matches!(train_ovo(&t, &x, &labels(&["a"; 4]), 0), Err(OvoError::SingleClass(1))));
    }

    #[test]
    fn two_classes_match_the_binary_model() {
        let x = FeatureMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0], vec![0.0, 0.0]]);
        let y = labels(&["n", "p", "p", "n"]);
        let t = BinaryTrainer::new(BinaryFamily::Boost, TrainConfig::default());
        let m = train_ovo(&t, &x, &y, 0).unwrap();
        for r in 0..4 {
            let p = m.pairs[0].prob_positive(x.row(r));
            assert_eq!(m.predict(x.row(r)).unwrap().class, usize::from(p > 0.5));
        }
        assert!(m.predict(&[1.0]).is_err());
    }

    #[test]
    fn ensemble_rules() {
        assert_eq!(ensemble_vote(&[("a", 0.2), ("a", 0.3), ("a", 0.9)]).unwrap(), "a");
        assert_eq!(ensemble_vote(&[("a", 0.2), ("a", 0.3), ("b", 0.9)]).unwrap(), "a");
        assert_eq!(ensemble_vote(&[("b", 0.6), ("a", 0.9)]).unwrap(), "a");
        assert_eq!(ensemble_vote(&[("b", 0.9), ("a", 0.6)]).unwrap(), "b");
        assert_eq!(ensemble_vote(&[("b", 0.5), ("a", 0.5)]).unwrap(), "a");
        assert_eq!(ensemble_vote::<&str>(&[]), None);
    }

    #[test]
    fn batch_and_single_predictions_agree() {
        let rows: Vec<Vec<f64>> = (0..150).map(|i| vec![(i % 5) as f64, ((i / 5) % 3) as f64, (i % 2) as f64]).collect();
        let y: Vec<String> = (0..150).map(|i| format!("c{}", (i % 5 + i % 3) % 4)).collect();
        let x = FeatureMatrix::from_rows(&rows);
        let t = BinaryTrainer::new(BinaryFamily::Svm, TrainConfig::default());
        let m = train_ovo(&t, &x, &y, 9).unwrap();
        let batch = m.predict_batch(&x).unwrap();
        for r in 0..x.rows() {
            assert_eq!(batch[r], m.predict(x.row(r)).unwrap());
        }
    }

    fn assert_winners_match(m: &OvoModel, x: &FeatureMatrix) {
        let batch = m.predict_batch(x).unwrap();
        for (r, (w, b)) in m.predict_winners(x).unwrap().iter().zip(&batch).enumerate() {
            assert_eq!(w.class, b.class, "row {r}");
            assert_eq!(w.tie_broken, b.tie_broken, "row {r}");
            assert_eq!(w.confidence_sum.to_bits(), b.confidences[b.class].to_bits(), "row {r}");
        }
    }

    #[test]
    fn early_stopping_matches_the_full_vote() {
        let rows: Vec<Vec<f64>> =
            (0..120).map(|i| vec![(i % 7) as f64, ((i / 7) % 3) as f64, (i % 2) as f64, 1.0]).collect();
        let y: Vec<String> = (0..120).map(|i| format!("c{}", (i % 7 + i % 4) % 9)).collect();
        let x = FeatureMatrix::from_rows(&rows);
        let mut cfg = TrainConfig::default();
        cfg.binary_mlp.epochs = 5;
        for family in [BinaryFamily::Svm, BinaryFamily::Boost, BinaryFamily::Mlp] {
            let m = train_ovo(&BinaryTrainer::new(family, cfg.clone()), &x, &y, 2).unwrap();
            assert_winners_match(&m, &x);
        }
    }

    proptest! {
        #[test]
        fn early_stopping_matches_the_full_vote_on_ties(
            n in 2usize..9,
            tenths in proptest::collection::vec(0u8..=10, 28),
        ) {
            let pairs = tenths[..n_pairs(n)]
                .iter()
                .map(|&t| BinaryModel { features: None, body: learn::BinaryBody::Constant { p: t as f64 / 10.0 } })
                .collect();
            let classes = (0..n).map(|c| c.to_string()).collect();
            let m = OvoModel { classes, n_features: 1, family: BinaryFamily::Svm, seed: 0, pairs };
            assert_winners_match(&m, &FeatureMatrix::from_rows(&[vec![0.0], vec![1.0]]));
        }

        #[test]
        fn pair_count_is_n_choose_two(n in 2usize..50) {
            let x = FeatureMatrix::from_rows(&(0..n).map(|i| vec![i as f64]).collect::<Vec<_>>());
            let y: Vec<String> = (0..n).map(|i| format!("{i:03}")).collect();
            let t = BinaryTrainer::new(BinaryFamily::Boost, TrainConfig::default());
            let m = train_ovo(&t, &x, &y, 0).unwrap();
            prop_assert_eq!(m.pairs.len(), n * (n - 1) / 2);
        }

        #[test]
        fn relabeling_does_not_change_the_prediction(
            n in 2usize..7,
            probs in proptest::collection::vec(0.0f64..1.0, 15),
            perm_seed in 0u64..1000,
        ) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let probs = &probs[..n_pairs(n)];
            let (v, c) = tally(n, probs);
            let (winner, _) = decide(&v, &c);
            // Permute class identities; rebuild the table in the new order.
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(perm_seed));
            let mut votes = vec![0u32; n];
            let mut conf = vec![0.0; n];
            for (k, (i, j)) in pair_list(n).into_iter().enumerate() {
                let (a, b) = (perm[i], perm[j]);
                let p_b = probs[k];
                let (lo, hi, p_hi) = if a < b { (a, b, p_b) } else { (b, a, 1.0 - p_b) };
                // Original: vote to j iff p > 0.5.
                let j_wins = p_b > 0.5;
                let hi_wins = if a < b { j_wins } else { !j_wins };
                if hi_wins { votes[hi] += 1 } else { votes[lo] += 1 }
                conf[lo] += 1.0 - p_hi;
                conf[hi] += p_hi;
            }
            let (w2, broke) = decide(&votes, &conf);
            // Lowest-index fallback depends on labels, so compare only when
            // confidences separate the tied classes.
            let top = *votes.iter().max().unwrap();
            let tied: Vec<usize> = (0..n).filter(|&c| votes[c] == top).collect();
            let distinct = tied.iter().all(|&a| tied.iter().all(|&b| a == b || (conf[a] - conf[b]).abs() > 1e-9));
            if !broke || distinct {
                prop_assert_eq!(w2, perm[winner]);
            }
        }

        #[test]
        fn raising_the_winner_keeps_it(
            n in 3usize..7,
            probs in proptest::collection::vec(0.0f64..1.0, 15),
            bump in 0.001f64..0.5,
        ) {
            let probs = &probs[..n_pairs(n)];
            let (v, c) = tally(n, probs);
            let (winner, broke) = decide(&v, &c);
            prop_assume!(broke);
            // Move every pair probability involving the winner toward it.
            let raised: Vec<f64> = pair_list(n)
                .into_iter()
                .zip(probs)
                .map(|((i, j), &p)| {
                    if j == winner {
                        (p + bump).min(1.0)
                    } else if i == winner {
                        (p - bump).max(0.0)
                    } else {
                        p
                    }
                })
                .collect();
            let (v2, c2) = tally(n, &raised);
            prop_assert_eq!(decide(&v2, &c2).0, winner);
        }
    }
}
