//! Classifiers trained from scratch: a multi-class decision forest, a
//! one-hidden-layer perceptron (multi-class or binary), a linear max-margin
//! classifier and AdaBoost over decision stumps.

pub mod binary;
pub mod boost;
pub mod config;
pub mod forest;
pub mod mlp;
pub mod svm;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::FeatureMatrix;

pub use binary::{BinaryBody, BinaryFamily, BinaryModel, BinaryTrainer, PairData};
pub use boost::Stumps;
pub use config::{BinaryMlpConfig, BoostConfig, ForestConfig, MlpConfig, SvmConfig, TrainConfig};
pub use forest::Forest;
pub use mlp::{Mlp, MlpMode};
pub use svm::Linear;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LearnError {
    #[error("degenerate training data: {0}")]
    DegenerateData(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("loss became non-finite ({loss}) at epoch {epoch}")]
    NonFiniteLoss { epoch: usize, loss: f64 },
    #[error("expected {expected} features, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("{rows} rows but {labels} labels")]
    LengthMismatch { rows: usize, labels: usize },
    #[error("training data is empty")]
    EmptyData,
}

/// Sorted distinct labels and the class index of every row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassIndex {
    pub classes: Vec<String>,
    pub y: Vec<usize>,
}

impl ClassIndex {
    pub fn new(labels: &[String]) -> Self {
        let classes: Vec<String> = labels.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
        let y = labels
            .iter()
            .map(|l| classes.binary_search(l).expect("label collected above"))
            .collect();
        ClassIndex { classes, y }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Forest,
    MlpMulti,
    MlpBinary,
    SvmBinary,
    BoostBinary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelParams {
    Forest(Forest),
    Mlp(Mlp),
    Linear(Linear),
    Stumps(Stumps),
    /// Always predicts one class.
    Constant { class: usize },
}

/// A trained classifier over a fixed class list. Binary models score the
/// second class as the positive one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub kind: ModelKind,
    pub classes: Vec<String>,
    pub n_features: usize,
    pub params: ModelParams,
}

fn check_xy(x: &FeatureMatrix, n_labels: usize) -> Result<(), LearnError> {
    if x.rows() != n_labels {
        return Err(LearnError::LengthMismatch { rows: x.rows(), labels: n_labels });
    }
    if x.rows() == 0 {
        return Err(LearnError::EmptyData);
    }
    Ok(())
}

fn constant(kind: ModelKind, classes: Vec<String>, n_features: usize) -> Model {
    log::warn!("only one class ({}) in the training data; using a constant model", classes[0]);
    Model { kind, classes, n_features, params: ModelParams::Constant { class: 0 } }
}

pub fn train_forest(x: &FeatureMatrix, y: &[String], cfg: &ForestConfig, seed: u64) -> Result<Model, LearnError> {
    check_xy(x, y.len())?;
    cfg.validate()?;
    let ci = ClassIndex::new(y);
    if ci.classes.len() < 2 {
        return Ok(constant(ModelKind::Forest, ci.classes, x.cols()));
    }
    let forest = forest::train(x, &ci.y, ci.classes.len(), cfg, seed);
    Ok(Model { kind: ModelKind::Forest, classes: ci.classes, n_features: x.cols(), params: ModelParams::Forest(forest) })
}

pub fn train_mlp(x: &FeatureMatrix, y: &[String], cfg: &MlpConfig, seed: u64, mode: MlpMode) -> Result<Model, LearnError> {
    check_xy(x, y.len())?;
    cfg.validate()?;
    let ci = ClassIndex::new(y);
    let kind = match mode {
        MlpMode::Multiclass => ModelKind::MlpMulti,
        MlpMode::Binary => ModelKind::MlpBinary,
    };
    if ci.classes.len() < 2 {
        return Ok(constant(kind, ci.classes, x.cols()));
    }
    if mode == MlpMode::Binary && ci.classes.len() != 2 {
        return Err(LearnError::DegenerateData(format!("binary mode needs 2 classes, found {}", ci.classes.len())));
    }
    let net = mlp::train(&x.to_sparse(), &ci.y, ci.classes.len(), None, cfg, seed, mode)?;
    Ok(Model { kind, classes: ci.classes, n_features: x.cols(), params: ModelParams::Mlp(net) })
}

fn binary_targets(y: &[i8]) -> Result<Vec<u8>, LearnError> {
    let pos = y.iter().filter(|&&v| v == 1).count();
    if y.iter().any(|&v| v != 1 && v != -1) {
        return Err(LearnError::DegenerateData("binary labels must be -1 or +1".into()));
    }
    if pos == 0 || pos == y.len() {
        return Err(LearnError::DegenerateData("both classes must be present".into()));
    }
    Ok(y.iter().map(|&v| u8::from(v == 1)).collect())
}

fn binary_classes() -> Vec<String> {
    vec!["-1".to_string(), "+1".to_string()]
}

/// Labels are -1/+1; the model's classes are `["-1", "+1"]`.
pub fn train_svm_binary(x: &FeatureMatrix, y: &[i8], cfg: &SvmConfig, seed: u64) -> Result<Model, LearnError> {
    check_xy(x, y.len())?;
    cfg.validate()?;
    let t = binary_targets(y)?;
    let lin = svm::train(&x.to_sparse(), &t, cfg, seed);
    Ok(Model { kind: ModelKind::SvmBinary, classes: binary_classes(), n_features: x.cols(), params: ModelParams::Linear(lin) })
}

/// Labels are -1/+1; the model's classes are `["-1", "+1"]`.
pub fn train_boost_binary(x: &FeatureMatrix, y: &[i8], cfg: &BoostConfig, seed: u64) -> Result<Model, LearnError> {
    let _ = seed;
    check_xy(x, y.len())?;
    cfg.validate()?;
    let t = binary_targets(y)?;
    let stumps = boost::train(&x.to_sparse(), &t, None, cfg);
    Ok(Model { kind: ModelKind::BoostBinary, classes: binary_classes(), n_features: x.cols(), params: ModelParams::Stumps(stumps) })
}

impl Model {
    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    /// Per-class scores for one dense input.
    pub fn predict_scores(&self, x: &[f64]) -> Result<Vec<f64>, LearnError> {
        if x.len() != self.n_features {
            return Err(LearnError::DimensionMismatch { expected: self.n_features, found: x.len() });
        }
        Ok(match &self.params {
            ModelParams::Constant { class } => {
                let mut s = vec![0.0; self.classes.len()];
                s[*class] = 1.0;
                s
            }
            ModelParams::Forest(f) => f.vote_fractions(x),
            ModelParams::Mlp(m) => m.predict_dense(x),
            ModelParams::Linear(l) => {
                let p = l.probability_dense(x);
                vec![1.0 - p, p]
            }
            ModelParams::Stumps(s) => {
                let p = s.probability(|f| x[f]);
                vec![1.0 - p, p]
            }
        })
    }

    /// Index of the highest score; ties go to the lowest index.
    pub fn predict_index(&self, x: &[f64]) -> Result<(usize, f64), LearnError> {
        Ok(argmax(&self.predict_scores(x)?))
    }

    pub fn predict_label(&self, x: &[f64]) -> Result<&str, LearnError> {
        self.predict_index(x).map(|(i, _)| self.classes[i].as_str())
    }
}

/// First maximum and its value.
pub fn argmax(scores: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, &s) in scores.iter().enumerate() {
        if s > best.1 {
            best = (i, s);
        }
    }
    best
}

/// Classifier choices exposed by the CLI and the experiment grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ClassifierKind {
    #[serde(rename = "forest")]
    Forest,
    #[serde(rename = "mlp")]
    Mlp,
    #[serde(rename = "svm-ovo")]
    SvmOvo,
    #[serde(rename = "boost-ovo")]
    BoostOvo,
    #[serde(rename = "mlp-binary-ovo")]
    MlpBinaryOvo,
    #[serde(rename = "ensemble")]
    Ensemble,
}

impl ClassifierKind {
    /// The five trainable families, in report row order.
    pub const FAMILIES: [ClassifierKind; 5] = [
        ClassifierKind::Forest,
        ClassifierKind::Mlp,
        ClassifierKind::SvmOvo,
        ClassifierKind::BoostOvo,
        ClassifierKind::MlpBinaryOvo,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ClassifierKind::Forest => "forest",
            ClassifierKind::Mlp => "mlp",
            ClassifierKind::SvmOvo => "svm-ovo",
            ClassifierKind::BoostOvo => "boost-ovo",
            ClassifierKind::MlpBinaryOvo => "mlp-binary-ovo",
            ClassifierKind::Ensemble => "ensemble",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            ClassifierKind::Forest => "Multi-class decision forest",
            ClassifierKind::Mlp => "Multi-class neural network",
            ClassifierKind::SvmOvo => "SVM (Binary)",
            ClassifierKind::BoostOvo => "Boosted stumps (Binary)",
            ClassifierKind::MlpBinaryOvo => "Neural network (Binary)",
            ClassifierKind::Ensemble => "Ensemble",
        }
    }

    pub fn binary_family(self) -> Option<BinaryFamily> {
        match self {
            ClassifierKind::SvmOvo => Some(BinaryFamily::Svm),
            ClassifierKind::BoostOvo => Some(BinaryFamily::Boost),
            ClassifierKind::MlpBinaryOvo => Some(BinaryFamily::Mlp),
            _ => None,
        }
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ClassifierKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        FAMILIES_AND_ENSEMBLE
            .into_iter()
            .find(|k| k.as_str() == s.trim())
            .ok_or_else(|| format!("unknown classifier {s:?} (expected forest, mlp, svm-ovo, boost-ovo, mlp-binary-ovo or ensemble)"))
    }
}

const FAMILIES_AND_ENSEMBLE: [ClassifierKind; 6] = [
    ClassifierKind::Forest,
    ClassifierKind::Mlp,
    ClassifierKind::SvmOvo,
    ClassifierKind::BoostOvo,
    ClassifierKind::MlpBinaryOvo,
    ClassifierKind::Ensemble,
];

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn labels(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn class_index_sorts() {
        let ci = ClassIndex::new(&labels(&["b", "a", "b", "c"]));
        assert_eq!(ci.classes, labels(&["a", "b", "c"]));
        assert_eq!(ci.y, vec![1, 0, 1, 2]);
    }

    #[test]
    fn single_class_gives_constant_model() {
        let x = FeatureMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        let m = train_forest(&x, &labels(&["a", "a"]), &ForestConfig::default(), 1).unwrap();
        assert_eq!(m.params, ModelParams::Constant { class: 0 });
        assert_eq!(m.predict_scores(&[5.0, 5.0]).unwrap(), vec![1.0]);
        assert_eq!(m.predict_label(&[0.0, 0.0]).unwrap(), "a");
    }

    #[test]
    fn dimension_mismatch() {
        let x = FeatureMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        let m = train_forest(&x, &labels(&["a", "b"]), &ForestConfig::default(), 1).unwrap();
        assert_eq!(m.predict_scores(&[1.0]), Err(LearnError::DimensionMismatch { expected: 2, found: 1 }));
    }

    #[test]
    fn binary_scores_are_normalized() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let rows: Vec<Vec<f64>> = (0..40).map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let y: Vec<i8> = rows.iter().map(|r| if r[0] + 0.3 * r[1] > 0.0 { 1 } else { -1 }).collect();
        let ylab: Vec<String> = y.iter().map(|v| v.to_string()).collect();
        let x = FeatureMatrix::from_rows(&rows);
        let mut small = MlpConfig::default();
        small.hidden = 4;
        small.epochs = 20;
        let models = vec![
            train_svm_binary(&x, &y, &SvmConfig::default(), 1).unwrap(),
            train_boost_binary(&x, &y, &BoostConfig { rounds: 10 }, 1).unwrap(),
            train_mlp(&x, &ylab, &small, 1, MlpMode::Binary).unwrap(),
        ];
        for m in &models {
            for _ in 0..1000 {
                let q: Vec<f64> = (0..3).map(|_| rng.gen_range(-3.0..3.0)).collect();
                let s = m.predict_scores(&q).unwrap();
                assert_eq!(s.len(), 2);
                assert!(s.iter().all(|v| (0.0..=1.0).contains(v)));
                assert!((s[0] + s[1] - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn binary_label_checks() {
        let x = FeatureMatrix::from_rows(&[vec![0.0], vec![1.0]]);
        assert!(matches!(train_svm_binary(&x, &[1, 1], &SvmConfig::default(), 0), Err(LearnError::DegenerateData(_))));
        assert!(matches!(train_boost_binary(&x, &[1, -1], &BoostConfig { rounds: 0 }, 0), Err(LearnError::InvalidConfig(_))));
        assert!(matches!(train_svm_binary(&x, &[1], &SvmConfig::default(), 0), Err(LearnError::LengthMismatch { .. })));
    }

    #[test]
    fn classifier_names_round_trip() {
        for k in FAMILIES_AND_ENSEMBLE {
            assert_eq!(k.as_str().parse::<ClassifierKind>().unwrap(), k);
            assert_eq!(serde_json::to_string(&k).unwrap(), format!("\"{}\"", k.as_str()));
        }
        assert!("ldsvm".parse::<ClassifierKind>().is_err());
    }
}
