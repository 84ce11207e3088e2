use serde::{Deserialize, Serialize};

use super::LearnError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Fraction of features tried per node; `None` means `sqrt(d)`.
    pub feature_subsample: Option<f64>,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig { n_trees: 100, max_depth: 32, min_leaf: 1, feature_subsample: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlpConfig {
    pub hidden: usize,
    /// Zero is allowed and yields a prior-only model.
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
    pub batch: usize,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig { hidden: 100, epochs: 300, learning_rate: 0.05, l2: 1e-4, batch: 32 }
    }
}

/// Same fields as `MlpConfig` with defaults sized for the per-pair networks
/// of one-vs-one, which see a few dozen rows each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BinaryMlpConfig {
    pub hidden: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
    pub batch: usize,
}

impl Default for BinaryMlpConfig {
    fn default() -> Self {
        BinaryMlpConfig { hidden: 8, epochs: 100, learning_rate: 0.5, l2: 1e-4, batch: 32 }
    }
}

impl BinaryMlpConfig {
    pub fn as_mlp(&self) -> MlpConfig {
        MlpConfig {
            hidden: self.hidden,
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            l2: self.l2,
            batch: self.batch,
        }
    }

    pub fn validate(&self) -> Result<(), LearnError> {
        self.as_mlp().validate().map_err(|e| match e {
            LearnError::InvalidConfig(m) => LearnError::InvalidConfig(m.replace("mlp.", "binary_mlp.")),
            other => other,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvmConfig {
    pub c: f64,
    pub epochs: usize,
    pub learning_rate: f64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig { c: 1.0, epochs: 200, learning_rate: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoostConfig {
    pub rounds: usize,
}

impl Default for BoostConfig {
    fn default() -> Self {
        BoostConfig { rounds: 200 }
    }
}

/// Hyperparameters for every family. Any section or field may be omitted
/// from JSON and falls back to its default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub forest: ForestConfig,
    /// Multi-class network.
    pub mlp: MlpConfig,
    /// Per-pair networks of the binary one-vs-one family.
    pub binary_mlp: BinaryMlpConfig,
    pub svm: SvmConfig,
    pub boost: BoostConfig,
    pub seed: u64,
}

fn positive(name: &str, v: f64) -> Result<(), LearnError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(LearnError::InvalidConfig(format!("{name} must be a positive finite number, got {v}")))
    }
}

fn at_least_one(name: &str, v: usize) -> Result<(), LearnError> {
    if v >= 1 {
        Ok(())
    } else {
        Err(LearnError::InvalidConfig(format!("{name} must be at least 1")))
    }
}

impl ForestConfig {
    pub fn validate(&self) -> Result<(), LearnError> {
        at_least_one("forest.n_trees", self.n_trees)?;
        at_least_one("forest.max_depth", self.max_depth)?;
        at_least_one("forest.min_leaf", self.min_leaf)?;
        if let Some(f) = self.feature_subsample {
            if !(f > 0.0 && f <= 1.0) {
                return Err(LearnError::InvalidConfig(format!("forest.feature_subsample must be in (0, 1], got {f}")));
            }
        }
        Ok(())
    }
}

impl MlpConfig {
    pub fn validate(&self) -> Result<(), LearnError> {
        at_least_one("mlp.hidden", self.hidden)?;
        at_least_one("mlp.batch", self.batch)?;
        positive("mlp.learning_rate", self.learning_rate)?;
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return Err(LearnError::InvalidConfig(format!("mlp.l2 must be non-negative, got {}", self.l2)));
        }
        Ok(())
    }
}

impl SvmConfig {
    pub fn validate(&self) -> Result<(), LearnError> {
        positive("svm.c", self.c)?;
        positive("svm.learning_rate", self.learning_rate)?;
        at_least_one("svm.epochs", self.epochs)
    }
}

impl BoostConfig {
    pub fn validate(&self) -> Result<(), LearnError> {
        at_least_one("boost.rounds", self.rounds)
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            forest: ForestConfig::default(),
            mlp: MlpConfig::default(),
            binary_mlp: BinaryMlpConfig::default(),
            svm: SvmConfig::default(),
            boost: BoostConfig::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), LearnError> {
        self.forest.validate()?;
        self.mlp.validate()?;
        self.binary_mlp.validate()?;
        self.svm.validate()?;
        self.boost.validate()
    }
}
