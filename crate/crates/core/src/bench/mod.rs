//! Two-fold evaluation of one experiment cell, and the grid of cells that
//! makes up the results tables.

mod grid;
mod split;

pub use grid::{run_grid, CellResult, ColumnSpec, GridSpec, ResultTable, RowResult, TableResult, TableSpec};
pub use split::{accuracy, stratified_two_fold, stratified_two_fold_labels};

/// The ablation grid of the reference tables, run against the synthetic clone.
pub const STANDARD_GRID: &str = include_str!("../../grids/standard.json");

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::PathBuf;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::domain::{Instance, Taxonomy};
use crate::encode::{self, AttributeSubset, Sequence, SequenceVariant, Target};
use crate::ingest::{self, SyntheticPreset};
use crate::learn::{ClassifierKind, TrainConfig};
use crate::matrix::{FeatureMatrix, LabeledMatrix};
use crate::ovo::{self, MultiClassPredictor};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("{predictions} predictions for {truths} truths")]
    LengthMismatch { predictions: usize, truths: usize },
    #[error("nothing to evaluate")]
    Empty,
    #[error("the grid has no cells")]
    EmptyGrid,
    #[error("invalid experiment: {0}")]
    InvalidSpec(String),
    #[error("{stage}: {message}")]
    Stage { stage: &'static str, message: String },
}

fn stage<E: std::fmt::Display>(stage: &'static str) -> impl FnOnce(E) -> BenchError {
    move |e| BenchError::Stage { stage, message: e.to_string() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    #[default]
    Instance,
    Sequence,
}

impl std::str::FromStr for Level {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "instance" => Ok(Level::Instance),
            "sequence" => Ok(Level::Sequence),
            other => Err(format!("unknown level {other:?} (expected instance or sequence)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceFilter {
    pub min_instances_per_sequence: usize,
    pub min_sequences_per_action: usize,
}

impl std::str::FromStr for SequenceFilter {
    type Err = String;
    /// `"<min instances per sequence>,<min sequences per action>"`.
    fn from_str(s: &str) -> Result<Self, String> {
        let bad = || format!("invalid filters {s:?} (expected two counts like 2,6)");
        let (a, b) = s.split_once(',').ok_or_else(bad)?;
        Ok(SequenceFilter {
            min_instances_per_sequence: a.trim().parse().map_err(|_| bad())?,
            min_sequences_per_action: b.trim().parse().map_err(|_| bad())?,
        })
    }
}

/// Where an experiment's instances come from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetRef {
    Csv { path: PathBuf },
    Synthetic { preset: SyntheticPreset, seed: u64 },
}

impl DatasetRef {
    pub fn load(&self, taxonomy: &Taxonomy) -> Result<Vec<Instance>, BenchError> {
        match self {
            DatasetRef::Csv { path } => ingest::load_instances(path, taxonomy)
                .map(|(inst, _)| inst)
                .map_err(|e| BenchError::Stage { stage: "ingest", message: format!("{}: {e}", path.display()) }),
            DatasetRef::Synthetic { preset, seed } => {
                ingest::generate_synthetic(&preset.spec(*seed, taxonomy), taxonomy).map_err(stage("synthesize"))
            }
        }
    }
}

/// One cell of the ablation grid. At sequence level the feature vector is
/// the grasp histogram plus object, so `subset` only matters at instance
/// level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<DatasetRef>,
    pub subset: AttributeSubset,
    #[serde(default)]
    pub level: Level,
    #[serde(default)]
    pub target: Target,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub filters: Option<SequenceFilter>,
    #[serde(default)]
    pub sequence_variant: SequenceVariant,
    pub classifier: ClassifierKind,
    #[serde(default)]
    pub config: TrainConfig,
    /// Split seed.
    pub seed: u64,
    #[serde(default)]
    pub exclude_objects: BTreeSet<String>,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<(), BenchError> {
        if self.level == Level::Sequence && self.target != Target::Action {
            return Err(BenchError::InvalidSpec("sequence level requires the action target".into()));
        }
        if self.classifier != ClassifierKind::Ensemble {
            self.config.validate().map_err(|e| BenchError::InvalidSpec(e.to_string()))?;
        }
        Ok(())
    }

    fn digest(&self) -> [u8; 32] {
        let json = serde_json::to_string(self).expect("spec serializes");
        Sha256::digest(json.as_bytes()).into()
    }

    /// Stable identifier derived from the spec's content.
    pub fn id(&self) -> String {
        self.digest()[..6].iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Training seed; identical specs always train identically.
    pub fn train_seed(&self) -> u64 {
        let d = self.digest();
        u64::from_le_bytes(d[8..16].try_into().expect("8 bytes"))
    }

    fn with_classifier(&self, classifier: ClassifierKind) -> ExperimentSpec {
        ExperimentSpec { classifier, ..self.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassAccuracy {
    pub label: String,
    pub correct: usize,
    pub total: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct FoldSummary {
    pub train_rows: usize,
    pub test_rows: usize,
    pub train_classes: usize,
    pub test_classes: usize,
    /// Test rows whose label never appears in training.
    pub unseen_test_rows: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Timing {
    pub train_secs: [f64; 2],
    pub predict_secs: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub id: String,
    pub spec: ExperimentSpec,
    /// Train on A / test on B, then the reverse.
    pub fold_accuracies: [f64; 2],
    pub avg_accuracy: f64,
    /// Accuracy over both folds' predictions together.
    pub pooled_accuracy: f64,
    pub folds: [FoldSummary; 2],
    pub per_class: Vec<ClassAccuracy>,
    /// Kept out of serialized output so results files are reproducible.
    #[serde(skip)]
    pub timing: Timing,
}

/// Prediction and confidence for each test row of each fold orientation.
pub type FoldPredictions = [Vec<(String, f64)>; 2];

/// Encoded rows with their targets, split labels and folds.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub x: FeatureMatrix,
    pub targets: Vec<String>,
    pub folds: (Vec<usize>, Vec<usize>),
}

/// Groups sequences, keeps those with at least `min_instances_per_sequence`
/// members, then keeps actions with at least `min_sequences_per_action`
/// surviving sequences.
pub fn sequence_filters(
    instances: &[Instance],
    min_instances_per_sequence: usize,
    min_sequences_per_action: usize,
) -> Result<Vec<Sequence>, encode::EncodeError> {
    let mut seqs = encode::group_all_sequences(instances)?;
    seqs.retain(|s| s.len() >= min_instances_per_sequence);
    let mut per_action: HashMap<&str, usize> = HashMap::new();
    for s in &seqs {
        *per_action.entry(s.action_label.as_str()).or_default() += 1;
    }
    let keep: BTreeSet<String> = per_action
        .into_iter()
        .filter(|(_, n)| *n >= min_sequences_per_action)
        .map(|(a, _)| a.to_string())
        .collect();
    seqs.retain(|s| keep.contains(&s.action_label));
    Ok(seqs)
}

/// Everything that decides the encoded rows of an experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoding {
    pub subset: AttributeSubset,
    pub level: Level,
    pub target: Target,
    pub filters: Option<SequenceFilter>,
    pub sequence_variant: SequenceVariant,
    pub exclude_objects: BTreeSet<String>,
}

impl ExperimentSpec {
    pub fn encoding(&self) -> Encoding {
        Encoding {
            subset: self.subset,
            level: self.level,
            target: self.target,
            filters: self.filters,
            sequence_variant: self.sequence_variant,
            exclude_objects: self.exclude_objects.clone(),
        }
    }
}

/// Encoded rows with their column names and the action label of each row,
/// which is what the split stratifies on.
#[derive(Debug, Clone)]
pub struct Encoded {
    pub matrix: LabeledMatrix,
    pub columns: Vec<String>,
    pub strata: Vec<String>,
}

/// Sequence level without explicit filters keeps multi-instance sequences.
pub const DEFAULT_SEQUENCE_FILTER: SequenceFilter =
    SequenceFilter { min_instances_per_sequence: 2, min_sequences_per_action: 1 };

/// Applies exclusions and filters, then encodes at the requested level.
pub fn encode_dataset(enc: &Encoding, instances: &[Instance], taxonomy: &Taxonomy) -> Result<Encoded, BenchError> {
    if enc.level == Level::Sequence && enc.target != Target::Action {
        return Err(BenchError::InvalidSpec("sequence level requires the action target".into()));
    }
    let kept = ingest::exclude_objects(instances, &enc.exclude_objects);
    let out = match enc.level {
        Level::Instance => {
            let used: Vec<Instance> = match enc.filters {
                None => kept,
                Some(f) => sequence_filters(&kept, f.min_instances_per_sequence, f.min_sequences_per_action)
                    .map_err(stage("group"))?
                    .into_iter()
                    .flat_map(|s| s.instances)
                    .collect(),
            };
            let vocab = encode::build_vocab(&used, enc.subset, taxonomy).map_err(stage("encode"))?;
            let matrix = encode::encode_instances(&used, &vocab, taxonomy, enc.target).map_err(stage("encode"))?;
            let strata = used.iter().map(Instance::action_label).collect();
            Encoded { matrix, columns: vocab.column_names(), strata }
        }
        Level::Sequence => {
            let f = enc.filters.unwrap_or(DEFAULT_SEQUENCE_FILTER);
            let seqs = sequence_filters(&kept, f.min_instances_per_sequence, f.min_sequences_per_action)
                .map_err(stage("group"))?;
            let members: Vec<Instance> = seqs.iter().flat_map(|s| s.instances.iter().cloned()).collect();
            let objects = encode::object_vocab(&members);
            let matrix = encode::encode_sequences(&seqs, &objects, enc.sequence_variant).map_err(stage("encode"))?;
            let mut columns: Vec<String> = taxonomy.entries().iter().map(|e| format!("count:{}", e.name)).collect();
            match enc.sequence_variant {
                SequenceVariant::Literal34 => columns.push("object".into()),
                SequenceVariant::OnehotObject => columns.extend(objects.values().iter().map(|o| format!("object:{o}"))),
            }
            let strata = matrix.labels.clone();
            Encoded { matrix, columns, strata }
        }
    };
    if out.matrix.features.rows() == 0 {
        return Err(BenchError::Stage { stage: "encode", message: "no rows left after filtering".into() });
    }
    Ok(out)
}

/// Runs every stage before training: exclusions, filters, encoding, split.
pub fn prepare(spec: &ExperimentSpec, instances: &[Instance], taxonomy: &Taxonomy) -> Result<Prepared, BenchError> {
    spec.validate()?;
    let e = encode_dataset(&spec.encoding(), instances, taxonomy)?;
    let folds = stratified_two_fold_labels(&e.strata, spec.seed);
    Ok(Prepared { x: e.matrix.features, targets: e.matrix.labels, folds })
}

/// Identical test rows are predicted once.
fn predict_unique(model: &dyn MultiClassPredictor, x: &FeatureMatrix) -> Result<Vec<(String, f64)>, BenchError> {
    let mut slot: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut unique = Vec::new();
    let mut map = Vec::with_capacity(x.rows());
    for r in 0..x.rows() {
        let key: Vec<u64> = x.row(r).iter().map(|v| v.to_bits()).collect();
        let next = unique.len();
        let s = *slot.entry(key).or_insert_with(|| {
            unique.push(r);
            next
        });
        map.push(s);
    }
    let ux = x.select_rows(&unique);
    let preds = model.predict_with_confidence(&ux).map_err(stage("predict"))?;
    let classes = model.classes();
    Ok(map.into_iter().map(|s| (classes[preds[s].0].clone(), preds[s].1)).collect())
}

fn run_fold(
    spec: &ExperimentSpec,
    data: &Prepared,
    train: &[usize],
    test: &[usize],
    fold: usize,
    timing: &mut Timing,
) -> Result<Vec<(String, f64)>, BenchError> {
    let xt = data.x.select_rows(train);
    let yt: Vec<String> = train.iter().map(|&i| data.targets[i].clone()).collect();
    let distinct: BTreeSet<&String> = yt.iter().collect();
    if distinct.is_empty() {
        return Err(BenchError::Stage { stage: "train", message: format!("fold {fold} has no training rows") });
    }
    if distinct.len() == 1 {
        // Nothing to discriminate; every family would answer the same.
        let only = yt[0].clone();
        return Ok(test.iter().map(|_| (only.clone(), 1.0)).collect());
    }
    let seed = spec.train_seed() ^ fold as u64;
    let t0 = Instant::now();
    let model = ovo::train_classifier(spec.classifier, &xt, &yt, &spec.config, seed).map_err(stage("train"))?;
    timing.train_secs[fold] = t0.elapsed().as_secs_f64();
    let t1 = Instant::now();
    let preds = predict_unique(&model, &data.x.select_rows(test))?;
    timing.predict_secs[fold] = t1.elapsed().as_secs_f64();
    Ok(preds)
}

fn summarize(
    spec: &ExperimentSpec,
    data: &Prepared,
    preds: &FoldPredictions,
    timing: Timing,
) -> Result<ExperimentResult, BenchError> {
    let (a, b) = &data.folds;
    let orientations = [(a, b), (b, a)];
    let mut fold_accuracies = [0.0; 2];
    let mut folds: [FoldSummary; 2] = Default::default();
    let mut per_class: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    let (mut hits, mut total) = (0usize, 0usize);
    for (f, (train, test)) in orientations.iter().enumerate() {
        let truths: Vec<&str> = test.iter().map(|&i| data.targets[i].as_str()).collect();
        let labels: Vec<&str> = preds[f].iter().map(|(l, _)| l.as_str()).collect();
        fold_accuracies[f] = accuracy(&labels, &truths).map_err(|e| BenchError::Stage {
            stage: "evaluate",
            message: format!("fold {f}: {e}"),
        })?;
        let train_labels: BTreeSet<&str> = train.iter().map(|&i| data.targets[i].as_str()).collect();
        let test_labels: BTreeSet<&str> = truths.iter().copied().collect();
        folds[f] = FoldSummary {
            train_rows: train.len(),
            test_rows: test.len(),
            train_classes: train_labels.len(),
            test_classes: test_labels.len(),
            unseen_test_rows: truths.iter().filter(|t| !train_labels.contains(*t)).count(),
        };
        for (p, t) in labels.iter().zip(&truths) {
            let e = per_class.entry(t.to_string()).or_default();
            e.1 += 1;
            total += 1;
            if p == t {
                e.0 += 1;
                hits += 1;
            }
        }
    }
    Ok(ExperimentResult {
        id: spec.id(),
        spec: spec.clone(),
        fold_accuracies,
        avg_accuracy: 0.5 * (fold_accuracies[0] + fold_accuracies[1]),
        pooled_accuracy: hits as f64 / total as f64,
        folds,
        per_class: per_class
            .into_iter()
            .map(|(label, (correct, total))| ClassAccuracy { label, correct, total, accuracy: correct as f64 / total as f64 })
            .collect(),
        timing,
    })
}

/// Trains a single family on both orientations.
fn run_member(spec: &ExperimentSpec, data: &Prepared) -> Result<(ExperimentResult, FoldPredictions), BenchError> {
    let (a, b) = &data.folds;
    if b.is_empty() {
        return Err(BenchError::Stage { stage: "split", message: "fold B is empty (every class is a singleton)".into() });
    }
    let mut timing = Timing::default();
    let p0 = run_fold(spec, data, a, b, 0, &mut timing)?;
    let p1 = run_fold(spec, data, b, a, 1, &mut timing)?;
    let preds = [p0, p1];
    Ok((summarize(spec, data, &preds, timing)?, preds))
}

/// Majority vote of member predictions, row by row.
pub fn combine_ensemble(members: &[&FoldPredictions]) -> FoldPredictions {
    let fold = |f: usize| -> Vec<(String, f64)> {
        let rows = members.first().map_or(0, |m| m[f].len());
        (0..rows)
            .map(|r| {
                let votes: Vec<(&str, f64)> = members.iter().map(|m| (m[f][r].0.as_str(), m[f][r].1)).collect();
                let label = ovo::ensemble_vote(&votes).unwrap_or_default();
                let conf = votes.iter().filter(|(l, _)| *l == label).map(|(_, c)| c).sum::<f64>() / votes.len() as f64;
                (label, conf)
            })
            .collect()
    };
    [fold(0), fold(1)]
}

/// Runs one cell on already-loaded instances and also returns the raw
/// predictions. The ensemble trains every family as a member.
pub fn run_experiment_detailed(
    spec: &ExperimentSpec,
    instances: &[Instance],
    taxonomy: &Taxonomy,
) -> Result<(ExperimentResult, FoldPredictions), BenchError> {
    let data = prepare(spec, instances, taxonomy)?;
    if spec.classifier != ClassifierKind::Ensemble {
        return run_member(spec, &data);
    }
    let mut members = Vec::new();
    for kind in ClassifierKind::FAMILIES {
        members.push(run_member(&spec.with_classifier(kind), &data)?.1);
    }
    let refs: Vec<&FoldPredictions> = members.iter().collect();
    let preds = combine_ensemble(&refs);
    Ok((summarize(spec, &data, &preds, Timing::default())?, preds))
}

pub fn run_experiment_on(spec: &ExperimentSpec, instances: &[Instance], taxonomy: &Taxonomy) -> Result<ExperimentResult, BenchError> {
    run_experiment_detailed(spec, instances, taxonomy).map(|(r, _)| r)
}

/// Loads the spec's dataset and runs it.
pub fn run_experiment(spec: &ExperimentSpec, taxonomy: &Taxonomy) -> Result<ExperimentResult, BenchError> {
    let dataset = spec
        .dataset
        .as_ref()
        .ok_or_else(|| BenchError::InvalidSpec("the spec names no dataset".into()))?;
    let instances = dataset.load(taxonomy)?;
    run_experiment_on(spec, &instances, taxonomy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encode::Attribute;
    use crate::ingest::generate_synthetic;

    fn small() -> (Vec<Instance>, Taxonomy) {
        let tax = Taxonomy::builtin();
        let inst = generate_synthetic(&SyntheticPreset::Small.spec(3, &tax), &tax).unwrap();
        (inst, tax)
    }

    fn spec(classifier: ClassifierKind) -> ExperimentSpec {
        let mut config = TrainConfig::default();
        config.forest.n_trees = 10;
        config.mlp.epochs = 30;
        config.mlp.hidden = 16;
        config.svm.epochs = 30;
        config.boost.rounds = 20;
        ExperimentSpec {
            dataset: None,
            subset: AttributeSubset::all(),
            level: Level::Instance,
            target: Target::Action,
            filters: None,
            sequence_variant: SequenceVariant::Literal34,
            classifier,
            config,
            seed: 5,
            exclude_objects: BTreeSet::new(),
        }
    }

    #[test]
    fn ids_and_seeds_follow_content() {
        let a = spec(ClassifierKind::Forest);
        let mut b = a.clone();
        assert_eq!(a.id(), b.id());
        b.seed = 6;
        assert_ne!(a.id(), b.id());
        assert_ne!(a.train_seed(), b.train_seed());
        assert_eq!(a.id().len(), 12);
    }

    #[test]
    fn runs_and_is_deterministic() {
        let (inst, tax) = small();
        for kind in [ClassifierKind::Forest, ClassifierKind::SvmOvo, ClassifierKind::Ensemble] {
            let s = spec(kind);
            let r1 = run_experiment_on(&s, &inst, &tax).unwrap();
            let r2 = run_experiment_on(&s, &inst, &tax).unwrap();
            assert_eq!(serde_json::to_string(&r1).unwrap(), serde_json::to_string(&r2).unwrap());
            assert!((r1.avg_accuracy - 0.5 * (r1.fold_accuracies[0] + r1.fold_accuracies[1])).abs() < 1e-15);
            assert!(r1.fold_accuracies.iter().all(|a| (0.0..=1.0).contains(a)));
            assert_eq!(r1.folds[0].test_rows + r1.folds[1].test_rows, inst.len());
        }
    }

    #[test]
    fn larger_subsets_evaluate_the_same_rows() {
        let (inst, tax) = small();
        let narrow = ExperimentSpec {
            subset: AttributeSubset::new(&[Attribute::Object, Attribute::GraspCoarse]).unwrap(),
            ..spec(ClassifierKind::Forest)
        };
        let wide = spec(ClassifierKind::Forest);
        let (a, b) = (run_experiment_on(&narrow, &inst, &tax).unwrap(), run_experiment_on(&wide, &inst, &tax).unwrap());
        assert_eq!(a.folds, b.folds);
    }

    #[test]
    fn sequence_level_and_filters() {
        let (inst, tax) = small();
        let all = sequence_filters(&inst, 1, 1).unwrap();
        assert_eq!(all.iter().map(Sequence::len).sum::<usize>(), inst.len());
        let multi = sequence_filters(&inst, 2, 2).unwrap();
        assert!(multi.iter().all(|s| s.len() >= 2));
        let mut per: HashMap<&str, usize> = HashMap::new();
        for s in &multi {
            *per.entry(&s.action_label).or_default() += 1;
        }
        assert!(per.values().all(|&n| n >= 2));

        let s = ExperimentSpec {
            level: Level::Sequence,
            filters: Some(SequenceFilter { min_instances_per_sequence: 2, min_sequences_per_action: 2 }),
            ..spec(ClassifierKind::Forest)
        };
        let r = run_experiment_on(&s, &inst, &tax).unwrap();
        assert_eq!(r.folds[0].test_rows + r.folds[1].test_rows, multi.len());
        let bad = ExperimentSpec { target: Target::Force, ..s };
        assert!(matches!(run_experiment_on(&bad, &inst, &tax), Err(BenchError::InvalidSpec(_))));
    }

    #[test]
    fn ensemble_majority_per_row() {
        let m1: FoldPredictions = [vec![("a".into(), 0.9)], vec![("b".into(), 0.2)]];
        let m2: FoldPredictions = [vec![("a".into(), 0.5)], vec![("c".into(), 0.7)]];
        let m3: FoldPredictions = [vec![("b".into(), 0.99)], vec![("b".into(), 0.4)]];
        let out = combine_ensemble(&[&m1, &m2, &m3]);
        assert_eq!(out[0][0].0, "a");
        assert_eq!(out[1][0].0, "b");
    }

    #[test]
    fn missing_dataset_is_reported() {
        let tax = Taxonomy::builtin();
        assert!(matches!(run_experiment(&spec(ClassifierKind::Forest), &tax), Err(BenchError::InvalidSpec(_))));
        let with = ExperimentSpec {
            dataset: Some(DatasetRef::Csv { path: "/nonexistent/yale.csv".into() }),
            ..spec(ClassifierKind::Forest)
        };
        let err = run_experiment(&with, &tax).unwrap_err().to_string();
        assert!(err.contains("/nonexistent/yale.csv"), "{err}");
    }
}
