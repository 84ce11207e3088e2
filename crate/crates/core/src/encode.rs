//! Numeric encodings of instances and sequences.
//!
//! Instance vectors concatenate one-hot blocks in the fixed order coarse
//! grasp, fine grasp, opposition, object, grasped dimension, constraint,
//! keeping only the attributes in the chosen subset. Sequence vectors are
//! fine-grasp histograms followed by the object.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{GraspCoarse, GraspedDimension, Instance, OppositionType, Taxonomy, N_FINE_GRASPS};
use crate::matrix::{FeatureMatrix, LabeledMatrix};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EncodeError {
    #[error("cannot build a vocabulary from an empty dataset")]
    EmptyDataset,
    #[error("{attribute} value {value:?} is not in the vocabulary")]
    OutOfVocabulary { attribute: Attribute, value: String },
    #[error("sequence {sequence_id} mixes action labels {first:?} and {second:?}")]
    MixedLabels { sequence_id: String, first: String, second: String },
    #[error("bad attribute subset: {0}")]
    BadSubset(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Attribute {
    GraspCoarse,
    GraspFine,
    Opposition,
    Object,
    Dimension,
    Constraint,
}

impl Attribute {
    /// Concatenation order of the one-hot blocks.
    pub const ORDER: [Attribute; 6] = [
        Attribute::GraspCoarse,
        Attribute::GraspFine,
        Attribute::Opposition,
        Attribute::Object,
        Attribute::Dimension,
        Attribute::Constraint,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Attribute::GraspCoarse => "grasp_coarse",
            Attribute::GraspFine => "grasp_fine",
            Attribute::Opposition => "opposition",
            Attribute::Object => "object",
            Attribute::Dimension => "dimension",
            Attribute::Constraint => "constraint",
        }
    }

    fn is_closed(self) -> bool {
        matches!(self, Attribute::GraspCoarse | Attribute::GraspFine | Attribute::Opposition)
    }
}

impl fmt::Display for Attribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Attribute {
    type Err = EncodeError;
    fn from_str(s: &str) -> Result<Self, EncodeError> {
        let s = s.trim();
        Attribute::ORDER
            .into_iter()
            .find(|a| a.as_str() == s)
            .or(match s {
                "grasped_dim" | "grasped_dimension" => Some(Attribute::Dimension),
                _ => None,
            })
            .ok_or_else(|| EncodeError::BadSubset(format!("unknown attribute {s:?}")))
    }
}

/// Attributes kept in an instance encoding. Always contains the object and
/// at least one other attribute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AttributeSubset {
    flags: [bool; 6],
}

impl AttributeSubset {
    pub fn new(attributes: &[Attribute]) -> Result<Self, EncodeError> {
        let mut flags = [false; 6];
        for a in attributes {
            flags[Attribute::ORDER.iter().position(|o| o == a).expect("listed")] = true;
        }
        let subset = AttributeSubset { flags };
        if !subset.contains(Attribute::Object) {
            return Err(EncodeError::BadSubset("the object attribute is always required".into()));
        }
        if subset.iter().count() < 2 {
            return Err(EncodeError::BadSubset("need at least one attribute besides the object".into()));
        }
        Ok(subset)
    }

    pub fn all() -> Self {
        AttributeSubset { flags: [true; 6] }
    }

    pub fn contains(&self, a: Attribute) -> bool {
        self.flags[Attribute::ORDER.iter().position(|o| *o == a).expect("listed")]
    }

    /// Included attributes in concatenation order.
    pub fn iter(&self) -> impl Iterator<Item = Attribute> + '_ {
        Attribute::ORDER.into_iter().filter(|a| self.contains(*a))
    }
}

impl fmt::Display for AttributeSubset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<_> = self.iter().map(Attribute::as_str).collect();
        f.write_str(&names.join(","))
    }
}

impl FromStr for AttributeSubset {
    type Err = EncodeError;
    fn from_str(s: &str) -> Result<Self, EncodeError> {
        let attrs = s
            .split(',')
            .filter(|t| !t.trim().is_empty())
            .map(str::parse)
            .collect::<Result<Vec<Attribute>, _>>()?;
        AttributeSubset::new(&attrs)
    }
}

impl Serialize for AttributeSubset {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(self.iter())
    }
}

impl<'de> Deserialize<'de> for AttributeSubset {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let attrs = Vec::<Attribute>::deserialize(d)?;
        AttributeSubset::new(&attrs).map_err(serde::de::Error::custom)
    }
}

/// Ordered distinct values of one categorical attribute.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CategoryIndex {
    values: Vec<String>,
    positions: HashMap<String, usize>,
}

impl CategoryIndex {
    /// Sorts and deduplicates.
    pub fn from_values<I: IntoIterator<Item = String>>(values: I) -> Self {
        let values: Vec<String> = values.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
        let positions = values.iter().enumerate().map(|(i, v)| (v.clone(), i)).collect();
        CategoryIndex { values, positions }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn position(&self, value: &str) -> Option<usize> {
        self.positions.get(value).copied()
    }

    pub fn values(&self) -> &[String] {
        &self.values
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VocabBlock {
    pub attribute: Attribute,
    pub index: CategoryIndex,
    pub offset: usize,
}

/// Column layout of an instance encoding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    subset: AttributeSubset,
    blocks: Vec<VocabBlock>,
    total_dim: usize,
}

impl Vocabulary {
    pub fn subset(&self) -> AttributeSubset {
        self.subset
    }

    pub fn blocks(&self) -> &[VocabBlock] {
        &self.blocks
    }

    pub fn block(&self, a: Attribute) -> Option<&VocabBlock> {
        self.blocks.iter().find(|b| b.attribute == a)
    }

    pub fn total_dim(&self) -> usize {
        self.total_dim
    }

    /// `attribute=value` for every column, in order.
    pub fn column_names(&self) -> Vec<String> {
        self.blocks
            .iter()
            .flat_map(|b| b.index.values().iter().map(move |v| format!("{}={v}", b.attribute)))
            .collect()
    }
}

fn attribute_value(inst: &Instance, a: Attribute, taxonomy: &Taxonomy) -> String {
    match a {
        Attribute::GraspCoarse => inst.coarse.to_string(),
        Attribute::GraspFine => taxonomy.name(inst.grasp).to_string(),
        Attribute::Opposition => inst.opposition.to_string(),
        Attribute::Object => inst.object.clone(),
        Attribute::Dimension => inst.dimension.to_string(),
        Attribute::Constraint => inst.constraint.to_string(),
    }
}

/// Closed attributes get their full alphabet; the object, grasped dimension
/// and constraint blocks list the values observed in `instances`.
pub fn build_vocab(instances: &[Instance], subset: AttributeSubset, taxonomy: &Taxonomy) -> Result<Vocabulary, EncodeError> {
    if instances.is_empty() {
        return Err(EncodeError::EmptyDataset);
    }
    let mut blocks = Vec::new();
    let mut offset = 0;
    for attribute in subset.iter() {
        let index = if attribute.is_closed() {
            CategoryIndex::from_values(match attribute {
                Attribute::GraspCoarse => GraspCoarse::ALL.iter().map(|c| c.to_string()).collect::<Vec<_>>(),
                Attribute::GraspFine => taxonomy.entries().iter().map(|e| e.name.clone()).collect(),
                _ => OppositionType::ALL.iter().map(|o| o.to_string()).collect(),
            })
        } else {
            CategoryIndex::from_values(instances.iter().map(|i| attribute_value(i, attribute, taxonomy)))
        };
        let width = index.len();
        blocks.push(VocabBlock { attribute, index, offset });
        offset += width;
    }
    Ok(Vocabulary { subset, blocks, total_dim: offset })
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureVector {
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

fn write_instance(inst: &Instance, vocab: &Vocabulary, taxonomy: &Taxonomy, out: &mut [f64]) -> Result<(), EncodeError> {
    for block in &vocab.blocks {
        let value = attribute_value(inst, block.attribute, taxonomy);
        let pos = block
            .index
            .position(&value)
            .ok_or(EncodeError::OutOfVocabulary { attribute: block.attribute, value })?;
        out[block.offset + pos] = 1.0;
    }
    Ok(())
}

pub fn encode_instance(inst: &Instance, vocab: &Vocabulary, taxonomy: &Taxonomy) -> Result<FeatureVector, EncodeError> {
    let mut values = vec![0.0; vocab.total_dim];
    write_instance(inst, vocab, taxonomy, &mut values)?;
    Ok(FeatureVector { values })
}

/// What an instance row is labeled with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    #[default]
    Action,
    Force,
    Constraint,
}

impl FromStr for Target {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "action" => Ok(Target::Action),
            "force" => Ok(Target::Force),
            "constraint" => Ok(Target::Constraint),
            other => Err(format!("unknown target {other:?} (expected action, force or constraint)")),
        }
    }
}

pub fn target_label(inst: &Instance, target: Target) -> String {
    match target {
        Target::Action => inst.action_label(),
        Target::Force => inst.force.to_string(),
        Target::Constraint => inst.constraint.to_string(),
    }
}

pub fn encode_instances(
    instances: &[Instance],
    vocab: &Vocabulary,
    taxonomy: &Taxonomy,
    target: Target,
) -> Result<LabeledMatrix, EncodeError> {
    let mut features = FeatureMatrix::zeros(instances.len(), vocab.total_dim);
    for (r, inst) in instances.iter().enumerate() {
        write_instance(inst, vocab, taxonomy, features.row_mut(r))?;
    }
    let labels = instances.iter().map(|i| target_label(i, target)).collect();
    Ok(LabeledMatrix::new(features, labels))
}

/// Instances sharing a sequence id, in input order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sequence {
    pub sequence_id: String,
    pub instances: Vec<Instance>,
    pub action_label: String,
    pub object: String,
}

impl Sequence {
    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }
}

/// Groups by sequence id in order of first appearance, keeping every group.
pub fn group_all_sequences(instances: &[Instance]) -> Result<Vec<Sequence>, EncodeError> {
    let mut order: Vec<Sequence> = Vec::new();
    let mut slot: HashMap<&str, usize> = HashMap::new();
    for inst in instances {
        let label = inst.action_label();
        match slot.get(inst.sequence_id.as_str()) {
            Some(&k) => {
                let seq = &mut order[k];
                if seq.action_label != label {
                    return Err(EncodeError::MixedLabels {
                        sequence_id: inst.sequence_id.clone(),
                        first: seq.action_label.clone(),
                        second: label,
                    });
                }
                seq.instances.push(inst.clone());
            }
            None => {
                slot.insert(&inst.sequence_id, order.len());
                order.push(Sequence {
                    sequence_id: inst.sequence_id.clone(),
                    instances: vec![inst.clone()],
                    action_label: label,
                    object: inst.object.clone(),
                });
            }
        }
    }
    Ok(order)
}

/// Sequences of at least two instances.
pub fn group_sequences(instances: &[Instance]) -> Result<Vec<Sequence>, EncodeError> {
    let mut seqs = group_all_sequences(instances)?;
    seqs.retain(|s| s.len() >= 2);
    Ok(seqs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SequenceVariant {
    /// 33 grasp counts plus the object's ordinal index: 34 columns.
    #[default]
    Literal34,
    /// 33 grasp counts plus a one-hot object block.
    OnehotObject,
}

impl FromStr for SequenceVariant {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "literal34" => Ok(SequenceVariant::Literal34),
            "onehot-object" | "onehot_object" => Ok(SequenceVariant::OnehotObject),
            other => Err(format!("unknown sequence variant {other:?}")),
        }
    }
}

impl SequenceVariant {
    pub fn dim(self, n_objects: usize) -> usize {
        match self {
            SequenceVariant::Literal34 => N_FINE_GRASPS + 1,
            SequenceVariant::OnehotObject => N_FINE_GRASPS + n_objects,
        }
    }
}

pub fn object_vocab(instances: &[Instance]) -> CategoryIndex {
    CategoryIndex::from_values(instances.iter().map(|i| i.object.clone()))
}

fn write_sequence(seq: &Sequence, objects: &CategoryIndex, variant: SequenceVariant, out: &mut [f64]) -> Result<(), EncodeError> {
    let obj = objects.position(&seq.object).ok_or_else(|| EncodeError::OutOfVocabulary {
        attribute: Attribute::Object,
        value: seq.object.clone(),
    })?;
    for inst in &seq.instances {
        out[inst.grasp.index()] += 1.0;
    }
    match variant {
        SequenceVariant::Literal34 => out[N_FINE_GRASPS] = obj as f64,
        SequenceVariant::OnehotObject => out[N_FINE_GRASPS + obj] = 1.0,
    }
    Ok(())
}

/// Bag-of-grasps vector of one sequence; grasp columns follow the
/// taxonomy's name order.
pub fn encode_sequence(
    seq: &Sequence,
    objects: &CategoryIndex,
    variant: SequenceVariant,
) -> Result<FeatureVector, EncodeError> {
    let mut values = vec![0.0; variant.dim(objects.len())];
    write_sequence(seq, objects, variant, &mut values)?;
    Ok(FeatureVector { values })
}

pub fn encode_sequences(
    seqs: &[Sequence],
    objects: &CategoryIndex,
    variant: SequenceVariant,
) -> Result<LabeledMatrix, EncodeError> {
    let mut features = FeatureMatrix::zeros(seqs.len(), variant.dim(objects.len()));
    for (r, s) in seqs.iter().enumerate() {
        write_sequence(s, objects, variant, features.row_mut(r))?;
    }
    Ok(LabeledMatrix::new(features, seqs.iter().map(|s| s.action_label.clone()).collect()))
}

/// All dimension values observed, for callers that need the alphabet.
pub fn observed_dimensions(instances: &[Instance]) -> BTreeSet<GraspedDimension> {
    instances.iter().map(|i| i.dimension).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{validate_instance, RawRecord};

    fn inst(object: &str, task: &str, grasp: &str, dim: &str, cons: &str, seq: &str) -> Instance {
        let raw = RawRecord {
            subject: "s".into(),
            sequence_id: seq.into(),
            object: object.into(),
            task: task.into(),
            grasp: grasp.into(),
            grasped_dim: dim.into(),
            constraint: cons.into(),
            force: "weight".into(),
            ..Default::default()
        };
        validate_instance(&raw, &Taxonomy::builtin()).unwrap()
    }

    fn five_objects() -> Vec<Instance> {
        ["apple", "bottle", "cup", "drill", "eraser"]
            .iter()
            .map(|o| inst(o, "use", "tripod", "a", "uuu", "q"))
            .collect()
    }

    fn subset(attrs: &[Attribute]) -> AttributeSubset {
        AttributeSubset::new(attrs).unwrap()
    }

    #[test]
    fn coarse_plus_object_dims() {
        let tax = Taxonomy::builtin();
        let v = build_vocab(&five_objects(), subset(&[Attribute::Object, Attribute::GraspCoarse]), &tax).unwrap();
        assert_eq!(v.total_dim(), 8);
    }

    #[test]
    fn fine_block_is_closed() {
        let tax = Taxonomy::builtin();
        let v = build_vocab(&five_objects(), subset(&[Attribute::Object, Attribute::GraspFine]), &tax).unwrap();
        assert_eq!(v.block(Attribute::GraspFine).unwrap().index.len(), 33);
        assert_eq!(v.total_dim(), 38);
    }

    #[test]
    fn vocab_ignores_instance_order() {
        let tax = Taxonomy::builtin();
        let mut data = five_objects();
        data.push(inst("cup", "pour", "lateral", "bc", "ttx", "r"));
        let s = AttributeSubset::all();
        let mut rev = data.clone();
        rev.reverse();
        assert_eq!(build_vocab(&data, s, &tax).unwrap(), build_vocab(&rev, s, &tax).unwrap());
        assert_eq!(build_vocab(&[], s, &tax), Err(EncodeError::EmptyDataset));
    }

    #[test]
    fn one_hot_layout_follows_block_order() {
        let tax = Taxonomy::builtin();
        let data = five_objects();
        let v = build_vocab(&data, subset(&[Attribute::Object, Attribute::GraspCoarse]), &tax).unwrap();
        // "cup" is object 2 of 5; tripod is a precision grasp (coarse index 2).
        let x = encode_instance(&data[2], &v, &tax).unwrap();
        assert_eq!(x.values, vec![0., 0., 1., 0., 0., 1., 0., 0.]);
        let power = inst("cup", "use", "medium-wrap", "a", "uuu", "q");
        let x = encode_instance(&power, &v, &tax).unwrap();
        assert_eq!(x.values, vec![0., 1., 0., 0., 0., 1., 0., 0.]);
    }

    #[test]
    fn full_subset_dimension_counts_vocabulary() {
        let tax = Taxonomy::builtin();
        let mut data = five_objects();
        data.push(inst("cup", "pour", "lateral", "bc", "ttx", "r"));
        data.push(inst("cup", "pour", "lateral", "ab", "ttx", "r"));
        // objects 5, dims {a, ab, bc} = 3, constraints {uuu, ttx} = 2
        let v = build_vocab(&data, AttributeSubset::all(), &tax).unwrap();
        assert_eq!(v.total_dim(), 3 + 33 + 3 + 5 + 3 + 2);
        for i in &data {
            let x = encode_instance(i, &v, &tax).unwrap();
            assert_eq!(x.values.iter().sum::<f64>(), 6.0);
        }
        assert_eq!(v.column_names().len(), v.total_dim());
    }

    #[test]
    fn unseen_object_is_out_of_vocabulary() {
        let tax = Taxonomy::builtin();
        let v = build_vocab(&five_objects(), subset(&[Attribute::Object, Attribute::Opposition]), &tax).unwrap();
        let err = encode_instance(&inst("zebra", "use", "tripod", "a", "uuu", "q"), &v, &tax).unwrap_err();
        assert_eq!(err, EncodeError::OutOfVocabulary { attribute: Attribute::Object, value: "zebra".into() });
    }

    #[test]
    fn subset_rules() {
        assert!(AttributeSubset::new(&[Attribute::GraspFine]).is_err());
        assert!(AttributeSubset::new(&[Attribute::Object]).is_err());
        let s: AttributeSubset = "grasp_fine,object,constraint".parse().unwrap();
        assert_eq!(s.to_string(), "grasp_fine,object,constraint");
        assert!("object,wings".parse::<AttributeSubset>().is_err());
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(serde_json::from_str::<AttributeSubset>(&json).unwrap(), s);
    }

    #[test]
    fn grouping_drops_singletons_and_detects_mixed_labels() {
        let a = inst("bottle", "drinking", "tripod", "a", "uuu", "s1");
        let b = inst("bottle", "drinking", "lateral", "a", "uuu", "s1");
        let c = inst("bottle", "drinking", "lateral", "a", "uuu", "s2");
        let seqs = group_sequences(&[a.clone(), b, c]).unwrap();
        assert_eq!(seqs.len(), 1);
        assert_eq!((seqs[0].sequence_id.as_str(), seqs[0].len()), ("s1", 2));
        assert!(group_sequences(&[]).unwrap().is_empty());

        let mixed = inst("bottle", "opening", "tripod", "a", "uuu", "s1");
        assert!(matches!(group_sequences(&[a, mixed]), Err(EncodeError::MixedLabels { .. })));
    }

    #[test]
    fn sequence_histogram() {
        let tax = Taxonomy::builtin();
        let seq_insts = vec![
            inst("bottle", "drinking", "medium-wrap", "a", "uuu", "s1"),
            inst("bottle", "drinking", "lateral", "a", "uuu", "s1"),
            inst("bottle", "drinking", "medium-wrap", "a", "uuu", "s1"),
        ];
        let objects = CategoryIndex::from_values(["apple".to_string(), "bottle".to_string()]);
        let seq = group_sequences(&seq_insts).unwrap().remove(0);
        let x = encode_sequence(&seq, &objects, SequenceVariant::Literal34).unwrap();
        assert_eq!(x.dim(), 34);
        assert_eq!(x.values[..33].iter().sum::<f64>(), 3.0);
        assert_eq!(x.values[..33].iter().filter(|&&v| v > 0.0).count(), 2);
        assert_eq!(x.values[tax.lookup("medium-wrap").unwrap().index()], 2.0);
        assert_eq!(x.values[33], 1.0);

        let mut reordered = seq.clone();
        reordered.instances.reverse();
        assert_eq!(encode_sequence(&reordered, &objects, SequenceVariant::Literal34).unwrap(), x);

        let y = encode_sequence(&seq, &objects, SequenceVariant::OnehotObject).unwrap();
        assert_eq!(y.dim(), 35);
        assert_eq!(&y.values[33..], &[0.0, 1.0]);

        let none = CategoryIndex::from_values(["apple".to_string()]);
        assert!(encode_sequence(&seq, &none, SequenceVariant::Literal34).is_err());
    }

    #[test]
    fn targets() {
        let i = inst("drill", "drilling", "medium-wrap", "a", "ttx", "s");
        assert_eq!(target_label(&i, Target::Action), "drill/drilling");
        assert_eq!(target_label(&i, Target::Force), "weight");
        assert_eq!(target_label(&i, Target::Constraint), "ttx");
    }
}
