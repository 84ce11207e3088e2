//! Seeded synthetic annotation datasets with a known generative table.
//!
//! Every action owns a categorical distribution over attribute tuples
//! (fine grasp, grasped dimension, constraint, force). Each instance draws
//! from its action's table, except that with probability `label_noise` the
//! whole tuple is redrawn uniformly from the grasp × dimension × constraint
//! alphabet × force space. Opposition and coarse grasp always follow the
//! taxonomy.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{
    Force, GraspFine, GraspedDimension, Instance, MotionConstraint, Taxonomy, ValidationError,
};

/// Constraint strings used by the generator when a spec does not name its own.
pub const DEFAULT_CONSTRAINT_ALPHABET: [&str; 20] = [
    "uuu", "xxx", "txx", "xtx", "xxt", "ttx", "txt", "xtt", "ttt", "rxx",
    "xrx", "xxr", "rrx", "rxr", "xrr", "rrr", "trx", "xtr", "rtx", "uxx",
];

#[derive(Debug, Error)]
pub enum SyntheticError {
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
    #[error("invalid synthetic spec, action {action}: {source}")]
    InvalidOutcome {
        action: usize,
        #[source]
        source: ValidationError,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub grasp: String,
    pub grasped_dim: String,
    pub constraint: String,
    pub force: String,
    pub prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionProfile {
    pub object: String,
    pub task: String,
    pub outcomes: Vec<Outcome>,
}

impl ActionProfile {
    pub fn label(&self) -> String {
        format!("{}/{}", self.object, self.task)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub actions: Vec<ActionProfile>,
    /// Inclusive range of instances drawn per action.
    pub instances_per_action: (usize, usize),
    /// When set, per-action counts are adjusted inside the range to hit this total.
    #[serde(default)]
    pub total_instances: Option<usize>,
    /// Inclusive range of instances per sequence.
    pub sequence_length: (usize, usize),
    pub label_noise: f64,
    #[serde(default = "default_alphabet")]
    pub constraint_alphabet: Vec<String>,
    pub seed: u64,
}

fn default_alphabet() -> Vec<String> {
    DEFAULT_CONSTRAINT_ALPHABET.iter().map(|s| s.to_string()).collect()
}

#[derive(Debug, Clone, Copy)]
struct Tuple {
    grasp: GraspFine,
    dimension: GraspedDimension,
    constraint: MotionConstraint,
    force: Force,
}

struct Resolved {
    tables: Vec<Vec<(Tuple, f64)>>,
    alphabet: Vec<MotionConstraint>,
}

impl SyntheticSpec {
    pub fn n_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn n_objects(&self) -> usize {
        self.actions.iter().map(|a| a.object.as_str()).collect::<HashSet<_>>().len()
    }

    fn resolve(&self, taxonomy: &Taxonomy) -> Result<Resolved, SyntheticError> {
        let invalid = |m: String| Err(SyntheticError::InvalidSpec(m));
        if self.actions.is_empty() {
            return invalid("no actions".into());
        }
        if !(0.0..=1.0).contains(&self.label_noise) {
            return invalid(format!("label_noise {} outside [0, 1]", self.label_noise));
        }
        let (lo, hi) = self.instances_per_action;
        if lo == 0 || lo > hi {
            return invalid(format!("instances_per_action range ({lo}, {hi}) is empty or starts at 0"));
        }
        if let Some(total) = self.total_instances {
            let n = self.actions.len();
            if total < n * lo || total > n * hi {
                return invalid(format!("total_instances {total} unreachable with {n} actions in [{lo}, {hi}]"));
            }
        }
        let (slo, shi) = self.sequence_length;
        if slo == 0 || slo > shi {
            return invalid(format!("sequence_length range ({slo}, {shi}) is empty or starts at 0"));
        }
        let alphabet = self
            .constraint_alphabet
            .iter()
            .map(|c| c.parse::<MotionConstraint>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|source| SyntheticError::InvalidOutcome { action: 0, source })?;
        if alphabet.is_empty() {
            return invalid("empty constraint alphabet".into());
        }
        let mut labels = HashSet::new();
        let mut tables = Vec::with_capacity(self.actions.len());
        for (a, action) in self.actions.iter().enumerate() {
            if action.object.is_empty() || action.task.is_empty() || action.object.contains('/') {
                return invalid(format!("action {a} needs a non-empty object without '/' and a task"));
            }
            if !labels.insert(action.label()) {
                return invalid(format!("action label {} listed twice", action.label()));
            }
            if action.outcomes.is_empty() {
                return invalid(format!("action {a} has no outcomes"));
            }
            let total: f64 = action.outcomes.iter().map(|o| o.prob).sum();
            if (total - 1.0).abs() > 1e-9 || action.outcomes.iter().any(|o| !(o.prob >= 0.0)) {
                return invalid(format!("action {a} outcome probabilities sum to {total}"));
            }
            let wrap = |source| SyntheticError::InvalidOutcome { action: a, source };
            let mut table = Vec::with_capacity(action.outcomes.len());
            for o in &action.outcomes {
                let grasp = taxonomy
                    .lookup(&o.grasp)
                    .ok_or_else(|| wrap(ValidationError::UnknownGrasp(o.grasp.clone())))?;
                let tuple = Tuple {
                    grasp,
                    dimension: o.grasped_dim.parse().map_err(wrap)?,
                    constraint: o.constraint.parse().map_err(wrap)?,
                    force: o.force.parse().map_err(|v| wrap(ValidationError::UnknownForce(v)))?,
                };
                table.push((tuple, o.prob));
            }
            tables.push(table);
        }
        Ok(Resolved { tables, alphabet })
    }

    pub fn validate(&self, taxonomy: &Taxonomy) -> Result<(), SyntheticError> {
        self.resolve(taxonomy).map(|_| ())
    }

    /// Per-action instance counts, in action order. Deterministic in the seed
    /// and consumed first by [`generate_synthetic`].
    pub fn resolve_counts(&self) -> Vec<usize> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        self.draw_counts(&mut rng)
    }

    fn draw_counts(&self, rng: &mut ChaCha8Rng) -> Vec<usize> {
        let (lo, hi) = self.instances_per_action;
        let mut counts: Vec<usize> = (0..self.actions.len()).map(|_| rng.gen_range(lo..=hi)).collect();
        if let Some(total) = self.total_instances {
            let mut sum: usize = counts.iter().sum();
            while sum < total {
                let k = rng.gen_range(0..counts.len());
                if counts[k] < hi {
                    counts[k] += 1;
                    sum += 1;
                }
            }
            while sum > total {
                let k = rng.gen_range(0..counts.len());
                if counts[k] > lo {
                    counts[k] -= 1;
                    sum -= 1;
                }
            }
        }
        counts
    }

    /// Random generative tables from a handful of shape parameters.
    pub fn random(params: &RandomSpecParams, taxonomy: &Taxonomy) -> Result<SyntheticSpec, SyntheticError> {
        let p = params;
        if p.n_objects == 0 || p.n_objects > p.n_actions {
            return Err(SyntheticError::InvalidSpec(format!(
                "need 1 <= n_objects <= n_actions, got {} objects for {} actions",
                p.n_objects, p.n_actions
            )));
        }
        let (olo, ohi) = p.outcomes_per_action;
        if olo == 0 || olo > ohi {
            return Err(SyntheticError::InvalidSpec("outcomes_per_action range is empty".into()));
        }
        let grasps: Vec<GraspFine> = taxonomy.grasps().collect();
        let dims = GraspedDimension::all();
        let alphabet = default_alphabet();
        let space = grasps.len() * dims.len() * alphabet.len();
        if p.distinct_outcomes && p.n_actions * ohi > space {
            return Err(SyntheticError::InvalidSpec("not enough distinct tuples".into()));
        }
        let objects: Vec<String> = (0..p.n_objects)
            .map(|o| match o {
                0 => "towel".to_string(),
                1 => "cloth".to_string(),
                2 => "paper".to_string(),
                _ => format!("object{o:03}"),
            })
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(p.seed ^ 0x7ab1_e5ee_d000_0001);
        let mut used = HashSet::new();
        let mut actions = Vec::with_capacity(p.n_actions);
        for a in 0..p.n_actions {
            let k = rng.gen_range(olo..=ohi);
            let force = if rng.gen_bool(0.5) { Force::Weight } else { Force::Interaction };
            let mut weights: Vec<f64> = (0..k).map(|_| rng.gen_range(0.2..1.0)).collect();
            let norm: f64 = weights.iter().sum();
            weights.iter_mut().for_each(|w| *w /= norm);
            let head: f64 = weights[..k - 1].iter().sum();
            weights[k - 1] = 1.0 - head;
            let mut outcomes = Vec::with_capacity(k);
            let mut local = HashSet::new();
            for w in weights {
                let key = loop {
                    let key = (
                        rng.gen_range(0..grasps.len()),
                        rng.gen_range(0..dims.len()),
                        rng.gen_range(0..alphabet.len()),
                    );
                    let fresh = if p.distinct_outcomes { !used.contains(&key) } else { !local.contains(&key) };
                    if fresh {
                        break key;
                    }
                };
                used.insert(key);
                local.insert(key);
                outcomes.push(Outcome {
                    grasp: taxonomy.name(grasps[key.0]).to_string(),
                    grasped_dim: dims[key.1].to_string(),
                    constraint: alphabet[key.2].clone(),
                    force: force.to_string(),
                    prob: w,
                });
            }
            actions.push(ActionProfile {
                object: objects[a % p.n_objects].clone(),
                task: format!("task{a:03}"),
                outcomes,
            });
        }
        Ok(SyntheticSpec {
            actions,
            instances_per_action: p.instances_per_action,
            total_instances: p.total_instances,
            sequence_length: p.sequence_length,
            label_noise: p.label_noise,
            constraint_alphabet: alphabet,
            seed: p.seed,
        })
    }
}

/// Shape parameters for [`SyntheticSpec::random`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomSpecParams {
    pub n_actions: usize,
    pub n_objects: usize,
    pub outcomes_per_action: (usize, usize),
    pub instances_per_action: (usize, usize),
    #[serde(default)]
    pub total_instances: Option<usize>,
    pub sequence_length: (usize, usize),
    pub label_noise: f64,
    /// No attribute tuple is shared between any two actions.
    #[serde(default)]
    pub distinct_outcomes: bool,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SyntheticPreset {
    /// A dozen actions; quick smoke tests.
    Small,
    /// 20 actions, noise 0.3, 10k instances.
    Oracle,
    /// Noiseless, one distinct tuple per action.
    Bijective,
    /// 455 actions and 6188 instances.
    Clone,
}

impl std::str::FromStr for SyntheticPreset {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "small" => Ok(SyntheticPreset::Small),
            "oracle" => Ok(SyntheticPreset::Oracle),
            "bijective" => Ok(SyntheticPreset::Bijective),
            "clone" => Ok(SyntheticPreset::Clone),
            other => Err(format!("unknown preset {other:?} (expected small, oracle, bijective or clone)")),
        }
    }
}

impl SyntheticPreset {
    pub fn params(self, seed: u64) -> RandomSpecParams {
        let base = RandomSpecParams {
            n_actions: 12,
            n_objects: 4,
            outcomes_per_action: (1, 2),
            instances_per_action: (6, 12),
            total_instances: None,
            sequence_length: (1, 3),
            label_noise: 0.1,
            distinct_outcomes: false,
            seed,
        };
        match self {
            SyntheticPreset::Small => base,
            SyntheticPreset::Oracle => RandomSpecParams {
                n_actions: 20,
                n_objects: 5,
                outcomes_per_action: (1, 3),
                instances_per_action: (400, 600),
                total_instances: Some(10_000),
                sequence_length: (1, 4),
                label_noise: 0.3,
                ..base
            },
            SyntheticPreset::Bijective => RandomSpecParams {
                n_actions: 30,
                n_objects: 6,
                outcomes_per_action: (1, 1),
                instances_per_action: (6, 10),
                label_noise: 0.0,
                distinct_outcomes: true,
                ..base
            },
            SyntheticPreset::Clone => RandomSpecParams {
                n_actions: 455,
                n_objects: 120,
                outcomes_per_action: (1, 3),
                instances_per_action: (1, 27),
                total_instances: Some(6188),
                sequence_length: (1, 4),
                label_noise: 0.2,
                ..base
            },
        }
    }

    pub fn spec(self, seed: u64, taxonomy: &Taxonomy) -> SyntheticSpec {
        SyntheticSpec::random(&self.params(seed), taxonomy).expect("preset parameters are valid")
    }
}

const SUBJECTS: [(&str, &str); 4] = [
    ("machinist1", "machinist"),
    ("machinist2", "machinist"),
    ("housekeeper1", "housekeeper"),
    ("housekeeper2", "housekeeper"),
];

/// Draws the dataset described by `spec`. Instances come out grouped by
/// action and by sequence within an action.
pub fn generate_synthetic(spec: &SyntheticSpec, taxonomy: &Taxonomy) -> Result<Vec<Instance>, SyntheticError> {
    let resolved = spec.resolve(taxonomy)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let counts = spec.draw_counts(&mut rng);
    let grasps: Vec<GraspFine> = taxonomy.grasps().collect();
    let dims = GraspedDimension::all();
    let forces = [Force::Interaction, Force::Weight];
    let (slo, shi) = spec.sequence_length;

    let mut out = Vec::with_capacity(counts.iter().sum());
    let mut seq_counter = 0usize;
    for ((action, table), &count) in spec.actions.iter().zip(&resolved.tables).zip(&counts) {
        let mut remaining = count;
        while remaining > 0 {
            let len = rng.gen_range(slo..=shi).min(remaining);
            remaining -= len;
            seq_counter += 1;
            let (subject, profession) = *SUBJECTS.choose(&mut rng).expect("non-empty");
            let sequence_id = format!("seq{seq_counter:05}");
            for k in 0..len {
                let tuple = if rng.gen::<f64>() < spec.label_noise {
                    Tuple {
                        grasp: grasps[rng.gen_range(0..grasps.len())],
                        dimension: dims[rng.gen_range(0..dims.len())],
                        constraint: resolved.alphabet[rng.gen_range(0..resolved.alphabet.len())],
                        force: forces[rng.gen_range(0..2)],
                    }
                } else {
                    let u: f64 = rng.gen();
                    let mut acc = 0.0;
                    let mut pick = table[table.len() - 1].0;
                    for (t, p) in table {
                        acc += p;
                        if u < acc {
                            pick = *t;
                            break;
                        }
                    }
                    pick
                };
                out.push(Instance {
                    subject: subject.to_string(),
                    profession: profession.to_string(),
                    video: format!("video{:03}", seq_counter % 97),
                    sequence_id: sequence_id.clone(),
                    instance_id: format!("{sequence_id}-{k}"),
                    object: action.object.clone(),
                    task: action.task.clone(),
                    grasp: tuple.grasp,
                    coarse: taxonomy.coarse(tuple.grasp),
                    opposition: taxonomy.opposition(tuple.grasp),
                    dimension: tuple.dimension,
                    constraint: tuple.constraint,
                    force: tuple.force,
                });
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn same_seed_same_instances() {
        let tax = Taxonomy::builtin();
        let spec = SyntheticPreset::Small.spec(7, &tax);
        assert_eq!(generate_synthetic(&spec, &tax).unwrap(), generate_synthetic(&spec, &tax).unwrap());
        let other = SyntheticPreset::Small.spec(8, &tax);
        assert_ne!(generate_synthetic(&spec, &tax).unwrap(), generate_synthetic(&other, &tax).unwrap());
    }

    #[test]
    fn degenerate_tables_without_noise_are_constant_per_action() {
        let tax = Taxonomy::builtin();
        let mut params = SyntheticPreset::Small.params(3);
        params.outcomes_per_action = (1, 1);
        params.label_noise = 0.0;
        let spec = SyntheticSpec::random(&params, &tax).unwrap();
        let data = generate_synthetic(&spec, &tax).unwrap();
        for label in data.iter().map(Instance::action_label).collect::<BTreeSet<_>>() {
            let members: Vec<_> = data.iter().filter(|i| i.action_label() == label).collect();
            for m in &members {
                assert_eq!((m.grasp, m.dimension, m.constraint, m.force), (members[0].grasp, members[0].dimension, members[0].constraint, members[0].force));
            }
        }
    }

    #[test]
    fn total_and_labels_match_spec() {
        let tax = Taxonomy::builtin();
        let spec = SyntheticPreset::Clone.spec(11, &tax);
        let data = generate_synthetic(&spec, &tax).unwrap();
        assert_eq!(data.len(), 6188);
        let declared: BTreeSet<String> = spec.actions.iter().map(ActionProfile::label).collect();
        let seen: BTreeSet<String> = data.iter().map(Instance::action_label).collect();
        assert!(seen.is_subset(&declared));
        assert_eq!(seen.len(), 455);
        assert_eq!(spec.resolve_counts().iter().sum::<usize>(), 6188);
    }

    #[test]
    fn sequences_respect_length_range() {
        let tax = Taxonomy::builtin();
        let spec = SyntheticPreset::Small.spec(5, &tax);
        let data = generate_synthetic(&spec, &tax).unwrap();
        let mut lengths = std::collections::HashMap::new();
        for i in &data {
            *lengths.entry(i.sequence_id.clone()).or_insert(0usize) += 1;
        }
        assert!(lengths.values().all(|&l| (1..=3).contains(&l)));
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let tax = Taxonomy::builtin();
        let good = SyntheticPreset::Small.spec(1, &tax);

        let mut s = good.clone();
        s.label_noise = 1.5;
        assert!(matches!(generate_synthetic(&s, &tax), Err(SyntheticError::InvalidSpec(_))));

        let mut s = good.clone();
        s.actions[0].outcomes[0].prob += 0.01;
        assert!(matches!(generate_synthetic(&s, &tax), Err(SyntheticError::InvalidSpec(_))));

        let mut s = good.clone();
        s.actions[0].outcomes[0].grasp = "claw".into();
        assert!(matches!(generate_synthetic(&s, &tax), Err(SyntheticError::InvalidOutcome { action: 0, .. })));

        let mut s = good.clone();
        s.total_instances = Some(1);
        assert!(matches!(generate_synthetic(&s, &tax), Err(SyntheticError::InvalidSpec(_))));

        let mut s = good;
        s.instances_per_action = (0, 3);
        assert!(s.validate(&tax).is_err());
    }

    #[test]
    fn spec_json_round_trips() {
        let tax = Taxonomy::builtin();
        let spec = SyntheticPreset::Small.spec(2, &tax);
        let json = serde_json::to_string(&spec).unwrap();
        let back: SyntheticSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, spec);
    }
}
