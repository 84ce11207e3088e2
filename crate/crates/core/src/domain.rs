//! Annotation domain types: the grasp taxonomy, the categorical attributes of
//! a manipulation instance, and record validation.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of fine grasp types in the taxonomy.
pub const N_FINE_GRASPS: usize = 33;

/// Separator between object and task in an action label.
pub const LABEL_SEPARATOR: char = '/';

/// Taxonomy shipped with the crate (`data/grasp33.tsv`).
pub const BUILTIN_TAXONOMY_TSV: &str = include_str!("../data/grasp33.tsv");

const TAXONOMY_HEADER: [&str; 3] = ["fine", "coarse", "opposition"];

#[derive(Debug, Error)]
pub enum TaxonomyError {
    #[error("cannot read taxonomy file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("taxonomy header must be `fine\\tcoarse\\topposition`, found {0:?}")]
    BadHeader(String),
    #[error("taxonomy line {line}: {reason}")]
    BadRow { line: usize, reason: String },
    #[error("taxonomy lists grasp {0:?} more than once")]
    Duplicate(String),
    #[error("taxonomy must list exactly {N_FINE_GRASPS} grasp types, found {0}")]
    WrongCount(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValidationError {
    #[error("field `{0}` is empty")]
    EmptyField(&'static str),
    #[error("unknown grasp type {0:?}")]
    UnknownGrasp(String),
    #[error("bad motion-constraint string {0:?} (need 3 symbols over u,t,r,x)")]
    BadConstraintString(String),
    #[error("unknown force class {0:?} (expected weight or interaction)")]
    UnknownForce(String),
    #[error("unknown opposition type {0:?} (expected pad, palm or side)")]
    UnknownOpposition(String),
    #[error("bad grasped dimension {0:?} (need a non-empty string over a,b,c)")]
    BadDimension(String),
    #[error("object {0:?} contains the label separator '/'")]
    SlashInObject(String),
}

macro_rules! closed_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(rename_all = "lowercase")]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            /// All members in lexicographic order of their names.
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }

            /// Position in [`Self::ALL`].
            pub fn index(self) -> usize {
                self as usize
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = String;
            fn from_str(s: &str) -> Result<Self, String> {
                let norm = s.trim().to_ascii_lowercase();
                $(if norm == $text { return Ok($name::$variant); })+
                Err(s.to_string())
            }
        }
    };
}

closed_enum!(
    /// Coarse grasp class.
    GraspCoarse {
        Intermediate => "intermediate",
        Power => "power",
        Precision => "precision",
    }
);

closed_enum!(
    /// Direction in which the hand applies force on the object.
    OppositionType {
        Pad => "pad",
        Palm => "palm",
        Side => "side",
    }
);

closed_enum!(
    /// Dominant force requirement of the task.
    Force {
        Interaction => "interaction",
        Weight => "weight",
    }
);

/// One of the 33 fine grasp types, as its rank in the taxonomy's
/// lexicographically sorted name list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GraspFine(u8);

impl GraspFine {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Object axes lying between the fingers, stored as a bit set over {a, b, c}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GraspedDimension(u8);

impl GraspedDimension {
    /// The seven non-empty axis subsets in lexicographic order of their
    /// canonical strings.
    pub fn all() -> Vec<GraspedDimension> {
        let mut dims: Vec<_> = (1u8..8).map(GraspedDimension).collect();
        dims.sort_by_key(|d| d.to_string());
        dims
    }

    pub fn contains(self, axis: char) -> bool {
        match axis {
            'a' => self.0 & 1 != 0,
            'b' => self.0 & 2 != 0,
            'c' => self.0 & 4 != 0,
            _ => false,
        }
    }
}

impl FromStr for GraspedDimension {
    type Err = ValidationError;

    fn from_str(s: &str) -> Result<Self, ValidationError> {
        let mut bits = 0u8;
        for ch in s.trim().chars() {
            bits |= match ch.to_ascii_lowercase() {
                'a' => 1,
                'b' => 2,
                'c' => 4,
                _ => return Err(ValidationError::BadDimension(s.to_string())),
            };
        }
        if bits == 0 {
            return Err(ValidationError::BadDimension(s.to_string()));
        }
        Ok(GraspedDimension(bits))
    }
}

impl fmt::Display for GraspedDimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for axis in ['a', 'b', 'c'] {
            if self.contains(axis) {
                write!(f, "{axis}")?;
            }
        }
        Ok(())
    }
}

/// Per-axis motion constraint: three symbols over {u, t, r, x}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MotionConstraint([u8; 3]);

impl MotionConstraint {
    pub const SYMBOLS: [char; 4] = ['u', 't', 'r', 'x'];

    pub fn as_str(&self) -> &str {
        // always ASCII by construction
        std::str::from_utf8(&self.0).unwrap_or("???")
    }
}

impl FromStr for MotionConstraint {
    type Err = ValidationError;

    fn from_str(s: &str) -> Result<Self, ValidationError> {
        let norm = s.trim().to_ascii_lowercase();
        let bytes = norm.as_bytes();
        if bytes.len() != 3 || !bytes.iter().all(|b| b"utrx".contains(b)) {
            return Err(ValidationError::BadConstraintString(s.to_string()));
        }
        Ok(MotionConstraint([bytes[0], bytes[1], bytes[2]]))
    }
}

impl fmt::Display for MotionConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaxonomyEntry {
    pub name: String,
    pub coarse: GraspCoarse,
    pub opposition: OppositionType,
}

/// Total mapping from the 33 fine grasp types to their coarse class and
/// opposition type. Entries are kept sorted by name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Taxonomy {
    entries: Vec<TaxonomyEntry>,
    by_name: HashMap<String, GraspFine>,
}

/// Lowercase, trimmed, with spaces and underscores turned into hyphens.
pub fn normalize_grasp_name(raw: &str) -> String {
    raw.trim()
        .to_ascii_lowercase()
        .chars()
        .map(|c| if c == ' ' || c == '_' { '-' } else { c })
        .collect()
}

impl Taxonomy {
    pub fn builtin() -> Taxonomy {
        Taxonomy::parse(BUILTIN_TAXONOMY_TSV).expect("bundled taxonomy is valid")
    }

    pub fn load(path: &Path) -> Result<Taxonomy, TaxonomyError> {
        let text = std::fs::read_to_string(path).map_err(|source| TaxonomyError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Taxonomy::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Taxonomy, TaxonomyError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let header = lines
            .next()
            .map(|(_, l)| l.trim_start_matches('\u{feff}').trim_end())
            .unwrap_or("");
        if header.split('\t').collect::<Vec<_>>() != TAXONOMY_HEADER {
            return Err(TaxonomyError::BadHeader(header.to_string()));
        }
        let mut entries: Vec<TaxonomyEntry> = Vec::with_capacity(N_FINE_GRASPS);
        for (idx, line) in lines {
            let line_no = idx + 1;
            let cols: Vec<&str> = line.trim_end().split('\t').collect();
            if cols.len() != 3 {
                return Err(TaxonomyError::BadRow {
                    line: line_no,
                    reason: format!("expected 3 tab-separated columns, found {}", cols.len()),
                });
            }
            let name = normalize_grasp_name(cols[0]);
            if name.is_empty() {
                return Err(TaxonomyError::BadRow { line: line_no, reason: "empty grasp name".into() });
            }
            let coarse = cols[1].parse::<GraspCoarse>().map_err(|v| TaxonomyError::BadRow {
                line: line_no,
                reason: format!("unknown coarse grasp {v:?}"),
            })?;
            let opposition = cols[2].parse::<OppositionType>().map_err(|v| TaxonomyError::BadRow {
                line: line_no,
                reason: format!("unknown opposition {v:?}"),
            })?;
            if entries.iter().any(|e| e.name == name) {
                return Err(TaxonomyError::Duplicate(name));
            }
            entries.push(TaxonomyEntry { name, coarse, opposition });
        }
        if entries.len() != N_FINE_GRASPS {
            return Err(TaxonomyError::WrongCount(entries.len()));
        }
        entries.sort_by(|a, b| a.name.cmp(&b.name));
        let by_name = entries
            .iter()
            .enumerate()
            .map(|(i, e)| (e.name.clone(), GraspFine(i as u8)))
            .collect();
        Ok(Taxonomy { entries, by_name })
    }

    pub fn lookup(&self, name: &str) -> Option<GraspFine> {
        self.by_name.get(&normalize_grasp_name(name)).copied()
    }

    pub fn name(&self, grasp: GraspFine) -> &str {
        &self.entries[grasp.index()].name
    }

    pub fn coarse(&self, grasp: GraspFine) -> GraspCoarse {
        self.entries[grasp.index()].coarse
    }

    pub fn opposition(&self, grasp: GraspFine) -> OppositionType {
        self.entries[grasp.index()].opposition
    }

    /// All grasps in lexicographic name order.
    pub fn grasps(&self) -> impl Iterator<Item = GraspFine> + '_ {
        (0..self.entries.len()).map(|i| GraspFine(i as u8))
    }

    pub fn entries(&self) -> &[TaxonomyEntry] {
        &self.entries
    }

    /// Tab-separated rendering in the on-disk format.
    pub fn to_tsv(&self) -> String {
        let mut out = TAXONOMY_HEADER.join("\t");
        out.push('\n');
        for e in &self.entries {
            out.push_str(&format!("{}\t{}\t{}\n", e.name, e.coarse, e.opposition));
        }
        out
    }
}

/// One CSV data row, untyped. Field order follows the canonical header.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawRecord {
    pub subject: String,
    pub profession: String,
    pub video: String,
    pub sequence_id: String,
    pub instance_id: String,
    pub object: String,
    pub task: String,
    pub grasp: String,
    pub opposition: String,
    pub grasped_dim: String,
    pub constraint: String,
    pub force: String,
}

/// One annotated manipulation event after validation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    pub subject: String,
    pub profession: String,
    pub video: String,
    pub sequence_id: String,
    pub instance_id: String,
    pub object: String,
    pub task: String,
    pub grasp: GraspFine,
    pub coarse: GraspCoarse,
    pub opposition: OppositionType,
    pub dimension: GraspedDimension,
    pub constraint: MotionConstraint,
    pub force: Force,
}

impl Instance {
    /// `object/task`.
    pub fn action_label(&self) -> String {
        format!("{}{}{}", self.object, LABEL_SEPARATOR, self.task)
    }

    pub fn to_raw(&self, taxonomy: &Taxonomy) -> RawRecord {
        RawRecord {
            subject: self.subject.clone(),
            profession: self.profession.clone(),
            video: self.video.clone(),
            sequence_id: self.sequence_id.clone(),
            instance_id: self.instance_id.clone(),
            object: self.object.clone(),
            task: self.task.clone(),
            grasp: taxonomy.name(self.grasp).to_string(),
            opposition: self.opposition.to_string(),
            grasped_dim: self.dimension.to_string(),
            constraint: self.constraint.to_string(),
            force: self.force.to_string(),
        }
    }
}

/// Splits an action label back into (object, task).
pub fn split_action_label(label: &str) -> Option<(&str, &str)> {
    label.split_once(LABEL_SEPARATOR)
}

fn required<'a>(value: &'a str, field: &'static str) -> Result<&'a str, ValidationError> {
    let v = value.trim();
    if v.is_empty() {
        Err(ValidationError::EmptyField(field))
    } else {
        Ok(v)
    }
}

/// Types a raw record. Coarse grasp always comes from the taxonomy; the
/// opposition type does too when the record leaves it empty.
pub fn validate_instance(raw: &RawRecord, taxonomy: &Taxonomy) -> Result<Instance, ValidationError> {
    let object = required(&raw.object, "object")?;
    if object.contains(LABEL_SEPARATOR) {
        return Err(ValidationError::SlashInObject(object.to_string()));
    }
    let task = required(&raw.task, "task")?;
    let grasp_name = required(&raw.grasp, "grasp")?;
    let grasp = taxonomy
        .lookup(grasp_name)
        .ok_or_else(|| ValidationError::UnknownGrasp(grasp_name.to_string()))?;
    let opposition = match raw.opposition.trim() {
        "" => taxonomy.opposition(grasp),
        v => v.parse().map_err(ValidationError::UnknownOpposition)?,
    };
    let dimension = required(&raw.grasped_dim, "grasped_dim")?.parse()?;
    let constraint = required(&raw.constraint, "constraint")?.parse()?;
    let force = required(&raw.force, "force")?
        .parse()
        .map_err(ValidationError::UnknownForce)?;
    Ok(Instance {
        subject: raw.subject.trim().to_string(),
        profession: raw.profession.trim().to_string(),
        video: raw.video.trim().to_string(),
        sequence_id: raw.sequence_id.trim().to_string(),
        instance_id: raw.instance_id.trim().to_string(),
        object: object.to_string(),
        task: task.to_string(),
        grasp,
        coarse: taxonomy.coarse(grasp),
        opposition,
        dimension,
        constraint,
        force,
    })
}
