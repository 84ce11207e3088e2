//! Canonical CSV ingestion and the dataset cleaning rules.
//!
//! The canonical header is
//! `subject,profession,video,sequence_id,instance_id,object,task,grasp,opposition,grasped_dim,constraint,force`.
//! Converting the original Yale spreadsheet means mapping its columns onto
//! these names one-to-one: grasp names become lowercase-hyphenated taxonomy
//! names, opposition may be left empty (it is then read from the taxonomy),
//! and rows without a grasp annotation keep an empty `grasp` cell so the
//! cleaner can count them.

mod synthetic;

pub use synthetic::{
    generate_synthetic, ActionProfile, Outcome, RandomSpecParams, SyntheticError, SyntheticPreset,
    SyntheticSpec, DEFAULT_CONSTRAINT_ALPHABET,
};

use std::collections::{BTreeSet, HashSet};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{validate_instance, Instance, RawRecord, Taxonomy, ValidationError};

pub const CSV_HEADER: [&str; 12] = [
    "subject",
    "profession",
    "video",
    "sequence_id",
    "instance_id",
    "object",
    "task",
    "grasp",
    "opposition",
    "grasped_dim",
    "constraint",
    "force",
];

/// More distinct constraint strings than this triggers a warning.
pub const MAX_EXPECTED_CONSTRAINTS: usize = 20;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("bad CSV header: expected `{}`, found {found:?}", CSV_HEADER.join(","))]
    BadHeader { found: String },
    #[error("row {row}: expected {expected} columns, found {found}")]
    RaggedRow { row: usize, expected: usize, found: usize },
    #[error("row {row}: {source}")]
    Invalid {
        row: usize,
        #[source]
        source: ValidationError,
    },
    #[error("CSV read error: {0}")]
    Csv(#[from] csv::Error),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

/// A parsed CSV row together with its 1-based row number (the header is row 1).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceRecord {
    pub row: usize,
    pub record: RawRecord,
}

/// Reads canonical CSV. Rows come back in file order.
pub fn parse_csv<R: Read>(input: R) -> Result<Vec<SourceRecord>, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(input);
    let mut rows = reader.records();
    let header = match rows.next() {
        Some(h) => h?,
        None => return Err(IngestError::BadHeader { found: String::new() }),
    };
    let found: Vec<String> = header
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let f = if i == 0 { f.trim_start_matches('\u{feff}') } else { f };
            f.trim().to_string()
        })
        .collect();
    if found != CSV_HEADER {
        return Err(IngestError::BadHeader { found: found.join(",") });
    }
    let mut out = Vec::new();
    for (i, rec) in rows.enumerate() {
        let rec = rec?;
        let row = i + 2;
        if rec.len() != CSV_HEADER.len() {
            return Err(IngestError::RaggedRow { row, expected: CSV_HEADER.len(), found: rec.len() });
        }
        let f = |k: usize| rec[k].to_string();
        out.push(SourceRecord {
            row,
            record: RawRecord {
                subject: f(0),
                profession: f(1),
                video: f(2),
                sequence_id: f(3),
                instance_id: f(4),
                object: f(5),
                task: f(6),
                grasp: f(7),
                opposition: f(8),
                grasped_dim: f(9),
                constraint: f(10),
                force: f(11),
            },
        });
    }
    Ok(out)
}

/// Writes instances back out as canonical CSV.
pub fn write_instances_csv<W: Write>(out: W, instances: &[Instance], taxonomy: &Taxonomy) -> Result<(), IngestError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for inst in instances {
        let r = inst.to_raw(taxonomy);
        w.write_record([
            &r.subject,
            &r.profession,
            &r.video,
            &r.sequence_id,
            &r.instance_id,
            &r.object,
            &r.task,
            &r.grasp,
            &r.opposition,
            &r.grasped_dim,
            &r.constraint,
            &r.force,
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Counts produced by [`clean`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleanReport {
    pub input_records: usize,
    pub holding: usize,
    pub no_grasp: usize,
    pub missing_constraint: usize,
    pub missing_force: usize,
    pub instances: usize,
    pub action_labels: usize,
    pub distinct_constraints: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl CleanReport {
    pub fn dropped(&self) -> usize {
        self.holding + self.no_grasp + self.missing_constraint + self.missing_force
    }
}

fn is_holding(task: &str) -> bool {
    task.trim().eq_ignore_ascii_case("holding")
}

/// Drops holding tasks and rows without grasp (or constraint/force)
/// annotations, then validates what remains.
pub fn clean(records: &[SourceRecord], taxonomy: &Taxonomy) -> Result<(Vec<Instance>, CleanReport), IngestError> {
    let mut report = CleanReport { input_records: records.len(), ..Default::default() };
    let mut instances = Vec::with_capacity(records.len());
    for src in records {
        let r = &src.record;
        if is_holding(&r.task) {
            report.holding += 1;
        } else if r.grasp.trim().is_empty() {
            report.no_grasp += 1;
        } else if r.constraint.trim().is_empty() {
            report.missing_constraint += 1;
        } else if r.force.trim().is_empty() {
            report.missing_force += 1;
        } else {
            let inst = validate_instance(r, taxonomy)
                .map_err(|source| IngestError::Invalid { row: src.row, source })?;
            instances.push(inst);
        }
    }
    report.instances = instances.len();
    report.action_labels = instances.iter().map(Instance::action_label).collect::<HashSet<_>>().len();
    report.distinct_constraints = instances.iter().map(|i| i.constraint).collect::<HashSet<_>>().len();
    if report.distinct_constraints > MAX_EXPECTED_CONSTRAINTS {
        let msg = format!(
            "{} distinct motion-constraint strings observed (expected at most {MAX_EXPECTED_CONSTRAINTS})",
            report.distinct_constraints
        );
        log::warn!("{msg}");
        report.warnings.push(msg);
    }
    Ok((instances, report))
}

/// Re-wraps instances as source records, numbering rows as a CSV would.
pub fn to_source_records(instances: &[Instance], taxonomy: &Taxonomy) -> Vec<SourceRecord> {
    instances
        .iter()
        .enumerate()
        .map(|(i, inst)| SourceRecord { row: i + 2, record: inst.to_raw(taxonomy) })
        .collect()
}

/// Order-preserving removal of every instance whose object is listed.
pub fn exclude_objects(instances: &[Instance], objects: &BTreeSet<String>) -> Vec<Instance> {
    instances.iter().filter(|i| !objects.contains(&i.object)).cloned().collect()
}

/// Reads and cleans a canonical CSV file in one go.
pub fn load_instances(path: &std::path::Path, taxonomy: &Taxonomy) -> Result<(Vec<Instance>, CleanReport), IngestError> {
    let file = std::fs::File::open(path)?;
    let records = parse_csv(std::io::BufReader::new(file))?;
    clean(&records, taxonomy)
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "subject,profession,video,sequence_id,instance_id,object,task,grasp,opposition,grasped_dim,constraint,force\n";

    fn row(task: &str, grasp: &str) -> String {
        format!("s1,machinist,v1,q1,i1,bottle,{task},{grasp},,a,uuu,weight\n")
    }

    #[test]
    fn parses_rows_in_order() {
        let text = format!("{HEADER}{}{}", row("drinking", "medium-wrap"), row("opening", "tripod"));
        let recs = parse_csv(text.as_bytes()).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[0].row, 2);
        assert_eq!(recs[1].record.task, "opening");
    }

    #[test]
    fn ragged_row_reports_its_row_number() {
        let text = format!("{HEADER}s1,machinist,v1,q1,i1,bottle,drinking,medium-wrap,,a,uuu\n");
        match parse_csv(text.as_bytes()) {
            Err(IngestError::RaggedRow { row, found, .. }) => {
                assert_eq!(row, 2);
                assert_eq!(found, 11);
            }
            other => panic!("expected RaggedRow, got {other:?}"),
        }
    }

    #[test]
    fn empty_file_is_bad_header() {
        assert!(matches!(parse_csv("".as_bytes()), Err(IngestError::BadHeader { .. })));
        assert!(matches!(parse_csv("a,b,c\n".as_bytes()), Err(IngestError::BadHeader { .. })));
    }

    #[test]
    fn clean_counts_drop_reasons() {
        let mut text = HEADER.to_string();
        for _ in 0..7 {
            text.push_str(&row("drinking", "medium-wrap"));
        }
        text.push_str(&row("holding", "medium-wrap"));
        text.push_str(&row(" Holding ", ""));
        text.push_str(&row("pouring", ""));
        let recs = parse_csv(text.as_bytes()).unwrap();
        let (inst, report) = clean(&recs, &Taxonomy::builtin()).unwrap();
        assert_eq!(inst.len(), 7);
        assert_eq!(report.holding, 2);
        assert_eq!(report.no_grasp, 1);
        assert_eq!(report.action_labels, 1);
        assert_eq!(report.dropped(), 3);
    }

    #[test]
    fn clean_of_nothing_is_empty() {
        let (inst, report) = clean(&[], &Taxonomy::builtin()).unwrap();
        assert!(inst.is_empty());
        assert_eq!(report, CleanReport::default());
    }

    #[test]
    fn clean_propagates_row_context() {
        let text = format!("{HEADER}{}s1,m,v,q,i,bottle,drinking,medium-wrap,,a,uu,weight\n", row("x", "tripod"));
        let recs = parse_csv(text.as_bytes()).unwrap();
        match clean(&recs, &Taxonomy::builtin()) {
            Err(IngestError::Invalid { row: 3, source: ValidationError::BadConstraintString(_) }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_constraint_and_force_have_own_counters() {
        let text = format!(
            "{HEADER}s1,m,v,q,i,bottle,drinking,medium-wrap,,a,,weight\ns1,m,v,q,i,bottle,drinking,medium-wrap,,a,uuu,\n"
        );
        let (inst, report) = clean(&parse_csv(text.as_bytes()).unwrap(), &Taxonomy::builtin()).unwrap();
        assert!(inst.is_empty());
        assert_eq!((report.missing_constraint, report.missing_force), (1, 1));
    }

    #[test]
    fn warns_above_twenty_constraints() {
        let mut text = HEADER.to_string();
        let syms = ['u', 't', 'r', 'x'];
        for a in syms {
            for b in syms {
                for c in ['u', 't'] {
                    text.push_str(&format!("s,m,v,q,i,box,push,tripod,,a,{a}{b}{c},weight\n"));
                }
            }
        }
        let (_, report) = clean(&parse_csv(text.as_bytes()).unwrap(), &Taxonomy::builtin()).unwrap();
        assert_eq!(report.distinct_constraints, 32);
        assert_eq!(report.warnings.len(), 1);
    }

    #[test]
    fn exclusion_filters_in_order() {
        let tax = Taxonomy::builtin();
        let mut text = HEADER.to_string();
        for obj in ["towel", "bottle", "paper", "pen", "cloth"] {
            text.push_str(&format!("s,m,v,q,i,{obj},wipe,tripod,,a,uuu,weight\n"));
        }
        let (inst, _) = clean(&parse_csv(text.as_bytes()).unwrap(), &tax).unwrap();
        assert_eq!(exclude_objects(&inst, &BTreeSet::new()), inst);
        let drop: BTreeSet<String> = ["towel", "cloth", "paper"].iter().map(|s| s.to_string()).collect();
        let kept: Vec<_> = exclude_objects(&inst, &drop).into_iter().map(|i| i.object).collect();
        assert_eq!(kept, ["bottle", "pen"]);
        let all: BTreeSet<String> = inst.iter().map(|i| i.object.clone()).collect();
        assert!(exclude_objects(&inst, &all).is_empty());
    }

    #[test]
    fn written_csv_parses_back() {
        let tax = Taxonomy::builtin();
        let text = format!("{HEADER}{}{}", row("drinking", "medium-wrap"), row("opening", "Tripod"));
        let (inst, _) = clean(&parse_csv(text.as_bytes()).unwrap(), &tax).unwrap();
        let mut buf = Vec::new();
        write_instances_csv(&mut buf, &inst, &tax).unwrap();
        let (again, _) = clean(&parse_csv(buf.as_slice()).unwrap(), &tax).unwrap();
        assert_eq!(again, inst);
    }
}
