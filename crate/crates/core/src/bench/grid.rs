use std::collections::{BTreeSet, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    combine_ensemble, prepare, run_member, summarize, BenchError, DatasetRef, ExperimentResult, ExperimentSpec,
    FoldPredictions, Level, SequenceFilter, Timing,
};
use crate::domain::{Instance, Taxonomy};
use crate::encode::{AttributeSubset, SequenceVariant, Target};
use crate::learn::{ClassifierKind, TrainConfig};

fn default_classifiers() -> Vec<ClassifierKind> {
    ClassifierKind::FAMILIES.to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnSpec {
    pub name: String,
    pub subset: AttributeSubset,
    #[serde(default)]
    pub level: Level,
    #[serde(default)]
    pub target: Target,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub filters: Option<SequenceFilter>,
    #[serde(default)]
    pub sequence_variant: SequenceVariant,
    #[serde(default)]
    pub exclude_objects: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableSpec {
    pub id: String,
    pub title: String,
    /// Adds a majority-vote row over all five families.
    #[serde(default)]
    pub ensemble: bool,
    pub columns: Vec<ColumnSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub name: String,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<DatasetRef>,
    #[serde(default)]
    pub config: TrainConfig,
    #[serde(default = "default_classifiers")]
    pub classifiers: Vec<ClassifierKind>,
    pub tables: Vec<TableSpec>,
}

impl GridSpec {
    pub fn cell_spec(&self, column: &ColumnSpec, classifier: ClassifierKind) -> ExperimentSpec {
        ExperimentSpec {
            dataset: self.dataset.clone(),
            subset: column.subset,
            level: column.level,
            target: column.target,
            filters: column.filters,
            sequence_variant: column.sequence_variant,
            classifier,
            config: self.config.clone(),
            seed: self.seed,
            exclude_objects: column.exclude_objects.clone(),
        }
    }

    fn rows(&self, table: &TableSpec) -> Vec<ClassifierKind> {
        let mut rows: Vec<ClassifierKind> =
            self.classifiers.iter().copied().filter(|k| *k != ClassifierKind::Ensemble).collect();
        if table.ensemble || self.classifiers.contains(&ClassifierKind::Ensemble) {
            rows.push(ClassifierKind::Ensemble);
        }
        rows
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub avg_accuracy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pooled_accuracy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowResult {
    pub classifier: ClassifierKind,
    pub label: String,
    pub cells: Vec<CellResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableResult {
    pub id: String,
    pub title: String,
    pub columns: Vec<String>,
    pub rows: Vec<RowResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub name: String,
    pub tables: Vec<TableResult>,
    /// One entry per distinct successful cell.
    pub results: Vec<ExperimentResult>,
}

type Outcome = Result<(ExperimentResult, FoldPredictions), String>;

fn log_timing(r: &ExperimentResult) {
    let t: &Timing = &r.timing;
    log::info!(
        "{} {} train {:.2}s+{:.2}s predict {:.2}s+{:.2}s acc {:.4}",
        r.id,
        r.spec.classifier,
        t.train_secs[0],
        t.train_secs[1],
        t.predict_secs[0],
        t.predict_secs[1],
        r.avg_accuracy
    );
}

/// Runs every cell of the grid. Identical cells run once, single-family
/// cells run in parallel, and ensemble cells reuse their members'
/// predictions. A failing cell records its error and the rest continue.
pub fn run_grid(grid: &GridSpec, instances: &[Instance], taxonomy: &Taxonomy) -> Result<ResultTable, BenchError> {
    let mut members: Vec<ExperimentSpec> = Vec::new();
    let mut ensembles: Vec<ExperimentSpec> = Vec::new();
    let mut seen = BTreeSet::new();
    let mut push = |list: &mut Vec<ExperimentSpec>, spec: ExperimentSpec| {
        if seen.insert(spec.id()) {
            list.push(spec);
        }
    };
    for table in &grid.tables {
        for column in &table.columns {
            for kind in grid.rows(table) {
                let spec = grid.cell_spec(column, kind);
                if kind == ClassifierKind::Ensemble {
                    for m in ClassifierKind::FAMILIES {
                        push(&mut members, grid.cell_spec(column, m));
                    }
                    push(&mut ensembles, spec);
                } else {
                    push(&mut members, spec);
                }
            }
        }
    }
    if members.is_empty() {
        return Err(BenchError::EmptyGrid);
    }
    log::info!("grid {}: {} cells, {} ensembles", grid.name, members.len(), ensembles.len());

    let mut outcomes: HashMap<String, Outcome> = members
        .par_iter()
        .map(|spec| {
            let out = prepare(spec, instances, taxonomy)
                .and_then(|data| run_member(spec, &data))
                .map_err(|e| e.to_string());
            match &out {
                Ok((r, _)) => log_timing(r),
                Err(e) => log::warn!("{} {}: {e}", spec.id(), spec.classifier),
            }
            (spec.id(), out)
        })
        .collect();

    for spec in &ensembles {
        let out = (|| -> Outcome {
            let mut preds = Vec::new();
            for kind in ClassifierKind::FAMILIES {
                match &outcomes[&grid_member_id(spec, kind)] {
                    Ok((_, p)) => preds.push(p),
                    Err(e) => return Err(format!("member {kind}: {e}")),
                }
            }
            let combined = combine_ensemble(&preds);
            let data = prepare(spec, instances, taxonomy).map_err(|e| e.to_string())?;
            let r = summarize(spec, &data, &combined, Timing::default()).map_err(|e| e.to_string())?;
            Ok((r, combined))
        })();
        outcomes.insert(spec.id(), out);
    }

    let mut tables = Vec::new();
    for table in &grid.tables {
        let rows = grid
            .rows(table)
            .into_iter()
            .map(|kind| RowResult {
                classifier: kind,
                label: kind.display_name().to_string(),
                cells: table
                    .columns
                    .iter()
                    .map(|c| match &outcomes[&grid.cell_spec(c, kind).id()] {
                        Ok((r, _)) => CellResult {
                            result_id: Some(r.id.clone()),
                            avg_accuracy: Some(r.avg_accuracy),
                            pooled_accuracy: Some(r.pooled_accuracy),
                            error: None,
                        },
                        Err(e) => CellResult { result_id: None, avg_accuracy: None, pooled_accuracy: None, error: Some(e.clone()) },
                    })
                    .collect(),
            })
            .collect();
        tables.push(TableResult {
            id: table.id.clone(),
            title: table.title.clone(),
            columns: table.columns.iter().map(|c| c.name.clone()).collect(),
            rows,
        });
    }

    let mut results = Vec::new();
    for spec in members.iter().chain(&ensembles) {
        if let Ok((r, _)) = &outcomes[&spec.id()] {
            results.push(r.clone());
        }
    }
    Ok(ResultTable { name: grid.name.clone(), tables, results })
}

fn grid_member_id(spec: &ExperimentSpec, kind: ClassifierKind) -> String {
    spec.with_classifier(kind).id()
}
