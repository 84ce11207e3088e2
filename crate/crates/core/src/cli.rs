//! The `gab` command line.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::bench::{self, DatasetRef, Encoding, GridSpec, Level, ResultTable, SequenceFilter};
use crate::domain::{Instance, Taxonomy};
use crate::encode::{AttributeSubset, SequenceVariant, Target};
use crate::ingest::{self, SyntheticPreset, SyntheticSpec};
use crate::learn::{ClassifierKind, TrainConfig};
use crate::matrix::LabeledMatrix;
use crate::ovo::{self, MultiClassPredictor, ModelFile};
use crate::report::{render_report, ReportFormat};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "gab", version, about = "Manipulation-action classification benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Clean a canonical CSV into an instances file.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        /// Grasp taxonomy TSV; the built-in 33-grasp table when omitted.
        #[arg(long)]
        taxonomy: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_delimiter = ',')]
        exclude_objects: Vec<String>,
        /// Also write the cleaning counts as JSON.
        #[arg(long)]
        report_out: Option<PathBuf>,
    },
    /// Write a synthetic dataset in the canonical CSV schema.
    MakeSynthetic {
        #[arg(long, conflicts_with = "spec", required_unless_present = "spec")]
        preset: Option<SyntheticPreset>,
        /// Generative spec as JSON instead of a preset.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        taxonomy: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Also write the generative spec as JSON.
        #[arg(long)]
        spec_out: Option<PathBuf>,
    },
    /// Encode instances into a labeled feature matrix.
    Encode {
        #[arg(long)]
        instances: PathBuf,
        #[arg(long)]
        taxonomy: Option<PathBuf>,
        /// Comma-separated attributes, e.g. object,grasp_fine,constraint.
        #[arg(long, default_value = "object,grasp_fine")]
        subset: AttributeSubset,
        #[arg(long, default_value = "instance")]
        level: Level,
        #[arg(long, default_value = "action")]
        target: Target,
        #[arg(long, default_value = "literal34")]
        variant: SequenceVariant,
        /// `<min instances per sequence>,<min sequences per action>`.
        #[arg(long)]
        filters: Option<SequenceFilter>,
        #[arg(long, value_delimiter = ',')]
        exclude_objects: Vec<String>,
        #[arg(long)]
        out: PathBuf,
        /// Also write one column name per line.
        #[arg(long)]
        columns_out: Option<PathBuf>,
    },
    /// Train one classifier on a matrix file.
    Train {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        classifier: ClassifierKind,
        /// Hyperparameters as JSON; missing fields take defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Label the rows of a matrix file with a trained model.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run an experiment grid and write results.json, results.csv and results.md.
    Bench {
        #[arg(long)]
        grid: PathBuf,
        /// Canonical CSV to use instead of the grid's dataset.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        taxonomy: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Split seed; replaces the grid's own.
        #[arg(long)]
        seed: u64,
    },
    /// Render a results.json as CSV or Markdown.
    Report {
        #[arg(long)]
        results: PathBuf,
        #[arg(long, default_value = "markdown")]
        format: ReportFormat,
        /// Standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Failure of a verb; usage errors exit 1 and data errors exit 2.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Data(m) => f.write_str(m),
        }
    }
}

fn data_err(path: &Path) -> impl FnOnce(String) -> CliError + '_ {
    move |e| CliError::Data(format!("{}: {e}", path.display()))
}

fn read_file(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path).map(BufReader::new).map_err(|e| data_err(path)(e.to_string()))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| data_err(path)(e.to_string()))
}

fn create_file(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(|e| data_err(path)(e.to_string()))
}

fn load_taxonomy(path: Option<&Path>) -> Result<Taxonomy, CliError> {
    match path {
        None => Ok(Taxonomy::builtin()),
        Some(p) => Taxonomy::load(p).map_err(|e| CliError::Data(e.to_string())),
    }
}

fn load_instances(path: &Path, taxonomy: &Taxonomy) -> Result<Vec<Instance>, CliError> {
    ingest::load_instances(path, taxonomy).map(|(i, _)| i).map_err(|e| data_err(path)(e.to_string()))
}

fn load_matrix(path: &Path) -> Result<LabeledMatrix, CliError> {
    LabeledMatrix::read_text(read_file(path)?).map_err(|e| data_err(path)(e.to_string()))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    serde_json::from_reader(read_file(path)?).map_err(|e| data_err(path)(e.to_string()))
}

fn to_json<T: serde::Serialize>(value: &T) -> Vec<u8> {
    let mut v = serde_json::to_vec_pretty(value).expect("serializable");
    v.push(b'\n');
    v
}

/// Parses `args` (including the program name), runs the verb and returns
/// the exit code. Errors and usage go to standard error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return e.code();
    }
    match dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.code()
        }
    }
}

/// `GAB_THREADS` caps the worker pool.
fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("GAB_THREADS") else { return Ok(()) };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::Usage(format!("GAB_THREADS must be a positive integer, found {v:?}")))?;
    // A pool set up earlier in the process (tests) keeps its size.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn objects(list: Vec<String>) -> BTreeSet<String> {
    list.into_iter().map(|o| o.trim().to_string()).filter(|o| !o.is_empty()).collect()
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Ingest { input, taxonomy, out, exclude_objects, report_out } => {
            let tax = load_taxonomy(taxonomy.as_deref())?;
            let (inst, report) = ingest::load_instances(&input, &tax).map_err(|e| data_err(&input)(e.to_string()))?;
            let kept = ingest::exclude_objects(&inst, &objects(exclude_objects));
            let mut w = create_file(&out)?;
            ingest::write_instances_csv(&mut w, &kept, &tax).map_err(|e| data_err(&out)(e.to_string()))?;
            w.flush().map_err(|e| data_err(&out)(e.to_string()))?;
            eprintln!(
                "{} records, {} dropped, {} instances kept, {} action labels",
                report.input_records,
                report.dropped(),
                kept.len(),
                report.action_labels
            );
            if let Some(p) = report_out {
                write_file(&p, &to_json(&report))?;
            }
            Ok(())
        }
        Command::MakeSynthetic { preset, spec, seed, taxonomy, out, spec_out } => {
            let tax = load_taxonomy(taxonomy.as_deref())?;
            let spec: SyntheticSpec = match (preset, spec) {
                (Some(p), _) => p.spec(seed, &tax),
                (None, Some(path)) => SyntheticSpec { seed, ..read_json(&path)? },
                (None, None) => return Err(CliError::Usage("one of --preset or --spec is required".into())),
            };
            let inst = ingest::generate_synthetic(&spec, &tax).map_err(|e| CliError::Data(e.to_string()))?;
            let mut w = create_file(&out)?;
            ingest::write_instances_csv(&mut w, &inst, &tax).map_err(|e| data_err(&out)(e.to_string()))?;
            w.flush().map_err(|e| data_err(&out)(e.to_string()))?;
            if let Some(p) = spec_out {
                write_file(&p, &to_json(&spec))?;
            }
            Ok(())
        }
        Command::Encode {
            instances,
            taxonomy,
            subset,
            level,
            target,
            variant,
            filters,
            exclude_objects,
            out,
            columns_out,
        } => {
            let tax = load_taxonomy(taxonomy.as_deref())?;
            let inst = load_instances(&instances, &tax)?;
            let enc = Encoding {
                subset,
                level,
                target,
                filters,
                sequence_variant: variant,
                exclude_objects: objects(exclude_objects),
            };
            let encoded = bench::encode_dataset(&enc, &inst, &tax).map_err(|e| match e {
                bench::BenchError::InvalidSpec(m) => CliError::Usage(m),
                other => data_err(&instances)(other.to_string()),
            })?;
            let mut w = create_file(&out)?;
            encoded.matrix.write_text(&mut w).map_err(|e| data_err(&out)(e.to_string()))?;
            w.flush().map_err(|e| data_err(&out)(e.to_string()))?;
            if let Some(p) = columns_out {
                let mut text = encoded.columns.join("\n");
                text.push('\n');
                write_file(&p, text.as_bytes())?;
            }
            Ok(())
        }
        Command::Train { matrix, classifier, config, seed, out } => {
            let m = load_matrix(&matrix)?;
            let cfg: TrainConfig = match &config {
                Some(p) => read_json(p)?,
                None => TrainConfig::default(),
            };
            cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
            if classifier == ClassifierKind::Ensemble {
                return Err(CliError::Usage("the ensemble is not trained on its own; use bench".into()));
            }
            let model = ovo::train_classifier(classifier, &m.features, &m.labels, &cfg, seed)
                .map_err(|e| data_err(&matrix)(e.to_string()))?;
            let mut w = create_file(&out)?;
            ModelFile::new(classifier, model).write(&mut w).map_err(|e| data_err(&out)(e.to_string()))?;
            w.flush().map_err(|e| data_err(&out)(e.to_string()))?;
            Ok(())
        }
        Command::Predict { model, matrix, out } => {
            let mf = ModelFile::read(read_file(&model)?).map_err(|e| data_err(&model)(e.to_string()))?;
            let m = load_matrix(&matrix)?;
            if m.features.cols() != mf.n_features {
                return Err(data_err(&matrix)(format!(
                    "{} columns but the model expects {}",
                    m.features.cols(),
                    mf.n_features
                )));
            }
            let preds = mf.model.predict_with_confidence(&m.features).map_err(|e| data_err(&matrix)(e.to_string()))?;
            let classes = mf.model.classes();
            let mut w = csv::Writer::from_writer(create_file(&out)?);
            let werr = |e: csv::Error| data_err(&out)(e.to_string());
            w.write_record(["row", "prediction", "confidence", "label"]).map_err(werr)?;
            for (r, (c, conf)) in preds.iter().enumerate() {
                w.write_record([r.to_string(), classes[*c].clone(), format!("{conf:.6}"), m.labels[r].clone()])
                    .map_err(werr)?;
            }
            w.flush().map_err(|e| data_err(&out)(e.to_string()))?;
            Ok(())
        }
        Command::Bench { grid, data, taxonomy, out, seed } => {
            let mut spec: GridSpec = read_json(&grid)?;
            spec.seed = seed;
            if let Some(d) = data {
                spec.dataset = Some(DatasetRef::Csv { path: d });
            }
            let tax = load_taxonomy(taxonomy.as_deref())?;
            let dataset = spec.dataset.clone().ok_or_else(|| {
                CliError::Usage(format!("{} names no dataset; pass --data", grid.display()))
            })?;
            let inst = dataset.load(&tax).map_err(|e| CliError::Data(e.to_string()))?;
            let results = bench::run_grid(&spec, &inst, &tax).map_err(|e| data_err(&grid)(e.to_string()))?;
            fs::create_dir_all(&out).map_err(|e| data_err(&out)(e.to_string()))?;
            write_file(&out.join("results.json"), &to_json(&results))?;
            write_file(&out.join("results.csv"), &render_report(&results, ReportFormat::Csv))?;
            write_file(&out.join("results.md"), &render_report(&results, ReportFormat::Markdown))?;
            Ok(())
        }
        Command::Report { results, format, out } => {
            let table: ResultTable = read_json(&results)?;
            if table.tables.is_empty() {
                return Err(data_err(&results)("no tables to render".into()));
            }
            let bytes = render_report(&table, format);
            match out {
                Some(p) => write_file(&p, &bytes),
                None => std::io::stdout().write_all(&bytes).map_err(|e| CliError::Data(e.to_string())),
            }
        }
    }
}
