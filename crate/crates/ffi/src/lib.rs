//! C interface to the benchmark library.
//!
//! Objects cross the boundary as opaque handles that the caller frees with
//! the matching `*_free` function. Every fallible call returns a
//! [`GabStatus`]; on failure the message is kept per thread and read with
//! [`gab_last_error`]. Strings returned through out-parameters are freed
//! with [`gab_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use gab_core::bench::{self, BenchError, Encoding, GridSpec, Level, ResultTable};
use gab_core::domain::{Instance, Taxonomy};
use gab_core::encode::{AttributeSubset, SequenceVariant, Target};
use gab_core::ingest::{self, SyntheticPreset};
use gab_core::learn::{ClassifierKind, TrainConfig};
use gab_core::matrix::LabeledMatrix;
use gab_core::ovo::{self, ModelFile, MultiClassPredictor};
use gab_core::report::{render_report, ReportFormat};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GabStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// An argument value was rejected.
    InvalidArgument = 3,
    /// A file could not be read or written.
    Io = 4,
    /// Input data was malformed or inconsistent.
    Data = 5,
    /// Training or evaluation failed.
    Compute = 6,
    /// The library panicked; the message says where.
    Panic = 7,
}

/// Cleaned instances together with their taxonomy.
pub struct GabDataset {
    instances: Vec<Instance>,
    taxonomy: Taxonomy,
}

/// Encoded feature rows with one label each.
pub struct GabMatrix {
    matrix: LabeledMatrix,
}

/// A trained classifier.
pub struct GabModel {
    file: ModelFile,
    names: Vec<CString>,
}

/// Results of an experiment grid.
pub struct GabResults {
    results: ResultTable,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes replaced");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(GabStatus, String);

type Outcome<T> = Result<T, Failure>;

fn fail<T>(status: GabStatus, msg: impl Into<String>) -> Outcome<T> {
    Err(Failure(status, msg.into()))
}

/// Runs `f`, turning failures and panics into a status plus last error.
fn guard(f: impl FnOnce() -> Outcome<()>) -> GabStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            GabStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            GabStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Outcome<&'a str> {
    if p.is_null() {
        return fail(GabStatus::NullArgument, format!("{what} is null"));
    }
    CStr::from_ptr(p).to_str().or_else(|_| fail(GabStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn opt_text<'a>(p: *const c_char, what: &str) -> Outcome<Option<&'a str>> {
    if p.is_null() {
        Ok(None)
    } else {
        text(p, what).map(Some)
    }
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Outcome<&'a T> {
    p.as_ref().ok_or_else(|| Failure(GabStatus::NullArgument, format!("{what} is null")))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Outcome<()> {
    if out.is_null() {
        return fail(GabStatus::NullArgument, "output pointer is null");
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn put_string(out: *mut *mut c_char, s: String) -> Outcome<()> {
    if out.is_null() {
        return fail(GabStatus::NullArgument, "output pointer is null");
    }
    let c = CString::new(s).or_else(|_| fail(GabStatus::Data, "output contains a nul byte"))?;
    *out = c.into_raw();
    Ok(())
}

fn parse<T: std::str::FromStr>(s: &str) -> Outcome<T>
where
    T::Err: std::fmt::Display,
{
    s.parse().map_err(|e: T::Err| Failure(GabStatus::InvalidArgument, e.to_string()))
}

fn load_taxonomy(path: Option<&str>) -> Outcome<Taxonomy> {
    match path {
        None => Ok(Taxonomy::builtin()),
        Some(p) => Taxonomy::load(Path::new(p)).map_err(|e| Failure(GabStatus::Io, e.to_string())),
    }
}

fn bench_failure(e: BenchError) -> Failure {
    match e {
        BenchError::InvalidSpec(m) => Failure(GabStatus::InvalidArgument, m),
        other => Failure(GabStatus::Compute, other.to_string()),
    }
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next call into the library from this thread.
#[no_mangle]
pub extern "C" fn gab_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn gab_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Frees a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn gab_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Reads and cleans a canonical CSV. `taxonomy_path` may be null for the
/// built-in taxonomy.
///
/// # Safety
/// String arguments must be null or nul-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gab_dataset_load_csv(
    path: *const c_char,
    taxonomy_path: *const c_char,
    out: *mut *mut GabDataset,
) -> GabStatus {
    guard(|| {
        let path = text(path, "path")?;
        let taxonomy = load_taxonomy(opt_text(taxonomy_path, "taxonomy_path")?)?;
        let (instances, _) = ingest::load_instances(Path::new(path), &taxonomy)
            .map_err(|e| Failure(GabStatus::Data, format!("{path}: {e}")))?;
        put(out, GabDataset { instances, taxonomy })
    })
}

/// Generates a synthetic dataset from a named preset (`small`, `oracle`,
/// `bijective` or `clone`).
///
/// # Safety
/// `preset` must be nul-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gab_dataset_synthetic(preset: *const c_char, seed: u64, out: *mut *mut GabDataset) -> GabStatus {
    guard(|| {
        let preset: SyntheticPreset = parse(text(preset, "preset")?)?;
        let taxonomy = Taxonomy::builtin();
        let instances = ingest::generate_synthetic(&preset.spec(seed, &taxonomy), &taxonomy)
            .map_err(|e| Failure(GabStatus::Data, e.to_string()))?;
        put(out, GabDataset { instances, taxonomy })
    })
}

/// Number of instances, or 0 for null.
///
/// # Safety
/// `ds` must be null or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn gab_dataset_len(ds: *const GabDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.instances.len())
}

/// # Safety
/// `ds` must be null or a live dataset handle, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn gab_dataset_free(ds: *mut GabDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Encodes a dataset. `subset` is comma-separated (`object,grasp_fine`),
/// `level` is `instance` or `sequence`, `target` is `action`, `force` or
/// `constraint`. Sequence level uses the 34-column variant and its default
/// filters.
///
/// # Safety
/// `ds` must be a live handle, strings nul-terminated, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gab_encode(
    ds: *const GabDataset,
    subset: *const c_char,
    level: *const c_char,
    target: *const c_char,
    out: *mut *mut GabMatrix,
) -> GabStatus {
    guard(|| {
        let ds = handle(ds, "dataset")?;
        let enc = Encoding {
            subset: parse::<AttributeSubset>(text(subset, "subset")?)?,
            level: parse::<Level>(text(level, "level")?)?,
            target: parse::<Target>(text(target, "target")?)?,
            filters: None,
            sequence_variant: SequenceVariant::Literal34,
            exclude_objects: Default::default(),
        };
        let e = bench::encode_dataset(&enc, &ds.instances, &ds.taxonomy).map_err(bench_failure)?;
        put(out, GabMatrix { matrix: e.matrix })
    })
}

/// Reads a matrix in the `rows cols` text format.
///
/// # Safety
/// `path` must be nul-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gab_matrix_read(path: *const c_char, out: *mut *mut GabMatrix) -> GabStatus {
    guard(|| {
        let path = text(path, "path")?;
        let file = std::fs::File::open(path).map_err(|e| Failure(GabStatus::Io, format!("{path}: {e}")))?;
        let matrix = LabeledMatrix::read_text(std::io::BufReader::new(file))
            .map_err(|e| Failure(GabStatus::Data, format!("{path}: {e}")))?;
        put(out, GabMatrix { matrix })
    })
}

/// # Safety
/// `m` must be null or a live matrix handle.
#[no_mangle]
pub unsafe extern "C" fn gab_matrix_rows(m: *const GabMatrix) -> usize {
    m.as_ref().map_or(0, |m| m.matrix.features.rows())
}

/// # Safety
/// `m` must be null or a live matrix handle.
#[no_mangle]
pub unsafe extern "C" fn gab_matrix_cols(m: *const GabMatrix) -> usize {
    m.as_ref().map_or(0, |m| m.matrix.features.cols())
}

/// # Safety
/// `m` must be null or a live matrix handle, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn gab_matrix_free(m: *mut GabMatrix) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

fn model(file: ModelFile) -> Outcome<GabModel> {
    let names = file
        .model
        .classes()
        .iter()
        .map(|c| CString::new(c.as_str()))
        .collect::<Result<_, _>>()
        .or_else(|_| fail(GabStatus::Data, "class label contains a nul byte"))?;
    Ok(GabModel { file, names })
}

/// Trains `classifier` (`forest`, `mlp`, `svm-ovo`, `boost-ovo`,
/// `mlp-binary-ovo`) on the matrix. `config_json` may be null for defaults.
///
/// # Safety
/// `m` must be a live handle, strings null or nul-terminated, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gab_train(
    m: *const GabMatrix,
    classifier: *const c_char,
    config_json: *const c_char,
    seed: u64,
    out: *mut *mut GabModel,
) -> GabStatus {
    guard(|| {
        let m = handle(m, "matrix")?;
        let kind: ClassifierKind = parse(text(classifier, "classifier")?)?;
        let cfg: TrainConfig = match opt_text(config_json, "config_json")? {
            Some(j) => serde_json::from_str(j).map_err(|e| Failure(GabStatus::InvalidArgument, e.to_string()))?,
            None => TrainConfig::default(),
        };
        cfg.validate().map_err(|e| Failure(GabStatus::InvalidArgument, e.to_string()))?;
        let trained = ovo::train_classifier(kind, &m.matrix.features, &m.matrix.labels, &cfg, seed).map_err(|e| {
            let status = match e {
                ovo::OvoError::EnsembleNotTrainable => GabStatus::InvalidArgument,
                _ => GabStatus::Compute,
            };
            Failure(status, e.to_string())
        })?;
        put(out, model(ModelFile::new(kind, trained))?)
    })
}

/// # Safety
/// `path` must be nul-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gab_model_load(path: *const c_char, out: *mut *mut GabModel) -> GabStatus {
    guard(|| {
        let path = text(path, "path")?;
        let file = std::fs::File::open(path).map_err(|e| Failure(GabStatus::Io, format!("{path}: {e}")))?;
        let mf = ModelFile::read(std::io::BufReader::new(file))
            .map_err(|e| Failure(GabStatus::Data, format!("{path}: {e}")))?;
        put(out, model(mf)?)
    })
}

/// # Safety
/// `model` must be a live handle and `path` nul-terminated.
#[no_mangle]
pub unsafe extern "C" fn gab_model_save(model: *const GabModel, path: *const c_char) -> GabStatus {
    guard(|| {
        let model = handle(model, "model")?;
        let path = text(path, "path")?;
        let file = std::fs::File::create(path).map_err(|e| Failure(GabStatus::Io, format!("{path}: {e}")))?;
        model.file.write(std::io::BufWriter::new(file)).map_err(|e| Failure(GabStatus::Io, format!("{path}: {e}")))
    })
}

/// # Safety
/// `model` must be null or a live model handle.
#[no_mangle]
pub unsafe extern "C" fn gab_model_n_classes(model: *const GabModel) -> usize {
    model.as_ref().map_or(0, |m| m.names.len())
}

/// Label of class `index`, owned by the model; null when out of range.
///
/// # Safety
/// `model` must be null or a live model handle.
#[no_mangle]
pub unsafe extern "C" fn gab_model_class(model: *const GabModel, index: usize) -> *const c_char {
    model.as_ref().and_then(|m| m.names.get(index)).map_or(ptr::null(), |c| c.as_ptr())
}

/// Predicts every row of `m`. `classes` and `confidences` must each hold
/// `gab_matrix_rows(m)` elements; `confidences` may be null.
///
/// # Safety
/// Handles must be live and the output buffers large enough.
#[no_mangle]
pub unsafe extern "C" fn gab_model_predict(
    model: *const GabModel,
    m: *const GabMatrix,
    classes: *mut usize,
    confidences: *mut f64,
) -> GabStatus {
    guard(|| {
        let model = handle(model, "model")?;
        let m = handle(m, "matrix")?;
        if classes.is_null() {
            return fail(GabStatus::NullArgument, "classes is null");
        }
        if m.matrix.features.cols() != model.file.n_features {
            return fail(
                GabStatus::InvalidArgument,
                format!("matrix has {} columns but the model expects {}", m.matrix.features.cols(), model.file.n_features),
            );
        }
        let preds = model
            .file
            .model
            .predict_with_confidence(&m.matrix.features)
            .map_err(|e| Failure(GabStatus::Compute, e.to_string()))?;
        for (r, (c, conf)) in preds.into_iter().enumerate() {
            *classes.add(r) = c;
            if !confidences.is_null() {
                *confidences.add(r) = conf;
            }
        }
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a live model handle, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn gab_model_free(model: *mut GabModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Runs a grid given as JSON. With `ds` null the grid's own dataset is
/// loaded. `seed` replaces the grid's split seed.
///
/// # Safety
/// `grid_json` must be nul-terminated, `ds` null or live, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gab_bench_run(
    grid_json: *const c_char,
    ds: *const GabDataset,
    seed: u64,
    out: *mut *mut GabResults,
) -> GabStatus {
    guard(|| {
        let mut grid: GridSpec = serde_json::from_str(text(grid_json, "grid_json")?)
            .map_err(|e| Failure(GabStatus::InvalidArgument, e.to_string()))?;
        grid.seed = seed;
        let owned;
        let (instances, taxonomy) = match ds.as_ref() {
            Some(d) => (&d.instances, &d.taxonomy),
            None => {
                let taxonomy = Taxonomy::builtin();
                let dataset =
                    grid.dataset.as_ref().ok_or_else(|| Failure(GabStatus::InvalidArgument, "the grid names no dataset".into()))?;
                let instances = dataset.load(&taxonomy).map_err(|e| Failure(GabStatus::Data, e.to_string()))?;
                owned = (instances, taxonomy);
                (&owned.0, &owned.1)
            }
        };
        let results = bench::run_grid(&grid, instances, taxonomy).map_err(bench_failure)?;
        put(out, GabResults { results })
    })
}

/// Renders results as `csv`, `markdown` or `json` into a new string.
///
/// # Safety
/// `results` must be live, `format` nul-terminated, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gab_results_render(
    results: *const GabResults,
    format: *const c_char,
    out: *mut *mut c_char,
) -> GabStatus {
    guard(|| {
        let r = handle(results, "results")?;
        let text = match text(format, "format")? {
            "json" => serde_json::to_string_pretty(&r.results).expect("results serialize"),
            other => {
                let f: ReportFormat = parse(other)?;
                String::from_utf8(render_report(&r.results, f)).expect("reports are UTF-8")
            }
        };
        put_string(out, text)
    })
}

/// # Safety
/// `results` must be null or a live handle, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn gab_results_free(results: *mut GabResults) {
    if !results.is_null() {
        drop(Box::from_raw(results));
    }
}
