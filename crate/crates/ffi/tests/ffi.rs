use std::ffi::{CStr, CString};
use std::ptr;

use gab_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    let p = gab_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_string()
}

#[test]
fn train_predict_and_reload() {
    unsafe {
        let mut ds = ptr::null_mut();
        assert_eq!(gab_dataset_synthetic(c("small").as_ptr(), 3, &mut ds), GabStatus::Ok);
        assert!(gab_dataset_len(ds) > 0);
        let mut m = ptr::null_mut();
        let st = gab_encode(ds, c("object,grasp_fine").as_ptr(), c("instance").as_ptr(), c("action").as_ptr(), &mut m);
        assert_eq!(st, GabStatus::Ok);
        let rows = gab_matrix_rows(m);
        assert_eq!(rows, gab_dataset_len(ds));

        let mut model = ptr::null_mut();
        let cfg = c(r#"{"forest": {"n_trees": 10}}"#);
        assert_eq!(gab_train(m, c("forest").as_ptr(), cfg.as_ptr(), 1, &mut model), GabStatus::Ok);
        let mut classes = vec![usize::MAX; rows];
        let mut conf = vec![-1.0; rows];
        assert_eq!(gab_model_predict(model, m, classes.as_mut_ptr(), conf.as_mut_ptr()), GabStatus::Ok);
        let n = gab_model_n_classes(model);
        assert!(classes.iter().all(|&k| k < n));
        assert!(conf.iter().all(|&p| (0.0..=1.0).contains(&p)));
        assert!(!gab_model_class(model, 0).is_null());
        assert!(gab_model_class(model, n).is_null());

        let dir = tempfile::tempdir().unwrap();
        let path = c(dir.path().join("m.json").to_str().unwrap());
        assert_eq!(gab_model_save(model, path.as_ptr()), GabStatus::Ok);
        let mut again = ptr::null_mut();
        assert_eq!(gab_model_load(path.as_ptr(), &mut again), GabStatus::Ok);
        let mut classes2 = vec![0; rows];
        assert_eq!(gab_model_predict(again, m, classes2.as_mut_ptr(), ptr::null_mut()), GabStatus::Ok);
        assert_eq!(classes, classes2);

        gab_model_free(again);
        gab_model_free(model);
        gab_matrix_free(m);
        gab_dataset_free(ds);
    }
}

#[test]
fn errors_set_status_and_message() {
    unsafe {
        let mut ds = ptr::null_mut();
        assert_eq!(gab_dataset_synthetic(c("huge").as_ptr(), 3, &mut ds), GabStatus::InvalidArgument);
        assert!(last_error().contains("huge"));
        assert!(ds.is_null());

        assert_eq!(gab_dataset_synthetic(ptr::null(), 3, &mut ds), GabStatus::NullArgument);
        let st = gab_dataset_load_csv(c("/nonexistent/data.csv").as_ptr(), ptr::null(), &mut ds);
        assert_eq!(st, GabStatus::Data);
        assert!(last_error().contains("/nonexistent/data.csv"));
        let st = gab_dataset_load_csv(c("x.csv").as_ptr(), c("/nonexistent/tax.tsv").as_ptr(), &mut ds);
        assert_eq!(st, GabStatus::Io);
        assert!(last_error().contains("/nonexistent/tax.tsv"));

        assert_eq!(gab_dataset_synthetic(c("small").as_ptr(), 1, &mut ds), GabStatus::Ok);
        assert!(gab_last_error().is_null());
        let mut m = ptr::null_mut();
        let st = gab_encode(ds, c("object").as_ptr(), c("sequence").as_ptr(), c("force").as_ptr(), &mut m);
        assert_eq!(st, GabStatus::InvalidArgument);
        let mut model = ptr::null_mut();
        assert_eq!(gab_train(ptr::null(), c("forest").as_ptr(), ptr::null(), 0, &mut model), GabStatus::NullArgument);
        gab_dataset_free(ds);
        gab_dataset_free(ptr::null_mut());
        gab_string_free(ptr::null_mut());
    }
}

#[test]
fn bench_renders_reports() {
    let grid = c(r#"{
        "name": "ffi", "seed": 0,
        "dataset": {"synthetic": {"preset": "small", "seed": 1}},
        "classifiers": ["forest", "mlp"],
        "config": {"forest": {"n_trees": 5}, "mlp": {"hidden": 8, "epochs": 10}},
        "tables": [{"id": "T", "title": "t", "columns": [{"name": "fine", "subset": ["object", "grasp_fine"]}]}]
    }"#);
    unsafe {
        let mut r = ptr::null_mut();
        assert_eq!(gab_bench_run(grid.as_ptr(), ptr::null(), 4, &mut r), GabStatus::Ok, "{}", last_error());
        for fmt in ["csv", "markdown", "json"] {
            let mut s = ptr::null_mut();
            assert_eq!(gab_results_render(r, c(fmt).as_ptr(), &mut s), GabStatus::Ok);
            let text = CStr::from_ptr(s).to_str().unwrap().to_string();
            assert!(!text.is_empty());
            gab_string_free(s);
        }
        let mut s = ptr::null_mut();
        assert_eq!(gab_results_render(r, c("pdf").as_ptr(), &mut s), GabStatus::InvalidArgument);
        gab_results_free(r);
    }
    let v = unsafe { CStr::from_ptr(gab_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_compiles_as_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/gab.h");
    let src = std::env::temp_dir().join("gab_header_check.c");
    std::fs::write(&src, format!("#include \"{header}\"\nint main(void) {{ return GAB_STATUS_OK; }}\n")).unwrap();
    let Ok(out) = std::process::Command::new("cc").args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only"]).arg(&src).output()
    else {
        eprintln!("no C compiler; skipping");
        return;
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
