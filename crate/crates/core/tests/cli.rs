use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn gab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gab")).args(args).output().expect("run gab")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn unknown_flag_prints_usage_and_exits_one() {
    let o = gab(&["ingest", "--nope"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("Usage"), "{}", stderr(&o));
    assert_eq!(gab(&["dance"]).status.code(), Some(1));
    assert_eq!(gab(&["--help"]).status.code(), Some(0));
}

#[test]
fn missing_taxonomy_exits_two_with_path() {
    let dir = tempfile::tempdir().unwrap();
    let tax = dir.path().join("no-such-taxonomy.tsv");
    let o = gab(&["ingest", "--input", "x.csv", "--taxonomy", p(&tax), "--out", p(&dir.path().join("o"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("no-such-taxonomy.tsv"), "{}", stderr(&o));
}

#[test]
fn stochastic_verbs_require_a_seed() {
    let o = gab(&["make-synthetic", "--preset", "small", "--out", "x.csv"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--seed"));
}

#[test]
fn pipeline_round_trip_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let d = |n: &str| dir.path().join(n);
    let ok = |o: Output| assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    ok(gab(&["make-synthetic", "--preset", "small", "--seed", "4", "--out", p(&d("raw.csv")), "--spec-out", p(&d("spec.json"))]));
    ok(gab(&["make-synthetic", "--spec", p(&d("spec.json")), "--seed", "4", "--out", p(&d("raw2.csv"))]));
    assert_eq!(fs::read(d("raw.csv")).unwrap(), fs::read(d("raw2.csv")).unwrap());

    ok(gab(&["ingest", "--input", p(&d("raw.csv")), "--out", p(&d("clean.csv")), "--exclude-objects", "towel", "--report-out", p(&d("clean.json"))]));
    let clean = fs::read_to_string(d("clean.csv")).unwrap();
    assert!(clean.starts_with("subject,profession,video,sequence_id,instance_id,object,task,grasp"));
    assert!(!clean.contains(",towel,"));

    ok(gab(&["encode", "--instances", p(&d("clean.csv")), "--subset", "object,grasp_fine,constraint", "--out", p(&d("x.txt")), "--columns-out", p(&d("cols.txt"))]));
    let header = fs::read_to_string(d("x.txt")).unwrap();
    let cols: usize = header.lines().next().unwrap().split(' ').nth(1).unwrap().parse().unwrap();
    assert_eq!(fs::read_to_string(d("cols.txt")).unwrap().lines().count(), cols);

    ok(gab(&["encode", "--instances", p(&d("clean.csv")), "--level", "sequence", "--out", p(&d("s.txt"))]));
    let seq = fs::read_to_string(d("s.txt")).unwrap();
    assert_eq!(seq.lines().next().unwrap().split(' ').nth(1), Some("34"));
    let o = gab(&["encode", "--instances", p(&d("clean.csv")), "--level", "sequence", "--target", "force", "--out", p(&d("bad.txt"))]);
    assert_eq!(o.status.code(), Some(1));

    for run in ["a", "b"] {
        ok(gab(&["train", "--matrix", p(&d("x.txt")), "--classifier", "svm-ovo", "--seed", "9", "--out", p(&d(&format!("m{run}.json")))]));
        ok(gab(&["predict", "--model", p(&d(&format!("m{run}.json"))), "--matrix", p(&d("x.txt")), "--out", p(&d(&format!("p{run}.csv")))]));
    }
    assert_eq!(fs::read(d("ma.json")).unwrap(), fs::read(d("mb.json")).unwrap());
    assert_eq!(fs::read(d("pa.csv")).unwrap(), fs::read(d("pb.csv")).unwrap());
    let preds = fs::read_to_string(d("pa.csv")).unwrap();
    assert_eq!(preds.lines().next(), Some("row,prediction,confidence,label"));
    assert_eq!(preds.lines().count() - 1, header.lines().count() - 1);

    let o = gab(&["predict", "--model", p(&d("ma.json")), "--matrix", p(&d("s.txt")), "--out", p(&d("bad.csv"))]);
    assert_eq!(o.status.code(), Some(2));
    let o = gab(&["predict", "--model", p(&d("clean.json")), "--matrix", p(&d("x.txt")), "--out", p(&d("bad.csv"))]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bench_populates_the_results_directory() {
    let dir = tempfile::tempdir().unwrap();
    let d = |n: &str| dir.path().join(n);
    let grid = r#"{
        "name": "mini",
        "seed": 1,
        "dataset": {"synthetic": {"preset": "small", "seed": 2}},
        "config": {"forest": {"n_trees": 5}, "mlp": {"hidden": 8, "epochs": 20},
                   "binary_mlp": {"epochs": 10}, "svm": {"epochs": 10}, "boost": {"rounds": 10}},
        "tables": [
            {"id": "A", "title": "Mini", "ensemble": true, "columns": [
                {"name": "fine", "subset": ["object", "grasp_fine"]},
                {"name": "seq", "subset": ["object", "grasp_fine"], "level": "sequence"}
            ]}
        ]
    }"#;
    fs::write(d("grid.json"), grid).unwrap();
    for out in ["r1", "r2"] {
        let o = gab(&["bench", "--grid", p(&d("grid.json")), "--out", p(&d(out)), "--seed", "3"]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    for f in ["results.json", "results.csv", "results.md"] {
        assert_eq!(fs::read(d("r1").join(f)).unwrap(), fs::read(d("r2").join(f)).unwrap(), "{f}");
    }
    let md = fs::read_to_string(d("r1/results.md")).unwrap();
    assert!(md.starts_with("## Table A: Mini"));
    assert!(md.contains("Ensemble"));

    let o = gab(&["report", "--results", p(&d("r1/results.json")), "--format", "csv", "--out", p(&d("again.csv"))]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(fs::read(d("again.csv")).unwrap(), fs::read(d("r1/results.csv")).unwrap());
    let o = gab(&["report", "--results", p(&d("r1/results.json"))]);
    assert_eq!(String::from_utf8(o.stdout).unwrap(), md);

    let o = gab(&["bench", "--grid", p(&d("grid.json")), "--data", p(&d("missing.csv")), "--out", p(&d("r3")), "--seed", "3"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("missing.csv"));
}

#[test]
fn thread_cap_must_be_positive() {
    let o = Command::new(env!("CARGO_BIN_EXE_gab"))
        .args(["report", "--results", "x.json"])
        .env("GAB_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
}
