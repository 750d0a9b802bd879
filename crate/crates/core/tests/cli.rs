use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn spectraflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spectraflow"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(out: Output) -> Output {
    assert!(
        out.status.success(),
        "exit {:?}\nstderr:\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Small synthetic dataset so the whole chain runs in a couple of seconds.
fn synth_into(dir: &Path) {
    ok(spectraflow(&[
        "synth",
        "--samples-per-condition",
        "15",
        "--wavelengths",
        "120",
        "--planted",
        "4",
        "--seed",
        "3",
        "--out",
        s(dir),
    ]));
}

fn train_into(data: &Path, out: &Path) {
    ok(spectraflow(&[
        "train",
        "--spectra",
        s(&data.join("spectra.csv")),
        "--metadata",
        s(&data.join("metadata.csv")),
        "--set",
        "folds=5",
        "--set",
        "repartitions=3",
        "--out",
        s(out),
    ]));
}

fn read_column(path: &Path, col: usize) -> Vec<f64> {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    rdr.records().map(|r| r.unwrap()[col].parse().unwrap()).collect()
}

#[test]
fn synth_train_predict_evaluate() {
    let tmp = TempDir::new().unwrap();
    let (data, model_dir, eval_dir) = (tmp.path().join("data"), tmp.path().join("m"), tmp.path().join("e"));
    for d in [&data, &model_dir, &eval_dir] {
        fs::create_dir_all(d).unwrap();
    }
    synth_into(&data);
    for f in ["spectra.csv", "metadata.csv", "planted.csv"] {
        assert!(data.join(f).exists(), "{f}");
    }

    let out = ok(spectraflow(&[
        "train",
        "--spectra",
        s(&data.join("spectra.csv")),
        "--metadata",
        s(&data.join("metadata.csv")),
        "--set",
        "folds=5",
        "--set",
        "repartitions=3",
        "--out",
        s(&model_dir),
    ]));
    let log = String::from_utf8_lossy(&out.stderr);
    for stage in ["[normalize]", "[boost]", "[select]", "[curve]", "[knee]", "[fit]"] {
        assert!(log.contains(stage), "missing {stage} in\n{log}");
    }
    for f in ["model.json", "variance_curve.csv", "knee_report.csv"] {
        assert!(model_dir.join(f).exists(), "{f}");
    }
    let model = model_dir.join("model.json");

    ok(spectraflow(&[
        "predict",
        "--spectra",
        s(&data.join("spectra.csv")),
        "--metadata",
        s(&data.join("metadata.csv")),
        "--model",
        s(&model),
        "--out",
        s(&eval_dir),
    ]));
    ok(spectraflow(&[
        "evaluate",
        "--spectra",
        s(&data.join("spectra.csv")),
        "--metadata",
        s(&data.join("metadata.csv")),
        "--model",
        s(&model),
        "--all-samples",
        "--out",
        s(&eval_dir),
    ]));

    // predict and evaluate must agree sample by sample
    let predicted = read_column(&eval_dir.join("predictions.csv"), 1);
    let points = read_column(&eval_dir.join("points.csv"), 1);
    assert_eq!(predicted.len(), 60);
    assert_eq!(predicted, points);

    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(eval_dir.join("report.json")).unwrap()).unwrap();
    for key in ["a", "b", "r_square", "rmse_fit", "rmse_pred", "residual_mean", "residual_sd", "bounds", "n", "units"] {
        assert!(report.get(key).is_some(), "report.json lacks {key}");
    }
    assert_eq!(report["n"], 60);
    for f in ["metrics.csv", "residual_histogram.csv"] {
        assert!(eval_dir.join(f).exists(), "{f}");
    }

    let again = tmp.path().join("again");
    let out = ok(spectraflow(&["report", "--input", s(&eval_dir.join("report.json")), "--out", s(&again)]));
    assert!(String::from_utf8_lossy(&out.stdout).contains("rmse_pred"));
    assert_eq!(
        fs::read(eval_dir.join("points.csv")).unwrap(),
        fs::read(again.join("points.csv")).unwrap()
    );
}

#[test]
fn default_evaluation_uses_dynamic_samples() {
    let tmp = TempDir::new().unwrap();
    synth_into(tmp.path());
    train_into(tmp.path(), tmp.path());
    ok(spectraflow(&[
        "evaluate",
        "--spectra",
        s(&tmp.path().join("spectra.csv")),
        "--metadata",
        s(&tmp.path().join("metadata.csv")),
        "--model",
        s(&tmp.path().join("model.json")),
        "--out",
        s(tmp.path()),
    ]));
    assert_eq!(read_column(&tmp.path().join("points.csv"), 0).len(), 15);
}

#[test]
fn training_is_byte_reproducible() {
    let tmp = TempDir::new().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    fs::create_dir_all(&a).unwrap();
    fs::create_dir_all(&b).unwrap();
    synth_into(tmp.path());
    train_into(tmp.path(), &a);
    train_into(tmp.path(), &b);
    for f in ["model.json", "variance_curve.csv", "knee_report.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f} differs");
    }
}

#[test]
fn select_writes_importances_and_trace() {
    let tmp = TempDir::new().unwrap();
    synth_into(tmp.path());
    ok(spectraflow(&[
        "select",
        "--spectra",
        s(&tmp.path().join("spectra.csv")),
        "--metadata",
        s(&tmp.path().join("metadata.csv")),
        "--out",
        s(tmp.path()),
    ]));
    assert_eq!(read_column(&tmp.path().join("importances.csv"), 2).len(), 120);
    let trace = read_column(&tmp.path().join("loss_trace.csv"), 1);
    assert_eq!(trace.len(), 101);
    assert!(trace.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
    assert!(!read_column(&tmp.path().join("selected.csv"), 0).is_empty());
}

#[test]
fn normalize_writes_row_statistics() {
    let tmp = TempDir::new().unwrap();
    synth_into(tmp.path());
    ok(spectraflow(&[
        "normalize",
        "--spectra",
        s(&tmp.path().join("spectra.csv")),
        "--out",
        s(tmp.path()),
    ]));
    assert_eq!(read_column(&tmp.path().join("normalization.csv"), 2).len(), 60);
    let sidecar = fs::read_to_string(tmp.path().join("normalization.csv")).unwrap();
    assert!(sidecar.starts_with("sample_id,location,scale\n1,"));
    let text = fs::read_to_string(tmp.path().join("normalized.csv")).unwrap();
    assert_eq!(text.lines().count(), 61);
}

#[test]
fn dynamic_only_metadata_is_an_input_error() {
    let tmp = TempDir::new().unwrap();
    synth_into(tmp.path());
    let meta = fs::read_to_string(tmp.path().join("metadata.csv")).unwrap();
    let spectra = fs::read_to_string(tmp.path().join("spectra.csv")).unwrap();
    let mut meta_lines = meta.lines();
    let mut spectra_lines = spectra.lines();
    let mut meta_out = vec![meta_lines.next().unwrap().to_string()];
    let mut spectra_out = vec![spectra_lines.next().unwrap().to_string()];
    for (m, sp) in meta_lines.zip(spectra_lines) {
        if m.contains("Dynamic") {
            meta_out.push(m.into());
            spectra_out.push(sp.into());
        }
    }
    fs::write(tmp.path().join("dyn_meta.csv"), meta_out.join("\n")).unwrap();
    fs::write(tmp.path().join("dyn_spectra.csv"), spectra_out.join("\n")).unwrap();

    let out = spectraflow(&[
        "train",
        "--spectra",
        s(&tmp.path().join("dyn_spectra.csv")),
        "--metadata",
        s(&tmp.path().join("dyn_meta.csv")),
        "--out",
        s(tmp.path()),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("empty training partition"));
    assert!(!tmp.path().join("model.json").exists());
}

#[test]
fn empty_spectra_file_is_an_input_error() {
    let tmp = TempDir::new().unwrap();
    let empty = tmp.path().join("empty.csv");
    fs::write(&empty, "").unwrap();
    let out = spectraflow(&["normalize", "--spectra", s(&empty), "--out", s(tmp.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("empty file"));
}

#[test]
fn axis_unit_mismatch_is_rejected() {
    let tmp = TempDir::new().unwrap();
    synth_into(tmp.path());
    train_into(tmp.path(), tmp.path());
    let out = spectraflow(&[
        "predict",
        "--spectra",
        s(&tmp.path().join("spectra.csv")),
        "--axis-unit",
        "wavenumber",
        "--model",
        s(&tmp.path().join("model.json")),
        "--out",
        s(tmp.path()),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unit mismatch"));
    assert!(!tmp.path().join("predictions.csv").exists());
}

#[test]
fn bad_config_fails_before_reading_data() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("run.cfg");
    fs::write(&cfg, "learn_rate = 2\n").unwrap();
    let out = spectraflow(&["--config", s(&cfg), "train", "--spectra", "/nonexistent.csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("learn_rate"));
}

#[test]
fn missing_file_is_an_io_error() {
    let tmp = TempDir::new().unwrap();
    let out = spectraflow(&["normalize", "--spectra", s(&tmp.path().join("nope.csv")), "--out", s(tmp.path())]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn average_collapses_replicates() {
    let tmp = TempDir::new().unwrap();
    let spectra = tmp.path().join("reps.csv");
    fs::write(&spectra, "900,902,904\n1,2,3\n3,4,5\n10,10,10\n").unwrap();
    let ids = tmp.path().join("ids.txt");
    fs::write(&ids, "A\nA\nB\n").unwrap();
    ok(spectraflow(&["average", "--spectra", s(&spectra), "--ids", s(&ids), "--out", s(tmp.path())]));
    let averaged = fs::read_to_string(tmp.path().join("averaged.csv")).unwrap();
    assert_eq!(averaged.lines().collect::<Vec<_>>(), ["900,902,904", "2,3,4", "10,10,10"]);
    assert_eq!(fs::read_to_string(tmp.path().join("averaged_ids.txt")).unwrap(), "A\nB\n");
}
