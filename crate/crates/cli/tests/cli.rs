use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pdstl::waveform::{write_waveforms_csv, Waveform};

fn pdstl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pdstl"))
        .args(args)
        .output()
        .expect("run pdstl")
}

fn ok(args: &[&str]) -> String {
    let out = pdstl(args);
    assert!(
        out.status.success(),
        "pdstl {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn fails(args: &[&str], code: i32) -> String {
    let out = pdstl(args);
    assert_eq!(out.status.code(), Some(code), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stderr).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A small, clearly separable corpus: 10 PD and 10 non-PD waveforms of 400 samples.
fn small_corpus(dir: &Path) -> PathBuf {
    let path = dir.join("corpus.csv");
    ok(&["synth", "--pd", "10", "--nonpd", "10", "--n-samples", "400", "--seed", "3", "--out", s(&path)]);
    path
}

const WINDOWS: &str = "2,10,50";

#[test]
fn synth_rejects_empty_request() {
    let dir = tempfile::tempdir().unwrap();
    let err = fails(&["synth", "--pd", "0", "--nonpd", "0", "--out", s(&dir.path().join("x.csv"))], 2);
    assert!(err.contains("empty corpus requested"), "{err}");
}

#[test]
fn synth_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    for format in ["csv", "pdwf"] {
        let a = dir.path().join(format!("a.{format}"));
        let b = dir.path().join(format!("b.{format}"));
        for p in [&a, &b] {
            ok(&["synth", "--pd", "5", "--nonpd", "5", "--n-samples", "256", "--seed", "9", "--format", format, "--out", s(p)]);
        }
        if format == "csv" {
            assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
        } else {
            let names: Vec<_> = std::fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
            assert_eq!(names.len(), 10);
            for n in names {
                assert_eq!(std::fs::read(a.join(&n)).unwrap(), std::fs::read(b.join(&n)).unwrap());
            }
        }
    }
}

#[test]
fn synth_manifest_counts() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.csv");
    let out = ok(&["synth", "--pd", "20", "--nonpd", "80", "--n-samples", "64", "--out", s(&path)]);
    let manifest: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(manifest["n_pd"], 20);
    assert_eq!(manifest["n_nonpd"], 80);
    let corpus = pdstl::waveform::read_corpus(&path).unwrap();
    assert_eq!(corpus.iter().filter(|w| w.label == Some(true)).count(), 20);
}

fn decompose_rows(path: &Path) -> Vec<[f64; 4]> {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,y,trend,seasonal,residual"));
    lines
        .map(|l| {
            let f: Vec<f64> = l.split(',').skip(1).map(|v| v.parse().unwrap()).collect();
            [f[0], f[1], f[2], f[3]]
        })
        .collect()
}

fn write_one(dir: &Path, name: &str, samples: Vec<f64>) -> PathBuf {
    let path = dir.join(name);
    let w = Waveform::new("w", 0, None, 50.0 * samples.len() as f64, samples).unwrap();
    write_waveforms_csv(&[w], &path).unwrap();
    path
}

#[test]
fn decompose_constant_and_periodic() {
    let dir = tempfile::tempdir().unwrap();
    let constant = write_one(dir.path(), "const.csv", vec![0.75; 200]);
    let out = dir.path().join("const_out.csv");
    ok(&["decompose", "--input", s(&constant), "--window", "20", "--out", s(&out)]);
    for r in decompose_rows(&out) {
        assert!(r[2].abs() < 1e-9, "seasonal {}", r[2]);
    }

    let period = 25;
    let y: Vec<f64> = (0..500)
        .map(|k| (std::f64::consts::TAU * k as f64 / period as f64).sin() as f32 as f64)
        .collect();
    let sine = write_one(dir.path(), "sine.csv", y.clone());
    let out = dir.path().join("sine_out.csv");
    ok(&["decompose", "--input", s(&sine), "--window", "25", "--out", s(&out)]);
    let rows = decompose_rows(&out);
    let rms = |v: &mut dyn Iterator<Item = f64>| {
        let (sum, n) = v.fold((0.0, 0), |(s, n), x| (s + x * x, n + 1));
        (sum / n as f64).sqrt()
    };
    let resid = rms(&mut rows.iter().map(|r| r[3]));
    let signal = rms(&mut y.iter().copied());
    assert!(resid < 0.01 * signal, "{resid} vs {signal}");
    for (r, &yk) in rows.iter().zip(&y) {
        assert_eq!(r[0], yk);
        assert_eq!(r[1] + r[2] + r[3], r[0]);
    }
}

#[test]
fn decompose_additivity_on_synthetic_waveform() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = small_corpus(dir.path());
    let out = dir.path().join("d.csv");
    ok(&["decompose", "--input", s(&corpus), "--window", "10", "--id", "wf-00000", "--out", s(&out)]);
    for r in decompose_rows(&out) {
        assert_eq!(r[1] + r[2] + r[3], r[0]);
    }
}

#[test]
fn decompose_rejects_short_waveform() {
    let dir = tempfile::tempdir().unwrap();
    let w = write_one(dir.path(), "short.csv", vec![0.0, 1.0, 0.0, -1.0, 0.5]);
    let err = fails(&["decompose", "--input", s(&w), "--window", "3", "--out", s(&dir.path().join("o.csv"))], 2);
    assert!(err.contains("too short"), "{err}");
}

#[test]
fn train_predict_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = small_corpus(dir.path());
    let model_a = dir.path().join("a.json");
    let model_b = dir.path().join("b.json");
    let report = dir.path().join("report.json");
    for m in [&model_a, &model_b] {
        let out = ok(&[
            "train", "--input", s(&corpus), "--windows", WINDOWS, "--kernel", "linear", "--c", "100",
            "--model-out", s(m), "--report", s(&report),
        ]);
        assert!(out.contains("training accuracy: 1.0000"), "{out}");
    }
    assert_eq!(std::fs::read(&model_a).unwrap(), std::fs::read(&model_b).unwrap());
    let r: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert!(r["macro"]["f1"].is_number());

    let preds = dir.path().join("p.csv");
    ok(&["predict", "--model", s(&model_a), "--input", s(&corpus), "--out", s(&preds)]);
    let text = std::fs::read_to_string(&preds).unwrap();
    let corpus_ws = pdstl::waveform::read_corpus(&corpus).unwrap();
    for (line, w) in text.lines().skip(1).zip(&corpus_ws) {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!(f[0], w.id);
        assert_eq!(f[2] == "1", w.label.unwrap(), "{line}");
    }

    let eval_out = ok(&["evaluate", "--predictions", s(&preds), "--labels", s(&corpus)]);
    assert!(eval_out.lines().any(|l| l.starts_with("Average") && l.trim_end().ends_with("1.00")), "{eval_out}");
}

#[test]
fn train_from_features_csv() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = small_corpus(dir.path());
    let features = dir.path().join("f.csv");
    ok(&["extract", "--input", s(&corpus), "--windows", WINDOWS, "--out", s(&features)]);
    let model = dir.path().join("m.json");
    ok(&["train", "--input", s(&features), "--kernel", "rbf", "--c", "10", "--model-out", s(&model)]);
    let preds = dir.path().join("p.csv");
    ok(&["predict", "--model", s(&model), "--input", s(&features), "--out", s(&preds)]);
    assert_eq!(std::fs::read_to_string(&preds).unwrap().lines().count(), 21);

    // A model trained on features cannot re-extract from waveforms.
    let err = fails(&["predict", "--model", s(&model), "--input", s(&corpus), "--out", s(&preds)], 2);
    assert!(err.contains("feature windows"), "{err}");
}

#[test]
fn extract_is_worker_independent() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = small_corpus(dir.path());
    let one = dir.path().join("one.csv");
    let two = dir.path().join("two.csv");
    ok(&["extract", "--workers", "1", "--input", s(&corpus), "--windows", WINDOWS, "--out", s(&one)]);
    ok(&["extract", "--workers", "3", "--input", s(&corpus), "--windows", WINDOWS, "--out", s(&two)]);
    assert_eq!(std::fs::read(&one).unwrap(), std::fs::read(&two).unwrap());
}

#[test]
fn train_validation_errors() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = small_corpus(dir.path());
    let model = dir.path().join("m.json");
    let err = fails(
        &["train", "--input", s(&corpus), "--windows", WINDOWS, "--kernel", "rbf", "--gamma", "0", "--model-out", s(&model)],
        2,
    );
    assert!(err.contains("gamma must be positive"), "{err}");

    let single = dir.path().join("single.csv");
    ok(&["synth", "--pd", "0", "--nonpd", "6", "--n-samples", "400", "--out", s(&single)]);
    let err = fails(&["train", "--input", s(&single), "--windows", WINDOWS, "--model-out", s(&model)], 2);
    assert!(err.contains("single-class"), "{err}");

    fails(
        &["train", "--input", s(&corpus), "--windows", WINDOWS, "--max-passes", "1", "--tol", "1e-12", "--c", "1000",
          "--model-out", s(&model)],
        3,
    );
    fails(&["train", "--input", s(&dir.path().join("missing.csv")), "--model-out", s(&model)], 1);
}

#[test]
fn predict_edge_cases() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = small_corpus(dir.path());
    let model = dir.path().join("m.json");
    ok(&["train", "--input", s(&corpus), "--windows", WINDOWS, "--model-out", s(&model)]);

    let preds = dir.path().join("p.csv");
    for (name, contents) in [("empty.csv", ""), ("header.csv", "id,phase,label,sample_rate_hz,n_samples\n")] {
        let input = dir.path().join(name);
        std::fs::write(&input, contents).unwrap();
        ok(&["predict", "--model", s(&model), "--input", s(&input), "--out", s(&preds)]);
        assert_eq!(std::fs::read_to_string(&preds).unwrap(), "id,decision_value,predicted_label\n");
    }

    let unlabeled = write_one(dir.path(), "u.csv", (0..400).map(|k| (k as f64 * 0.1).sin()).collect());
    assert!(std::fs::read_to_string(&unlabeled).unwrap().lines().nth(1).unwrap().contains(",-,"));
    ok(&["predict", "--model", s(&model), "--input", s(&unlabeled), "--out", s(&preds)]);
    assert_eq!(std::fs::read_to_string(&preds).unwrap().lines().count(), 2);

    let wrong = dir.path().join("wrong.csv");
    std::fs::write(&wrong, "id,label,f0,f1\na,1,0.5,0.5\n").unwrap();
    let err = fails(&["predict", "--model", s(&model), "--input", s(&wrong), "--out", s(&preds)], 2);
    assert!(err.contains("dimension mismatch"), "{err}");
}

fn write_preds_and_labels(dir: &Path, pairs: &[(bool, bool)]) -> (PathBuf, PathBuf) {
    let preds = dir.join("preds.csv");
    let labels = dir.join("labels.csv");
    let mut p = String::from("id,decision_value,predicted_label\n");
    let mut l = String::from("id,label\n");
    for (i, &(pred, label)) in pairs.iter().enumerate() {
        p.push_str(&format!("x{i},{},{}\n", if pred { 1.0 } else { -1.0 }, u8::from(pred)));
        l.push_str(&format!("x{i},{}\n", u8::from(label)));
    }
    std::fs::write(&preds, p).unwrap();
    std::fs::write(&labels, l).unwrap();
    (preds, labels)
}

#[test]
fn evaluate_tables() {
    let dir = tempfile::tempdir().unwrap();
    let perfect: Vec<(bool, bool)> = (0..10).map(|i| (i % 3 == 0, i % 3 == 0)).collect();
    let (p, l) = write_preds_and_labels(dir.path(), &perfect);
    let out = ok(&["evaluate", "--predictions", s(&p), "--labels", s(&l)]);
    for row in ["Non-PD Signals", "PD Signals", "Average"] {
        let line = out.lines().find(|x| x.starts_with(row)).unwrap();
        assert!(line.ends_with("1.00      1.00      1.00"), "{line}");
    }

    // Counts chosen so the PD row comes out near the linear-kernel table:
    // tp 83, fn 17, fp 41, tn 59.
    let mut pairs = Vec::new();
    pairs.extend(std::iter::repeat_n((true, true), 83));
    pairs.extend(std::iter::repeat_n((false, true), 17));
    pairs.extend(std::iter::repeat_n((true, false), 41));
    pairs.extend(std::iter::repeat_n((false, false), 59));
    let (p, l) = write_preds_and_labels(dir.path(), &pairs);
    let report_path = dir.path().join("r.json");
    ok(&["evaluate", "--predictions", s(&p), "--labels", s(&l), "--report", s(&report_path)]);
    let r: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    for m in ["precision", "recall", "f1"] {
        let a = r["per_class"]["PD"][m].as_f64().unwrap();
        let b = r["per_class"]["non-PD"][m].as_f64().unwrap();
        assert_eq!(r["macro"][m].as_f64().unwrap(), (a + b) / 2.0);
    }
    assert_eq!(r["confusion"]["tp"], 83);

    let (p, _) = write_preds_and_labels(dir.path(), &perfect);
    let other = dir.path().join("other.csv");
    std::fs::write(&other, "id,label\ny0,1\ny1,0\n").unwrap();
    let err = fails(&["evaluate", "--predictions", s(&p), "--labels", s(&other)], 2);
    assert!(err.contains("x0") && err.contains("y0"), "{err}");
}

#[test]
fn config_file_and_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = small_corpus(dir.path());
    let config = dir.path().join("config.json");
    std::fs::write(&config, r#"{"window_lengths":[2,10,50],"kernel":"linear","train":{"c":50.0,"tol":0.001,"max_passes":null,"seed":0}}"#).unwrap();
    let model = dir.path().join("m.json");
    ok(&["train", "--config", s(&config), "--input", s(&corpus), "--model-out", s(&model)]);
    let m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&model).unwrap()).unwrap();
    assert_eq!(m["kernel"]["kind"], "linear");
    assert_eq!(m["train_config"]["c"].as_f64(), Some(50.0));
    assert_eq!(m["features"]["window_lengths"], serde_json::json!([2, 10, 50]));

    ok(&["train", "--config", s(&config), "--kernel", "poly", "--degree", "2", "--input", s(&corpus), "--model-out", s(&model)]);
    let m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&model).unwrap()).unwrap();
    assert_eq!(m["kernel"]["kind"], "polynomial");
    assert_eq!(m["kernel"]["degree"], 2);

    std::fs::write(&config, r#"{"no_such_key":1}"#).unwrap();
    fails(&["train", "--config", s(&config), "--input", s(&corpus), "--model-out", s(&model)], 1);
}

#[test]
fn small_pipeline_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        ok(&["pipeline", "--out-dir", s(out), "--pd", "8", "--nonpd", "24", "--n-samples", "2000"]);
    }
    for f in ["model.json", "report.json", "predictions.csv", "features.csv", "corpus.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let pdwf = dir.path().join("pdwf");
    ok(&["pipeline", "--format", "pdwf", "--out-dir", s(&pdwf), "--pd", "8", "--nonpd", "24", "--n-samples", "2000"]);
    assert!(pdwf.join("corpus").join("wf-00000.pdwf").is_file());
    let r: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(pdwf.join("report.json")).unwrap()).unwrap();
    assert!(r["macro"]["f1"].is_number());
}
