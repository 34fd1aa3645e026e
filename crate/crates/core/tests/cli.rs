use std::path::Path;
use std::process::{Command, Output};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fairbayes")).args(args).current_dir(dir).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, body: &str) {
    std::fs::write(dir.join(name), body).unwrap();
}

fn kfold_file(dir: &Path) {
    let mut s = String::from("fold,group,tp,tn,fp,fn\n");
    for k in 0..10 {
        s.push_str(&format!("{k},g0,10,10,10,10\n{k},g1,12,9,8,11\n"));
    }
    write(dir, "kfold.csv", &s);
}

#[test]
fn holdout_posterior_writes_two_columns() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "cm.csv", "group,tp,tn,fp,fn\ng0,30,25,10,8\ng1,22,30,9,12\n");
    let o =
        run(tmp.path(), &["posterior", "--input", "cm.csv", "--metrics", "accuracy,eop", "-T", "1000", "--out", "out"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(tmp.path().join("out/samples.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("accuracy,eop"));
    assert_eq!(lines.count(), 1000);
    let summary: serde_json::Value =
        serde_json::from_slice(&std::fs::read(tmp.path().join("out/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["summaries"].as_array().unwrap().len(), 2);
}

#[test]
fn kfold_posterior_logs_effective_scale() {
    let tmp = tempfile::tempdir().unwrap();
    kfold_file(tmp.path());
    let o = run(tmp.path(), &["posterior", "--input", "kfold.csv", "--rho", "fixed", "-T", "500", "--out", "out"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("scale = 1/1.9"), "{}", stderr(&o));
    let summary: serde_json::Value =
        serde_json::from_slice(&std::fs::read(tmp.path().join("out/summary.json")).unwrap()).unwrap();
    let tp = summary["model"]["observed"][0]["tp"].as_f64().unwrap();
    assert!((tp - 100.0 / 1.9).abs() < 1e-12);
}

#[test]
fn predictions_from_config() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "pred.csv", "y_true,y_pred,group\nyes,yes,a\nno,yes,a\nyes,no,b\nno,no,b\nyes,yes,b\n");
    write(
        tmp.path(),
        "config.json",
        r#"{"labels": {"positive": "yes", "negative": "no"}, "reference_group": "b", "samples": 200, "seed": 4}"#,
    );
    let o = run(
        tmp.path(),
        &["posterior", "--input", "pred.csv", "--config", "config.json", "--metrics", "dp", "--out", "o"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let summary: serde_json::Value =
        serde_json::from_slice(&std::fs::read(tmp.path().join("o/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["reference_group"], "b");
    assert_eq!(summary["seed"], 4);
}

#[test]
fn missing_group_column_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "pred.csv", "y_true,y_pred,grp\n1,1,a\n");
    let o = run(tmp.path(), &["posterior", "--input", "pred.csv", "--out", "out"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("group"));
    assert!(!tmp.path().join("out/samples.csv").exists());
}

#[test]
fn failure_leaves_no_partial_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    write(
        tmp.path(),
        "s.csv",
        &(String::from("x\n") + &(0..500).map(|i| format!("{}\n", (i % 37) as f64 / 37.0)).collect::<String>()),
    );
    // The JSON is written first; the mask path cannot be created, so the
    // command fails and must remove the JSON again.
    let o = run(tmp.path(), &["hdr", "--samples", "s.csv", "--out", "h.json", "--mask", "missing/dir/m.csv"]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(!tmp.path().join("h.json").exists());
    let names: Vec<_> = std::fs::read_dir(tmp.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(names.len(), 1, "{names:?}");
}

#[test]
fn compare_identical_inputs_is_equivalent() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "cm.csv", "group,tp,tn,fp,fn\ng0,3000,2500,1000,800\ng1,2200,3000,900,1200\n");
    let o =
        run(tmp.path(), &["posterior", "--input", "cm.csv", "--metrics", "accuracy,eop", "-T", "2000", "--out", "p"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = run(tmp.path(), &["compare", "--a", "p/samples.csv", "--b", "p/samples.csv", "--out", "c"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(tmp.path().join("c/report.json")).unwrap()).unwrap();
    assert_eq!(report["p_equivalent"], 1.0);
    assert!(tmp.path().join("c/gaps.csv").exists());

    let o =
        run(tmp.path(), &["compare", "--a", "p/samples.csv", "--b", "p/samples.csv", "--rope", "0.01", "--out", "d"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn compare_rejects_metric_mismatch() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "a.csv", "accuracy,eop\n0.5,0.1\n");
    write(tmp.path(), "b.csv", "accuracy,dp\n0.5,0.1\n");
    let o = run(tmp.path(), &["compare", "--a", "a.csv", "--b", "b.csv", "--out", "c"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("differ"));
}

#[test]
fn hdr_command_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    kfold_file(tmp.path());
    let o = run(
        tmp.path(),
        &["posterior", "--input", "kfold.csv", "--metrics", "accuracy,eop", "-T", "5000", "--out", "p"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let o = run(tmp.path(), &["hdr", "--samples", "p/samples.csv", "--out", "h.json", "--mask", "m.csv"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let mask = std::fs::read_to_string(tmp.path().join("m.csv")).unwrap();
    let rows: Vec<&str> = mask.lines().collect();
    assert_eq!(rows.len(), 257);
    assert!(rows[1..].iter().all(|r| r.split(',').count() == 256));
    let h: serde_json::Value = serde_json::from_slice(&std::fs::read(tmp.path().join("h.json")).unwrap()).unwrap();
    assert!(h["area"].as_f64().unwrap() > 0.0);

    let o = run(tmp.path(), &["hdr", "--samples", "p/samples.csv", "--coverage", "1.5", "--out", "bad.json"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!tmp.path().join("bad.json").exists());
}

#[test]
fn estimate_rho_self_reference() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = r#"{"groups": [{"label": "a", "size": 150, "tpr": 0.85, "tnr": 0.8},
                              {"label": "b", "size": 150, "tpr": 0.75, "tnr": 0.8}], "d": 2, "seed": 1}"#;
    write(tmp.path(), "data.json", spec);
    let o = run(
        tmp.path(),
        &["estimate-rho", "--dataset", "data.json", "-K", "10", "-M", "3", "--reference-rho", "interval"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["estimate"]["strategy"], "relative_interval");
    assert!((v["r_over"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert!(v["sigma_over_reference"].as_f64().is_some());

    let o = run(tmp.path(), &["estimate-rho", "--dataset", "data.json", "-M", "0"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn coverage_with_constant_classifier() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = r#"{"groups": [{"label": "a", "size": 100, "tpr": 0.8, "tnr": 0.8},
                              {"label": "b", "size": 100, "tpr": 0.7, "tnr": 0.8}], "d": 1, "seed": 2}"#;
    write(tmp.path(), "data.json", spec);
    let o = run(
        tmp.path(),
        &[
            "experiment",
            "coverage",
            "--dataset",
            "data.json",
            "--classifier",
            "bernoulli:0.8,seed=3",
            "-K",
            "5",
            "--repeats",
            "20",
            "--rho-strategy",
            "fixed,interval",
            "-T",
            "20000",
            "--out",
            "cov",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value =
        serde_json::from_slice(&std::fs::read(tmp.path().join("cov/coverage.json")).unwrap()).unwrap();
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    for r in rows {
        assert_eq!(r["pct_res"], 100.0);
    }
    assert!(rows[0]["area"].as_f64().unwrap() > rows[1]["area"].as_f64().unwrap());
    let table = std::fs::read_to_string(tmp.path().join("cov/coverage.csv")).unwrap();
    assert!(table.starts_with("strategy,rho,area,pct_res\n"));
}

#[test]
fn usage_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(run(tmp.path(), &["posterior"]).status.code(), Some(2));
    assert_eq!(run(tmp.path(), &["frobnicate"]).status.code(), Some(2));
    let o = run(tmp.path(), &["posterior", "--input", "nope.csv", "--out", "o"]);
    assert_ne!(o.status.code(), Some(0));
}
