use std::path::Path;
use std::process::{Command, Output};

fn rrvalue(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rrvalue")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn shipped(file: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/data").join(file).display().to_string()
}

#[test]
fn ingest_shipped_lexicon() {
    let o = rrvalue(&["ingest"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("OK: 2 genders, 2509/317 totals"));
    let o = rrvalue(&["ingest", &shipped("talpiot_lexicon.csv")]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn ingest_rejects_bad_tables() {
    let dir = tempfile::tempdir().unwrap();
    let bad = [
        "gender,generic,rendition,source,count\nmale,__TOTAL__,,all_sources,10\nmale,X,,all_sources,-1\n",
        "gender,generic,rendition,source,count\nmale,X,,all_sources,1\n",
        "gender,generic,rendition,source,count\nmale,__TOTAL__,,all_sources,10\nmale,X,,all_sources,1\nmale,X,,all_sources,1\n",
        "gender,generic\nmale\n",
    ];
    for (i, text) in bad.iter().enumerate() {
        let path = dir.path().join(format!("bad{i}.csv"));
        std::fs::write(&path, text).unwrap();
        let o = rrvalue(&["ingest", path.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(2), "case {i}");
        assert!(String::from_utf8_lossy(&o.stderr).starts_with("error: "));
    }
    let o = rrvalue(&["ingest", dir.path().join("missing.csv").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn input_errors_exit_two() {
    assert_eq!(rrvalue(&["--config", "/nonexistent.json", "rr"]).status.code(), Some(2));
    assert_eq!(rrvalue(&["--workers", "0", "rr"]).status.code(), Some(2));
    assert_eq!(rrvalue(&["posterior", "--alpha", "nope"]).status.code(), Some(2));
    assert_eq!(rrvalue(&["tail", "--threshold", "abc"]).status.code(), Some(2));
    assert_eq!(rrvalue(&["no-such-command"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.json");
    std::fs::write(&path, r#"{"unknown_section": 1}"#).unwrap();
    assert_eq!(rrvalue(&["--config", path.to_str().unwrap(), "rr"]).status.code(), Some(2));
}

#[test]
fn rr_in_three_formats() {
    let table = stdout(&rrvalue(&["rr"]));
    assert!(table.contains("0.0053") && table.contains("Discarded") && table.contains("1.4493e-8"));
    let csv = stdout(&rrvalue(&["rr", "--format", "csv"]));
    assert_eq!(csv.lines().count(), 9);
    assert!(csv.contains("37/6974"));
    let json: serde_json::Value = serde_json::from_str(&stdout(&rrvalue(&["rr", "--format", "json"]))).unwrap();
    assert_eq!(json["rr"]["cluster_rr_exact"], "1398590935/96503906751050832");
    assert_eq!(json["manifest"]["resolved_config"]["inference"]["alpha_variants"][0]["value"], "1/1821000");
}

#[test]
fn tail_prints_assumptions_and_agreement() {
    let o = rrvalue(&["tail", "--method", "exact", "--method", "mc", "--samples", "200000"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("assumptions:"));
    assert!(text.contains("James: listed without a frequency"));
    assert!(text.contains("agreement:"));
    assert!(text.contains("1.9810e12"));
}

#[test]
fn out_directory_holds_report_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let o = rrvalue(&["--seed", "11", "--out", dir.path().to_str().unwrap(), "simulate", "--tombs", "2000"]);
    assert_eq!(o.status.code(), Some(0));
    for f in ["simulate.json", "simulate.csv", "manifest.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let m: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["seed"], 11);
    assert_eq!(m["resolved_config"]["simulation"]["n_tombs"], 2000);
    assert_eq!(m["config_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn config_with_relative_lexicon() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::copy(shipped("talpiot_lexicon.csv"), dir.path().join("names.csv")).unwrap();
    let mut config: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(shipped("talpiot.json")).unwrap()).unwrap();
    config["lexicon"]["path"] = "names.csv".into();
    let path = dir.path().join("analysis.json");
    std::fs::write(&path, serde_json::to_string_pretty(&config).unwrap()).unwrap();
    let o = rrvalue(&["--config", path.to_str().unwrap(), "rr", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let json: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(json["rr"]["cluster_rr_exact"], "1398590935/96503906751050832");
    assert!(json["manifest"]["lexicon_path"].as_str().unwrap().ends_with("names.csv"));
}

#[test]
fn posterior_and_sensitivity_reports() {
    let text = stdout(&rrvalue(&["posterior"]));
    assert!(text.contains("0.9994") && text.contains("0.9988") && text.contains("0.9940"));
    assert!(text.contains("reconstructed"));
    let csv = stdout(&rrvalue(&["sensitivity", "--format", "csv"]));
    assert_eq!(csv.lines().count(), 6);
    assert!(csv.contains("6974/37"));
}

#[test]
fn worker_count_does_not_change_output() {
    let run = |w: &str| stdout(&rrvalue(&["--workers", w, "tail", "--method", "mc", "--samples", "100000", "--format", "json"]));
    assert_eq!(run("1"), run("3"));
}

fn edited_config(dir: &Path, edit: impl FnOnce(&mut serde_json::Value)) -> String {
    let mut config: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(shipped("talpiot.json")).unwrap()).unwrap();
    edit(&mut config);
    let path = dir.join("edited.json");
    std::fs::write(&path, serde_json::to_string(&config).unwrap()).unwrap();
    path.display().to_string()
}

#[test]
fn bad_slot_reference_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = edited_config(dir.path(), |c| {
        c["configuration"]["edges"].as_array_mut().unwrap().push(serde_json::json!({"father": 99, "son": 0}));
    });
    let o = rrvalue(&["--config", &path, "rr"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(o.stdout.is_empty());
}

#[test]
fn all_other_configuration_scores_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = edited_config(dir.path(), |c| {
        c["lists"]["male"]["entries"] = serde_json::json!([]);
        c["lists"]["female"]["entries"] = serde_json::json!([]);
    });
    let o = rrvalue(&["--config", &path, "rr", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let json: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(json["rr"]["cluster_rr_exact"], "1/1");
}
