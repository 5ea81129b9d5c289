use std::path::Path;
use std::process::{Command, Output};

use crossauth::netsim::{AdversaryConfig, AdversaryKind, Scenario};
use crossauth::protocol::MessageKind;
use serde_json::Value;

fn crossauth(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crossauth"))
        .current_dir(dir)
        .args(args)
        .env_remove("CROSSAUTH_SEED")
        .output()
        .unwrap()
}

fn ok(o: &Output) -> String {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn labels(csv: &str) -> std::collections::BTreeSet<String> {
    csv.lines().skip(1).map(|l| l.split(',').next().unwrap().to_string()).collect()
}

#[test]
fn dataset_labels_determinism_and_force() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = crossauth(d, &["dataset", "--scenario", "fixed-skew", "--devices", "10", "--frames", "20", "--out", "a.csv"]);
    ok(&o);
    assert!(String::from_utf8_lossy(&o.stderr).contains("seed 1"));
    let a = std::fs::read_to_string(d.join("a.csv")).unwrap();
    assert_eq!(labels(&a).len(), 10);
    ok(&crossauth(d, &["dataset", "--devices", "10", "--frames", "20", "--out", "b.csv"]));
    assert_eq!(a, std::fs::read_to_string(d.join("b.csv")).unwrap());

    let again = crossauth(d, &["dataset", "--devices", "30", "--frames", "10", "--out", "a.csv"]);
    assert_eq!(again.status.code(), Some(3));
    assert_eq!(a, std::fs::read_to_string(d.join("a.csv")).unwrap());
    ok(&crossauth(d, &["dataset", "--devices", "30", "--frames", "10", "--out", "a.csv", "--force"]));
    assert_eq!(labels(&std::fs::read_to_string(d.join("a.csv")).unwrap()).len(), 30);

    let other = crossauth(d, &["--seed", "2", "dataset", "--devices", "10", "--frames", "20"]);
    assert_ne!(ok(&other), a);
    assert_eq!(crossauth(d, &["dataset", "--scenario", "nope"]).status.code(), Some(2));
}

#[test]
fn train_and_eval_reports() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&crossauth(d, &["dataset", "--devices", "10", "--frames", "100", "--out", "ds.csv"]));
    for algo in ["knn", "lr"] {
        let model = format!("{algo}.json");
        let report = format!("{algo}-report.json");
        let conf = format!("{algo}-confusion.csv");
        ok(&crossauth(
            d,
            &["train", "--dataset", "ds.csv", "--algo", algo, "--out", &model, "--report", &report, "--confusion", &conf],
        ));
        let r: Value = serde_json::from_slice(&std::fs::read(d.join(&report)).unwrap()).unwrap();
        for key in ["accuracy", "recall_mean", "precision_mean", "f1_mean", "confusion", "classes"] {
            assert!(r.get(key).is_some(), "{algo} report lacks {key}");
        }
        assert_eq!(r["confusion"].as_array().unwrap().len(), 10);
        let c = std::fs::read_to_string(d.join(&conf)).unwrap();
        assert!(c.starts_with("true\\predicted,"));
        // eval re-derives the held-out split from the model's seed
        let e: Value = serde_json::from_str(&ok(&crossauth(d, &["eval", "--model", &model, "--dataset", "ds.csv"]))).unwrap();
        assert_eq!(e["accuracy"], r["accuracy"]);
        assert_eq!(e["confusion"], r["confusion"]);
    }
    let knn: Value = serde_json::from_slice(&std::fs::read(d.join("knn-report.json")).unwrap()).unwrap();
    assert!(knn["accuracy"].as_f64().unwrap() > 0.7);
    assert_eq!(crossauth(d, &["train", "--dataset", "ds.csv", "--k", "4"]).status.code(), Some(2));
    assert_eq!(crossauth(d, &["train", "--dataset", "missing.csv"]).status.code(), Some(3));
    assert_eq!(crossauth(d, &["train"]).status.code(), Some(2));
}

fn spread(seed: u64) -> Scenario {
    let mut s = Scenario::honest(3, 20, seed);
    for (r, u) in s.roster.iter_mut().zip([-150.0, 0.0, 150.0]) {
        r.cfo_normalized_units = u;
    }
    s.registration_frames = 40;
    s
}

#[test]
fn demo_summaries_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("honest.json"), serde_json::to_vec(&spread(3)).unwrap()).unwrap();
    let mut replay = spread(3);
    replay.adversary = Some(AdversaryConfig::new(
        AdversaryKind::Replay { message: MessageKind::M3, via_own_radio: true },
        "dev01",
        20,
        2,
    ));
    std::fs::write(d.join("replay.json"), serde_json::to_vec(&replay).unwrap()).unwrap();

    let s = ok(&crossauth(d, &["demo", "--scenario-file", "honest.json", "--out", "h.jsonl"]));
    assert!(!s.contains("rejected:"), "{s}");
    assert!(s.contains("66 honest messages, 0 rejected"), "{s}");
    let trace = std::fs::read_to_string(d.join("h.jsonl")).unwrap();
    assert_eq!(trace.lines().count(), 66 + 1);
    ok(&crossauth(d, &["demo", "--scenario-file", "honest.json", "--out", "h2.jsonl"]));
    assert_eq!(trace, std::fs::read_to_string(d.join("h2.jsonl")).unwrap());

    let s = ok(&crossauth(d, &["demo", "--scenario-file", "replay.json", "--out", "r.jsonl"]));
    assert_eq!(s.matches("M3 rejected").count(), 2, "{s}");
    assert_eq!(s.matches("(adversarial)").count(), 2, "{s}");
    let t = std::fs::read_to_string(d.join("r.jsonl")).unwrap();
    assert_eq!(t.matches("\"reason\":\"stale-timestamp\"").count(), 2);

    let mut bad = spread(3);
    bad.schedule[1].actor = "ghost".into();
    std::fs::write(d.join("bad.json"), serde_json::to_vec(&bad).unwrap()).unwrap();
    assert_eq!(crossauth(d, &["demo", "--scenario-file", "bad.json"]).status.code(), Some(2));
}

#[test]
fn overhead_table_rows_values_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let a = ok(&crossauth(d, &["overhead", "--n-max", "1000", "--d", "10", "--check"]));
    let lines: Vec<&str> = a.lines().collect();
    assert_eq!(lines[0], "scheme,n,d,time_ms,bytes");
    assert_eq!(lines.len(), 1 + 5 * 1000);
    for row in ["QiXie,1,10,8.979,661", "Xiang,1,10,11.948,240", "Chen,1000,10,44676.0,400000", "Ours,1000,10,7.545,45744", "Ours,1,10,7.446,420"] {
        assert!(lines.contains(&row), "missing {row}");
    }
    assert_eq!(a, ok(&crossauth(d, &["overhead", "--n-max", "1000", "--d", "10"])));
    let j: Value = serde_json::from_str(&ok(&crossauth(d, &["overhead", "--n-max", "3", "--format", "json"]))).unwrap();
    assert_eq!(j.as_array().unwrap().len(), 15);
    assert_eq!(crossauth(d, &["overhead", "--n-max", "0"]).status.code(), Some(2));
    assert_eq!(crossauth(d, &["overhead", "--format", "xml"]).status.code(), Some(2));
}

#[test]
fn attack_report_has_intervals() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let a = ok(&crossauth(d, &["attack", "--trials", "2", "--injections", "40"]));
    let r: Value = serde_json::from_str(&a).unwrap();
    assert_eq!(r["detection"]["n"], 80);
    let lo = r["detection"]["lo"].as_f64().unwrap();
    let hi = r["detection"]["hi"].as_f64().unwrap();
    assert!(lo <= r["detection"]["rate"].as_f64().unwrap() && hi >= lo);
    assert_eq!(a, ok(&crossauth(d, &["attack", "--trials", "2", "--injections", "40"])));
}

#[test]
fn config_file_env_and_bench() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("cfg.json"), r#"{"devices": 4, "frames": 10, "seed": 9}"#).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_crossauth"))
        .current_dir(d)
        .args(["--config", "cfg.json", "dataset"])
        .env("CROSSAUTH_DEVICES", "5")
        .output()
        .unwrap();
    let csv = ok(&o);
    assert_eq!(labels(&csv).len(), 5);
    assert!(String::from_utf8_lossy(&o.stderr).contains("seed 9"));
    std::fs::write(d.join("typo.json"), r#"{"devics": 4}"#).unwrap();
    assert_eq!(crossauth(d, &["--config", "typo.json", "dataset"]).status.code(), Some(2));
    assert_eq!(crossauth(d, &["bench", "--iterations", "0"]).status.code(), Some(2));
    let b: Value = serde_json::from_str(&ok(&crossauth(d, &["bench", "--iterations", "5"]))).unwrap();
    assert!(b["measured"]["t_ecc_mul"].as_f64().unwrap() > 0.0);
    assert_eq!(b["reference"]["t_ecc_mul"], 1.489);
}
