use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn edgecolor(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_edgecolor"))
        .args(args)
        .current_dir(cwd)
        .env_remove("EDGECOLOR_OUT_DIR")
        .output()
        .expect("spawn edgecolor")
}

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn verify_rejects_corrupted_coloring() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&edgecolor(&["generate", "--family", "cycle", "--n", "6", "--out", "g.json"], d));
    ok(&edgecolor(&["run", "--graph", "g.json", "--algorithm", "randomized", "--eps", "0.5", "--out-dir", "r"], d));
    ok(&edgecolor(&["verify", "--graph", "g.json", "--coloring", "r/coloring.json"], d));

    let text = fs::read_to_string(d.join("r/coloring.json")).unwrap();
    let mut doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    let c0 = doc["colors"][0].clone();
    doc["colors"][1] = c0;
    fs::write(d.join("bad.json"), doc.to_string()).unwrap();
    let out = edgecolor(&["verify", "--graph", "g.json", "--coloring", "bad.json"], d);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("edges 0 and 1"), "{err}");
}

#[test]
fn bench_is_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = serde_json::json!({
        "schema": "edgecolor.bench/1",
        "instances": [{ "kind": "cycle", "n": 9 }, { "kind": "star_lb", "delta": 3, "reps": 2 }],
        "n": [60],
        "delta": [4, 5],
        "eps": [0.3, 0.5],
        "seeds": [1, 2],
        "algorithms": ["randomized", "deterministic", "congest-pipeline"]
    });
    fs::write(d.join("bench.json"), cfg.to_string()).unwrap();
    ok(&edgecolor(&["bench", "--config", "bench.json", "--out", "a.csv"], d));
    ok(&edgecolor(&["bench", "--config", "bench.json", "--out", "b.csv"], d));
    let a = fs::read(d.join("a.csv")).unwrap();
    assert_eq!(a, fs::read(d.join("b.csv")).unwrap());
    let text = String::from_utf8(a).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("# edgecolor-bench v1"));
    assert!(lines.next().unwrap().starts_with("instance,n,m,delta,eps,seed,algorithm,schedule,proper,colors_used"));
    assert_eq!(lines.count(), 4 * 2 * 2 * 3);
    assert!(!text.contains(",false,"));
}

#[test]
fn deterministic_run_on_star_lb_adversarial_is_proper() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&edgecolor(&["generate", "--family", "star-lb", "--delta", "3", "--out", "g.json"], d));
    let line = ok(&edgecolor(
        &["run", "--graph", "g.json", "--algorithm", "deterministic", "--order", "adversarial", "--out-dir", "r"],
        d,
    ));
    let summary: serde_json::Value = serde_json::from_str(line.trim()).unwrap();
    assert_eq!(summary["proper"], true);
    let colors = summary["colors_used"].as_u64().unwrap();
    assert!((3..=5).contains(&colors), "colors_used {colors}");
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("r/summary.json")).unwrap()).unwrap();
    assert_eq!(report["report"]["colors_used"].as_u64(), Some(colors));
    let decisions = fs::read_to_string(d.join("r/decisions.jsonl")).unwrap();
    assert_eq!(decisions.lines().count(), 9);
}

#[test]
fn run_outputs_repeat_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = serde_json::json!({
        "schema": "edgecolor.experiment/1",
        "instance": { "generator": { "kind": "random_max_deg", "n": 80, "delta": 6 }, "seed": 3 },
        "algorithm": "deterministic",
        "eps": 0.4,
        "schedule": { "builder": "conflict" },
        "log_reads": true
    });
    fs::write(d.join("exp.json"), cfg.to_string()).unwrap();
    for out in ["x", "y"] {
        ok(&edgecolor(&["run", "--config", "exp.json", "--out-dir", out], d));
    }
    for f in ["coloring.json", "decisions.jsonl", "summary.json"] {
        assert_eq!(fs::read(d.join("x").join(f)).unwrap(), fs::read(d.join("y").join(f)).unwrap(), "{f}");
    }
}

#[test]
fn audit_flags_out_of_radius_reads() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&edgecolor(&["generate", "--family", "path", "--n", "12", "--out", "g.json"], d));
    ok(&edgecolor(
        &["run", "--graph", "g.json", "--algorithm", "deterministic", "--log-reads", "--out-dir", "r"],
        d,
    ));
    ok(&edgecolor(&["audit", "--graph", "g.json", "--log", "r/access_log.jsonl", "--ell", "5"], d));
    let out = edgecolor(&["audit", "--graph", "g.json", "--log", "r/access_log.jsonl", "--ell", "1"], d);
    assert!(!out.status.success());
}

#[test]
fn malformed_config_fails() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("exp.json"), r#"{"schema":"edgecolor.experiment/1","algorithm":"greedy"}"#).unwrap();
    let out = edgecolor(&["run", "--config", "exp.json"], d);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("malformed experiment config"));
}

#[test]
fn env_var_sets_output_dir() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&edgecolor(&["generate", "--family", "path", "--n", "5", "--out", "g.json"], d));
    let out = Command::new(env!("CARGO_BIN_EXE_edgecolor"))
        .args(["run", "--graph", "g.json", "--algorithm", "congest-pipeline", "--mode", "congest", "--bandwidth-bits", "20"])
        .current_dir(d)
        .env("EDGECOLOR_OUT_DIR", "from-env")
        .output()
        .unwrap();
    ok(&out);
    assert!(d.join("from-env/coloring.json").exists());
    assert!(d.join("from-env/rounds.csv").exists());
}
