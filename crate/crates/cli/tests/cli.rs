use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_veilpulse")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn error_json(out: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&out.stderr);
    serde_json::from_str(text.trim()).unwrap_or_else(|e| panic!("stderr is not JSON ({e}): {text}"))
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn synth(root: &Path) {
    ok(&["synth", "--hr", "72,96", "--frames", "200", "--noise-sigma", "1", "--out", p(root)]);
}

#[test]
fn keyspace_prints_four_decimals() {
    assert_eq!(ok(&["keyspace", "--n", "64"]).trim(), "89.1034");
}

#[test]
fn usage_errors_exit_two_with_json() {
    let out = run(&["keyspace"]);
    assert_eq!(out.status.code(), Some(2));
    let err = error_json(&out);
    assert_eq!(err["error"]["kind"], "usage");
    assert_eq!(err["error"]["exit_code"], 2);

    let out = run(&["perturb", "--in", ".", "--method", "patch:3", "--out", "x"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(error_json(&out)["error"]["message"].as_str().unwrap().contains("patch"));
}

#[test]
fn missing_input_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["estimate", "--in", p(&dir.path().join("absent")), "--method", "pos", "--out", p(dir.path())]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(error_json(&out)["error"]["exit_code"], 3);
}

#[test]
fn help_exits_zero() {
    assert!(run(&["--help"]).status.success());
}

#[test]
fn keygen_writes_seeded_key_and_record() {
    let dir = tempfile::tempdir().unwrap();
    let key = dir.path().join("key.json");
    ok(&["keygen", "--seed", "7", "--n", "16", "--out", p(&key)]);
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&key).unwrap()).unwrap();
    assert_eq!(v["n"], 16);
    assert_eq!(v["algorithm"], "splitmix64-fisheryates-v1");
    let record: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("key.run.json")).unwrap()).unwrap();
    assert_eq!(record["tool"], "veilpulse-cli");
    assert_eq!(record["invocation"]["command"], "keygen");
}

#[test]
fn synth_layout() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("data");
    synth(&root);
    for id in ["v00_hr72", "v01_hr96"] {
        let v = root.join(id);
        for f in ["landmarks.jsonl", "ppg.csv", "manifest.json"] {
            assert!(v.join(f).is_file(), "{id}/{f}");
        }
        assert_eq!(fs::read_dir(v.join("frames")).unwrap().count(), 200);
    }
    assert!(root.join("run.json").is_file());
}

#[test]
fn shuffled_pipeline_recovers_heart_rate() {
    let dir = tempfile::tempdir().unwrap();
    let (root, pert, est) = (dir.path().join("data"), dir.path().join("pert"), dir.path().join("est"));
    synth(&root);
    ok(&[
        "perturb",
        "--in",
        p(&root),
        "--landmarks",
        "landmarks.jsonl",
        "--method",
        "roi+sh+b",
        "--master-seed",
        "5",
        "--out",
        p(&pert),
    ]);
    assert!(pert.join("v00_hr72/key.json").is_file());
    ok(&["estimate", "--in", p(&pert), "--method", "chrom", "--out", p(&est)]);
    let report = dir.path().join("report.json");
    ok(&["evaluate", "--pred-root", p(&est), "--gt-root", p(&root), "--report", p(&report)]);
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert!(v["mae"].as_f64().unwrap() < 2.0, "{v}");
    assert_eq!(v["per_video"].as_array().unwrap().len(), 2);

    let hr: serde_json::Value =
        serde_json::from_str(&ok(&["hr", "--signal", p(&est.join("v00_hr72/signal.csv"))])).unwrap();
    assert!((hr["bpm"].as_f64().unwrap() - 72.0).abs() < 3.0, "{hr}");
}

#[test]
fn roi_without_landmarks_copies_frames() {
    let dir = tempfile::tempdir().unwrap();
    let (root, out) = (dir.path().join("data"), dir.path().join("copy"));
    synth(&root);
    ok(&["perturb", "--in", p(&root.join("v00_hr72")), "--method", "roi", "--out", p(&out)]);
    let a = root.join("v00_hr72/frames/000000.png");
    let b = out.join("frames/000000.png");
    assert_eq!(fs::read(a).unwrap(), fs::read(b).unwrap());
}

#[test]
fn instahide_writes_real_valued_clip() {
    let dir = tempfile::tempdir().unwrap();
    let (root, out, est) = (dir.path().join("data"), dir.path().join("ih"), dir.path().join("est"));
    synth(&root);
    ok(&["perturb", "--in", p(&root), "--landmarks", "landmarks.jsonl", "--method", "instahide", "--out", p(&out)]);
    let bytes = fs::read(out.join("v00_hr72/clip.rppgclip")).unwrap();
    assert_eq!(&bytes[..8], b"RPPGCLIP");
    assert!(out.join("v00_hr72/clip.json").is_file());
    ok(&["estimate", "--in", p(&out), "--method", "pos", "--out", p(&est)]);
    assert!(est.join("v01_hr96/signal.csv").is_file());
}

#[test]
fn replay_reproduces_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let key = dir.path().join("k.json");
    ok(&["keygen", "--seed", "3", "--n", "64", "--out", p(&key)]);
    let first = fs::read(&key).unwrap();
    let record = dir.path().join("saved.json");
    fs::copy(dir.path().join("k.run.json"), &record).unwrap();
    fs::remove_file(&key).unwrap();
    ok(&["replay", "--run", p(&record), "--jobs", "3"]);
    assert_eq!(fs::read(&key).unwrap(), first);
}

#[test]
fn explicit_run_json_for_stdout_command() {
    let dir = tempfile::tempdir().unwrap();
    let record = dir.path().join("ks.json");
    ok(&["keyspace", "--n", "10", "--run-json", p(&record)]);
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&record).unwrap()).unwrap();
    assert_eq!(v["invocation"]["n"], 10);
    assert!(v.get("jobs").is_none());
}
