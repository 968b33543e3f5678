use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn tb(out_dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tripbench"))
        .args(args)
        .env("TRIPBENCH_OUT_DIR", out_dir)
        .output()
        .expect("binary runs")
}

fn ok(out_dir: &Path, args: &[&str]) -> String {
    let o = tb(out_dir, args);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

/// Every file under `dir` except the sidecar log, keyed by relative path.
fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let path = e.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else if path.file_name().unwrap() != "tripbench.log" {
                out.insert(path.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&path).unwrap());
            }
        }
    }
    out
}

/// A world and a calibrated combined task in `dir`.
fn fixture(dir: &Path) -> (String, String) {
    ok(dir, &["gen", "world", "--seed", "3"]);
    let w = p(dir, "world.json");
    ok(dir, &["gen", "task", "--world", &w, "--type", "3", "--seed", "7", "--calibrate", "20"]);
    (w, p(dir, "task.json"))
}

#[test]
fn happy_path_through_every_subcommand() {
    let d = TempDir::new().unwrap();
    let dir = d.path();
    let (w, t) = fixture(dir);
    assert!(dir.join("task.calib.json").exists() && dir.join("task.samples.json").exists());
    let solved: serde_json::Value = serde_json::from_str(&ok(dir, &["solve", "--world", &w, "--task", &t])).unwrap();
    assert_eq!(solved["status"], "optimal");
    let it = p(dir, "itinerary.txt");
    let line = ok(dir, &["simulate", "--world", &w, "--task", &t, "--itinerary", &it]);
    assert!(line.starts_with("L1 "));
    let trace: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.join("trace.json")).unwrap()).unwrap();
    assert_eq!(trace["totals"]["a1"], trace["totals"]["b1"]);
    let calib = p(dir, "task.calib.json");
    let score: serde_json::Value =
        serde_json::from_str(&ok(dir, &["score", "--world", &w, "--task", &t, "--itinerary", &it, "--calib", &calib]))
            .unwrap();
    assert_eq!(score["s1"], "60.00");
    assert_eq!(score["s3"], "20.00");
    ok(dir, &["solve", "--world", &w, "--task", &t, "--method", "heuristic", "-o", &p(dir, "h.txt")]);
    ok(dir, &["calibrate", "--world", &w, "--task", &t, "-n", "10", "-o", &p(dir, "c.json")]);
    let c: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.join("c.json")).unwrap()).unwrap();
    assert_eq!(c["sample_size"], 10);
    let samples: Vec<serde_json::Value> = serde_json::from_slice(&std::fs::read(dir.join("c.samples.json")).unwrap()).unwrap();
    assert_eq!(samples.len(), 10);
    ok(dir, &["gen", "fault", "--world", &w, "--task", &t, "--kind", "sellout", "-o", &p(dir, "fw.json")]);
    let fw = p(dir, "fw.json");
    let broken = ok(dir, &["simulate", "--world", &fw, "--task", &t, "--itinerary", &it, "-o", &p(dir, "ft.json")]);
    assert!(!broken.contains("L1 20/20"));
    ok(dir, &["run", "--world", &w, "--task", &t, "--calib", &calib, "--mode", "direct"]);
    let r: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.join("run-direct/results.json")).unwrap()).unwrap();
    assert_eq!(r["tasks"][0]["calibration"], "given");
    assert_eq!(r["tasks"][0]["score"]["total"], "100.00");
    let log = std::fs::read_to_string(dir.join("tripbench.log")).unwrap();
    assert_eq!(log.lines().count(), 10);
    assert!(log.lines().all(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["config"]["seed"].is_u64()));
}

#[test]
fn static_and_dynamic_runs_feed_one_report() {
    let d = TempDir::new().unwrap();
    let dir = d.path();
    ok(dir, &["gen", "fault-suite", "--size", "4", "--seed", "1"]);
    let suite = p(dir, "faults/suite.json");
    ok(dir, &["run", "--suite", &suite, "--mode", "static", "--jobs", "2", "--calib-n", "5"]);
    ok(dir, &["run", "--suite", &suite, "--mode", "dynamic", "--jobs", "2", "--calib-n", "5"]);
    let summary =
        ok(dir, &["report", "--results", &p(dir, "run-static/results.json"), &p(dir, "run-dynamic/results.json")]);
    assert!(summary.contains("dynamic: binary rate 1.00"), "{summary}");
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.join("report/report.json")).unwrap()).unwrap();
    let methods = report["methods"].as_array().unwrap();
    assert_eq!(methods.len(), 2);
    assert_eq!(methods[1]["method"], "static");
    let ctf = |m: &serde_json::Value| m["errors"]["counts"]["ctf"].as_u64().unwrap();
    assert!(ctf(&methods[0]) < ctf(&methods[1]));
    let csv = std::fs::read_to_string(dir.join("report/report-static.csv")).unwrap();
    assert!(csv.starts_with("task_id,type,s1,s2,s3,total,binary,ctf,cke,eim,cnc\n"));
    assert_eq!(csv.lines().count(), 5);
}

#[test]
fn reports_reject_mixed_suites() {
    let d = TempDir::new().unwrap();
    let dir = d.path();
    let (w, t) = fixture(dir);
    ok(dir, &["gen", "suite", "--counts", "1,1,0", "--seed", "2", "--name", "small"]);
    ok(dir, &["run", "--suite", &p(dir, "small/suite.json"), "--calib-n", "3"]);
    ok(dir, &["run", "--world", &w, "--task", &t, "--mode", "static", "--calib-n", "3"]);
    let o = tb(dir, &["report", "--results", &p(dir, "run-dynamic/results.json"), &p(dir, "run-static/results.json")]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("mix suites"));
}

#[test]
fn impaired_agents_and_labels() {
    let d = TempDir::new().unwrap();
    let dir = d.path();
    let (w, t) = fixture(dir);
    ok(dir, &["run", "--world", &w, "--task", &t, "--agent", "impaired", "--calib-n", "3"]);
    let r: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.join("run-dynamic-impaired/results.json")).unwrap()).unwrap();
    assert_eq!(r["method"], "dynamic-impaired");
    assert_eq!(r["tasks"][0]["score"]["binary"], false);
    ok(dir, &["run", "--world", &w, "--task", &t, "--label", "mine", "-o", &p(dir, "x")]);
    assert!(dir.join("x/results.json").exists());
}

#[cfg(unix)]
#[test]
fn external_agents_speak_line_json() {
    let d = TempDir::new().unwrap();
    let dir = d.path();
    let (w, t) = fixture(dir);
    let script = r#"while read -r line; do echo '{"version":1,"op":"calc","args":{"expr":"1+1"}}'; read -r answer; echo '{"version":1,"itinerary":""}'; done"#;
    ok(dir, &["run", "--world", &w, "--task", &t, "--agent", "external", "--agent-cmd", "sh", "--agent-arg", "-c", "--agent-arg", script, "--calib-n", "3"]);
    let r: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.join("run-dynamic-external/results.json")).unwrap()).unwrap();
    assert_eq!(r["tasks"][0]["score"]["total"], "0.00");
    let bad = tb(dir, &["run", "--world", &w, "--task", &t, "--agent", "external", "--agent-cmd", "sh", "--agent-arg", "-c", "--agent-arg", "echo nonsense"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn exit_codes() {
    let d = TempDir::new().unwrap();
    let dir = d.path();
    assert_eq!(tb(dir, &["score", "--world", "w.json"]).status.code(), Some(1));
    assert_eq!(tb(dir, &["frobnicate"]).status.code(), Some(1));
    assert_eq!(tb(dir, &["run", "--agent", "external", "--world", "a", "--task", "b"]).status.code(), Some(1));
    assert_eq!(tb(dir, &["--jobs", "0", "report", "--results", "x"]).status.code(), Some(1));
    assert_eq!(tb(dir, &["--help"]).status.code(), Some(0));
    let missing = tb(dir, &["simulate", "--world", "nope.json", "--task", "t.json", "--itinerary", "i.txt"]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).starts_with("error: loading world"));
    let (w, t) = fixture(dir);
    std::fs::write(dir.join("bad.txt"), "fly_to(Mars)\n").unwrap();
    let o = tb(dir, &["simulate", "--world", &w, "--task", &t, "--itinerary", &p(dir, "bad.txt")]);
    assert_eq!(o.status.code(), Some(2));
    let o = tb(dir, &["gen", "world", "--cities", "99"]);
    assert_eq!(o.status.code(), Some(2));
}

/// Each subcommand, run three times with the same flags into fresh
/// directories, writes byte-identical files.
#[test]
fn every_subcommand_is_deterministic() {
    let base = TempDir::new().unwrap();
    let fx = base.path().join("fx");
    std::fs::create_dir_all(&fx).unwrap();
    let (w, t) = fixture(&fx);
    let calib = p(&fx, "task.calib.json");
    ok(&fx, &["solve", "--world", &w, "--task", &t]);
    let it = p(&fx, "itinerary.txt");
    ok(&fx, &["gen", "fault-suite", "--size", "2", "--seed", "4"]);
    let faults = p(&fx, "faults/suite.json");
    ok(&fx, &["run", "--suite", &faults, "--mode", "static", "--calib-n", "3"]);
    ok(&fx, &["run", "--suite", &faults, "--mode", "dynamic", "--calib-n", "3"]);
    let (rs, rd) = (p(&fx, "run-static/results.json"), p(&fx, "run-dynamic/results.json"));
    let cases: Vec<(&str, Vec<&str>)> = vec![
        ("gen world", vec!["gen", "world", "--seed", "9"]),
        ("gen task", vec!["gen", "task", "--world", &w, "--type", "2", "--seed", "4", "--calibrate", "5"]),
        ("gen suite", vec!["gen", "suite", "--counts", "1,1,1", "--seed", "6", "--calibrate", "3", "--jobs", "3"]),
        ("gen fault-suite", vec!["gen", "fault-suite", "--size", "2", "--seed", "8"]),
        ("gen fault", vec!["gen", "fault", "--world", &w, "--task", &t, "--kind", "remove-trip"]),
        ("solve", vec!["solve", "--world", &w, "--task", &t, "--method", "heuristic", "--seed", "3"]),
        ("simulate", vec!["simulate", "--world", &w, "--task", &t, "--itinerary", &it]),
        ("score", vec!["score", "--world", &w, "--task", &t, "--itinerary", &it, "--calib", &calib, "-o", "score.json"]),
        ("calibrate", vec!["calibrate", "--world", &w, "--task", &t, "-n", "15", "--seed", "7"]),
        ("run", vec!["run", "--suite", &faults, "--mode", "dynamic", "--jobs", "2", "--calib-n", "4"]),
        ("report", vec!["report", "--results", &rs, &rd]),
    ];
    for (name, args) in cases {
        let mut snaps = Vec::new();
        let mut stdouts = Vec::new();
        for k in 0..3 {
            let dir = base.path().join(format!("{}-{k}", name.replace(' ', "-")));
            std::fs::create_dir_all(&dir).unwrap();
            let args: Vec<String> = args.iter().map(|a| if *a == "score.json" { p(&dir, a) } else { a.to_string() }).collect();
            let refs: Vec<&str> = args.iter().map(String::as_str).collect();
            let out = ok(&dir, &refs);
            stdouts.push(out.replace(&*dir.to_string_lossy(), "<dir>"));
            snaps.push(snapshot(&dir));
        }
        assert!(!snaps[0].is_empty(), "{name} wrote nothing");
        assert_eq!(snaps[0], snaps[1], "{name}");
        assert_eq!(snaps[1], snaps[2], "{name}");
        assert_eq!(stdouts[0], stdouts[1], "{name}");
        assert_eq!(stdouts[1], stdouts[2], "{name}");
    }
}
