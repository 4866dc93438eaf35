use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn data(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(rel)
}

fn golden(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(rel)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_compcbf")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_project(dir: &Path, name: &str, v: Value) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_string_pretty(&v).unwrap()).unwrap();
    p
}

fn toy_project(dir: &Path, cert: &Path, extra: Value) -> PathBuf {
    let mut v = json!({
        "automaton": data("toy/automaton.json"),
        "system": {"custom": data("toy/system.json")},
        "certificates": [{"file": cert}],
        "verify": {"grid": {"step": 0.001, "internal": {"grid": {"step": 0.25}}}, "composed_samples": 2000, "seed": 3},
        "synthesis": {
            "keys": ["(q0,q1,{q1,q2})"],
            "regions": {"(q0,q1,{q1,q2})": {
                "initial": [{"lo": [-0.2], "hi": [0.2]}],
                "unsafe": [{"lo": [1.5], "hi": [2]}]
            }}
        },
        "simulation": {"x0": {"label": "p0"}, "horizon": 30, "seed": 5},
        "output": dir.join("out"),
    });
    if let (Value::Object(base), Value::Object(more)) = (&mut v, extra) {
        for (k, x) in more {
            base.insert(k, x);
        }
    }
    write_project(dir, "project.json", v)
}

fn envelope(path: &Path) -> Vec<(f64, f64)> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records()
        .map(|rec| {
            let rec = rec.unwrap();
            (rec[1].parse().unwrap(), rec[2].parse().unwrap())
        })
        .collect()
}

#[test]
fn example1_decomposition_matches_golden_files() {
    let out = tempfile::tempdir().unwrap();
    let o = run(&[
        "decompose",
        "--config",
        data("example1/project.json").to_str().unwrap(),
        "--out",
        out.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for f in ["fragments.json", "fragments_by_prop.json", "triplets_by_fragment.json"] {
        let got = std::fs::read(out.path().join("decompose").join(f)).unwrap();
        let want = std::fs::read(golden("example1").join(f)).unwrap();
        assert_eq!(got, want, "{f} differs from the golden file");
    }
    for f in ["partitions.json", "switching.json", "switching.dot", "complement.dot", "decomposition.json"] {
        assert!(out.path().join("decompose").join(f).exists(), "{f} missing");
    }
}

#[test]
fn decompose_reports_required_certificates() {
    let out = tempfile::tempdir().unwrap();
    let o =
        run(&["decompose", "-c", data("rooms/project.json").to_str().unwrap(), "--out", out.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("only triplet (q0,q1,q2) needs a certificate"), "{}", stdout(&o));
    let o = run(&[
        "decompose",
        "-c",
        data("kuramoto/project.json").to_str().unwrap(),
        "--out",
        out.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("2 triplets need certificates: (q0,q1,q3), (q0,q2,q3)"), "{}", stdout(&o));
}

#[test]
fn smallgain_reports_reference_gains() {
    let out = tempfile::tempdir().unwrap();
    let o = run(&[
        "check-smallgain",
        "-c",
        data("rooms/project.json").to_str().unwrap(),
        "--out",
        out.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("gamma = 0.952"), "{}", stdout(&o));
    let o = run(&[
        "check-smallgain",
        "-c",
        data("kuramoto/project.json").to_str().unwrap(),
        "--out",
        out.path().to_str().unwrap(),
        "--n",
        "20",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s = stdout(&o);
    assert!(s.contains("gamma = 0.8736") && s.contains("gamma = 0.5824"), "{s}");
    let summary: Value =
        serde_json::from_slice(&std::fs::read(out.path().join("smallgain/smallgain.json")).unwrap()).unwrap();
    assert_eq!(summary.as_array().unwrap().len(), 2);
}

#[test]
fn rooms_verify_fails_at_local_decrease() {
    let out = tempfile::tempdir().unwrap();
    let o = run(&["verify", "-c", data("rooms/project.json").to_str().unwrap(), "--out", out.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("[local]"), "{}", stderr(&o));
    assert!(stdout(&o).contains("gamma: 0.952"));
    let summary: Value =
        serde_json::from_slice(&std::fs::read(out.path().join("verify/summary.json")).unwrap()).unwrap();
    assert_eq!(summary[0]["failed_stage"], "local");
}

#[test]
fn toy_synthesis_then_verify_passes() {
    let dir = tempfile::tempdir().unwrap();
    let cert = dir.path().join("out/certificates/q0_q1_q1_q2.json");
    let project = toy_project(dir.path(), &cert, json!({}));
    let o = run(&["synthesize", "-c", project.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    assert!(cert.exists());
    assert!(dir.path().join("out/synthesis/q0_q1_q1_q2_log.csv").exists());
    let manifest: Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("out/synthesis/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest[0]["certificate"], "certificates/q0_q1_q1_q2.json");
    let o = run(&["verify", "-c", project.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    let o = run(&["simulate", "-c", project.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));

    // Lowering ε̲ below ε̄ must be caught by the level condition.
    let mut c: Value = serde_json::from_slice(&std::fs::read(&cert).unwrap()).unwrap();
    c["eps_lower"] = json!(c["eps_upper"].as_f64().unwrap() * 0.5);
    let tampered = dir.path().join("tampered.json");
    std::fs::write(&tampered, serde_json::to_string(&c).unwrap()).unwrap();
    let project = toy_project(dir.path(), &tampered, json!({}));
    let o = run(&["verify", "-c", project.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("[level condition]"), "{}", stderr(&o));
}

#[test]
fn overlapping_regions_exit_with_synthesis_failure() {
    let out = tempfile::tempdir().unwrap();
    let o =
        run(&["synthesize", "-c", data("toy/overlap.json").to_str().unwrap(), "--out", out.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("intersect"), "{}", stderr(&o));
}

#[test]
fn zero_budget_exits_with_synthesis_failure() {
    let dir = tempfile::tempdir().unwrap();
    let cert = dir.path().join("unused.json");
    let mut project: Value =
        serde_json::from_slice(&std::fs::read(toy_project(dir.path(), &cert, json!({}))).unwrap()).unwrap();
    project["synthesis"]["cegis"] = json!({"max_iterations": 0});
    let p = write_project(dir.path(), "budget.json", project);
    let o = run(&["synthesize", "-c", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stdout(&o).contains("no certificate after 0 iterations"), "{}", stdout(&o));
}

#[test]
fn rooms_rollout_envelope_stays_in_band() {
    let out = tempfile::tempdir().unwrap();
    let o = run(&[
        "simulate",
        "-c",
        data("rooms/project.json").to_str().unwrap(),
        "--out",
        out.path().to_str().unwrap(),
        "--n",
        "100",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for r in 0..5 {
        let env = envelope(&out.path().join(format!("simulation/envelope_{r}.csv")));
        assert_eq!(env.len(), 201);
        assert!(env.iter().all(|&(lo, hi)| lo >= 20.0 && hi <= 23.0));
    }
    let monitor: Value =
        serde_json::from_slice(&std::fs::read(out.path().join("simulation/monitor.json")).unwrap()).unwrap();
    assert!(monitor.as_array().unwrap().iter().all(|m| m["pass"] == true));
}

#[test]
fn kuramoto_rollout_from_x4_avoids_neighbors() {
    let dir = tempfile::tempdir().unwrap();
    let mut project: Value = serde_json::from_slice(&std::fs::read(data("kuramoto/project.json")).unwrap()).unwrap();
    project["automaton"] = json!(data("kuramoto/automaton.json"));
    project["certificates"] = json!([
        {"file": data("kuramoto/certificate_q1.json")},
        {"file": data("kuramoto/certificate_q2.json")}
    ]);
    project["simulation"]["x0"] = json!({"label": "p4"});
    project["output"] = json!(dir.path().join("out"));
    let p = write_project(dir.path(), "k.json", project);
    let o = run(&["simulate", "-c", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let pi = std::f64::consts::PI;
    for r in 0..2 {
        let env = envelope(&dir.path().join(format!("out/simulation/envelope_{r}.csv")));
        assert!(env.iter().all(|&(lo, hi)| lo > 4.0 * pi / 3.0 && hi < 5.0 * pi / 3.0));
    }
}

#[test]
fn simulation_is_seed_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let o = run(&[
            "simulate",
            "-c",
            data("rooms/project.json").to_str().unwrap(),
            "--out",
            d.path().to_str().unwrap(),
            "--seed",
            "11",
            "--horizon",
            "20",
        ]);
        assert_eq!(o.status.code(), Some(0));
    }
    for f in ["trace_0.csv", "envelope_3.csv", "monitor.json"] {
        assert_eq!(
            std::fs::read(a.path().join("simulation").join(f)).unwrap(),
            std::fs::read(b.path().join("simulation").join(f)).unwrap()
        );
    }
}

#[test]
fn config_errors_exit_with_code_two() {
    let out = tempfile::tempdir().unwrap();
    let o = run(&[
        "simulate",
        "-c",
        data("rooms/project.json").to_str().unwrap(),
        "--out",
        out.path().to_str().unwrap(),
        "--horizon",
        "0",
    ]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["verify", "-c", "/nonexistent/project.json"]);
    assert_eq!(o.status.code(), Some(2));
    let bad = write_project(out.path(), "bad.json", json!({"automaton": data("rooms/automaton.json"), "horizn": 3}));
    let o = run(&["decompose", "-c", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["verify"]);
    assert_eq!(o.status.code(), Some(2));
}
