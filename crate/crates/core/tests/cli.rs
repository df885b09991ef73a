use std::path::Path;
use std::process::Command;

fn eikograph(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_eikograph")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("config.json");
    std::fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

const SMALL: &str = r#"{
  "problem": {
    "manifold": {"kind": "sphere", "dim": 2, "radius": 1.0},
    "boundary": {"kind": "cap", "center": [0, 0, 1], "radius": 0.3}
  },
  "n": 400,
  "k1": 26.0,
  "sweep": {"n_list": [200, 400], "trials_per_n": 2},
  "mc": {"n": 400, "trials": 50}
}"#;

fn first_line(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

#[test]
fn subcommands_write_their_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");
    let out_s = out.to_string_lossy().into_owned();

    for cmd in ["gen", "solve", "converge", "mc-cover", "validate"] {
        let o = eikograph(&[cmd, "--config", &config, "--out-dir", &out_s, "--seed", "3"]);
        assert!(o.status.success(), "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["points.csv", "edges.csv", "vertices.csv", "solution.csv", "errors.csv", "convergence.csv"] {
        assert!(first_line(&out.join(f)).starts_with("# eikograph "), "{f}");
    }
    for f in ["points.json", "graph.json", "run.json", "summary.txt", "mc.json", "validate.json", "timings.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let points = std::fs::read_to_string(out.join("points.csv")).unwrap();
    assert_eq!(points.lines().nth(1), Some("x0,x1,x2"));
    assert_eq!(points.lines().count(), 402);
}

#[test]
fn snapshot_thinning_and_steady_stop() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");
    let out_s = out.to_string_lossy().into_owned();
    let o = eikograph(&["solve", "--config", &config, "--out-dir", &out_s, "--snapshot-every", "3", "--stop-at-steady"]);
    assert!(o.status.success());
    let run: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("run.json")).unwrap()).unwrap();
    assert_eq!(run["config"]["solver"]["snapshot_every"], 3);
    assert_eq!(run["config"]["solver"]["stop_at_steady"], true);
    let times: std::collections::BTreeSet<String> = std::fs::read_to_string(out.join("solution.csv"))
        .unwrap()
        .lines()
        .skip(2)
        .map(|l| l.split(',').next().unwrap().to_string())
        .collect();
    let steps = run["steps"].as_u64().unwrap() as usize;
    assert_eq!(times.len(), 1 + steps / 3 + usize::from(!steps.is_multiple_of(3)));
}

#[test]
fn converge_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let mut files = vec![];
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let o = eikograph(&["converge", "--config", &config, "--out-dir", &out.to_string_lossy(), "--threads", "1"]);
        assert!(o.status.success());
        files.push((std::fs::read(out.join("errors.csv")).unwrap(), std::fs::read(out.join("convergence.csv")).unwrap()));
    }
    assert_eq!(files[0], files[1]);
}

#[test]
fn bad_configs_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out").to_string_lossy().into_owned();
    for body in [
        "not json",
        r#"{"problem": {"manifold": {"kind": "sphere", "dim": 2, "radius": -1.0}, "boundary": {"kind": "point-set", "points": []}}}"#,
        &SMALL.replace("\"n\": 400", "\"n\": 400, \"nu\": -1"),
    ] {
        let config = write_config(dir.path(), body);
        let o = eikograph(&["gen", "--config", &config, "--out-dir", &out]);
        assert_eq!(o.status.code(), Some(2), "{body}");
    }
    let o = eikograph(&["gen", "--config", "/nonexistent/config.json", "--out-dir", &out]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn step_above_the_cfl_bound_is_a_run_error() {
    let dir = tempfile::tempdir().unwrap();
    let body = SMALL.replace("\"k1\": 26.0,", "\"k1\": 26.0, \"solver\": {\"dt\": 50.0},");
    let config = write_config(dir.path(), &body);
    let out = dir.path().join("out").to_string_lossy().into_owned();
    let o = eikograph(&["solve", "--config", &config, "--out-dir", &out]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("CFL"));

    let clamped = body.replace("\"dt\": 50.0", "\"dt\": 50.0, \"cfl_mode\": \"auto-clamp\"");
    let config = write_config(dir.path(), &clamped);
    let o = eikograph(&["validate", "--config", &config, "--out-dir", &out]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
}
