use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn scope(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_scope"))
        .args(args)
        .env_remove("SCOPE_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = scope(args);
    assert!(
        out.status.success(),
        "scope {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

const SMALL_CURVE: &[&str] = &[
    "--set", "runs=2",
    "--set", "max_samples=200",
    "--set", "spacing=100",
    "--set", "repr_samples=200",
    "--set", "test_states=40",
    "--set", "rollouts=4",
    "--set", "k=6",
    "--set", "max_outer_iters=20",
    "--set", "beta=0.01",
    "--set", "representations=scope,tc-4-4",
];

#[test]
fn pipeline_from_generation_to_evaluation() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.csv");
    let model = dir.path().join("m.model");
    let trace = dir.path().join("trace.csv");
    let truth = dir.path().join("truth.csv");
    let eval = dir.path().join("eval.csv");
    let phi = dir.path().join("phi.csv");

    ok(&["gen", "--env", "mountain-car", "--n", "300", "--seed", "3", "--out", p(&data)]);
    ok(&["train", "--data", p(&data), "--k", "6", "--max-iters", "15", "--out-model", p(&model), "--out-trace", p(&trace)]);
    ok(&["truth", "--data", p(&data), "--states", "30", "--rollouts", "3", "--out", p(&truth)]);
    let stdout = ok(&["eval", "--truth", p(&truth), "--data", p(&data), "--model", p(&model), "--out", p(&eval)]);
    assert!(stdout.contains("mapve"));
    ok(&["dump-phi", "--model", p(&model), "--out", p(&phi)]);

    let trace_text = fs::read_to_string(&trace).unwrap();
    assert!(trace_text.starts_with("iteration,objective"));
    let eval_text = fs::read_to_string(&eval).unwrap();
    assert_eq!(eval_text.lines().count(), 2);
    let phi_rows = fs::read_to_string(&phi).unwrap().lines().filter(|l| !l.starts_with('#')).count();
    assert_eq!(phi_rows, 301);

    let tiles = ok(&["eval", "--truth", p(&truth), "--data", p(&data), "--tiles", "4-4"]);
    assert!(tiles.starts_with("tc-4-4"));
}

#[test]
fn repeated_runs_write_identical_files() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let mut args = vec!["curve"];
        args.extend_from_slice(SMALL_CURVE);
        args.extend_from_slice(&["--out-dir", p(dir.path())]);
        ok(&args);
    }
    for name in ["curve.csv", "summary.csv", "truth.csv", "jobs/scope/run-1.csv", "models/scope-0.model"] {
        let x = fs::read(a.path().join(name)).unwrap();
        let y = fs::read(b.path().join(name)).unwrap();
        assert!(x == y, "{name} differs between runs");
    }
}

#[test]
fn out_dir_falls_back_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["curve"];
    args.extend_from_slice(SMALL_CURVE);
    let out = Command::new(env!("CARGO_BIN_EXE_scope"))
        .args(&args)
        .env("SCOPE_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(dir.path().join("summary.csv").exists());
}

#[test]
fn bad_inputs_fail_with_a_message() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.csv");
    let out = scope(&["train", "--data", p(&missing), "--out-model", "x"]);
    assert!(!out.status.success());
    assert!(!out.stderr.is_empty());

    let out = scope(&["gen", "--env", "nowhere", "--out", "x"]);
    assert!(!out.status.success());

    let out = scope(&["curve", "--set", "runs"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("KEY=VALUE"));

    let garbage = dir.path().join("garbage.csv");
    fs::write(&garbage, "not,a\ndataset\n").unwrap();
    let out = scope(&["dump-phi", "--model", p(&garbage), "--out", p(&dir.path().join("o.csv"))]);
    assert!(!out.status.success());
}

#[test]
fn cv_writes_scores_for_every_grid_value() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.csv");
    let out = dir.path().join("cv.csv");
    ok(&["gen", "--env", "mountain-car", "--n", "300", "--out", p(&data)]);
    ok(&["cv", "--data", p(&data), "--k", "6", "--max-iters", "10", "--folds", "3", "--beta-grid", "0.1,0", "--out", p(&out)]);
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("# chosen="));
    assert_eq!(text.lines().count(), 4);
}
