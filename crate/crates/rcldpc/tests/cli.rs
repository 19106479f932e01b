use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use rcldpc::formats::{self, Manifest};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rcldpc")).args(args).output().expect("spawn rcldpc")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn ok(args: &[&str]) -> String {
    let o = run(args);
    assert!(o.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&o.stderr));
    stdout(&o)
}

fn code(args: &[&str]) -> i32 {
    run(args).status.code().expect("exit code")
}

#[test]
fn exit_codes() {
    assert_eq!(code(&[]), 2);
    assert_eq!(code(&["bogus"]), 2);
    assert_eq!(code(&["simulate", "--plan", "p.json", "--code", "isi-1/2"]), 2);
    assert_eq!(code(&["exit-table", "--channel", "dicode", "--ebno", "0"]), 2);
    assert_eq!(code(&["capacity", "--channel", "dicode", "--rate", "3/2"]), 2);
    assert_eq!(code(&["lift", "--code", "no-such-code", "--n2", "5"]), 1);
    assert_eq!(code(&["capacity", "--channel", "1,x"]), 2);
    assert_eq!(code(&["--help"]), 0);
}

#[test]
fn bad_plan_and_receiver_are_errors() {
    let dir = tempfile::tempdir().unwrap();
    let plan = dir.path().join("plan.json");
    fs::write(
        &plan,
        r#"{"code":"isi-1/2","parent":null,"channel":"dicode","ebno_db":[],"n1":4,"n2":10,
            "lift_seed":1,"lift_order":"degree","stop":{"min_frame_errors":1,"max_frames":1},
            "seed":1,"receiver":{"outer_iters":1,"bp_iters":1,"llr_clamp":50.0,"check_rule":"sum-product"},
            "fer_floor":null}"#,
    )
    .unwrap();
    let o = run(&["simulate", "--plan", plan.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("empty"));

    let rx = dir.path().join("rx.json");
    fs::write(&rx, r#"{"outer_iters":1,"bp_iters":1,"llr_clamp":50.0,"check_rule":"min-sum","damping":0.5}"#).unwrap();
    let o = run(&["simulate", "--code", "isi-1/2", "--channel", "dicode", "--ebno", "3", "--receiver", rx.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn capacity_limit() {
    let out = ok(&["capacity", "--channel", "epr4", "--rate", "9/10"]);
    let v: f64 = out.trim().parse().unwrap();
    assert!((v - 4.3).abs() < 0.15, "{v}");
}

#[test]
fn threshold_on_a_coarse_surface() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = ok(&[
        "threshold", "--code", "isi-1/2", "--channel", "dicode", "--surface-ebno", "-1:4:0.25", "--symbols", "100000",
        "--out", d,
    ]);
    let t: f64 = out.trim().parse().unwrap();
    assert!((t - 1.3).abs() < 0.15, "{t}");
    let rows = formats::read_thresholds(&dir.path().join("thresholds.csv")).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].code, "isi-1/2");
    assert!(dir.path().join("threshold.manifest.json").exists());
}

#[test]
fn lift_writes_code_files_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = ok(&["lift", "--code", "isi-1/2", "--n2", "20", "--out", d]);
    assert!(out.starts_with("n 480 k 240 girth "), "{out}");

    let alist = fs::read_to_string(dir.path().join("code.alist")).unwrap();
    assert_eq!(alist.lines().next().unwrap().split_whitespace().collect::<Vec<_>>(), ["480", "240"]);

    let m: Manifest = formats::read_json(&formats::manifest_path(dir.path(), "lift")).unwrap();
    assert_eq!(m.subcommand, "lift");
    assert_eq!(m.seeds["lift"], 1);
    assert_eq!(m.flags["lift"]["n2"], 20);
    let names: Vec<&str> = m.outputs.iter().map(|p| Path::new(p).file_name().unwrap().to_str().unwrap()).collect();
    for f in ["code.qc", "code.alist", "lift.json"] {
        assert!(names.contains(&f), "{names:?}");
    }

    let qc = dir.path().join("code.qc");
    let g = ok(&["girth", "--code", qc.to_str().unwrap()]);
    let first = out.split_whitespace().last().unwrap();
    assert_eq!(g.lines().next().unwrap(), format!("girth {first}"));
}

#[test]
fn simulate_sweep_and_plan_replay() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = |d: &Path| {
        vec![
            "simulate".to_string(),
            "--code".into(),
            "isi-1/2".into(),
            "--channel".into(),
            "dicode".into(),
            "--ebno".into(),
            "1:2:0.5".into(),
            "--n2".into(),
            "10".into(),
            "--max-frames".into(),
            "64".into(),
            "--min-errors".into(),
            "5".into(),
            "--no-timing".into(),
            "--out".into(),
            d.display().to_string(),
        ]
    };
    let first = ok(&args(a.path()).iter().map(String::as_str).collect::<Vec<_>>());
    let rows = formats::read_results(&a.path().join("results.csv")).unwrap();
    assert_eq!(rows.iter().map(|r| r.ebno_db).collect::<Vec<_>>(), [1.0, 1.5, 2.0]);
    assert!(rows.iter().all(|r| r.frames >= 1 && r.frames <= 64 && r.seconds == 0.0));

    let plan = a.path().join("plan.json");
    let replay = ok(&["simulate", "--plan", plan.to_str().unwrap(), "--no-timing", "--out", b.path().to_str().unwrap()]);
    assert_eq!(first, replay);
    for f in ["results.csv", "plan.json"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}
