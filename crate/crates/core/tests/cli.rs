use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn dqm(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dqm"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn presets_are_listed_and_printed() {
    let dir = tempfile::tempdir().unwrap();
    let list = dqm(&["presets"], dir.path());
    assert!(list.status.success());
    for name in [
        "myopic_stability",
        "mlewa_stability",
        "reinforced_walk",
        "unproven_regime",
    ] {
        assert!(stdout(&list).contains(name));
    }
    let one = dqm(&["presets", "instability"], dir.path());
    assert!(stdout(&one).contains("policy.kind = \"last_slot\""));
    assert_eq!(dqm(&["presets", "missing"], dir.path()).status.code(), Some(2));
}

#[test]
fn instability_run_with_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let o = dqm(
        &[
            "run",
            "--preset",
            "instability",
            "--set",
            "run.horizon=40",
            "--out",
            "out",
            "--format",
            "json",
            "--jobs",
            "1",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let traj = fs::read_to_string(dir.path().join("out/last_slot_n3_t5_s1.json")).unwrap();
    let doc: serde_json::Value = serde_json::from_str(&traj).unwrap();
    assert_eq!(doc["schema"], "dqm.trajectory.v1");
    assert_eq!(
        doc["final_counts"]
            .as_array()
            .unwrap()
            .iter()
            .map(|v| v.as_u64().unwrap())
            .sum::<u64>(),
        3 + 2 * 40
    );
    let agg = fs::read_to_string(dir.path().join("out/aggregate.csv")).unwrap();
    assert_eq!(agg.lines().count(), 2);
    assert!(agg.lines().next().unwrap().contains("bound_violated"));
}

#[test]
fn assertion_failure_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "run",
        "--preset",
        "instability",
        "--set",
        "run.horizon=20",
        "--set",
        "assert.max_k=10",
        "--out",
        "out",
    ];
    let o = dqm(&args, dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("assertion failed"));
    let mut quiet = args.to_vec();
    quiet.push("--no-assert");
    assert_eq!(dqm(&quiet, dir.path()).status.code(), Some(0));
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("bad.toml"),
        "model.players = 3\nmodel.period = 2\npenalty.kind = \"linear\"\npenalty.slope = -1\npolicy.kind = \"myopic\"\nrun.horizon = 10\nrun.seeds = [1]\nextra = 1\n",
    )
    .unwrap();
    let o = dqm(&["run", "--config", "bad.toml"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("extra: unknown key"), "{err}");
    assert!(err.contains("penalty"), "{err}");
}

#[test]
fn sweep_then_replay() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("sweep.toml"),
        "model.players = 3\nmodel.period = 5\npenalty.kind = \"linear\"\npenalty.slope = 20\npenalty.intercept = 1\n\
         policy.kind = \"mlewa\"\nrun.horizon = 300\nrun.seeds = \"1..=20\"\n",
    )
    .unwrap();
    let o = dqm(
        &["run", "--config", "sweep.toml", "--out", "out", "--jobs", "4"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = dir.path().join("out");
    let trajectories = fs::read_dir(&out)
        .unwrap()
        .filter(|e| {
            let name = e.as_ref().unwrap().file_name().to_string_lossy().into_owned();
            name.ends_with(".csv") && name != "aggregate.csv"
        })
        .count();
    assert_eq!(trajectories, 20);
    let agg = fs::read_to_string(out.join("aggregate.csv")).unwrap();
    let seeds: Vec<String> = agg
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(6).unwrap().to_owned())
        .collect();
    assert_eq!(seeds, (1..=20).map(|s| s.to_string()).collect::<Vec<_>>());

    let r = dqm(&["replay", "out/mlewa_n3_t5_eta0.1_s13.summary.json"], dir.path());
    assert_eq!(r.status.code(), Some(0));
    assert_eq!(stdout(&r).matches("identical").count(), 2);

    let mut summary = fs::read_to_string(out.join("mlewa_n3_t5_eta0.1_s13.summary.json")).unwrap();
    summary = summary.replacen("\"max_total\": ", "\"max_total\": 1", 1);
    fs::write(out.join("tampered.summary.json"), summary).unwrap();
    let r = dqm(&["replay", "out/tampered.summary.json", "--out", "again"], dir.path());
    assert_eq!(r.status.code(), Some(1), "{}", stdout(&r));
    assert!(stdout(&r).contains("DIFFERS"));
}

#[test]
fn show_fills_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let o = dqm(&["show", "--preset", "myopic_stability"], dir.path());
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("caps.max_runs = 1000"));
    assert!(text.contains("run.seeds = \"1..=10\""));
}
