use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn gradient(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gradient"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn first_line(path: &Path) -> String {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .next()
        .unwrap()
        .to_string()
}

fn summary_value(dir: &Path, key: &str) -> String {
    let text = fs::read_to_string(dir.join("summary.txt")).unwrap();
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("no {key} in summary"))
        .to_string()
}

#[test]
fn analyze_writes_tables_and_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let out = gradient(tmp.path(), &["analyze", "--out", "a"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let dir = tmp.path().join("a");
    assert_eq!(
        first_line(&dir.join("distribution.csv")),
        "tick,state,probability"
    );
    assert_eq!(
        first_line(&dir.join("hitting.csv")),
        "start_state,expected_ticks,bound_ticks"
    );
    let m: f64 = summary_value(&dir, "expected_hitting_time")
        .parse()
        .unwrap();
    assert!((m - 565.79).abs() < 0.01, "{m}");
    assert!(String::from_utf8_lossy(&out.stdout).contains("kind=analyze"));
}

#[test]
fn converge_with_decay_reports_not_converged() {
    let tmp = tempfile::tempdir().unwrap();
    let out = gradient(
        tmp.path(),
        &[
            "converge",
            "--out",
            "c",
            "--repeat",
            "3",
            "--set",
            "converge.schedule=inverse_square:100",
            "--set",
            "converge.horizon=100000",
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let dir = tmp.path().join("c");
    assert_eq!(summary_value(&dir, "status"), "not converged");
    assert_eq!(summary_value(&dir, "verdict"), "not_almost_sure");
    assert_eq!(
        first_line(&dir.join("convergence.csv")),
        "seed,gradient_tick,ticks_run,nodes_not_converged,max_final_x"
    );
    assert!(dir.join("seed_1").join("x_series.csv").exists());
}

#[test]
fn manifest_reproduces_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let first = gradient(
        tmp.path(),
        &[
            "stream",
            "--out",
            "one",
            "--seed",
            "9",
            "--set",
            "stream.duration_s=15",
        ],
    );
    assert!(
        first.status.success(),
        "{}",
        String::from_utf8_lossy(&first.stderr)
    );
    let second = gradient(
        tmp.path(),
        &["stream", "--config", "one/manifest.toml", "--out", "two"],
    );
    assert!(
        second.status.success(),
        "{}",
        String::from_utf8_lossy(&second.stderr)
    );
    for name in ["continuity.csv", "latency.csv", "runs.csv", "summary.txt"] {
        let a = fs::read(tmp.path().join("one").join(name)).unwrap();
        let b = fs::read(tmp.path().join("two").join(name)).unwrap();
        assert_eq!(a, b, "{name} differs");
    }
    assert_eq!(
        first_line(&tmp.path().join("one/runs.csv")),
        "seed,sampler,time_to_target_s,target_reached,mean_latency_s,invariant_violations"
    );
}

#[test]
fn config_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(
        tmp.path().join("typo.toml"),
        "kind = \"converge\"\n[converge]\nhorizn = 5\n",
    )
    .unwrap();
    let cases: [&[&str]; 4] = [
        &["converge", "--config", "missing.toml"],
        &["converge", "--config", "typo.toml"],
        &["converge", "--set", "converge.schedule=constant:0.01"],
        &["analyze", "--repeat", "0"],
    ];
    for args in cases {
        let out = gradient(tmp.path(), args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
    }
    let typo = gradient(tmp.path(), &["converge", "--config", "typo.toml"]);
    assert!(String::from_utf8_lossy(&typo.stderr).contains("converge.horizn"));
    let np = gradient(
        tmp.path(),
        &["converge", "--set", "converge.schedule=constant:0.01"],
    );
    assert!(String::from_utf8_lossy(&np.stderr).contains("0 < N*p < 1"));
}

#[test]
fn unwritable_output_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("blocker"), "").unwrap();
    let out = gradient(tmp.path(), &["analyze", "--out", "blocker/sub"]);
    assert_eq!(out.status.code(), Some(3));
}
