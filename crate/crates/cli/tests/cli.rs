use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_twinsearch"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn bench_synthetic_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("b.csv");
    let o = run(&[
        "bench",
        "--format",
        "synthetic",
        "--users",
        "120",
        "--items",
        "50",
        "--k",
        "4",
        "--repeats",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let csv = std::fs::read_to_string(&out).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("method,twin_index,wall_time_ns,sims,range_searches,set0,verifications,fallback")
    );
    assert_eq!(lines.count(), 8);
    assert!(stdout(&o).contains("ratio"));
}

#[test]
fn bench_item_mode_transposes() {
    let o = run(&[
        "bench",
        "--format",
        "synthetic",
        "--users",
        "40",
        "--items",
        "90",
        "--density",
        "0.2",
        "--mode",
        "item",
        "--k",
        "2",
        "--repeats",
        "1",
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    // 90 items become the users; one row is held out as the twin source
    assert!(stdout(&o).contains("n=90"));
    assert!(stdout(&o).contains("base users 89"));
}

#[test]
fn verify_passes_and_zero_trials_warns() {
    let o = run(&["verify", "--trials", "5", "--seed", "3"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("5/5 passed"));

    let o = run(&["verify", "--trials", "0"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stderr).contains("warning"));
}

#[test]
fn analyze_writes_report_and_set0_samples() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("a.csv");
    let o = run(&[
        "analyze",
        "--format",
        "synthetic",
        "--users",
        "60",
        "--items",
        "40",
        "--density",
        "0.2",
        "--x",
        "10",
        "--seeds",
        "5",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let users = std::fs::read_to_string(&out).unwrap();
    assert_eq!(
        users.lines().next(),
        Some("user,mu,sigma,x,bucket_max_fraction,eq3_fraction")
    );
    assert_eq!(users.lines().count(), 61);
    let set0 = std::fs::read_to_string(dir.path().join("a.set0.csv")).unwrap();
    assert_eq!(set0.lines().count(), 6);
}

#[test]
fn usage_and_io_errors_exit_2() {
    assert_eq!(
        run(&["bench", "--k", "0", "--format", "synthetic"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        run(&["bench", "--dataset", "/nonexistent/u.data"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(run(&["bench", "--mode", "sideways"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn malformed_input_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.data");
    std::fs::write(&path, "1\t1\t9\t0\n").unwrap();
    let o = run(&["bench", "--dataset", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("error"));
}
