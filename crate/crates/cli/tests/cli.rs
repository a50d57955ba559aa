use std::path::Path;
use std::process::{Command, Output};

/// Runs `ifmh` in `dir` with whitespace-separated arguments.
fn ifmh(dir: &Path, args: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ifmh"))
        .current_dir(dir)
        .args(args.split_whitespace())
        .output()
        .expect("spawn ifmh")
}

fn ok(dir: &Path, args: &str) -> String {
    let out = ifmh(dir, args);
    assert!(
        out.status.success(),
        "{args} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn setup(dir: &Path, mode: &str) {
    ok(dir, "keygen --secret sk.pem --public pk.pem --seed 4");
    ok(dir, "gen-dataset --n 12 --d 1 --seed 8 --out ds.csv");
    ok(
        dir,
        &format!(
            "build --dataset ds.csv --key sk.pem --mode {mode} --out idx.bin --params params.bin"
        ),
    );
}

const VERIFY: &str = "verify --params params.bin --response r.bin --query q.bin";

#[test]
fn honest_round_trip_each_mode() {
    for mode in ["one", "multi", "mesh"] {
        let dir = tempfile::tempdir().unwrap();
        let d = dir.path();
        setup(d, mode);
        for q in [
            "--type topk --x 3/11 --k 4",
            "--type range --x -5/3 --lo -2 --hi 3",
            "--type knn --x 7/13 --k 3 --y 1/2",
        ] {
            let stdout = ok(
                d,
                &format!("query --tree idx.bin --out r.bin --query-out q.bin {q}"),
            );
            assert!(stdout.contains("result="), "{stdout}");
            let v = ok(d, VERIFY);
            assert!(v.contains("verdict=accepted"), "{mode}: {v}");
        }
    }
}

#[test]
fn tampered_response_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    setup(d, "one");
    ok(
        d,
        "query --tree idx.bin --type topk --x 1/3 --k 3 --out r.bin --query-out q.bin",
    );
    let t = ok(
        d,
        "tamper --tree idx.bin --response r.bin --query q.bin --mode modify-record --out bad.bin",
    );
    assert!(t.contains("expected=SignatureMismatch"), "{t}");
    // Query given by flags rather than by file.
    let out = ifmh(
        d,
        "verify --params params.bin --response bad.bin --type topk --x 1/3 --k 3",
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("rejected: SignatureMismatch"));
}

#[test]
fn wrong_public_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    setup(d, "multi");
    ok(d, "keygen --secret sk2.pem --public pk2.pem --seed 5");
    ok(
        d,
        "query --tree idx.bin --type topk --x 1/3 --k 2 --out r.bin --query-out q.bin",
    );
    let good = ifmh(d, &format!("{VERIFY} --public-key pk.pem"));
    assert_eq!(good.status.code(), Some(0));
    let bad = ifmh(d, &format!("{VERIFY} --public-key pk2.pem"));
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    setup(d, "one");
    let out = ifmh(d, "query --tree idx.bin --type topk --x 1 --out r.bin");
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--k is required"));
    let out = ifmh(d, "query --tree ds.csv --type topk --x 1 --k 1 --out r.bin");
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bench_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("cfg.toml"),
        "seed = 1\nqueries_per_row = 2\nschemes = [\"one\", \"mesh\"]\nquery_types = [\"topk\"]\n\n[[grid]]\nd = 1\nn = [6]\nq = [2]\n",
    )
    .unwrap();
    ok(d, "bench --config cfg.toml --out report.csv");
    let csv = std::fs::read_to_string(d.join("report.csv")).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("scheme,n,d,query_type"));
    assert_eq!(lines.count(), 2);
}
