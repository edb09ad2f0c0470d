//! The `ppshare` binary end to end.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn ppshare(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ppshare"))
        .args(args)
        .current_dir(dir)
        .env_remove("PPSHARE_SEED")
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(|rec| rec.unwrap().iter().map(str::to_owned).collect()).collect()
}

fn column(path: &Path, name: &str) -> Vec<String> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let idx = r.headers().unwrap().iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"));
    r.records().map(|rec| rec.unwrap()[idx].to_owned()).collect()
}

#[test]
fn keygen_writes_key_files() {
    let dir = tempfile::tempdir().unwrap();
    ok(&ppshare(&["keygen", "--bits", "256", "--out-dir", "c"], dir.path()));
    assert_eq!(fs::read_dir(dir.path().join("c")).unwrap().count(), 2);

    ok(&ppshare(&["keygen", "--bits", "128", "--key-mode", "threshold:3", "--users", "5", "--out-dir", "t"], dir.path()));
    let mut names: Vec<_> =
        fs::read_dir(dir.path().join("t")).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    names.sort();
    assert_eq!(names, ["public.json", "share_1.json", "share_2.json", "share_3.json", "share_4.json", "share_5.json"]);

    let bad = ppshare(&["keygen", "--bits", "128", "--key-mode", "threshold:1", "--users", "2"], dir.path());
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn ufs_run_matches_plaintext_and_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let bits = [[1, 0, 1, 0], [1, 1, 0, 0], [0, 0, 1, 0]];
    let text: String = bits.iter().map(|r| r.map(|b| b.to_string()).join(",") + "\n").collect();
    fs::write(d.join("b.csv"), text).unwrap();
    ok(&ppshare(&["keygen", "--bits", "256", "--seed", "4", "--out-dir", "k"], d));
    let args = ["run", "--protocol", "ufs", "--inputs", "b.csv", "--keys", "k", "--seed", "8", "--out-dir", "o"];
    ok(&ppshare(&args, d));

    assert_eq!(column(&d.join("o/operator.csv"), "coarse"), ["1", "1", "1", "0"]);
    let counts = [2, 1, 2, 0];
    for (i, row) in bits.iter().enumerate() {
        let seen = column(&d.join(format!("o/user_{}.csv", i + 1)), "count");
        for j in 0..4 {
            let expect = if row[j] == 1 { counts[j].to_string() } else { "?".into() };
            assert_eq!(seen[j], expect, "user {} slot {}", i + 1, j + 1);
        }
    }
    assert_eq!(column(&d.join("o/fees.csv"), "fee"), ["1", "3/2", "1/2"]);
    assert_eq!(csv_rows(&d.join("o/traffic.csv")).len(), 21);

    let before: Vec<_> = ["operator.csv", "user_1.csv", "access_keys.csv", "traffic.csv"]
        .iter()
        .map(|f| fs::read(d.join("o").join(f)).unwrap())
        .collect();
    ok(&ppshare(&args, d));
    let after: Vec<_> = ["operator.csv", "user_1.csv", "access_keys.csv", "traffic.csv"]
        .iter()
        .map(|f| fs::read(d.join("o").join(f)).unwrap())
        .collect();
    assert_eq!(before, after);
}

#[test]
fn cfs_run_reports_tiers() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    // 15 users; slot 1 fully booked, slot 2 by 7 users, slot 3 empty but for user 1.
    let text: String = (1..=15).map(|i| format!("1,{},{}\n", u8::from(i <= 7), u8::from(i == 1))).collect();
    fs::write(d.join("b.csv"), text).unwrap();
    let out = ppshare(
        &["run", "--protocol", "cfs", "--capacities", "10,20", "--inputs", "b.csv", "--bits", "256", "--seed", "1", "--out-dir", "o"],
        d,
    );
    ok(&out);
    assert_eq!(column(&d.join("o/operator.csv"), "coarse"), ["2", "1", "1"]);
}

#[test]
fn css_run_shares_sum_to_one() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let text: String = (0..20).map(|i| format!("{}.5,1{}.2,10,20\n", 10 + i % 10, i % 10)).collect();
    fs::write(d.join("p.csv"), text).unwrap();
    fs::write(d.join("run.toml"), "protocol = \"css\"\nthreshold_c = 100\nscale = 10\nkey_bits = 256\nseed = 3\n").unwrap();
    ok(&ppshare(&["run", "--config", "run.toml", "--inputs", "p.csv", "--out-dir", "o"], d));
    let actions = column(&d.join("o/operator.csv"), "slot");
    assert_eq!(actions, ["1", "2", "3", "4"]);
    for k in 0..actions.len() {
        let sum: f64 = (1..=20)
            .map(|i| column(&d.join(format!("o/user_{i}.csv")), "fraction_approx")[k].parse::<f64>().unwrap())
            .sum();
        assert!((sum - 1.0).abs() < 1e-3, "action {}: shares sum to {sum}", k + 1);
    }
}

#[test]
fn input_errors_and_aborts_have_distinct_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("b.csv"), "1,0\n1,1\n").unwrap();
    let mismatch = ppshare(&["run", "--protocol", "ufs", "--users", "3", "--inputs", "b.csv", "--bits", "256", "--seed", "1"], d);
    assert_eq!(mismatch.status.code(), Some(2));
    let missing = ppshare(&["run", "--protocol", "ufs", "--inputs", "nope.csv", "--seed", "1"], d);
    assert_eq!(missing.status.code(), Some(2));
    let abort = ppshare(
        &["run", "--protocol", "cfs", "--capacities", "1", "--inputs", "b.csv", "--bits", "256", "--seed", "1", "--out-dir", "o"],
        d,
    );
    assert_eq!(abort.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&abort.stderr).contains("capacity"));
}

#[test]
fn omitted_seed_is_printed() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("b.csv"), "1\n").unwrap();
    let out = ppshare(&["run", "--protocol", "ufs", "--inputs", "b.csv", "--bits", "256"], dir.path());
    ok(&out);
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("seed: "));
}

#[test]
fn eval_scale_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let out = ppshare(
        &["eval", "--protocol", "ufs", "--sweep", "S=1,10,100", "--slots", "12", "--repetitions", "3", "--seed", "2"],
        dir.path(),
    );
    ok(&out);
    let mre = column(&dir.path().join("out/report.csv"), "mre");
    assert_eq!(mre.len(), 3);
    assert!(mre[0].parse::<f64>().unwrap() > 0.0);
    assert_eq!(mre[2].parse::<f64>().unwrap(), 0.0);
}

#[test]
fn eval_user_sweep_for_css_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let out = ppshare(
        &["eval", "--protocol", "css", "--sweep", "N=4..20:4", "--scale", "10", "--slots", "10", "--repetitions", "2", "--seed", "5"],
        dir.path(),
    );
    ok(&out);
    let mre = column(&dir.path().join("out/report.csv"), "mre");
    assert_eq!(mre.len(), 5);
    assert!(mre.iter().all(|m| m.parse::<f64>().unwrap() == 0.0));
}

#[test]
fn eval_bench_fills_stage_times() {
    let dir = tempfile::tempdir().unwrap();
    let out = ppshare(
        &["eval", "--bench", "--users", "4", "--slots", "4", "--repetitions", "2", "--seed", "1"],
        dir.path(),
    );
    ok(&out);
    let path = dir.path().join("out/report.csv");
    for col in ["op_stage1_s", "op_stage2_s", "user_stage1_s", "user_stage2_s"] {
        assert!(column(&path, col)[0].parse::<f64>().unwrap() > 0.0, "{col} empty");
    }
}

#[test]
fn env_vars_mirror_flags() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_ppshare"))
        .args(["eval", "--repetitions", "1"])
        .current_dir(dir.path())
        .env("PPSHARE_USERS", "3")
        .env("PPSHARE_SLOTS", "2")
        .env("PPSHARE_SEED", "1")
        .output()
        .unwrap();
    ok(&out);
    assert_eq!(column(&dir.path().join("out/report.csv"), "N"), ["3"]);
}
