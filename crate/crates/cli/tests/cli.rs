use std::fs;
use std::process::{Command, Output};

fn robust_ea(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_robust-ea"))
        .args(args)
        .env_remove("ROBUST_EA_WORKERS")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn column(csv: &str, name: &str) -> Vec<String> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let idx = header.iter().position(|h| *h == name).unwrap();
    lines
        .map(|l| l.split(',').nth(idx).unwrap().to_string())
        .collect()
}

#[test]
fn sweep_is_identical_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("sweep.toml");
    fs::write(
        &spec,
        "family = \"onemax\"\nn = [16, 24]\nk = \"n/2\"\nd = [1, 3]\ntrials = 30\nmaster_seed = 11\n",
    )
    .unwrap();
    let mut outputs = Vec::new();
    for workers in ["1", "8"] {
        let out = dir.path().join(format!("w{workers}.csv"));
        let res = robust_ea(&[
            "sweep",
            "--spec",
            spec.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--workers",
            workers,
        ]);
        assert!(
            res.status.success(),
            "{}",
            String::from_utf8_lossy(&res.stderr)
        );
        outputs.push(fs::read(&out).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(
        String::from_utf8(outputs[0].clone())
            .unwrap()
            .lines()
            .count(),
        5
    );
}

#[test]
fn workers_env_is_honoured() {
    let out = Command::new(env!("CARGO_BIN_EXE_robust-ea"))
        .args([
            "run", "--family", "onemax", "--n", "12", "--k", "6", "--d", "1", "--seed", "3",
            "--trials", "10",
        ])
        .env("ROBUST_EA_WORKERS", "0")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--workers"));
}

#[test]
fn efht_single_bit() {
    let out = robust_ea(&[
        "oracle-efht",
        "--kind",
        "deletion-onemax",
        "--n",
        "1",
        "--k",
        "1",
        "--d",
        "0",
        "--exact",
    ]);
    assert!(out.status.success());
    let csv = stdout(&out);
    assert_eq!(column(&csv, "mean_evaluations"), ["1.5"]);
    assert_eq!(column(&csv, "exact_mean_evaluations"), ["3/2"]);
}

#[test]
fn efht_full_chain_matches_lumped() {
    let lumped = robust_ea(&[
        "oracle-efht",
        "--kind",
        "deletion-onemax",
        "--n",
        "8",
        "--k",
        "5",
        "--d",
        "2",
    ]);
    let full = robust_ea(&[
        "oracle-efht",
        "--kind",
        "deletion-onemax",
        "--n",
        "8",
        "--k",
        "5",
        "--d",
        "2",
        "--full",
    ]);
    let a: f64 = column(&stdout(&lumped), "mean_evaluations")[0]
        .parse()
        .unwrap();
    let b: f64 = column(&stdout(&full), "mean_evaluations")[0]
        .parse()
        .unwrap();
    assert!((a - b).abs() <= 1e-9 * a);
}

#[test]
fn plateau_run_is_slow() {
    let out = robust_ea(&[
        "run",
        "--family",
        "thm8",
        "--n",
        "10",
        "--d",
        "4",
        "--seed",
        "1",
        "--trials",
        "100",
        "--max-evals",
        "100000000",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = stdout(&out);
    assert_eq!(column(&csv, "censored"), ["0"]);
    let mean: f64 = column(&csv, "mean")[0].parse().unwrap();
    assert!(mean >= 63.0, "mean {mean}");
}

#[test]
fn run_is_reproducible() {
    let args = [
        "run", "--family", "binval", "--n", "20", "--k", "10", "--d", "2", "--seed", "9",
        "--trials", "20", "--format", "jsonl",
    ];
    assert_eq!(robust_ea(&args).stdout, robust_ea(&args).stdout);
}

#[test]
fn brute_checks_pass_on_a_small_instance() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("inst.toml");
    fs::write(&inst, "family = \"linear\"\nn = 6\nk = 4\nd = 1\nweights = [\"3\", \"5/2\", \"2\", \"1\", \"1\", \"1\"]\n").unwrap();
    let path = inst.to_str().unwrap();
    let out = robust_ea(&["oracle-brute", "--instance", path, "--check-F"]);
    assert!(out.status.success());
    assert_eq!(column(&stdout(&out), "mismatches"), ["0"]);
    let out = robust_ea(&["oracle-brute", "--instance", path, "--optimum"]);
    assert!(out.status.success());
    assert_eq!(column(&stdout(&out), "brute_optimum"), ["11/2"]);
}

#[test]
fn drift_check_passes_with_default_bound() {
    let out = robust_ea(&[
        "drift",
        "--family",
        "onemax_phase2",
        "--params",
        "n=20,k=12,d=3",
        "--states",
        "ladder:4..11",
        "--samples",
        "2000",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let flagged = column(&stdout(&out), "flagged");
    assert_eq!(flagged.len(), 8);
    assert!(flagged.iter().all(|f| f == "false"));
}

#[test]
fn drift_flags_an_unmet_bound() {
    let out = robust_ea(&[
        "drift",
        "--family",
        "onemax_phase2",
        "--params",
        "n=20,k=12,d=3",
        "--states",
        "ladder:4..11",
        "--samples",
        "2000",
        "--bound",
        "additive:5",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn quick_verify_passes() {
    let out = robust_ea(&["verify", "--quick"]);
    let text = stdout(&out);
    assert!(out.status.success(), "{text}");
    assert_eq!(
        text.lines().filter(|l| l.contains(" PASS ")).count(),
        10,
        "{text}"
    );
}

#[test]
fn usage_errors_exit_with_one() {
    for args in [
        vec!["bogus"],
        vec!["run", "--n", "5"],
        vec![
            "run", "--family", "onemax", "--n", "5", "--k", "9", "--d", "1", "--seed", "1",
        ],
        vec![
            "oracle-efht",
            "--kind",
            "deletion-onemax",
            "--n",
            "5",
            "--d",
            "1",
        ],
        vec![
            "oracle-efht",
            "--kind",
            "accept-all",
            "--n",
            "5",
            "--d",
            "2",
            "--full",
        ],
        vec!["drift", "--family", "nope", "--states", "ladder:0..1"],
        vec![
            "drift",
            "--family",
            "binval_phase2a",
            "--params",
            "n=10,k=6,d=2",
            "--states",
            "ladder:3..6",
        ],
        vec!["verify", "--criterion", "11"],
    ] {
        let out = robust_ea(&args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        let err = String::from_utf8_lossy(&out.stderr);
        assert_eq!(err.trim_end().lines().count(), 1, "{args:?}: {err}");
        assert!(err.starts_with("error:"), "{err}");
    }
}

#[test]
fn help_exits_zero() {
    let out = robust_ea(&["--help"]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("oracle-efht"));
}
