use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn uwbsim(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_uwbsim"))
        .args(args)
        .current_dir(dir)
        .env_remove("UWBSIM_WORKERS")
        .output()
        .expect("spawn uwbsim")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("run.ini");
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn csv_files(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".csv"))
        .collect();
    names.sort();
    names
}

const SMALL_BER: &str = "\
experiment = ber
schemes = tr, ar
chips = 16
users = 2
delay_spread_ns = 5
snr_db = 0:5:10
sigma_xi2 = 0.01
trials = 2000
seed = 7
";

#[test]
fn malformed_config_fails_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "experiment = ber\nchips = many\ncolour = blue\n");
    let out = uwbsim(&["--config", &cfg, "--output", "."], dir.path());
    assert_ne!(out.status.code(), Some(0));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 2"), "{err}");
    assert!(err.contains("line 3"), "{err}");
    assert!(csv_files(dir.path()).is_empty());
}

#[test]
fn invalid_values_fail_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "experiment = ber\nchips = 0\n");
    let out = uwbsim(&["--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(csv_files(dir.path()).is_empty());
}

#[test]
fn check_only_validates() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_BER);
    let out = uwbsim(&["--config", &cfg, "--check"], dir.path());
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("config ok"));
    assert!(csv_files(dir.path()).is_empty());
}

#[test]
fn ber_run_writes_header_and_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_BER);
    let out = uwbsim(&["--config", &cfg, "--output", "res"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(dir.path().join("res/ber.csv")).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# uwbsim "));
    assert!(text.contains("# seed = 7"));
    let rows = text.lines().filter(|l| !l.starts_with('#')).count();
    // header row plus 2 schemes x 3 SNR points
    assert_eq!(rows, 1 + 6);
}

#[test]
fn seed_override_is_reproducible_and_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_BER);
    let run = |seed: &str, out: &str| {
        let o = uwbsim(&["--config", &cfg, "--seed", seed, "--output", out], dir.path());
        assert!(o.status.success());
        fs::read_to_string(dir.path().join(out).join("ber.csv")).unwrap()
    };
    let a = run("11", "a");
    let b = run("11", "b");
    let c = run("12", "c");
    assert_eq!(a, b);
    assert!(a.contains("# seed = 11"));
    assert_ne!(a, c);
}

#[test]
fn worker_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_BER);
    let one = Command::new(env!("CARGO_BIN_EXE_uwbsim"))
        .args(["--config", &cfg, "--output", "one"])
        .current_dir(dir.path())
        .env("UWBSIM_WORKERS", "1")
        .output()
        .unwrap();
    assert!(one.status.success());
    let many = uwbsim(&["--config", &cfg, "--workers", "4", "--output", "many"], dir.path());
    assert!(many.status.success());
    let read = |d: &str| fs::read_to_string(dir.path().join(d).join("ber.csv")).unwrap();
    assert_eq!(read("one"), read("many"));
}

#[test]
fn equivalence_experiment_reports_pass() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "experiment = equivalence\nchips = 16\nusers = 1\ndelay_spread_ns = 5\nsnr_db = 0, 6\n\
         sigma_xi2 = 0\ntrials = 4000\nseed = 3\n",
    );
    let out = uwbsim(&["--config", &cfg], dir.path());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{stdout}");
    assert!(stdout.contains("PASS"));
    assert!(!stdout.contains("FAIL"));
    assert_eq!(csv_files(dir.path()), vec!["equivalence.csv".to_string()]);
}

#[test]
fn missing_config_file_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = uwbsim(&["--config", "nope.ini"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}
