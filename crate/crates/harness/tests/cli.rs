//! End-to-end checks of the `ksw` binary: file round trips, report
//! output, and the documented exit codes (0 ok, 2 config, 3 failure).

use std::path::Path;
use std::process::Command;

fn ksw() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ksw"))
}

fn write_config(dir: &Path, mode: &str, rates: &str) -> std::path::PathBuf {
    let path = dir.join("config.toml");
    let text = format!(
        r#"
ell = 1
n = 16
rates = [{rates}]
trials = 5
mode = "{mode}"
seed = 21
budget = 100000000
min_success = [4, 5]

[model]
kind = "independent"

[schedule]
c = 4
a = [1, 1]
slack_log_coeff = 2

[[schedule.overrides]]
k = 1
gamma = 12
delta_log2 = 6
"#
    );
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn roundtrip_writes_csv_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "oracle", "18");
    let csv = dir.path().join("report.csv");
    let out = ksw()
        .args(["roundtrip", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&csv)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("trial_id,success,len_msg_1,c_profile_digest,enum_steps,wall_ms"));
    assert_eq!(text.lines().count(), 6); // header + 5 trials
}

#[test]
fn encode_then_decode_round_trips_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "any", "18");
    let input = "1011001110001011";
    let out = ksw()
        .args(["encode", "--config"])
        .arg(&config)
        .args(["--inputs", input, "--out-dir"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let msg = dir.path().join("msg_1.bin");
    assert!(msg.exists());

    let out = ksw()
        .args(["decode", "--config"])
        .arg(&config)
        .arg(&msg)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let printed = String::from_utf8_lossy(&out.stdout);
    assert_eq!(printed.trim(), input);
}

#[test]
fn decode_with_oracle_profile_argument() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "oracle", "18");
    let input = "0000111101011010";
    ksw()
        .args(["encode", "--config"])
        .arg(&config)
        .args(["--inputs", input, "--out-dir"])
        .arg(dir.path())
        .output()
        .unwrap();
    let out = ksw()
        .args(["decode", "--config"])
        .arg(&config)
        .args(["--profile", "50"])
        .arg(dir.path().join("msg_1.bin"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), input);
}

#[test]
fn missing_and_malformed_configs_exit_two() {
    let out = ksw().args(["roundtrip"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "ell = \"two\"").unwrap();
    let out = ksw()
        .args(["roundtrip", "--config"])
        .arg(&bad)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn rates_check_flags_starved_rates_with_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let ok_config = write_config(dir.path(), "oracle", "18");
    let out = ksw()
        .args(["rates-check", "--config"])
        .arg(&ok_config)
        .output()
        .unwrap();
    assert!(out.status.success());

    let starved = write_config(dir.path(), "oracle", "2");
    let out = ksw()
        .args(["rates-check", "--config"])
        .arg(&starved)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn profile_prints_values() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "oracle", "18");
    let out = ksw()
        .args(["profile", "--config"])
        .arg(&config)
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("C{1} = 50"), "{text}");
}

#[test]
fn extractor_verify_runs_from_config() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ext.toml");
    let mut text = std::fs::read_to_string(write_config(dir.path(), "oracle", "18")).unwrap();
    text.push_str(
        r#"
[extractor]
kind = "toeplitz"
n = 8
m = 2
k = 4
epsilon = [1, 8]
random_subsets = 10
"#,
    );
    std::fs::write(&path, text).unwrap();
    let out = ksw()
        .args(["extractor-verify", "--config"])
        .arg(&path)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "stdout: {} stderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stdout).contains("worst distance"));
}

#[test]
fn lemmas_quick_battery_passes() {
    let out = ksw().args(["lemmas", "--quick"]).output().unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stdout)
    );
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("heavy-node cap"));
    assert!(text.contains("prime isolation"));
}
