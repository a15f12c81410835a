//! End-to-end tests of the `ahrs` binary: exit codes, output schemas,
//! determinism, and the closed-loop simulate -> replay self-test.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn ahrs() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ahrs"))
}

fn repo_path(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

fn tmp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("ahrs-cli-test-{tag}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn code(output: &Output) -> i32 {
    output.status.code().expect("process exited")
}

/// A short flight so the binary tests stay quick.
fn short_script(dir: &Path) -> PathBuf {
    let path = dir.join("short.script");
    std::fs::write(
        &path,
        "steady duration_s=20 speed_mps=20\n\
         turn duration_s=10 yaw_rate_dps=6 bank_deg=12\n\
         steady duration_s=10 speed_mps=20\n",
    )
    .unwrap();
    path
}

#[test]
fn simulate_then_replay_round_trip() {
    let dir = tmp_dir("roundtrip");
    let script = short_script(&dir);
    let log = dir.join("log.csv");
    let out = dir.join("replay.csv");

    let sim = ahrs()
        .args(["simulate"])
        .arg(&script)
        .arg("--config")
        .arg(repo_path("configs/pristine.conf"))
        .arg("--out")
        .arg(&log)
        .output()
        .unwrap();
    assert_eq!(code(&sim), 0, "simulate failed: {:?}", sim);

    let rep = ahrs()
        .args(["replay"])
        .arg(&log)
        .arg("--config")
        .arg(repo_path("configs/pristine.conf"))
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(code(&rep), 0, "replay failed: {:?}", rep);

    // Zero-noise self-test: replay output tracks the embedded truth.
    let stdout = String::from_utf8(rep.stdout).unwrap();
    assert!(stdout.contains("errors vs truth"), "summary missing: {stdout}");
    for line in stdout.lines() {
        if let Some(rest) = line.trim().strip_prefix("roll") {
            let deg: f64 = rest
                .split('(')
                .nth(1)
                .unwrap()
                .split_whitespace()
                .next()
                .unwrap()
                .parse()
                .unwrap();
            assert!(deg < 0.1, "zero-noise replay roll error {deg} deg");
        }
    }

    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("t,roll,pitch,yaw,bias_x,bias_y,bias_z,correction_applied,skip_reason"));
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let dir = tmp_dir("determinism");
    let script = short_script(&dir);
    let log_a = dir.join("a.csv");
    let log_b = dir.join("b.csv");
    for (out, _) in [(&log_a, 0), (&log_b, 1)] {
        let sim = ahrs()
            .args(["simulate"])
            .arg(&script)
            .arg("--config")
            .arg(repo_path("configs/default.conf"))
            .arg("--seed")
            .arg("42")
            .arg("--out")
            .arg(out)
            .output()
            .unwrap();
        assert_eq!(code(&sim), 0);
    }
    let a = std::fs::read(&log_a).unwrap();
    let b = std::fs::read(&log_b).unwrap();
    assert_eq!(a, b, "same seed must give byte-identical logs");

    // Different seed differs.
    let log_c = dir.join("c.csv");
    let sim = ahrs()
        .args(["simulate"])
        .arg(&script)
        .arg("--config")
        .arg(repo_path("configs/default.conf"))
        .arg("--seed")
        .arg("43")
        .arg("--out")
        .arg(&log_c)
        .output()
        .unwrap();
    assert_eq!(code(&sim), 0);
    assert_ne!(a, std::fs::read(&log_c).unwrap());
}

#[test]
fn empty_log_exits_1_naming_the_file() {
    let dir = tmp_dir("empty");
    let log = dir.join("empty.csv");
    std::fs::write(&log, "").unwrap();
    let out = ahrs()
        .args(["replay"])
        .arg(&log)
        .arg("--config")
        .arg(repo_path("configs/default.conf"))
        .arg("--out")
        .arg(dir.join("out.csv"))
        .output()
        .unwrap();
    assert_eq!(code(&out), 1);
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("empty.csv"), "stderr: {stderr}");
}

#[test]
fn backwards_timestamp_warns_and_continues() {
    let dir = tmp_dir("backwards");
    let header = "t,gx,gy,gz,ax,ay,az,mx,my,mz,gps_speed,truth_roll,truth_pitch,truth_yaw";
    let mut text = format!("{header}\n");
    for k in 0..50 {
        let t = if k == 10 { 0.05 } else { k as f64 * 0.01 };
        text += &format!("{t},0,0,0,0,0,-9.81,0.25,0,0.4,,,,\n");
    }
    let log = dir.join("log.csv");
    std::fs::write(&log, text).unwrap();
    let out = ahrs()
        .args(["replay"])
        .arg(&log)
        .arg("--config")
        .arg(repo_path("configs/pristine.conf"))
        .arg("--out")
        .arg(dir.join("out.csv"))
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{out:?}");
    let stderr = String::from_utf8(out.stderr).unwrap();
    // The offending data line is line 12 (header + 11 rows).
    assert!(stderr.contains("12"), "stderr: {stderr}");
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("rejected:     1"), "stdout: {stdout}");
}

#[test]
fn invalid_config_exits_2() {
    let dir = tmp_dir("badcfg");
    let cfg = dir.join("bad.conf");
    std::fs::write(&cfg, "[estimator]\nkind = ufo\n").unwrap();
    let out = ahrs()
        .args(["replay", "whatever.csv"])
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out.csv"))
        .output()
        .unwrap();
    assert_eq!(code(&out), 2);
}

#[test]
fn zero_length_script_exits_2() {
    let dir = tmp_dir("badscript");
    let script = dir.join("empty.script");
    std::fs::write(&script, "# no maneuvers\n").unwrap();
    let out = ahrs()
        .args(["simulate"])
        .arg(&script)
        .arg("--config")
        .arg(repo_path("configs/default.conf"))
        .arg("--out")
        .arg(dir.join("log.csv"))
        .output()
        .unwrap();
    assert_eq!(code(&out), 2);
}

#[test]
fn invalid_sweep_spec_exits_2() {
    let dir = tmp_dir("badspec");
    let spec = dir.join("bad.spec");
    std::fs::write(&spec, "channel=thermometer kind=bias upper_dps=3\n").unwrap();
    let out = ahrs()
        .args(["sweep"])
        .arg(&spec)
        .arg("--config")
        .arg(repo_path("configs/default.conf"))
        .arg("--out")
        .arg(dir.join("table.csv"))
        .output()
        .unwrap();
    assert_eq!(code(&out), 2);
}

#[test]
fn skip_reason_strings_in_output_are_stable() {
    // Acrobatic flight (low measured load) at a GPS tick produces the
    // documented stable reason string in the output CSV.
    let dir = tmp_dir("skipreason");
    let header = "t,gx,gy,gz,ax,ay,az,mx,my,mz,gps_speed,truth_roll,truth_pitch,truth_yaw";
    let mut text = format!("{header}\n");
    for k in 0..300 {
        let t = k as f64 * 0.01;
        let gps = if k % 100 == 0 { "20" } else { "" };
        // Near-zero specific force: ballistic, clearly acrobatic.
        text += &format!("{t},0,0,0,0,0,-1.0,0.25,0,0.4,{gps},,,\n");
    }
    let log = dir.join("log.csv");
    std::fs::write(&log, text).unwrap();
    let out_path = dir.join("out.csv");
    let out = ahrs()
        .args(["replay"])
        .arg(&log)
        .arg("--config")
        .arg(repo_path("configs/pristine.conf"))
        .arg("--out")
        .arg(&out_path)
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{out:?}");
    let text = std::fs::read_to_string(&out_path).unwrap();
    assert!(text.contains(",acrobatic"), "output: {}", &text[..500.min(text.len())]);
}

#[test]
fn sweep_single_run_completes_and_emits_rows() {
    // Tiny deterministic sweep: one trial, bias-only.
    let dir = tmp_dir("sweeprun");
    let spec = dir.join("one.spec");
    std::fs::write(&spec, "channel=yaw_rate kind=bias upper_dps=30 trials=1\n").unwrap();
    let table = dir.join("table.csv");
    let out = ahrs()
        .args(["sweep"])
        .arg(&spec)
        .arg("--config")
        .arg(repo_path("configs/default.conf"))
        .arg("--estimator")
        .arg("ukf")
        .arg("--seed")
        .arg("5")
        .arg("--out")
        .arg(&table)
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{out:?}");
    let text = std::fs::read_to_string(&table).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "channel,kind,estimator,tolerance,unit,trials,pass_fraction,evaluations,non_monotone"
    );
    let row = lines.next().unwrap();
    assert!(row.starts_with("yaw_rate,bias,ukf,"), "row: {row}");
}
