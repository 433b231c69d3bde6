//! Process-level checks of the `qsync` binary: exit codes, file outputs,
//! and the serve/run pairing over a real socket.

use std::process::Command;

fn qsync() -> Command {
    Command::new(env!("CARGO_BIN_EXE_qsync"))
}

#[test]
fn run_writes_bundle_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = qsync()
        .args(["run", "--preset", "method1-paper", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("simulated_time_ms=36"), "{stdout}");
    for file in ["histogram.csv", "windows.csv", "summary.json", "effective_config.json"] {
        assert!(dir.path().join(file).exists(), "{file} missing");
    }
}

#[test]
fn invalid_config_fails_nonzero_with_key_path() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.json");
    std::fs::write(&config, r#"{"pulse": {"fwhm_ps": 500, "bogus": 1}}"#).unwrap();
    let out = qsync()
        .args(["run", "--config"])
        .arg(&config)
        .args(["--out"])
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("pulse.bogus"), "{stderr}");
}

#[test]
fn unknown_preset_fails_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let out = qsync()
        .args(["run", "--preset", "nonexistent", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown preset"));
}

#[test]
fn optimize_t_prints_published_optimum() {
    let dir = tempfile::tempdir().unwrap();
    let out = qsync()
        .args(["optimize-t", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("optimal t = 120 ps, total = 36 ms"), "{stdout}");
    let table = std::fs::read_to_string(dir.path().join("optimize.csv")).unwrap();
    assert!(table.starts_with("t_ps,coarse_ms,fine_ms,total_ms\n"));
    assert!(table.contains("\n120,21,15,36\n"));
}

#[test]
fn serve_then_run_over_socket_matches_in_process() {
    let dir = tempfile::tempdir().unwrap();
    let socket = dir.path().join("source.sock");

    let mut server = qsync()
        .args(["serve", "--preset", "method1-paper", "--listen"])
        .arg(&socket)
        .spawn()
        .unwrap();
    for _ in 0..100 {
        if socket.exists() {
            break;
        }
        std::thread::sleep(std::time::Duration::from_millis(20));
    }
    assert!(socket.exists(), "server did not come up");

    let local_dir = dir.path().join("local");
    let remote_dir = dir.path().join("remote");
    let local = qsync()
        .args(["run", "--preset", "method1-paper", "--out"])
        .arg(&local_dir)
        .output()
        .unwrap();
    assert!(local.status.success(), "{}", String::from_utf8_lossy(&local.stderr));
    let remote = qsync()
        .args(["run", "--preset", "method1-paper", "--out"])
        .arg(&remote_dir)
        .args(["--source"])
        .arg(&socket)
        .output()
        .unwrap();
    assert!(remote.status.success(), "{}", String::from_utf8_lossy(&remote.stderr));

    for file in ["histogram.csv", "windows.csv", "summary.json"] {
        assert_eq!(
            std::fs::read(local_dir.join(file)).unwrap(),
            std::fs::read(remote_dir.join(file)).unwrap(),
            "{file} differs over the wire"
        );
    }
    let _ = server.kill();
    let _ = server.wait();
}

#[test]
fn drift_command_writes_series() {
    let dir = tempfile::tempdir().unwrap();
    let out = qsync()
        .args(["drift", "--days", "3", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    let csv = std::fs::read_to_string(dir.path().join("drift.csv")).unwrap();
    assert!(csv.starts_with("day,detector_id,window_ps,delta_vs_ref_ps\n"));
    assert_eq!(csv.lines().count(), 1 + 3 * 4);
}
