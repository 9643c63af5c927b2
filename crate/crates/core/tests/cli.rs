use ledlink::experiments::sweeps::{FIG3_HEADER, FIG4_HEADER};
use ledlink::experiments::{run_fig3_sweep, validate, ExperimentConfig, Status};
use ledlink::pam::SigmaMode;
use std::path::Path;
use std::process::{Command, Output};

fn ledlink(args: &[&str], out_dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ledlink"))
        .args(args)
        .env("LEDLINK_OUTPUT_DIR", out_dir)
        .output()
        .unwrap()
}

#[test]
fn negative_noise_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[noise]\nn0 = -3e-9\n").unwrap();
    let out = ledlink(&["validate", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("n0"));
}

#[test]
fn malformed_file_and_override_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[ofdm]\nn_subcarriers = [64,\n").unwrap();
    let out = ledlink(&["fig3", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line"));

    let out = ledlink(&["fig3", "--set", "ofdm.n_subcarriers=[48]"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let out = ledlink(&["fig3", "--set", "missing-equals"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn output_dir_follows_environment() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("nested/out");
    let out = ledlink(&["fig3", "--set", "ofdm.n_subcarriers=[64]"], &target);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(target.join("fig3.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), FIG3_HEADER.join(","));
    assert!(target.join("fig3.gp").exists());
}

#[test]
fn zero_width_beta_grid_gives_one_row() {
    let cfg = ExperimentConfig::from_toml(
        "[ofdm]\nn_subcarriers = [64]\nmodulation_index = { start = 0.2, stop = 0.2, points = 7 }\n",
        &[],
    )
    .unwrap();
    let t = run_fig3_sweep(&cfg).unwrap();
    assert_eq!(t.rows.len(), 1);
    assert_eq!(t.rows[0][6], "true");
}

#[test]
fn fig4_schema_and_infeasible_rows() {
    let dir = tempfile::tempdir().unwrap();
    // At 0.01 mW nothing meets the BER cap.
    let out = ledlink(
        &[
            "fig4",
            "--set",
            "sweep.peak_power_mw=[0.01]",
            "--set",
            "montecarlo.simulate=false",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("fig4.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), FIG4_HEADER.join(","));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    let schemes: Vec<&str> = rows.iter().map(|r| r[1]).collect();
    assert_eq!(schemes, ["dco-ofdm", "mpam-jow", "mpam-mmse", "mpam-unequalized"]);
    for r in &rows {
        assert_eq!(r[2], "0.00000000e0");
        assert_eq!(r[8], "false");
        assert!(!r[9].is_empty());
    }
}

#[test]
fn as_written_mode_reports_mse_as_information() {
    let mut cfg = ExperimentConfig::default();
    cfg.pam.sigma_mode = SigmaMode::AsWritten;
    let report = validate(&cfg).unwrap();
    assert_eq!(report.get("pam.mmse_vs_simulation").unwrap().status, Status::Info);
}

#[test]
fn default_validation_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = ledlink(&["validate"], dir.path());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "{stdout}");
    assert!(stdout.lines().any(|l| l.starts_with("PASS ofdm.bussgang_alpha")));
    assert!(!stdout.contains("FAIL"));
}
