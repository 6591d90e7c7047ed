use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn qacoustic(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qacoustic"))
        .args(["--out", dir.to_str().unwrap()])
        .args(args)
        .env_remove("QACOUSTIC_OUT")
        .env_remove("QACOUSTIC_THREADS")
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("run.toml");
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn manifest(dir: &Path, cmd: &str) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join(format!("{cmd}.manifest.json"))).unwrap()).unwrap()
}

#[test]
fn pt_benchmark_is_byte_identical_across_runs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let out = qacoustic(d.path(), &["--preset", "desk", "pt-benchmark"]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let ca = fs::read_to_string(a.path().join("pt-benchmark.csv")).unwrap();
    let cb = fs::read_to_string(b.path().join("pt-benchmark.csv")).unwrap();
    assert_eq!(ca, cb);
    let m = manifest(a.path(), "pt-benchmark");
    let hash = m["config_hash"].as_str().unwrap();
    assert_eq!(hash.len(), 64);
    assert!(ca.starts_with(&format!("# config_hash={hash}")));
    assert!(ca.contains("T_K,inv_tau_full_per_fs,inv_tau_mf_per_fs,R,err_est"));
    assert!(m["wall_time_s"].as_f64().unwrap() >= 0.0);
    assert_eq!(m["version"], env!("CARGO_PKG_VERSION"));
}

#[test]
fn noise_validate_passes_and_corrupted_kernel_fails() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), "[analysis]\nnoise_realizations = 2000\nnoise_steps = 128\nnoise_max_lag = 32\n");
    let ok = qacoustic(d.path(), &["--config", &cfg, "noise-validate"]);
    assert!(ok.status.success(), "{}", String::from_utf8_lossy(&ok.stderr));
    let report = fs::read_to_string(d.path().join("noise-validate.csv")).unwrap();
    assert!(report.contains("lag,max_abs_deviation,max_sigmas,worst_a,worst_b"));
    assert_eq!(report.lines().filter(|l| !l.starts_with('#')).count(), 1 + 33);
    assert_eq!(manifest(d.path(), "noise-validate")["seeds"].as_array().unwrap().len(), 2000);

    let bad = qacoustic(d.path(), &["--config", &cfg, "noise-validate", "--corrupt-kernel"]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(!manifest(d.path(), "noise-validate")["violations"].as_array().unwrap().is_empty());
}

#[test]
fn defpot_stats_reports_zero_rms_at_zero_temperature() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), "[physics]\nt_list_td = []\nt_list_k = [0.0]\n[analysis]\ndefpot_draws = 2\n");
    let out = qacoustic(d.path(), &["--preset", "desk", "--config", &cfg, "defpot-stats"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(d.path().join("defpot-stats.csv")).unwrap();
    assert!(csv.contains("# low_T_exponent="));
    let row = csv.lines().find(|l| l.starts_with("0.000000,")).unwrap();
    let rms: f64 = row.split(',').nth(3).unwrap().parse().unwrap();
    assert_eq!(rms, 0.0);
}

#[test]
fn uncoupled_relax_sweep_reports_failed_fits() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(
        d.path(),
        "[material]\ne_d = 0.0\n[physics]\nnoise_enabled = false\nt_list_td = [0.5, 1.0]\n[time]\nn_steps = 40\n[ensemble]\nn_realizations = 2\n",
    );
    let out = qacoustic(d.path(), &["--preset", "desk", "--config", &cfg, "--seed", "7", "relax-sweep"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(d.path().join("relax-sweep.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
    assert_eq!(rows.len(), 2);
    for r in rows {
        let cols: Vec<&str> = r.split(',').collect();
        assert_eq!(cols[8], "false");
        assert_eq!(cols[9], "false");
    }
    let m = manifest(d.path(), "relax-sweep");
    assert_eq!(m["master_seed"], 7);
    assert_eq!(m["seeds"].as_array().unwrap().len(), 2);
}

#[test]
fn invalid_settings_exit_nonzero_before_running() {
    let d = tempfile::tempdir().unwrap();
    let out = qacoustic(d.path(), &["--preset", "huge", "pt-benchmark"]);
    assert_eq!(out.status.code(), Some(2));
    let cfg = write_config(d.path(), "[grid]\nn = 16\n");
    let out = qacoustic(d.path(), &["--preset", "desk", "--config", &cfg, "spread-sweep"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("configuration error"));
    let cfg = write_config(d.path(), "[grid]\nbogus = 1\n");
    let out = qacoustic(d.path(), &["--config", &cfg, "pt-benchmark"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn output_directory_from_environment() {
    let d = tempfile::tempdir().unwrap();
    let target = d.path().join("from-env");
    let out = Command::new(env!("CARGO_BIN_EXE_qacoustic"))
        .args(["--preset", "desk", "pt-benchmark"])
        .env("QACOUSTIC_OUT", &target)
        .env("QACOUSTIC_THREADS", "1")
        .env("RUST_LOG", "warn")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(target.join("pt-benchmark.csv").exists());
    assert!(target.join("pt-benchmark.manifest.json").exists());
}

#[test]
fn uncoupled_spread_sweep_matches_free_spreading() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(
        d.path(),
        "[material]\ne_d = 0.0\n[physics]\nt_list_td = [0.2]\n[time]\nn_steps = 100\n[ensemble]\nn_realizations = 2\n[analysis]\nspread_window_fs = 3.0\n",
    );
    let out = qacoustic(d.path(), &["--preset", "desk", "--config", &cfg, "spread-sweep"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(d.path().join("spread-sweep.csv")).unwrap();
    let rows: Vec<Vec<String>> =
        csv.lines().filter(|l| !l.starts_with('#')).skip(1).map(|l| l.split(',').map(String::from).collect()).collect();
    assert_eq!(rows.len(), 2);
    for r in rows {
        let mat = qacoustic::MaterialParams::by_name(&r[0]).unwrap();
        let tau = qacoustic::UnitSystem::time_to_fs(2.0 * mat.mass());
        let want = (2.0 * (1.0 + 9.0 / (3.0 * tau * tau))).sqrt();
        let st: f64 = r[4].parse().unwrap();
        let mf: f64 = r[5].parse().unwrap();
        assert!((st / want - 1.0).abs() < 1e-3 && (mf / want - 1.0).abs() < 1e-3, "{st} {mf} {want}");
    }
}
