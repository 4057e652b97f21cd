use std::fs;
use std::path::{Path, PathBuf};

use serde_json::Value;

use super::run;
use crate::output::MANIFEST_FILE;

fn go(dir: &Path, args: &[&str]) -> i32 {
    let mut v = vec!["macrohom".to_string(), "--out".into(), dir.display().to_string()];
    v.extend(args.iter().map(|s| s.to_string()));
    run(v)
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join(MANIFEST_FILE)).unwrap()).unwrap()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(|s| s.parse::<f64>().unwrap()).collect())
        .collect();
    (header, rows)
}

const SHORT: &str = "[tau]\nstart = -2.0\nstop = 2.0\nstep = 0.05\n";

#[test]
fn unit_efficiency_detected_equals_ideal() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", &format!("{SHORT}[detection]\neta = 1.0\n"));
    let out = tmp.path().join("o");
    assert_eq!(go(&out, &["trace", "--config", cfg.to_str().unwrap()]), 0);
    let (h, rows) = read_csv(&out.join("trace.csv"));
    assert_eq!(h, ["tau_ps", "nrf_ideal", "nrf_pedestal", "nrf_detected"]);
    assert_eq!(rows.len(), 81);
    assert!(rows.iter().all(|r| r[3] == r[1]));
}

#[test]
fn csv_values_roundtrip_exactly() {
    use macrohom::*;
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", SHORT);
    let out = tmp.path().join("o");
    assert_eq!(go(&out, &["trace", "--config", cfg.to_str().unwrap()]), 0);
    let m = manifest(&out);
    let d = m["config"]["crystal"]["walkoff"].as_f64().unwrap();
    let crystal = CrystalParams::new(10.0, d).unwrap();
    let pump = PumpParams::default();
    let tau = tau_grid(-2.0, 2.0, 0.05).unwrap();
    let grid = SpectralGrid::for_config(&crystal, &pump, 2.0).unwrap();
    let nrf = nrf_trace(&tau, &crystal, &pump, &grid).unwrap();
    let (_, rows) = read_csv(&out.join("trace.csv"));
    for (r, v) in rows.iter().zip(&nrf.value) {
        assert_eq!(r[1], *v);
    }
}

#[test]
fn empty_or_reversed_tau_grid_is_validation_error() {
    let tmp = tempfile::tempdir().unwrap();
    let empty = write_config(tmp.path(), "e.toml", "[tau]\nvalues = []\n");
    assert_eq!(go(&tmp.path().join("o"), &["trace", "--config", empty.to_str().unwrap()]), 2);
    let rev = write_config(tmp.path(), "r.toml", "[tau]\nstart = 1.0\nstop = -1.0\nstep = 0.1\n");
    assert_eq!(go(&tmp.path().join("o"), &["g2", "--config", rev.to_str().unwrap()]), 2);
}

#[test]
fn config_errors_map_to_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let o = tmp.path().join("o");
    let unknown = write_config(tmp.path(), "u.toml", "[pump]\ngain = 2.0\n");
    assert_eq!(go(&o, &["trace", "--config", unknown.to_str().unwrap()]), 2);
    let bad_eta = write_config(tmp.path(), "b.toml", &format!("{SHORT}[detection]\neta = 1.5\n"));
    assert_eq!(go(&o, &["trace", "--config", bad_eta.to_str().unwrap()]), 2);
    let missing = tmp.path().join("nope.toml");
    assert_eq!(go(&o, &["trace", "--config", missing.to_str().unwrap()]), 4);
    assert_eq!(go(&o, &["frobnicate"]), 2);
    assert_eq!(go(&o, &["trace", "--threads", "0"]), 2);
    assert_eq!(go(&o, &["--help"]), 0);
}

#[test]
fn manifest_rerun_is_bit_exact() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", SHORT);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert_eq!(go(&a, &["g2", "--config", cfg.to_str().unwrap()]), 0);
    let man = a.join(MANIFEST_FILE);
    assert_eq!(go(&b, &["g2", "--config", man.to_str().unwrap()]), 0);
    assert_eq!(fs::read(a.join("g2.csv")).unwrap(), fs::read(b.join("g2.csv")).unwrap());
    assert_eq!(manifest(&a)["outputs"], manifest(&b)["outputs"]);
    assert_eq!(manifest(&a)["config"], manifest(&b)["config"]);
    // A manifest cannot be replayed under another subcommand.
    assert_eq!(go(&b, &["trace", "--config", man.to_str().unwrap()]), 2);
}

#[test]
fn g2_single_spatial_mode_edge() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", "[tau]\nstart = -40.0\nstop = 40.0\nstep = 1.0\n[detection]\nm_spatial = 1\n");
    let out = tmp.path().join("o");
    assert_eq!(go(&out, &["g2", "--config", cfg.to_str().unwrap()]), 0);
    let s = &manifest(&out)["summary"];
    let n = s["n_mode"].as_f64().unwrap();
    let edge = s["g2_edge"].as_f64().unwrap();
    assert!((edge - 2.0).abs() < 1e-3, "{edge}");
    assert!(n > 1e5);
    assert!(s["mode_count_g2"].as_f64().unwrap() > 0.99);
}

fn write_gain_data(path: &Path, c: f64) {
    let mut text = String::from("power_mw,intensity\n");
    for i in 1..=12 {
        let p = 5.0 * i as f64;
        text.push_str(&format!("{p:?},{:?}\n", 3.0 * (c * p.sqrt()).sinh().powi(2)));
    }
    fs::write(path, text).unwrap();
}

#[test]
fn fit_gain_closure_and_anchor() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("gain.csv");
    let c = 7.5 / 55f64.sqrt();
    write_gain_data(&data, c);
    let out = tmp.path().join("o");
    assert_eq!(go(&out, &["fit-gain", "--data", data.to_str().unwrap()]), 0);
    let s = &manifest(&out)["summary"];
    assert!((s["c"].as_f64().unwrap() / c - 1.0).abs() < 1e-3);
    assert!((s["scale"].as_f64().unwrap() / 3.0 - 1.0).abs() < 1e-3);
    assert!((s["gain_at_report_power"].as_f64().unwrap() - 7.5).abs() < 7.5e-3);
    let (h, rows) = read_csv(&out.join("fit_residuals.csv"));
    assert_eq!(h, ["power_mw", "intensity", "model", "residual"]);
    assert_eq!(rows.len(), 12);
}

#[test]
fn malformed_gain_data_is_validation_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = tmp.path().join("o");
    let bad_header = write_config(tmp.path(), "h.csv", "p,i\n1,2\n2,3\n");
    assert_eq!(go(&o, &["fit-gain", "--data", bad_header.to_str().unwrap()]), 2);
    let bad_number = write_config(tmp.path(), "n.csv", "power_mw,intensity\n1,2\n2,x\n");
    assert_eq!(go(&o, &["fit-gain", "--data", bad_number.to_str().unwrap()]), 2);
    let ragged = write_config(tmp.path(), "r.csv", "power_mw,intensity\n1,2\n2\n");
    assert_eq!(go(&o, &["fit-gain", "--data", ragged.to_str().unwrap()]), 2);
    assert_eq!(go(&o, &["fit-gain"]), 2);
    assert_eq!(go(&o, &["fit-gain", "--data", "/nonexistent/gain.csv"]), 4);
}

#[test]
fn calibrate_closure_and_monotonicity() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", "[calibrate]\ntargets_nm = [1.3, 2.0]\n");
    let out = tmp.path().join("o");
    assert_eq!(go(&out, &["calibrate", "--config", cfg.to_str().unwrap()]), 0);
    let (_, rows) = read_csv(&out.join("calibration.csv"));
    assert!((rows[0][2] - 1.3).abs() < 1e-3);
    assert!((rows[1][2] - 2.0).abs() < 1e-3);
    // Wider spectrum needs less walk-off.
    assert!(rows[1][1] < rows[0][1]);
    let zero = write_config(tmp.path(), "z.toml", "[pump]\ng_peak = 0.0\n");
    assert_ne!(go(&out, &["calibrate", "--config", zero.to_str().unwrap()]), 0);
}

#[test]
fn mc_seed_reproducible_and_thread_independent() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.toml",
        "[pump]\ng_peak = 3.0\nt_p = 3.0\n[detection]\nn_pulses = 300\n[lattice]\nn_freq_bins = 4\nbins_per_fwhm = 4.0\n[mc.tau]\nvalues = [0.0, 1.0]\n",
    );
    let c = cfg.to_str().unwrap();
    let (a, b, d) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("d"));
    assert_eq!(go(&a, &["mc", "--config", c, "--seed", "7"]), 0);
    assert_eq!(go(&b, &["mc", "--config", c, "--seed", "7", "--threads", "2"]), 0);
    assert_eq!(go(&d, &["mc", "--config", c, "--seed", "8"]), 0);
    let csv = |p: &Path| fs::read(p.join("mc.csv")).unwrap();
    assert_eq!(csv(&a), csv(&b));
    assert_ne!(csv(&a), csv(&d));
    let m = manifest(&a);
    assert_eq!(m["summary"]["seed"], 7);
    assert_eq!(m["summary"]["n_pulses"], 300);
    assert!(m["config"]["lattice"]["n_time_slices"].is_u64());
    let (h, rows) = read_csv(&a.join("mc.csv"));
    assert_eq!(h, ["tau_ps", "nrf_hat", "se_nrf", "g2_hat", "se_g2"]);
    assert_eq!(rows.len(), 2);
    // Replaying the manifest reproduces the ensemble.
    let r = tmp.path().join("r");
    assert_eq!(go(&r, &["mc", "--config", a.join(MANIFEST_FILE).to_str().unwrap()]), 0);
    assert_eq!(csv(&a), csv(&r));
}

#[test]
fn mc_default_pulse_count() {
    let d = crate::RunConfig::default().detection().unwrap();
    assert_eq!(d.n_pulses, 30_000);
}
