use macrohom::mc::{derive_seed, LatticeSpec};
use macrohom::*;

/// Reduced configuration: short pulse, moderate gain, coarse lattice.
fn setup() -> (CrystalParams, PumpParams, LatticeSpec) {
    let crystal = CrystalParams::new(10.0, 0.2).unwrap();
    let pump = PumpParams { g_peak: 3.0, t_p: 3.0, ..PumpParams::default() };
    let lattice = LatticeSpec::with_bins(&crystal, &pump, 4, 4.0).unwrap();
    (crystal, pump, lattice)
}

fn det(n_pulses: usize) -> DetectionModel {
    DetectionModel { eta: 0.3, m_spatial: 2, noise_var: 0.0, n_pulses }
}

#[test]
fn agrees_with_exact_lattice_moments() {
    let (c, p, lat) = setup();
    let d = det(20_000);
    for (i, tau) in [0.0, 0.3, 1.5 * lat.slice_duration, 4.0 * lat.slice_duration].into_iter().enumerate() {
        let s = simulate_ensemble(&c, &p, &d, &lat, tau, 100 + i as u64).unwrap();
        let e = lattice_expectation(&c, &p, &d, &lat, tau).unwrap();
        assert!((s.nrf_hat - e.nrf_detected).abs() < 3.0 * s.se_nrf, "tau={tau}: {} ± {} vs {}", s.nrf_hat, s.se_nrf, e.nrf_detected);
        assert!((s.g2_hat - e.g2).abs() < 3.0 * s.se_g2, "tau={tau}: {} ± {} vs {}", s.g2_hat, s.se_g2, e.g2);
        assert!((s.mean_s1 - e.mean_s).abs() < 3.0 * s.se_mean_s1);
        assert!((s.mean_s2 - e.mean_s).abs() < 3.0 * s.se_mean_s2);
    }
}

#[test]
fn far_delay_is_shot_noise() {
    let (c, p, lat) = setup();
    let d = det(5_000);
    let tau = (lat.n_time_slices as f64 - 1.0) * lat.slice_duration;
    let s = simulate_ensemble(&c, &p, &d, &lat, tau, 5).unwrap();
    assert!((s.nrf_hat - 1.0).abs() < 3.0 * s.se_nrf, "{} ± {}", s.nrf_hat, s.se_nrf);
}

#[test]
fn electronic_noise_enters_as_expected() {
    let (c, p, lat) = setup();
    let d = DetectionModel { noise_var: 50.0, ..det(20_000) };
    let s = simulate_ensemble(&c, &p, &d, &lat, 0.0, 8).unwrap();
    let e = lattice_expectation(&c, &p, &d, &lat, 0.0).unwrap();
    assert!((s.nrf_hat - e.nrf_detected).abs() < 3.0 * s.se_nrf);
}

#[test]
fn loss_follows_affine_law() {
    let (c, p, lat) = setup();
    let ideal = simulate_ensemble(&c, &p, &DetectionModel { eta: 1.0, ..det(10_000) }, &lat, 0.0, 77).unwrap();
    for eta in [0.03, 0.3] {
        let s = simulate_ensemble(&c, &p, &DetectionModel { eta, ..det(10_000) }, &lat, 0.0, 77).unwrap();
        let predicted = 1.0 + eta * (ideal.nrf_hat - 1.0);
        let se = (s.se_nrf.powi(2) + (eta * ideal.se_nrf).powi(2)).sqrt();
        assert!((s.nrf_hat - predicted).abs() < 3.0 * se, "eta={eta}: {} vs {predicted} ± {se}", s.nrf_hat);
    }
}

#[test]
fn jackknife_error_scales_with_ensemble_size() {
    let (c, p, lat) = setup();
    let small = simulate_ensemble(&c, &p, &det(3_000), &lat, 0.0, 11).unwrap();
    let large = simulate_ensemble(&c, &p, &det(30_000), &lat, 0.0, 12).unwrap();
    let ratio = small.se_nrf / large.se_nrf;
    let expect = 10f64.sqrt();
    assert!((ratio / expect - 1.0).abs() < 0.2, "ratio {ratio}");
    assert!(small.se_g2 > 0.0 && large.se_g2 > 0.0);
}

#[test]
fn vacuum_is_degenerate() {
    let (c, p, lat) = setup();
    let vac = p.with_gain(0.0);
    let s = simulate_ensemble(&c, &vac, &det(2_000), &lat, 0.0, 3).unwrap();
    assert!(s.degenerate);
    assert_eq!(s.nrf_hat, 1.0);
    assert_eq!(s.g2_hat, 1.0);
    assert!(s.mean_s1.abs() < 3.0 * s.se_mean_s1);
    assert!(s.mean_s2.abs() < 3.0 * s.se_mean_s2);
}

#[test]
fn seed_determinism_and_thread_independence() {
    let (c, p, lat) = setup();
    let d = det(500);
    let a = simulate_ensemble(&c, &p, &d, &lat, 0.2, 2024).unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
    let b = pool.install(|| simulate_ensemble(&c, &p, &d, &lat, 0.2, 2024).unwrap());
    assert_eq!(a, b);
}

#[test]
fn single_point_scan_matches_ensemble() {
    let (c, p, lat) = setup();
    let d = det(300);
    let scan = dip_scan(&c, &p, &d, &lat, &[0.4], 9).unwrap();
    let one = simulate_ensemble(&c, &p, &d, &lat, 0.4, derive_seed(9, 0)).unwrap();
    assert_eq!(scan, vec![one]);
    assert!(dip_scan(&c, &p, &d, &lat, &[], 9).is_err());
}

#[test]
fn lattice_guards() {
    let (c, p, lat) = setup();
    let d = det(10);
    let far = lat.slice_duration * lat.n_time_slices as f64;
    assert!(matches!(
        simulate_ensemble(&c, &p, &d, &lat, far, 1),
        Err(HomError::LatticeResolution(_))
    ));
    let coarse = LatticeSpec { bin_width: 4.0 / lat.slice_duration, ..lat };
    assert!(coarse.validate(&p).is_err());
    let short = LatticeSpec { n_time_slices: 1, ..lat };
    assert!(short.validate(&p).is_err());
}
