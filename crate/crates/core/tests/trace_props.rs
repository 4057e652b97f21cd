use approx::assert_relative_eq;
use macrohom::trace::{fwhm_pedestal, tau_grid};
use macrohom::*;

fn calibrated() -> (CrystalParams, PumpParams) {
    let pump = PumpParams::default();
    (calibrate_walkoff(1.3, &pump, 10.0).unwrap(), pump)
}

fn symmetric_tau() -> Vec<f64> {
    tau_grid(-30.0, 30.0, 0.05).unwrap()
}

#[test]
fn pedestal_is_even() {
    let (c, p) = calibrated();
    let tau = symmetric_tau();
    let grid = SpectralGrid::for_config(&c, &p, 30.0).unwrap();
    let ped = pedestal_trace(&tau, &c, &p, &grid).unwrap();
    let n = tau.len();
    for i in 0..n / 2 {
        let (a, b) = (ped.value[i], ped.value[n - 1 - i]);
        assert!((a - b).abs() <= 1e-8 * a.abs().max(b.abs()), "tau={} {a} {b}", tau[i]);
    }
}

#[test]
fn zero_walkoff_nrf_is_even() {
    let c = CrystalParams::new(10.0, 0.0).unwrap();
    let p = PumpParams::default();
    let tau = symmetric_tau();
    let nrf = nrf_trace(&tau, &c, &p, &SpectralGrid::single_mode()).unwrap();
    let n = tau.len();
    for i in 0..n / 2 {
        let (a, b) = (nrf.value[i], nrf.value[n - 1 - i]);
        assert!((a - b).abs() <= 1e-8 * a.abs().max(b.abs()));
    }
}

#[test]
fn nrf_at_least_shot_noise() {
    let (c, p) = calibrated();
    let tau = symmetric_tau();
    let grid = SpectralGrid::for_config(&c, &p, 30.0).unwrap();
    let nrf = nrf_trace(&tau, &c, &p, &grid).unwrap();
    assert!(nrf.value.iter().all(|&v| v >= 1.0 - 1e-6));
    let ped = pedestal_trace(&tau, &c, &p, &grid).unwrap();
    let i0 = tau.iter().position(|t| *t == 0.0).unwrap();
    assert!(ped.value[i0] <= nrf.value[i0]);
}

#[test]
fn baseline_far_from_pulse() {
    let (c, p) = calibrated();
    let tau = vec![-200.0, -120.0, 120.0, 200.0];
    let grid = SpectralGrid::for_config(&c, &p, 200.0).unwrap();
    let nrf = nrf_trace(&tau, &c, &p, &grid).unwrap();
    let peak = nrf_trace(&[0.0], &c, &p, &grid).unwrap().value[0];
    let n = p.g_peak.sinh().powi(2);
    for v in &nrf.value {
        assert!((v - 1.0).abs() < 1e-3 * (peak - 1.0) / (2.0 * n), "{v}");
    }
}

#[test]
fn detection_commutes_with_subtraction() {
    let (c, p) = calibrated();
    let tau = tau_grid(-5.0, 5.0, 0.1).unwrap();
    let grid = SpectralGrid::for_config(&c, &p, 5.0).unwrap();
    let nrf = nrf_trace(&tau, &c, &p, &grid).unwrap();
    let ped = pedestal_trace(&tau, &c, &p, &grid).unwrap();
    for eta in [0.03, 0.5, 1.0] {
        let det = DetectionModel { eta, ..Default::default() };
        let dn = detected_trace(&nrf, &det).unwrap();
        let dp = detected_trace(&ped, &det).unwrap();
        for i in 0..tau.len() {
            let lhs = dn.value[i] - dp.value[i];
            let rhs = eta * (nrf.value[i] - ped.value[i]);
            assert!((lhs - rhs).abs() <= 1e-12 * dn.value[i].abs());
        }
        // FWHM of the narrow component is unchanged by detection.
        let w0 = fwhm_narrow(&nrf, &ped).unwrap();
        assert_relative_eq!(fwhm_narrow(&dn, &dp).unwrap(), w0, max_relative = 1e-9);
    }
}

#[test]
fn grid_doubling_is_stable() {
    let (c, p) = calibrated();
    let tau = tau_grid(-20.0, 20.0, 0.25).unwrap();
    let g1 = SpectralGrid::for_config(&c, &p, 20.0).unwrap();
    let g2 = SpectralGrid::for_config_scaled(&c, &p, 20.0, 2).unwrap();
    assert_eq!(g2.len(), 2 * g1.len());
    let a = nrf_trace(&tau, &c, &p, &g1).unwrap();
    let b = nrf_trace(&tau, &c, &p, &g2).unwrap();
    for (x, y) in a.value.iter().zip(&b.value) {
        assert!((x - y).abs() <= 1e-6 * x.abs());
    }
}

#[test]
fn traces_are_deterministic_across_thread_counts() {
    let (c, p) = calibrated();
    let tau = tau_grid(-10.0, 10.0, 0.05).unwrap();
    let grid = SpectralGrid::for_config(&c, &p, 10.0).unwrap();
    let a = nrf_trace(&tau, &c, &p, &grid).unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
    let b = pool.install(|| nrf_trace(&tau, &c, &p, &grid).unwrap());
    assert_eq!(a.value, b.value);
}

#[test]
fn resolution_violation_is_an_error() {
    let (c, p) = calibrated();
    let grid = SpectralGrid::for_config(&c, &p, 1.0).unwrap();
    let err = nrf_trace(&[-1e4, 1e4], &c, &p, &grid).unwrap_err();
    assert!(matches!(err, HomError::GridResolution(_)));
}

#[test]
fn g2_singles_independent_of_delay() {
    let (c, p) = calibrated();
    let tau = tau_grid(-20.0, 20.0, 0.5).unwrap();
    let grid = SpectralGrid::for_config(&c, &p, 20.0).unwrap();
    let r = g2_trace(&tau, &c, &p, &grid, &DetectionModel::default()).unwrap();
    let s0 = r.singles[0];
    assert!(r.singles.iter().all(|s| (s - s0).abs() <= 1e-10 * s0));
    // Edge value follows the multimode reduction of 2 + 1/(2N).
    let edge = r.trace.value[0];
    assert_relative_eq!(edge, 1.0 + (1.0 + 1.0 / (2.0 * r.n_mode)) / 10.0, max_relative = 1e-6);
}

#[test]
fn g2_approaches_one_for_many_modes() {
    let (c, p) = calibrated();
    let tau = tau_grid(-20.0, 20.0, 0.5).unwrap();
    let grid = SpectralGrid::for_config(&c, &p, 20.0).unwrap();
    let det = DetectionModel { m_spatial: 1_000_000, ..Default::default() };
    let r = g2_trace(&tau, &c, &p, &grid, &det).unwrap();
    assert!(r.trace.value.iter().all(|v| (v - 1.0).abs() < 2e-6));
}

#[test]
fn m_long_grows_with_pulse_duration() {
    let pump = PumpParams::default();
    let c = calibrate_walkoff(1.3, &pump, 10.0).unwrap();
    let mut m = Vec::new();
    for t_p in [9.0, 18.0, 36.0] {
        let p = PumpParams { t_p, ..pump };
        let half = 2.5 * t_p;
        let tau = tau_grid(-half, half, 0.01).unwrap();
        let grid = SpectralGrid::for_config(&c, &p, half).unwrap();
        let nrf = nrf_trace(&tau, &c, &p, &grid).unwrap();
        let ped = pedestal_trace(&tau, &c, &p, &grid).unwrap();
        m.push(mode_count_long(&nrf, &ped).unwrap());
        assert!(fwhm_pedestal(&ped).unwrap() > 0.0);
    }
    assert!(m[0] < m[1] && m[1] < m[2], "{m:?}");
    // Roughly linear in t_p.
    assert_relative_eq!(m[2] / m[1], 2.0, max_relative = 0.15);
    assert_relative_eq!(m[1] / m[0], 2.0, max_relative = 0.15);
}

#[test]
fn fwhm_vs_gain_consistency() {
    let (c, p) = calibrated();
    let tau = tau_grid(-3.0, 3.0, 0.005).unwrap();
    let table = fwhm_vs_gain(&[7.5], &c, &p, &tau).unwrap();
    assert_eq!(table.len(), 1);
    let grid = SpectralGrid::for_config(&c, &p, 3.0).unwrap();
    let direct = fwhm_narrow(
        &nrf_trace(&tau, &c, &p, &grid).unwrap(),
        &pedestal_trace(&tau, &c, &p, &grid).unwrap(),
    )
    .unwrap();
    assert_eq!(table[0].1, direct);
    let sweep = fwhm_vs_gain(&[5.5, 6.0, 6.5, 7.0, 7.5], &c, &p, &tau).unwrap();
    assert!(sweep.windows(2).all(|w| w[1].1 <= w[0].1));
    assert!(fwhm_vs_gain(&[0.0], &c, &p, &tau).is_err());
}
