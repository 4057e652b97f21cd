//! Monte-Carlo pulse ensembles on a time–frequency lattice.
//!
//! Each pulse is a lattice of independent cells `(slice k, bin ±Ω_j, replica)`.
//! A cell holds the four modes `1(+Ω), 2(−Ω), 1(−Ω), 2(+Ω)`; the twin pairs are
//! `(1,+Ω)↔(2,−Ω)` with gain `U(Ω, t_k)` and `(1,−Ω)↔(2,+Ω)` with `U*`.
//! Vacuum inputs are drawn from the Wigner distribution (variance 1/4 per
//! quadrature), amplified, delayed (beam 1 moves by `round(τ/T)` slices and
//! picks up `e^{∓iΩτ}`), mixed on a 50:50 beamsplitter, attenuated with fresh
//! vacuum and summed per detector as `Σ(|α|² − 1/2)`.
//!
//! For Wigner samples the variance of `|α|²` exceeds the photon-number
//! variance by 1/4 per mode, so the difference variance is corrected by
//! `M/4` for `M` detected modes. Means and cross moments need no correction.
//!
//! Every pulse uses its own ChaCha8 stream `(seed, pulse index)`; results are
//! reduced in pulse order, so they do not depend on the thread count.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{HomError, Result};
use crate::gain::{spectral_hwhm, uv, CrystalParams, GainSample, PumpParams};
use crate::trace::DetectionModel;

/// Frequency bins per sign in the default lattice.
pub const DEFAULT_BINS: usize = 12;
/// Bins per spectral FWHM in the default lattice.
pub const BINS_PER_FWHM: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    /// Number of time slices, odd, centred on the pump peak.
    pub n_time_slices: usize,
    /// Frequency bins per sign; bin `j` is centred at `(j + 1/2)·bin_width`.
    pub n_freq_bins: usize,
    /// Slice duration (ps).
    pub slice_duration: f64,
    /// Bin width (rad/ps).
    pub bin_width: f64,
}

impl LatticeSpec {
    /// Default lattice: slice duration `2π/Δω` for spectral FWHM `Δω`, bins of
    /// `Δω/8` out to `1.5 Δω`, and enough slices to cover `±3σ` of the pump
    /// field envelope.
    pub fn for_config(crystal: &CrystalParams, pump: &PumpParams) -> Result<Self> {
        Self::with_bins(crystal, pump, DEFAULT_BINS, BINS_PER_FWHM)
    }

    /// As [`LatticeSpec::for_config`] with `n_bins` bins per sign of width `Δω/bins_per_fwhm`.
    pub fn with_bins(crystal: &CrystalParams, pump: &PumpParams, n_bins: usize, bins_per_fwhm: f64) -> Result<Self> {
        crystal.validate()?;
        pump.validate()?;
        let fwhm = 2.0 * spectral_hwhm(crystal, pump)?;
        let slice = 2.0 * std::f64::consts::PI / fwhm;
        let span = 6.0 * pump.sigma_field();
        let mut k = (span / slice).ceil() as usize;
        if k % 2 == 0 {
            k += 1;
        }
        let spec = LatticeSpec {
            n_time_slices: k.max(1),
            n_freq_bins: n_bins,
            slice_duration: slice,
            bin_width: fwhm / bins_per_fwhm,
        };
        spec.validate(pump)?;
        Ok(spec)
    }

    pub fn validate(&self, pump: &PumpParams) -> Result<()> {
        if self.n_time_slices == 0 || self.n_time_slices % 2 == 0 {
            return Err(HomError::invalid("n_time_slices", "must be odd and >= 1"));
        }
        if self.n_freq_bins == 0 {
            return Err(HomError::invalid("n_freq_bins", "must be >= 1"));
        }
        if !(self.slice_duration.is_finite() && self.slice_duration > 0.0) {
            return Err(HomError::invalid("slice_duration", "must be > 0"));
        }
        if !(self.bin_width.is_finite() && self.bin_width > 0.0) {
            return Err(HomError::invalid("bin_width", "must be > 0"));
        }
        if self.bin_width * self.slice_duration >= std::f64::consts::PI {
            return Err(HomError::LatticeResolution(format!(
                "bin_width * slice_duration = {} >= pi",
                self.bin_width * self.slice_duration
            )));
        }
        let span = 6.0 * pump.sigma_field();
        if (self.n_time_slices as f64) * self.slice_duration < span * (1.0 - 1e-12) {
            return Err(HomError::LatticeResolution(format!(
                "{} slices of {} ps do not cover 6 sigma = {span} ps",
                self.n_time_slices, self.slice_duration
            )));
        }
        Ok(())
    }

    /// Centre time of slice `k` (ps).
    pub fn slice_time(&self, k: usize) -> f64 {
        (k as f64 - (self.n_time_slices as f64 - 1.0) / 2.0) * self.slice_duration
    }

    /// Centre frequency of positive bin `j` (rad/ps).
    pub fn bin_omega(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.bin_width
    }

    /// Slice shift of beam 1 for delay `tau`.
    pub fn shift(&self, tau: f64) -> Result<i64> {
        if !tau.is_finite() {
            return Err(HomError::invalid("tau", "non-finite delay"));
        }
        let s = (tau / self.slice_duration).round();
        if s.abs() >= self.n_time_slices as f64 {
            return Err(HomError::LatticeResolution(format!(
                "delay {tau} ps shifts {s} slices, lattice has {}",
                self.n_time_slices
            )));
        }
        Ok(s as i64)
    }

    /// Cells per spatial replica: slices times bins per sign.
    pub fn cells(&self) -> usize {
        self.n_time_slices * self.n_freq_bins
    }

    fn coefficients(&self, crystal: &CrystalParams, pump: &PumpParams) -> Vec<GainSample> {
        let mut out = Vec::with_capacity(self.cells());
        for k in 0..self.n_time_slices {
            let t = self.slice_time(k);
            for j in 0..self.n_freq_bins {
                out.push(uv(self.bin_omega(j), t, crystal, pump));
            }
        }
        out
    }

    /// Mean photons per lattice mode, `Σ|V|²` over cells divided by the cell count.
    pub fn mean_photons_per_cell(&self, crystal: &CrystalParams, pump: &PumpParams) -> f64 {
        let c = self.coefficients(crystal, pump);
        c.iter().map(|s| s.n()).sum::<f64>() / c.len() as f64
    }
}

/// Ensemble estimates at one delay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub tau: f64,
    pub mean_s1: f64,
    pub mean_s2: f64,
    pub se_mean_s1: f64,
    pub se_mean_s2: f64,
    /// `Var(S₁ − S₂)` after the Wigner correction.
    pub var_diff: f64,
    pub nrf_hat: f64,
    pub se_nrf: f64,
    pub g2_hat: f64,
    pub se_g2: f64,
    pub n_pulses: usize,
    /// Detected modes summed over both detectors.
    pub detected_modes: usize,
    pub seed: u64,
    /// Set when no photons are expected; ratios are then reported as 1.
    pub degenerate: bool,
}

/// Exact lattice moments by Gaussian moment factorization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeMoments {
    pub tau: f64,
    /// `⟨N₊⟩` before loss.
    pub n_plus: f64,
    pub var_plus: f64,
    pub var_minus: f64,
    /// `Var N₋ / ⟨N₊⟩` before loss.
    pub nrf_ideal: f64,
    /// Detected NRF including electronic noise.
    pub nrf_detected: f64,
    pub g2: f64,
    /// `⟨S₁⟩ = ⟨S₂⟩` after loss.
    pub mean_s: f64,
}

/// Exact expectation of the Monte-Carlo estimators for the lattice model.
pub fn lattice_expectation(
    crystal: &CrystalParams,
    pump: &PumpParams,
    det: &DetectionModel,
    lattice: &LatticeSpec,
    tau: f64,
) -> Result<LatticeMoments> {
    crystal.validate()?;
    pump.validate()?;
    det.validate()?;
    lattice.validate(pump)?;
    let s = lattice.shift(tau)?;
    let coef = lattice.coefficients(crystal, pump);
    let (k_n, j_n) = (lattice.n_time_slices as i64, lattice.n_freq_bins);
    let n_at = |k: i64, j: usize| -> f64 {
        if (0..k_n).contains(&k) {
            coef[k as usize * j_n + j].n()
        } else {
            0.0
        }
    };
    let (mut n_plus, mut var_plus, mut var_minus) = (0.0, 0.0, 0.0);
    for c in &coef {
        let n = c.n();
        n_plus += 4.0 * n;
        var_plus += 8.0 * n * (n + 1.0);
    }
    for q in s.min(0)..(k_n + s).max(k_n) {
        for j in 0..j_n {
            let n1 = n_at(q - s, j);
            let n2 = n_at(q, j);
            // Both bins ±Ω_j.
            var_minus += 2.0 * (n1 * (n2 + 1.0) + n2 * (n1 + 1.0));
        }
    }
    if s == 0 {
        for k in 0..lattice.n_time_slices {
            for j in 0..j_n {
                let c = coef[k * j_n + j];
                let phase = Complex64::from_polar(1.0, 2.0 * lattice.bin_omega(j) * tau);
                var_minus += 4.0 * c.n() * (c.u.conj() * c.u.conj() * phase).re;
            }
        }
    }
    let m = det.m_spatial as f64;
    let (n_plus, var_plus, var_minus) = (m * n_plus, m * var_plus, m * var_minus);
    let eta = det.eta;
    let (nrf_ideal, nrf_detected, g2) = if n_plus > 0.0 {
        let ideal = var_minus / n_plus;
        (
            ideal,
            1.0 + eta * (ideal - 1.0) + 2.0 * det.noise_var / (eta * n_plus),
            1.0 + (var_plus - var_minus) / (n_plus * n_plus),
        )
    } else {
        (1.0, 1.0, 1.0)
    };
    Ok(LatticeMoments {
        tau,
        n_plus,
        var_plus,
        var_minus,
        nrf_ideal,
        nrf_detected,
        g2,
        mean_s: 0.5 * eta * n_plus,
    })
}

#[inline]
fn wigner_vacuum(rng: &mut ChaCha8Rng) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(0.5 * re, 0.5 * im)
}

struct Buffers {
    /// Per cell: `a1(+Ω), a1(−Ω)`.
    beam1: Vec<[Complex64; 2]>,
    /// Per cell: `a2(+Ω), a2(−Ω)`.
    beam2: Vec<[Complex64; 2]>,
}

struct PulseModel<'a> {
    coef: &'a [GainSample],
    /// `e^{−iΩ_jτ}` for the positive bins of beam 1.
    phase: Vec<Complex64>,
    k_n: i64,
    j_n: usize,
    shift: i64,
    replicas: usize,
    sqrt_eta: f64,
    sqrt_loss: f64,
    noise_sd: f64,
}

impl PulseModel<'_> {
    fn run(&self, rng: &mut ChaCha8Rng, buf: &mut Buffers) -> (f64, f64) {
        let (mut s1, mut s2) = (0.0, 0.0);
        let r2 = std::f64::consts::FRAC_1_SQRT_2;
        for _ in 0..self.replicas {
            for (i, c) in self.coef.iter().enumerate() {
                let (b1p, b1m, b2p, b2m) = (
                    wigner_vacuum(rng),
                    wigner_vacuum(rng),
                    wigner_vacuum(rng),
                    wigner_vacuum(rng),
                );
                let (u, uc, v) = (c.u, c.u.conj(), c.v.re);
                buf.beam1[i] = [u * b1p + v * b2m.conj(), uc * b1m + v * b2p.conj()];
                buf.beam2[i] = [uc * b2p + v * b1m.conj(), u * b2m + v * b1p.conj()];
            }
            let q_lo = self.shift.min(0);
            let q_hi = (self.k_n + self.shift).max(self.k_n);
            for q in q_lo..q_hi {
                let k1 = q - self.shift;
                let in1 = (0..self.k_n).contains(&k1);
                let in2 = (0..self.k_n).contains(&q);
                for j in 0..self.j_n {
                    let [xp, xm] = if in1 {
                        let a = buf.beam1[k1 as usize * self.j_n + j];
                        [a[0] * self.phase[j], a[1] * self.phase[j].conj()]
                    } else {
                        [wigner_vacuum(rng), wigner_vacuum(rng)]
                    };
                    let [yp, ym] = if in2 {
                        buf.beam2[q as usize * self.j_n + j]
                    } else {
                        [wigner_vacuum(rng), wigner_vacuum(rng)]
                    };
                    let outs = [
                        (xp + yp) * r2,
                        (xm + ym) * r2,
                        (yp - xp) * r2,
                        (ym - xm) * r2,
                    ];
                    let mut det = [0.0; 4];
                    for (d, o) in det.iter_mut().zip(outs) {
                        let a = if self.sqrt_loss > 0.0 {
                            o * self.sqrt_eta + wigner_vacuum(rng) * self.sqrt_loss
                        } else {
                            o
                        };
                        *d = a.norm_sqr() - 0.5;
                    }
                    s1 += det[0] + det[1];
                    s2 += det[2] + det[3];
                }
            }
        }
        if self.noise_sd > 0.0 {
            s1 += self.noise_sd * rng.sample::<f64, _>(StandardNormal);
            s2 += self.noise_sd * rng.sample::<f64, _>(StandardNormal);
        }
        (s1, s2)
    }
}

/// Simulates `det.n_pulses` pulses at delay `tau` and forms the NRF and g² estimators.
pub fn simulate_ensemble(
    crystal: &CrystalParams,
    pump: &PumpParams,
    det: &DetectionModel,
    lattice: &LatticeSpec,
    tau: f64,
    seed: u64,
) -> Result<EnsembleStats> {
    crystal.validate()?;
    pump.validate()?;
    det.validate()?;
    lattice.validate(pump)?;
    let shift = lattice.shift(tau)?;
    let coef = lattice.coefficients(crystal, pump);
    let model = PulseModel {
        coef: &coef,
        phase: (0..lattice.n_freq_bins)
            .map(|j| Complex64::from_polar(1.0, -lattice.bin_omega(j) * tau))
            .collect(),
        k_n: lattice.n_time_slices as i64,
        j_n: lattice.n_freq_bins,
        shift,
        replicas: det.m_spatial as usize,
        sqrt_eta: det.eta.sqrt(),
        sqrt_loss: (1.0 - det.eta).sqrt(),
        noise_sd: det.noise_var.sqrt(),
    };
    let base = ChaCha8Rng::seed_from_u64(seed);
    let cells = coef.len();
    let signals: Vec<(f64, f64)> = (0..det.n_pulses)
        .into_par_iter()
        .map_init(
            || Buffers {
                beam1: vec![[Complex64::new(0.0, 0.0); 2]; cells],
                beam2: vec![[Complex64::new(0.0, 0.0); 2]; cells],
            },
            |buf, i| {
                let mut rng = base.clone();
                rng.set_stream(i as u64);
                model.run(&mut rng, buf)
            },
        )
        .collect();

    let slots = (lattice.n_time_slices as i64 + shift.abs()) as usize;
    let detected_modes = 2 * slots * 2 * lattice.n_freq_bins * det.m_spatial as usize;
    let degenerate = coef.iter().all(|c| c.n() == 0.0);
    Ok(estimate(&signals, detected_modes, tau, seed, degenerate))
}

fn estimate(signals: &[(f64, f64)], detected_modes: usize, tau: f64, seed: u64, degenerate_model: bool) -> EnsembleStats {
    let n = signals.len();
    let nf = n as f64;
    let c1 = signals.iter().map(|s| s.0).sum::<f64>() / nf;
    let c2 = signals.iter().map(|s| s.1).sum::<f64>() / nf;
    let (mut su, mut sv, mut suu, mut svv, mut suv) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(a, b) in signals {
        let (u, v) = (a - c1, b - c2);
        su += u;
        sv += v;
        suu += u * u;
        svv += v * v;
        suv += u * v;
    }
    let wig = detected_modes as f64 / 4.0;
    // Estimators from shifted sums over `count` pulses.
    let eval = |count: f64, su: f64, sv: f64, suu: f64, svv: f64, suv: f64| -> (f64, f64, f64, f64) {
        let (mu, mv) = (su / count, sv / count);
        let (m1, m2) = (c1 + mu, c2 + mv);
        let md = mu - mv;
        let sdd = suu - 2.0 * suv + svv;
        let var_d = (sdd - count * md * md) / (count - 1.0) - wig;
        let cov = suv / count - mu * mv;
        (var_d, var_d / (m1 + m2), 1.0 + cov / (m1 * m2), m1 + m2)
    };
    let (var_diff, nrf_full, g2_full, total) = eval(nf, su, sv, suu, svv, suv);
    let degenerate = degenerate_model || !(total > 0.0);

    let var1 = (suu - su * su / nf) / (nf - 1.0);
    let var2 = (svv - sv * sv / nf) / (nf - 1.0);
    let (mut se_nrf, mut se_g2) = (0.0, 0.0);
    if !degenerate {
        let m = nf - 1.0;
        let mut loo = Vec::with_capacity(n);
        for &(a, b) in signals {
            let (u, v) = (a - c1, b - c2);
            let (_, r, g, _) = eval(m, su - u, sv - v, suu - u * u, svv - v * v, suv - u * v);
            loo.push((r, g));
        }
        let (mr, mg) = loo
            .iter()
            .fold((0.0, 0.0), |acc, x| (acc.0 + x.0 / nf, acc.1 + x.1 / nf));
        let (dr, dg) = loo
            .iter()
            .fold((0.0, 0.0), |acc, x| (acc.0 + (x.0 - mr).powi(2), acc.1 + (x.1 - mg).powi(2)));
        se_nrf = (m / nf * dr).sqrt();
        se_g2 = (m / nf * dg).sqrt();
    }
    EnsembleStats {
        tau,
        mean_s1: c1,
        mean_s2: c2,
        se_mean_s1: (var1 / nf).sqrt(),
        se_mean_s2: (var2 / nf).sqrt(),
        var_diff,
        nrf_hat: if degenerate { 1.0 } else { nrf_full },
        se_nrf,
        g2_hat: if degenerate { 1.0 } else { g2_full },
        se_g2,
        n_pulses: n,
        detected_modes,
        seed,
        degenerate,
    }
}

/// SplitMix64 finalizer used to derive per-delay seeds.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One ensemble per delay, seeded by `derive_seed(seed, index)`.
pub fn dip_scan(
    crystal: &CrystalParams,
    pump: &PumpParams,
    det: &DetectionModel,
    lattice: &LatticeSpec,
    tau: &[f64],
    seed: u64,
) -> Result<Vec<EnsembleStats>> {
    if tau.is_empty() {
        return Err(HomError::invalid("tau", "delay grid is empty"));
    }
    tau.iter()
        .enumerate()
        .map(|(i, &t)| simulate_ensemble(crystal, pump, det, lattice, t, derive_seed(seed, i as u64)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> (CrystalParams, PumpParams, LatticeSpec) {
        let crystal = CrystalParams::new(10.0, 0.19).unwrap();
        let pump = PumpParams { g_peak: 3.0, t_p: 3.0, ..PumpParams::default() };
        let lat = LatticeSpec::with_bins(&crystal, &pump, 4, 4.0).unwrap();
        (crystal, pump, lat)
    }

    #[test]
    fn default_lattice_shape() {
        let crystal = CrystalParams::new(10.0, 0.19).unwrap();
        let pump = PumpParams::default();
        let lat = LatticeSpec::for_config(&crystal, &pump).unwrap();
        assert_eq!(lat.n_time_slices % 2, 1);
        assert!(lat.n_time_slices as f64 * lat.slice_duration >= 6.0 * pump.sigma_field());
        assert!(lat.bin_width * lat.slice_duration < std::f64::consts::PI);
        assert_eq!(lat.slice_time(lat.n_time_slices / 2), 0.0);
    }

    #[test]
    fn lattice_rejects_large_delay() {
        let (_, _, lat) = small();
        let far = lat.slice_duration * lat.n_time_slices as f64;
        assert!(matches!(lat.shift(far), Err(HomError::LatticeResolution(_))));
        assert_eq!(lat.shift(0.4 * lat.slice_duration).unwrap(), 0);
    }

    #[test]
    fn bad_efficiency_rejected() {
        let (c, p, lat) = small();
        let det = DetectionModel { eta: 0.0, n_pulses: 10, ..Default::default() };
        assert!(simulate_ensemble(&c, &p, &det, &lat, 0.0, 1).is_err());
        let det = DetectionModel { eta: 1.2, n_pulses: 10, ..Default::default() };
        assert!(simulate_ensemble(&c, &p, &det, &lat, 0.0, 1).is_err());
    }

    #[test]
    fn derived_seeds_differ() {
        assert_ne!(derive_seed(7, 0), derive_seed(7, 1));
        assert_ne!(derive_seed(7, 0), derive_seed(8, 0));
    }

    #[test]
    fn expectation_baseline_and_eta_independent_g2() {
        let (c, p, lat) = small();
        let det = DetectionModel { n_pulses: 10, ..Default::default() };
        let far = lat.slice_duration * (lat.n_time_slices as f64 - 1.0);
        let e = lattice_expectation(&c, &p, &det, &lat, far).unwrap();
        assert!((e.nrf_ideal - 1.0).abs() < 1e-6);
        let det1 = DetectionModel { eta: 1.0, ..det };
        let e0 = lattice_expectation(&c, &p, &det, &lat, 0.0).unwrap();
        let e1 = lattice_expectation(&c, &p, &det1, &lat, 0.0).unwrap();
        assert_eq!(e0.g2, e1.g2);
    }

    #[test]
    fn ensemble_is_seed_deterministic() {
        let (c, p, lat) = small();
        let det = DetectionModel { n_pulses: 64, ..Default::default() };
        let a = simulate_ensemble(&c, &p, &det, &lat, 0.1, 42).unwrap();
        let b = simulate_ensemble(&c, &p, &det, &lat, 0.1, 42).unwrap();
        assert_eq!(a, b);
        let d = simulate_ensemble(&c, &p, &det, &lat, 0.1, 43).unwrap();
        assert_ne!(a.mean_s1, d.mean_s1);
    }
}
