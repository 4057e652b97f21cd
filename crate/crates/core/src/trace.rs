//! Delay traces: normalized difference variance (NRF), its classical pedestal,
//! the detected NRF and the cross-correlation g², plus the scalar figures
//! extracted from them.
//!
//! With `w(Ω) = |V(Ω,0)|²` the ideal NRF is
//!
//! ```text
//! NRF(τ) = 1 + ∫ w(Ω) [ |V(Ω,τ)|² + Re(U*(Ω,0)² e^{2iΩτ}) ] dΩ / ∫ w(Ω) dΩ
//! ```
//!
//! where the second argument of `U`, `V` is the pump-envelope time. The
//! pedestal drops the interference term.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{HomError, Result};
use crate::gain::{gain_at, uv, uv_from_gain, CrystalParams, PumpParams};
use crate::quadrature::SpectralGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceKind {
    NrfIdeal,
    NrfDetected,
    NrfPedestal,
    G2,
}

impl TraceKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            TraceKind::NrfIdeal => "nrf_ideal",
            TraceKind::NrfDetected => "nrf_detected",
            TraceKind::NrfPedestal => "nrf_pedestal",
            TraceKind::G2 => "g2",
        }
    }
}

/// An observable sampled on a delay grid (ps).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub tau: Vec<f64>,
    pub value: Vec<f64>,
    pub kind: TraceKind,
    /// Generating parameters.
    pub params: BTreeMap<String, f64>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.tau.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tau.is_empty()
    }

    /// Value at the sample closest to `tau`.
    pub fn at(&self, tau: f64) -> Option<f64> {
        self.tau
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - tau).abs().total_cmp(&(b.1 - tau).abs()))
            .map(|(i, _)| self.value[i])
    }
}

/// Detector parameters shared by the analytic traces and the Monte-Carlo.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionModel {
    /// Quantum efficiency in (0, 1].
    pub eta: f64,
    /// Number of detected spatial modes.
    pub m_spatial: u32,
    /// Electronic noise variance per detector, in photon-number units.
    pub noise_var: f64,
    pub n_pulses: usize,
}

impl Default for DetectionModel {
    fn default() -> Self {
        DetectionModel {
            eta: 0.03,
            m_spatial: 10,
            noise_var: 0.0,
            n_pulses: 30_000,
        }
    }
}

impl DetectionModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(HomError::invalid("eta", format!("must be in (0, 1], got {}", self.eta)));
        }
        if self.m_spatial < 1 {
            return Err(HomError::invalid("m_spatial", "must be >= 1"));
        }
        if !(self.noise_var.is_finite() && self.noise_var >= 0.0) {
            return Err(HomError::invalid("noise_var", "must be >= 0"));
        }
        if self.n_pulses < 2 {
            return Err(HomError::invalid("n_pulses", "need at least 2 pulses"));
        }
        Ok(())
    }
}

fn validate_tau(tau: &[f64]) -> Result<f64> {
    if tau.is_empty() {
        return Err(HomError::invalid("tau", "delay grid is empty"));
    }
    if tau.iter().any(|t| !t.is_finite()) {
        return Err(HomError::invalid("tau", "non-finite delay"));
    }
    if tau.windows(2).any(|p| p[1] <= p[0]) {
        return Err(HomError::invalid("tau", "delays must be strictly increasing"));
    }
    Ok(tau.iter().fold(0.0f64, |m, t| m.max(t.abs())))
}

fn base_params(crystal: &CrystalParams, pump: &PumpParams, grid: &SpectralGrid) -> BTreeMap<String, f64> {
    BTreeMap::from([
        ("g_peak".to_string(), pump.g_peak),
        ("t_p".to_string(), pump.t_p),
        ("lambda_deg".to_string(), pump.lambda_deg),
        ("lambda_pump".to_string(), pump.lambda_pump),
        ("l_c".to_string(), crystal.l_c),
        ("walkoff".to_string(), crystal.walkoff),
        ("grid_nodes".to_string(), grid.len() as f64),
    ])
}

/// Spectral moments at the pump peak, shared by the NRF and g² evaluation.
struct PeakMoments {
    /// `weight·|V(Ω,0)|²` per node.
    w: Vec<f64>,
    /// `Re(U*(Ω,0)²)`, `Im(U*(Ω,0)²)` per node.
    u2: Vec<(f64, f64)>,
    sum_w: f64,
    /// `∫w|V0|² / ∫w`: photons per mode.
    p0: f64,
    /// `∫w|U0|² / ∫w`.
    c0: f64,
}

impl PeakMoments {
    fn new(crystal: &CrystalParams, pump: &PumpParams, grid: &SpectralGrid) -> Self {
        let mut w = Vec::with_capacity(grid.len());
        let mut u2 = Vec::with_capacity(grid.len());
        let (mut sum_w, mut sum_p, mut sum_c) = (0.0, 0.0, 0.0);
        for (&om, &wt) in grid.omega().iter().zip(grid.weights()) {
            let s = uv(om, 0.0, crystal, pump);
            let wi = wt * s.n();
            let uc = s.u.conj() * s.u.conj();
            w.push(wi);
            u2.push((uc.re, uc.im));
            sum_w += wi;
            sum_p += wi * s.n();
            sum_c += wi * s.u.norm_sqr();
        }
        let (p0, c0) = if sum_w > 0.0 {
            (sum_p / sum_w, sum_c / sum_w)
        } else {
            (0.0, 1.0)
        };
        PeakMoments { w, u2, sum_w, p0, c0 }
    }

    /// NRF at one delay, summed in node order.
    fn nrf_at(&self, tau: f64, crystal: &CrystalParams, pump: &PumpParams, grid: &SpectralGrid, interference: bool) -> f64 {
        if self.sum_w == 0.0 {
            return 1.0;
        }
        let g_tau = gain_at(tau, pump);
        let mut acc = 0.0;
        for (i, &om) in grid.omega().iter().enumerate() {
            let wi = self.w[i];
            if wi == 0.0 {
                continue;
            }
            let mut term = uv_from_gain(g_tau, crystal.half_mismatch(om)).n();
            if interference {
                let (re, im) = self.u2[i];
                let (s, c) = (2.0 * om * tau).sin_cos();
                term += re * c - im * s;
            }
            acc += wi * term;
        }
        1.0 + acc / self.sum_w
    }
}

fn nrf_values(
    tau: &[f64],
    crystal: &CrystalParams,
    pump: &PumpParams,
    grid: &SpectralGrid,
    interference: bool,
) -> Result<(Vec<f64>, PeakMoments)> {
    crystal.validate()?;
    pump.validate()?;
    let tau_max = validate_tau(tau)?;
    grid.check_resolution(tau_max)?;
    let pm = PeakMoments::new(crystal, pump, grid);
    let values = tau
        .par_iter()
        .map(|&t| pm.nrf_at(t, crystal, pump, grid, interference))
        .collect();
    Ok((values, pm))
}

/// Ideal normalized variance of the difference signal versus delay.
pub fn nrf_trace(tau: &[f64], crystal: &CrystalParams, pump: &PumpParams, grid: &SpectralGrid) -> Result<Trace> {
    let (value, _) = nrf_values(tau, crystal, pump, grid, true)?;
    Ok(Trace {
        tau: tau.to_vec(),
        value,
        kind: TraceKind::NrfIdeal,
        params: base_params(crystal, pump, grid),
    })
}

/// The NRF without the interference term: the broad envelope-overlap component.
pub fn pedestal_trace(tau: &[f64], crystal: &CrystalParams, pump: &PumpParams, grid: &SpectralGrid) -> Result<Trace> {
    let (value, _) = nrf_values(tau, crystal, pump, grid, false)?;
    Ok(Trace {
        tau: tau.to_vec(),
        value,
        kind: TraceKind::NrfPedestal,
        params: base_params(crystal, pump, grid),
    })
}

/// Applies the detection efficiency: `x ↦ 1 + η(x − 1)`.
pub fn detected_trace(trace: &Trace, det: &DetectionModel) -> Result<Trace> {
    if !matches!(trace.kind, TraceKind::NrfIdeal | TraceKind::NrfPedestal) {
        return Err(HomError::invalid(
            "trace",
            format!("detection applies to ideal NRF traces, got {}", trace.kind.as_str()),
        ));
    }
    let eta = det.eta;
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(HomError::invalid("eta", format!("must be in (0, 1], got {eta}")));
    }
    let mut params = trace.params.clone();
    params.insert("eta".into(), eta);
    Ok(Trace {
        tau: trace.tau.clone(),
        value: trace.value.iter().map(|x| 1.0 + eta * (x - 1.0)).collect(),
        kind: TraceKind::NrfDetected,
        params,
    })
}

/// Result of a g² evaluation together with the delay-independent singles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct G2Result {
    pub trace: Trace,
    /// Photons per mode, `∫w|V0|²/∫w`.
    pub n_mode: f64,
    /// Fano factor of the total photon number.
    pub fano_total: f64,
    /// Mean photons per mode reaching each output, `⟨S₁⟩ = ⟨S₂⟩`, per τ.
    pub singles: Vec<f64>,
}

/// Normalized cross-correlation of the two beamsplitter outputs.
///
/// From Gaussian moment factorization, `Cov(N₁,N₂) = (Var N₊ − Var N₋)/4`
/// with `Var N₋ = NRF(τ)·⟨N₊⟩` and `Var N₊ = F·⟨N₊⟩`, `F = 1 + P₀ + C₀`. Per
/// mode `⟨N₁⟩ = ⟨N₂⟩ = P₀`, so the single-mode value is
/// `1 + (F − NRF(τ))/(2P₀)`; `m` detected modes reduce the excess by `1/m`.
pub fn g2_trace(
    tau: &[f64],
    crystal: &CrystalParams,
    pump: &PumpParams,
    grid: &SpectralGrid,
    det: &DetectionModel,
) -> Result<G2Result> {
    if det.m_spatial < 1 {
        return Err(HomError::invalid("m_spatial", "must be >= 1"));
    }
    let (nrf, pm) = nrf_values(tau, crystal, pump, grid, true)?;
    let m = det.m_spatial as f64;
    let fano = 1.0 + pm.p0 + pm.c0;
    let value = nrf
        .iter()
        .map(|x| {
            if pm.p0 == 0.0 {
                1.0
            } else {
                let single = 1.0 + (fano - x) / (2.0 * pm.p0);
                1.0 + (single - 1.0) / m
            }
        })
        .collect();
    let mut params = base_params(crystal, pump, grid);
    params.insert("m_spatial".into(), m);
    Ok(G2Result {
        trace: Trace {
            tau: tau.to_vec(),
            value,
            kind: TraceKind::G2,
            params,
        },
        n_mode: pm.p0,
        fano_total: fano,
        singles: vec![pm.p0; tau.len()],
    })
}

/// `(max − min)/(max + min)` over the sampled values.
pub fn visibility(trace: &Trace) -> Result<f64> {
    if trace.value.is_empty() {
        return Err(HomError::invalid("trace", "empty trace"));
    }
    let max = trace.value.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = trace.value.iter().copied().fold(f64::INFINITY, f64::min);
    if !(max + min > 0.0) {
        return Err(HomError::DegenerateData(format!(
            "visibility undefined for max + min = {}",
            max + min
        )));
    }
    Ok((max - min) / (max + min))
}

/// Full width at half maximum of a peaked profile around its global maximum,
/// with linear interpolation between samples.
pub fn fwhm(tau: &[f64], values: &[f64]) -> Result<f64> {
    if tau.len() != values.len() || tau.len() < 3 {
        return Err(HomError::invalid("trace", "need at least 3 samples of matching length"));
    }
    let (imax, &vmax) = values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("nonempty");
    if !(vmax > 0.0) {
        return Err(HomError::DegenerateData("profile has no positive maximum".into()));
    }
    let half = 0.5 * vmax;
    let cross = |i: usize, j: usize| -> f64 {
        // values[i] >= half > values[j]
        let f = (values[i] - half) / (values[i] - values[j]);
        tau[i] + f * (tau[j] - tau[i])
    };
    let left = (0..imax)
        .rev()
        .find(|&j| values[j] < half)
        .map(|j| cross(j + 1, j))
        .ok_or_else(|| HomError::NotBracketed("left half-maximum outside the delay grid".into()))?;
    let right = (imax + 1..values.len())
        .find(|&j| values[j] < half)
        .map(|j| cross(j - 1, j))
        .ok_or_else(|| HomError::NotBracketed("right half-maximum outside the delay grid".into()))?;
    Ok(right - left)
}

fn check_same_grid(a: &Trace, b: &Trace) -> Result<()> {
    if a.tau != b.tau {
        return Err(HomError::invalid("trace", "traces must share the delay grid"));
    }
    Ok(())
}

/// FWHM of the narrow component `nrf − pedestal`.
pub fn fwhm_narrow(nrf: &Trace, pedestal: &Trace) -> Result<f64> {
    check_same_grid(nrf, pedestal)?;
    let comp: Vec<f64> = nrf.value.iter().zip(&pedestal.value).map(|(a, b)| a - b).collect();
    fwhm(&nrf.tau, &comp)
}

/// FWHM of the pedestal component `pedestal − 1`.
pub fn fwhm_pedestal(pedestal: &Trace) -> Result<f64> {
    let comp: Vec<f64> = pedestal.value.iter().map(|x| x - 1.0).collect();
    fwhm(&pedestal.tau, &comp)
}

/// Spatial mode count from the measured edge value of g²:
/// `m = (1 + 1/N) / (g² − 1)`.
pub fn mode_count_g2(g2_edge: f64, n_mode: f64) -> Result<f64> {
    if !(g2_edge > 1.0) {
        return Err(HomError::invalid("g2_edge", format!("must exceed 1, got {g2_edge}")));
    }
    if !(n_mode > 0.0) {
        return Err(HomError::invalid("n_mode", "must be > 0"));
    }
    Ok((1.0 + 1.0 / n_mode) / (g2_edge - 1.0))
}

/// Longitudinal mode count: pedestal width over narrow-peak width.
pub fn mode_count_long(nrf: &Trace, pedestal: &Trace) -> Result<f64> {
    let narrow = fwhm_narrow(nrf, pedestal)?;
    let broad = fwhm_pedestal(pedestal)?;
    Ok(broad / narrow)
}

/// Narrow-peak FWHM for each peak gain, other pump parameters fixed. The
/// spectral grid is rebuilt for every gain.
pub fn fwhm_vs_gain(
    g_values: &[f64],
    crystal: &CrystalParams,
    pump: &PumpParams,
    tau: &[f64],
) -> Result<Vec<(f64, f64)>> {
    let tau_max = validate_tau(tau)?;
    g_values
        .iter()
        .map(|&g| {
            if !(g > 0.0 && g <= 12.0) {
                return Err(HomError::invalid("g_values", format!("gain must be in (0, 12], got {g}")));
            }
            let p = pump.with_gain(g);
            let grid = SpectralGrid::for_config(crystal, &p, tau_max)?;
            let nrf = nrf_trace(tau, crystal, &p, &grid)?;
            let ped = pedestal_trace(tau, crystal, &p, &grid)?;
            Ok((g, fwhm_narrow(&nrf, &ped)?))
        })
        .collect()
}

/// Uniform delay grid `start, start+step, …` up to and including `stop`.
pub fn tau_grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(stop >= start) || !start.is_finite() || !stop.is_finite() {
        return Err(HomError::invalid("tau", "need step > 0 and stop >= start"));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..n).map(|i| start + i as f64 * step).collect())
}
