//! Spectral-temporal parametric gain of a collinear type-II amplifier.
//!
//! The output field of the amplifier is related to the vacuum input by a
//! Bogoliubov transformation with gain functions
//!
//! ```text
//! U(Ω,t) = cosh Γ + i (Δ l_c / 2Γ) sinh Γ
//! V(Ω,t) = (G(t) / Γ) sinh Γ,       Γ² = G(t)² − (Δ(Ω) l_c / 2)²
//! ```
//!
//! with `Δ(Ω) = D·Ω` set by the group-velocity walk-off `D` and `G(t)` the
//! pump-envelope-shaped parametric gain. When the mismatch exceeds the gain,
//! Γ becomes imaginary and cosh/sinh turn into cos/sin; both branches are
//! evaluated through the entire functions `C(z) = cosh √z` and
//! `S(z) = sinh √z / √z` of `z = Γ²`, so nothing is ever divided by Γ.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{HomError, Result};
use crate::quadrature::SpectralGrid;
use crate::roots::bisect;
use crate::SPEED_OF_LIGHT_NM_PER_PS;

/// Below this |z| the branch functions switch to their Taylor series.
const SERIES_THRESHOLD: f64 = 1e-6;

/// Nonlinear crystal: total length and signal/idler walk-off.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrystalParams {
    /// Total crystal length (mm).
    pub l_c: f64,
    /// Inverse group-velocity difference (ps/mm), so that `Δ = D·Ω` in rad/mm.
    pub walkoff: f64,
}

impl CrystalParams {
    pub fn new(l_c: f64, walkoff: f64) -> Result<Self> {
        let c = CrystalParams { l_c, walkoff };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.l_c.is_finite() && self.l_c > 0.0) {
            return Err(HomError::invalid("l_c", format!("must be > 0, got {}", self.l_c)));
        }
        if !(self.walkoff.is_finite() && self.walkoff >= 0.0) {
            return Err(HomError::invalid(
                "walkoff",
                format!("must be >= 0, got {}", self.walkoff),
            ));
        }
        Ok(())
    }

    /// Half the accumulated phase mismatch, `Δ(Ω)·l_c/2`.
    #[inline]
    pub fn half_mismatch(&self, omega: f64) -> f64 {
        0.5 * delta(omega, self) * self.l_c
    }
}

/// Pump pulse: peak gain, duration and wavelengths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PumpParams {
    /// Peak parametric gain `G` (dimensionless, `σ·A₀·l_c` at the pulse peak).
    pub g_peak: f64,
    /// Intensity FWHM of the Gaussian pump pulse (ps).
    pub t_p: f64,
    /// Degenerate signal/idler wavelength (nm).
    pub lambda_deg: f64,
    /// Pump wavelength (nm).
    pub lambda_pump: f64,
}

impl Default for PumpParams {
    fn default() -> Self {
        PumpParams {
            g_peak: 7.5,
            t_p: 18.0,
            lambda_deg: 709.3,
            lambda_pump: 354.7,
        }
    }
}

impl PumpParams {
    pub fn new(g_peak: f64, t_p: f64, lambda_deg: f64, lambda_pump: f64) -> Result<Self> {
        let p = PumpParams {
            g_peak,
            t_p,
            lambda_deg,
            lambda_pump,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.g_peak.is_finite() && self.g_peak >= 0.0) {
            return Err(HomError::invalid("g_peak", format!("must be >= 0, got {}", self.g_peak)));
        }
        if !(self.t_p.is_finite() && self.t_p > 0.0) {
            return Err(HomError::invalid("t_p", format!("must be > 0, got {}", self.t_p)));
        }
        if !(self.lambda_deg.is_finite() && self.lambda_deg > 0.0) {
            return Err(HomError::invalid("lambda_deg", "must be > 0"));
        }
        if !(self.lambda_pump.is_finite() && self.lambda_pump > 0.0) {
            return Err(HomError::invalid("lambda_pump", "must be > 0"));
        }
        let rel = (self.lambda_pump - 0.5 * self.lambda_deg).abs() / (0.5 * self.lambda_deg);
        if rel > 1e-3 {
            return Err(HomError::invalid(
                "lambda_pump",
                format!(
                    "frequency-degenerate operation needs lambda_pump = lambda_deg/2 within 0.1% ({} vs {})",
                    self.lambda_pump,
                    0.5 * self.lambda_deg
                ),
            ));
        }
        Ok(())
    }

    /// Same pulse with a different peak gain.
    pub fn with_gain(&self, g_peak: f64) -> Self {
        PumpParams { g_peak, ..*self }
    }

    /// RMS width of the field envelope, `t_p / (2√ln2)`.
    #[inline]
    pub fn sigma_field(&self) -> f64 {
        self.t_p / (2.0 * std::f64::consts::LN_2.sqrt())
    }
}

/// One evaluation of the gain functions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainSample {
    pub u: Complex64,
    pub v: Complex64,
}

impl GainSample {
    /// Mean photon number per mode, `|V|²`.
    #[inline]
    pub fn n(&self) -> f64 {
        self.v.norm_sqr()
    }

    /// `|U|² − |V|²`, equal to one for a unitary amplifier.
    pub fn unitarity(&self) -> f64 {
        self.u.norm_sqr() - self.v.norm_sqr()
    }
}

/// Phase mismatch `Δ(Ω) = D·Ω` (rad/mm).
#[inline]
pub fn delta(omega: f64, crystal: &CrystalParams) -> f64 {
    crystal.walkoff * omega
}

/// Parametric gain at pump time `t`: Gaussian field envelope whose intensity
/// FWHM is `t_p`.
#[inline]
pub fn gain_at(t: f64, pump: &PumpParams) -> f64 {
    let s = pump.sigma_field();
    pump.g_peak * (-t * t / (2.0 * s * s)).exp()
}

/// `(C(z), S(z))` with `C = cosh √z`, `S = sinh √z / √z`, continued to `z < 0`.
#[inline]
pub fn branch_functions(z: f64) -> (f64, f64) {
    if z.abs() < SERIES_THRESHOLD {
        branch_series(z)
    } else if z > 0.0 {
        let r = z.sqrt();
        (r.cosh(), r.sinh() / r)
    } else {
        let r = (-z).sqrt();
        (r.cos(), r.sin() / r)
    }
}

/// Taylor series of the branch functions about `z = 0`.
#[inline]
pub fn branch_series(z: f64) -> (f64, f64) {
    let c = 1.0 + z / 2.0 * (1.0 + z / 12.0 * (1.0 + z / 30.0));
    let s = 1.0 + z / 6.0 * (1.0 + z / 20.0 * (1.0 + z / 42.0));
    (c, s)
}

/// Gain functions for a given instantaneous gain and half mismatch `Δl_c/2`.
#[inline]
pub(crate) fn uv_from_gain(g: f64, half_mismatch: f64) -> GainSample {
    let z = g * g - half_mismatch * half_mismatch;
    let (c, s) = branch_functions(z);
    GainSample {
        u: Complex64::new(c, half_mismatch * s),
        v: Complex64::new(g * s, 0.0),
    }
}

/// `U(Ω,t)`, `V(Ω,t)`.
pub fn uv(omega: f64, t: f64, crystal: &CrystalParams, pump: &PumpParams) -> GainSample {
    uv_from_gain(gain_at(t, pump), crystal.half_mismatch(omega))
}

/// Photon spectral density `|V(Ω,0)|²` at the grid nodes.
pub fn spectrum(grid: &SpectralGrid, crystal: &CrystalParams, pump: &PumpParams) -> Vec<f64> {
    grid.omega()
        .iter()
        .map(|&w| uv(w, 0.0, crystal, pump).n())
        .collect()
}

/// Half width at half maximum of `|V(Ω,0)|²` in rad/ps, found on the main lobe.
pub fn spectral_hwhm(crystal: &CrystalParams, pump: &PumpParams) -> Result<f64> {
    let g = pump.g_peak;
    if !(g > 0.0) {
        return Err(HomError::invalid("g_peak", "spectral width needs g_peak > 0"));
    }
    if crystal.walkoff <= 0.0 {
        return Err(HomError::NotBracketed(
            "zero walk-off gives a flat spectrum with no half-maximum".into(),
        ));
    }
    let peak = g.sinh().powi(2);
    // First zero of V: Γ² = −π².
    let first_zero = 2.0 * (g * g + std::f64::consts::PI.powi(2)).sqrt()
        / (crystal.walkoff * crystal.l_c);
    let f = |w: f64| uv(w, 0.0, crystal, pump).n() / peak - 0.5;
    bisect(f, 0.0, first_zero, 1e-14)
}

/// Spectral FWHM of `|V(Ω,0)|²` converted to wavelength (nm).
pub fn spectral_fwhm_nm(crystal: &CrystalParams, pump: &PumpParams) -> Result<f64> {
    let fwhm_omega = 2.0 * spectral_hwhm(crystal, pump)?;
    Ok(omega_to_nm(fwhm_omega, pump.lambda_deg))
}

/// `δλ = λ² δΩ / (2πc)`.
pub fn omega_to_nm(d_omega: f64, lambda_nm: f64) -> f64 {
    lambda_nm * lambda_nm * d_omega / (2.0 * std::f64::consts::PI * SPEED_OF_LIGHT_NM_PER_PS)
}

/// Inverse of [`omega_to_nm`].
pub fn nm_to_omega(d_lambda: f64, lambda_nm: f64) -> f64 {
    d_lambda * 2.0 * std::f64::consts::PI * SPEED_OF_LIGHT_NM_PER_PS / (lambda_nm * lambda_nm)
}

/// Walk-off `D` for which the spectral FWHM at the pump's peak gain equals
/// `target_fwhm_nm`, by bracketed root finding in `ln D`.
pub fn calibrate_walkoff(target_fwhm_nm: f64, pump: &PumpParams, l_c: f64) -> Result<CrystalParams> {
    if !(target_fwhm_nm.is_finite() && target_fwhm_nm > 0.0) {
        return Err(HomError::invalid("target_fwhm_nm", "must be > 0"));
    }
    pump.validate()?;
    if !(pump.g_peak > 0.0) {
        return Err(HomError::CalibrationFailed(
            "no spectrum to calibrate at zero gain".into(),
        ));
    }
    let width_at = |ln_d: f64| -> f64 {
        let crystal = CrystalParams {
            l_c,
            walkoff: ln_d.exp(),
        };
        match spectral_fwhm_nm(&crystal, pump) {
            Ok(w) => (w / target_fwhm_nm).ln(),
            Err(_) => f64::NAN,
        }
    };
    let (lo, hi) = (1e-8f64.ln(), 1e4f64.ln());
    let ln_d = bisect(width_at, lo, hi, 1e-15).map_err(|e| match e {
        HomError::NotBracketed(m) => HomError::CalibrationFailed(format!("no sign change: {m}")),
        other => other,
    })?;
    CrystalParams::new(l_c, ln_d.exp())
}

/// Least-squares fit of `I = scale · sinh²(c·√P)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainFit {
    /// Gain per √mW.
    pub c: f64,
    pub scale: f64,
    /// Sum of squared residuals at the optimum.
    pub ssr: f64,
    pub iterations: usize,
}

impl GainFit {
    pub fn gain_at_power(&self, power_mw: f64) -> f64 {
        self.c * power_mw.sqrt()
    }

    pub fn model(&self, power_mw: f64) -> f64 {
        self.scale * self.gain_at_power(power_mw).sinh().powi(2)
    }
}

/// `ln sinh x` for `x > 0` without overflow.
fn ln_sinh(x: f64) -> f64 {
    x + (-(-2.0 * x).exp_m1()).ln() - std::f64::consts::LN_2
}

const FIT_MAX_ITERATIONS: usize = 1000;

/// Fit the PDC gain curve `I(P) = scale·sinh²(c√P)`.
///
/// Initialization is deterministic: `c₀` solves the two-point ratio
/// `I_hi/I_lo = sinh²(c√P_hi)/sinh²(c√P_lo)` between the highest- and
/// lowest-power points, and `scale₀ = I_lo / sinh²(c₀√P_lo)`. The pair is then
/// refined by Levenberg–Marquardt.
pub fn fit_gain_curve(powers: &[f64], intensities: &[f64]) -> Result<GainFit> {
    if powers.len() != intensities.len() {
        return Err(HomError::invalid("intensities", "length differs from powers"));
    }
    if powers.len() < 3 {
        return Err(HomError::invalid("powers", "need at least 3 points"));
    }
    if powers.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
        return Err(HomError::invalid("powers", "all powers must be finite and > 0"));
    }
    if intensities.iter().any(|i| !i.is_finite()) {
        return Err(HomError::invalid("intensities", "non-finite value"));
    }
    if intensities.iter().all(|&i| i <= 0.0) {
        return Err(HomError::DegenerateData(
            "all intensities are zero; gain is indeterminate".into(),
        ));
    }

    let (c0, s0) = seed(powers, intensities)?;
    let sqrt_p: Vec<f64> = powers.iter().map(|p| p.sqrt()).collect();

    let ssr_at = |c: f64, s: f64| -> f64 {
        sqrt_p
            .iter()
            .zip(intensities)
            .map(|(q, i)| {
                let r = i - s * (c * q).sinh().powi(2);
                r * r
            })
            .sum()
    };

    let (mut c, mut s) = (c0, s0);
    let mut ssr = ssr_at(c, s);
    let mut lambda = 1e-3;
    for iter in 1..=FIT_MAX_ITERATIONS {
        // Normal equations for the 2x2 problem.
        let (mut a_cc, mut a_cs, mut a_ss, mut g_c, mut g_s) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (q, i) in sqrt_p.iter().zip(intensities) {
            let x = c * q;
            let sh2 = x.sinh().powi(2);
            let j_c = s * (2.0 * x).sinh() * q;
            let j_s = sh2;
            let r = i - s * sh2;
            a_cc += j_c * j_c;
            a_cs += j_c * j_s;
            a_ss += j_s * j_s;
            g_c += j_c * r;
            g_s += j_s * r;
        }
        if ssr == 0.0 || (g_c == 0.0 && g_s == 0.0) {
            return Ok(GainFit { c, scale: s, ssr, iterations: iter });
        }
        loop {
            let m_cc = a_cc * (1.0 + lambda);
            let m_ss = a_ss * (1.0 + lambda);
            let det = m_cc * m_ss - a_cs * a_cs;
            let (dc, ds) = if det != 0.0 && det.is_finite() {
                ((m_ss * g_c - a_cs * g_s) / det, (m_cc * g_s - a_cs * g_c) / det)
            } else {
                (0.0, 0.0)
            };
            let (c_new, s_new) = (c + dc, s + ds);
            let ssr_new = if c_new > 0.0 { ssr_at(c_new, s_new) } else { f64::INFINITY };
            if ssr_new.is_finite() && ssr_new < ssr {
                let small_step = dc.abs() <= 1e-13 * c.abs() && ds.abs() <= 1e-13 * s.abs();
                let small_gain = (ssr - ssr_new) <= 1e-15 * ssr;
                c = c_new;
                s = s_new;
                ssr = ssr_new;
                lambda = (lambda * 0.3).max(1e-12);
                if small_step || small_gain {
                    return Ok(GainFit { c, scale: s, ssr, iterations: iter });
                }
                break;
            }
            lambda *= 10.0;
            if lambda > 1e16 {
                // No descent direction left at working precision.
                return Ok(GainFit { c, scale: s, ssr, iterations: iter });
            }
        }
    }
    Err(HomError::FitFailed {
        iterations: FIT_MAX_ITERATIONS,
        residual: ssr,
    })
}

fn seed(powers: &[f64], intensities: &[f64]) -> Result<(f64, f64)> {
    let positive: Vec<(f64, f64)> = powers
        .iter()
        .zip(intensities)
        .filter(|(_, i)| **i > 0.0)
        .map(|(p, i)| (*p, *i))
        .collect();
    let lo = positive
        .iter()
        .copied()
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .expect("at least one positive intensity");
    let hi = positive
        .iter()
        .copied()
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .expect("at least one positive intensity");
    if hi.0 <= lo.0 {
        return Err(HomError::DegenerateData(
            "need positive intensities at two distinct powers".into(),
        ));
    }
    let (q_lo, q_hi) = (lo.0.sqrt(), hi.0.sqrt());
    let target = (hi.1 / lo.1).ln();
    // Ratio in the c → 0 limit is P_hi/P_lo; data below it cannot be superlinear.
    let linear_limit = (hi.0 / lo.0).ln();
    let c_max = 300.0 / q_hi;
    let c0 = if target <= linear_limit * (1.0 + 1e-9) {
        1e-3 / q_hi
    } else {
        let f = |c: f64| 2.0 * (ln_sinh(c * q_hi) - ln_sinh(c * q_lo)) - target;
        match bisect(f, 1e-9 / q_hi, c_max, 1e-14) {
            Ok(c) => c,
            Err(_) => c_max,
        }
    };
    let s0 = lo.1 / (c0 * q_lo).sinh().powi(2);
    Ok((c0, s0))
}
