//! Two-photon interference of bright twin beams from high-gain parametric
//! down-conversion at a 50:50 beamsplitter.
//!
//! The crate is organised bottom-up:
//!
//! * [`gain`]: Bogoliubov gain functions `U(Ω,t)`, `V(Ω,t)`, the PDC spectrum,
//!   walk-off calibration and the `N = sinh²G` gain-curve fit.
//! * [`quadrature`]: Gauss–Legendre spectral grids.
//! * [`trace`]: the normalized difference-variance (NRF) and g² traces versus
//!   delay, visibility, peak widths and mode-count estimators.
//! * [`fock`]: brute-force truncated Fock-space reference for low gain.
//! * [`mc`]: Monte-Carlo pulse-ensemble simulation of the photodetection.
//!
//! Units are ps, rad/ps and mm throughout; wavelengths are in nm.

pub mod error;
pub mod fock;
pub mod gain;
pub mod mc;
pub mod quadrature;
mod roots;
pub mod trace;

pub use error::{HomError, Result};
pub use fock::{hom_stats, hom_stats_separated, tmsv, HomStats, TmsvState};
pub use gain::{
    calibrate_walkoff, delta, fit_gain_curve, gain_at, spectral_fwhm_nm, spectrum, uv,
    CrystalParams, GainFit, GainSample, PumpParams,
};
pub use mc::{
    derive_seed, dip_scan, lattice_expectation, simulate_ensemble, EnsembleStats, LatticeMoments,
    LatticeSpec,
};
pub use quadrature::SpectralGrid;
pub use trace::{
    detected_trace, fwhm_narrow, fwhm_vs_gain, g2_trace, mode_count_g2, mode_count_long,
    nrf_trace, pedestal_trace, tau_grid, visibility, DetectionModel, G2Result, Trace, TraceKind,
};

/// Speed of light in nm/ps.
pub const SPEED_OF_LIGHT_NM_PER_PS: f64 = 299_792.458;
