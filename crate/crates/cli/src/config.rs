use std::path::{Path, PathBuf};

use macrohom::{tau_grid, CrystalParams, DetectionModel, LatticeSpec, PumpParams};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Full run configuration. Every field has a default; unknown keys are rejected.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Subcommand that produced a manifest; checked on re-run.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub crystal: CrystalSection,
    pub pump: PumpSection,
    pub detection: DetectionSection,
    pub tau: TauSpec,
    pub grid: GridSection,
    pub lattice: LatticeSection,
    pub sweep: SweepSection,
    pub fit: FitSection,
    pub calibrate: CalibrateSection,
    pub mc: McSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CrystalSection {
    /// Crystal length (mm).
    pub l_c: f64,
    /// Group-velocity walk-off (ps/mm). Calibrated from `target_fwhm_nm` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub walkoff: Option<f64>,
    pub target_fwhm_nm: f64,
}

impl Default for CrystalSection {
    fn default() -> Self {
        CrystalSection { l_c: 10.0, walkoff: None, target_fwhm_nm: 1.3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PumpSection {
    pub g_peak: f64,
    /// Intensity FWHM of the pump pulse (ps).
    pub t_p: f64,
    pub lambda_deg: f64,
    pub lambda_pump: f64,
}

impl Default for PumpSection {
    fn default() -> Self {
        let p = PumpParams::default();
        PumpSection { g_peak: p.g_peak, t_p: p.t_p, lambda_deg: p.lambda_deg, lambda_pump: p.lambda_pump }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectionSection {
    pub eta: f64,
    pub m_spatial: u32,
    pub noise_var: f64,
    pub n_pulses: usize,
}

impl Default for DetectionSection {
    fn default() -> Self {
        let d = DetectionModel::default();
        DetectionSection { eta: d.eta, m_spatial: d.m_spatial, noise_var: d.noise_var, n_pulses: d.n_pulses }
    }
}

/// Delay sampling: either explicit `values` or `start`/`stop`/`step`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TauSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub start: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stop: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
}

impl TauSpec {
    /// Fill unset fields from `(start, stop, step)` and return the delays.
    pub fn resolve(&mut self, default: (f64, f64, f64)) -> Result<Vec<f64>, CliError> {
        if let Some(v) = &self.values {
            if self.start.is_some() || self.stop.is_some() || self.step.is_some() {
                return Err(CliError::Validation("tau: give either values or start/stop/step".into()));
            }
            if v.is_empty() {
                return Err(CliError::Validation("tau: empty delay grid".into()));
            }
            if v.iter().any(|t| !t.is_finite()) {
                return Err(CliError::Validation("tau: non-finite delay".into()));
            }
            return Ok(v.clone());
        }
        let start = *self.start.get_or_insert(default.0);
        let stop = *self.stop.get_or_insert(default.1);
        let step = *self.step.get_or_insert(default.2);
        let tau = tau_grid(start, stop, step)?;
        if tau.is_empty() {
            return Err(CliError::Validation("tau: empty delay grid".into()));
        }
        Ok(tau)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    /// Multiplier on the automatic number of spectral nodes.
    pub refine: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection { refine: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LatticeSection {
    pub n_freq_bins: usize,
    pub bins_per_fwhm: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_time_slices: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slice_duration: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bin_width: Option<f64>,
}

impl Default for LatticeSection {
    fn default() -> Self {
        LatticeSection {
            n_freq_bins: macrohom::mc::DEFAULT_BINS,
            bins_per_fwhm: macrohom::mc::BINS_PER_FWHM,
            n_time_slices: None,
            slice_duration: None,
            bin_width: None,
        }
    }
}

impl LatticeSection {
    /// Build the lattice, recording the derived geometry back into the section.
    pub fn resolve(&mut self, crystal: &CrystalParams, pump: &PumpParams) -> Result<LatticeSpec, CliError> {
        let auto = if self.n_time_slices.is_some() && self.slice_duration.is_some() && self.bin_width.is_some() {
            None
        } else {
            Some(LatticeSpec::with_bins(crystal, pump, self.n_freq_bins, self.bins_per_fwhm)?)
        };
        let spec = LatticeSpec {
            n_time_slices: *self.n_time_slices.get_or_insert_with(|| auto.unwrap().n_time_slices),
            n_freq_bins: self.n_freq_bins,
            slice_duration: *self.slice_duration.get_or_insert_with(|| auto.unwrap().slice_duration),
            bin_width: *self.bin_width.get_or_insert_with(|| auto.unwrap().bin_width),
        };
        spec.validate(pump)?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub g_values: Vec<f64>,
    pub tau: TauSpec,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            g_values: (0..11).map(|i| 5.5 + 0.2 * i as f64).collect(),
            tau: TauSpec::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitSection {
    /// Two-column CSV with header `power_mw,intensity`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
    /// Pump power at which the fitted gain is reported (mW).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report_power_mw: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CalibrateSection {
    /// Extra target widths (nm); the crystal target is used when empty.
    pub targets_nm: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McSection {
    pub tau: TauSpec,
}

/// Default Monte-Carlo delays spanning the narrow peak and the pedestal.
pub const MC_DEFAULT_TAU: [f64; 11] = [-20.0, -10.0, -5.0, -2.0, -0.5, 0.0, 0.5, 2.0, 5.0, 10.0, 20.0];

impl RunConfig {
    /// Load a TOML config, or the `config` record of a JSON manifest.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        if path.extension().is_some_and(|e| e == "json") {
            let mut value: serde_json::Value = serde_json::from_str(&text)
                .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
            let config = value
                .get_mut("config")
                .map(serde_json::Value::take)
                .ok_or_else(|| CliError::Validation(format!("{}: manifest has no config record", path.display())))?;
            serde_json::from_value(config).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
        } else {
            toml::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
        }
    }

    pub fn pump(&self) -> Result<PumpParams, CliError> {
        let p = &self.pump;
        Ok(PumpParams::new(p.g_peak, p.t_p, p.lambda_deg, p.lambda_pump)?)
    }

    pub fn detection(&self) -> Result<DetectionModel, CliError> {
        let d = &self.detection;
        let det = DetectionModel { eta: d.eta, m_spatial: d.m_spatial, noise_var: d.noise_var, n_pulses: d.n_pulses };
        det.validate()?;
        Ok(det)
    }

    /// Crystal with the walk-off calibrated if it was not given.
    pub fn crystal(&mut self, pump: &PumpParams) -> Result<CrystalParams, CliError> {
        let c = &mut self.crystal;
        if let Some(d) = c.walkoff {
            return Ok(CrystalParams::new(c.l_c, d)?);
        }
        let crystal = macrohom::calibrate_walkoff(c.target_fwhm_nm, pump, c.l_c)?;
        c.walkoff = Some(crystal.walkoff);
        Ok(crystal)
    }
}
