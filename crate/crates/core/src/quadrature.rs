//! Gauss–Legendre grids for the one-sided spectral integrals `∫₀^∞ dΩ`.

use serde::{Deserialize, Serialize};

use crate::error::{HomError, Result};
use crate::gain::{CrystalParams, PumpParams};

/// Gauss–Legendre order used on each panel of automatic grids.
pub const PANEL_ORDER: usize = 16;
/// Minimum number of nodes of an automatic grid.
pub const MIN_SAMPLES: usize = 2048;
/// Spectral density at the cutoff relative to the peak.
pub const TAIL_CUTOFF: f64 = 1e-6;

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Legendre order must be positive");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess, then Newton on P_n.
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, z);
        if d != 0.0 {
            dp = d;
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// `(P_n(z), P_n'(z))` by the three-term recurrence.
fn legendre(n: usize, z: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, z);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// How a grid was constructed; decides whether the delay-resolution rule applies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridKind {
    /// Composite Gauss–Legendre on `[0, omega_max]`.
    Composite { omega_max: f64 },
    /// Explicit nodes, including single-frequency grids.
    Discrete,
}

/// Quadrature nodes `Ω_i ≥ 0` (rad/ps) and positive weights for `∫₀^∞ dΩ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralGrid {
    omega: Vec<f64>,
    weights: Vec<f64>,
    kind: GridKind,
}

impl SpectralGrid {
    /// `panels` equal panels of `order`-point Gauss–Legendre on `[0, omega_max]`.
    pub fn composite(omega_max: f64, panels: usize, order: usize) -> Result<Self> {
        if !(omega_max.is_finite() && omega_max > 0.0) {
            return Err(HomError::invalid("omega_max", format!("must be > 0, got {omega_max}")));
        }
        if panels == 0 || order == 0 {
            return Err(HomError::invalid("panels", "need at least one panel and node"));
        }
        let (x, w) = gauss_legendre(order);
        let h = omega_max / panels as f64;
        let mut omega = Vec::with_capacity(panels * order);
        let mut weights = Vec::with_capacity(panels * order);
        for p in 0..panels {
            let mid = (p as f64 + 0.5) * h;
            for (xi, wi) in x.iter().zip(&w) {
                omega.push(mid + 0.5 * h * xi);
                weights.push(0.5 * h * wi);
            }
        }
        Ok(SpectralGrid {
            omega,
            weights,
            kind: GridKind::Composite { omega_max },
        })
    }

    /// Automatic grid for delays up to `tau_max`: the cutoff `Ω_max` puts the
    /// spectral envelope below `TAIL_CUTOFF` of its peak and the node count is
    /// `max(MIN_SAMPLES, 8·Ω_max·τ_max/π)`.
    pub fn for_config(crystal: &CrystalParams, pump: &PumpParams, tau_max: f64) -> Result<Self> {
        Self::for_config_scaled(crystal, pump, tau_max, 1)
    }

    /// As [`SpectralGrid::for_config`] with the node count multiplied by `refine`.
    pub fn for_config_scaled(
        crystal: &CrystalParams,
        pump: &PumpParams,
        tau_max: f64,
        refine: usize,
    ) -> Result<Self> {
        crystal.validate()?;
        pump.validate()?;
        if crystal.walkoff == 0.0 {
            return Err(HomError::invalid(
                "walkoff",
                "automatic grid needs D > 0; use SpectralGrid::single_mode() for the D = 0 limit",
            ));
        }
        let omega_max = omega_cutoff(crystal, pump);
        let needed = required_samples(omega_max, tau_max.abs());
        let n = needed.max(MIN_SAMPLES) * refine.max(1);
        Self::composite(omega_max, n.div_ceil(PANEL_ORDER), PANEL_ORDER)
    }

    /// One node at `Ω = 0` with unit weight: the single-mode limit.
    pub fn single_mode() -> Self {
        Self::single(0.0)
    }

    /// One node at `omega` with unit weight.
    pub fn single(omega: f64) -> Self {
        SpectralGrid {
            omega: vec![omega],
            weights: vec![1.0],
            kind: GridKind::Discrete,
        }
    }

    /// Explicit nodes and weights.
    pub fn from_parts(omega: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if omega.is_empty() || omega.len() != weights.len() {
            return Err(HomError::invalid("omega", "need equal, nonzero numbers of nodes and weights"));
        }
        if omega.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(HomError::invalid("omega", "nodes must be finite and >= 0"));
        }
        if omega.windows(2).any(|p| p[1] <= p[0]) {
            return Err(HomError::invalid("omega", "nodes must be strictly increasing"));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(HomError::invalid("weights", "weights must be finite and > 0"));
        }
        Ok(SpectralGrid {
            omega,
            weights,
            kind: GridKind::Discrete,
        })
    }

    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn kind(&self) -> GridKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }

    /// Error unless `e^{2iΩτ}` is sampled at least 8 times per period up to `tau_max`.
    pub fn check_resolution(&self, tau_max: f64) -> Result<()> {
        match self.kind {
            GridKind::Discrete => Ok(()),
            GridKind::Composite { omega_max } => {
                let needed = required_samples(omega_max, tau_max.abs());
                if self.len() < needed {
                    Err(HomError::GridResolution(format!(
                        "{} nodes on [0, {omega_max:.4}] rad/ps, |tau| up to {tau_max} ps needs {needed}",
                        self.len()
                    )))
                } else {
                    Ok(())
                }
            }
        }
    }

    /// Weighted sum in node order.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }
}

/// Cutoff frequency where `|V(Ω,0)|² < TAIL_CUTOFF·sinh²G` for every larger Ω.
///
/// Beyond the first zero `|V|² = G² sin²y / y²` with `y² = h² − G²`, bounded by `G²/y²`.
pub fn omega_cutoff(crystal: &CrystalParams, pump: &PumpParams) -> f64 {
    let g = pump.g_peak;
    let y2 = if g > 0.0 {
        g * g / (TAIL_CUTOFF * g.sinh().powi(2))
    } else {
        1.0 / TAIL_CUTOFF
    };
    let h = (g * g + y2).sqrt();
    2.0 * h / (crystal.walkoff * crystal.l_c)
}

/// Nodes needed for 8 samples per period of `e^{2iΩτ}` on `[0, Ω_max]`.
pub fn required_samples(omega_max: f64, tau_max: f64) -> usize {
    (8.0 * omega_max * tau_max / std::f64::consts::PI).ceil() as usize
}
