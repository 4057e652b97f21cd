use std::path::PathBuf;

use macrohom::trace::fwhm_pedestal;
use macrohom::*;
use serde_json::{json, Value};

use crate::config::{RunConfig, MC_DEFAULT_TAU};
use crate::error::CliError;
use crate::output::{read_gain_csv, sha256_hex, OutputSet};

/// Default delay grid for `trace` and `g2` (ps).
pub const TRACE_TAU: (f64, f64, f64) = (-40.0, 40.0, 0.01);
/// Default delay grid for `sweep-gain` (ps).
pub const SWEEP_TAU: (f64, f64, f64) = (-3.0, 3.0, 0.005);
/// Default seed when neither the config nor `--seed` sets one.
pub const DEFAULT_SEED: u64 = 20_240_101;

pub type Outcome = std::result::Result<(Value, Value), CliError>;

fn tau_max(tau: &[f64]) -> f64 {
    tau.iter().fold(0.0f64, |m, t| m.max(t.abs()))
}

/// Value for the summary, or `null` plus a warning when the estimator is undefined.
fn soft(r: macrohom::Result<f64>, name: &str, warnings: &mut Vec<String>) -> std::result::Result<Value, CliError> {
    match r {
        Ok(x) => Ok(json!(x)),
        Err(e @ HomError::NotBracketed(_)) => {
            warnings.push(format!("{name}: {e}"));
            Ok(Value::Null)
        }
        Err(e) => Err(e.into()),
    }
}

pub fn trace(cfg: &mut RunConfig, out: &mut OutputSet) -> Outcome {
    let pump = cfg.pump()?;
    let det = cfg.detection()?;
    let crystal = cfg.crystal(&pump)?;
    let tau = cfg.tau.resolve(TRACE_TAU)?;
    let grid = SpectralGrid::for_config_scaled(&crystal, &pump, tau_max(&tau), cfg.grid.refine)?;
    let nrf = nrf_trace(&tau, &crystal, &pump, &grid)?;
    let ped = pedestal_trace(&tau, &crystal, &pump, &grid)?;
    let dn = detected_trace(&nrf, &det)?;
    let rows: Vec<Vec<f64>> = (0..tau.len())
        .map(|i| vec![tau[i], nrf.value[i], ped.value[i], dn.value[i]])
        .collect();
    out.write_csv("trace.csv", &["tau_ps", "nrf_ideal", "nrf_pedestal", "nrf_detected"], &rows)?;

    let mut warnings = Vec::new();
    let peak = dn.value.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let summary = json!({
        "visibility": visibility(&dn)?,
        "fwhm_narrow_ps": soft(fwhm_narrow(&nrf, &ped), "fwhm_narrow_ps", &mut warnings)?,
        "fwhm_pedestal_ps": soft(fwhm_pedestal(&ped), "fwhm_pedestal_ps", &mut warnings)?,
        "m_long": soft(mode_count_long(&nrf, &ped), "m_long", &mut warnings)?,
        "nrf_detected_max": peak,
        "warnings": warnings,
    });
    let resolved = json!({ "walkoff_ps_per_mm": crystal.walkoff, "grid_nodes": grid.len(), "n_tau": tau.len() });
    Ok((resolved, summary))
}

pub fn g2(cfg: &mut RunConfig, out: &mut OutputSet) -> Outcome {
    let pump = cfg.pump()?;
    let det = cfg.detection()?;
    let crystal = cfg.crystal(&pump)?;
    let tau = cfg.tau.resolve(TRACE_TAU)?;
    let grid = SpectralGrid::for_config_scaled(&crystal, &pump, tau_max(&tau), cfg.grid.refine)?;
    let r = g2_trace(&tau, &crystal, &pump, &grid, &det)?;
    let rows: Vec<Vec<f64>> = tau.iter().zip(&r.trace.value).map(|(t, g)| vec![*t, *g]).collect();
    out.write_csv("g2.csv", &["tau_ps", "g2"], &rows)?;

    // Edge value: the sample farthest from zero delay.
    let edge_idx = (0..tau.len()).max_by(|&a, &b| tau[a].abs().total_cmp(&tau[b].abs())).unwrap();
    let edge = r.trace.value[edge_idx];
    let min = r.trace.value.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut warnings = Vec::new();
    let m = match mode_count_g2(edge, r.n_mode) {
        Ok(m) => json!(m),
        Err(e) => {
            warnings.push(format!("mode_count_g2: {e}"));
            Value::Null
        }
    };
    let summary = json!({
        "dip_visibility": visibility(&r.trace)?,
        "mode_count_g2": m,
        "g2_edge": edge,
        "g2_min": min,
        "n_mode": r.n_mode,
        "warnings": warnings,
    });
    let resolved = json!({ "walkoff_ps_per_mm": crystal.walkoff, "grid_nodes": grid.len(), "n_tau": tau.len() });
    Ok((resolved, summary))
}

pub fn sweep_gain(cfg: &mut RunConfig, out: &mut OutputSet) -> Outcome {
    let pump = cfg.pump()?;
    let crystal = cfg.crystal(&pump)?;
    let tau = cfg.sweep.tau.resolve(SWEEP_TAU)?;
    if cfg.sweep.g_values.is_empty() {
        return Err(CliError::Validation("sweep.g_values is empty".into()));
    }
    let table = fwhm_vs_gain(&cfg.sweep.g_values, &crystal, &pump, &tau)?;
    let rows: Vec<Vec<f64>> = table.iter().map(|(g, w)| vec![*g, *w]).collect();
    out.write_csv("sweep.csv", &["g", "fwhm_ps"], &rows)?;

    let at = |g: f64| table.iter().find(|r| r.0 == g).map(|r| r.1);
    let ratio = match (at(7.5), at(5.5)) {
        (Some(a), Some(b)) => json!(a / b),
        _ => Value::Null,
    };
    let mut inside: Vec<(f64, f64)> = table.iter().cloned().filter(|r| (5.5..=7.5).contains(&r.0)).collect();
    inside.sort_by(|a, b| a.0.total_cmp(&b.0));
    let monotone = inside.windows(2).all(|w| w[1].1 <= w[0].1);
    let summary = json!({
        "fwhm_ratio_7p5_over_5p5": ratio,
        "monotone_non_increasing_5p5_to_7p5": monotone,
    });
    let resolved = json!({ "walkoff_ps_per_mm": crystal.walkoff, "n_tau": tau.len() });
    Ok((resolved, summary))
}

pub fn fit_gain(cfg: &mut RunConfig, out: &mut OutputSet, data: Option<PathBuf>) -> Outcome {
    if let Some(d) = data {
        cfg.fit.data = Some(d);
    }
    let path = cfg
        .fit
        .data
        .clone()
        .ok_or_else(|| CliError::Validation("fit-gain needs a data file (--data or [fit] data)".into()))?;
    let bytes = std::fs::read(&path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let (p, i) = read_gain_csv(&path)?;
    let fit = fit_gain_curve(&p, &i)?;
    let rows: Vec<Vec<f64>> = p
        .iter()
        .zip(&i)
        .map(|(&pw, &int)| {
            let m = fit.model(pw);
            vec![pw, int, m, int - m]
        })
        .collect();
    out.write_csv("fit_residuals.csv", &["power_mw", "intensity", "model", "residual"], &rows)?;
    out.write_csv("fit.csv", &["c", "scale", "ssr"], &[vec![fit.c, fit.scale, fit.ssr]])?;
    let report = *cfg.fit.report_power_mw.get_or_insert(55.0);
    let summary = json!({
        "c": fit.c,
        "scale": fit.scale,
        "ssr": fit.ssr,
        "iterations": fit.iterations,
        "report_power_mw": report,
        "gain_at_report_power": fit.gain_at_power(report),
    });
    let resolved = json!({ "data_sha256": sha256_hex(&bytes), "n_points": p.len() });
    Ok((resolved, summary))
}

pub fn calibrate(cfg: &mut RunConfig, out: &mut OutputSet) -> Outcome {
    let pump = cfg.pump()?;
    let l_c = cfg.crystal.l_c;
    let targets = if cfg.calibrate.targets_nm.is_empty() {
        vec![cfg.crystal.target_fwhm_nm]
    } else {
        cfg.calibrate.targets_nm.clone()
    };
    let mut rows = Vec::new();
    for &t in &targets {
        let c = calibrate_walkoff(t, &pump, l_c)?;
        rows.push(vec![t, c.walkoff, spectral_fwhm_nm(&c, &pump)?]);
    }
    out.write_csv("calibration.csv", &["target_fwhm_nm", "walkoff_ps_per_mm", "achieved_fwhm_nm"], &rows)?;
    let summary = json!({
        "walkoff_ps_per_mm": rows[0][1],
        "achieved_fwhm_nm": rows[0][2],
        "targets": rows.iter().map(|r| json!({"target_fwhm_nm": r[0], "walkoff_ps_per_mm": r[1], "achieved_fwhm_nm": r[2]})).collect::<Vec<_>>(),
    });
    Ok((json!({ "n_targets": targets.len() }), summary))
}

pub fn mc(cfg: &mut RunConfig, out: &mut OutputSet) -> Outcome {
    let pump = cfg.pump()?;
    let det = cfg.detection()?;
    let crystal = cfg.crystal(&pump)?;
    let seed = *cfg.seed.get_or_insert(DEFAULT_SEED);
    let t = &mut cfg.mc.tau;
    if t.values.is_none() && t.start.is_none() && t.stop.is_none() && t.step.is_none() {
        t.values = Some(MC_DEFAULT_TAU.to_vec());
    }
    let tau = t.resolve((0.0, 0.0, 1.0))?;
    let lattice = cfg.lattice.resolve(&crystal, &pump)?;
    let stats = dip_scan(&crystal, &pump, &det, &lattice, &tau, seed)?;
    let rows: Vec<Vec<f64>> = stats.iter().map(|s| vec![s.tau, s.nrf_hat, s.se_nrf, s.g2_hat, s.se_g2]).collect();
    out.write_csv("mc.csv", &["tau_ps", "nrf_hat", "se_nrf", "g2_hat", "se_g2"], &rows)?;

    // Exact lattice moments and the continuum trace at the same delays.
    let grid = SpectralGrid::for_config(&crystal, &pump, tau_max(&tau))?;
    let cont = detected_trace(&nrf_trace(&tau, &crystal, &pump, &grid)?, &det)?;
    let mut reference = Vec::with_capacity(tau.len());
    for (i, &t) in tau.iter().enumerate() {
        let e = lattice_expectation(&crystal, &pump, &det, &lattice, t)?;
        reference.push(vec![t, e.nrf_detected, e.g2, cont.value[i]]);
    }
    out.write_csv("mc_reference.csv", &["tau_ps", "nrf_lattice", "g2_lattice", "nrf_quadrature"], &reference)?;

    let summary = json!({
        "seed": seed,
        "n_pulses": det.n_pulses,
        "lattice": lattice,
        "lattice_cells": lattice.cells(),
        "mean_photons_per_cell": lattice.mean_photons_per_cell(&crystal, &pump),
        "degenerate": stats.iter().any(|s| s.degenerate),
        "seeds": stats.iter().map(|s| s.seed).collect::<Vec<_>>(),
    });
    let resolved = json!({ "walkoff_ps_per_mm": crystal.walkoff, "grid_nodes": grid.len() });
    Ok((resolved, summary))
}
