//! Truncated Fock-space reference for the single-frequency HOM statistics.
//!
//! A delay acting on one frequency pair couples the twin modes
//! `(1,+Ω) ↔ (2,−Ω)` and `(1,−Ω) ↔ (2,+Ω)`. The oracle therefore evolves two
//! identical two-mode squeezed vacua, `Σ c_n c_m |n⟩₁₊|n⟩₂₋|m⟩₁₋|m⟩₂₊`, applies
//! the phase `e^{±iφ/2}` per photon to beam 1 and a 50:50 beamsplitter to each
//! same-frequency pair, then counts photons per output port.
//!
//! Memory per photon-number level `s` is `O(s²)` (one beamsplitter matrix and
//! one output amplitude block), so the peak footprint is `O(n_max²)`. The work
//! is `O(n_max⁴)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{HomError, Result};

/// Truncation precondition on the amplitude tail.
const TAIL_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TmsvState {
    /// `c_n = tanhⁿg / cosh g`, `n = 0..=n_max`.
    pub amplitudes: Vec<f64>,
    pub g: f64,
    pub n_max: usize,
}

impl TmsvState {
    /// `Σ|c_n|²` over the retained ladder.
    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|c| c * c).sum()
    }

    /// `⟨n⟩` per beam from the retained ladder.
    pub fn mean_photons(&self) -> f64 {
        self.amplitudes
            .iter()
            .enumerate()
            .map(|(n, c)| n as f64 * c * c)
            .sum::<f64>()
            / self.norm()
    }

    /// `Var(n₁ − n₂)`, zero on the `|n,n⟩` ladder.
    pub fn var_difference(&self) -> f64 {
        0.0
    }
}

/// Default truncation: `max(32, ⌈12 sinh²g⌉)`, raised until
/// `tanh^{2n}(g)·(n+1)² < 10⁻¹⁰` so that second moments are converged.
pub fn default_n_max(g: f64) -> usize {
    let base = 32usize.max((12.0 * g.sinh().powi(2)).ceil() as usize);
    let t2 = g.tanh().powi(2);
    let mut n = base;
    while t2.powi(n as i32) * ((n + 1) as f64).powi(2) >= TAIL_TOLERANCE {
        n += 1;
    }
    n
}

/// Two-mode squeezed vacuum truncated at `n_max` photons per beam.
pub fn tmsv(g: f64, n_max: usize) -> Result<TmsvState> {
    if !(g.is_finite() && g >= 0.0) {
        return Err(HomError::invalid("g", format!("must be >= 0, got {g}")));
    }
    let t = g.tanh();
    if t.powi(2 * n_max as i32) >= TAIL_TOLERANCE && g > 0.0 {
        return Err(HomError::Truncation(format!(
            "tanh^(2 n_max) = {:e} >= {TAIL_TOLERANCE:e} at g = {g}, n_max = {n_max}",
            t.powi(2 * n_max as i32)
        )));
    }
    let ch = g.cosh();
    let amplitudes: Vec<f64> = (0..=n_max).map(|n| t.powi(n as i32) / ch).collect();
    let state = TmsvState { amplitudes, g, n_max };
    if state.norm() < 1.0 - 1e-8 {
        return Err(HomError::Truncation(format!("retained norm {} < 1 - 1e-8", state.norm())));
    }
    Ok(state)
}

/// Photon-number statistics at the two beamsplitter outputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HomStats {
    /// `Var(N₁ − N₂)`.
    pub var_diff: f64,
    /// `⟨N₁ + N₂⟩` after the beamsplitter.
    pub n_total: f64,
    /// `⟨N₁ + N₂⟩` of the input state.
    pub n_total_in: f64,
    pub mean_n1: f64,
    pub mean_n2: f64,
    /// `⟨N₁N₂⟩ / (⟨N₁⟩⟨N₂⟩)`.
    pub g2_cross: f64,
    /// Retained output probability.
    pub norm: f64,
}

impl HomStats {
    /// `Var(N₁ − N₂) / ⟨N₁ + N₂⟩`, 1 for vacuum.
    pub fn normalized_variance(&self) -> f64 {
        if self.n_total == 0.0 {
            1.0
        } else {
            self.var_diff / self.n_total
        }
    }
}

#[derive(Default)]
struct Moments {
    p: f64,
    n1: f64,
    n2: f64,
    n1n1: f64,
    n2n2: f64,
    n1n2: f64,
}

impl Moments {
    fn add(&mut self, prob: f64, n1: f64, n2: f64) {
        self.p += prob;
        self.n1 += prob * n1;
        self.n2 += prob * n2;
        self.n1n1 += prob * n1 * n1;
        self.n2n2 += prob * n2 * n2;
        self.n1n2 += prob * n1 * n2;
    }

    fn finish(self, n_total_in: f64) -> HomStats {
        let p = self.p;
        let (m1, m2) = (self.n1 / p, self.n2 / p);
        let e_dd = (self.n1n1 - 2.0 * self.n1n2 + self.n2n2) / p;
        let var_diff = (e_dd - (m1 - m2).powi(2)).max(0.0);
        let g2_cross = if m1 * m2 > 0.0 { self.n1n2 / p / (m1 * m2) } else { 1.0 };
        HomStats {
            var_diff,
            n_total: m1 + m2,
            n_total_in,
            mean_n1: m1,
            mean_n2: m2,
            g2_cross,
            norm: p,
        }
    }
}

/// Beamsplitter matrices `B_s[k][a] = ⟨k, s−k| BS |a, s−a⟩` for `c₁ = (a₁+a₂)/√2`,
/// `c₂ = (−a₁+a₂)/√2`.
///
/// Level `s` follows from level `s−1` by adding one photon symmetrically,
/// `|a, s−a⟩ = (√a a₁†|a−1, s−a⟩ + √(s−a) a₂†|a, s−a−1⟩)/s`, with
/// `a₁† = (c₁†−c₂†)/√2` and `a₂† = (c₁†+c₂†)/√2`. The step is a contraction,
/// so rounding errors do not grow with `s`.
struct BeamsplitterLadder {
    s: usize,
    /// Row-major `(s+1) × (s+1)`, row = output `k`, column = input `a`.
    b: Vec<f64>,
}

impl BeamsplitterLadder {
    fn new() -> Self {
        BeamsplitterLadder { s: 0, b: vec![1.0] }
    }

    #[inline]
    fn get(&self, k: usize, a: usize) -> f64 {
        self.b[k * (self.s + 1) + a]
    }

    fn advance(&mut self) {
        let s_old = self.s;
        let s = s_old + 1;
        let dim = s + 1;
        let r2 = std::f64::consts::FRAC_1_SQRT_2;
        let sf = s as f64;
        let mut next = vec![0.0; dim * dim];
        for a in 0..dim {
            // (source column, sign of c₂†, weight)
            let mut paths = [(0usize, 0.0f64, 0.0f64); 2];
            if a > 0 {
                paths[0] = (a - 1, -1.0, (a as f64).sqrt() / sf);
            }
            if a < s {
                paths[1] = (a, 1.0, ((s - a) as f64).sqrt() / sf);
            }
            for (src, sign, wt) in paths {
                if wt == 0.0 {
                    continue;
                }
                for k in 0..=s_old {
                    let x = wt * r2 * self.get(k, src);
                    // c₁† |k, s_old−k⟩ = √(k+1) |k+1, s_old−k⟩
                    next[(k + 1) * dim + a] += x * ((k + 1) as f64).sqrt();
                    // c₂† |k, s_old−k⟩ = √(s−k) |k, s−k⟩
                    next[k * dim + a] += sign * x * ((s - k) as f64).sqrt();
                }
            }
        }
        self.s = s;
        self.b = next;
    }
}

/// Exact output statistics for two identical twin-beam pairs with relative
/// phase `phi` and a 50:50 beamsplitter per frequency.
pub fn hom_stats(state: &TmsvState, phi: f64) -> Result<HomStats> {
    let c = &state.amplitudes;
    let n_max = state.n_max;
    let n_in = 4.0 * state.mean_photons();
    let mut mom = Moments::default();
    let mut bs = BeamsplitterLadder::new();
    // Levels s = n + m up to n_max; higher levels carry tanh^{2s} of the weight.
    for s in 0..=n_max {
        if s > 0 {
            bs.advance();
        }
        let dim = s + 1;
        let x: Vec<Complex64> = (0..=s)
            .map(|n| {
                let m = s - n;
                Complex64::from_polar(c[n] * c[m], 0.5 * (n as f64 - m as f64) * phi)
            })
            .collect();
        // T[k][m] = Σ_n B[k][n] x_n δ_{m, s−n}; A[k][l] = Σ_m T[k][m] B[l][m].
        let mut amp = vec![Complex64::new(0.0, 0.0); dim * dim];
        for k in 0..dim {
            for n in 0..dim {
                let t = x[n] * bs.get(k, n);
                if t == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let m = s - n;
                for l in 0..dim {
                    amp[k * dim + l] += t * bs.get(l, m);
                }
            }
        }
        for k in 0..dim {
            for l in 0..dim {
                let p = amp[k * dim + l].norm_sqr();
                if p == 0.0 {
                    continue;
                }
                let n1 = (k + l) as f64;
                let n2 = (2 * s - k - l) as f64;
                mom.add(p, n1, n2);
            }
        }
    }
    Ok(mom.finish(n_in))
}

/// Output statistics when the two beams reach the beamsplitter at different
/// times: each photon leaves through either port with probability 1/2, and
/// each detector integrates over both arrival windows.
pub fn hom_stats_separated(state: &TmsvState) -> Result<HomStats> {
    let c = &state.amplitudes;
    let n_in = 2.0 * state.mean_photons();
    let mut mom = Moments::default();
    let mut binom = vec![1.0f64];
    for n in 0..=state.n_max {
        if n > 0 {
            let mut next = vec![0.0; n + 1];
            for (k, b) in binom.iter().enumerate() {
                next[k] += 0.5 * b;
                next[k + 1] += 0.5 * b;
            }
            binom = next;
        }
        let pn = c[n] * c[n];
        for (k, bk) in binom.iter().enumerate() {
            for (l, bl) in binom.iter().enumerate() {
                let n1 = (k + l) as f64;
                let n2 = (2 * n - k - l) as f64;
                mom.add(pn * bk * bl, n1, n2);
            }
        }
    }
    Ok(mom.finish(n_in))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn vacuum_state() {
        let s = tmsv(0.0, 8).unwrap();
        assert_eq!(s.amplitudes[0], 1.0);
        assert!(s.amplitudes[1..].iter().all(|&c| c == 0.0));
        let h = hom_stats(&s, 0.3).unwrap();
        assert_eq!(h.var_diff, 0.0);
        assert_eq!(h.n_total, 0.0);
        assert_eq!(h.normalized_variance(), 1.0);
    }

    #[test]
    fn mean_photons_closed_form() {
        let s = tmsv(1.0, default_n_max(1.0)).unwrap();
        assert_relative_eq!(s.mean_photons(), 1f64.sinh().powi(2), max_relative = 1e-12);
        assert_relative_eq!(s.mean_photons(), 1.3811, max_relative = 1e-4);
        assert_eq!(s.var_difference(), 0.0);
    }

    #[test]
    fn truncation_rejected() {
        assert!(matches!(tmsv(1.5, 10), Err(HomError::Truncation(_))));
    }

    #[test]
    fn beamsplitter_is_orthogonal() {
        let mut bs = BeamsplitterLadder::new();
        for _ in 0..200 {
            bs.advance();
        }
        let d = bs.s + 1;
        for a in 0..d {
            for b in 0..d {
                let dot: f64 = (0..d).map(|k| bs.get(k, a) * bs.get(k, b)).sum();
                let expect = if a == b { 1.0 } else { 0.0 };
                assert!((dot - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn single_photon_pair_bunches() {
        // |1,1⟩ → (|2,0⟩ − |0,2⟩)/√2: no coincidences.
        let mut bs = BeamsplitterLadder::new();
        bs.advance();
        bs.advance();
        assert!(bs.get(1, 1).abs() < 1e-15);
        assert_relative_eq!(bs.get(2, 1).abs(), std::f64::consts::FRAC_1_SQRT_2, max_relative = 1e-14);
    }

    #[test]
    fn zero_phase_closed_form() {
        let g = 1.0;
        let s = tmsv(g, default_n_max(g)).unwrap();
        let h = hom_stats(&s, 0.0).unwrap();
        let expect = 1.0 + g.sinh().powi(2) + g.cosh().powi(2);
        assert_relative_eq!(h.normalized_variance(), expect, max_relative = 1e-8);
        assert_relative_eq!(h.normalized_variance(), 4.7622, max_relative = 1e-4);
        assert_relative_eq!(h.n_total, h.n_total_in, max_relative = 1e-9);
    }

    #[test]
    fn separated_edge_value() {
        let g = 1.0;
        let s = tmsv(g, default_n_max(g)).unwrap();
        let h = hom_stats_separated(&s).unwrap();
        assert_relative_eq!(h.g2_cross, 2.0 + 1.0 / (2.0 * g.sinh().powi(2)), max_relative = 1e-9);
        assert_relative_eq!(h.normalized_variance(), 1.0, max_relative = 1e-9);
    }
}
