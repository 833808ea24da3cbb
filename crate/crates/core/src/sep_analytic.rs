//! Closed-form high-SNR SEP approximation for the PAD-D detector.
//!
//! For an ordered pair `(s_i, s_j)` with `s_i` transmitted, the metric difference
//! `η_ij = L_j − L_i` is modelled as `a₀w² + 2a₁w + 2a₃ψ + a₄` with
//! `w ~ N(0, V_i^(a))` and `ψ ~ N(0, V_i^(θ))`. Its mean, variance and skewness
//! are matched to a skew-normal law whose CDF at zero gives the pairwise error
//! probability; the SEP is the union bound `(1/M) Σ_i Σ_{j≠i} P(η_ij < 0)`.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::channel::ImpairmentParams;
use crate::constellation::Constellation;
use crate::detector::wrap_phase;
use crate::error::{Error, Result};
use crate::specialfn::{delta_from_skewness, owen_t, q_function, shape_from_delta};

/// Coefficients and matched skew-normal parameters of one ordered pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairwiseStats {
    pub a0: f64,
    pub a1: f64,
    /// Phase-variance difference; not used by the high-SNR moments.
    pub a2: f64,
    pub a3: f64,
    pub a4: f64,
    pub mu: f64,
    pub sigma: f64,
    pub gamma1: f64,
    pub delta: f64,
    pub omega: f64,
    pub xi: f64,
    pub alpha: f64,
    /// `V_i^(a)`, `V_i^(θ)` of the transmitted symbol.
    pub var_amp: f64,
    pub var_phase: f64,
}

#[derive(Debug, Clone, Copy)]
struct SymbolTerms {
    amp: f64,
    phase: f64,
    var_amp: f64,
    var_phase: f64,
}

impl SymbolTerms {
    fn new(s: num_complex::Complex64, p: &ImpairmentParams) -> Result<Self> {
        let amp = s.norm();
        if !(amp > 0.0) {
            return Err(Error::Domain("symbol with zero amplitude".into()));
        }
        Ok(Self {
            amp,
            phase: s.arg(),
            var_amp: p.amplitude_variance(amp),
            var_phase: p.phase_variance(amp),
        })
    }
}

fn symbol_terms(c: &Constellation, p: &ImpairmentParams) -> Result<Vec<SymbolTerms>> {
    c.points().iter().map(|&s| SymbolTerms::new(s, p)).collect()
}

/// Two residual values closer than this (relative to the larger amplitude)
/// are treated as equal when a residual channel is noise-free.
const DEGENERATE_REL_TOL: f64 = 1e-12;

/// Pairwise statistics, or `None` when the pair is perfectly separable
/// (a noise-free residual channel on which the two symbols differ).
fn pair_stats(si: &SymbolTerms, sj: &SymbolTerms) -> Option<PairwiseStats> {
    let d_amp = sj.amp - si.amp;
    let d_phase = wrap_phase(sj.phase - si.phase);
    let scale = si.amp.max(sj.amp);

    let amp_channel = si.var_amp > 0.0;
    let phase_channel = si.var_phase > 0.0;
    if !amp_channel && d_amp.abs() > DEGENERATE_REL_TOL * scale {
        return None;
    }
    if !phase_channel && d_phase.abs() > DEGENERATE_REL_TOL {
        return None;
    }

    let (a0, a1, amp_a4, amp_log) = if amp_channel {
        (
            sj.var_amp.recip() - si.var_amp.recip(),
            d_amp / sj.var_amp,
            d_amp * d_amp / sj.var_amp,
            sj.var_amp / si.var_amp,
        )
    } else {
        (0.0, 0.0, 0.0, 1.0)
    };
    let (a2, a3, phase_a4, phase_log) = if phase_channel {
        (
            sj.var_phase.recip() - si.var_phase.recip(),
            d_phase / sj.var_phase,
            d_phase * d_phase / sj.var_phase,
            sj.var_phase / si.var_phase,
        )
    } else {
        (0.0, 0.0, 0.0, 1.0)
    };
    let a4 = amp_a4 + phase_a4 + (amp_log * phase_log).ln();

    let va = if amp_channel { si.var_amp } else { 0.0 };
    let vt = if phase_channel { si.var_phase } else { 0.0 };
    let mu = a0 * va + a4;
    let sigma2 = 2.0 * a0 * a0 * va * va + 4.0 * a1 * a1 * va + 4.0 * a3 * a3 * vt;
    let sigma = sigma2.sqrt();
    if !(sigma > 0.0) {
        return None;
    }
    let gamma1 = (8.0 * a0.powi(3) * va.powi(3) + 24.0 * a0 * a1 * a1 * va * va) / (sigma2 * sigma);
    let delta = delta_from_skewness(gamma1);
    let omega = sigma / (1.0 - 2.0 * delta * delta / PI).sqrt();
    let xi = mu - omega * delta * (2.0 / PI).sqrt();
    Some(PairwiseStats {
        a0,
        a1,
        a2,
        a3,
        a4,
        mu,
        sigma,
        gamma1,
        delta,
        omega,
        xi,
        alpha: shape_from_delta(delta),
        var_amp: va,
        var_phase: vt,
    })
}

/// Statistics of the metric difference `L_j − L_i` given `s_i` was sent.
///
/// Requires both residual variances to be positive; use [`sep_union`] or
/// [`error_floor`] for the noise-free limits.
pub fn pairwise_coeffs(
    c: &Constellation,
    i: usize,
    j: usize,
    p: &ImpairmentParams,
) -> Result<PairwiseStats> {
    let m = c.order();
    if i >= m || j >= m || i == j {
        return Err(Error::Domain(format!(
            "need distinct indices below {m}, got ({i}, {j})"
        )));
    }
    let si = SymbolTerms::new(c.points()[i], p)?;
    let sj = SymbolTerms::new(c.points()[j], p)?;
    if !(si.var_amp > 0.0 && si.var_phase > 0.0) {
        return Err(Error::Domain(format!(
            "residual variances must be positive, got V(a) = {}, V(θ) = {}",
            si.var_amp, si.var_phase
        )));
    }
    pair_stats(&si, &sj).ok_or_else(|| Error::Domain("degenerate pair".into()))
}

/// `P(η < 0) ≈ Q(ξ/ω) − 2T(−ξ/ω, α)`, clamped to `[0, 1]`.
pub fn pairwise_pep(stats: &PairwiseStats) -> f64 {
    let h = stats.xi / stats.omega;
    let raw = q_function(h) - 2.0 * owen_t(-h, stats.alpha);
    if !(0.0..=1.0).contains(&raw) {
        log::debug!("pairwise probability {raw:e} clamped (h = {h}, α = {})", stats.alpha);
    }
    raw.clamp(0.0, 1.0)
}

/// Neumaier-compensated sum.
fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for x in values {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Pairwise error probabilities of every ordered pair, row `i` = transmitted.
pub fn pep_matrix(c: &Constellation, p: &ImpairmentParams) -> Result<Vec<Vec<f64>>> {
    let terms = symbol_terms(c, p)?;
    Ok(terms
        .par_iter()
        .enumerate()
        .map(|(i, si)| {
            terms
                .iter()
                .enumerate()
                .map(|(j, sj)| {
                    if i == j {
                        0.0
                    } else {
                        pair_stats(si, sj).map_or(0.0, |s| pairwise_pep(&s))
                    }
                })
                .collect()
        })
        .collect())
}

/// Union-bound SEP approximation for PAD-D detection.
pub fn sep_union(c: &Constellation, p: &ImpairmentParams) -> Result<f64> {
    if p.is_noiseless() {
        return Ok(0.0);
    }
    let terms = symbol_terms(c, p)?;
    let rows: Vec<f64> = terms
        .par_iter()
        .enumerate()
        .map(|(i, si)| {
            compensated_sum(terms.iter().enumerate().filter(|&(j, _)| j != i).map(
                |(_, sj)| pair_stats(si, sj).map_or(0.0, |s| pairwise_pep(&s)),
            ))
        })
        .collect();
    let total = compensated_sum(rows);
    Ok((total / c.order() as f64).clamp(0.0, 1.0))
}

/// SEP limit as `σ_n² → 0`, set by the gain and phase-noise variances alone.
pub fn error_floor(c: &Constellation, sigma_g2: f64, sigma_phi2: f64) -> Result<f64> {
    let p = ImpairmentParams::new(0.0, sigma_g2, sigma_phi2)?;
    sep_union(c, &p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constellation::{make_qam, make_sapsk, SapskSpec};
    use num_complex::Complex64;

    #[test]
    fn same_ring_pairs_are_gaussian() {
        let psk = make_sapsk(SapskSpec::new(8, 1, 1.0).unwrap()).unwrap();
        let p = ImpairmentParams::new(1e-3, 1e-3, 1e-3).unwrap();
        for j in 1..8 {
            let s = pairwise_coeffs(&psk, 0, j, &p).unwrap();
            assert_eq!(s.a0, 0.0);
            assert_eq!(s.a1, 0.0);
            assert_eq!(s.gamma1, 0.0);
            assert_eq!(s.delta, 0.0);
            assert_eq!(s.alpha, 0.0);
            let gaussian = q_function(s.xi / s.omega);
            assert_eq!(pairwise_pep(&s), gaussian);
        }
    }

    #[test]
    fn phase_only_pair_reduces_to_one_dimensional_gaussian() {
        // Unit-circle neighbours, σ_n² → 0: η = 2a₃ψ + a₄ gives Q(Δθ/(2σ_φ)).
        let dtheta = 0.3;
        let c = Constellation::new(
            vec![Complex64::new(1.0, 0.0), Complex64::from_polar(1.0, dtheta)],
            "pair",
        )
        .unwrap();
        let sigma_phi2 = 1e-2;
        let p = ImpairmentParams::new(0.0, 1e-3, sigma_phi2).unwrap();
        let s = pairwise_coeffs(&c, 0, 1, &p).unwrap();
        let expected = q_function(dtheta / (2.0 * sigma_phi2.sqrt()));
        assert!((pairwise_pep(&s) - expected).abs() < 1e-15);
        let tiny_noise = ImpairmentParams::new(1e-14, 1e-3, sigma_phi2).unwrap();
        let s = pairwise_coeffs(&c, 0, 1, &tiny_noise).unwrap();
        assert!((pairwise_pep(&s) - expected).abs() < 1e-10);
    }

    #[test]
    fn stats_invariants() {
        let qam = make_qam(16).unwrap();
        let p = ImpairmentParams::new(1e-4, 1e-3, 1e-4).unwrap();
        for i in 0..16 {
            for j in 0..16 {
                if i == j {
                    continue;
                }
                let s = pairwise_coeffs(&qam, i, j, &p).unwrap();
                let va = s.var_amp;
                let sigma2 = 2.0 * s.a0 * s.a0 * va * va + 4.0 * s.a1 * s.a1 * va
                    + 4.0 * s.a3 * s.a3 * s.var_phase;
                assert!((s.sigma.powi(2) - sigma2).abs() <= 1e-12 * sigma2);
                let back = s.omega * (1.0 - 2.0 * s.delta * s.delta / PI).sqrt();
                assert!((back - s.sigma).abs() <= 1e-12 * s.sigma);
                assert!((s.alpha - s.delta / (1.0 - s.delta * s.delta).sqrt()).abs() < 1e-15);
                assert!(s.delta.abs() < 1.0);
                let pep = pairwise_pep(&s);
                assert!((0.0..=1.0).contains(&pep));
            }
        }
    }

    #[test]
    fn pairwise_rejects_bad_input() {
        let qam = make_qam(4).unwrap();
        let p = ImpairmentParams::new(1e-3, 0.0, 0.0).unwrap();
        assert!(pairwise_coeffs(&qam, 1, 1, &p).is_err());
        assert!(pairwise_coeffs(&qam, 0, 4, &p).is_err());
        assert!(pairwise_coeffs(&qam, 0, 1, &ImpairmentParams::noiseless()).is_err());
    }

    #[test]
    fn floor_limits() {
        let qam = make_qam(64).unwrap();
        assert_eq!(error_floor(&qam, 0.0, 0.0).unwrap(), 0.0);
        let floor = error_floor(&qam, 1e-3, 1e-4).unwrap();
        assert!(floor > 0.0 && floor < 1.0);
        let near = sep_union(&qam, &ImpairmentParams::new(1e-15, 1e-3, 1e-4).unwrap()).unwrap();
        assert!((near - floor).abs() <= 1e-6 * floor, "{near} vs {floor}");
    }

    #[test]
    fn floor_with_one_noise_free_channel() {
        // σ_φ² = 0, σ_n² = 0: only equal-phase pairs can be confused.
        let qam = make_qam(16).unwrap();
        let floor = error_floor(&qam, 1e-2, 0.0).unwrap();
        assert!(floor > 0.0);
        let terms = symbol_terms(&qam, &ImpairmentParams::new(0.0, 1e-2, 0.0).unwrap()).unwrap();
        let mut manual = 0.0;
        for (i, si) in terms.iter().enumerate() {
            for (j, sj) in terms.iter().enumerate() {
                if i != j && (si.phase - sj.phase).abs() < 1e-12 {
                    let s = pair_stats(si, sj).unwrap();
                    assert_eq!(s.a3, 0.0);
                    manual += pairwise_pep(&s);
                }
            }
        }
        assert!((floor - manual / 16.0).abs() < 1e-15);
    }

    #[test]
    fn sep_union_rotation_invariant() {
        let qam = make_qam(64).unwrap();
        let p = ImpairmentParams::new(1e-3, 1e-3, 1e-4).unwrap();
        let base = sep_union(&qam, &p).unwrap();
        for theta in [0.1, 1.0, -2.5] {
            let rot = sep_union(&qam.rotated(theta), &p).unwrap();
            assert!((rot - base).abs() <= 1e-12 * base.max(1e-300) + 1e-15, "{rot} vs {base}");
        }
    }

    #[test]
    fn sep_union_monotone_in_noise() {
        let qam = make_qam(64).unwrap();
        let mut prev = 0.0;
        for snr in (0..=16).rev().map(|k| 5.0 * k as f64) {
            let p = ImpairmentParams::at_snr_db(snr, 1e-3, 1e-4).unwrap();
            let sep = sep_union(&qam, &p).unwrap();
            assert!(sep + 1e-12 >= prev, "snr {snr}: {sep} < {prev}");
            prev = sep;
        }
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut values = vec![1.0];
        values.extend(std::iter::repeat(1e-16).take(10_000));
        let s = compensated_sum(values);
        assert!((s - (1.0 + 1e-12)).abs() < 1e-16);
    }
}
