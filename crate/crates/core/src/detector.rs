//! Decision rules.
//!
//! * EUC-D: `|r − s|²`.
//! * GAP-D: polar metric accounting for AWGN and phase noise only.
//! * PAD-D: polar metric with per-symbol amplitude variance
//!   `V^(a) = σ_n²/2 + σ_g²|s|²` and phase variance `V^(θ) = σ_φ² + σ_n²/(2|s|²)`:
//!   `(|r|−|s|)²/V^(a) + Δθ²/V^(θ) + ln(V^(a)V^(θ))`.
//!
//! Phase residuals are always wrapped to `(−π, π]` before squaring.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::channel::ImpairmentParams;
use crate::constellation::Constellation;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DetectorKind {
    EucD,
    GapD,
    PadD,
}

impl DetectorKind {
    pub const ALL: [DetectorKind; 3] = [DetectorKind::EucD, DetectorKind::GapD, DetectorKind::PadD];

    pub fn short_name(self) -> &'static str {
        match self {
            DetectorKind::EucD => "euc",
            DetectorKind::GapD => "gap",
            DetectorKind::PadD => "pad",
        }
    }
}

impl fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DetectorKind::EucD => "EUC-D",
            DetectorKind::GapD => "GAP-D",
            DetectorKind::PadD => "PAD-D",
        })
    }
}

impl FromStr for DetectorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "euc" | "euc-d" | "eucd" => Ok(DetectorKind::EucD),
            "gap" | "gap-d" | "gapd" => Ok(DetectorKind::GapD),
            "pad" | "pad-d" | "padd" => Ok(DetectorKind::PadD),
            _ => Err(Error::InvalidConfig(format!(
                "unknown detector {s:?}; expected euc, gap or pad"
            ))),
        }
    }
}

/// Maps an angle onto `(−π, π]`.
#[inline]
pub fn wrap_phase(x: f64) -> f64 {
    if x > -PI && x <= PI {
        return x;
    }
    let y = x.rem_euclid(TAU);
    if y > PI {
        y - TAU
    } else {
        y
    }
}

/// Amplitude and (wrapped) phase residuals of `r` against a candidate `s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarResiduals {
    pub amp_residual: f64,
    pub phase_residual: f64,
}

impl PolarResiduals {
    pub fn new(r: Complex64, s: Complex64) -> Self {
        Self {
            amp_residual: r.norm() - s.norm(),
            phase_residual: wrap_phase(r.arg() - s.arg()),
        }
    }
}

pub fn metric_euc(r: Complex64, s: Complex64) -> f64 {
    (r - s).norm_sqr()
}

fn check_amplitude(s: Complex64) -> Result<f64> {
    let a = s.norm();
    if a > 0.0 {
        Ok(a)
    } else {
        Err(Error::Domain("candidate symbol has zero amplitude".into()))
    }
}

pub fn metric_gap(r: Complex64, s: Complex64, sigma_n2: f64, sigma_phi2: f64) -> Result<f64> {
    let amp = check_amplitude(s)?;
    if !(sigma_n2 > 0.0) {
        return Err(Error::Domain(
            "GAP-D amplitude term needs sigma_n2 > 0".into(),
        ));
    }
    let res = PolarResiduals::new(r, s);
    let va = 0.5 * sigma_n2;
    let vt = sigma_phi2 + sigma_n2 / (2.0 * amp * amp);
    Ok(res.amp_residual.powi(2) / va + res.phase_residual.powi(2) / vt + vt.ln())
}

pub fn metric_pad(r: Complex64, s: Complex64, p: &ImpairmentParams) -> Result<f64> {
    let amp = check_amplitude(s)?;
    let va = p.amplitude_variance(amp);
    let vt = p.phase_variance(amp);
    if !(va > 0.0 && vt > 0.0) {
        return Err(Error::Domain(format!(
            "PAD-D metric undefined: V(a) = {va}, V(θ) = {vt}"
        )));
    }
    let res = PolarResiduals::new(r, s);
    Ok(res.amp_residual.powi(2) / va + res.phase_residual.powi(2) / vt + (va * vt).ln())
}

/// Per-symbol constants of a polar metric.
#[derive(Debug, Clone, Copy)]
struct PolarTerm {
    amp: f64,
    phase: f64,
    amp_weight: f64,
    phase_weight: f64,
    offset: f64,
}

/// A decision rule bound to a constellation and channel, with every
/// symbol-dependent quantity precomputed.
#[derive(Debug, Clone)]
pub struct Detector {
    kind: DetectorKind,
    points: Vec<Complex64>,
    polar: Vec<PolarTerm>,
}

impl Detector {
    pub fn new(c: &Constellation, kind: DetectorKind, p: &ImpairmentParams) -> Result<Self> {
        let points = c.points().to_vec();
        let polar = match kind {
            DetectorKind::EucD => Vec::new(),
            DetectorKind::GapD => {
                if !(p.sigma_n2 > 0.0) {
                    return Err(Error::Domain(
                        "GAP-D amplitude term needs sigma_n2 > 0".into(),
                    ));
                }
                // GAP-D is PAD-D with σ_g² = 0 and the ln V^(a) term dropped.
                let va = 0.5 * p.sigma_n2;
                points
                    .iter()
                    .map(|s| {
                        let amp = s.norm();
                        let vt = p.sigma_phi2 + p.sigma_n2 / (2.0 * amp * amp);
                        PolarTerm {
                            amp,
                            phase: s.arg(),
                            amp_weight: va.recip(),
                            phase_weight: vt.recip(),
                            offset: vt.ln(),
                        }
                    })
                    .collect()
            }
            DetectorKind::PadD => points
                .iter()
                .map(|s| {
                    let amp = s.norm();
                    let va = p.amplitude_variance(amp);
                    let vt = p.phase_variance(amp);
                    if !(va > 0.0 && vt > 0.0) {
                        return Err(Error::Domain(format!(
                            "PAD-D metric undefined: V(a) = {va}, V(θ) = {vt}"
                        )));
                    }
                    Ok(PolarTerm {
                        amp,
                        phase: s.arg(),
                        amp_weight: va.recip(),
                        phase_weight: vt.recip(),
                        offset: (va * vt).ln(),
                    })
                })
                .collect::<Result<_>>()?,
        };
        Ok(Self {
            kind,
            points,
            polar,
        })
    }

    pub fn kind(&self) -> DetectorKind {
        self.kind
    }

    /// Index of the metric-minimising symbol; ties go to the lowest index.
    #[inline]
    pub fn decide(&self, r: Complex64) -> usize {
        match self.kind {
            DetectorKind::EucD => {
                let mut best = 0;
                let mut best_metric = f64::INFINITY;
                for (m, s) in self.points.iter().enumerate() {
                    let (dx, dy) = (r.re - s.re, r.im - s.im);
                    let metric = dx * dx + dy * dy;
                    if metric < best_metric {
                        best_metric = metric;
                        best = m;
                    }
                }
                best
            }
            DetectorKind::GapD | DetectorKind::PadD => {
                let amp_r = (r.re * r.re + r.im * r.im).sqrt();
                let phase_r = r.im.atan2(r.re);
                let mut best = 0;
                let mut best_metric = f64::INFINITY;
                for (m, t) in self.polar.iter().enumerate() {
                    let da = amp_r - t.amp;
                    let mut dp = phase_r - t.phase;
                    // both angles lie in (−π, π], so one correction suffices
                    if dp > PI {
                        dp -= TAU;
                    } else if dp <= -PI {
                        dp += TAU;
                    }
                    let metric = da * da * t.amp_weight + dp * dp * t.phase_weight + t.offset;
                    if metric < best_metric {
                        best_metric = metric;
                        best = m;
                    }
                }
                best
            }
        }
    }

    /// Metric value of every symbol for received sample `r`.
    pub fn metrics(&self, r: Complex64) -> Vec<f64> {
        match self.kind {
            DetectorKind::EucD => self.points.iter().map(|&s| metric_euc(r, s)).collect(),
            _ => {
                let amp_r = r.norm();
                let phase_r = r.arg();
                self.polar
                    .iter()
                    .map(|t| {
                        let da = amp_r - t.amp;
                        let dp = wrap_phase(phase_r - t.phase);
                        da * da * t.amp_weight + dp * dp * t.phase_weight + t.offset
                    })
                    .collect()
            }
        }
    }
}

/// Detects a single received sample. Builds a [`Detector`] each call; reuse a
/// `Detector` when classifying many samples.
pub fn detect(
    r: Complex64,
    c: &Constellation,
    kind: DetectorKind,
    p: &ImpairmentParams,
) -> Result<usize> {
    Ok(Detector::new(c, kind, p)?.decide(r))
}
