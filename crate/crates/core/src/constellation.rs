//! Constellation construction, normalisation and plain-text I/O.

use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// No symbol may sit closer than this to the origin (its phase would be
/// undefined and the PAD-D phase variance diverges).
pub const MIN_AMPLITUDE: f64 = 1e-3;

/// Minimum distance between two symbols for them to count as distinct.
pub const MIN_SEPARATION: f64 = 1e-9;

pub const QAM_ORDERS: [usize; 7] = [4, 16, 32, 64, 128, 256, 1024];

/// An ordered set of complex symbols.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    points: Vec<Complex64>,
    label: String,
}

impl Constellation {
    /// Validates and wraps a point list. Energy is not normalised here; see
    /// [`normalize`].
    pub fn new(points: Vec<Complex64>, label: impl Into<String>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidConstellation(format!(
                "need at least 2 points, got {}",
                points.len()
            )));
        }
        if let Some(k) = points.iter().position(|p| !p.re.is_finite() || !p.im.is_finite()) {
            return Err(Error::InvalidConstellation(format!(
                "point {k} is not finite"
            )));
        }
        if let Some(k) = points.iter().position(|p| p.norm() < MIN_AMPLITUDE) {
            return Err(Error::InvalidConstellation(format!(
                "point {k} has amplitude {:.3e} below the floor {MIN_AMPLITUDE:e}",
                points[k].norm()
            )));
        }
        for i in 0..points.len() {
            for j in i + 1..points.len() {
                if (points[i] - points[j]).norm() <= MIN_SEPARATION {
                    return Err(Error::InvalidConstellation(format!(
                        "points {i} and {j} coincide"
                    )));
                }
            }
        }
        Ok(Self {
            points,
            label: label.into(),
        })
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn order(&self) -> usize {
        self.points.len()
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Average symbol energy `(1/M) Σ|s|²`.
    pub fn energy(&self) -> f64 {
        self.points.iter().map(|p| p.norm_sqr()).sum::<f64>() / self.order() as f64
    }

    pub fn centroid(&self) -> Complex64 {
        self.points.iter().sum::<Complex64>() / self.order() as f64
    }

    pub fn min_amplitude(&self) -> f64 {
        self.points.iter().map(|p| p.norm()).fold(f64::INFINITY, f64::min)
    }

    /// Multiplies every point by `e^{jθ}`.
    pub fn rotated(&self, theta: f64) -> Self {
        let rot = Complex64::from_polar(1.0, theta);
        Self {
            points: self.points.iter().map(|p| p * rot).collect(),
            label: self.label.clone(),
        }
    }
}

/// Square QAM for even powers of two, cross QAM for 32 and 128.
pub fn make_qam(order: usize) -> Result<Constellation> {
    if !QAM_ORDERS.contains(&order) {
        return Err(Error::UnsupportedOrder(order));
    }
    let bits = order.trailing_zeros();
    let (side, corner) = if bits % 2 == 0 {
        (1usize << (bits / 2), 0)
    } else {
        // Cross QAM: a 6·2^k square with a (side/6)×(side/6) block cut from each corner.
        let side = 3usize << ((bits - 3) / 2);
        (side, side / 6)
    };
    let coord = |k: usize| (2 * k) as f64 - (side - 1) as f64;
    let in_corner = |k: usize| k < corner || k >= side - corner;
    let mut points = Vec::with_capacity(order);
    for iq in 0..side {
        for ii in 0..side {
            if in_corner(ii) && in_corner(iq) {
                continue;
            }
            points.push(Complex64::new(coord(ii), coord(iq)));
        }
    }
    debug_assert_eq!(points.len(), order);
    let scale = energy(&points).sqrt().recip();
    for p in &mut points {
        *p *= scale;
    }
    Constellation::new(points, format!("qam{order}"))
}

/// One-parameter amplitude/phase-shift keying family with `levels` rings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SapskSpec {
    pub order: usize,
    pub levels: usize,
    /// Ring `k` (1-based) has radius `r₁·(1 + (k−1)·spacing)`.
    pub spacing: f64,
}

impl SapskSpec {
    pub fn new(order: usize, levels: usize, spacing: f64) -> Result<Self> {
        let spec = Self {
            order,
            levels,
            spacing,
        };
        spec.ring_populations()?;
        Ok(spec)
    }

    /// Symbols per ring, proportional to the ring index and rounded by the
    /// largest-remainder rule (ties go to the inner ring).
    pub fn ring_populations(&self) -> Result<Vec<usize>> {
        let (m, levels) = (self.order, self.levels);
        if levels == 0 || levels > m {
            return Err(Error::InvalidSapsk(format!(
                "need 1 ≤ levels ≤ order, got levels={levels}, order={m}"
            )));
        }
        if !(self.spacing > 0.0) || !self.spacing.is_finite() {
            return Err(Error::InvalidSapsk(format!(
                "spacing must be positive, got {}",
                self.spacing
            )));
        }
        let total_weight = (levels * (levels + 1) / 2) as f64;
        let ideal: Vec<f64> = (1..=levels)
            .map(|k| m as f64 * k as f64 / total_weight)
            .collect();
        let mut counts: Vec<usize> = ideal.iter().map(|x| x.floor() as usize).collect();
        let mut leftover = m - counts.iter().sum::<usize>();
        let mut order_by_rem: Vec<usize> = (0..levels).collect();
        order_by_rem.sort_by(|&a, &b| {
            let ra = ideal[a] - ideal[a].floor();
            let rb = ideal[b] - ideal[b].floor();
            rb.total_cmp(&ra).then(a.cmp(&b))
        });
        for &k in order_by_rem.iter().cycle() {
            if leftover == 0 {
                break;
            }
            counts[k] += 1;
            leftover -= 1;
        }
        if levels > 1 {
            if let Some(k) = counts.iter().position(|&n| n < 2) {
                return Err(Error::InvalidSapsk(format!(
                    "ring {} would hold {} symbol(s); {levels} levels are too many for order {m}",
                    k + 1,
                    counts[k]
                )));
            }
        }
        Ok(counts)
    }

    /// Radii of all rings for unit average energy.
    pub fn radii(&self) -> Result<Vec<f64>> {
        let counts = self.ring_populations()?;
        let rel: Vec<f64> = (0..self.levels)
            .map(|k| 1.0 + k as f64 * self.spacing)
            .collect();
        let weighted: f64 = counts.iter().zip(&rel).map(|(&n, r)| n as f64 * r * r).sum();
        let r1 = (self.order as f64 / weighted).sqrt();
        Ok(rel.into_iter().map(|r| r * r1).collect())
    }
}

pub fn make_sapsk(spec: SapskSpec) -> Result<Constellation> {
    let counts = spec.ring_populations()?;
    let radii = spec.radii()?;
    let mut points = Vec::with_capacity(spec.order);
    let mut offset = 0.0;
    for (k, (&n, &r)) in counts.iter().zip(&radii).enumerate() {
        let step = TAU / n as f64;
        if k > 0 {
            offset += 0.5 * step;
        }
        points.extend((0..n).map(|l| Complex64::from_polar(r, offset + l as f64 * step)));
    }
    Constellation::new(
        points,
        format!("sapsk{}-{}-{}", spec.order, spec.levels, spec.spacing),
    )
}

fn energy(points: &[Complex64]) -> f64 {
    points.iter().map(|p| p.norm_sqr()).sum::<f64>() / points.len() as f64
}

/// Subtracts the centroid and rescales to unit average energy.
pub(crate) fn center_and_scale(points: &[Complex64]) -> Result<Vec<Complex64>> {
    if points.len() < 2 {
        return Err(Error::Degenerate("need at least 2 points"));
    }
    let mean = points.iter().sum::<Complex64>() / points.len() as f64;
    let mut out: Vec<Complex64> = points.iter().map(|p| p - mean).collect();
    let e = energy(&out);
    if !(e > 0.0) || !e.is_finite() {
        return Err(Error::Degenerate("all points are identical"));
    }
    let scale = e.sqrt().recip();
    for p in &mut out {
        *p *= scale;
    }
    Ok(out)
}

/// Zero-centroid, unit-energy version of an arbitrary point set.
pub fn normalize(points: &[Complex64]) -> Result<Constellation> {
    Constellation::new(center_and_scale(points)?, "normalized")
}

/// Renders the two-column text format, preceded by optional `#` header lines.
pub fn format_constellation(c: &Constellation, header: &[String]) -> String {
    let mut out = String::new();
    for line in header {
        let _ = writeln!(out, "# {line}");
    }
    for p in c.points() {
        // Display for f64 prints the shortest string that round-trips exactly.
        let _ = writeln!(out, "{} {}", p.re, p.im);
    }
    out
}

pub fn parse_constellation(text: &str, path: &Path) -> Result<Constellation> {
    let mut points = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: idx + 1,
            message,
        };
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() != 2 {
            return Err(parse_err(format!(
                "expected 2 columns (I Q), found {}",
                cols.len()
            )));
        }
        let num = |s: &str| {
            s.parse::<f64>()
                .map_err(|e| parse_err(format!("bad number {s:?}: {e}")))
        };
        points.push(Complex64::new(num(cols[0])?, num(cols[1])?));
    }
    let label = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Constellation::new(points, label)
}

pub fn load_constellation(path: impl AsRef<Path>) -> Result<Constellation> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_constellation(&text, path)
}

pub fn save_constellation(c: &Constellation, path: impl AsRef<Path>) -> Result<()> {
    save_constellation_with_header(c, path, &[])
}

pub fn save_constellation_with_header(
    c: &Constellation,
    path: impl AsRef<Path>,
    header: &[String],
) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_constellation(c, header)).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Distinct ring radii (grouped to a relative tolerance), ascending.
pub fn distinct_radii(c: &Constellation, rel_tol: f64) -> Vec<f64> {
    let mut r: Vec<f64> = c.points().iter().map(|p| p.norm()).collect();
    r.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = Vec::new();
    for x in r {
        match out.last() {
            Some(&last) if (x - last).abs() <= rel_tol * last => {}
            _ => out.push(x),
        }
    }
    out
}
