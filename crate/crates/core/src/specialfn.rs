//! Scalar special functions: Gaussian Q-function, Owen's T function and the
//! skew-normal distribution used to model pairwise metric differences.

use std::f64::consts::{FRAC_1_SQRT_2, PI, TAU};
use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Largest standardized skewness attainable by a skew-normal law (at |δ| → 1).
pub const SKEWNESS_SUPREMUM: f64 = 0.995_271_746_431_156;

/// Skewness magnitudes above this are clamped before inverting for δ.
pub const SKEWNESS_CLAMP: f64 = 0.995;

/// Upper-tail probability of the standard normal, `Q(x) = P(Z > x)`.
///
/// Evaluated as `erfc(x/√2)/2`. Saturates to exactly 0 or 1 far in the tails.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x * FRAC_1_SQRT_2)
}

/// Standard normal CDF, `Φ(x) = 1 − Q(x)`, computed without cancellation.
pub fn normal_cdf(x: f64) -> f64 {
    q_function(-x)
}

/// Owen's T function
///
/// `T(h, a) = 1/(2π) ∫₀ᵃ exp(−h²(1+x²)/2) / (1+x²) dx`.
///
/// For `|a| ≤ 1` the defining integral is evaluated directly with adaptive
/// Gauss–Legendre quadrature (after pulling the `exp(−h²/2)` factor out, so the
/// tolerance is relative). For `|a| > 1` the reflection
/// `T(h,a) = ½Q(h) + ½Q(ah) − Q(h)Q(ah) − T(ah, 1/a)` (valid for `h ≥ 0`)
/// maps the problem back onto `a < 1`.
pub fn owen_t(h: f64, a: f64) -> f64 {
    if a == 0.0 || h.is_nan() || a.is_nan() {
        return if a == 0.0 { 0.0 } else { f64::NAN };
    }
    if a < 0.0 {
        return -owen_t(h, -a);
    }
    let h = h.abs();
    if h == 0.0 {
        return a.atan() / TAU;
    }
    if a <= 1.0 {
        owen_t_small_a(h, a)
    } else {
        let ah = a * h;
        let qh = q_function(h);
        let qah = q_function(ah);
        0.5 * qh + 0.5 * qah - qh * qah - owen_t_small_a(ah, a.recip())
    }
}

/// `T(h, a)` for `h > 0`, `0 < a ≤ 1`.
fn owen_t_small_a(h: f64, a: f64) -> f64 {
    let h2 = h * h;
    let scale = (-0.5 * h2).exp() / TAU;
    if scale == 0.0 {
        return 0.0;
    }
    let integrand = |x: f64| (-0.5 * h2 * x * x).exp() / (1.0 + x * x);
    scale * adaptive_gauss_legendre(&integrand, 0.0, a, 1e-15)
}

const GL_ORDER: usize = 16;
const MAX_DEPTH: u32 = 40;

/// Nodes and weights of the `GL_ORDER`-point Gauss–Legendre rule on [−1, 1].
fn gauss_legendre_rule() -> &'static [(f64, f64); GL_ORDER] {
    static RULE: OnceLock<[(f64, f64); GL_ORDER]> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = GL_ORDER;
        let mut rule = [(0.0, 0.0); GL_ORDER];
        for i in 0..n.div_ceil(2) {
            // Newton iteration from the Chebyshev-like initial guess.
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            rule[i] = (-x, w);
            rule[n - 1 - i] = (x, w);
        }
        rule
    })
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let n = n as f64;
    let d = n * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

fn gauss_legendre(f: &impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    let half = 0.5 * (hi - lo);
    let mid = 0.5 * (hi + lo);
    let sum: f64 = gauss_legendre_rule()
        .iter()
        .map(|&(x, w)| w * f(mid + half * x))
        .sum();
    half * sum
}

/// Integrates `f` over `[lo, hi]` by recursive bisection until each panel's
/// estimate agrees with the sum of its two halves to `rel_tol` of the running
/// total.
pub(crate) fn adaptive_gauss_legendre(
    f: &impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    rel_tol: f64,
) -> f64 {
    let whole = gauss_legendre(f, lo, hi);
    let scale = whole.abs().max(f64::MIN_POSITIVE);
    refine_panel(f, lo, hi, whole, rel_tol * scale, 0)
}

fn refine_panel(
    f: &impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    whole: f64,
    abs_tol: f64,
    depth: u32,
) -> f64 {
    let mid = 0.5 * (lo + hi);
    let left = gauss_legendre(f, lo, mid);
    let right = gauss_legendre(f, mid, hi);
    let split = left + right;
    // never ask for more than the panel's own rounding error allows
    let tol = abs_tol.max(8.0 * f64::EPSILON * split.abs());
    if depth >= MAX_DEPTH || (split - whole).abs() <= tol {
        return split;
    }
    refine_panel(f, lo, mid, left, 0.5 * abs_tol, depth + 1)
        + refine_panel(f, mid, hi, right, 0.5 * abs_tol, depth + 1)
}

/// Location/scale/shape parameters of a skew-normal law `SN(ξ, ω, α)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkewNormalParams {
    pub location: f64,
    pub scale: f64,
    pub shape: f64,
}

/// First three moments of a distribution; `skewness` is standardized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
}

impl SkewNormalParams {
    pub fn new(location: f64, scale: f64, shape: f64) -> Result<Self> {
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::Domain(format!(
                "skew-normal scale must be positive and finite, got {scale}"
            )));
        }
        if !location.is_finite() || !shape.is_finite() {
            return Err(Error::Domain(
                "skew-normal location and shape must be finite".into(),
            ));
        }
        Ok(Self {
            location,
            scale,
            shape,
        })
    }

    /// Builds the parameters from `δ ∈ (−1, 1)` instead of `α`.
    pub fn from_delta(location: f64, scale: f64, delta: f64) -> Result<Self> {
        if !(delta.abs() < 1.0) {
            return Err(Error::Domain(format!("|δ| must be < 1, got {delta}")));
        }
        Self::new(location, scale, shape_from_delta(delta))
    }

    /// `δ = α / √(1 + α²)`
    pub fn delta(&self) -> f64 {
        self.shape / (1.0 + self.shape * self.shape).sqrt()
    }

    /// `F(x) = 1 − Q(z) − 2T(z, α)` with `z = (x − ξ)/ω`.
    pub fn cdf(&self, x: f64) -> f64 {
        let z = (x - self.location) / self.scale;
        (1.0 - q_function(z) - 2.0 * owen_t(z, self.shape)).clamp(0.0, 1.0)
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let z = (x - self.location) / self.scale;
        let phi = (-0.5 * z * z).exp() / (TAU).sqrt();
        2.0 * phi * normal_cdf(self.shape * z) / self.scale
    }

    pub fn moments(&self) -> Moments {
        let delta = self.delta();
        let b = delta * (2.0 / PI).sqrt();
        let shrink = 1.0 - b * b;
        Moments {
            mean: self.location + self.scale * b,
            variance: self.scale * self.scale * shrink,
            skewness: skewness_from_delta(delta),
        }
    }
}

/// `α = δ / √(1 − δ²)`
pub fn shape_from_delta(delta: f64) -> f64 {
    delta / (1.0 - delta * delta).sqrt()
}

/// Standardized skewness of a skew-normal law as a function of δ.
pub fn skewness_from_delta(delta: f64) -> f64 {
    let b = delta * (2.0 / PI).sqrt();
    0.5 * (4.0 - PI) * b.powi(3) / (1.0 - b * b).powf(1.5)
}

/// Inverts [`skewness_from_delta`] in closed form.
///
/// Skewness magnitudes beyond [`SKEWNESS_CLAMP`] are clamped, since no
/// skew-normal law reaches them.
pub fn delta_from_skewness(gamma1: f64) -> f64 {
    if gamma1 == 0.0 {
        return 0.0;
    }
    let g = gamma1.abs().min(SKEWNESS_CLAMP);
    let u = (2.0 * PI.powf(1.5) * g / (2f64.powf(1.5) * (4.0 - PI))).powf(2.0 / 3.0);
    gamma1.signum() * (u / (1.0 + 2.0 * u / PI)).sqrt()
}
