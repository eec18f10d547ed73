//! Special functions and numerical kernels shared by every other module:
//! Gaussian capacity/dispersion, normal-distribution utilities, nested
//! logarithms/exponentials, a robust real-root quartic solver, and the
//! Berry-Esseen statistics of the information density.
//!
//! All functions here are pure and thread-safe.

use crate::error::{Error, Result};
use statrs::function::erf::{erfc, erfc_inv};

/// `sqrt(2*pi)` to double precision.
pub const SQRT_2PI: f64 = 2.506_628_274_631_000_5;

/// Third absolute moment of a standard normal, `E|Z|^3 = 2*sqrt(2/pi)`.
pub const ABS_MOMENT_3: f64 = 1.595_769_121_605_730_7;

/// Sixth moment of a standard normal, `E[Z^6] = 15`.
pub const MOMENT_6: f64 = 15.0;

/// A validated nonnegative, finite signal-to-noise ratio (noise variance
/// is fixed to 1 throughout the library).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Snr(f64);

impl Snr {
    /// Validates `value >= 0` and finite.
    pub fn new(value: f64) -> Result<Self> {
        if !value.is_finite() || value < 0.0 {
            return Err(Error::Domain(format!(
                "SNR must be finite and nonnegative, got {value}"
            )));
        }
        Ok(Snr(value))
    }

    /// The raw ratio.
    pub fn value(self) -> f64 {
        self.0
    }
}

/// Channel capacity of the unit-noise AWGN channel, `C(x) = ln(1+x)/2`,
/// in nats per channel use.
pub fn gaussian_capacity(snr: Snr) -> f64 {
    0.5 * snr.value().ln_1p()
}

/// Channel dispersion `V(x) = x(x+2) / (2(x+1)^2)` in nats^2 per channel
/// use; increases from 0 toward the limit 1/2.
pub fn gaussian_dispersion(snr: Snr) -> f64 {
    let x = snr.value();
    x * (x + 2.0) / (2.0 * (x + 1.0) * (x + 1.0))
}

/// Standard normal density.
pub fn normal_pdf(u: f64) -> f64 {
    (-0.5 * u * u).exp() / SQRT_2PI
}

/// Standard normal CDF `Phi(u)`, computed through `erfc` so both tails
/// keep full relative accuracy.
pub fn normal_cdf(u: f64) -> f64 {
    0.5 * erfc(-u / std::f64::consts::SQRT_2)
}

/// Complementary standard normal CDF `Q(u) = 1 - Phi(u)`.
pub fn q_function(u: f64) -> f64 {
    0.5 * erfc(u / std::f64::consts::SQRT_2)
}

/// Inverse standard normal CDF.
///
/// An `erfc_inv` seed refined by two Newton steps on [`normal_cdf`];
/// absolute accuracy is better than 1e-12 for `p` in `[1e-10, 1-1e-10]`.
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!(
            "quantile probability must lie in (0,1), got {p}"
        )));
    }
    let mut x = -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p);
    for _ in 0..2 {
        let err = normal_cdf(x) - p;
        let pdf = normal_pdf(x);
        if pdf <= f64::MIN_POSITIVE {
            break;
        }
        x -= err / pdf;
    }
    Ok(x)
}

/// `k`-fold nested logarithm `ln_(k)(x) = ln(ln(...ln(x)))`.
///
/// Fails with the 1-based level whose argument was non-positive instead
/// of returning NaN.
pub fn nested_log(k: u32, x: f64) -> Result<f64> {
    if k == 0 {
        return Err(Error::Parameter("nested_log requires k >= 1".into()));
    }
    let mut v = x;
    for level in 1..=k {
        if !(v > 0.0) {
            return Err(Error::NestedLogDomain { level, levels: k });
        }
        v = v.ln();
    }
    Ok(v)
}

/// `k`-fold nested exponential `exp_(k)(t) = exp(exp(...exp(t)))`.
/// Overflows saturate to `+inf`.
pub fn nested_exp(k: u32, t: f64) -> f64 {
    let mut v = t;
    for _ in 0..k {
        v = v.exp();
    }
    v
}

/// Coefficients of `a0 + a1 z + a2 z^2 + a3 z^3 + a4 z^4 = 0`.
/// `a4` may be zero; degenerate degrees are handled by the solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuarticCoeffs {
    pub a: [f64; 5],
}

impl QuarticCoeffs {
    pub fn new(a0: f64, a1: f64, a2: f64, a3: f64, a4: f64) -> Self {
        QuarticCoeffs {
            a: [a0, a1, a2, a3, a4],
        }
    }

    /// Evaluates the polynomial at `z`.
    pub fn eval(&self, z: f64) -> f64 {
        self.a
            .iter()
            .rev()
            .fold(0.0, |acc, &coeff| acc * z + coeff)
    }

    /// Evaluates the derivative at `z`.
    pub fn eval_deriv(&self, z: f64) -> f64 {
        let mut acc = 0.0;
        for j in (1..5).rev() {
            acc = acc * z + self.a[j] * j as f64;
        }
        acc
    }

    /// Residual scale used for root acceptance:
    /// `max(1, sum_j |a_j| |z|^j)`.
    fn residual_scale(&self, z: f64) -> f64 {
        let mut scale: f64 = 1.0;
        let mut sum = 0.0;
        let mut zp = 1.0;
        for &coeff in &self.a {
            sum += coeff.abs() * zp;
            zp *= z.abs();
        }
        scale = scale.max(sum);
        scale
    }
}

const ROOT_RESIDUAL_TOL: f64 = 1e-9;

/// All real roots of the (possibly degenerate) quartic, ascending, with
/// multiplicity. Closed-form candidates are Newton-polished and
/// residual-filtered; a bracketing sweep recovers any simple root the
/// closed form loses to cancellation.
pub fn solve_quartic_real(c: &QuarticCoeffs) -> Result<Vec<f64>> {
    if c.a.iter().all(|&x| x == 0.0) {
        return Err(Error::Degenerate("all quartic coefficients are zero".into()));
    }
    let deg = (0..5).rev().find(|&j| c.a[j] != 0.0).unwrap();
    if deg == 0 {
        // Nonzero constant: no roots.
        return Ok(Vec::new());
    }

    // Monic coefficients of the true degree.
    let lead = c.a[deg];
    let monic: Vec<f64> = (0..deg).map(|j| c.a[j] / lead).collect();

    let mut candidates: Vec<f64> = match deg {
        1 => vec![-monic[0]],
        2 => quadratic_real(monic[1], monic[0]),
        3 => cubic_real(monic[2], monic[1], monic[0]),
        4 => quartic_real(monic[3], monic[2], monic[1], monic[0]),
        _ => unreachable!(),
    };

    // Polish and residual-filter.
    let mut roots: Vec<f64> = Vec::new();
    for cand in candidates.drain(..) {
        if let Some(r) = polish_root(c, cand) {
            roots.push(r);
        }
    }

    // Bracketing sweep over the Cauchy bound to catch missed sign changes.
    let radius = 1.0
        + monic
            .iter()
            .fold(0.0_f64, |m, &x| m.max(x.abs()));
    if radius.is_finite() {
        sweep_sign_changes(c, radius, &mut roots);
    }

    roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(cluster_roots(roots))
}

/// Largest root strictly inside (0,1); roots within 1e-9 of either
/// endpoint are excluded.
pub fn largest_root_in_unit_interval(roots: &[f64]) -> Option<f64> {
    roots
        .iter()
        .copied()
        .filter(|&r| r > 1e-9 && r < 1.0 - 1e-9)
        .fold(None, |best, r| match best {
            Some(b) if b >= r => Some(b),
            _ => Some(r),
        })
}

fn quadratic_real(b: f64, c: f64) -> Vec<f64> {
    let disc = b * b - 4.0 * c;
    let scale = (b * b).max(4.0 * c.abs()).max(1.0);
    if disc > 0.0 {
        // Numerically stable pairing: avoid subtracting near-equal values.
        let s = disc.sqrt();
        let q = -0.5 * (b + b.signum() * s);
        let r1 = q;
        let r2 = if q != 0.0 { c / q } else { -b - q };
        vec![r1, r2]
    } else if disc >= -1e-12 * scale {
        let r = -0.5 * b;
        vec![r, r]
    } else {
        Vec::new()
    }
}

fn cubic_real(b: f64, c: f64, d: f64) -> Vec<f64> {
    // Depress: x = t - b/3, t^3 + p t + q = 0.
    let shift = b / 3.0;
    let p = c - b * b / 3.0;
    let q = 2.0 * b * b * b / 27.0 - b * c / 3.0 + d;
    let disc = -4.0 * p * p * p - 27.0 * q * q;
    let ts: Vec<f64> = if p == 0.0 && q == 0.0 {
        vec![0.0, 0.0, 0.0]
    } else if disc >= 0.0 && p < 0.0 {
        // Three real roots (trigonometric form).
        let m = 2.0 * (-p / 3.0).sqrt();
        let arg = (3.0 * q / (p * m)).clamp(-1.0, 1.0);
        let theta = arg.acos() / 3.0;
        (0..3)
            .map(|k| m * (theta - 2.0 * std::f64::consts::PI * k as f64 / 3.0).cos())
            .collect()
    } else {
        // One real root (Cardano).
        let s = (q * q / 4.0 + p * p * p / 27.0).max(0.0).sqrt();
        let t = (-q / 2.0 + s).cbrt() + (-q / 2.0 - s).cbrt();
        vec![t]
    };
    ts.into_iter().map(|t| t - shift).collect()
}

fn quartic_real(b: f64, c: f64, d: f64, e: f64) -> Vec<f64> {
    // Depress: y = z + b/4, y^4 + p y^2 + q y + r = 0.
    let shift = b / 4.0;
    let b2 = b * b;
    let p = c - 3.0 * b2 / 8.0;
    let q = d - b * c / 2.0 + b2 * b / 8.0;
    let r = e - b * d / 4.0 + b2 * c / 16.0 - 3.0 * b2 * b2 / 256.0;

    let q_scale = (p.abs() + r.abs() + 1.0).sqrt().powi(3);
    let ys: Vec<f64> = if q.abs() <= 1e-14 * q_scale {
        // Biquadratic: y^2 = u.
        let mut out = Vec::new();
        for u in quadratic_real(p, r) {
            if u > 0.0 {
                out.push(u.sqrt());
                out.push(-u.sqrt());
            } else if u >= -1e-12 * (p.abs() + r.abs().sqrt() + 1.0) {
                // y^2 = 0 is a double root of the quartic.
                out.push(0.0);
                out.push(0.0);
            }
        }
        out
    } else {
        // Resolvent cubic in u = beta^2 for the factorization
        // (y^2 + beta y + gamma)(y^2 - beta y + delta).
        let res = cubic_real(2.0 * p, p * p - 4.0 * r, -q * q);
        let u = res
            .into_iter()
            .filter(|&u| u > 0.0)
            .fold(f64::NAN, f64::max);
        if !u.is_finite() {
            Vec::new()
        } else {
            let beta = u.sqrt();
            let gamma = 0.5 * (p + u - q / beta);
            let delta = 0.5 * (p + u + q / beta);
            let mut out = quadratic_real(beta, gamma);
            out.extend(quadratic_real(-beta, delta));
            out
        }
    };
    ys.into_iter().map(|y| y - shift).collect()
}

fn polish_root(c: &QuarticCoeffs, mut x: f64) -> Option<f64> {
    if !x.is_finite() {
        return None;
    }
    for _ in 0..40 {
        let f = c.eval(x);
        let fp = c.eval_deriv(x);
        if fp == 0.0 {
            break;
        }
        let step = f / fp;
        x -= step;
        if step.abs() <= 1e-16 * (1.0 + x.abs()) {
            break;
        }
    }
    let residual = c.eval(x).abs();
    if residual <= ROOT_RESIDUAL_TOL * c.residual_scale(x) {
        Some(x)
    } else {
        None
    }
}

fn sweep_sign_changes(c: &QuarticCoeffs, radius: f64, roots: &mut Vec<f64>) {
    const CELLS: usize = 512;
    let step = 2.0 * radius / CELLS as f64;
    let mut prev_x = -radius;
    let mut prev_f = c.eval(prev_x);
    for i in 1..=CELLS {
        let x = -radius + step * i as f64;
        let f = c.eval(x);
        if prev_f == 0.0 {
            maybe_push(roots, prev_x);
        } else if prev_f * f < 0.0 {
            // Bisection inside (prev_x, x).
            let (mut lo, mut hi, mut flo) = (prev_x, x, prev_f);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid == lo || mid == hi {
                    break;
                }
                let fm = c.eval(mid);
                if fm == 0.0 {
                    lo = mid;
                    break;
                }
                if flo * fm < 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                    flo = fm;
                }
            }
            if let Some(r) = polish_root(c, 0.5 * (lo + hi)) {
                maybe_push(roots, r);
            }
        }
        prev_x = x;
        prev_f = f;
    }
    if prev_f == 0.0 {
        maybe_push(roots, prev_x);
    }
}

fn maybe_push(roots: &mut Vec<f64>, r: f64) {
    let tol = 1e-7 * (1.0 + r.abs());
    if roots.iter().all(|&existing| (existing - r).abs() > tol) {
        roots.push(r);
    }
}

fn cluster_roots(sorted: Vec<f64>) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::with_capacity(sorted.len());
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i + 1;
        while j < sorted.len()
            && (sorted[j] - sorted[j - 1]).abs() <= 1e-7 * (1.0 + sorted[j].abs())
        {
            j += 1;
        }
        let rep = sorted[i..j].iter().sum::<f64>() / (j - i) as f64;
        for _ in i..j {
            out.push(rep);
        }
        i = j;
    }
    out
}

/// Moments of the per-symbol information-density summand
/// `(-q Z^2 + 2 sqrt(q) Z + q) / (2(1+q))` for a fixed SNR `q`:
/// mean 0, standard deviation `sqrt(V(q))`, and a finite bound on the
/// third absolute moment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BerryEsseenStats {
    /// Mean of the summand; identically zero.
    pub mu: f64,
    /// Standard deviation, `sqrt(V(q))`.
    pub sigma: f64,
    /// Minkowski upper bound on `E|summand|^3`.
    pub t_bound: f64,
}

/// Computes [`BerryEsseenStats`] for `q > 0`.
///
/// The third-moment bound is
/// `((q E[Z^6]^{1/3} + 2 sqrt(q) E|Z|^3^{1/3} + q) / (2(1+q)))^3`
/// with standard-normal moments `E[Z^6] = 15`, `E|Z|^3 = 2 sqrt(2/pi)`.
pub fn berry_esseen_stats(q: Snr) -> Result<BerryEsseenStats> {
    let x = q.value();
    if x <= 0.0 {
        return Err(Error::Domain(format!(
            "Berry-Esseen statistics require q > 0, got {x}"
        )));
    }
    let sigma = gaussian_dispersion(q).sqrt();
    let numer = x * MOMENT_6.cbrt() + 2.0 * x.sqrt() * ABS_MOMENT_3.cbrt() + x;
    let t_bound = (numer / (2.0 * (1.0 + x))).powi(3);
    Ok(BerryEsseenStats {
        mu: 0.0,
        sigma,
        t_bound,
    })
}
