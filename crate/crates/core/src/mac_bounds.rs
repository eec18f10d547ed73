//! Two-user rate-region computation and the converse machinery:
//! single-letterization of per-symbol input statistics, atypical-event
//! bounds, the quadratic-functional moments they rely on, and the
//! information-spectrum upper bounds that close the region converse.

use crate::channel::{McEstimate, Transcript};
use crate::error::{Error, Result};
use crate::mac_codes::{solve_rho_star, RhoHorizon};
use crate::numerics::{gaussian_capacity, Snr};
use serde::Serialize;

/// Slack added to exact-arithmetic inequality checks.
const CHECK_TOL: f64 = 1e-9;

// ---------------------------------------------------------------------------
// Per-symbol statistics
// ---------------------------------------------------------------------------

/// Per-time second moments and input correlations of a two-user code,
/// `k = 1..n`: `P_{jk} = E[X_{jk}^2]`,
/// `rho_k = E[X_{1k} X_{2k}] / sqrt(P_{1k} P_{2k})`.
#[derive(Debug, Clone, Serialize)]
pub struct PerSymbolStats {
    pub p1: Vec<f64>,
    pub p2: Vec<f64>,
    pub rho: Vec<f64>,
    /// 95% half-widths when the stats are Monte-Carlo estimates
    /// (zero for exact stats).
    pub p1_ci: Vec<f64>,
    pub p2_ci: Vec<f64>,
    pub rho_ci: Vec<f64>,
    /// Entries where a second moment vanishes; `rho_k` is reported as 0
    /// there and excluded from correlation claims.
    pub degenerate: Vec<bool>,
    /// Number of trials behind the estimate (0 for exact stats).
    pub trials: u64,
    pub seed: u64,
}

impl PerSymbolStats {
    /// Empty container for `n` incremental [`PerSymbolStats::push`] rows.
    pub fn with_capacity(n: usize, trials: u64, seed: u64) -> Self {
        PerSymbolStats {
            p1: Vec::with_capacity(n),
            p2: Vec::with_capacity(n),
            rho: Vec::with_capacity(n),
            p1_ci: Vec::with_capacity(n),
            p2_ci: Vec::with_capacity(n),
            rho_ci: Vec::with_capacity(n),
            degenerate: Vec::with_capacity(n),
            trials,
            seed,
        }
    }

    /// Appends the row for the next time index.
    #[allow(clippy::too_many_arguments)]
    pub fn push(
        &mut self,
        p1: f64,
        p2: f64,
        rho: f64,
        p1_ci: f64,
        p2_ci: f64,
        rho_ci: f64,
        degenerate: bool,
    ) {
        self.p1.push(p1);
        self.p2.push(p2);
        self.rho.push(rho);
        self.p1_ci.push(p1_ci);
        self.p2_ci.push(p2_ci);
        self.rho_ci.push(rho_ci);
        self.degenerate.push(degenerate);
    }

    /// Exact (analytically known) statistics with zero uncertainty.
    pub fn exact(p1: Vec<f64>, p2: Vec<f64>, rho: Vec<f64>) -> Result<Self> {
        if p1.len() != p2.len() || p1.len() != rho.len() {
            return Err(Error::Shape(
                "per-symbol stat arrays must share one length".into(),
            ));
        }
        let n = p1.len();
        let mut stats = PerSymbolStats::with_capacity(n, 0, 0);
        for k in 0..n {
            if p1[k] < 0.0 || p2[k] < 0.0 || rho[k].abs() > 1.0 + CHECK_TOL {
                return Err(Error::Parameter(format!(
                    "invalid per-symbol stats at k = {k}"
                )));
            }
            let degenerate = p1[k] == 0.0 || p2[k] == 0.0;
            stats.push(
                p1[k],
                p2[k],
                if degenerate { 0.0 } else { rho[k] },
                0.0,
                0.0,
                0.0,
                degenerate,
            );
        }
        Ok(stats)
    }

    pub fn len(&self) -> usize {
        self.p1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p1.is_empty()
    }
}

// ---------------------------------------------------------------------------
// Single-letterization (aggregate correlation and its inequalities)
// ---------------------------------------------------------------------------

/// Aggregate correlation plus the verification bits of the four
/// inequalities it satisfies under the power constraints.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RhoSummary {
    /// `rho = sum_k rho_k sqrt(P_{1k} P_{2k}) / (n sqrt(P1 P2))`.
    pub rho: f64,
    /// `|rho| <= 1`.
    pub abs_le_one: bool,
    /// `sum_k P_{1k}(1 - rho_k^2) <= n P1 (1 - rho^2)`.
    pub user1_residual_ok: bool,
    /// Same for user 2.
    pub user2_residual_ok: bool,
    /// `sum_k (P_{1k} + P_{2k} + 2 rho_k sqrt(P_{1k}P_{2k}))
    ///  <= n (P1 + P2 + 2 rho sqrt(P1 P2))`.
    pub sum_ok: bool,
    /// Whether each user's average-power premise `sum_k P_{jk} <= n P_j`
    /// held; the inequalities above are only guaranteed under both.
    pub premise_user1: bool,
    pub premise_user2: bool,
}

impl RhoSummary {
    pub fn all_checks(&self) -> bool {
        self.abs_le_one && self.user1_residual_ok && self.user2_residual_ok && self.sum_ok
    }
}

/// Reduces per-symbol statistics to the aggregate correlation and checks
/// its four inequalities.
pub fn single_letter_rho(stats: &PerSymbolStats, p1: f64, p2: f64) -> Result<RhoSummary> {
    if stats.is_empty() {
        return Err(Error::Arity {
            expected: 1,
            actual: 0,
        });
    }
    if !(p1 > 0.0 && p2 > 0.0) {
        return Err(Error::Parameter("powers must be positive".into()));
    }
    let n = stats.len() as f64;
    let mut cross = 0.0;
    let mut res1 = 0.0;
    let mut res2 = 0.0;
    let mut sum_all = 0.0;
    let mut tot1 = 0.0;
    let mut tot2 = 0.0;
    for k in 0..stats.len() {
        let (a, b, r) = (stats.p1[k], stats.p2[k], stats.rho[k]);
        let g = (a * b).sqrt();
        cross += r * g;
        res1 += a * (1.0 - r * r);
        res2 += b * (1.0 - r * r);
        sum_all += a + b + 2.0 * r * g;
        tot1 += a;
        tot2 += b;
    }
    let rho = cross / (n * (p1 * p2).sqrt());
    let scale = 1.0 + n * (p1 + p2);
    Ok(RhoSummary {
        rho,
        abs_le_one: rho.abs() <= 1.0 + CHECK_TOL,
        user1_residual_ok: res1 <= n * p1 * (1.0 - rho * rho) + CHECK_TOL * scale,
        user2_residual_ok: res2 <= n * p2 * (1.0 - rho * rho) + CHECK_TOL * scale,
        sum_ok: sum_all
            <= n * (p1 + p2 + 2.0 * rho * (p1 * p2).sqrt()) + CHECK_TOL * scale,
        premise_user1: tot1 <= n * p1 + CHECK_TOL * scale,
        premise_user2: tot2 <= n * p2 + CHECK_TOL * scale,
    })
}

// ---------------------------------------------------------------------------
// Atypical events and the quadratic functionals behind them
// ---------------------------------------------------------------------------

/// The three per-transcript quadratic sums whose atypically large values
/// the converse truncates away:
/// `s1 = sum_k (X_{1k} - X_{2k} rho_k sqrt(P_{1k}/P_{2k}))^2`,
/// `s2` symmetrically, `s3 = sum_k (X_{1k} + X_{2k})^2`.
fn quadratic_sums(tr: &Transcript, stats: &PerSymbolStats) -> Result<[f64; 3]> {
    if tr.x.len() != 2 {
        return Err(Error::Arity {
            expected: 2,
            actual: tr.x.len(),
        });
    }
    if tr.x[0].len() != stats.len() {
        return Err(Error::Shape(format!(
            "transcript length {} != stats length {}",
            tr.x[0].len(),
            stats.len()
        )));
    }
    let mut s = [0.0; 3];
    for k in 0..stats.len() {
        let (x1, x2) = (tr.x[0][k], tr.x[1][k]);
        // Regression coefficients; a vanishing second moment means the
        // partner symbol is a.s. zero, so the coefficient is immaterial.
        let (c1, c2) = if stats.degenerate[k] {
            (0.0, 0.0)
        } else {
            let ratio = (stats.p1[k] / stats.p2[k]).sqrt();
            (stats.rho[k] * ratio, stats.rho[k] / ratio)
        };
        let d1 = x1 - x2 * c1;
        let d2 = x2 - x1 * c2;
        let d3 = x1 + x2;
        s[0] += d1 * d1;
        s[1] += d2 * d2;
        s[2] += d3 * d3;
    }
    Ok(s)
}

/// Thresholds of the three atypical events at truncation level `T`:
/// `n P1 T (1 - rho^2)`, `n P2 T (1 - rho^2)`,
/// `n T (P1 + P2 + 2 rho sqrt(P1 P2))`.
pub fn atypical_thresholds(n: usize, t: f64, rho: f64, p1: f64, p2: f64) -> [f64; 3] {
    let nf = n as f64;
    let om = 1.0 - rho * rho;
    [
        nf * p1 * t * om,
        nf * p2 * t * om,
        nf * t * (p1 + p2 + 2.0 * rho * (p1 * p2).sqrt()),
    ]
}

/// Empirical frequencies of the *complements* of the three atypical
/// events (each bounded by `1/T` for codes meeting the power budgets).
pub fn atypical_event_rate(
    transcripts: &[Transcript],
    t: f64,
    stats: &PerSymbolStats,
    p1: f64,
    p2: f64,
    seed: u64,
) -> Result<[McEstimate; 3]> {
    if transcripts.is_empty() {
        return Err(Error::Parameter("need at least one transcript".into()));
    }
    if !(t > 0.0) {
        return Err(Error::Parameter(format!("T must be positive, got {t}")));
    }
    let summary = single_letter_rho(stats, p1, p2)?;
    let thresholds = atypical_thresholds(stats.len(), t, summary.rho, p1, p2);
    let mut hits = [0u64; 3];
    for tr in transcripts {
        let sums = quadratic_sums(tr, stats)?;
        for j in 0..3 {
            if sums[j] >= thresholds[j] {
                hits[j] += 1;
            }
        }
    }
    let trials = transcripts.len() as u64;
    Ok([
        McEstimate::from_counts(hits[0], trials, seed),
        McEstimate::from_counts(hits[1], trials, seed),
        McEstimate::from_counts(hits[2], trials, seed),
    ])
}

/// Mean and second moment of one of the centered quadratic functionals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VMoments {
    pub mean: f64,
    pub second: f64,
}

/// Closed-form moments of the three centered functionals
/// `V_{1n} = -P1 T (1-rho^2) sum Z_k^2 + 2 sum Z_k (X_{1k} - rho_k X_{2k}
/// sqrt(P_{1k}/P_{2k})) + n P1 T (1-rho^2)` (and its two siblings):
/// all means vanish;
/// `E[V_{1n}^2] = 2 n P1^2 T^2 (1-rho^2)^2 + 4 sum_k P_{1k}(1-rho_k^2)`,
/// `E[V_{3n}^2] = 4 sum_k (P_{1k}+P_{2k}+2 rho_k sqrt(P_{1k}P_{2k}))
///  + 2 n (T(P1+P2+2 rho sqrt(P1 P2)))^2`.
pub fn v_moments(stats: &PerSymbolStats, t: f64, rho: f64, p1: f64, p2: f64) -> [VMoments; 3] {
    let n = stats.len() as f64;
    let om = 1.0 - rho * rho;
    let mut res1 = 0.0;
    let mut res2 = 0.0;
    let mut sum_all = 0.0;
    for k in 0..stats.len() {
        let (a, b, r) = (stats.p1[k], stats.p2[k], stats.rho[k]);
        res1 += a * (1.0 - r * r);
        res2 += b * (1.0 - r * r);
        sum_all += a + b + 2.0 * r * (a * b).sqrt();
    }
    let sum_t = t * (p1 + p2 + 2.0 * rho * (p1 * p2).sqrt());
    [
        VMoments {
            mean: 0.0,
            second: 2.0 * n * (p1 * t * om).powi(2) + 4.0 * res1,
        },
        VMoments {
            mean: 0.0,
            second: 2.0 * n * (p2 * t * om).powi(2) + 4.0 * res2,
        },
        VMoments {
            mean: 0.0,
            second: 4.0 * sum_all + 2.0 * n * sum_t * sum_t,
        },
    ]
}

/// Realized values of the three centered functionals on one transcript
/// (for Monte-Carlo verification of [`v_moments`]).
pub fn v_samples(
    tr: &Transcript,
    stats: &PerSymbolStats,
    t: f64,
    rho: f64,
    p1: f64,
    p2: f64,
) -> Result<[f64; 3]> {
    if tr.z.len() != stats.len() {
        return Err(Error::Shape(format!(
            "transcript length {} != stats length {}",
            tr.z.len(),
            stats.len()
        )));
    }
    let n = stats.len() as f64;
    let om = 1.0 - rho * rho;
    let z_sq: f64 = tr.z.iter().map(|z| z * z).sum();
    let mut lin = [0.0f64; 3];
    for k in 0..stats.len() {
        let (x1, x2, z) = (tr.x[0][k], tr.x[1][k], tr.z[k]);
        let (c1, c2) = if stats.degenerate[k] {
            (0.0, 0.0)
        } else {
            let ratio = (stats.p1[k] / stats.p2[k]).sqrt();
            (stats.rho[k] * ratio, stats.rho[k] / ratio)
        };
        lin[0] += z * (x1 - c1 * x2);
        lin[1] += z * (x2 - c2 * x1);
        lin[2] += z * (x1 + x2);
    }
    let sum_t = t * (p1 + p2 + 2.0 * rho * (p1 * p2).sqrt());
    Ok([
        -p1 * t * om * z_sq + 2.0 * lin[0] + n * p1 * t * om,
        -p2 * t * om * z_sq + 2.0 * lin[1] + n * p2 * t * om,
        2.0 * lin[2] - sum_t * z_sq + n * sum_t,
    ])
}

// ---------------------------------------------------------------------------
// Information-spectrum converse bounds
// ---------------------------------------------------------------------------

/// Truncation level and penalty constants of the finite-n converse.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ConverseParams {
    pub t: f64,
    pub c1: f64,
    pub c2: f64,
    pub c12: f64,
    pub rho: f64,
}

/// Default penalty constants: the explicit Chebyshev fractions of the
/// probability bounds, evaluated with `T = 1/(1 - eps)` (their value at
/// the asymptotic truncation level; this breaks the circular dependence
/// between the constants and the `T` they define).
pub fn default_constants(p1: f64, p2: f64, eps: f64, rho: f64) -> Result<(f64, f64, f64)> {
    if !(p1 > 0.0 && p2 > 0.0) || !(0.0..1.0).contains(&eps) || rho.abs() > 1.0 {
        return Err(Error::Parameter(
            "constants need positive powers, eps in [0,1), |rho| <= 1".into(),
        ));
    }
    let t = 1.0 / (1.0 - eps);
    let om = 1.0 - rho * rho;
    let single = |p: f64| {
        (2.0 * p * p * t * t * om * om + 4.0 * p * om)
            / (4.0 * (1.0 + p * t * om) * (1.0 + p * t * om))
    };
    let sum = p1 + p2 + 2.0 * rho * (p1 * p2).sqrt();
    let c12 = (4.0 * sum + 2.0 * t * t * sum * sum) / ((1.0 + t * sum) * (1.0 + t * sum));
    Ok((single(p1), single(p2), c12))
}

/// The truncation level `T = 1/(1 - eps - (c_max + 1) n^{-1/3})`, valid
/// only while it stays within `[1/(1-eps), 2/(1-eps)]`.
pub fn truncation_level(n: u64, eps: f64, c_max: f64) -> Option<f64> {
    let denom = 1.0 - eps - (c_max + 1.0) / (n as f64).cbrt();
    if denom <= 0.0 {
        return None;
    }
    let t = 1.0 / denom;
    if t > 2.0 / (1.0 - eps) {
        None
    } else {
        Some(t)
    }
}

/// Finite-n converse on the two log message counts and their sum.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MacConverseBound {
    pub ln_m1: f64,
    pub ln_m2: f64,
    pub ln_m12: f64,
    pub params: ConverseParams,
}

/// Evaluates the three information-spectrum upper bounds at aggregate
/// correlation `rho`:
/// `ln M_jn <= (n/2) ln[1 + P_j T (1-rho^2)] + n^{2/3}
///            - ln(1 - eps - 1/T - c_j n^{-1/3})`
/// and the analogous sum bound. Returns `None` when the blocklength is
/// too small for a valid `T` or a log argument is non-positive (the
/// bound is vacuous there).
pub fn info_spectrum_upper_bounds(
    n: u64,
    p1: f64,
    p2: f64,
    eps: f64,
    rho: f64,
    constants: Option<(f64, f64, f64)>,
) -> Result<Option<MacConverseBound>> {
    if n == 0 {
        return Err(Error::Parameter("blocklength must be >= 1".into()));
    }
    let (c1, c2, c12) = match constants {
        Some(c) => c,
        None => default_constants(p1, p2, eps, rho)?,
    };
    let c_max = c1.max(c2).max(c12);
    let t = match truncation_level(n, eps, c_max) {
        Some(t) => t,
        None => return Ok(None),
    };
    let nf = n as f64;
    let n23 = nf.powf(2.0 / 3.0);
    let n13 = nf.cbrt();
    let om = 1.0 - rho * rho;
    let budget = |c: f64| 1.0 - eps - 1.0 / t - c / n13;
    let (b1, b2, b12) = (budget(c1), budget(c2), budget(c12));
    if b1 <= 0.0 || b2 <= 0.0 || b12 <= 0.0 {
        return Ok(None);
    }
    let sum_t = t * (p1 + p2 + 2.0 * rho * (p1 * p2).sqrt());
    Ok(Some(MacConverseBound {
        ln_m1: 0.5 * nf * (1.0 + p1 * t * om).ln() + n23 - b1.ln(),
        ln_m2: 0.5 * nf * (1.0 + p2 * t * om).ln() + n23 - b2.ln(),
        ln_m12: 0.5 * nf * (1.0 + sum_t).ln() + n23 - b12.ln(),
        params: ConverseParams {
            t,
            c1,
            c2,
            c12,
            rho,
        },
    }))
}

// ---------------------------------------------------------------------------
// Rate region
// ---------------------------------------------------------------------------

/// The pentagon of rate pairs achievable at one input correlation:
/// `R1 <= C(P1(1-rho^2)/(1-eps))`, `R2 <= C(P2(1-rho^2)/(1-eps))`,
/// `R1 + R2 <= C((P1 + P2 + 2 rho sqrt(P1 P2))/(1-eps))`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Pentagon {
    pub rho: f64,
    pub r1_max: f64,
    pub r2_max: f64,
    pub sum_max: f64,
}

impl Pentagon {
    pub fn new(rho: f64, p1: f64, p2: f64, eps: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&rho) {
            return Err(Error::Parameter(format!("rho must be in [0,1], got {rho}")));
        }
        if !(0.0..1.0).contains(&eps) {
            return Err(Error::Parameter(format!("eps must be in [0,1), got {eps}")));
        }
        let slack = 1.0 - eps;
        let om = 1.0 - rho * rho;
        Ok(Pentagon {
            rho,
            r1_max: gaussian_capacity(Snr::new(p1 * om / slack)?),
            r2_max: gaussian_capacity(Snr::new(p2 * om / slack)?),
            sum_max: gaussian_capacity(Snr::new(
                (p1 + p2 + 2.0 * rho * (p1 * p2).sqrt()) / slack,
            )?),
        })
    }

    /// Component-wise domination test with an absolute tolerance.
    pub fn contains(&self, r1: f64, r2: f64, tol: f64) -> bool {
        r1 <= self.r1_max + tol && r2 <= self.r2_max + tol && r1 + r2 <= self.sum_max + tol
    }

    /// Largest `t >= 0` with `(t u, t v)` inside the pentagon, for a
    /// direction `(u, v)` with `u, v >= 0`, `(u, v) != 0`.
    fn max_radius(&self, u: f64, v: f64) -> f64 {
        let mut t = f64::INFINITY;
        if u > 0.0 {
            t = t.min(self.r1_max / u);
        }
        if v > 0.0 {
            t = t.min(self.r2_max / v);
        }
        if u + v > 0.0 {
            t = t.min(self.sum_max / (u + v));
        }
        t.max(0.0)
    }
}

/// Union of pentagons over a correlation grid.
#[derive(Debug, Clone, Serialize)]
pub struct RateRegion {
    pub rho_grid: Vec<f64>,
    pub pentagons: Vec<Pentagon>,
    /// Upper-right Pareto frontier of the pentagon corner points,
    /// ordered by increasing `R1`.
    pub boundary: Vec<(f64, f64)>,
}

/// Builds the region on a uniform `rho` grid over `[0,1]` (endpoints
/// included) with the sum-splitting correlation inserted exactly.
pub fn region(p1: f64, p2: f64, eps: f64, grid_size: usize) -> Result<RateRegion> {
    if grid_size < 2 {
        return Err(Error::Parameter("rho grid needs at least 2 points".into()));
    }
    let mut rho_grid: Vec<f64> = (0..grid_size)
        .map(|i| i as f64 / (grid_size - 1) as f64)
        .collect();
    let rho_star = solve_rho_star(p1, p2, eps, RhoHorizon::Asymptotic)?;
    if rho_grid
        .iter()
        .all(|&r| (r - rho_star).abs() > f64::EPSILON)
    {
        rho_grid.push(rho_star);
        rho_grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    }
    let pentagons: Result<Vec<Pentagon>> = rho_grid
        .iter()
        .map(|&rho| Pentagon::new(rho, p1, p2, eps))
        .collect();
    let pentagons = pentagons?;
    let boundary = pareto_frontier(&pentagons);
    Ok(RateRegion {
        rho_grid,
        pentagons,
        boundary,
    })
}

impl RateRegion {
    /// A rate pair is in the region iff some pentagon dominates it.
    pub fn contains(&self, r1: f64, r2: f64) -> bool {
        self.pentagons.iter().any(|p| p.contains(r1, r2, CHECK_TOL))
    }

    /// Samples the outer boundary along `count` directions sweeping the
    /// first quadrant; exact per-pentagon radii, no root finding.
    pub fn sample_boundary(&self, count: usize) -> Vec<(f64, f64)> {
        assert!(count >= 2);
        (0..count)
            .map(|i| {
                let phi = std::f64::consts::FRAC_PI_2 * i as f64 / (count - 1) as f64;
                let (v, u) = phi.sin_cos();
                let t = self
                    .pentagons
                    .iter()
                    .map(|p| p.max_radius(u, v))
                    .fold(0.0f64, f64::max);
                (t * u, t * v)
            })
            .collect()
    }
}

/// Corner points of each pentagon, Pareto-filtered into the upper-right
/// frontier of the union.
fn pareto_frontier(pentagons: &[Pentagon]) -> Vec<(f64, f64)> {
    let mut points: Vec<(f64, f64)> = Vec::new();
    for p in pentagons {
        // Dominant corners: where the sum constraint meets each
        // individual constraint (or the box corner when the sum bound
        // is inactive).
        if p.r1_max + p.r2_max <= p.sum_max {
            points.push((p.r1_max, p.r2_max));
        } else {
            points.push((p.r1_max, (p.sum_max - p.r1_max).max(0.0)));
            points.push(((p.sum_max - p.r2_max).max(0.0), p.r2_max));
        }
        points.push((p.r1_max, 0.0));
        points.push((0.0, p.r2_max));
    }
    // Ties in R1 sort by ascending R2 so the reverse sweep below sees
    // the dominating corner first and drops the rest.
    points.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .unwrap()
            .then(a.1.partial_cmp(&b.1).unwrap())
    });
    // Sweep from large R1 down keeping the running R2 maximum.
    let mut frontier: Vec<(f64, f64)> = Vec::new();
    let mut best_r2 = f64::NEG_INFINITY;
    for &(r1, r2) in points.iter().rev() {
        if r2 > best_r2 + 1e-15 {
            frontier.push((r1, r2));
            best_r2 = r2;
        }
    }
    frontier.reverse();
    frontier
}
