//! Two-user feedback scheme for the AWGN multiple-access channel with an
//! average-error target `eps`: the correlation quartic, the iterative
//! (Ozarow-style) inner scheme with receiver-side degradation noise, the
//! first-use abort power control, error-bound and message-sizing
//! evaluators.

use crate::channel::{CodeSession, FeedbackCode, GaussianStream, SessionFlags};
use crate::error::{Error, Result};
use crate::numerics::{
    gaussian_capacity, largest_root_in_unit_interval, normal_quantile, q_function,
    solve_quartic_real, QuarticCoeffs, Snr,
};
use rand_chacha::ChaCha12Rng;

/// Which error-budget slack enters the correlation quartic: the finite-n
/// operating point uses `1 - eps + 1/n`, the asymptotic one `1 - eps`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RhoHorizon {
    Finite(u64),
    Asymptotic,
}

impl RhoHorizon {
    fn slack(self, eps: f64) -> f64 {
        match self {
            RhoHorizon::Finite(n) => 1.0 - eps + 1.0 / n as f64,
            RhoHorizon::Asymptotic => 1.0 - eps,
        }
    }
}

/// The correlation quartic for boosted powers `A = P1/slack`,
/// `B = P2/slack`: with `g = sqrt(AB)`, the defining identity
/// `1 + A + B + 2 z g = (1 + A(1-z^2))(1 + B(1-z^2))` expands to
/// `-AB z^4 + (A + B + 2AB) z^2 + 2 g z - AB = 0`.
pub fn rho_quartic(a: f64, b: f64) -> QuarticCoeffs {
    let g = (a * b).sqrt();
    QuarticCoeffs::new(-a * b, 2.0 * g, a + b + 2.0 * a * b, 0.0, -a * b)
}

/// Largest solution in (0,1) of the correlation quartic at the given
/// horizon; this is the input correlation that makes the two single-user
/// constraints meet the sum constraint with equality.
pub fn solve_rho_star(p1: f64, p2: f64, eps: f64, horizon: RhoHorizon) -> Result<f64> {
    if !(p1 > 0.0 && p2 > 0.0) {
        return Err(Error::Parameter("powers must be positive".into()));
    }
    if !(0.0..1.0).contains(&eps) {
        return Err(Error::Parameter(format!("eps must be in [0,1), got {eps}")));
    }
    if let RhoHorizon::Finite(n) = horizon {
        if n == 0 {
            return Err(Error::Parameter("blocklength must be >= 1".into()));
        }
    }
    let slack = horizon.slack(eps);
    let coeffs = rho_quartic(p1 / slack, p2 / slack);
    let roots = solve_quartic_real(&coeffs)?;
    largest_root_in_unit_interval(&roots).ok_or_else(|| {
        Error::Infeasible(format!(
            "correlation quartic has no root in (0,1) for P1={p1}, P2={p2}, eps={eps}"
        ))
    })
}

/// All derived constants of the two-user scheme at one operating point.
#[derive(Debug, Clone, Copy)]
pub struct OzarowParams {
    pub n: u64,
    pub p1: f64,
    pub p2: f64,
    pub eps: f64,
    /// Asymptotic correlation (slack `1 - eps`).
    pub rho_star: f64,
    /// Finite-n correlation (slack `1 - eps + 1/n`).
    pub rho_n_star: f64,
    /// Variance of the receiver's degradation noise,
    /// `sigma_W^2 = rho_n_star / (1 - rho_n_star)`.
    pub sigma_w_sq: f64,
    /// `v_jn = (1 - eps + 1/n) / (12 P_j)`.
    pub v1n: f64,
    pub v2n: f64,
    /// Error-exponent normalizer sized so `kappa_n <= 2/n^2`.
    pub vartheta_n: f64,
    /// Error bound of the inner scheme at the sized rates
    /// (exponential form).
    pub kappa_n: f64,
    /// First-use abort cutoff `Phi^{-1}((eps - kappa_n)/(1 - kappa_n))`.
    pub abort_threshold: f64,
    /// Boosted per-user powers `P_j / (1 - eps + 1/n)`.
    pub p1_prime: f64,
    pub p2_prime: f64,
}

impl OzarowParams {
    /// Derives all constants. Requires `kappa_n < eps` and `1/n < eps`
    /// (both fail only for blocklengths too small for the target).
    pub fn new(n: u64, p1: f64, p2: f64, eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::Parameter(format!(
                "two-user scheme needs eps in (0,1), got {eps}"
            )));
        }
        if n < 3 {
            return Err(Error::BlocklengthTooSmall(
                "inner scheme needs n >= 3".into(),
            ));
        }
        let nf = n as f64;
        if 1.0 / nf >= eps {
            return Err(Error::BlocklengthTooSmall(format!(
                "1/n = {} must be below eps = {eps}",
                1.0 / nf
            )));
        }
        let rho_star = solve_rho_star(p1, p2, eps, RhoHorizon::Asymptotic)?;
        let rho_n_star = solve_rho_star(p1, p2, eps, RhoHorizon::Finite(n))?;
        let slack = 1.0 - eps + 1.0 / nf;
        let v1n = slack / (12.0 * p1);
        let v2n = slack / (12.0 * p2);
        let om = 1.0 - rho_n_star * rho_n_star;
        let x1 = p1 * om / slack;
        let x2 = p2 * om / slack;
        let vartheta_n = 2.0
            * (8.0 * v1n * (1.0 + x1) * (1.0 + x1)).max(8.0 * v2n * (1.0 + x2) * (1.0 + x2));
        // Exponential error bound at the sized rates: each term is
        // exp(-vartheta ln n / (8 v_jn (1+x_j)^2)) <= 1/n^2.
        let kappa_n = (-vartheta_n * nf.ln() / (8.0 * v1n * (1.0 + x1) * (1.0 + x1))).exp()
            + (-vartheta_n * nf.ln() / (8.0 * v2n * (1.0 + x2) * (1.0 + x2))).exp();
        if kappa_n >= eps {
            return Err(Error::BlocklengthTooSmall(format!(
                "kappa_n = {kappa_n} must be below eps = {eps}; increase n"
            )));
        }
        let abort_threshold = normal_quantile((eps - kappa_n) / (1.0 - kappa_n))?;
        Ok(OzarowParams {
            n,
            p1,
            p2,
            eps,
            rho_star,
            rho_n_star,
            sigma_w_sq: rho_n_star / (1.0 - rho_n_star),
            v1n,
            v2n,
            vartheta_n,
            kappa_n,
            abort_threshold,
            p1_prime: p1 / slack,
            p2_prime: p2 / slack,
        })
    }

    fn slack(&self) -> f64 {
        1.0 - self.eps + 1.0 / self.n as f64
    }
}

/// The two forms of the inner-scheme error bound at rates `(R1n, R2n)`
/// (nats per use of the inner blocklength `n`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KappaBound {
    /// `2Q(u1) + 2Q(u2)` with
    /// `u_j = exp(n(C_j - R_jn)) / (2 sqrt(v_jn)(1 + x_j))`,
    /// `x_j = P_j(1 - rho_n_star^2)/(1 - eps + 1/n)`, `C_j = C(x_j)`.
    pub q_form: f64,
    /// `exp(-u1^2/2) + exp(-u2^2/2)`, the Chernoff relaxation.
    pub chernoff_form: f64,
}

/// Evaluates both error-bound forms. The Q-form never exceeds the
/// Chernoff form.
pub fn kappa_bound(params: &OzarowParams, r1n: f64, r2n: f64) -> Result<KappaBound> {
    if !(r1n > 0.0 && r2n > 0.0) {
        return Err(Error::Parameter("rates must be positive".into()));
    }
    let nf = params.n as f64;
    let om = 1.0 - params.rho_n_star * params.rho_n_star;
    let slack = params.slack();
    let mut q_form = 0.0;
    let mut chernoff = 0.0;
    for (p, v, r) in [
        (params.p1, params.v1n, r1n),
        (params.p2, params.v2n, r2n),
    ] {
        let x = p * om / slack;
        let cap = gaussian_capacity(Snr::new(x)?);
        let u = (nf * (cap - r)).exp() / (2.0 * v.sqrt() * (1.0 + x));
        q_form += 2.0 * q_function(u);
        chernoff += (-0.5 * u * u).exp();
    }
    Ok(KappaBound {
        q_form,
        chernoff_form: chernoff,
    })
}

/// Message sizing at the operating point: log counts, rates, and the
/// sum-rate identity check forced by the correlation quartic.
#[derive(Debug, Clone, Copy)]
pub struct MessageSizes {
    pub ln_m1: f64,
    pub ln_m2: f64,
    /// `|ln M1 + ln M2 - [n C((P1+P2+2 rho sqrt(P1P2))/slack) - ln(vartheta ln n)]|`,
    /// relative to the sum.
    pub sum_identity_residual: f64,
}

impl MessageSizes {
    /// Integer message counts, when they fit a u128.
    pub fn counts(&self) -> Result<(u128, u128)> {
        let to_count = |ln_m: f64, user: usize| -> Result<u128> {
            let m = ln_m.exp().round();
            if !(m >= 1.0) || m >= 2f64.powi(100) {
                return Err(Error::Parameter(format!(
                    "message count for user {user} not representable: ln M = {ln_m}"
                )));
            }
            Ok(m as u128)
        };
        Ok((to_count(self.ln_m1, 1)?, to_count(self.ln_m2, 2)?))
    }
}

/// `ln M_jn = n C(P_j(1 - rho_n_star^2)/slack) - ln(vartheta_n ln n)/2`.
pub fn message_sizes(n: u64, p1: f64, p2: f64, eps: f64) -> Result<MessageSizes> {
    let params = OzarowParams::new(n, p1, p2, eps)?;
    message_sizes_for(&params)
}

/// Same as [`message_sizes`] but reusing precomputed parameters.
pub fn message_sizes_for(params: &OzarowParams) -> Result<MessageSizes> {
    let nf = params.n as f64;
    let om = 1.0 - params.rho_n_star * params.rho_n_star;
    let slack = params.slack();
    let half_pen = 0.5 * (params.vartheta_n * nf.ln()).ln();
    let ln_m1 = nf * gaussian_capacity(Snr::new(params.p1 * om / slack)?) - half_pen;
    let ln_m2 = nf * gaussian_capacity(Snr::new(params.p2 * om / slack)?) - half_pen;
    let sum_target = nf
        * gaussian_capacity(Snr::new(
            (params.p1 + params.p2 + 2.0 * params.rho_n_star * (params.p1 * params.p2).sqrt())
                / slack,
        )?)
        - 2.0 * half_pen;
    let sum = ln_m1 + ln_m2;
    Ok(MessageSizes {
        ln_m1,
        ln_m2,
        sum_identity_residual: (sum - sum_target).abs() / sum.abs().max(1.0),
    })
}

/// Time-sharing between two rate pairs: the convex combination
/// `lambda * a + (1 - lambda) * b`, the standard corner-point selector.
pub fn time_share(a: (f64, f64), b: (f64, f64), lambda: f64) -> Result<(f64, f64)> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Parameter(format!(
            "time-share weight must be in [0,1], got {lambda}"
        )));
    }
    Ok((
        lambda * a.0 + (1.0 - lambda) * b.0,
        lambda * a.1 + (1.0 - lambda) * b.1,
    ))
}

// ---------------------------------------------------------------------------
// The code itself
// ---------------------------------------------------------------------------

/// Two-user feedback code over `n + 1` channel uses.
///
/// Time 1: both users send zero; if the output falls at or below the
/// abort threshold, both send zeros for the remaining `n` uses (power
/// control). Otherwise the `n`-use inner scheme runs at boosted powers
/// `P_j' = P_j/(1 - eps + 1/n)`:
/// inner time 1: user 1 alone sends its scaled PAM point; the receiver
/// adds a degradation noise `W ~ N(0, sigma_W^2)` to its output and
/// feeds the degraded value back.
/// inner time 2: user 2 alone does the same; the receiver adds the
/// *same* `W`, which correlates the two initial estimation errors to
/// exactly `rho_n_star`.
/// inner times 3..n: each user transmits its receiver-side estimation
/// error scaled to power `P_j'`, user 2 modulated by the sign of the
/// current error correlation; the receiver performs the joint linear
/// MMSE update. The error correlation alternates as `(-1)^k rho_n_star`
/// while the transmitted signals stay positively correlated.
pub struct OzarowCode {
    params: OzarowParams,
    m1: u128,
    m2: u128,
}

/// Builds the code for explicit message counts.
pub fn build_ozarow_code(params: &OzarowParams, m1: u128, m2: u128) -> Result<OzarowCode> {
    if m1 < 1 || m2 < 1 {
        return Err(Error::Parameter("message counts must be >= 1".into()));
    }
    let cap = 1u128 << 100;
    if m1 > cap || m2 > cap {
        return Err(Error::Parameter(
            "message counts exceed the representable grid".into(),
        ));
    }
    Ok(OzarowCode {
        params: *params,
        m1,
        m2,
    })
}

impl OzarowCode {
    pub fn params(&self) -> &OzarowParams {
        &self.params
    }

    /// Deterministic bookkeeping error-correlation sequence of the inner
    /// scheme: entry `i` is the correlation after inner time `k = i + 2`
    /// (initialization yields `+rho_n_star` at `k = 2`; each MMSE step
    /// flips the sign, so the sequence tracks `(-1)^k rho_n_star`).
    pub fn rho_sequence(&self) -> Vec<f64> {
        let p = &self.params;
        let mut out = Vec::with_capacity((p.n - 1) as usize);
        let mut state = BookState::init(p);
        out.push(state.rho);
        for _ in 3..=p.n {
            state.update(p);
            out.push(state.rho);
        }
        out
    }

    /// Bookkeeping error variances `(alpha_1, alpha_2)` after the final
    /// inner time.
    pub fn final_variances(&self) -> (f64, f64) {
        let p = &self.params;
        let mut state = BookState::init(p);
        for _ in 3..=p.n {
            state.update(p);
        }
        (state.alpha1, state.alpha2)
    }
}

/// Deterministic part of the joint MMSE recursion (variances and error
/// correlation do not depend on the noise realization).
#[derive(Debug, Clone, Copy)]
struct BookState {
    alpha1: f64,
    alpha2: f64,
    rho: f64,
}

impl BookState {
    fn init(p: &OzarowParams) -> Self {
        BookState {
            alpha1: (1.0 + p.sigma_w_sq) * p.v1n,
            alpha2: (1.0 + p.sigma_w_sq) * p.v2n,
            rho: p.rho_n_star,
        }
    }

    /// Update coefficients `(c1, c2)` for the current state: the MMSE
    /// gains of each user's error against the summed output.
    fn gains(&self, p: &OzarowParams) -> (f64, f64, f64) {
        let (a, b) = (p.p1_prime, p.p2_prime);
        let g = (a * b).sqrt();
        let r = self.rho.abs();
        let s = 1.0 + a + b + 2.0 * r * g;
        let c1 = self.alpha1.sqrt() * (a.sqrt() + r * b.sqrt()) / s;
        let c2 = self.rho.signum() * self.alpha2.sqrt() * (r * a.sqrt() + b.sqrt()) / s;
        (c1, c2, s)
    }

    fn update(&mut self, p: &OzarowParams) {
        let (a, b) = (p.p1_prime, p.p2_prime);
        let g = (a * b).sqrt();
        let om = 1.0 - self.rho * self.rho;
        let (_, _, s) = self.gains(p);
        let new_rho = self.rho.signum() * (self.rho.abs() - g * om)
            / ((1.0 + a * om) * (1.0 + b * om)).sqrt();
        self.alpha1 *= (1.0 + b * om) / s;
        self.alpha2 *= (1.0 + a * om) / s;
        self.rho = new_rho;
    }
}

struct OzarowSession {
    params: OzarowParams,
    m1: u128,
    m2: u128,
    w1: u128,
    w2: u128,
    theta1: f64,
    theta2: f64,
    /// Shared degradation noise added by the receiver at inner times 1, 2.
    w_noise: f64,
    aborted: bool,
    /// Receiver-side estimation errors (known to the encoders through
    /// the feedback link).
    eps1: f64,
    eps2: f64,
    book: BookState,
    /// Number of channel outputs already folded into the state.
    processed: usize,
}

fn pam_point(w: u128, m: u128) -> f64 {
    let mf = m as f64;
    (w as f64 - (mf + 1.0) / 2.0) / mf
}

impl OzarowSession {
    /// Folds output `y` at time `k` (0-based over `n + 1` uses) into the
    /// receiver/encoder state; returns the value placed on the feedback
    /// link (degraded at inner times 1 and 2).
    fn process_output(&mut self, k: usize, y: f64) -> f64 {
        debug_assert_eq!(k, self.processed);
        self.processed = k + 1;
        if k == 0 {
            self.aborted = y <= self.params.abort_threshold;
            return y;
        }
        if self.aborted {
            return y;
        }
        match k {
            1 => {
                let d = y + self.w_noise;
                self.eps1 = d / (12.0 * self.params.p1_prime).sqrt() - self.theta1;
                d
            }
            2 => {
                let d = y + self.w_noise;
                self.eps2 = d / (12.0 * self.params.p2_prime).sqrt() - self.theta2;
                d
            }
            _ => {
                let (c1, c2, _) = self.book.gains(&self.params);
                self.eps1 -= c1 * y;
                self.eps2 -= c2 * y;
                self.book.update(&self.params);
                y
            }
        }
    }

    /// Replays raw outputs the harness has not routed through
    /// [`CodeSession::observe`] (defensive; in normal operation `observe`
    /// keeps the state current).
    fn catch_up(&mut self, y: &[f64]) {
        while self.processed < y.len() {
            let k = self.processed;
            self.process_output(k, y[k]);
        }
    }
}

impl CodeSession for OzarowSession {
    fn encode(&mut self, user: usize, k: usize, _fb: &[f64]) -> f64 {
        if k == 0 || self.aborted {
            return 0.0;
        }
        let p = &self.params;
        match (k, user) {
            (1, 0) => (12.0 * p.p1_prime).sqrt() * self.theta1,
            (2, 1) => (12.0 * p.p2_prime).sqrt() * self.theta2,
            (1, _) | (2, _) => 0.0,
            (_, 0) => (p.p1_prime / self.book.alpha1).sqrt() * self.eps1,
            (_, _) => {
                self.book.rho.signum() * (p.p2_prime / self.book.alpha2).sqrt() * self.eps2
            }
        }
    }

    fn observe(&mut self, k: usize, y: f64) -> f64 {
        self.process_output(k, y)
    }

    fn decode(&mut self, y: &[f64]) -> Vec<u128> {
        self.catch_up(y);
        if self.aborted {
            return vec![1, 1];
        }
        vec![
            decode_offset(self.w1, self.eps1, self.m1),
            decode_offset(self.w2, self.eps2, self.m2),
        ]
    }

    fn flags(&self) -> SessionFlags {
        SessionFlags {
            aborted: Some(self.aborted),
            truncated: None,
        }
    }
}

/// Nearest-grid-point decision expressed as an exact integer offset from
/// the sent message (the estimation error is message-independent).
fn decode_offset(w: u128, err: f64, m: u128) -> u128 {
    if m == 1 {
        return 1;
    }
    let offset = (err * m as f64).round();
    if !offset.is_finite() || offset.abs() >= 1.7e38 {
        return if offset > 0.0 { m } else { 1 };
    }
    let shifted = w as i128 as f64 + offset;
    if shifted < 1.0 {
        1
    } else if shifted >= m as f64 {
        m
    } else {
        (w as i128 + offset as i128).clamp(1, m as i128) as u128
    }
}

impl FeedbackCode for OzarowCode {
    fn blocklength(&self) -> usize {
        self.params.n as usize + 1
    }
    fn num_users(&self) -> usize {
        2
    }
    fn message_counts(&self) -> Vec<u128> {
        vec![self.m1, self.m2]
    }
    fn power_budgets(&self) -> Vec<f64> {
        vec![self.params.p1, self.params.p2]
    }
    fn new_session(&self, messages: &[u128], rng: ChaCha12Rng) -> Result<Box<dyn CodeSession>> {
        let mut gauss = GaussianStream::new(rng);
        let w_noise = self.params.sigma_w_sq.sqrt() * gauss.next_normal();
        Ok(Box::new(OzarowSession {
            params: self.params,
            m1: self.m1,
            m2: self.m2,
            w1: messages[0],
            w2: messages[1],
            theta1: pam_point(messages[0], self.m1),
            theta2: pam_point(messages[1], self.m2),
            w_noise,
            aborted: false,
            eps1: 0.0,
            eps2: 0.0,
            book: BookState::init(&self.params),
            processed: 0,
        }))
    }
}
