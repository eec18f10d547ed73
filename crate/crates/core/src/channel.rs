//! Unit-variance AWGN channel simulation with per-use noiseless output
//! feedback: deterministic counter-based seeding, transcript capture,
//! and parallel Monte-Carlo aggregation.
//!
//! Trials are keyed by `(seed, trial_index)` so they are order-independent
//! and can run on any number of worker threads with bit-identical results;
//! reductions are performed in fixed block order.

use crate::error::{Error, Result};
use crate::mac_bounds::PerSymbolStats;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::Serialize;

/// Noise variance of the channel; the paper's normalization fixes it to 1.
pub const NOISE_VARIANCE: f64 = 1.0;

/// 95% two-sided normal quantile used for all confidence intervals.
const Z95: f64 = 1.959_963_984_540_054;

/// Number of trials each worker processes as one deterministic block.
const BLOCK: u64 = 256;

/// Static description of a simulated channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChannelSpec {
    /// Blocklength (number of channel uses).
    pub n: usize,
    /// Number of transmitters (1 or 2).
    pub users: usize,
}

/// Independent random-number lanes within one trial.
#[derive(Debug, Clone, Copy)]
enum Lane {
    Noise = 0,
    Code = 1,
    Message = 2,
}

/// Counter-based per-trial stream: one ChaCha stream per (trial, lane).
fn trial_rng(seed: u64, trial_index: u64, lane: Lane) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(trial_index.wrapping_mul(4).wrapping_add(lane as u64));
    rng
}

/// Standard-normal generator over a dedicated stream.
///
/// The transformation is Box-Muller (fixed here so golden tests stay
/// stable across dependency upgrades).
pub struct GaussianStream {
    rng: ChaCha12Rng,
    spare: Option<f64>,
}

impl GaussianStream {
    pub fn new(rng: ChaCha12Rng) -> Self {
        GaussianStream { rng, spare: None }
    }

    /// Next standard-normal variate.
    pub fn next_normal(&mut self) -> f64 {
        if let Some(v) = self.spare.take() {
            return v;
        }
        // u1 in (0, 1]: shift the half-open [0,1) draw away from zero.
        let u1: f64 = 1.0 - self.rng.gen::<f64>();
        let u2: f64 = self.rng.gen();
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (2.0 * std::f64::consts::PI * u2).sin_cos();
        self.spare = Some(r * s);
        r * c
    }
}

/// Diagnostics a session may report after a trial; transforms that do not
/// use a flag leave it `None`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct SessionFlags {
    /// Two-user power-control abort (all-zero transmission after time 1).
    pub aborted: Option<bool>,
    /// Peak-power truncation forced at least one symbol to zero.
    pub truncated: Option<bool>,
}

/// Per-trial state of a feedback code.
///
/// Causality contract: `encode(user, k, feedback)` may read only the
/// fed-back values for times `< k` (exactly the slice it is given).
pub trait CodeSession {
    /// Channel input of `user` at time `k` (0-based) given all fed-back
    /// values for earlier times.
    fn encode(&mut self, user: usize, k: usize, feedback: &[f64]) -> f64;

    /// Receiver-side hook called once per channel output, in time order.
    /// Returns the value placed on the feedback link (codes that degrade
    /// the feedback override this; the default is the noiseless output).
    fn observe(&mut self, _k: usize, y: f64) -> f64 {
        y
    }

    /// Decodes from the full output sequence after the last channel use.
    fn decode(&mut self, y: &[f64]) -> Vec<u128>;

    /// Post-trial diagnostics.
    fn flags(&self) -> SessionFlags {
        SessionFlags::default()
    }
}

/// A feedback code: immutable parameters plus a per-trial session factory.
///
/// Implementations must be stateless across trials; all mutable state
/// lives in the session object.
pub trait FeedbackCode: Send + Sync {
    /// Number of channel uses.
    fn blocklength(&self) -> usize;
    /// Number of transmitters.
    fn num_users(&self) -> usize;
    /// Message-set size per user.
    fn message_counts(&self) -> Vec<u128>;
    /// Expected-power budget per user (nats of the audit, not enforced
    /// per trajectory).
    fn power_budgets(&self) -> Vec<f64>;
    /// Fresh per-trial state. `rng` is the code's private randomness lane.
    fn new_session(&self, messages: &[u128], rng: ChaCha12Rng) -> Result<Box<dyn CodeSession>>;
}

/// Complete record of one simulated trial.
#[derive(Debug, Clone, Serialize)]
pub struct Transcript {
    /// Sent message per user (1-based indices).
    pub messages: Vec<u128>,
    /// Inputs, indexed `[user][k]`.
    pub x: Vec<Vec<f64>>,
    /// Noise sequence.
    pub z: Vec<f64>,
    /// Outputs; `y[k] = sum_j x[j][k] + z[k]` exactly.
    pub y: Vec<f64>,
    /// Decoded message per user.
    pub decoded: Vec<u128>,
    /// Total energy `sum_k x[j][k]^2` per user.
    pub energy: Vec<f64>,
    /// Session diagnostics.
    pub flags: SessionFlags,
}

impl Transcript {
    /// True when any user's decoded message differs from the sent one.
    pub fn is_error(&self) -> bool {
        self.decoded != self.messages
    }
}

/// How messages are drawn for each trial.
#[derive(Debug, Clone)]
pub enum MessageSampler {
    /// Independent uniform draw per user from `1..=M_j`.
    Uniform,
    /// The same fixed tuple every trial.
    Fixed(Vec<u128>),
}

fn validate_messages(code: &dyn FeedbackCode, messages: &[u128]) -> Result<()> {
    let counts = code.message_counts();
    if messages.len() != counts.len() {
        return Err(Error::Arity {
            expected: counts.len(),
            actual: messages.len(),
        });
    }
    for (user, (&m, &count)) in messages.iter().zip(counts.iter()).enumerate() {
        if m < 1 || m > count {
            return Err(Error::MessageOutOfRange {
                user,
                message: m,
                count,
            });
        }
    }
    Ok(())
}

fn sample_messages(
    code: &dyn FeedbackCode,
    sampler: &MessageSampler,
    seed: u64,
    trial_index: u64,
) -> Result<Vec<u128>> {
    let messages = match sampler {
        MessageSampler::Fixed(m) => m.clone(),
        MessageSampler::Uniform => {
            let mut rng = trial_rng(seed, trial_index, Lane::Message);
            code.message_counts()
                .iter()
                .map(|&count| rng.gen_range(1..=count))
                .collect()
        }
    };
    validate_messages(code, &messages)?;
    Ok(messages)
}

/// Runs a single trial and captures the full transcript.
///
/// Identical `(seed, trial_index)` produce bit-identical transcripts.
pub fn run_trial(
    code: &dyn FeedbackCode,
    messages: &[u128],
    seed: u64,
    trial_index: u64,
) -> Result<Transcript> {
    validate_messages(code, messages)?;
    let n = code.blocklength();
    let users = code.num_users();
    let mut session = code.new_session(messages, trial_rng(seed, trial_index, Lane::Code))?;
    let mut noise = GaussianStream::new(trial_rng(seed, trial_index, Lane::Noise));

    let mut x: Vec<Vec<f64>> = vec![Vec::with_capacity(n); users];
    let mut z = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    let mut fed = Vec::with_capacity(n);
    for k in 0..n {
        let mut sum = 0.0;
        for (j, xj) in x.iter_mut().enumerate() {
            let v = session.encode(j, k, &fed);
            sum += v;
            xj.push(v);
        }
        let zk = noise.next_normal();
        let yk = sum + zk;
        z.push(zk);
        y.push(yk);
        fed.push(session.observe(k, yk));
    }
    let decoded = session.decode(&y);
    let energy = x
        .iter()
        .map(|xj| xj.iter().map(|v| v * v).sum())
        .collect();
    Ok(Transcript {
        messages: messages.to_vec(),
        x,
        z,
        y,
        decoded,
        energy,
        flags: session.flags(),
    })
}

/// A Monte-Carlo probability estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    /// Empirical probability.
    pub p_hat: f64,
    /// Number of trials that entered the estimate.
    pub trials: u64,
    /// Number of trials on which the event occurred.
    pub successes: u64,
    /// Half-width of the 95% Wilson interval.
    pub ci_halfwidth: f64,
    /// Master seed the estimate was computed under.
    pub seed: u64,
}

impl McEstimate {
    /// Builds the estimate (Wilson 95% interval) from raw counts.
    pub fn from_counts(successes: u64, trials: u64, seed: u64) -> Self {
        assert!(trials > 0, "estimate needs at least one trial");
        let n = trials as f64;
        let p = successes as f64 / n;
        let z2 = Z95 * Z95;
        let halfwidth =
            Z95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / (1.0 + z2 / n);
        McEstimate {
            p_hat: p,
            trials,
            successes,
            ci_halfwidth: halfwidth,
            seed,
        }
    }

    /// Binomial standard error `sqrt(p(1-p)/trials)` of the estimate.
    pub fn standard_error(&self) -> f64 {
        (self.p_hat * (1.0 - self.p_hat) / self.trials as f64).sqrt()
    }
}

/// Standard error a binomial estimate over `trials` would have at a
/// reference probability `p` (used when comparing against analytic
/// values that may sit far from `p_hat`).
pub fn binomial_se(p: f64, trials: u64) -> f64 {
    (p.clamp(0.0, 1.0) * (1.0 - p.clamp(0.0, 1.0)) / trials as f64).sqrt()
}

fn block_ranges(trials: u64) -> Vec<(u64, u64)> {
    (0..trials)
        .step_by(BLOCK as usize)
        .map(|start| (start, (start + BLOCK).min(trials)))
        .collect()
}

/// Estimates the probability of `event` over independent trials.
pub fn estimate_event<F>(
    code: &dyn FeedbackCode,
    trials: u64,
    seed: u64,
    sampler: &MessageSampler,
    event: F,
) -> Result<McEstimate>
where
    F: Fn(&Transcript) -> bool + Sync,
{
    if trials == 0 {
        return Err(Error::Parameter("trials must be >= 1".into()));
    }
    let counts: Result<Vec<u64>> = block_ranges(trials)
        .into_par_iter()
        .map(|(start, end)| {
            let mut hits = 0u64;
            for t in start..end {
                let messages = sample_messages(code, sampler, seed, t)?;
                let transcript = run_trial(code, &messages, seed, t)?;
                if event(&transcript) {
                    hits += 1;
                }
            }
            Ok(hits)
        })
        .collect();
    let successes = counts?.into_iter().sum();
    Ok(McEstimate::from_counts(successes, trials, seed))
}

/// Estimates the average decoding-error probability.
pub fn estimate_error(
    code: &dyn FeedbackCode,
    trials: u64,
    seed: u64,
    sampler: &MessageSampler,
) -> Result<McEstimate> {
    estimate_event(code, trials, seed, sampler, Transcript::is_error)
}

/// Estimates `Pr[event | given]`; the returned trial count is the number
/// of trials on which `given` held.
pub fn estimate_conditional<E, G>(
    code: &dyn FeedbackCode,
    trials: u64,
    seed: u64,
    sampler: &MessageSampler,
    event: E,
    given: G,
) -> Result<McEstimate>
where
    E: Fn(&Transcript) -> bool + Sync,
    G: Fn(&Transcript) -> bool + Sync,
{
    if trials == 0 {
        return Err(Error::Parameter("trials must be >= 1".into()));
    }
    let counts: Result<Vec<(u64, u64)>> = block_ranges(trials)
        .into_par_iter()
        .map(|(start, end)| {
            let (mut cond, mut hits) = (0u64, 0u64);
            for t in start..end {
                let messages = sample_messages(code, sampler, seed, t)?;
                let transcript = run_trial(code, &messages, seed, t)?;
                if given(&transcript) {
                    cond += 1;
                    if event(&transcript) {
                        hits += 1;
                    }
                }
            }
            Ok((cond, hits))
        })
        .collect();
    let (cond, hits) = counts?
        .into_iter()
        .fold((0u64, 0u64), |(a, b), (c, h)| (a + c, b + h));
    if cond == 0 {
        return Err(Error::Parameter(
            "conditioning event never occurred; conditional estimate undefined".into(),
        ));
    }
    Ok(McEstimate::from_counts(hits, cond, seed))
}

/// Mean per-use power estimate for one user.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerEstimate {
    /// Mean of `(1/n) sum_k x_k^2` over trials.
    pub mean: f64,
    /// 95% normal-approximation half-width.
    pub ci_halfwidth: f64,
    pub trials: u64,
    pub seed: u64,
}

impl PowerEstimate {
    /// Standard error of the mean.
    pub fn standard_error(&self) -> f64 {
        self.ci_halfwidth / Z95
    }
}

/// Audits the expected power constraint: per-user mean of the per-trial,
/// per-use energy with a confidence interval.
pub fn estimate_power(
    code: &dyn FeedbackCode,
    trials: u64,
    seed: u64,
    sampler: &MessageSampler,
) -> Result<Vec<PowerEstimate>> {
    if trials == 0 {
        return Err(Error::Parameter("trials must be >= 1".into()));
    }
    let users = code.num_users();
    let n = code.blocklength() as f64;
    // Per-block (sum, sum of squares) per user; blocks folded in index
    // order so the result is independent of thread count.
    let partials: Result<Vec<Vec<(f64, f64)>>> = block_ranges(trials)
        .into_par_iter()
        .map(|(start, end)| {
            let mut acc = vec![(0.0f64, 0.0f64); users];
            for t in start..end {
                let messages = sample_messages(code, sampler, seed, t)?;
                let transcript = run_trial(code, &messages, seed, t)?;
                for (j, a) in acc.iter_mut().enumerate() {
                    let per_use = transcript.energy[j] / n;
                    a.0 += per_use;
                    a.1 += per_use * per_use;
                }
            }
            Ok(acc)
        })
        .collect();
    let mut totals = vec![(0.0f64, 0.0f64); users];
    for block in partials? {
        for (j, (s, s2)) in block.into_iter().enumerate() {
            totals[j].0 += s;
            totals[j].1 += s2;
        }
    }
    let t = trials as f64;
    Ok(totals
        .into_iter()
        .map(|(sum, sumsq)| {
            let mean = sum / t;
            let var = (sumsq / t - mean * mean).max(0.0);
            PowerEstimate {
                mean,
                ci_halfwidth: Z95 * (var / t).sqrt(),
                trials,
                seed,
            }
        })
        .collect())
}

/// Runs `trials` trials and returns every transcript (in trial order).
pub fn collect_transcripts(
    code: &dyn FeedbackCode,
    trials: u64,
    seed: u64,
    sampler: &MessageSampler,
) -> Result<Vec<Transcript>> {
    (0..trials)
        .into_par_iter()
        .map(|t| {
            let messages = sample_messages(code, sampler, seed, t)?;
            run_trial(code, &messages, seed, t)
        })
        .collect()
}

/// Empirical per-time second moments and input correlations of a
/// two-user code (Monte-Carlo estimate of the single-letterization
/// inputs). `only_non_aborted` restricts to trials whose session did not
/// abort.
pub fn per_symbol_stats(
    code: &dyn FeedbackCode,
    trials: u64,
    seed: u64,
    sampler: &MessageSampler,
    only_non_aborted: bool,
) -> Result<PerSymbolStats> {
    if code.num_users() != 2 {
        return Err(Error::Arity {
            expected: 2,
            actual: code.num_users(),
        });
    }
    if trials == 0 {
        return Err(Error::Parameter("trials must be >= 1".into()));
    }
    let n = code.blocklength();
    // Per-k sums: x1^2, x2^2, x1*x2, x1^4, x2^4, (x1*x2)^2.
    #[derive(Clone)]
    struct Acc {
        count: u64,
        s: Vec<[f64; 6]>,
    }
    let zero = Acc {
        count: 0,
        s: vec![[0.0; 6]; n],
    };
    let partials: Result<Vec<Acc>> = block_ranges(trials)
        .into_par_iter()
        .map(|(start, end)| {
            let mut acc = zero.clone();
            for t in start..end {
                let messages = sample_messages(code, sampler, seed, t)?;
                let tr = run_trial(code, &messages, seed, t)?;
                if only_non_aborted && tr.flags.aborted == Some(true) {
                    continue;
                }
                acc.count += 1;
                for k in 0..n {
                    let (a, b) = (tr.x[0][k], tr.x[1][k]);
                    let cell = &mut acc.s[k];
                    cell[0] += a * a;
                    cell[1] += b * b;
                    cell[2] += a * b;
                    cell[3] += a * a * a * a;
                    cell[4] += b * b * b * b;
                    cell[5] += a * b * a * b;
                }
            }
            Ok(acc)
        })
        .collect();
    let mut total = zero;
    for block in partials? {
        total.count += block.count;
        for (cell, add) in total.s.iter_mut().zip(block.s.iter()) {
            for i in 0..6 {
                cell[i] += add[i];
            }
        }
    }
    if total.count == 0 {
        return Err(Error::Parameter(
            "no trials matched the per-symbol-stats filter".into(),
        ));
    }
    let t = total.count as f64;
    let mut stats = PerSymbolStats::with_capacity(n, total.count, seed);
    for cell in &total.s {
        let p1 = cell[0] / t;
        let p2 = cell[1] / t;
        let cross = cell[2] / t;
        let p1_var = (cell[3] / t - p1 * p1).max(0.0);
        let p2_var = (cell[4] / t - p2 * p2).max(0.0);
        let degenerate = p1 < 1e-12 || p2 < 1e-12;
        let rho = if degenerate {
            0.0
        } else {
            (cross / (p1 * p2).sqrt()).clamp(-1.0, 1.0)
        };
        // Fisher-style large-sample approximation for the correlation CI.
        let rho_ci = Z95 * (1.0 - rho * rho) / t.sqrt();
        stats.push(
            p1,
            p2,
            rho,
            Z95 * (p1_var / t).sqrt(),
            Z95 * (p2_var / t).sqrt(),
            rho_ci,
            degenerate,
        );
    }
    Ok(stats)
}

pub mod probe;
