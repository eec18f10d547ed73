//! Single-user code tests: SK recursion fidelity, the power-control
//! wrapper's error/power split, the peak-power truncation law, and the
//! phase-schedule ordering chain.

use feedbacklab::channel::probe::FixedErrorCode;
use feedbacklab::channel::{
    binomial_se, collect_transcripts, estimate_error, estimate_event, estimate_power, run_trial,
    FeedbackCode, MessageSampler, Transcript,
};
use feedbacklab::error::Error;
use feedbacklab::numerics::{gaussian_capacity, q_function, Snr};
use feedbacklab::su_codes::*;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use std::sync::Arc;

const SEED: u64 = 0x5EED_0002;

// ---------------------------------------------------------------------------
// Oracles
// ---------------------------------------------------------------------------

/// Independent variance-recursion oracle: sigma_k^2 iterated step by step
/// from sigma_1^2 = Var(theta)/P (never through the closed form).
fn sk_variance_oracle(n: usize, m: u128, p: f64) -> Vec<f64> {
    let mf = m as f64;
    let theta_var = (mf * mf - 1.0) / (12.0 * mf * mf);
    let mut vars = Vec::with_capacity(n);
    let mut v = theta_var / p;
    vars.push(v);
    for _ in 1..n {
        v /= 1.0 + p;
        vars.push(v);
    }
    vars
}

/// Analytic SK error oracle: exact average nearest-point error,
/// `2 Q(Delta/(2 sigma_n)) (M-1)/M`, built from the recursion oracle.
fn sk_error_oracle(n: usize, m: u128, p: f64) -> f64 {
    let sigma_n = sk_variance_oracle(n, m, p)[n - 1].sqrt();
    let delta = 1.0 / m as f64;
    2.0 * q_function(delta / (2.0 * sigma_n)) * (m - 1) as f64 / m as f64
}

// ---------------------------------------------------------------------------
// SK core
// ---------------------------------------------------------------------------

#[test]
fn sk_variance_recursion_matches_closed_form() {
    for &(n, m, p) in &[(10usize, 2u128, 1.0f64), (15, 4, 1.0), (25, 8, 0.5), (40, 64, 3.0)] {
        let code = SkCode::new(n, m, p).unwrap();
        let oracle = sk_variance_oracle(n, m, p);
        for k in 1..=n {
            let got = code.estimate_variance(k);
            assert!(
                (got - oracle[k - 1]).abs() <= 1e-9 * oracle[k - 1],
                "variance mismatch at k={k} for (n={n}, m={m}, p={p})"
            );
        }
    }
}

#[test]
fn sk_error_formulas_match_oracle() {
    let code = SkCode::new(12, 8, 1.0).unwrap();
    let oracle = sk_error_oracle(12, 8, 1.0);
    assert!((code.exact_error() - oracle).abs() <= 1e-12 * oracle.max(1e-300));
    assert!(code.exact_error() <= code.analytic_error_bound());
}

#[test]
fn sk_single_message_never_errs_and_sends_nothing() {
    let code = SkCode::new(5, 1, 1.0).unwrap();
    assert_eq!(code.exact_error(), 0.0);
    assert_eq!(code.power_budgets(), vec![0.0]);
    let tr = run_trial(&code, &[1], SEED, 0).unwrap();
    assert_eq!(tr.energy[0], 0.0);
    assert_eq!(tr.decoded, vec![1]);
}

#[test]
fn sk_monte_carlo_matches_analytic_error_in_the_measurable_regime() {
    // Parameter cells where the analytic error is large enough to measure.
    for &(n, m) in &[(4usize, 16u128), (6, 8)] {
        let p = 1.0;
        let code = SkCode::new(n, m, p).unwrap();
        let analytic = sk_error_oracle(n, m, p);
        assert!(analytic > 0.05, "cell not measurable: {analytic}");
        let trials = 100_000;
        let est = estimate_error(&code, trials, SEED, &MessageSampler::Uniform).unwrap();
        let se = binomial_se(analytic, trials);
        assert!(
            (est.p_hat - analytic).abs() <= 3.0 * se,
            "(n={n}, m={m}): mc {} vs analytic {analytic} +- {}",
            est.p_hat,
            3.0 * se
        );
    }
}

#[test]
fn sk_above_capacity_error_approaches_one() {
    // M = round(exp(2 n C(P))): double the capacity exponent.
    let n = 20;
    let p = 1.0;
    let m = (2.0 * n as f64 * gaussian_capacity(Snr::new(p).unwrap())).exp().round() as u128;
    let code = SkCode::new(n, m, p).unwrap();
    let est = estimate_error(&code, 5_000, SEED, &MessageSampler::Uniform).unwrap();
    assert!(est.p_hat > 0.9, "above-capacity error only {}", est.p_hat);
}

#[test]
fn sk_expected_power_audit() {
    let code = SkCode::new(10, 8, 1.0).unwrap();
    let est = estimate_power(&code, 20_000, SEED, &MessageSampler::Uniform).unwrap();
    assert!(
        est[0].mean <= 1.0 + 3.0 * est[0].standard_error(),
        "mean power {} exceeds budget",
        est[0].mean
    );
    // Two-sided sanity: the bookkeeping power is exactly P.
    assert!((est[0].mean - 1.0).abs() <= 4.0 * est[0].standard_error().max(1e-3));
}

#[test]
fn sk_rejects_bad_parameters() {
    assert!(matches!(SkCode::new(1, 2, 1.0), Err(Error::Parameter(_))));
    assert!(matches!(SkCode::new(10, 0, 1.0), Err(Error::Parameter(_))));
    assert!(matches!(SkCode::new(10, 2, 0.0), Err(Error::Parameter(_))));
    assert!(SkCode::new(10, 1 << 100, 1.0).is_ok());
    assert!(SkCode::new(10, (1 << 100) + 1, 1.0).is_err());
}

// ---------------------------------------------------------------------------
// Phase schedule
// ---------------------------------------------------------------------------

#[test]
fn phase_schedule_chain_holds_where_defined() {
    for l in 1..=4u32 {
        let mut checked = 0;
        let mut n = 2u64;
        while n <= 2_000_000 {
            match PhaseSchedule::new(l, n, 1.0, 0.1) {
                Ok(s) => {
                    assert!(s.chain_holds());
                    assert_eq!(s.delta_n, l as f64 / n as f64);
                    assert_eq!(s.n1, ((1.0 - s.delta_n) * n as f64).floor() as u64 + 1);
                    let count = (s.n - s.n1 + 1) as usize;
                    assert!(count == l as usize || count == l as usize + 1);
                    checked += 1;
                }
                // Chain not yet ordered / thresholds outside the log domain.
                Err(Error::BlocklengthTooSmall(_)) | Err(Error::NestedLogDomain { .. }) => {}
                Err(e) => panic!("unexpected error at (L={l}, n={n}): {e:?}"),
            }
            n = (n * 3 / 2).max(n + 1);
        }
        if l <= 2 {
            assert!(checked > 0, "no valid schedule found for L={l}");
        } else {
            // Three or more phases need astronomically large n.
            assert_eq!(checked, 0, "L={l} valid at desk-scale n");
            assert_eq!(min_blocklength_for_phases(l), u64::MAX);
        }
    }
}

#[test]
fn phase_schedule_rejects_small_blocklengths() {
    assert!(matches!(
        PhaseSchedule::new(2, 10, 1.0, 0.1),
        Err(Error::BlocklengthTooSmall(_)) | Err(Error::NestedLogDomain { .. })
    ));
}

#[test]
fn min_blocklength_goldens() {
    // exp_(2)(1) = e^e ~ 15.15; exp_(3)(1) = e^(e^e) ~ 3.81e6.
    assert_eq!(min_blocklength_for_phases(1), 16);
    let l2 = min_blocklength_for_phases(2);
    assert!((3_814_279..=3_814_280).contains(&l2), "{l2}");
    assert_eq!(min_blocklength_for_phases(3), u64::MAX);
}

// ---------------------------------------------------------------------------
// Split-message plan and power-control wrapper
// ---------------------------------------------------------------------------

#[test]
fn split_plan_matches_direct_formula_evaluation() {
    let (n, p, eps) = (100usize, 1.0f64, 0.2f64);
    let plan = SplitMessagePlan::new(n, p, eps, 1).unwrap();
    // Independent oracle evaluation of the two sizing expressions.
    let nf = n as f64;
    let m_bar = (1.0 + p / (1.0 - eps + 1.0 / nf)).powf(nf / 2.0);
    let m_total = (1.0 - 1.0 / nf) / (1.0 - eps) * m_bar;
    assert!((plan.m_bar_n_real - m_bar).abs() <= 1e-9 * m_bar);
    assert!((plan.m_n_real - m_total).abs() <= 1e-9 * m_total);
    assert_eq!(plan.m_bar_n, m_bar.round() as u128);
    assert_eq!(plan.m_n, m_total.round() as u128);
    assert_eq!(plan.eps_n, 0.01);
    assert!((plan.inner_power - p / 0.81).abs() < 1e-15);
    // Ratio identity M_bar / M = (1 - eps)/(1 - eps_n).
    let ratio = plan.m_bar_n_real / plan.m_n_real;
    assert!((ratio - (1.0 - eps) / (1.0 - plan.eps_n)).abs() < 1e-12);
}

#[test]
fn split_plan_preconditions() {
    // eps_n = 1/n must fall below eps.
    assert!(matches!(
        SplitMessagePlan::new(100, 1.0, 0.005, 1),
        Err(Error::BlocklengthTooSmall(_))
    ));
    assert!(matches!(
        SplitMessagePlan::new(100, 1.0, 0.0, 1),
        Err(Error::Parameter(_))
    ));
    // Overflowing message count.
    assert!(matches!(
        SplitMessagePlan::new(100_000, 10.0, 0.2, 1),
        Err(Error::Parameter(_))
    ));
}

#[test]
fn power_identity_grid() {
    for n in [50u64, 100, 1_000, 10_000] {
        for eps in [0.05, 0.2, 0.5, 0.9] {
            for p in [0.5, 1.0, 10.0] {
                assert!(power_identity_holds(n, p, eps, 1.0 / n as f64));
            }
        }
    }
}

fn stub_factory(error_prob: f64) -> impl Fn(usize, u128, f64) -> feedbacklab::Result<Arc<dyn FeedbackCode>> {
    move |n, m, power| {
        Ok(Arc::new(FixedErrorCode {
            n,
            m,
            power,
            error_prob,
        }))
    }
}

#[test]
fn wrapper_splits_error_mass_as_designed() {
    let (n, p, eps) = (100usize, 1.0, 0.2);
    let factory = stub_factory(0.01);
    let (code, plan) = build_power_controlled_code(n, p, eps, 1, &factory).unwrap();
    assert_eq!(code.message_counts(), vec![plan.m_n]);

    let trials = 20_000;
    let frac_a1 = plan.m_bar_n as f64 / plan.m_n as f64;
    // Composite design error: eps_n on A1 plus full mass on A2 = eps.
    let design = plan.eps_n * frac_a1 + (1.0 - frac_a1);
    assert!((design - eps).abs() < 1e-3);

    let err = estimate_error(&code, trials, SEED, &MessageSampler::Uniform).unwrap();
    let se = binomial_se(design, trials);
    assert!(err.p_hat <= eps + 3.0 * se, "error {} too high", err.p_hat);
    assert!(err.p_hat >= 0.18, "abort mass missing: {}", err.p_hat);

    // Abort flag frequency tracks the A2 mass.
    let aborts = estimate_event(&code, trials, SEED, &MessageSampler::Uniform, |tr| {
        tr.flags.aborted == Some(true)
    })
    .unwrap();
    assert!((aborts.p_hat - (1.0 - frac_a1)).abs() <= 3.0 * binomial_se(1.0 - frac_a1, trials));

    // Expected power stays within the outer budget.
    let power = estimate_power(&code, trials, SEED, &MessageSampler::Uniform).unwrap();
    assert!(
        power[0].mean <= p + 3.0 * power[0].standard_error(),
        "power {} exceeds budget",
        power[0].mean
    );
}

#[test]
fn wrapper_validates_the_inner_code() {
    let bad_len = |_: usize, m: u128, power: f64| -> feedbacklab::Result<Arc<dyn FeedbackCode>> {
        Ok(Arc::new(FixedErrorCode {
            n: 7,
            m,
            power,
            error_prob: 0.0,
        }))
    };
    assert!(build_power_controlled_code(100, 1.0, 0.2, 1, &bad_len).is_err());
    let bad_count = |n: usize, _: u128, power: f64| -> feedbacklab::Result<Arc<dyn FeedbackCode>> {
        Ok(Arc::new(FixedErrorCode {
            n,
            m: 3,
            power,
            error_prob: 0.0,
        }))
    };
    assert!(build_power_controlled_code(100, 1.0, 0.2, 1, &bad_count).is_err());
}

#[test]
fn relabeling_spreads_the_abort_set_uniformly() {
    let factory = stub_factory(0.0);
    let (code, plan) = build_power_controlled_code(60, 1.0, 0.3, 1, &factory).unwrap();
    let code = code.with_relabeling();
    // The worst-case message (always in A2 without relabeling) now aborts
    // only with probability 1 - m_bar/m.
    let sampler = MessageSampler::Fixed(vec![plan.m_n]);
    let trials = 20_000;
    let aborts = estimate_event(&code, trials, SEED, &sampler, |tr| {
        tr.flags.aborted == Some(true)
    })
    .unwrap();
    let expect = 1.0 - plan.m_bar_n as f64 / plan.m_n as f64;
    assert!(
        (aborts.p_hat - expect).abs() <= 3.0 * binomial_se(expect, trials),
        "abort rate {} vs {}",
        aborts.p_hat,
        expect
    );
    // Non-aborting relabeled trials decode correctly (zero-error stub).
    let err = estimate_error(&code, trials, SEED, &sampler).unwrap();
    assert!((err.p_hat - expect).abs() <= 3.0 * binomial_se(expect, trials));
}

// ---------------------------------------------------------------------------
// Truncation transform
// ---------------------------------------------------------------------------

#[test]
fn truncation_with_huge_budget_is_transparent() {
    let inner = Arc::new(SkCode::new(12, 8, 1.0).unwrap());
    let wrapped = truncate_to_peak_power(inner.clone(), 1e12).unwrap();
    for t in 0..50 {
        let w = t as u128 % 8 + 1;
        let a = run_trial(inner.as_ref(), &[w], SEED, t).unwrap();
        let b = run_trial(&wrapped, &[w], SEED, t).unwrap();
        assert_eq!(a.x, b.x);
        assert_eq!(a.y, b.y);
        assert_eq!(a.decoded, b.decoded);
        assert_eq!(b.flags.truncated, Some(false));
    }
}

#[test]
fn truncation_with_zero_budget_silences_the_transmitter() {
    use feedbacklab::channel::probe::ConstantCode;
    let inner = Arc::new(ConstantCode { n: 8, c: 2.0 });
    let wrapped = truncate_to_peak_power(inner, 0.0).unwrap();
    let tr = run_trial(&wrapped, &[1], SEED, 0).unwrap();
    // Prefix test passes only at k=0 (prefix energy 0 <= 0), so exactly
    // the first symbol is admitted.
    assert_eq!(tr.x[0][0], 2.0);
    assert!(tr.x[0][1..].iter().all(|&v| v == 0.0));
    assert_eq!(tr.flags.truncated, Some(true));
}

#[test]
fn truncation_rejects_negative_budget() {
    let inner = Arc::new(SkCode::new(4, 2, 1.0).unwrap());
    assert!(truncate_to_peak_power(inner, -1.0).is_err());
}

/// Replays the inner SK session against a transcript's outputs and checks
/// the prefix-energy indicator law bit-exactly.
fn assert_prefix_law(inner: &SkCode, tr: &Transcript, budget: f64) {
    let mut session = inner
        .new_session(&tr.messages, ChaCha12Rng::seed_from_u64(0))
        .unwrap();
    let mut prefix = 0.0f64;
    let mut exceeded = false;
    for k in 0..tr.y.len() {
        let f = session.encode(0, k, &tr.y[..k]);
        let admitted = prefix <= budget;
        if !admitted {
            exceeded = true;
        }
        prefix += f * f;
        let expected = if admitted { f } else { 0.0 };
        assert_eq!(
            tr.x[0][k], expected,
            "indicator law broken at k={k} (prefix {prefix}, budget {budget})"
        );
    }
    assert_eq!(tr.flags.truncated, Some(exceeded));
    if !exceeded {
        // Every symbol admitted: realized energy equals intended energy.
        assert!((tr.energy[0] - prefix).abs() <= 1e-12 * prefix.max(1.0));
    }
}

#[test]
fn truncation_prefix_law_holds_on_a_triggering_budget() {
    // Budget equal to the mean total energy: roughly half the trials
    // cross it, exercising both branches of the indicator.
    let (n, m, p) = (100usize, 64u128, 1.0f64);
    let inner = Arc::new(SkCode::new(n, m, p).unwrap());
    let budget = n as f64 * p;
    let wrapped = truncate_to_peak_power(inner.clone(), budget).unwrap();
    let transcripts = collect_transcripts(&wrapped, 2_000, SEED, &MessageSampler::Uniform).unwrap();
    let mut triggered = 0;
    for tr in &transcripts {
        assert_prefix_law(&inner, tr, budget);
        if tr.flags.truncated == Some(true) {
            triggered += 1;
        }
    }
    assert!(
        triggered > 100 && triggered < 1_900,
        "budget did not separate the trials: {triggered}/2000"
    );
}

#[test]
fn truncation_exceed_probability_obeys_markov() {
    // Budget = n P / a implies Pr[exceed] <= a by Markov's inequality on
    // the expected total energy n P.
    let (n, m, p) = (50usize, 32u128, 1.0f64);
    let inner = Arc::new(SkCode::new(n, m, p).unwrap());
    for a in [0.5, 0.8] {
        let budget = n as f64 * p / a;
        let wrapped = truncate_to_peak_power(inner.clone(), budget).unwrap();
        let trials = 20_000;
        let est = estimate_event(&wrapped, trials, SEED, &MessageSampler::Uniform, |tr| {
            tr.flags.truncated == Some(true)
        })
        .unwrap();
        assert!(
            est.p_hat <= a + 3.0 * binomial_se(a, trials),
            "Markov ceiling {a} violated: {}",
            est.p_hat
        );
    }
}
