//! Small instrumentation codes: deterministic or randomized probes used
//! by the test and acceptance suites to exercise the channel harness
//! with known-by-construction behavior.

use super::{CodeSession, FeedbackCode, SessionFlags};
use crate::error::Result;
use rand::Rng;
use rand_chacha::ChaCha12Rng;

/// Sends zero on every use; decodes to message 1 for every user.
pub struct ZeroCode {
    pub n: usize,
    pub users: usize,
}

impl FeedbackCode for ZeroCode {
    fn blocklength(&self) -> usize {
        self.n
    }
    fn num_users(&self) -> usize {
        self.users
    }
    fn message_counts(&self) -> Vec<u128> {
        vec![1; self.users]
    }
    fn power_budgets(&self) -> Vec<f64> {
        vec![0.0; self.users]
    }
    fn new_session(&self, _messages: &[u128], _rng: ChaCha12Rng) -> Result<Box<dyn CodeSession>> {
        struct S {
            users: usize,
        }
        impl CodeSession for S {
            fn encode(&mut self, _user: usize, _k: usize, _fb: &[f64]) -> f64 {
                0.0
            }
            fn decode(&mut self, _y: &[f64]) -> Vec<u128> {
                vec![1; self.users]
            }
        }
        Ok(Box::new(S { users: self.users }))
    }
}

/// Single-user code sending a constant `c`; decodes to message 1.
pub struct ConstantCode {
    pub n: usize,
    pub c: f64,
}

impl FeedbackCode for ConstantCode {
    fn blocklength(&self) -> usize {
        self.n
    }
    fn num_users(&self) -> usize {
        1
    }
    fn message_counts(&self) -> Vec<u128> {
        vec![1]
    }
    fn power_budgets(&self) -> Vec<f64> {
        vec![self.c * self.c]
    }
    fn new_session(&self, _messages: &[u128], _rng: ChaCha12Rng) -> Result<Box<dyn CodeSession>> {
        struct S {
            c: f64,
        }
        impl CodeSession for S {
            fn encode(&mut self, _user: usize, _k: usize, _fb: &[f64]) -> f64 {
                self.c
            }
            fn decode(&mut self, _y: &[f64]) -> Vec<u128> {
                vec![1]
            }
        }
        Ok(Box::new(S { c: self.c }))
    }
}

/// Decoder always returns the sent messages (zero-error stub).
pub struct EchoCode {
    pub n: usize,
    pub users: usize,
    pub m: u128,
}

impl FeedbackCode for EchoCode {
    fn blocklength(&self) -> usize {
        self.n
    }
    fn num_users(&self) -> usize {
        self.users
    }
    fn message_counts(&self) -> Vec<u128> {
        vec![self.m; self.users]
    }
    fn power_budgets(&self) -> Vec<f64> {
        vec![0.0; self.users]
    }
    fn new_session(&self, messages: &[u128], _rng: ChaCha12Rng) -> Result<Box<dyn CodeSession>> {
        struct S {
            messages: Vec<u128>,
        }
        impl CodeSession for S {
            fn encode(&mut self, _user: usize, _k: usize, _fb: &[f64]) -> f64 {
                0.0
            }
            fn decode(&mut self, _y: &[f64]) -> Vec<u128> {
                self.messages.clone()
            }
        }
        Ok(Box::new(S {
            messages: messages.to_vec(),
        }))
    }
}

/// Single-user decoder that always outputs message 1 regardless of input.
pub struct FixedDecoderCode {
    pub n: usize,
    pub m: u128,
}

impl FeedbackCode for FixedDecoderCode {
    fn blocklength(&self) -> usize {
        self.n
    }
    fn num_users(&self) -> usize {
        1
    }
    fn message_counts(&self) -> Vec<u128> {
        vec![self.m]
    }
    fn power_budgets(&self) -> Vec<f64> {
        vec![0.0]
    }
    fn new_session(&self, _messages: &[u128], _rng: ChaCha12Rng) -> Result<Box<dyn CodeSession>> {
        struct S;
        impl CodeSession for S {
            fn encode(&mut self, _user: usize, _k: usize, _fb: &[f64]) -> f64 {
                0.0
            }
            fn decode(&mut self, _y: &[f64]) -> Vec<u128> {
                vec![1]
            }
        }
        Ok(Box::new(S))
    }
}

/// Two-user probe with perfectly anticorrelated inputs
/// `x1_k = U_k`, `x2_k = -U_k` for standard-normal common randomness.
pub struct AntiCorrelatedProbe {
    pub n: usize,
}

impl FeedbackCode for AntiCorrelatedProbe {
    fn blocklength(&self) -> usize {
        self.n
    }
    fn num_users(&self) -> usize {
        2
    }
    fn message_counts(&self) -> Vec<u128> {
        vec![1, 1]
    }
    fn power_budgets(&self) -> Vec<f64> {
        vec![1.0, 1.0]
    }
    fn new_session(&self, _messages: &[u128], rng: ChaCha12Rng) -> Result<Box<dyn CodeSession>> {
        struct S {
            gauss: super::GaussianStream,
            current: f64,
        }
        impl CodeSession for S {
            fn encode(&mut self, user: usize, _k: usize, _fb: &[f64]) -> f64 {
                if user == 0 {
                    self.current = self.gauss.next_normal();
                    self.current
                } else {
                    -self.current
                }
            }
            fn decode(&mut self, _y: &[f64]) -> Vec<u128> {
                vec![1, 1]
            }
        }
        Ok(Box::new(S {
            gauss: super::GaussianStream::new(rng),
            current: 0.0,
        }))
    }
}

/// Single-user stub transmitting random signs at a fixed power whose
/// decoder errs with an exactly known probability (used to stand in for
/// an inner code with a contracted error target).
pub struct FixedErrorCode {
    pub n: usize,
    pub m: u128,
    pub power: f64,
    pub error_prob: f64,
}

impl FeedbackCode for FixedErrorCode {
    fn blocklength(&self) -> usize {
        self.n
    }
    fn num_users(&self) -> usize {
        1
    }
    fn message_counts(&self) -> Vec<u128> {
        vec![self.m]
    }
    fn power_budgets(&self) -> Vec<f64> {
        vec![self.power]
    }
    fn new_session(&self, messages: &[u128], rng: ChaCha12Rng) -> Result<Box<dyn CodeSession>> {
        struct S {
            message: u128,
            m: u128,
            amp: f64,
            error_prob: f64,
            rng: ChaCha12Rng,
        }
        impl CodeSession for S {
            fn encode(&mut self, _user: usize, _k: usize, _fb: &[f64]) -> f64 {
                if self.rng.gen::<bool>() {
                    self.amp
                } else {
                    -self.amp
                }
            }
            fn decode(&mut self, _y: &[f64]) -> Vec<u128> {
                if self.rng.gen::<f64>() < self.error_prob {
                    vec![self.message % self.m + 1]
                } else {
                    vec![self.message]
                }
            }
        }
        Ok(Box::new(S {
            message: messages[0],
            m: self.m,
            amp: self.power.sqrt(),
            error_prob: self.error_prob,
            rng,
        }))
    }
}

/// Single-user probe whose input at time `k` is a deterministic nonlinear
/// function of the message and all past feedback, used by the causality
/// fuzz test (perturbing future outputs must not change past inputs).
pub struct FeedbackProbe {
    pub n: usize,
    pub m: u128,
}

impl FeedbackCode for FeedbackProbe {
    fn blocklength(&self) -> usize {
        self.n
    }
    fn num_users(&self) -> usize {
        1
    }
    fn message_counts(&self) -> Vec<u128> {
        vec![self.m]
    }
    fn power_budgets(&self) -> Vec<f64> {
        vec![1.0]
    }
    fn new_session(&self, messages: &[u128], _rng: ChaCha12Rng) -> Result<Box<dyn CodeSession>> {
        struct S {
            w: f64,
        }
        impl CodeSession for S {
            fn encode(&mut self, _user: usize, k: usize, fb: &[f64]) -> f64 {
                let mut acc = self.w;
                for (i, &v) in fb.iter().enumerate() {
                    acc = (acc + (v * (i as f64 + 1.3)).sin()).sin() * 1.7;
                }
                (acc + k as f64).sin()
            }
            fn decode(&mut self, _y: &[f64]) -> Vec<u128> {
                vec![1]
            }
        }
        Ok(Box::new(S {
            w: messages[0] as f64,
        }))
    }
}

/// Session wrapper used in tests: re-exported so probe sessions can flag
/// diagnostics if needed.
pub type Flags = SessionFlags;
