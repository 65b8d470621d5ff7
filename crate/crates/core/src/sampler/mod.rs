//! Masked iterative samplers.
//!
//! Four procedures share one vocabulary of masked sequences, confidence
//! vectors and schedules:
//!
//! * [`naive_decode`]: confidence-ordered iterative decoding. Kept slots are
//!   pinned and never revisited.
//! * [`token_critic_decode`]: the same loop with an external critic scoring
//!   every slot of the fully sampled sequence. Nothing is pinned.
//! * [`critical_reverse`]: walks the step index back from `T`, masking the
//!   least realistic slots under the self-critic until the revealed tokens
//!   agree with the prior's preferred tokens in latent space.
//! * [`critical_resample`]: re-decodes the slots masked by the reverse pass,
//!   ranking by self-critic confidence without pinning.
//!
//! [`ess_sample`] chains naive decoding, reverse sampling and resampling, and
//! records the realism of the token set after every step.

mod critic;
mod naive;
mod pipeline;
mod resample;
mod reverse;
mod trace;

pub use critic::{
    self_critic_confidence, softmax, ConstantCritic, CriticFn, ExactConditionalCritic,
    PriorConditionalCritic,
};
pub use naive::{naive_decode, naive_decode_from, token_critic_decode, StepObserver};
pub use pipeline::{
    chain_rng, ess_sample, run_chains, sample_chain, ChainOutput, EssSample, Method,
    SamplingContext,
};
pub use resample::{critical_resample, Stage3};
pub use reverse::{critical_reverse, ReverseOutcome};
pub use trace::{Phase, RealismTrace, TraceEntry};

use crate::error::{Error, Result};
use crate::schedule::NoiseSchedule;

/// How critical reverse sampling decides where to stop.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StopRule {
    /// Stop at the first step whose latent mismatch is at most `tau`.
    Threshold(f64),
    /// Stop once the moving average of successive mismatch ratios
    /// (previous step over current step) drops to 1 or below.
    MovingAverageRatio { window: usize },
}

impl Default for StopRule {
    fn default() -> Self {
        StopRule::MovingAverageRatio { window: 2 }
    }
}

/// Threshold used when the fixed-threshold stop rule is enabled without an
/// explicit value.
pub const DEFAULT_TAU: f64 = 0.1;

#[derive(Clone, Debug, PartialEq)]
pub struct SamplerConfig {
    /// Forward decoding steps `T`.
    pub steps: usize,
    /// Last step of critical resampling `T*`. Defaults to `T`.
    pub resample_end: Option<usize>,
    pub stop: StopRule,
    /// Base magnitude of the Gumbel confidence noise.
    pub noise_base: f64,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            steps: 10,
            resample_end: None,
            stop: StopRule::default(),
            noise_base: 1.0,
            seed: 0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::usage("sampler needs T >= 1"));
        }
        if self.t_star() < self.steps {
            return Err(Error::usage(format!(
                "resampling end T* = {} must be at least T = {}",
                self.t_star(),
                self.steps
            )));
        }
        if !(self.noise_base.is_finite() && self.noise_base >= 0.0) {
            return Err(Error::usage("noise base must be finite and >= 0"));
        }
        match self.stop {
            StopRule::Threshold(tau) if !(tau.is_finite() && tau >= 0.0) => Err(Error::usage(
                format!("tau must be finite and >= 0, got {tau}"),
            )),
            StopRule::MovingAverageRatio { window: 0 } => {
                Err(Error::usage("ratio window must be at least 1"))
            }
            _ => Ok(()),
        }
    }

    /// `T*`, falling back to `T`.
    pub fn t_star(&self) -> usize {
        self.resample_end.unwrap_or(self.steps)
    }

    pub fn noise(&self) -> Result<NoiseSchedule> {
        NoiseSchedule::new(self.noise_base, self.steps)
    }
}
