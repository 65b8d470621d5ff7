//! Cosine masking schedule and the decaying confidence-noise schedule.

use rand::Rng;
use rand_distr::{Distribution, Gumbel};

use crate::error::{Error, Result};
use crate::token::{ConfidenceVector, Score};

/// Absorbs rounding error in `N·cos(..)` before flooring, so that values that
/// are integral in exact arithmetic do not drop by one.
const FLOOR_SLACK: f64 = 1e-9;

/// Number of masked slots after each decoding step: `counts[t]` for
/// `t = 0..=T`, with `counts[0] = N` and `counts[T] = 0`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MaskSchedule {
    counts: Vec<usize>,
}

impl MaskSchedule {
    /// `counts[t] = floor(N · cos(π/2 · t/T))`.
    pub fn cosine(n: usize, steps: usize) -> Result<Self> {
        if n == 0 || steps == 0 {
            return Err(Error::usage(format!(
                "cosine schedule needs N >= 1 and T >= 1 (got N={n}, T={steps})"
            )));
        }
        let counts = (0..=steps)
            .map(|t| {
                if t == steps {
                    return 0;
                }
                let ratio = (std::f64::consts::FRAC_PI_2 * t as f64 / steps as f64).cos();
                ((n as f64 * ratio + FLOOR_SLACK).floor() as usize).min(n)
            })
            .collect();
        Ok(Self { counts })
    }

    /// Total number of decoding steps `T`.
    pub fn steps(&self) -> usize {
        self.counts.len() - 1
    }

    /// Sequence length `N`.
    pub fn len(&self) -> usize {
        self.counts[0]
    }

    pub fn is_empty(&self) -> bool {
        self.counts[0] == 0
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    /// Masked slots remaining after step `t`.
    pub fn masked_at(&self, t: usize) -> usize {
        self.counts[t]
    }

    /// Slots that are kept (unmasked) at step `t`.
    pub fn kept_at(&self, t: usize) -> usize {
        self.len() - self.counts[t]
    }
}

/// Gumbel noise added to confidence scores, scaled by
/// `base · (1 − (t+1)/T)` at decoding iteration `t ∈ [0, T)`.
///
/// The magnitude is non-increasing and reaches zero at the last iteration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseSchedule {
    base: f64,
    steps: usize,
}

impl NoiseSchedule {
    pub fn new(base: f64, steps: usize) -> Result<Self> {
        if !(base.is_finite() && base >= 0.0) {
            return Err(Error::usage(format!(
                "noise base must be finite and >= 0, got {base}"
            )));
        }
        if steps == 0 {
            return Err(Error::usage("noise schedule needs at least one step"));
        }
        Ok(Self { base, steps })
    }

    pub fn base(&self) -> f64 {
        self.base
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Same base magnitude, re-indexed over a different number of steps.
    pub fn reindexed(&self, steps: usize) -> Result<Self> {
        Self::new(self.base, steps)
    }

    pub fn magnitude(&self, t: usize) -> f64 {
        let decay = 1.0 - (t + 1) as f64 / self.steps as f64;
        self.base * decay.max(0.0)
    }
}

/// Adds independent scaled Gumbel(0, 1) draws to every non-PINNED score.
///
/// Draws nothing when the step's magnitude is zero, so the input comes back
/// unchanged at the final step.
pub fn perturb_confidence<R: Rng + ?Sized>(
    conf: &ConfidenceVector,
    step: usize,
    sched: &NoiseSchedule,
    rng: &mut R,
) -> ConfidenceVector {
    let magnitude = sched.magnitude(step);
    let mut out = conf.clone();
    if magnitude == 0.0 {
        return out;
    }
    let gumbel = Gumbel::new(0.0, 1.0).expect("unit Gumbel is valid");
    for score in out.scores_mut() {
        if let Score::Value(v) = score {
            *v += magnitude * gumbel.sample(rng);
        }
    }
    out
}
