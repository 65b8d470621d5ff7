use crate::error::{Error, Result};
use crate::prior::{argmax, PriorModel, TabularExactPrior};
use crate::token::{Codebook, ConfidenceKind, ConfidenceVector, TokenSeq};

/// Scores every slot of a fully sampled sequence in `[0, 1]`.
pub trait CriticFn: Send + Sync {
    fn score(&self, seq: &TokenSeq) -> Result<ConfidenceVector>;
}

/// Oracle critic: the exact probability of each sampled token given all the
/// other tokens, read off the ground-truth joint.
pub struct ExactConditionalCritic<'a> {
    joint: &'a TabularExactPrior,
}

impl<'a> ExactConditionalCritic<'a> {
    pub fn new(joint: &'a TabularExactPrior) -> Self {
        Self { joint }
    }
}

impl CriticFn for ExactConditionalCritic<'_> {
    fn score(&self, seq: &TokenSeq) -> Result<ConfidenceVector> {
        let tokens = seq.tokens()?;
        let scores: Vec<f64> = (0..seq.len())
            .map(|i| {
                self.joint
                    .conditional_or_marginal(seq, i)
                    .map(|dist| dist[tokens[i]])
            })
            .collect::<Result<_>>()?;
        Ok(ConfidenceVector::from_values(
            &scores,
            ConfidenceKind::ExternalCritic,
        ))
    }
}

/// Critic built from a prior's single-slot-masked probabilities, for when no
/// ground truth joint is available.
pub struct PriorConditionalCritic<'a, P: ?Sized> {
    prior: &'a P,
}

impl<'a, P: PriorModel + ?Sized> PriorConditionalCritic<'a, P> {
    pub fn new(prior: &'a P) -> Self {
        Self { prior }
    }
}

impl<P: PriorModel + ?Sized> CriticFn for PriorConditionalCritic<'_, P> {
    fn score(&self, seq: &TokenSeq) -> Result<ConfidenceVector> {
        let tokens = seq.tokens()?;
        let variants: Vec<TokenSeq> = (0..seq.len()).map(|j| seq.with_masked(j)).collect();
        let preds = self.prior.predict_batch(&variants)?;
        let scores: Vec<f64> = preds
            .iter()
            .enumerate()
            .map(|(j, p)| p[j].as_ref().map_or(0.0, |dist| dist[tokens[j]]))
            .collect();
        Ok(ConfidenceVector::from_values(
            &scores,
            ConfidenceKind::ExternalCritic,
        ))
    }
}

/// Scores every slot with the same value.
pub struct ConstantCritic(pub f64);

impl CriticFn for ConstantCritic {
    fn score(&self, seq: &TokenSeq) -> Result<ConfidenceVector> {
        Ok(ConfidenceVector::from_values(
            &vec![self.0; seq.len()],
            ConfidenceKind::ExternalCritic,
        ))
    }
}

/// Numerically stable softmax.
pub fn softmax(values: &[f64]) -> Vec<f64> {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = values.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Self-critic confidence of a MASK-free sequence.
///
/// For each slot `j`, masks only `j`, takes the prior's most likely token
/// there and sets `d_j = −‖z(s_j) − z(argmax_j)‖²` in codebook space. The
/// confidence is `softmax(d)` over all slots. Costs one prediction per slot.
pub fn self_critic_confidence<P: PriorModel + ?Sized>(
    prior: &P,
    cb: &Codebook,
    seq: &TokenSeq,
) -> Result<(ConfidenceVector, Vec<f64>)> {
    let tokens = seq.tokens()?;
    if cb.size() != prior.vocab_size() {
        return Err(Error::usage(format!(
            "codebook has {} rows but prior vocabulary is {}",
            cb.size(),
            prior.vocab_size()
        )));
    }
    let variants: Vec<TokenSeq> = (0..seq.len()).map(|j| seq.with_masked(j)).collect();
    let preds = prior.predict_batch(&variants)?;
    let d: Vec<f64> = preds
        .iter()
        .enumerate()
        .map(|(j, p)| {
            let dist = p[j].as_ref().expect("masked slot has a prediction");
            cb.sq_dist(tokens[j], argmax(dist)).map(|sq| -sq)
        })
        .collect::<Result<_>>()?;
    let conf = ConfidenceVector::from_values(&softmax(&d), ConfidenceKind::SelfCritic);
    Ok((conf, d))
}
