use rand::Rng;

use super::critic::self_critic_confidence;
use super::naive::naive_decode_from;
use super::trace::{Phase, RealismTrace};
use super::SamplerConfig;
use crate::error::{Error, Result};
use crate::prior::{sample_masked, PriorModel};
use crate::schedule::{perturb_confidence, MaskSchedule};
use crate::token::{apply_mask, top_k_mask, Codebook, TokenSeq};

/// Confidence source for the stage that re-decodes the reverse pass's masked
/// slots.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage3 {
    /// Critical resampling: self-critic confidence, nothing pinned.
    SelfCritic,
    /// Plain iterative decoding: prior-probability confidence, kept slots
    /// pinned.
    PriorProb,
}

impl Stage3 {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage3::SelfCritic => "self-critic",
            Stage3::PriorProb => "prior-prob",
        }
    }
}

/// Re-decodes the MASK slots of `start` from step `t_star` up to `T*`.
///
/// The masking schedule is re-derived as a cosine schedule over the
/// `T* − t*` remaining steps, starting from the actual number of MASK slots,
/// and the noise schedule is re-indexed to reach zero at `T*`. With
/// [`Stage3::SelfCritic`] every iteration samples the MASK slots, scores the
/// whole sequence with the self-critic and keeps the top slots; any slot,
/// including ones that survived the reverse pass, may be re-masked.
#[allow(clippy::too_many_arguments)]
pub fn critical_resample<P, R>(
    prior: &P,
    cb: &Codebook,
    t_star: usize,
    start: &TokenSeq,
    cfg: &SamplerConfig,
    stage3: Stage3,
    rng: &mut R,
    mut trace: Option<&mut RealismTrace>,
) -> Result<TokenSeq>
where
    P: PriorModel + ?Sized,
    R: Rng + ?Sized,
{
    cfg.validate()?;
    let masked = start.mask_count();
    if masked == 0 {
        return Ok(start.clone());
    }
    let end = cfg.t_star();
    if t_star >= end {
        return Err(Error::usage(format!(
            "resampling needs t* < T*, got t* = {t_star}, T* = {end}"
        )));
    }
    let steps = end - t_star;
    let sched = MaskSchedule::cosine(masked, steps)?;
    let noise = cfg.noise()?.reindexed(steps)?;

    if stage3 == Stage3::PriorProb {
        let mut obs = |k: usize, sampled: &TokenSeq, _: &TokenSeq| -> Result<()> {
            if let Some(tr) = trace.as_mut() {
                let (_, d) = self_critic_confidence(prior, cb, sampled)?;
                tr.push(Phase::Resample, t_star + k + 1, d.iter().sum());
            }
            Ok(())
        };
        let (out, _) =
            naive_decode_from(prior, start.clone(), &sched, &noise, rng, Some(&mut obs))?;
        return Ok(out);
    }

    let n = start.len();
    let mut current = start.clone();
    for k in 0..steps {
        let sampled = sample_masked(prior, &current, rng)?;
        let keep = n - sched.masked_at(k + 1);
        if keep == n && trace.is_none() {
            current = sampled;
            continue;
        }
        let (conf, d) = self_critic_confidence(prior, cb, &sampled)?;
        if let Some(tr) = trace.as_mut() {
            tr.push(Phase::Resample, t_star + k + 1, d.iter().sum());
        }
        let noisy = perturb_confidence(&conf, k, &noise, rng);
        current = apply_mask(&sampled, &top_k_mask(&noisy, keep)?)?;
    }
    Ok(current)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prior::TabularExactPrior;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn binary_codebook() -> Codebook {
        Codebook::new(vec![vec![0.0], vec![1.0]]).unwrap()
    }

    #[test]
    fn nothing_masked_returns_input() {
        let joint = TabularExactPrior::from_fn(2, 3, |_| 1.0).unwrap();
        let s = TokenSeq::from_tokens(&[1, 0, 1]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let cfg = SamplerConfig::default();
        for stage3 in [Stage3::SelfCritic, Stage3::PriorProb] {
            let out = critical_resample(
                &joint,
                &binary_codebook(),
                10,
                &s,
                &cfg,
                stage3,
                &mut rng,
                None,
            )
            .unwrap();
            assert_eq!(out, s);
        }
    }

    #[test]
    fn point_mass_restores_masked_token() {
        let joint = TabularExactPrior::point_mass(2, &[0, 1, 1, 0]).unwrap();
        let start = TokenSeq::new(vec![Some(0), Some(1), None, Some(0)]);
        let cfg = SamplerConfig::default();
        for seed in 0..10 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for stage3 in [Stage3::SelfCritic, Stage3::PriorProb] {
                let out = critical_resample(
                    &joint,
                    &binary_codebook(),
                    9,
                    &start,
                    &cfg,
                    stage3,
                    &mut rng,
                    None,
                )
                .unwrap();
                assert_eq!(out, TokenSeq::from_tokens(&[0, 1, 1, 0]));
            }
        }
    }

    #[test]
    fn trace_runs_from_t_star_to_end() {
        let joint = TabularExactPrior::from_fn(2, 5, |s| 1.0 + s[0] as f64).unwrap();
        let start = TokenSeq::new(vec![None, Some(1), None, None, Some(0)]);
        let cfg = SamplerConfig {
            resample_end: Some(12),
            ..Default::default()
        };
        for stage3 in [Stage3::SelfCritic, Stage3::PriorProb] {
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            let mut trace = RealismTrace::new();
            let out = critical_resample(
                &joint,
                &binary_codebook(),
                7,
                &start,
                &cfg,
                stage3,
                &mut rng,
                Some(&mut trace),
            )
            .unwrap();
            assert!(out.is_complete());
            let steps: Vec<usize> = trace.entries().iter().map(|e| e.step).collect();
            assert_eq!(steps, (8..=12).collect::<Vec<_>>());
            assert!(trace.entries().iter().all(|e| e.realism <= 0.0));
        }
    }

    #[test]
    fn requires_t_star_below_end() {
        let joint = TabularExactPrior::from_fn(2, 2, |_| 1.0).unwrap();
        let start = TokenSeq::new(vec![None, Some(1)]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let err = critical_resample(
            &joint,
            &binary_codebook(),
            10,
            &start,
            &SamplerConfig::default(),
            Stage3::SelfCritic,
            &mut rng,
            None,
        )
        .unwrap_err();
        assert!(err.is_usage());
    }

    #[test]
    fn untraced_runs_still_resample() {
        let joint = TabularExactPrior::point_mass(2, &[1, 1, 0, 1]).unwrap();
        let start = TokenSeq::new(vec![None, Some(1), None, None]);
        let cfg = SamplerConfig::default();
        for stage3 in [Stage3::SelfCritic, Stage3::PriorProb] {
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            let out = critical_resample(
                &joint,
                &binary_codebook(),
                2,
                &start,
                &cfg,
                stage3,
                &mut rng,
                None,
            )
            .unwrap();
            assert_eq!(out, TokenSeq::from_tokens(&[1, 1, 0, 1]));
        }
    }

    #[test]
    fn stop_at_or_after_the_end_is_rejected() {
        let joint = TabularExactPrior::from_fn(2, 3, |_| 1.0).unwrap();
        let start = TokenSeq::new(vec![None, Some(1), None]);
        let cfg = SamplerConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for t_star in [10, 11] {
            let err = critical_resample(
                &joint,
                &binary_codebook(),
                t_star,
                &start,
                &cfg,
                Stage3::SelfCritic,
                &mut rng,
                None,
            )
            .unwrap_err();
            assert!(err.is_usage());
        }
    }
}
