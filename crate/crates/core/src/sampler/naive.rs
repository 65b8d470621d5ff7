use rand::Rng;

use super::critic::CriticFn;
use super::SamplerConfig;
use crate::error::{Error, Result};
use crate::prior::{sample_categorical, PriorModel};
use crate::schedule::{perturb_confidence, MaskSchedule, NoiseSchedule};
use crate::token::{apply_mask, top_k_mask, ConfidenceKind, ConfidenceVector, Score, TokenSeq};

/// Called after every decoding iteration with the iteration index, the fully
/// sampled sequence and the masked sequence carried into the next iteration.
pub type StepObserver<'a> = dyn FnMut(usize, &TokenSeq, &TokenSeq) -> Result<()> + 'a;

fn check_schedule(seq_len: usize, sched: &MaskSchedule, noise: &NoiseSchedule) -> Result<()> {
    if sched.len() > seq_len {
        return Err(Error::usage(format!(
            "schedule masks {} slots but the sequence has {seq_len}",
            sched.len()
        )));
    }
    if noise.steps() != sched.steps() {
        return Err(Error::usage(format!(
            "noise schedule spans {} steps, mask schedule {}",
            noise.steps(),
            sched.steps()
        )));
    }
    Ok(())
}

/// Iterative decoding from the all-MASK sequence.
///
/// Returns `s_T` and the (unperturbed) confidence of the last iteration.
pub fn naive_decode<P, R>(
    prior: &P,
    sched: &MaskSchedule,
    cfg: &SamplerConfig,
    rng: &mut R,
) -> Result<(TokenSeq, ConfidenceVector)>
where
    P: PriorModel + ?Sized,
    R: Rng + ?Sized,
{
    cfg.validate()?;
    let noise = NoiseSchedule::new(cfg.noise_base, sched.steps())?;
    naive_decode_from(
        prior,
        TokenSeq::masked(prior.seq_len()),
        sched,
        &noise,
        rng,
        None,
    )
}

/// Iterative decoding from a partially masked start.
///
/// Each iteration samples every MASK slot independently, scores each newly
/// sampled token by its predicted probability, pins every slot that was
/// already filled, perturbs with scheduled noise and keeps the top
/// `N − counts[t+1]` slots. `sched.counts()[0]` must equal the number of MASK
/// slots in `start`.
pub fn naive_decode_from<P, R>(
    prior: &P,
    start: TokenSeq,
    sched: &MaskSchedule,
    noise: &NoiseSchedule,
    rng: &mut R,
    mut observer: Option<&mut StepObserver<'_>>,
) -> Result<(TokenSeq, ConfidenceVector)>
where
    P: PriorModel + ?Sized,
    R: Rng + ?Sized,
{
    let n = start.len();
    check_schedule(n, sched, noise)?;
    if start.mask_count() != sched.len() {
        return Err(Error::usage(format!(
            "start has {} MASK slots but the schedule begins at {}",
            start.mask_count(),
            sched.len()
        )));
    }
    let mut current = start;
    let mut conf = ConfidenceVector::new(vec![Score::Pinned; n], ConfidenceKind::PriorProb);
    for t in 0..sched.steps() {
        let preds = prior.predict(&current)?;
        let mut sampled = current.clone();
        let mut scores = Vec::with_capacity(n);
        for (i, pred) in preds.iter().enumerate() {
            match (current.get(i), pred) {
                (Some(_), _) => scores.push(Score::Pinned),
                (None, Some(dist)) => {
                    let token = sample_categorical(dist, rng);
                    sampled.set(i, Some(token));
                    scores.push(Score::Value(dist[token]));
                }
                (None, None) => {
                    return Err(Error::usage(format!(
                        "prior gave no prediction for MASK slot {i}"
                    )))
                }
            }
        }
        conf = ConfidenceVector::new(scores, ConfidenceKind::PriorProb);
        let noisy = perturb_confidence(&conf, t, noise, rng);
        let keep = n - sched.masked_at(t + 1);
        let next = apply_mask(&sampled, &top_k_mask(&noisy, keep)?)?;
        if let Some(obs) = observer.as_mut() {
            obs(t, &sampled, &next)?;
        }
        current = next;
    }
    Ok((current, conf))
}

/// Iterative decoding where the keep ranking comes from an external critic
/// scoring the fully sampled sequence. No slot is pinned, so a kept token can
/// be re-masked at a later step.
pub fn token_critic_decode<P, C, R>(
    prior: &P,
    critic: &C,
    sched: &MaskSchedule,
    cfg: &SamplerConfig,
    rng: &mut R,
) -> Result<TokenSeq>
where
    P: PriorModel + ?Sized,
    C: CriticFn + ?Sized,
    R: Rng + ?Sized,
{
    cfg.validate()?;
    let n = prior.seq_len();
    let noise = NoiseSchedule::new(cfg.noise_base, sched.steps())?;
    check_schedule(n, sched, &noise)?;
    let mut current = TokenSeq::masked(n);
    for t in 0..sched.steps() {
        let sampled = crate::prior::sample_masked(prior, &current, rng)?;
        let keep = n - sched.masked_at(t + 1);
        if keep == n {
            current = sampled;
            continue;
        }
        let conf = critic.score(&sampled)?;
        let noisy = perturb_confidence(&conf, t, &noise, rng);
        current = apply_mask(&sampled, &top_k_mask(&noisy, keep)?)?;
    }
    Ok(current)
}
