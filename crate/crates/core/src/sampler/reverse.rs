use super::critic::self_critic_confidence;
use super::trace::{Phase, RealismTrace};
use super::{SamplerConfig, StopRule};
use crate::error::{Error, Result};
use crate::prior::{argmax, PriorModel};
use crate::schedule::MaskSchedule;
use crate::token::{sq_dist, Codebook, TokenSeq};

/// Guards the ratio of two latent mismatches when either is zero.
const RATIO_EPS: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct ReverseOutcome {
    /// Step where the reverse walk stopped.
    pub t_star: usize,
    /// `s_T` with every slot outside the top `N − counts[t*]` masked.
    pub masked: TokenSeq,
    /// Self-critic realism terms `d_j` of `s_T`.
    pub d: Vec<f64>,
    /// Latent mismatch measured at each tested step, in visiting order.
    pub mismatches: Vec<(usize, f64)>,
}

struct StopState {
    rule: StopRule,
    previous: Option<f64>,
    ratios: Vec<f64>,
}

impl StopState {
    fn new(rule: StopRule) -> Self {
        Self {
            rule,
            previous: None,
            ratios: Vec::new(),
        }
    }

    fn should_stop(&mut self, mismatch: f64) -> bool {
        match self.rule {
            StopRule::Threshold(tau) => mismatch <= tau,
            StopRule::MovingAverageRatio { window } => {
                let stop = match self.previous {
                    // an exact match on the first tested step leaves nothing to remove
                    None => mismatch == 0.0,
                    Some(prev) => {
                        self.ratios
                            .push((prev + RATIO_EPS) / (mismatch + RATIO_EPS));
                        let recent = &self.ratios[self.ratios.len().saturating_sub(window)..];
                        recent.iter().sum::<f64>() / recent.len() as f64 <= 1.0
                    }
                };
                self.previous = Some(mismatch);
                stop
            }
        }
    }
}

fn keep_top(seq: &TokenSeq, ranking: &[usize], keep: usize) -> TokenSeq {
    let mut out = TokenSeq::masked(seq.len());
    for &i in &ranking[..keep] {
        out.set(i, seq.get(i));
    }
    out
}

/// Critical reverse sampling from a MASK-free `s_T`.
///
/// Ranks slots once by self-critic confidence, then for `t = T … 1` compares
/// the tokens revealed between `s_{t−1,M}` and `s_{t,M}` against the prior's
/// per-slot argmax given `s_{t−1,M}`. The comparison is the mean squared
/// codebook difference over those slots and latent dimensions. Steps where
/// the schedule reveals nothing are skipped. If no step satisfies the stop
/// rule, `t* = 1`.
pub fn critical_reverse<P: PriorModel + ?Sized>(
    prior: &P,
    cb: &Codebook,
    s_final: &TokenSeq,
    sched: &MaskSchedule,
    cfg: &SamplerConfig,
    mut trace: Option<&mut RealismTrace>,
) -> Result<ReverseOutcome> {
    cfg.validate()?;
    let n = s_final.len();
    if sched.len() != n {
        return Err(Error::usage(format!(
            "schedule is for N={} but s_T has {n} slots",
            sched.len()
        )));
    }
    let tokens = s_final.tokens()?;
    let (conf, d) = self_critic_confidence(prior, cb, s_final)?;
    let ranking = conf.ranking();
    let steps = sched.steps();
    let realism_kept =
        |t: usize| -> f64 { ranking[..sched.kept_at(t)].iter().map(|&j| d[j]).sum() };

    let mut stop = StopState::new(cfg.stop);
    let mut mismatches = Vec::new();
    let mut t_star = 1;
    if let Some(tr) = trace.as_mut() {
        tr.push(Phase::Reverse, steps, realism_kept(steps));
    }
    for t in (1..=steps).rev() {
        let kept_now = sched.kept_at(t);
        let kept_before = sched.kept_at(t - 1);
        if kept_now > kept_before {
            let previous = keep_top(s_final, &ranking, kept_before);
            let preds = prior.predict(&previous)?;
            let revealed = &ranking[kept_before..kept_now];
            let total: f64 = revealed
                .iter()
                .map(|&j| {
                    let dist = preds[j].as_ref().expect("masked slot has a prediction");
                    sq_dist(cb.row(tokens[j]), cb.row(argmax(dist)))
                })
                .sum();
            let mismatch = total / (revealed.len() * cb.dim()) as f64;
            mismatches.push((t, mismatch));
            if stop.should_stop(mismatch) {
                t_star = t;
                break;
            }
        }
        if t > 1 {
            if let Some(tr) = trace.as_mut() {
                tr.push(Phase::Reverse, t - 1, realism_kept(t - 1));
            }
        }
    }
    Ok(ReverseOutcome {
        t_star,
        masked: keep_top(s_final, &ranking, sched.kept_at(t_star)),
        d,
        mismatches,
    })
}
