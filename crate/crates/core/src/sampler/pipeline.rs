use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::critic::{self_critic_confidence, CriticFn};
use super::naive::{naive_decode_from, token_critic_decode};
use super::resample::{critical_resample, Stage3};
use super::reverse::critical_reverse;
use super::trace::{Phase, RealismTrace};
use super::SamplerConfig;
use crate::error::{Error, Result};
use crate::prior::PriorModel;
use crate::schedule::{MaskSchedule, NoiseSchedule};
use crate::token::{Codebook, TokenSeq};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    Naive,
    TokenCritic,
    Ess,
    /// Naive decoding, critical reverse sampling, then naive decoding again
    /// with prior-probability confidence.
    AblationB,
    /// Critical resampling from the all-MASK sequence with no reverse pass.
    #[doc(hidden)]
    ResampleOnly,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::Naive,
        Method::TokenCritic,
        Method::Ess,
        Method::AblationB,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Naive => "naive",
            Method::TokenCritic => "token-critic",
            Method::Ess => "ess",
            Method::AblationB => "ablation-b",
            Method::ResampleOnly => "resample-only",
        }
    }

    /// Confidence source of the last stage, where one exists.
    pub fn stage3(self) -> Option<Stage3> {
        match self {
            Method::Ess | Method::ResampleOnly => Some(Stage3::SelfCritic),
            Method::AblationB => Some(Stage3::PriorProb),
            Method::Naive | Method::TokenCritic => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "naive" => Ok(Method::Naive),
            "token-critic" | "tokencritic" => Ok(Method::TokenCritic),
            "ess" => Ok(Method::Ess),
            "ablation-b" => Ok(Method::AblationB),
            "resample-only" => Ok(Method::ResampleOnly),
            other => Err(Error::usage(format!(
                "unknown method '{other}' (expected naive, token-critic, ess or ablation-b)"
            ))),
        }
    }
}

/// Shared, immutable inputs of a batch of sampling chains.
pub struct SamplingContext<'a> {
    pub prior: &'a dyn PriorModel,
    pub codebook: &'a Codebook,
    pub schedule: MaskSchedule,
    pub config: SamplerConfig,
    /// Required by [`Method::TokenCritic`].
    pub critic: Option<&'a dyn CriticFn>,
}

impl<'a> SamplingContext<'a> {
    /// Builds the cosine schedule for `config.steps` over the prior's length.
    pub fn new(
        prior: &'a dyn PriorModel,
        codebook: &'a Codebook,
        config: SamplerConfig,
    ) -> Result<Self> {
        config.validate()?;
        if codebook.size() != prior.vocab_size() {
            return Err(Error::usage(format!(
                "codebook has {} rows but prior vocabulary is {}",
                codebook.size(),
                prior.vocab_size()
            )));
        }
        Ok(Self {
            prior,
            codebook,
            schedule: MaskSchedule::cosine(prior.seq_len(), config.steps)?,
            config,
            critic: None,
        })
    }

    pub fn with_critic(mut self, critic: &'a dyn CriticFn) -> Self {
        self.critic = Some(critic);
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChainOutput {
    pub tokens: TokenSeq,
    /// Stop step of the reverse pass, for methods that run one.
    pub t_star: Option<usize>,
    pub trace: Option<RealismTrace>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EssSample {
    pub tokens: TokenSeq,
    pub trace: RealismTrace,
    pub t_star: usize,
}

/// Naive decoding, critical reverse sampling and critical resampling, with
/// the realism of the token set recorded after every step.
pub fn ess_sample<P, R>(
    prior: &P,
    cb: &Codebook,
    sched: &MaskSchedule,
    cfg: &SamplerConfig,
    rng: &mut R,
) -> Result<EssSample>
where
    P: PriorModel + Sized,
    R: Rng + ?Sized,
{
    let ctx = SamplingContext {
        prior,
        codebook: cb,
        schedule: sched.clone(),
        config: cfg.clone(),
        critic: None,
    };
    let out = sample_chain(&ctx, Method::Ess, rng, true)?;
    Ok(EssSample {
        tokens: out.tokens,
        trace: out.trace.unwrap_or_default(),
        t_star: out.t_star.unwrap_or(cfg.steps),
    })
}

/// Runs one sampling chain of `method`.
pub fn sample_chain<R: Rng + ?Sized>(
    ctx: &SamplingContext<'_>,
    method: Method,
    rng: &mut R,
    record_trace: bool,
) -> Result<ChainOutput> {
    let cfg = &ctx.config;
    cfg.validate()?;
    let prior = ctx.prior;
    let cb = ctx.codebook;
    let n = prior.seq_len();
    if ctx.schedule.len() != n {
        return Err(Error::usage(format!(
            "schedule is for N={} but the prior has N={n}",
            ctx.schedule.len()
        )));
    }
    let noise = NoiseSchedule::new(cfg.noise_base, ctx.schedule.steps())?;
    let mut trace = record_trace.then(RealismTrace::new);

    let tokens = match method {
        Method::TokenCritic => {
            let critic = ctx
                .critic
                .ok_or_else(|| Error::usage("token-critic sampling needs a critic"))?;
            token_critic_decode(prior, critic, &ctx.schedule, cfg, rng)?
        }
        Method::ResampleOnly => critical_resample(
            prior,
            cb,
            0,
            &TokenSeq::masked(n),
            cfg,
            Stage3::SelfCritic,
            rng,
            trace.as_mut(),
        )?,
        Method::Naive | Method::Ess | Method::AblationB => {
            let mut obs = |t: usize, sampled: &TokenSeq, _: &TokenSeq| -> Result<()> {
                if let Some(tr) = trace.as_mut() {
                    let (_, d) = self_critic_confidence(prior, cb, sampled)?;
                    tr.push(Phase::Naive, t + 1, d.iter().sum());
                }
                Ok(())
            };
            let (s_final, _) = naive_decode_from(
                prior,
                TokenSeq::masked(n),
                &ctx.schedule,
                &noise,
                rng,
                Some(&mut obs),
            )?;
            if method == Method::Naive {
                s_final
            } else {
                let outcome =
                    critical_reverse(prior, cb, &s_final, &ctx.schedule, cfg, trace.as_mut())?;
                let stage3 = method.stage3().expect("method has a third stage");
                let out = critical_resample(
                    prior,
                    cb,
                    outcome.t_star,
                    &outcome.masked,
                    cfg,
                    stage3,
                    rng,
                    trace.as_mut(),
                )?;
                return Ok(ChainOutput {
                    tokens: out,
                    t_star: Some(outcome.t_star),
                    trace,
                });
            }
        }
    };
    Ok(ChainOutput {
        tokens,
        t_star: None,
        trace,
    })
}

/// RNG of chain `index` under root seed `root`: ChaCha8 seeded with `root`,
/// stream `index`. Streams never overlap, so chains are independent of each
/// other and of how they are scheduled.
pub fn chain_rng(root: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(root);
    rng.set_stream(index);
    rng
}

/// Runs `count` chains on up to `threads` workers and returns their results
/// in chain-index order.
pub fn run_chains<T, F>(count: usize, threads: usize, root: u64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, &mut ChaCha8Rng) -> Result<T> + Sync,
{
    let run = |i: usize| {
        let mut rng = chain_rng(root, i as u64);
        f(i, &mut rng)
    };
    if threads <= 1 {
        return (0..count).map(run).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::usage(format!("cannot start {threads} workers: {e}")))?;
    pool.install(|| (0..count).into_par_iter().map(run).collect())
}
