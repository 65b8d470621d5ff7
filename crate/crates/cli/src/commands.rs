use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::{Deserialize, Serialize};

use ess_core::data::{
    gen_synthetic, load_ucr_tsv, truncate_to_min_length, write_ucr_tsv, znormalize_all,
    LabeledSeries, SyntheticKind,
};
use ess_core::eval::{EvalReport, UNLABELED};
use ess_core::prior::{read_prior_file, AnyPrior, CorruptedPrior, CountPrior, PriorModel};
use ess_core::quantizer::{decode, encode, fit_codebook_report, reconstruction_mse};
use ess_core::sampler::{
    run_chains, sample_chain, ChainOutput, CriticFn, ExactConditionalCritic, Method,
    PriorConditionalCritic, RealismTrace, SamplingContext,
};
use ess_core::token::{Codebook, TokenSeq};
use ess_core::{Error, Result};

use crate::config::RunConfig;

pub const CODEBOOK_FILE: &str = "codebook.txt";
pub const PRIOR_FILE: &str = "prior.txt";
pub const SUMMARY_FILE: &str = "summary.json";

fn class_prior_file(label: i64) -> String {
    format!("prior_class_{label}.txt")
}

/// Written by `fit`, read back by `sample`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    #[serde(rename = "K")]
    pub k: usize,
    /// Tokens per series.
    #[serde(rename = "N")]
    pub n: usize,
    pub window: usize,
    /// Series length after truncation to a whole number of windows.
    pub length: usize,
    pub series: usize,
    pub classes: Vec<i64>,
    pub recon_mse: f64,
    pub truncated_samples: usize,
    pub nudged_duplicates: usize,
    pub seed: u64,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.into()))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn write_with<F>(path: &Path, f: F) -> Result<()>
where
    F: FnOnce(&mut Vec<u8>) -> Result<()>,
{
    let mut buf = Vec::new();
    f(&mut buf)?;
    fs::write(path, buf)?;
    Ok(())
}

/// Loads a UCR file, cuts every series to the shortest length and
/// z-normalizes each one.
pub fn load_normalized(path: &Path) -> Result<Vec<LabeledSeries>> {
    let mut series = load_ucr_tsv(path)?;
    truncate_to_min_length(&mut series);
    znormalize_all(&mut series);
    Ok(series)
}

pub fn cmd_fit(cfg: &RunConfig, data: &Path, out: &Path) -> Result<FitSummary> {
    let vq = cfg.vq()?;
    let mut series = load_normalized(data)?;
    let full = series[0].values.len();
    let length = full - full % vq.window;
    if length == 0 {
        return Err(Error::usage(format!(
            "series length {full} is shorter than the window {}",
            vq.window
        )));
    }
    if length < full {
        warn!(
            "series length {full} is not a multiple of window {}; dropping the last {} samples",
            vq.window,
            full - length
        );
    }
    for s in series.iter_mut() {
        s.values.truncate(length);
    }
    let values: Vec<Vec<f64>> = series.iter().map(|s| s.values.clone()).collect();
    let fit = fit_codebook_report(&values, &vq)?;
    let cb = &fit.codebook;
    let tokens: Vec<TokenSeq> = values
        .iter()
        .map(|v| encode(cb, v))
        .collect::<Result<_>>()?;
    let prior = CountPrior::fit(&tokens, vq.k)?;

    fs::create_dir_all(out)?;
    write_with(&out.join(CODEBOOK_FILE), |w| cb.write_to(w))?;
    write_with(&out.join(PRIOR_FILE), |w| prior.write_to(w))?;
    let mut classes: Vec<i64> = series.iter().map(|s| s.label).collect();
    classes.sort_unstable();
    classes.dedup();
    for &label in &classes {
        let members: Vec<TokenSeq> = series
            .iter()
            .zip(&tokens)
            .filter(|(s, _)| s.label == label)
            .map(|(_, t)| t.clone())
            .collect();
        let class_prior = CountPrior::fit(&members, vq.k)?;
        write_with(&out.join(class_prior_file(label)), |w| {
            class_prior.write_to(w)
        })?;
    }
    let summary = FitSummary {
        k: vq.k,
        n: length / vq.window,
        window: vq.window,
        length,
        series: series.len(),
        classes,
        recon_mse: reconstruction_mse(cb, &values)?,
        truncated_samples: full - length,
        nudged_duplicates: fit.nudged_duplicates,
        seed: vq.seed,
    };
    write_json(&out.join(SUMMARY_FILE), &summary)?;
    Ok(summary)
}

/// Codebook and priors used by `sample` and `sweep`.
pub struct Artifacts {
    pub codebook: Codebook,
    pub prior: AnyPrior,
    /// Class-conditional priors, ordered by label.
    pub class_priors: Vec<(i64, AnyPrior)>,
}

fn require(path: &Path) -> Result<&Path> {
    if path.is_file() {
        Ok(path)
    } else {
        Err(Error::usage(format!(
            "missing artifact {} (run `ess fit` first)",
            path.display()
        )))
    }
}

pub struct ArtifactPaths {
    pub dir: Option<PathBuf>,
    pub prior: Option<PathBuf>,
    pub codebook: Option<PathBuf>,
}

impl ArtifactPaths {
    fn resolve(&self, explicit: &Option<PathBuf>, name: &str) -> Result<PathBuf> {
        match (explicit, &self.dir) {
            (Some(p), _) => Ok(p.clone()),
            (None, Some(d)) => Ok(d.join(name)),
            (None, None) => Err(Error::usage(format!(
                "no artifacts: pass --artifacts DIR or an explicit path for {name}"
            ))),
        }
    }

    pub fn load(&self, conditional: bool) -> Result<Artifacts> {
        let cb_path = self.resolve(&self.codebook, CODEBOOK_FILE)?;
        let prior_path = self.resolve(&self.prior, PRIOR_FILE)?;
        let codebook = Codebook::read_from(fs::read(require(&cb_path)?)?.as_slice())?;
        let prior = read_prior_file(require(&prior_path)?)?;
        let mut class_priors = Vec::new();
        if conditional {
            let dir = self
                .dir
                .as_ref()
                .ok_or_else(|| Error::usage("conditional sampling needs --artifacts DIR"))?;
            let summary: FitSummary =
                serde_json::from_slice(&fs::read(require(&dir.join(SUMMARY_FILE))?)?)
                    .map_err(|e| Error::parse(0, format!("{SUMMARY_FILE}: {e}")))?;
            for label in summary.classes {
                let p = read_prior_file(require(&dir.join(class_prior_file(label)))?)?;
                class_priors.push((label, p));
            }
            if class_priors.len() < 2 {
                warn!("conditional sampling with {} class", class_priors.len());
            }
        }
        Ok(Artifacts {
            codebook,
            prior,
            class_priors,
        })
    }
}

pub struct SampleRun {
    pub method: Method,
    pub seed: u64,
    pub labels: Vec<i64>,
    pub outputs: Vec<ChainOutput>,
}

impl SampleRun {
    pub fn tokens(&self) -> Vec<TokenSeq> {
        self.outputs.iter().map(|o| o.tokens.clone()).collect()
    }

    pub fn series(&self, cb: &Codebook) -> Result<Vec<LabeledSeries>> {
        self.outputs
            .iter()
            .zip(&self.labels)
            .map(|(o, &label)| Ok(LabeledSeries::new(label, decode(cb, &o.tokens)?)))
            .collect()
    }

    pub fn t_star_histogram(&self) -> BTreeMap<usize, usize> {
        let mut hist = BTreeMap::new();
        for t in self.outputs.iter().filter_map(|o| o.t_star) {
            *hist.entry(t).or_insert(0) += 1;
        }
        hist
    }

    pub fn mean_trace(&self) -> Option<RealismTrace> {
        let traces: Vec<&RealismTrace> = self
            .outputs
            .iter()
            .filter_map(|o| o.trace.as_ref())
            .collect();
        (!traces.is_empty()).then(|| RealismTrace::mean_of(traces))
    }
}

fn corrupt(prior: &AnyPrior, epsilon: f64) -> Result<CorruptedPrior<&AnyPrior>> {
    CorruptedPrior::new(prior, epsilon)
}

/// Samples `n` chains. Chain `i` draws from the RNG stream `i` of `seed`; in
/// conditional mode it uses the prior of class `i mod classes`. Realism
/// traces are only recorded for ESS chains.
#[allow(clippy::too_many_arguments)]
pub fn run_sampling(
    art: &Artifacts,
    cfg: &RunConfig,
    method: Method,
    n: usize,
    seed: u64,
    conditional: bool,
    threads: usize,
    record_trace: bool,
) -> Result<SampleRun> {
    let sampler = cfg.sampler()?;
    let groups: Vec<(i64, &AnyPrior)> = if conditional {
        art.class_priors.iter().map(|(l, p)| (*l, p)).collect()
    } else {
        vec![(UNLABELED, &art.prior)]
    };
    if groups.is_empty() {
        return Err(Error::usage(
            "no class priors available for conditional sampling",
        ));
    }
    let corrupted: Vec<CorruptedPrior<&AnyPrior>> = groups
        .iter()
        .map(|(_, p)| corrupt(p, cfg.epsilon))
        .collect::<Result<_>>()?;
    let critics: Vec<Box<dyn CriticFn + '_>> = groups
        .iter()
        .zip(&corrupted)
        .map(|((_, raw), c)| -> Box<dyn CriticFn + '_> {
            match raw {
                AnyPrior::Tabular(t) => Box::new(ExactConditionalCritic::new(t)),
                AnyPrior::Count(_) => Box::new(PriorConditionalCritic::new(c)),
            }
        })
        .collect();
    let contexts: Vec<SamplingContext<'_>> = corrupted
        .iter()
        .zip(&critics)
        .map(|(p, c)| {
            SamplingContext::new(p, &art.codebook, sampler.clone())
                .map(|ctx| ctx.with_critic(c.as_ref()))
        })
        .collect::<Result<_>>()?;
    let record_trace = record_trace && method == Method::Ess;
    let outputs = run_chains(n, threads, seed, |i, rng| {
        sample_chain(&contexts[i % contexts.len()], method, rng, record_trace)
    })?;
    let labels = (0..n).map(|i| groups[i % groups.len()].0).collect();
    Ok(SampleRun {
        method,
        seed,
        labels,
        outputs,
    })
}

#[derive(Serialize)]
struct Manifest<'a> {
    method: &'a str,
    n: usize,
    seed: u64,
    conditional: bool,
    stage3_confidence: Option<&'a str>,
    t_star_histogram: BTreeMap<usize, usize>,
    trace: Option<&'a str>,
    config: &'a RunConfig,
}

pub fn write_tokens<W: Write>(tokens: &[TokenSeq], mut w: W) -> Result<()> {
    for t in tokens {
        let line: Vec<String> = t.tokens()?.iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}", line.join(" "))?;
    }
    Ok(())
}

/// One whitespace-separated token sequence per line.
pub fn read_tokens(path: &Path) -> Result<Vec<TokenSeq>> {
    let text = fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let tokens: Vec<usize> = line
            .split_whitespace()
            .map(|s| s.parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::parse(idx + 1, e.to_string()))?;
        out.push(TokenSeq::from_tokens(&tokens));
    }
    Ok(out)
}

pub fn write_sample_outputs(
    run: &SampleRun,
    art: &Artifacts,
    cfg: &RunConfig,
    conditional: bool,
    out: &Path,
) -> Result<()> {
    fs::create_dir_all(out)?;
    let series = run.series(&art.codebook)?;
    write_ucr_tsv(&out.join("samples.tsv"), &series)?;
    write_with(&out.join("tokens.txt"), |w| write_tokens(&run.tokens(), w))?;
    let trace = run.mean_trace();
    if let Some(tr) = &trace {
        write_with(&out.join("trace.csv"), |w| tr.write_csv(w))?;
    }
    let manifest = Manifest {
        method: run.method.as_str(),
        n: run.outputs.len(),
        seed: run.seed,
        conditional,
        stage3_confidence: run.method.stage3().map(|s| s.as_str()),
        t_star_histogram: run.t_star_histogram(),
        trace: run.method.eq(&Method::Ess).then_some("trace.csv"),
        config: cfg,
    };
    write_json(&out.join("manifest.json"), &manifest)?;
    info!("wrote {} samples to {}", run.outputs.len(), out.display());
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum EvalMode {
    Exact,
    Feature,
}

/// Evaluates generated series against real data. Both sets are cut to their
/// common shortest length first.
pub fn feature_report(generated: &[LabeledSeries], real: &[LabeledSeries]) -> Result<EvalReport> {
    let min = generated
        .iter()
        .chain(real)
        .map(|s| s.values.len())
        .min()
        .ok_or_else(|| Error::usage("feature evaluation needs generated and real series"))?;
    let cut = |v: &[LabeledSeries]| -> Vec<LabeledSeries> {
        v.iter()
            .map(|s| LabeledSeries::new(s.label, s.values[..min].to_vec()))
            .collect()
    };
    EvalReport::features(&cut(generated), &cut(real))
}

pub fn exact_report(tokens: &[TokenSeq], truth: &Path) -> Result<EvalReport> {
    let AnyPrior::Tabular(joint) = read_prior_file(truth)? else {
        return Err(Error::usage(
            "exact mode needs a tabular ground-truth prior",
        ));
    };
    if tokens.is_empty() {
        return Err(Error::usage(
            "exact mode needs at least one generated sequence",
        ));
    }
    EvalReport::exact(
        tokens,
        joint.probabilities(),
        joint.vocab_size(),
        joint.seq_len(),
    )
}

pub fn cmd_eval(
    gen: &Path,
    real: Option<&Path>,
    truth: Option<&Path>,
    mode: EvalMode,
) -> Result<EvalReport> {
    match mode {
        EvalMode::Exact => {
            let truth = truth.ok_or_else(|| Error::usage("--mode exact needs --truth PRIOR"))?;
            exact_report(&read_tokens(gen)?, truth)
        }
        EvalMode::Feature => {
            let real = real.ok_or_else(|| Error::usage("--mode feature needs --real DATA"))?;
            feature_report(&load_normalized(gen)?, &load_normalized(real)?)
        }
    }
}

pub struct SweepSpec<'a> {
    pub methods: &'a [Method],
    pub seeds: &'a [u64],
    pub n: usize,
    pub conditional: bool,
    pub mode: EvalMode,
    pub real: Option<&'a Path>,
    pub truth: Option<&'a Path>,
}

/// One CSV row per `(method, seed)`, methods outermost.
pub fn cmd_sweep<W: Write>(
    art: &Artifacts,
    cfg: &RunConfig,
    sweep: &SweepSpec<'_>,
    threads: usize,
    mut w: W,
) -> Result<()> {
    let real = match sweep.mode {
        EvalMode::Feature => {
            Some(load_normalized(sweep.real.ok_or_else(|| {
                Error::usage("feature sweep needs --real DATA")
            })?)?)
        }
        EvalMode::Exact => {
            if sweep.truth.is_none() {
                return Err(Error::usage("exact sweep needs --truth PRIOR"));
            }
            None
        }
    };
    writeln!(w, "method,seed,{}", EvalReport::CSV_HEADER)?;
    for &method in sweep.methods {
        for &seed in sweep.seeds {
            let run = run_sampling(
                art,
                cfg,
                method,
                sweep.n,
                seed,
                sweep.conditional,
                threads,
                false,
            )?;
            let report = match (&real, sweep.truth) {
                (Some(real), _) => feature_report(&run.series(&art.codebook)?, real)?,
                (None, Some(truth)) => exact_report(&run.tokens(), truth)?,
                (None, None) => unreachable!("mode checked above"),
            };
            writeln!(w, "{},{},{}", method, seed, report.csv_row())?;
        }
    }
    Ok(())
}

pub fn cmd_gen(kind: SyntheticKind, n: usize, length: usize, seed: u64, out: &Path) -> Result<()> {
    let series = gen_synthetic(kind, n, length, seed)?;
    write_ucr_tsv(out, &series)
}
