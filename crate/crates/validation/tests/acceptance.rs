//! Acceptance criteria, one PASS/FAIL line each, followed by the statistical
//! operation examples (ids `s1`..`s3`). Exits non-zero if any line fails.
//! Pass ids as arguments to run a subset.
//!
//! Ground-truth distributions are enumerated here from the same weight
//! functions handed to the library, so the truth never comes from the code
//! under test.

use std::collections::{HashMap, HashSet};
use std::env;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode, Output};
use std::time::{Duration, Instant};

use ess_core::prior::{CorruptedPrior, PriorModel, TabularExactPrior};
use ess_core::sampler::{
    chain_rng, run_chains, sample_chain, ChainOutput, CriticFn, ExactConditionalCritic, Method,
    Phase, SamplerConfig, SamplingContext,
};
use ess_core::token::{Codebook, TokenSeq};
use serde_json::Value;
use tempfile::TempDir;

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

fn threads() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Every sequence of `n` tokens over `k` values, slot 0 varying slowest.
fn all_sequences(k: usize, n: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::with_capacity(n)];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (0..k).map(move |v| {
                    let mut s = prefix.clone();
                    s.push(v);
                    s
                })
            })
            .collect();
    }
    out
}

/// Normalized joint over all sequences, enumerated from the raw weight.
struct Truth {
    probs: HashMap<Vec<usize>, f64>,
}

impl Truth {
    fn enumerate(k: usize, n: usize, weight: &dyn Fn(&[usize]) -> f64) -> Self {
        let seqs = all_sequences(k, n);
        let total: f64 = seqs.iter().map(|s| weight(s)).sum();
        Self {
            probs: seqs
                .into_iter()
                .map(|s| {
                    let p = weight(&s) / total;
                    (s, p)
                })
                .collect(),
        }
    }

    fn tv(&self, samples: &[TokenSeq]) -> f64 {
        let mut counts: HashMap<Vec<usize>, usize> = HashMap::new();
        for s in samples {
            *counts
                .entry(s.tokens().expect("complete sample"))
                .or_insert(0) += 1;
        }
        let m = samples.len() as f64;
        let mut l1: f64 = self
            .probs
            .iter()
            .map(|(s, p)| (counts.get(s).copied().unwrap_or(0) as f64 / m - p).abs())
            .sum();
        // samples outside the support
        l1 += counts
            .iter()
            .filter(|(s, _)| !self.probs.contains_key(*s))
            .map(|(_, &c)| c as f64 / m)
            .sum::<f64>();
        0.5 * l1
    }

    /// Binomial standard error of a TV estimate from `m` samples,
    /// `½ Σ sqrt(p(1−p)/m)`.
    fn tv_noise(&self, m: usize) -> f64 {
        0.5 * self
            .probs
            .values()
            .map(|p| (p * (1.0 - p) / m as f64).sqrt())
            .sum::<f64>()
    }
}

fn scalar_codebook(k: usize) -> Codebook {
    Codebook::new((0..k).map(|i| vec![i as f64]).collect()).expect("valid codebook")
}

fn draw(
    prior: &dyn PriorModel,
    cb: &Codebook,
    critic: Option<&dyn CriticFn>,
    method: Method,
    count: usize,
    seed: u64,
    record_trace: bool,
) -> Vec<ChainOutput> {
    let mut ctx = SamplingContext::new(prior, cb, SamplerConfig::default()).expect("valid context");
    if let Some(c) = critic {
        ctx = ctx.with_critic(c);
    }
    run_chains(count, threads(), seed, |_, rng| {
        sample_chain(&ctx, method, rng, record_trace)
    })
    .expect("sampling")
}

fn tokens(outputs: &[ChainOutput]) -> Vec<TokenSeq> {
    outputs.iter().map(|o| o.tokens.clone()).collect()
}

/// Pairwise-coupled binary chain: weight `exp(J · #agreeing neighbours)`.
const ISING_N: usize = 8;
const ISING_J: f64 = 1.0;
const ISING_SAMPLES: usize = 50_000;

fn ising_weight(s: &[usize]) -> f64 {
    (ISING_J * s.windows(2).filter(|w| w[0] == w[1]).count() as f64).exp()
}

struct Ising {
    joint: TabularExactPrior,
    truth: Truth,
    cb: Codebook,
}

fn ising() -> Ising {
    Ising {
        joint: TabularExactPrior::from_fn(2, ISING_N, ising_weight).expect("enumerable joint"),
        truth: Truth::enumerate(2, ISING_N, &ising_weight),
        cb: scalar_codebook(2),
    }
}

fn ising_tv(testbed: &Ising, epsilon: f64, method: Method, seed: u64) -> f64 {
    let prior = CorruptedPrior::new(&testbed.joint, epsilon).expect("valid epsilon");
    let critic = ExactConditionalCritic::new(&testbed.joint);
    let out = draw(
        &prior,
        &testbed.cb,
        Some(&critic),
        method,
        ISING_SAMPLES,
        seed,
        false,
    );
    testbed.truth.tv(&tokens(&out))
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn fmt_list(v: &[f64]) -> String {
    v.iter()
        .map(|x| format!("{x:.4}"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn criterion_1() -> Verdict {
    let start = Instant::now();
    let mut worst = (0.0, 0, 0);
    let mut failing = Vec::new();
    for n in 2..=4 {
        for k in 2..=4 {
            // independent slots, slot i has marginal ∝ v + 1 + i
            let weight = |s: &[usize]| {
                s.iter()
                    .enumerate()
                    .map(|(i, &v)| (v + 1 + i) as f64)
                    .product::<f64>()
            };
            let joint = TabularExactPrior::from_fn(k, n, weight).expect("enumerable joint");
            let truth = Truth::enumerate(k, n, &weight);
            let out = draw(
                &joint,
                &scalar_codebook(k),
                None,
                Method::Naive,
                100_000,
                1000 + (10 * n + k) as u64,
                false,
            );
            let tv = truth.tv(&tokens(&out));
            if tv > 0.02 {
                failing.push(format!("N={n},K={k}:{tv:.4}"));
            }
            if tv > worst.0 {
                worst = (tv, n, k);
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = failing.is_empty() && secs <= 30.0;
    Verdict::new(
        pass,
        format!(
            "max TV {:.4} at N={},K={} (limit 0.02); over limit: [{}]; {secs:.1} s (limit 30 s)",
            worst.0,
            worst.1,
            worst.2,
            failing.join(" ")
        ),
    )
}

fn criterion_2() -> Verdict {
    let start = Instant::now();
    let testbed = ising();
    let naive = ising_tv(&testbed, 0.0, Method::Naive, 21);
    let ess = ising_tv(&testbed, 0.0, Method::Ess, 21);
    let secs = start.elapsed().as_secs_f64();
    let gap = (ess - naive).abs();
    Verdict::new(
        gap <= 0.03 && secs <= 120.0,
        format!("TV naive {naive:.4}, ess {ess:.4}, |gap| {gap:.4} (limit 0.03); {secs:.1} s (limit 120 s)"),
    )
}

fn criterion_3() -> Verdict {
    let testbed = ising();
    let noise = testbed.truth.tv_noise(ISING_SAMPLES);
    let mut naive = Vec::new();
    let mut ess = Vec::new();
    for seed in 0..5 {
        naive.push(ising_tv(&testbed, 0.2, Method::Naive, 300 + seed));
        ess.push(ising_tv(&testbed, 0.2, Method::Ess, 300 + seed));
    }
    let wins = naive
        .iter()
        .zip(&ess)
        .filter(|(n, e)| *n - *e > 2.0 * noise)
        .count();
    Verdict::new(
        wins >= 4,
        format!(
            "seeds with TV(naive) - TV(ess) > 2 x noise ({:.4}): {wins}/5 (need 4); naive [{}], ess [{}]",
            2.0 * noise,
            fmt_list(&naive),
            fmt_list(&ess)
        ),
    )
}

fn criterion_4() -> Verdict {
    let testbed = ising();
    let prior = CorruptedPrior::new(&testbed.joint, 0.2).expect("valid epsilon");
    let ctx =
        SamplingContext::new(&prior, &testbed.cb, SamplerConfig::default()).expect("valid context");
    let (mut at_t, mut at_end, mut rev_entry, mut at_stop) =
        (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for seed in 0..200 {
        let out = sample_chain(&ctx, Method::Ess, &mut chain_rng(seed, 0), true).expect("sampling");
        let trace = out.trace.expect("trace recorded");
        let t = trace.last_of(Phase::Naive).expect("naive phase");
        at_t.push(t);
        // with nothing re-masked the output is s_T itself
        at_end.push(trace.last_of(Phase::Resample).unwrap_or(t));
        let reverse: Vec<f64> = trace.phase(Phase::Reverse).map(|e| e.realism).collect();
        rev_entry.push(reverse[0]);
        at_stop.push(*reverse.last().expect("reverse phase"));
    }
    let (t, end, entry, stop) = (mean(&at_t), mean(&at_end), mean(&rev_entry), mean(&at_stop));
    Verdict::new(
        end >= t && stop >= entry,
        format!("mean realism at T {t:.4}, at T* {end:.4}; reverse entry at T {entry:.4}, at t* {stop:.4}"),
    )
}

fn criterion_5() -> Verdict {
    let testbed = ising();
    let per = |method| {
        (0..5)
            .map(|s| ising_tv(&testbed, 0.2, method, 500 + s))
            .collect::<Vec<f64>>()
    };
    let (ess, abl, naive) = (per(Method::Ess), per(Method::AblationB), per(Method::Naive));
    let (a, b, c) = (mean(&ess), mean(&abl), mean(&naive));
    // noise of a difference between two 5-seed means
    let tie = 2.0 * testbed.truth.tv_noise(ISING_SAMPLES) * (2.0f64 / 5.0).sqrt();
    let links = [a <= b, b <= c];
    let ties = [a - b <= tie, b - c <= tie];
    let pass = (links[0] && links[1]) || (links[0] && ties[1]) || (links[1] && ties[0]);
    Verdict::new(
        pass,
        format!(
            "mean TV ess {a:.4}, ablation-b {b:.4}, naive {c:.4} (tie tolerance {tie:.4}); per seed ess [{}] ablation-b [{}] naive [{}]",
            fmt_list(&ess),
            fmt_list(&abl),
            fmt_list(&naive)
        ),
    )
}

fn criterion_6() -> Verdict {
    const K: usize = 3;
    const N: usize = 8;
    let modes: [[usize; N]; 4] = [[0; N], [1; N], [2; N], [0, 0, 0, 0, 2, 2, 2, 2]];
    let weight = |s: &[usize]| -> f64 {
        modes
            .iter()
            .map(|m| (-1.5 * m.iter().zip(s).filter(|(a, b)| a != b).count() as f64).exp())
            .sum()
    };
    let joint = TabularExactPrior::from_fn(K, N, weight).expect("enumerable joint");
    let cb = scalar_codebook(K);
    let distinct = |method| {
        let out = draw(&joint, &cb, None, method, 10_000, 61, false);
        out.into_iter()
            .map(|o| o.tokens.tokens().expect("complete"))
            .collect::<HashSet<_>>()
            .len()
    };
    let (resample_only, ess) = (distinct(Method::ResampleOnly), distinct(Method::Ess));
    Verdict::new(
        resample_only < ess,
        format!("distinct sequences in 10000: resample-only {resample_only}, ess {ess}"),
    )
}

fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../..")
        .canonicalize()
        .expect("workspace root")
}

fn capture(cmd: &mut Command) -> Result<Output, String> {
    let out = cmd
        .output()
        .map_err(|e| format!("cannot run {cmd:?}: {e}"))?;
    if out.status.success() {
        Ok(out)
    } else {
        let stderr = String::from_utf8_lossy(&out.stderr);
        let tail: Vec<&str> = stderr.lines().rev().take(5).collect();
        Err(format!(
            "{:?} failed: {}",
            cmd.get_program(),
            tail.into_iter().rev().collect::<Vec<_>>().join(" | ")
        ))
    }
}

/// Sampler branch coverage of the core crate's own unit and property tests,
/// measured in a separate target directory with an instrumented build.
fn sampler_branch_coverage() -> Result<(usize, usize), String> {
    let root = workspace_root();
    let target = root.join("target/coverage");
    let profiles = target.join("profraw");
    let _ = fs::remove_dir_all(&profiles);
    fs::create_dir_all(&profiles).map_err(|e| e.to_string())?;
    let cargo = env::var("CARGO").unwrap_or_else(|_| "cargo".into());
    let test_cmd = |extra: &[&str]| {
        let mut cmd = Command::new(&cargo);
        cmd.current_dir(&root)
            .args(["test", "-p", "ess-core", "--lib"])
            .args(extra)
            .env("CARGO_TARGET_DIR", &target)
            .env("RUSTC_BOOTSTRAP", "1")
            .env(
                "RUSTFLAGS",
                "-C instrument-coverage -Z coverage-options=branch",
            )
            .env("LLVM_PROFILE_FILE", profiles.join("ess-%p-%m.profraw"))
            .env_remove("CARGO_ENCODED_RUSTFLAGS");
        cmd
    };
    capture(&mut test_cmd(&["--quiet"]))?;
    let listing = capture(&mut test_cmd(&["--no-run", "--message-format=json"]))?;
    let binary = String::from_utf8_lossy(&listing.stdout)
        .lines()
        .filter_map(|l| serde_json::from_str::<Value>(l).ok())
        .filter(|v| v["reason"] == "compiler-artifact" && v["target"]["name"] == "ess_core")
        .find_map(|v| v["executable"].as_str().map(PathBuf::from))
        .ok_or("no instrumented test binary reported")?;

    let rustc = env::var("RUSTC").unwrap_or_else(|_| "rustc".into());
    let sysroot = String::from_utf8_lossy(
        &capture(Command::new(&rustc).args(["--print", "sysroot"]))?.stdout,
    )
    .trim()
    .to_string();
    let version =
        String::from_utf8_lossy(&capture(Command::new(&rustc).arg("-vV"))?.stdout).into_owned();
    let host = version
        .lines()
        .find_map(|l| l.strip_prefix("host: "))
        .ok_or("rustc -vV reports no host")?;
    let tools = Path::new(&sysroot)
        .join("lib/rustlib")
        .join(host)
        .join("bin");
    if !tools.join("llvm-profdata").is_file() {
        return Err("llvm-tools not installed (rustup component add llvm-tools-preview)".into());
    }
    let raw: Vec<PathBuf> = fs::read_dir(&profiles)
        .map_err(|e| e.to_string())?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "profraw"))
        .collect();
    let merged = target.join("sampler.profdata");
    capture(
        Command::new(tools.join("llvm-profdata"))
            .args(["merge", "-sparse", "-o"])
            .arg(&merged)
            .args(&raw),
    )?;
    let export = capture(
        Command::new(tools.join("llvm-cov"))
            .args(["export", "--summary-only"])
            .arg(format!("--instr-profile={}", merged.display()))
            .arg(&binary),
    )?;
    let report: Value = serde_json::from_slice(&export.stdout).map_err(|e| e.to_string())?;
    let files = report["data"][0]["files"]
        .as_array()
        .ok_or("coverage export has no files")?;
    let (mut covered, mut count) = (0, 0);
    for f in files {
        if f["filename"]
            .as_str()
            .is_some_and(|n| n.contains("/src/sampler/"))
        {
            covered += f["summary"]["branches"]["covered"].as_u64().unwrap_or(0) as usize;
            count += f["summary"]["branches"]["count"].as_u64().unwrap_or(0) as usize;
        }
    }
    Ok((covered, count))
}

fn criterion_7() -> Verdict {
    match sampler_branch_coverage() {
        Ok((_, 0)) => Verdict::new(false, "no sampler branches found in the coverage report"),
        Ok((covered, count)) => {
            let ratio = covered as f64 / count as f64;
            Verdict::new(
                ratio >= 0.95,
                format!("core unit and property suites pass; sampler branch coverage {covered}/{count} = {:.1}% (need 95%)", 100.0 * ratio),
            )
        }
        Err(e) => Verdict::new(false, format!("coverage run failed: {e}")),
    }
}

/// The `ess` binary built alongside this test.
fn ess_binary() -> Result<PathBuf, String> {
    let exe = env::current_exe().map_err(|e| e.to_string())?;
    let profile_dir = exe
        .parent()
        .and_then(Path::parent)
        .ok_or("unexpected test binary location")?;
    let bin = profile_dir.join(format!("ess{}", env::consts::EXE_SUFFIX));
    if bin.is_file() {
        Ok(bin)
    } else {
        Err(format!(
            "{} not built; run `cargo build -p ess-cli` or test the whole workspace",
            bin.display()
        ))
    }
}

fn ess(bin: &Path, threads: &str, args: &[&str]) -> Result<Output, String> {
    capture(Command::new(bin).args(args).env("MS_THREADS", threads))
}

fn p(path: &Path) -> &str {
    path.to_str().expect("utf-8 temp path")
}

fn determinism() -> Result<String, String> {
    let bin = ess_binary()?;
    let dir = TempDir::new().map_err(|e| e.to_string())?;
    let data = dir.path().join("data.tsv");
    let art = dir.path().join("art");
    ess(
        &bin,
        "1",
        &[
            "gen",
            "--kind",
            "cbf",
            "--n",
            "45",
            "--length",
            "64",
            "--seed",
            "8",
            "--out",
            p(&data),
        ],
    )?;
    ess(&bin, "1", &["fit", "--data", p(&data), "--out", p(&art)])?;

    // exact-mode sweep over the pairwise-coupled testbed
    let testbed = ising();
    let truth = dir.path().join("truth.txt");
    let cb = dir.path().join("codebook.txt");
    let mut buf = Vec::new();
    testbed
        .joint
        .write_to(&mut buf)
        .map_err(|e| e.to_string())?;
    fs::write(&truth, buf).map_err(|e| e.to_string())?;
    let mut buf = Vec::new();
    testbed.cb.write_to(&mut buf).map_err(|e| e.to_string())?;
    fs::write(&cb, buf).map_err(|e| e.to_string())?;

    let methods = "naive,token-critic,ess,ablation-b";
    let mut sizes = Vec::new();
    for (name, extra) in [
        (
            "feature",
            vec![
                "--artifacts",
                p(&art),
                "--mode",
                "feature",
                "--real",
                p(&data),
                "--n",
                "48",
            ],
        ),
        (
            "exact",
            vec![
                "--prior",
                p(&truth),
                "--codebook",
                p(&cb),
                "--mode",
                "exact",
                "--truth",
                p(&truth),
                "--n",
                "2000",
            ],
        ),
    ] {
        let mut csvs = Vec::new();
        for threads in ["1", "8"] {
            let out = dir.path().join(format!("{name}-{threads}.csv"));
            let mut args = vec![
                "sweep",
                "--methods",
                methods,
                "--seeds",
                "0,17",
                "--seed",
                "5",
                "--set",
                "prior.epsilon=0.2",
                "--out",
                p(&out),
            ];
            args.extend(&extra);
            ess(&bin, threads, &args)?;
            csvs.push(fs::read(&out).map_err(|e| e.to_string())?);
        }
        if csvs[0] != csvs[1] {
            return Err(format!(
                "{name} sweep CSVs differ between MS_THREADS=1 and MS_THREADS=8"
            ));
        }
        sizes.push(format!("{name} {} bytes", csvs[0].len()));
    }
    Ok(format!(
        "sweep CSVs byte-identical at MS_THREADS=1 and 8 ({})",
        sizes.join(", ")
    ))
}

fn criterion_8() -> Verdict {
    match determinism() {
        Ok(detail) => Verdict::new(true, detail),
        Err(e) => Verdict::new(false, e),
    }
}

fn end_to_end() -> Result<String, String> {
    let start = Instant::now();
    let bin = ess_binary()?;
    let dir = TempDir::new().map_err(|e| e.to_string())?;
    let data = match env::var_os("ESS_UCR_FILE") {
        Some(path) => PathBuf::from(path),
        None => {
            let data = dir.path().join("two_class.tsv");
            ess(
                &bin,
                "1",
                &[
                    "gen",
                    "--kind",
                    "sine-mix",
                    "--n",
                    "120",
                    "--length",
                    "128",
                    "--seed",
                    "2",
                    "--out",
                    p(&data),
                ],
            )?;
            data
        }
    };
    let art = dir.path().join("art");
    let fit: Value = serde_json::from_slice(
        &ess(&bin, "1", &["fit", "--data", p(&data), "--out", p(&art)])?.stdout,
    )
    .map_err(|e| format!("fit summary: {e}"))?;
    if fit["K"] != 16 || fit["window"] != 8 {
        return Err(format!("fit used K={} window={}", fit["K"], fit["window"]));
    }
    let threads = threads().to_string();
    let mut lines = Vec::new();
    for method in ["naive", "token-critic", "ess", "ablation-b"] {
        let out = dir.path().join(method);
        ess(
            &bin,
            &threads,
            &[
                "sample",
                "--artifacts",
                p(&art),
                "--method",
                method,
                "--n",
                "256",
                "--conditional",
                "--out",
                p(&out),
            ],
        )?;
        let report: Value = serde_json::from_slice(
            &ess(
                &bin,
                "1",
                &[
                    "eval",
                    "--gen",
                    p(&out.join("samples.tsv")),
                    "--real",
                    p(&data),
                    "--mode",
                    "feature",
                ],
            )?
            .stdout,
        )
        .map_err(|e| format!("{method} report: {e}"))?;
        let frechet = report["frechet"]
            .as_f64()
            .ok_or(format!("{method}: no frechet"))?;
        let is = report["is_score"]
            .as_f64()
            .ok_or(format!("{method}: no is_score"))?;
        let cas = report["cas"].as_f64().ok_or(format!("{method}: no cas"))?;
        let valid = frechet.is_finite()
            && frechet >= 0.0
            && is.is_finite()
            && is >= 1.0 - 1e-9
            && (0.0..=1.0).contains(&cas)
            && report["n_generated"] == 256;
        if !valid {
            return Err(format!("{method}: invalid report {report}"));
        }
        lines.push(format!(
            "{method} frechet {frechet:.3} is {is:.3} cas {cas:.3}"
        ));
    }
    let secs = start.elapsed().as_secs_f64();
    if secs > 300.0 {
        return Err(format!("took {secs:.1} s (limit 300 s)"));
    }
    Ok(format!("{}; {secs:.1} s (limit 300 s)", lines.join(", ")))
}

fn criterion_9() -> Verdict {
    match end_to_end() {
        Ok(detail) => Verdict::new(true, detail),
        Err(e) => Verdict::new(false, e),
    }
}

/// Naive decoding against the product of independent marginals.
fn naive_independent_tv(marginals: &[Vec<f64>], steps: usize, seed: u64) -> f64 {
    let (n, k) = (marginals.len(), marginals[0].len());
    let weight = |s: &[usize]| {
        s.iter()
            .enumerate()
            .map(|(i, &v)| marginals[i][v])
            .product::<f64>()
    };
    let joint = TabularExactPrior::from_fn(k, n, weight).expect("enumerable joint");
    let truth = Truth::enumerate(k, n, &weight);
    let cfg = SamplerConfig {
        steps,
        ..Default::default()
    };
    let cb = scalar_codebook(k);
    let ctx = SamplingContext::new(&joint, &cb, cfg).expect("valid context");
    let out = run_chains(100_000, threads(), seed, |_, rng| {
        sample_chain(&ctx, Method::Naive, rng, false)
    })
    .expect("sampling");
    truth.tv(&tokens(&out))
}

fn check_single_step_product() -> Verdict {
    let marginals = vec![vec![0.7, 0.3], vec![0.2, 0.8], vec![0.6, 0.4]];
    let tv = naive_independent_tv(&marginals, 1, 71);
    Verdict::new(
        tv <= 0.02,
        format!("T=1, N=3: TV {tv:.4} to the product law (limit 0.02)"),
    )
}

fn check_naive_independent_pair() -> Verdict {
    let tv = naive_independent_tv(&[vec![0.7, 0.3], vec![0.7, 0.3]], 10, 72);
    Verdict::new(
        tv <= 0.02,
        format!("T=10, marginals (0.7, 0.3) per slot: TV {tv:.4} (limit 0.02)"),
    )
}

fn check_token_critic_gain() -> Verdict {
    let testbed = ising();
    let naive = ising_tv(&testbed, 0.2, Method::Naive, 73);
    let critic = ising_tv(&testbed, 0.2, Method::TokenCritic, 73);
    Verdict::new(
        critic < naive,
        format!("oracle critic, eps 0.2: TV token-critic {critic:.4} vs naive {naive:.4}"),
    )
}

type Criterion = (&'static str, &'static str, fn() -> Verdict);

const CRITERIA: [Criterion; 12] = [
    ("1", "oracle consistency", criterion_1),
    ("2", "ess no-harm under exact prior", criterion_2),
    ("3", "ess gain under modeling error", criterion_3),
    ("4", "realism trace shape", criterion_4),
    ("5", "ablation ordering", criterion_5),
    ("6", "diversity guard", criterion_6),
    ("7", "unit, property and coverage suites", criterion_7),
    ("8", "sweep determinism across threads", criterion_8),
    ("9", "end-to-end smoke", criterion_9),
    // statistical operation examples that need the same sampling budget
    (
        "s1",
        "naive single step is the product law",
        check_single_step_product,
    ),
    (
        "s2",
        "naive on independent (0.7, 0.3) slots",
        check_naive_independent_pair,
    ),
    (
        "s3",
        "token-critic beats naive under modeling error",
        check_token_critic_gain,
    ),
];

fn main() -> ExitCode {
    let selected: Vec<String> = env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = Vec::new();
    for (id, name, run) in CRITERIA {
        if !selected.is_empty() && !selected.iter().any(|s| s == id) {
            continue;
        }
        let start = Instant::now();
        let verdict = run();
        let elapsed: Duration = start.elapsed();
        let status = if verdict.pass { "PASS" } else { "FAIL" };
        let kind = if id.starts_with('s') {
            "check"
        } else {
            "criterion"
        };
        println!(
            "{kind} {id} ({name}): {status}: {} [{:.1} s]",
            verdict.detail,
            elapsed.as_secs_f64()
        );
        if !verdict.pass {
            failed.push(id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all selected criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failing {failed:?}");
        ExitCode::FAILURE
    }
}
