//! Windowed k-means tokenizer for real-valued series.
//!
//! A series of length `L` is split into `L / window` consecutive windows; each
//! window becomes the token of its nearest codebook row.

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::prior::sample_categorical;
use crate::token::{sq_dist, Codebook, Token, TokenSeq};

/// Offset added to a duplicated centroid so every codebook row is distinct.
const DUPLICATE_NUDGE: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VQSpec {
    /// Samples per token.
    pub window: usize,
    /// Codebook size.
    pub k: usize,
    /// Maximum Lloyd iterations.
    pub iters: usize,
    pub seed: u64,
}

impl Default for VQSpec {
    fn default() -> Self {
        Self {
            window: 8,
            k: 16,
            iters: 50,
            seed: 0,
        }
    }
}

impl VQSpec {
    pub fn validate(&self) -> Result<()> {
        if self.window == 0 {
            return Err(Error::usage("vq window must be at least 1"));
        }
        if self.k < 2 {
            return Err(Error::usage(format!(
                "vq K must be at least 2, got {}",
                self.k
            )));
        }
        Ok(())
    }
}

/// Outcome of [`fit_codebook_report`].
#[derive(Clone, Debug, PartialEq)]
pub struct CodebookFit {
    pub codebook: Codebook,
    /// Mean squared distance from each window to its centroid, per sample.
    pub mse: f64,
    pub iterations: usize,
    /// Centroids that had to be nudged apart.
    pub nudged_duplicates: usize,
    /// Series whose tail was dropped to fit a whole number of windows.
    pub truncated_series: usize,
}

/// Splits a series into whole windows, dropping any tail shorter than
/// `window`. Returns the windows and whether a tail was dropped.
pub fn windows_of(series: &[f64], window: usize) -> (Vec<&[f64]>, bool) {
    let chunks = series.chunks_exact(window);
    let truncated = !chunks.remainder().is_empty();
    (chunks.collect(), truncated)
}

pub fn fit_codebook(series: &[Vec<f64>], spec: &VQSpec) -> Result<Codebook> {
    fit_codebook_report(series, spec).map(|fit| fit.codebook)
}

/// k-means over all windows of all series, seeded by k-means++.
///
/// Series lengths not divisible by the window are right-truncated with a
/// warning. An emptied cluster is re-seeded with the window farthest from its
/// centroid. Identical centroids are nudged apart by `1e-6` per coordinate.
pub fn fit_codebook_report(series: &[Vec<f64>], spec: &VQSpec) -> Result<CodebookFit> {
    spec.validate()?;
    let mut points: Vec<&[f64]> = Vec::new();
    let mut truncated_series = 0;
    for s in series {
        let (w, truncated) = windows_of(s, spec.window);
        if truncated {
            truncated_series += 1;
        }
        points.extend(w);
    }
    if truncated_series > 0 {
        warn!(
            "{truncated_series} series not divisible by window {}; tails dropped",
            spec.window
        );
    }
    if points.len() < spec.k {
        return Err(Error::usage(format!(
            "k-means needs at least K = {} windows, got {}",
            spec.k,
            points.len()
        )));
    }
    if let Some(bad) = points.iter().position(|p| p.iter().any(|v| !v.is_finite())) {
        return Err(Error::usage(format!(
            "window {bad} contains a non-finite value"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut centroids = kmeans_plus_plus(&points, spec.k, &mut rng);
    let mut assign = vec![usize::MAX; points.len()];
    let mut iterations = 0;
    for _ in 0..spec.iters.max(1) {
        iterations += 1;
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let c = nearest(&centroids, p).0;
            if assign[i] != c {
                assign[i] = c;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        update_centroids(&points, &mut assign, &mut centroids);
    }

    let nudged_duplicates = separate_duplicates(&mut centroids);
    if nudged_duplicates > 0 {
        warn!("{nudged_duplicates} duplicate centroids nudged by {DUPLICATE_NUDGE}");
    }
    let total: f64 = points.iter().map(|p| nearest(&centroids, p).1).sum();
    let mse = total / (points.len() * spec.window) as f64;
    Ok(CodebookFit {
        codebook: Codebook::new(centroids)?,
        mse,
        iterations,
        nudged_duplicates,
        truncated_series,
    })
}

fn kmeans_plus_plus<R: Rng + ?Sized>(points: &[&[f64]], k: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let first = rng.random_range(0..points.len());
    let mut centroids = vec![points[first].to_vec()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let pick = sample_categorical(&d2, rng);
        let c = points[pick].to_vec();
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, &c));
        }
        centroids.push(c);
    }
    centroids
}

/// Index of and squared distance to the nearest row; ties go to the lowest
/// index.
fn nearest<R: AsRef<[f64]>>(rows: &[R], point: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, row) in rows.iter().enumerate() {
        let d = sq_dist(row.as_ref(), point);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

fn update_centroids(points: &[&[f64]], assign: &mut [usize], centroids: &mut [Vec<f64>]) {
    let dim = centroids[0].len();
    let mut sums = vec![vec![0.0; dim]; centroids.len()];
    let mut counts = vec![0usize; centroids.len()];
    for (p, &a) in points.iter().zip(assign.iter()) {
        counts[a] += 1;
        for (s, v) in sums[a].iter_mut().zip(p.iter()) {
            *s += v;
        }
    }
    for (c, (sum, &n)) in centroids.iter_mut().zip(sums.iter().zip(&counts)) {
        if n > 0 {
            *c = sum.iter().map(|s| s / n as f64).collect();
        }
    }
    for empty in (0..centroids.len()).filter(|&c| counts[c] == 0) {
        let (far, _) = points
            .iter()
            .enumerate()
            .map(|(i, p)| (i, sq_dist(p, &centroids[assign[i]])))
            .fold((0, f64::NEG_INFINITY), |best, cur| {
                if cur.1 > best.1 {
                    cur
                } else {
                    best
                }
            });
        centroids[empty] = points[far].to_vec();
        assign[far] = empty;
    }
}

fn separate_duplicates(centroids: &mut [Vec<f64>]) -> usize {
    let mut nudged = 0;
    for b in 1..centroids.len() {
        let mut bump = 1.0;
        while (0..b).any(|a| centroids[a] == centroids[b]) {
            for v in centroids[b].iter_mut() {
                *v += bump * DUPLICATE_NUDGE;
            }
            bump += 1.0;
            nudged += 1;
        }
    }
    nudged
}

/// Maps each window to its nearest codebook row.
pub fn encode(cb: &Codebook, series: &[f64]) -> Result<TokenSeq> {
    let window = cb.dim();
    if !series.len().is_multiple_of(window) {
        return Err(Error::usage(format!(
            "series length {} is not a multiple of window {window}",
            series.len()
        )));
    }
    let rows: Vec<&[f64]> = cb.rows().collect();
    let tokens: Vec<Token> = series
        .chunks_exact(window)
        .map(|w| nearest(&rows, w).0)
        .collect();
    Ok(TokenSeq::from_tokens(&tokens))
}

/// Concatenates the codebook rows of a MASK-free sequence.
pub fn decode(cb: &Codebook, seq: &TokenSeq) -> Result<Vec<f64>> {
    let tokens = seq.tokens()?;
    seq.validate(cb.size())?;
    Ok(tokens
        .iter()
        .flat_map(|&t| cb.row(t).iter().copied())
        .collect())
}

/// Mean squared error per sample of `decode(encode(x))` over all series.
pub fn reconstruction_mse(cb: &Codebook, series: &[Vec<f64>]) -> Result<f64> {
    let mut total = 0.0;
    let mut count = 0;
    for s in series {
        let rec = decode(cb, &encode(cb, s)?)?;
        total += sq_dist(s, &rec);
        count += s.len();
    }
    if count == 0 {
        return Err(Error::usage("no samples to reconstruct"));
    }
    Ok(total / count as f64)
}
