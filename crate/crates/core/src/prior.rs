//! Prior models over tokens conditioned on partially masked sequences.
//!
//! A [`PriorModel`] returns, for every MASK slot of its input, a categorical
//! distribution over the codebook. Three implementations live here:
//!
//! * [`TabularExactPrior`] holds the full joint over all `K^N` sequences and
//!   answers with exact posterior marginals. It doubles as the ground-truth
//!   oracle for divergence checks.
//! * [`CountPrior`] is fitted from token data and conditions each slot on its
//!   immediate neighbours only.
//! * [`CorruptedPrior`] mixes another prior with the uniform distribution to
//!   inject a controlled amount of modelling error.

use std::io::{BufRead, Write};
use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::token::{Token, TokenSeq};

/// Largest joint table a [`TabularExactPrior`] will hold.
pub const MAX_ENUMERATION: usize = 1 << 20;

/// Per-slot predictions: `Some(distribution)` at MASK slots, `None` at
/// observed slots.
pub type Predictions = Vec<Option<Vec<f64>>>;

pub trait PriorModel: Send + Sync {
    /// Codebook size `K`.
    fn vocab_size(&self) -> usize;

    /// Sequence length `N`.
    fn seq_len(&self) -> usize;

    fn predict(&self, seq: &TokenSeq) -> Result<Predictions>;

    /// Predicts several masked variants. Output order follows the input.
    fn predict_batch(&self, seqs: &[TokenSeq]) -> Result<Vec<Predictions>> {
        seqs.iter().map(|s| self.predict(s)).collect()
    }
}

impl<P: PriorModel + ?Sized> PriorModel for &P {
    fn vocab_size(&self) -> usize {
        (**self).vocab_size()
    }
    fn seq_len(&self) -> usize {
        (**self).seq_len()
    }
    fn predict(&self, seq: &TokenSeq) -> Result<Predictions> {
        (**self).predict(seq)
    }
}

impl<P: PriorModel + ?Sized> PriorModel for Box<P> {
    fn vocab_size(&self) -> usize {
        (**self).vocab_size()
    }
    fn seq_len(&self) -> usize {
        (**self).seq_len()
    }
    fn predict(&self, seq: &TokenSeq) -> Result<Predictions> {
        (**self).predict(seq)
    }
}

impl<P: PriorModel + ?Sized> PriorModel for Arc<P> {
    fn vocab_size(&self) -> usize {
        (**self).vocab_size()
    }
    fn seq_len(&self) -> usize {
        (**self).seq_len()
    }
    fn predict(&self, seq: &TokenSeq) -> Result<Predictions> {
        (**self).predict(seq)
    }
}

fn check_input(seq: &TokenSeq, k: usize, n: usize) -> Result<()> {
    if seq.len() != n {
        return Err(Error::usage(format!(
            "sequence length {} does not match prior length {n}",
            seq.len()
        )));
    }
    seq.validate(k)
}

/// Index of the largest probability; ties go to the lowest token.
pub fn argmax(probs: &[f64]) -> Token {
    let mut best = 0;
    for (i, &p) in probs.iter().enumerate().skip(1) {
        if p > probs[best] {
            best = i;
        }
    }
    best
}

/// Inverse-CDF draw from a categorical distribution.
pub fn sample_categorical<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> Token {
    let u: f64 = rng.random();
    let total: f64 = probs.iter().sum();
    let target = u * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            last_positive = i;
            acc += p;
            if target < acc {
                return i;
            }
        }
    }
    last_positive
}

/// Fills every MASK slot with an independent draw from its predicted
/// distribution. Observed slots are untouched.
pub fn sample_masked<P, R>(prior: &P, seq: &TokenSeq, rng: &mut R) -> Result<TokenSeq>
where
    P: PriorModel + ?Sized,
    R: Rng + ?Sized,
{
    if seq.is_complete() {
        return Ok(seq.clone());
    }
    let preds = prior.predict(seq)?;
    let mut out = seq.clone();
    for (i, pred) in preds.iter().enumerate() {
        if let (None, Some(dist)) = (seq.get(i), pred) {
            out.set(i, Some(sample_categorical(dist, rng)));
        }
    }
    Ok(out)
}

/// Explicit probability table over all `K^N` sequences.
///
/// Sequences are indexed lexicographically with slot 0 as the most
/// significant digit.
#[derive(Clone, Debug, PartialEq)]
pub struct TabularExactPrior {
    k: usize,
    n: usize,
    joint: Vec<f64>,
    strides: Vec<usize>,
    marginals: Vec<Vec<f64>>,
}

fn table_size(k: usize, n: usize) -> Result<usize> {
    let mut size: usize = 1;
    for _ in 0..n {
        size = size
            .checked_mul(k)
            .filter(|&s| s <= MAX_ENUMERATION)
            .ok_or_else(|| {
                Error::usage(format!(
                    "K^N for K={k}, N={n} exceeds the enumeration guard 2^20"
                ))
            })?;
    }
    Ok(size)
}

impl TabularExactPrior {
    /// Builds the prior from a table of `K^N` nonnegative weights, normalizing
    /// them to sum to one.
    pub fn new(k: usize, n: usize, weights: Vec<f64>) -> Result<Self> {
        if k < 2 || n == 0 {
            return Err(Error::usage(format!(
                "tabular prior needs K >= 2 and N >= 1 (K={k}, N={n})"
            )));
        }
        let size = table_size(k, n)?;
        if weights.len() != size {
            return Err(Error::usage(format!(
                "joint table has {} entries, expected K^N = {size}",
                weights.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::usage("joint weights must be finite and nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::usage("joint weights sum to zero"));
        }
        let joint: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let strides = (0..n).map(|i| k.pow((n - 1 - i) as u32)).collect();
        let mut prior = Self {
            k,
            n,
            joint,
            strides,
            marginals: Vec::new(),
        };
        prior.marginals = (0..n)
            .map(|i| {
                let mut m = vec![0.0; k];
                for (idx, &p) in prior.joint.iter().enumerate() {
                    m[prior.digit(idx, i)] += p;
                }
                m
            })
            .collect();
        Ok(prior)
    }

    /// Builds the prior from an unnormalized weight function over token
    /// sequences.
    pub fn from_fn(k: usize, n: usize, weight: impl Fn(&[Token]) -> f64) -> Result<Self> {
        let size = table_size(k, n)?;
        let mut tokens = vec![0; n];
        let weights = (0..size)
            .map(|idx| {
                decode_index(idx, k, &mut tokens);
                weight(&tokens)
            })
            .collect();
        Self::new(k, n, weights)
    }

    /// Point mass on a single sequence.
    pub fn point_mass(k: usize, tokens: &[Token]) -> Result<Self> {
        let target = tokens.to_vec();
        Self::from_fn(k, tokens.len(), |s| {
            if s == target.as_slice() {
                1.0
            } else {
                0.0
            }
        })
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.joint
    }

    pub fn index_of(&self, tokens: &[Token]) -> usize {
        tokens.iter().zip(&self.strides).map(|(t, s)| t * s).sum()
    }

    pub fn tokens_of(&self, index: usize) -> Vec<Token> {
        let mut tokens = vec![0; self.n];
        decode_index(index, self.k, &mut tokens);
        tokens
    }

    pub fn probability(&self, tokens: &[Token]) -> f64 {
        self.joint[self.index_of(tokens)]
    }

    fn digit(&self, index: usize, slot: usize) -> usize {
        (index / self.strides[slot]) % self.k
    }

    /// Per-slot marginal of the joint, ignoring any context.
    pub fn marginal(&self, slot: usize) -> &[f64] {
        &self.marginals[slot]
    }

    /// Draws a full sequence directly from the joint.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<Token> {
        self.tokens_of(sample_categorical(&self.joint, rng))
    }

    /// Posterior marginals of the `free` slots given every other non-MASK
    /// slot of `seq`, by summing the joint over all consistent completions.
    /// Returns `None` if the conditioning event has probability zero.
    fn posterior(&self, seq: &TokenSeq, free: &[usize]) -> Option<Vec<Vec<f64>>> {
        let mut base = 0;
        for (i, slot) in seq.slots().iter().enumerate() {
            if let Some(t) = slot {
                if !free.contains(&i) {
                    base += t * self.strides[i];
                }
            }
        }
        let mut out = vec![vec![0.0; self.k]; free.len()];
        let mut digits = vec![0usize; free.len()];
        let mut total = 0.0;
        let mut index = base;
        loop {
            let p = self.joint[index];
            if p > 0.0 {
                total += p;
                for (j, &d) in digits.iter().enumerate() {
                    out[j][d] += p;
                }
            }
            // odometer over the free slots, last one fastest
            let mut j = free.len();
            loop {
                if j == 0 {
                    if total <= 0.0 {
                        return None;
                    }
                    for dist in &mut out {
                        for v in dist.iter_mut() {
                            *v /= total;
                        }
                    }
                    return Some(out);
                }
                j -= 1;
                let stride = self.strides[free[j]];
                if digits[j] + 1 < self.k {
                    digits[j] += 1;
                    index += stride;
                    break;
                }
                index -= digits[j] * stride;
                digits[j] = 0;
            }
        }
    }

    /// Exact distribution of slot `slot` given all other non-MASK slots.
    /// The slot itself may be filled or MASK; its value is ignored.
    pub fn exact_conditional(&self, seq: &TokenSeq, slot: usize) -> Result<Vec<f64>> {
        check_input(seq, self.k, self.n)?;
        if slot >= self.n {
            return Err(Error::usage(format!(
                "slot {slot} out of range for N={}",
                self.n
            )));
        }
        self.posterior(seq, &[slot])
            .map(|mut v| v.remove(0))
            .ok_or(Error::ZeroSupport)
    }

    /// Like [`exact_conditional`](Self::exact_conditional), but falls back to
    /// the slot's unconditional marginal when the context has zero
    /// probability.
    pub fn conditional_or_marginal(&self, seq: &TokenSeq, slot: usize) -> Result<Vec<f64>> {
        match self.exact_conditional(seq, slot) {
            Err(Error::ZeroSupport) => Ok(self.marginals[slot].clone()),
            other => other,
        }
    }

    /// Writes the `K N` header followed by one probability per line in index
    /// order.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{} {}", self.k, self.n)?;
        for p in &self.joint {
            writeln!(w, "{p}")?;
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::parse(1, "empty prior file"))??;
        let (k, n) = parse_header(&header)?;
        let mut weights = Vec::new();
        for (idx, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let w: f64 = line
                .trim()
                .parse()
                .map_err(|e| Error::parse(idx + 2, format!("{e}")))?;
            weights.push(w);
        }
        Self::new(k, n, weights).map_err(|e| Error::parse(0, e.to_string()))
    }
}

fn decode_index(mut index: usize, k: usize, tokens: &mut [Token]) {
    for slot in tokens.iter_mut().rev() {
        *slot = index % k;
        index /= k;
    }
}

fn parse_header(header: &str) -> Result<(usize, usize)> {
    let parts: Vec<usize> = header
        .split_whitespace()
        .map(str::parse)
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::parse(1, format!("bad header {header:?}: {e}")))?;
    match parts[..] {
        [k, n] => Ok((k, n)),
        _ => Err(Error::parse(
            1,
            format!("header must be `K N`, got {header:?}"),
        )),
    }
}

impl PriorModel for TabularExactPrior {
    fn vocab_size(&self) -> usize {
        self.k
    }

    fn seq_len(&self) -> usize {
        self.n
    }

    /// Exact posterior marginals of each MASK slot given the observed slots.
    /// A zero-probability context falls back to the unconditional marginals.
    fn predict(&self, seq: &TokenSeq) -> Result<Predictions> {
        check_input(seq, self.k, self.n)?;
        let free: Vec<usize> = seq.masked_positions().collect();
        let dists = self
            .posterior(seq, &free)
            .unwrap_or_else(|| free.iter().map(|&i| self.marginals[i].clone()).collect());
        let mut out = vec![None; self.n];
        for (slot, dist) in free.into_iter().zip(dists) {
            out[slot] = Some(dist);
        }
        Ok(out)
    }
}

/// Neighbour-conditioned count tables with add-one smoothing.
///
/// For each slot `i` the table counts token `v` under the context
/// `(left neighbour, right neighbour)`, where a missing neighbour at either
/// end of the sequence is the boundary symbol `K`. At prediction time a MASK
/// neighbour is marginalized by summing counts over that neighbour.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CountPrior {
    k: usize,
    n: usize,
    counts: Vec<u64>,
}

impl CountPrior {
    fn ctx(&self) -> usize {
        self.k + 1
    }

    fn offset(&self, slot: usize, left: usize, right: usize) -> usize {
        ((slot * self.ctx() + left) * self.ctx() + right) * self.k
    }

    /// Fits the tables from MASK-free training sequences.
    pub fn fit(data: &[TokenSeq], k: usize) -> Result<Self> {
        let first = data
            .first()
            .ok_or_else(|| Error::usage("cannot fit a count prior on empty data"))?;
        if k < 2 {
            return Err(Error::usage(format!("count prior needs K >= 2, got {k}")));
        }
        let n = first.len();
        if n == 0 {
            return Err(Error::usage("training sequences are empty"));
        }
        let mut prior = Self {
            k,
            n,
            counts: vec![0; n * (k + 1) * (k + 1) * k],
        };
        for (row, seq) in data.iter().enumerate() {
            if seq.len() != n {
                return Err(Error::usage(format!(
                    "training sequence {row} has length {}, expected {n}",
                    seq.len()
                )));
            }
            seq.validate(k)?;
            let tokens = seq.tokens()?;
            for i in 0..n {
                let left = if i == 0 { k } else { tokens[i - 1] };
                let right = if i + 1 == n { k } else { tokens[i + 1] };
                let off = prior.offset(i, left, right);
                prior.counts[off + tokens[i]] += 1;
            }
        }
        Ok(prior)
    }

    /// Smoothed distribution of `slot` given optional neighbour tokens.
    /// `None` marginalizes over that neighbour.
    pub fn conditional(&self, slot: usize, left: Option<Token>, right: Option<Token>) -> Vec<f64> {
        let k = self.k;
        let lefts: Vec<usize> = match (slot, left) {
            (0, _) => vec![k],
            (_, Some(t)) => vec![t],
            (_, None) => (0..k).collect(),
        };
        let rights: Vec<usize> = match (slot + 1 == self.n, right) {
            (true, _) => vec![k],
            (false, Some(t)) => vec![t],
            (false, None) => (0..k).collect(),
        };
        let mut acc = vec![0u64; k];
        for &l in &lefts {
            for &r in &rights {
                let off = self.offset(slot, l, r);
                for (a, c) in acc.iter_mut().zip(&self.counts[off..off + k]) {
                    *a += c;
                }
            }
        }
        let total: u64 = acc.iter().sum();
        let denom = (total + k as u64) as f64;
        acc.iter().map(|&c| (c + 1) as f64 / denom).collect()
    }

    /// Writes the `K N` header followed by one line per non-empty context:
    /// `slot left right c_0 .. c_{K-1}`, with `K` as the boundary symbol.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{} {}", self.k, self.n)?;
        for slot in 0..self.n {
            for l in 0..self.ctx() {
                for r in 0..self.ctx() {
                    let off = self.offset(slot, l, r);
                    let row = &self.counts[off..off + self.k];
                    if row.iter().all(|&c| c == 0) {
                        continue;
                    }
                    let cells: Vec<String> = row.iter().map(u64::to_string).collect();
                    writeln!(w, "{slot} {l} {r} {}", cells.join(" "))?;
                }
            }
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::parse(1, "empty prior file"))??;
        let (k, n) = parse_header(&header)?;
        if k < 2 || n == 0 {
            return Err(Error::parse(1, format!("invalid dimensions K={k}, N={n}")));
        }
        let mut prior = Self {
            k,
            n,
            counts: vec![0; n * (k + 1) * (k + 1) * k],
        };
        for (idx, line) in lines.enumerate() {
            let line_no = idx + 2;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<u64> = line
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::parse(line_no, format!("{e}")))?;
            if fields.len() != 3 + k {
                return Err(Error::parse(
                    line_no,
                    format!("expected {} fields, got {}", 3 + k, fields.len()),
                ));
            }
            let (slot, l, r) = (fields[0] as usize, fields[1] as usize, fields[2] as usize);
            if slot >= n || l > k || r > k {
                return Err(Error::parse(line_no, "context index out of range"));
            }
            let off = prior.offset(slot, l, r);
            prior.counts[off..off + k].copy_from_slice(&fields[3..]);
        }
        Ok(prior)
    }
}

impl PriorModel for CountPrior {
    fn vocab_size(&self) -> usize {
        self.k
    }

    fn seq_len(&self) -> usize {
        self.n
    }

    fn predict(&self, seq: &TokenSeq) -> Result<Predictions> {
        check_input(seq, self.k, self.n)?;
        Ok((0..self.n)
            .map(|i| {
                seq.is_masked(i).then(|| {
                    let left = if i > 0 { seq.get(i - 1) } else { None };
                    let right = if i + 1 < self.n { seq.get(i + 1) } else { None };
                    self.conditional(i, left, right)
                })
            })
            .collect())
    }
}

/// `(1 − ε) · inner + ε · uniform`.
#[derive(Clone, Debug)]
pub struct CorruptedPrior<P> {
    inner: P,
    epsilon: f64,
}

impl<P: PriorModel> CorruptedPrior<P> {
    pub fn new(inner: P, epsilon: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(Error::usage(format!(
                "epsilon must lie in [0, 1], got {epsilon}"
            )));
        }
        Ok(Self { inner, epsilon })
    }

    pub fn inner(&self) -> &P {
        &self.inner
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

impl<P: PriorModel> PriorModel for CorruptedPrior<P> {
    fn vocab_size(&self) -> usize {
        self.inner.vocab_size()
    }

    fn seq_len(&self) -> usize {
        self.inner.seq_len()
    }

    fn predict(&self, seq: &TokenSeq) -> Result<Predictions> {
        let eps = self.epsilon;
        let uniform = 1.0 / self.vocab_size() as f64;
        let mut preds = self.inner.predict(seq)?;
        for dist in preds.iter_mut().flatten() {
            for p in dist.iter_mut() {
                *p = if eps == 0.0 {
                    *p
                } else if eps == 1.0 {
                    uniform
                } else {
                    (1.0 - eps) * *p + eps * uniform
                };
            }
        }
        Ok(preds)
    }
}

/// Reads either prior file format. The two share the `K N` header; a
/// tabular file has one field per data line, a count file has `3 + K`.
pub fn read_prior_file(path: &std::path::Path) -> Result<AnyPrior> {
    let text = std::fs::read_to_string(path)?;
    let second = text.lines().skip(1).find(|l| !l.trim().is_empty());
    match second.map(|l| l.split_whitespace().count()) {
        Some(1) => Ok(AnyPrior::Tabular(TabularExactPrior::read_from(
            text.as_bytes(),
        )?)),
        _ => Ok(AnyPrior::Count(CountPrior::read_from(text.as_bytes())?)),
    }
}

/// A prior loaded from disk.
#[derive(Clone, Debug)]
pub enum AnyPrior {
    Tabular(TabularExactPrior),
    Count(CountPrior),
}

impl PriorModel for AnyPrior {
    fn vocab_size(&self) -> usize {
        match self {
            AnyPrior::Tabular(p) => p.vocab_size(),
            AnyPrior::Count(p) => p.vocab_size(),
        }
    }

    fn seq_len(&self) -> usize {
        match self {
            AnyPrior::Tabular(p) => p.seq_len(),
            AnyPrior::Count(p) => p.seq_len(),
        }
    }

    fn predict(&self, seq: &TokenSeq) -> Result<Predictions> {
        match self {
            AnyPrior::Tabular(p) => p.predict(seq),
            AnyPrior::Count(p) => p.predict(seq),
        }
    }
}
