//! Token sequences, mask matrices, confidence vectors and codebooks.
//!
//! These are the values every sampler passes around. They are plain immutable
//! data once built and are `Send + Sync`.

use std::cmp::Ordering;
use std::fmt;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};

/// Index of a codebook row.
pub type Token = usize;

/// Fixed-length sequence of slots, each holding a token or the MASK sentinel
/// (`None`).
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TokenSeq {
    slots: Vec<Option<Token>>,
}

impl TokenSeq {
    pub fn new(slots: Vec<Option<Token>>) -> Self {
        Self { slots }
    }

    /// A sequence with no MASK slots.
    pub fn from_tokens(tokens: &[Token]) -> Self {
        Self {
            slots: tokens.iter().map(|&t| Some(t)).collect(),
        }
    }

    /// The all-MASK sequence that every decoder starts from.
    pub fn masked(len: usize) -> Self {
        Self {
            slots: vec![None; len],
        }
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn slots(&self) -> &[Option<Token>] {
        &self.slots
    }

    pub fn get(&self, i: usize) -> Option<Token> {
        self.slots[i]
    }

    pub fn set(&mut self, i: usize, value: Option<Token>) {
        self.slots[i] = value;
    }

    pub fn is_masked(&self, i: usize) -> bool {
        self.slots[i].is_none()
    }

    pub fn mask_count(&self) -> usize {
        self.slots.iter().filter(|s| s.is_none()).count()
    }

    pub fn is_complete(&self) -> bool {
        self.slots.iter().all(Option::is_some)
    }

    pub fn masked_positions(&self) -> impl Iterator<Item = usize> + '_ {
        self.slots
            .iter()
            .enumerate()
            .filter_map(|(i, s)| s.is_none().then_some(i))
    }

    /// Tokens of a MASK-free sequence.
    pub fn tokens(&self) -> Result<Vec<Token>> {
        self.slots
            .iter()
            .enumerate()
            .map(|(i, s)| s.ok_or_else(|| Error::usage(format!("slot {i} is MASK"))))
            .collect()
    }

    /// Checks that every non-MASK entry is below `k`.
    pub fn validate(&self, k: usize) -> Result<()> {
        match self.slots.iter().flatten().find(|&&t| t >= k) {
            Some(t) => Err(Error::usage(format!("token {t} out of range for K={k}"))),
            None => Ok(()),
        }
    }

    /// Copy of `self` with slot `i` masked.
    pub fn with_masked(&self, i: usize) -> Self {
        let mut out = self.clone();
        out.slots[i] = None;
        out
    }
}

impl fmt::Display for TokenSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.slots.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            match s {
                Some(t) => write!(f, "{t}")?,
                None => f.write_str("M")?,
            }
        }
        Ok(())
    }
}

/// Keep/mask bits, `true` = keep (1), `false` = mask (0).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MaskMatrix {
    bits: Vec<bool>,
}

impl MaskMatrix {
    pub fn new(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    pub fn all_keep(len: usize) -> Self {
        Self {
            bits: vec![true; len],
        }
    }

    pub fn all_mask(len: usize) -> Self {
        Self {
            bits: vec![false; len],
        }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn keeps(&self, i: usize) -> bool {
        self.bits[i]
    }

    pub fn keep_count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

/// Elementwise product `m ⊙ s`: slots with a 0 bit become MASK.
///
/// Masking a slot that is already MASK is a no-op.
pub fn apply_mask(seq: &TokenSeq, mask: &MaskMatrix) -> Result<TokenSeq> {
    if seq.len() != mask.len() {
        return Err(Error::usage(format!(
            "mask length {} does not match sequence length {}",
            mask.len(),
            seq.len()
        )));
    }
    let slots = seq
        .slots
        .iter()
        .zip(&mask.bits)
        .map(|(&s, &keep)| if keep { s } else { None })
        .collect();
    Ok(TokenSeq { slots })
}

/// One per-slot confidence value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Score {
    Value(f64),
    /// Ranks above every numeric score. Marks slots that must stay kept.
    Pinned,
}

impl Score {
    pub fn value(self) -> Option<f64> {
        match self {
            Score::Value(v) => Some(v),
            Score::Pinned => None,
        }
    }

    fn rank_cmp(&self, other: &Score) -> Ordering {
        match (self, other) {
            (Score::Pinned, Score::Pinned) => Ordering::Equal,
            (Score::Pinned, Score::Value(_)) => Ordering::Greater,
            (Score::Value(_), Score::Pinned) => Ordering::Less,
            (Score::Value(a), Score::Value(b)) => a.total_cmp(b),
        }
    }
}

/// Where a confidence vector came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConfidenceKind {
    PriorProb,
    SelfCritic,
    ExternalCritic,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConfidenceVector {
    scores: Vec<Score>,
    kind: ConfidenceKind,
}

impl ConfidenceVector {
    pub fn new(scores: Vec<Score>, kind: ConfidenceKind) -> Self {
        Self { scores, kind }
    }

    pub fn from_values(values: &[f64], kind: ConfidenceKind) -> Self {
        Self {
            scores: values.iter().map(|&v| Score::Value(v)).collect(),
            kind,
        }
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn scores(&self) -> &[Score] {
        &self.scores
    }

    pub fn scores_mut(&mut self) -> &mut [Score] {
        &mut self.scores
    }

    pub fn kind(&self) -> ConfidenceKind {
        self.kind
    }

    pub fn pin(&mut self, i: usize) {
        self.scores[i] = Score::Pinned;
    }

    /// Slot indices from most to least confident. Ties go to the lower index.
    pub fn ranking(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.scores.len()).collect();
        // stable sort keeps lower indices first among equal scores
        order.sort_by(|&a, &b| self.scores[b].rank_cmp(&self.scores[a]));
        order
    }
}

/// Keeps the `keep` highest-scoring slots (PINNED first, ties to the lowest
/// index) and masks the rest.
pub fn top_k_mask(conf: &ConfidenceVector, keep: usize) -> Result<MaskMatrix> {
    let n = conf.len();
    if keep > n {
        return Err(Error::usage(format!("cannot keep {keep} of {n} slots")));
    }
    let mut bits = vec![false; n];
    for &i in conf.ranking().iter().take(keep) {
        bits[i] = true;
    }
    Ok(MaskMatrix { bits })
}

/// `K` latent vectors of dimension `D`, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Codebook {
    k: usize,
    dim: usize,
    data: Vec<f64>,
}

impl Codebook {
    /// Builds a codebook from rows. Requires `K >= 2`, equal-length finite
    /// rows and no two identical rows.
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let k = rows.len();
        if k < 2 {
            return Err(Error::usage(format!("codebook needs K >= 2, got {k}")));
        }
        let dim = rows[0].len();
        if dim == 0 {
            return Err(Error::usage("codebook rows must be non-empty"));
        }
        let mut data = Vec::with_capacity(k * dim);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::usage(format!(
                    "codebook row {i} has {} components, expected {dim}",
                    row.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::usage(format!("codebook row {i} is not finite")));
            }
            data.extend_from_slice(row);
        }
        let cb = Self { k, dim, data };
        if let Some((a, b)) = cb.first_duplicate() {
            return Err(Error::usage(format!(
                "codebook rows {a} and {b} are identical"
            )));
        }
        Ok(cb)
    }

    pub fn size(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, token: Token) -> &[f64] {
        &self.data[token * self.dim..(token + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    fn first_duplicate(&self) -> Option<(usize, usize)> {
        for a in 0..self.k {
            for b in a + 1..self.k {
                if self.row(a) == self.row(b) {
                    return Some((a, b));
                }
            }
        }
        None
    }

    /// Squared Euclidean distance between two codebook rows.
    pub fn sq_dist(&self, a: Token, b: Token) -> Result<f64> {
        if a >= self.k || b >= self.k {
            return Err(Error::usage(format!(
                "token pair ({a}, {b}) out of range for K={}",
                self.k
            )));
        }
        Ok(sq_dist(self.row(a), self.row(b)))
    }

    /// Writes the `K D` header followed by one row per line.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{} {}", self.k, self.dim)?;
        for row in self.rows() {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(w, "{}", line.join(" "))?;
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::parse(1, "empty codebook file"))?;
        let header = header?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|s| s.parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::parse(1, format!("bad header {header:?}: {e}")))?;
        let [k, dim] = dims[..] else {
            return Err(Error::parse(
                1,
                format!("header must be `K D`, got {header:?}"),
            ));
        };
        let mut rows = Vec::with_capacity(k);
        for (idx, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let row: Vec<f64> = line
                .split_whitespace()
                .map(|s| s.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::parse(idx + 1, e.to_string()))?;
            if row.len() != dim {
                return Err(Error::parse(
                    idx + 1,
                    format!("expected {dim} components, got {}", row.len()),
                ));
            }
            rows.push(row);
        }
        if rows.len() != k {
            return Err(Error::parse(
                0,
                format!("expected {k} rows, got {}", rows.len()),
            ));
        }
        Codebook::new(rows).map_err(|e| Error::parse(0, e.to_string()))
    }
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Squared latent distance between the codebook vectors of two tokens.
pub fn latent_sq_dist(cb: &Codebook, a: Token, b: Token) -> Result<f64> {
    cb.sq_dist(a, b)
}
