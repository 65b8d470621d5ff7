//! Sample-quality metrics.
//!
//! On enumerable token spaces samples are compared with the true joint
//! exactly ([`tv_distance`], [`kl_divergence`]). Elsewhere series are reduced
//! to five summary features and compared by a Fréchet distance, a classifier
//! entropy score and train-on-generated accuracy. The feature metrics are only
//! meaningful for ranking samplers on the same data.

use std::collections::BTreeMap;
use std::io::Write;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::data::LabeledSeries;
use crate::error::{Error, Result};
use crate::token::{Token, TokenSeq};

/// Added to each covariance diagonal before the Fréchet matrix square root.
const COV_RIDGE: f64 = 1e-6;
const VAR_GUARD: f64 = 1e-12;

/// `½ Σ |p − q|`.
pub fn tv_distance(p: &[f64], q: &[f64]) -> Result<f64> {
    check_shapes(p, q)?;
    Ok(0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

/// `KL(p ‖ q)` in nats. Infinite when `p` puts mass where `q` has none.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    check_shapes(p, q)?;
    let mut total = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        if a > 0.0 {
            if b <= 0.0 {
                return Ok(f64::INFINITY);
            }
            total += a * (a / b).ln();
        }
    }
    Ok(total.max(0.0))
}

fn check_shapes(p: &[f64], q: &[f64]) -> Result<()> {
    if p.len() != q.len() {
        return Err(Error::usage(format!(
            "distributions have {} and {} outcomes",
            p.len(),
            q.len()
        )));
    }
    Ok(())
}

/// Empirical distribution of token sequences over all `K^N` outcomes, indexed
/// with slot 0 as the most significant digit.
pub fn empirical_distribution(samples: &[TokenSeq], k: usize, n: usize) -> Result<Vec<f64>> {
    let size = (k as u128).pow(n as u32);
    if size > crate::prior::MAX_ENUMERATION as u128 {
        return Err(Error::usage(format!(
            "K^N = {size} is too large to enumerate"
        )));
    }
    let mut counts = vec![0.0; size as usize];
    for (i, s) in samples.iter().enumerate() {
        if s.len() != n {
            return Err(Error::usage(format!(
                "sample {i} has {} slots, expected {n}",
                s.len()
            )));
        }
        s.validate(k)?;
        let index = s
            .tokens()?
            .iter()
            .fold(0usize, |acc, &t: &Token| acc * k + t);
        counts[index] += 1.0;
    }
    if !samples.is_empty() {
        let total = samples.len() as f64;
        counts.iter_mut().for_each(|c| *c /= total);
    }
    Ok(counts)
}

/// Summary features of one series.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    /// Lag-1 autocorrelation; 0 for a constant series.
    pub autocorr: f64,
    /// Sign changes of `x − mean` per sample.
    pub crossing_rate: f64,
    /// Fraction of the non-DC spectral energy in the lower half of the
    /// positive-frequency bins; 0 for a constant series.
    pub low_energy: f64,
}

impl FeatureVector {
    pub const DIM: usize = 5;

    pub fn of(series: &[f64]) -> Result<Self> {
        let len = series.len();
        if len == 0 {
            return Err(Error::usage("cannot compute features of an empty series"));
        }
        if series.iter().any(|v| !v.is_finite()) {
            return Err(Error::usage("series contains a non-finite value"));
        }
        let mean = series.iter().sum::<f64>() / len as f64;
        let centered: Vec<f64> = series.iter().map(|v| v - mean).collect();
        let ss: f64 = centered.iter().map(|c| c * c).sum();
        let std = (ss / len as f64).sqrt();
        let autocorr = if ss <= VAR_GUARD {
            0.0
        } else {
            centered.windows(2).map(|w| w[0] * w[1]).sum::<f64>() / ss
        };
        let crossings = centered
            .windows(2)
            .filter(|w| (w[0] < 0.0 && w[1] > 0.0) || (w[0] > 0.0 && w[1] < 0.0))
            .count();
        Ok(Self {
            mean,
            std,
            autocorr,
            crossing_rate: crossings as f64 / len as f64,
            low_energy: low_band_fraction(&centered),
        })
    }

    pub fn to_array(self) -> [f64; Self::DIM] {
        [
            self.mean,
            self.std,
            self.autocorr,
            self.crossing_rate,
            self.low_energy,
        ]
    }
}

fn low_band_fraction(centered: &[f64]) -> f64 {
    let len = centered.len();
    let half = len / 2;
    if half == 0 {
        return 0.0;
    }
    let mut buf: Vec<Complex<f64>> = centered.iter().map(|&v| Complex::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(len).process(&mut buf);
    let power: Vec<f64> = buf[1..=half].iter().map(|c| c.norm_sqr()).collect();
    let total: f64 = power.iter().sum();
    if total <= VAR_GUARD {
        return 0.0;
    }
    power[..half.div_ceil(2)].iter().sum::<f64>() / total
}

pub fn features_of(series: &[Vec<f64>]) -> Result<Vec<FeatureVector>> {
    series.iter().map(|s| FeatureVector::of(s)).collect()
}

fn mean_and_cov(rows: &[Vec<f64>]) -> (DVector<f64>, DMatrix<f64>) {
    let n = rows.len();
    let d = rows[0].len();
    let x = DMatrix::from_fn(n, d, |i, j| rows[i][j]);
    let mean = DVector::from_fn(d, |j, _| x.column(j).mean());
    let mut centered = x;
    for j in 0..d {
        let m = mean[j];
        centered.column_mut(j).add_scalar_mut(-m);
    }
    let cov =
        centered.transpose() * &centered / (n - 1) as f64 + DMatrix::identity(d, d) * COV_RIDGE;
    (mean, cov)
}

/// Square root of a symmetric positive semidefinite matrix, with negative
/// eigenvalues clipped to zero.
fn sqrt_psd(m: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let roots = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose()
}

/// `‖μ_a − μ_b‖² + Tr(Σ_a + Σ_b − 2 (Σ_a^½ Σ_b Σ_a^½)^½)` over rows of equal
/// dimension, with sample covariances.
pub fn frechet_distance(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<f64> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::usage(format!(
            "Fréchet distance needs at least 2 vectors per set, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let d = a[0].len();
    if d == 0 || a.iter().chain(b).any(|r| r.len() != d) {
        return Err(Error::usage(
            "Fréchet distance needs vectors of one non-zero dimension",
        ));
    }
    let (mu_a, cov_a) = mean_and_cov(a);
    let (mu_b, cov_b) = mean_and_cov(b);
    let root_a = sqrt_psd(&cov_a);
    let cross = sqrt_psd(&(&root_a * &cov_b * &root_a));
    let value = (mu_a - mu_b).norm_squared() + cov_a.trace() + cov_b.trace() - 2.0 * cross.trace();
    Ok(value.max(0.0))
}

pub fn frechet_feature_distance(a: &[FeatureVector], b: &[FeatureVector]) -> Result<f64> {
    let rows = |v: &[FeatureVector]| -> Vec<Vec<f64>> {
        v.iter().map(|f| f.to_array().to_vec()).collect()
    };
    frechet_distance(&rows(a), &rows(b))
}

/// Full-batch gradient descent settings for [`LogisticClassifier`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 500,
            learning_rate: 0.5,
            l2: 1e-4,
        }
    }
}

/// Multinomial logistic regression on standardized features. Weights start
/// at zero, so training is deterministic.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LogisticClassifier {
    labels: Vec<i64>,
    center: Vec<f64>,
    scale: Vec<f64>,
    /// `classes × (dim + 1)`, bias last.
    weights: Vec<Vec<f64>>,
}

impl LogisticClassifier {
    pub fn fit(x: &[Vec<f64>], y: &[i64], cfg: &TrainConfig) -> Result<Self> {
        if x.len() != y.len() || x.is_empty() {
            return Err(Error::usage(format!(
                "classifier needs matching non-empty inputs, got {} rows and {} labels",
                x.len(),
                y.len()
            )));
        }
        let labels: Vec<i64> = y
            .iter()
            .copied()
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect();
        if labels.len() < 2 {
            return Err(Error::usage("classifier needs at least 2 classes"));
        }
        let dim = x[0].len();
        if x.iter().any(|r| r.len() != dim) {
            return Err(Error::usage("classifier rows differ in dimension"));
        }
        let n = x.len() as f64;
        let center: Vec<f64> = (0..dim)
            .map(|j| x.iter().map(|r| r[j]).sum::<f64>() / n)
            .collect();
        let scale: Vec<f64> = (0..dim)
            .map(|j| {
                let var = x.iter().map(|r| (r[j] - center[j]).powi(2)).sum::<f64>() / n;
                if var > VAR_GUARD {
                    var.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        let mut clf = Self {
            weights: vec![vec![0.0; dim + 1]; labels.len()],
            labels,
            center,
            scale,
        };
        let xs: Vec<Vec<f64>> = x.iter().map(|r| clf.standardize(r)).collect();
        let ys: Vec<usize> = y
            .iter()
            .map(|l| clf.labels.binary_search(l).expect("label seen"))
            .collect();
        for _ in 0..cfg.epochs {
            let mut grad = vec![vec![0.0; dim + 1]; clf.labels.len()];
            for (row, &target) in xs.iter().zip(&ys) {
                let probs = clf.probs_standardized(row);
                for (c, g) in grad.iter_mut().enumerate() {
                    let err = probs[c] - if c == target { 1.0 } else { 0.0 };
                    for (gj, xj) in g.iter_mut().zip(row.iter().chain(std::iter::once(&1.0))) {
                        *gj += err * xj;
                    }
                }
            }
            for (w, g) in clf.weights.iter_mut().zip(&grad) {
                for (j, (wj, gj)) in w.iter_mut().zip(g).enumerate() {
                    let decay = if j < dim { cfg.l2 * *wj } else { 0.0 };
                    *wj -= cfg.learning_rate * (gj / n + decay);
                }
            }
        }
        Ok(clf)
    }

    pub fn is_trained(&self) -> bool {
        !self.weights.is_empty()
    }

    pub fn labels(&self) -> &[i64] {
        &self.labels
    }

    fn standardize(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.center.iter().zip(&self.scale))
            .map(|(v, (c, s))| (v - c) / s)
            .collect()
    }

    fn probs_standardized(&self, row: &[f64]) -> Vec<f64> {
        let logits: Vec<f64> = self
            .weights
            .iter()
            .map(|w| {
                w[..row.len()]
                    .iter()
                    .zip(row)
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
                    + w[row.len()]
            })
            .collect();
        crate::sampler::softmax(&logits)
    }

    /// Class probabilities in the order of [`labels`](Self::labels).
    pub fn predict_proba(&self, row: &[f64]) -> Result<Vec<f64>> {
        if !self.is_trained() {
            return Err(Error::usage("classifier is not trained"));
        }
        if row.len() != self.center.len() {
            return Err(Error::usage(format!(
                "classifier expects {} features, got {}",
                self.center.len(),
                row.len()
            )));
        }
        Ok(self.probs_standardized(&self.standardize(row)))
    }

    pub fn predict(&self, row: &[f64]) -> Result<i64> {
        let p = self.predict_proba(row)?;
        Ok(self.labels[crate::prior::argmax(&p)])
    }

    pub fn accuracy(&self, x: &[Vec<f64>], y: &[i64]) -> Result<f64> {
        if x.len() != y.len() || x.is_empty() {
            return Err(Error::usage("accuracy needs matching non-empty inputs"));
        }
        let mut hits = 0;
        for (row, label) in x.iter().zip(y) {
            if self.predict(row)? == *label {
                hits += 1;
            }
        }
        Ok(hits as f64 / x.len() as f64)
    }
}

fn feature_rows(series: &[LabeledSeries]) -> Result<(Vec<Vec<f64>>, Vec<i64>)> {
    let mut x = Vec::with_capacity(series.len());
    let mut y = Vec::with_capacity(series.len());
    for s in series {
        x.push(FeatureVector::of(&s.values)?.to_array().to_vec());
        y.push(s.label);
    }
    Ok((x, y))
}

/// Logistic classifier on the features of labeled series.
pub fn train_feature_classifier(series: &[LabeledSeries]) -> Result<LogisticClassifier> {
    let (x, y) = feature_rows(series)?;
    LogisticClassifier::fit(&x, &y, &TrainConfig::default())
}

/// `exp(E_x KL(p(y|x) ‖ p(y)))` over rows of class probabilities, where
/// `p(y)` is their mean.
pub fn inception_score(probs: &[Vec<f64>]) -> Result<f64> {
    if probs.is_empty() {
        return Err(Error::usage("score needs at least one prediction"));
    }
    let classes = probs[0].len();
    let marginal: Vec<f64> = (0..classes)
        .map(|c| probs.iter().map(|p| p[c]).sum::<f64>() / probs.len() as f64)
        .collect();
    let mut total = 0.0;
    for p in probs {
        total += kl_divergence(p, &marginal)?;
    }
    Ok((total / probs.len() as f64).exp())
}

/// Classifier-entropy score of generated series under a classifier trained
/// on real data. Lies in `[1, classes]`.
pub fn is_analogue(generated: &[Vec<f64>], clf: &LogisticClassifier) -> Result<f64> {
    if !clf.is_trained() {
        return Err(Error::usage("classifier is not trained"));
    }
    let probs: Vec<Vec<f64>> = generated
        .iter()
        .map(|s| clf.predict_proba(&FeatureVector::of(s)?.to_array()))
        .collect::<Result<_>>()?;
    inception_score(&probs)
}

/// Accuracy on `real_test` of a classifier trained on the generated set.
pub fn cas_analogue(generated: &[LabeledSeries], real_test: &[LabeledSeries]) -> Result<f64> {
    let (gx, gy) = feature_rows(generated)?;
    if gy.iter().collect::<std::collections::BTreeSet<_>>().len() < 2 {
        return Err(Error::usage(
            "generated set must contain at least 2 classes",
        ));
    }
    let clf = LogisticClassifier::fit(&gx, &gy, &TrainConfig::default())?;
    let (rx, ry) = feature_rows(real_test)?;
    clf.accuracy(&rx, &ry)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub tv: Option<f64>,
    pub kl: Option<f64>,
    pub frechet: Option<f64>,
    pub is_score: Option<f64>,
    pub cas: Option<f64>,
    pub n_generated: usize,
    pub n_real: usize,
}

/// Labels treated as "no class" when deciding whether the generated set is
/// class-conditional.
pub const UNLABELED: i64 = -1;

impl EvalReport {
    pub const CSV_HEADER: &'static str = "tv,kl,frechet,is_score,cas,n_generated,n_real";

    /// Exact comparison of token samples with the true joint.
    pub fn exact(samples: &[TokenSeq], truth: &[f64], k: usize, n: usize) -> Result<Self> {
        let p = empirical_distribution(samples, k, n)?;
        Ok(Self {
            tv: Some(tv_distance(&p, truth)?),
            kl: Some(kl_divergence(&p, truth)?),
            n_generated: samples.len(),
            ..Default::default()
        })
    }

    /// Feature-space comparison. The entropy score needs at least 2 real
    /// classes, train-on-generated accuracy needs labeled generated series.
    pub fn features(generated: &[LabeledSeries], real: &[LabeledSeries]) -> Result<Self> {
        let gen_values: Vec<Vec<f64>> = generated.iter().map(|s| s.values.clone()).collect();
        let real_values: Vec<Vec<f64>> = real.iter().map(|s| s.values.clone()).collect();
        let frechet =
            frechet_feature_distance(&features_of(&gen_values)?, &features_of(&real_values)?)?;
        let real_classes: BTreeMap<i64, usize> = real.iter().fold(BTreeMap::new(), |mut m, s| {
            *m.entry(s.label).or_default() += 1;
            m
        });
        let is_score = if real_classes.len() >= 2 {
            Some(is_analogue(&gen_values, &train_feature_classifier(real)?)?)
        } else {
            None
        };
        let cas = if generated.iter().any(|s| s.label != UNLABELED) {
            Some(cas_analogue(generated, real)?)
        } else {
            None
        };
        Ok(Self {
            tv: None,
            kl: None,
            frechet: Some(frechet),
            is_score,
            cas,
            n_generated: generated.len(),
            n_real: real.len(),
        })
    }

    pub fn csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{}",
            opt(self.tv),
            opt(self.kl),
            opt(self.frechet),
            opt(self.is_score),
            opt(self.cas),
            self.n_generated,
            self.n_real
        )
    }

    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, self).map_err(|e| Error::Io(e.into()))
    }
}
