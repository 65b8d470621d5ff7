//! Labeled series: UCR-format files and synthetic corpora.
//!
//! A UCR file has one series per line: the class label, then the values,
//! separated by tabs (commas are accepted too). Variable-length sets pad the
//! tail with `NaN`.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use log::info;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

const STD_GUARD: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledSeries {
    pub label: i64,
    pub values: Vec<f64>,
}

impl LabeledSeries {
    pub fn new(label: i64, values: Vec<f64>) -> Self {
        Self { label, values }
    }
}

fn split_fields(line: &str) -> Vec<&str> {
    if line.contains('\t') {
        line.split('\t').map(str::trim).collect()
    } else if line.contains(',') {
        line.split(',').map(str::trim).collect()
    } else {
        line.split_whitespace().collect()
    }
}

fn integral_label(s: &str) -> Option<i64> {
    if let Ok(v) = s.parse::<i64>() {
        return Some(v);
    }
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() && v.fract() == 0.0 && v.abs() < 9.0e15 => Some(v as i64),
        _ => None,
    }
}

/// Parses UCR-format text.
///
/// Numeric labels are kept. If any label is not an integer, every label is
/// replaced by a dense index in order of first appearance. Trailing `NaN`s
/// are dropped; a `NaN` followed by a number is a parse error.
pub fn parse_ucr(text: &str) -> Result<Vec<LabeledSeries>> {
    let mut raw_labels = Vec::new();
    let mut series = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields = split_fields(line);
        let (label, rest) = fields.split_first().expect("non-empty line has a field");
        let mut values = Vec::with_capacity(rest.len());
        let mut padding = false;
        for (col, field) in rest.iter().enumerate() {
            let v = f64::from_str(field).map_err(|_| {
                Error::parse(
                    lineno,
                    format!("column {}: {field:?} is not a number", col + 2),
                )
            })?;
            if v.is_nan() {
                padding = true;
                continue;
            }
            if padding {
                return Err(Error::parse(
                    lineno,
                    format!("value after NaN padding in column {}", col + 2),
                ));
            }
            if v.is_infinite() {
                return Err(Error::parse(
                    lineno,
                    format!("column {}: infinite value", col + 2),
                ));
            }
            values.push(v);
        }
        if values.is_empty() {
            return Err(Error::parse(lineno, "series has no values"));
        }
        if label.is_empty() {
            return Err(Error::parse(lineno, "missing label"));
        }
        raw_labels.push(label.to_string());
        series.push(values);
    }
    if series.is_empty() {
        return Err(Error::parse(1, "file contains no series"));
    }
    let numeric: Option<Vec<i64>> = raw_labels.iter().map(|l| integral_label(l)).collect();
    let labels = numeric.unwrap_or_else(|| {
        let mut seen: Vec<&str> = Vec::new();
        raw_labels
            .iter()
            .map(|l| match seen.iter().position(|s| s == l) {
                Some(i) => i as i64,
                None => {
                    seen.push(l);
                    (seen.len() - 1) as i64
                }
            })
            .collect()
    });
    Ok(labels
        .into_iter()
        .zip(series)
        .map(|(label, values)| LabeledSeries { label, values })
        .collect())
}

pub fn load_ucr_tsv(path: &Path) -> Result<Vec<LabeledSeries>> {
    parse_ucr(&fs::read_to_string(path)?)
}

/// Writes one tab-separated line per series. Values use the shortest
/// representation that parses back to the same `f64`.
pub fn write_ucr<W: Write>(series: &[LabeledSeries], mut w: W) -> Result<()> {
    for s in series {
        write!(w, "{}", s.label)?;
        for v in &s.values {
            write!(w, "\t{v}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn write_ucr_tsv(path: &Path, series: &[LabeledSeries]) -> Result<()> {
    let mut buf = Vec::new();
    write_ucr(series, &mut buf)?;
    fs::write(path, buf)?;
    Ok(())
}

/// `(x − mean) / std` with the population standard deviation. A series
/// with `std ≤ 1e-12` maps to zeros.
pub fn znormalize(series: &[f64]) -> Vec<f64> {
    if series.is_empty() {
        return Vec::new();
    }
    let n = series.len() as f64;
    let mean = series.iter().sum::<f64>() / n;
    let std = (series.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    if std <= STD_GUARD {
        return vec![0.0; series.len()];
    }
    series.iter().map(|v| (v - mean) / std).collect()
}

pub fn znormalize_all(series: &mut [LabeledSeries]) {
    for s in series {
        s.values = znormalize(&s.values);
    }
}

/// Cuts every series to the shortest length in the set. Returns that length.
pub fn truncate_to_min_length(series: &mut [LabeledSeries]) -> usize {
    let Some(min) = series.iter().map(|s| s.values.len()).min() else {
        return 0;
    };
    let cut = series.iter().filter(|s| s.values.len() > min).count();
    if cut > 0 {
        info!("truncated {cut} series to the shortest length {min}");
    }
    for s in series.iter_mut() {
        s.values.truncate(min);
    }
    min
}

/// Synthetic corpus families. Series `i` belongs to class `i mod classes`,
/// labels start at 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SyntheticKind {
    /// `sin(2π f t / L + φ) + 0.1 ε` with `f = 1` (label 1) or `f = 3`
    /// (label 2), `φ ~ U[0, 2π)`.
    SineMix,
    /// Cylinder (1), bell (2) and funnel (3) shapes on `[a, b]` with
    /// `a ~ U[L/8, L/4]`, `b − a ~ U[L/4, 3L/4]`, amplitude `6 + η` and unit
    /// noise, following the usual CBF construction scaled from `L = 128`.
    Cbf,
    /// Level shift of `±1` at `c ~ U[L/4, 3L/4)`: up (label 1) or down
    /// (label 2), plus `0.1 ε`.
    Step,
}

impl SyntheticKind {
    pub fn classes(self) -> usize {
        match self {
            SyntheticKind::Cbf => 3,
            SyntheticKind::SineMix | SyntheticKind::Step => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SyntheticKind::SineMix => "sine-mix",
            SyntheticKind::Cbf => "cbf",
            SyntheticKind::Step => "step",
        }
    }
}

impl FromStr for SyntheticKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sine-mix" => Ok(SyntheticKind::SineMix),
            "cbf" => Ok(SyntheticKind::Cbf),
            "step" => Ok(SyntheticKind::Step),
            other => Err(Error::usage(format!(
                "unknown synthetic kind '{other}' (expected sine-mix, cbf or step)"
            ))),
        }
    }
}

pub fn gen_synthetic(
    kind: SyntheticKind,
    n: usize,
    length: usize,
    seed: u64,
) -> Result<Vec<LabeledSeries>> {
    if length < 8 {
        return Err(Error::usage(format!(
            "synthetic series need length >= 8, got {length}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let len = length as f64;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let class = i % kind.classes();
        let values: Vec<f64> = match kind {
            SyntheticKind::SineMix => {
                let f = if class == 0 { 1.0 } else { 3.0 };
                let phase = rng.random_range(0.0..std::f64::consts::TAU);
                (0..length)
                    .map(|t| {
                        (std::f64::consts::TAU * f * t as f64 / len + phase).sin()
                            + 0.1 * rng.sample::<f64, _>(StandardNormal)
                    })
                    .collect()
            }
            SyntheticKind::Cbf => {
                let a = rng.random_range(len / 8.0..=len / 4.0);
                let b = a + rng.random_range(len / 4.0..=3.0 * len / 4.0);
                let amp = 6.0 + rng.sample::<f64, _>(StandardNormal);
                (0..length)
                    .map(|t| {
                        let t = t as f64;
                        let shape = if t < a || t > b {
                            0.0
                        } else {
                            match class {
                                0 => 1.0,
                                1 => (t - a) / (b - a),
                                _ => (b - t) / (b - a),
                            }
                        };
                        amp * shape + rng.sample::<f64, _>(StandardNormal)
                    })
                    .collect()
            }
            SyntheticKind::Step => {
                let c = rng.random_range(length / 4..3 * length / 4);
                let level = if class == 0 { 1.0 } else { -1.0 };
                (0..length)
                    .map(|t| if t >= c { level } else { 0.0 } + 0.1 * rng.sample::<f64, _>(StandardNormal))
                    .collect()
            }
        };
        out.push(LabeledSeries {
            label: class as i64 + 1,
            values,
        });
    }
    Ok(out)
}
