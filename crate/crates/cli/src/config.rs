//! Flat `key = value` run configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Later assignments
//! win, so command-line `--set` overrides are applied after the file.

use std::fs;
use std::path::Path;

use serde::Serialize;

use ess_core::quantizer::VQSpec;
use ess_core::sampler::{SamplerConfig, StopRule, DEFAULT_TAU};
use ess_core::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopKind {
    Ratio,
    Threshold,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    #[serde(rename = "schedule.T")]
    pub steps: usize,
    #[serde(rename = "schedule.noise_base")]
    pub noise_base: f64,
    #[serde(rename = "sampler.T_star")]
    pub t_star: Option<usize>,
    #[serde(rename = "sampler.stop")]
    pub stop: StopKind,
    #[serde(rename = "sampler.tau")]
    pub tau: Option<f64>,
    #[serde(rename = "sampler.ratio_window")]
    pub ratio_window: usize,
    #[serde(rename = "prior.epsilon")]
    pub epsilon: f64,
    #[serde(rename = "vq.K")]
    pub vq_k: usize,
    #[serde(rename = "vq.window")]
    pub vq_window: usize,
    #[serde(rename = "vq.iters")]
    pub vq_iters: usize,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let vq = VQSpec::default();
        Self {
            steps: 10,
            noise_base: 1.0,
            t_star: None,
            stop: StopKind::Ratio,
            tau: None,
            ratio_window: 2,
            epsilon: 0.0,
            vq_k: vq.k,
            vq_window: vq.window,
            vq_iters: vq.iters,
            seed: 0,
        }
    }
}

pub const KEYS: &[&str] = &[
    "schedule.T",
    "schedule.noise_base",
    "sampler.T_star",
    "sampler.stop",
    "sampler.tau",
    "sampler.ratio_window",
    "prior.epsilon",
    "vq.K",
    "vq.window",
    "vq.iters",
    "seed",
];

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| Error::usage(format!("config key '{key}': cannot parse {value:?}: {e}")))
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "schedule.T" => self.steps = parse_value(key, value)?,
            "schedule.noise_base" => self.noise_base = parse_value(key, value)?,
            "sampler.T_star" => self.t_star = Some(parse_value(key, value)?),
            "sampler.stop" => {
                self.stop = match value {
                    "ratio" => StopKind::Ratio,
                    "threshold" => StopKind::Threshold,
                    other => {
                        return Err(Error::usage(format!(
                            "config key 'sampler.stop': expected ratio or threshold, got {other:?}"
                        )))
                    }
                }
            }
            "sampler.tau" => self.tau = Some(parse_value(key, value)?),
            "sampler.ratio_window" => self.ratio_window = parse_value(key, value)?,
            "prior.epsilon" => self.epsilon = parse_value(key, value)?,
            "vq.K" => self.vq_k = parse_value(key, value)?,
            "vq.window" => self.vq_window = parse_value(key, value)?,
            "vq.iters" => self.vq_iters = parse_value(key, value)?,
            "seed" => self.seed = parse_value(key, value)?,
            other => {
                return Err(Error::usage(format!(
                    "unknown config key '{other}' (known keys: {})",
                    KEYS.join(", ")
                )))
            }
        }
        Ok(())
    }

    /// Applies every assignment in `text`.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::usage(format!(
                    "config line {}: expected `key = value`, got {line:?}",
                    idx + 1
                ))
            })?;
            self.set(key.trim(), value)?;
        }
        Ok(())
    }

    /// Applies a `key=value` override.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (key, value) = assignment.split_once('=').ok_or_else(|| {
            Error::usage(format!("override must be key=value, got {assignment:?}"))
        })?;
        self.set(key.trim(), value)
    }

    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut cfg = Self::default();
        if let Some(p) = path {
            let text = fs::read_to_string(p)
                .map_err(|e| Error::usage(format!("cannot read config {}: {e}", p.display())))?;
            cfg.apply_text(&text)?;
        }
        for o in overrides {
            cfg.apply_override(o)?;
        }
        Ok(cfg)
    }

    pub fn sampler(&self) -> Result<SamplerConfig> {
        let stop = match (self.stop, self.tau) {
            (StopKind::Ratio, Some(_)) => {
                return Err(Error::usage("sampler.tau needs sampler.stop = threshold"));
            }
            (StopKind::Ratio, None) => StopRule::MovingAverageRatio {
                window: self.ratio_window,
            },
            (StopKind::Threshold, tau) => StopRule::Threshold(tau.unwrap_or(DEFAULT_TAU)),
        };
        let cfg = SamplerConfig {
            steps: self.steps,
            resample_end: self.t_star,
            stop,
            noise_base: self.noise_base,
            seed: self.seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn vq(&self) -> Result<VQSpec> {
        let spec = VQSpec {
            window: self.vq_window,
            k: self.vq_k,
            iters: self.vq_iters,
            seed: self.seed,
        };
        spec.validate()?;
        Ok(spec)
    }
}
