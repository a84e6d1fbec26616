//! Resolved run settings: defaults, then the config file, then flags.

use std::collections::BTreeMap;
use std::path::Path;

use issuepoint::config::{parse_value, read_kv, Configurable};
use issuepoint::inference::{UpdateSchedule, Variances};
use issuepoint::model::Hyperparams;
use issuepoint::topics::{InferOptions, PSEUDOCOUNT};
use issuepoint::vocab::{FilterThresholds, TrainOptions};
use issuepoint::{Error, Result};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PrepareSettings {
    pub min_label_count: usize,
    pub max_phrase_len: usize,
    pub vocab_size: usize,
    pub smoothing_iterations: usize,
    /// Dirichlet concentration; `1/K` when unset.
    pub alpha: Option<f64>,
    pub pseudocount: f64,
    /// Number of unsupervised topics for `standard_lda`.
    pub topics: usize,
    pub lda_max_iter: usize,
}

impl Default for PrepareSettings {
    fn default() -> Self {
        Self {
            min_label_count: 25,
            max_phrase_len: 5,
            vocab_size: 5000,
            smoothing_iterations: 2,
            alpha: None,
            pseudocount: PSEUDOCOUNT,
            topics: 0,
            lda_max_iter: 100,
        }
    }
}

impl Configurable for PrepareSettings {
    fn set(&mut self, key: &str, value: &str) -> Result<bool> {
        match key {
            "min_label_count" => self.min_label_count = parse_value(key, value)?,
            "max_phrase_len" => self.max_phrase_len = parse_value(key, value)?,
            "vocab_size" => self.vocab_size = parse_value(key, value)?,
            "smoothing_iterations" => self.smoothing_iterations = parse_value(key, value)?,
            "alpha" => self.alpha = Some(parse_value(key, value)?),
            "pseudocount" => self.pseudocount = parse_value(key, value)?,
            "topics" => self.topics = parse_value(key, value)?,
            "lda_max_iter" => self.lda_max_iter = parse_value(key, value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvaluateSettings {
    pub folds: usize,
    pub permutations: usize,
    pub significance_permutations: usize,
    pub with_intercept: bool,
    pub baseline_trials: usize,
    pub bins: usize,
}

impl Default for EvaluateSettings {
    fn default() -> Self {
        Self {
            folds: 6,
            permutations: 5,
            significance_permutations: 20,
            with_intercept: false,
            baseline_trials: 100,
            bins: 20,
        }
    }
}

impl Configurable for EvaluateSettings {
    fn set(&mut self, key: &str, value: &str) -> Result<bool> {
        match key {
            "folds" => self.folds = parse_value(key, value)?,
            "permutations" => self.permutations = parse_value(key, value)?,
            "significance_permutations" => self.significance_permutations = parse_value(key, value)?,
            "with_intercept" => self.with_intercept = parse_value(key, value)?,
            "baseline_trials" => self.baseline_trials = parse_value(key, value)?,
            "bins" => self.bins = parse_value(key, value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[derive(Default)]
pub struct Settings {
    pub seed: u64,
    pub hyperparams: Hyperparams,
    pub schedule: UpdateSchedule,
    pub variances: Variances,
    pub thresholds: FilterThresholds,
    pub classifier: TrainOptions,
    pub topic_inference: InferOptions,
    pub prepare: PrepareSettings,
    pub evaluate: EvaluateSettings,
}


impl Configurable for Settings {
    fn set(&mut self, key: &str, value: &str) -> Result<bool> {
        if key == "seed" {
            self.seed = parse_value(key, value)?;
            return Ok(true);
        }
        // `lambda` is accepted as a synonym of `lambda1`
        let key = if key == "lambda" { "lambda1" } else { key };
        Ok(self.hyperparams.set(key, value)?
            || self.schedule.set(key, value)?
            || self.variances.set(key, value)?
            || self.thresholds.set(key, value)?
            || self.classifier.set(key, value)?
            || self.topic_inference.set(key, value)?
            || self.prepare.set(key, value)?
            || self.evaluate.set(key, value)?)
    }
}

impl Settings {
    /// Applies the optional config file, then `overrides` in order.
    pub fn resolve(config: Option<&Path>, overrides: &[(String, String)]) -> Result<Self> {
        let mut s = Settings::default();
        let mut pairs: Vec<(String, String)> = Vec::new();
        if let Some(path) = config {
            let kv: BTreeMap<String, String> = read_kv(path)?;
            pairs.extend(kv);
        }
        pairs.extend(overrides.iter().cloned());
        for (k, v) in &pairs {
            if !s.set(k, v)? {
                return Err(Error::InvalidArgument(format!("unknown setting `{k}`")));
            }
        }
        s.hyperparams.validate()?;
        s.schedule.validate()?;
        s.variances.validate()?;
        Ok(s)
    }
}

/// Parses a `key=value` override.
pub fn parse_override(s: &str) -> std::result::Result<(String, String), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected KEY=VALUE, got `{s}`"))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_the_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.cfg");
        std::fs::write(&cfg, "lambda = 2\nm_max = 80\nseed = 4\n").unwrap();
        let s = Settings::resolve(Some(&cfg), &[("m_max".into(), "60".into())]).unwrap();
        assert_eq!(s.hyperparams.lambda1, 2.0);
        assert_eq!(s.schedule.m_max, 60);
        assert_eq!(s.seed, 4);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = Settings::resolve(None, &[("lamda".into(), "1".into())]).unwrap_err();
        assert!(err.to_string().contains("lamda"));
    }

    #[test]
    fn defaults_match_the_documented_settings() {
        let s = Settings::default();
        assert_eq!(s.hyperparams.lambda1, 1.0);
        assert_eq!((s.schedule.m_init, s.schedule.m_max), (21, 500));
        assert_eq!(s.evaluate.folds, 6);
        assert_eq!(s.evaluate.permutations, 5);
        assert_eq!(s.evaluate.significance_permutations, 20);
        assert_eq!(s.prepare.min_label_count, 25);
        assert_eq!(s.variances.x, (-5f64).exp());
    }
}
