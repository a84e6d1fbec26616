//! Flat `key = value` configuration files.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::inference::{UpdateSchedule, Variances};
use crate::model::Hyperparams;
use crate::topics::InferOptions;
use crate::vocab::{FilterThresholds, TrainOptions};

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_kv(text: &str, path: &Path) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(path, i + 1, "expected `key = value`"))?;
        let k = k.trim();
        if k.is_empty() {
            return Err(Error::parse(path, i + 1, "empty key"));
        }
        out.insert(k.to_string(), v.trim().to_string());
    }
    Ok(out)
}

pub fn read_kv(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_kv(&text, path)
}

/// Parses a typed value, naming the key on failure.
pub fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::InvalidArgument(format!("bad value `{value}` for `{key}`")))
}

/// Types whose fields can be set from configuration keys.
pub trait Configurable {
    /// Applies one key; returns `Ok(false)` when the key is not recognised.
    fn set(&mut self, key: &str, value: &str) -> Result<bool>;
}

/// Applies every recognised key of `kv` to `target`, returning the keys it
/// did not recognise.
pub fn apply<'a, C: Configurable>(target: &mut C, kv: &'a BTreeMap<String, String>) -> Result<Vec<&'a str>> {
    let mut unknown = Vec::new();
    for (k, v) in kv {
        if !target.set(k, v)? {
            unknown.push(k.as_str());
        }
    }
    Ok(unknown)
}

macro_rules! fields {
    ($self:ident, $key:ident, $value:ident, { $($name:literal => $field:ident),* $(,)? }) => {
        match $key {
            $($name => { $self.$field = parse_value($key, $value)?; Ok(true) })*
            _ => Ok(false),
        }
    };
}

impl Configurable for Hyperparams {
    fn set(&mut self, key: &str, value: &str) -> Result<bool> {
        fields!(self, key, value, {
            "lambda1" => lambda1,
            "prior_var_x" => prior_var_x,
            "prior_var_a" => prior_var_a,
            "prior_var_b" => prior_var_b,
        })
    }
}

impl Configurable for UpdateSchedule {
    fn set(&mut self, key: &str, value: &str) -> Result<bool> {
        fields!(self, key, value, {
            "m_init" => m_init,
            "m_growth" => m_growth,
            "m_max" => m_max,
            "ema_decay" => ema_decay,
            "ema_threshold" => ema_threshold,
            "step_cap" => step_cap,
            "max_sweeps" => max_sweeps,
            "elbo_samples" => elbo_samples,
        })
    }
}

impl Configurable for Variances {
    fn set(&mut self, key: &str, value: &str) -> Result<bool> {
        fields!(self, key, value, {
            "var_x" => x,
            "var_z" => z,
            "var_a" => a,
            "var_b" => b,
        })
    }
}

impl Configurable for FilterThresholds {
    fn set(&mut self, key: &str, value: &str) -> Result<bool> {
        fields!(self, key, value, {
            "max_doc_frac" => max_doc_frac,
            "min_docs" => min_docs,
            "min_corpus_frac" => min_corpus_frac,
        })
    }
}

impl Configurable for TrainOptions {
    fn set(&mut self, key: &str, value: &str) -> Result<bool> {
        fields!(self, key, value, {
            "l2_penalty" => l2_penalty,
            "classifier_tol" => tol,
            "classifier_max_iter" => max_iter,
        })
    }
}

impl Configurable for InferOptions {
    fn set(&mut self, key: &str, value: &str) -> Result<bool> {
        fields!(self, key, value, {
            "topic_tol" => tol,
            "topic_max_iter" => max_iter,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_whitespace() {
        let kv = parse_kv("# c\nlambda = 2.5\n m_init=21 # trailing\n\n", Path::new("x")).unwrap();
        assert_eq!(kv["lambda"], "2.5");
        assert_eq!(kv["m_init"], "21");
        assert!(parse_kv("oops\n", Path::new("x")).is_err());
        assert_eq!(parse_value::<usize>("m", "3").unwrap(), 3);
        assert!(parse_value::<usize>("m", "x").is_err());
    }

    #[test]
    fn applies_known_keys_and_reports_the_rest() {
        let kv = parse_kv("lambda1 = 2\nm_max = 50\nvar_x = 0.5\nbogus = 1\n", Path::new("x")).unwrap();
        let mut hp = Hyperparams::default();
        let mut sched = UpdateSchedule::default();
        let mut var = Variances::default();
        assert_eq!(apply(&mut hp, &kv).unwrap(), ["bogus", "m_max", "var_x"]);
        apply(&mut sched, &kv).unwrap();
        apply(&mut var, &kv).unwrap();
        assert_eq!((hp.lambda1, sched.m_max, var.x), (2.0, 50, 0.5));
        let bad = parse_kv("m_max = lots\n", Path::new("x")).unwrap();
        assert!(apply(&mut sched, &bad).is_err());
    }
}
