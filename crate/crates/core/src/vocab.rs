//! Phrase vocabulary construction.
//!
//! Candidate phrases are all contiguous runs of one to five tokens. They are
//! filtered by document and corpus frequency, described by a fixed set of
//! features, scored by an L2-penalized logistic regression trained against a
//! list of known-bad phrases, and the best-scoring ones form the vocabulary.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::BillDoc;
use crate::error::{Error, Result};
use crate::linalg::solve_spd;

pub const DEFAULT_MAX_LEN: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhraseStats {
    pub phrase: String,
    pub corpus_count: u64,
    pub doc_count: u64,
    pub corpus_fraction: f64,
}

fn doc_ngrams(tokens: &[String], max_len: usize) -> HashMap<String, u64> {
    let mut counts = HashMap::new();
    for i in 0..tokens.len() {
        let mut phrase = String::new();
        for n in 0..max_len.min(tokens.len() - i) {
            if n > 0 {
                phrase.push(' ');
            }
            phrase.push_str(&tokens[i + n]);
            *counts.entry(phrase.clone()).or_insert(0) += 1;
        }
    }
    counts
}

/// Counts every contiguous n-gram of length `1..=max_len`. The result is
/// sorted by phrase.
pub fn extract_phrases(bills: &[BillDoc], max_len: usize) -> Vec<PhraseStats> {
    let max_len = max_len.max(1);
    #[cfg(feature = "parallel")]
    let per_doc: Vec<HashMap<String, u64>> = {
        use rayon::prelude::*;
        bills.par_iter().map(|b| doc_ngrams(&b.tokens, max_len)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let per_doc: Vec<HashMap<String, u64>> = bills.iter().map(|b| doc_ngrams(&b.tokens, max_len)).collect();

    let mut merged: BTreeMap<String, (u64, u64)> = BTreeMap::new();
    let mut total = 0u64;
    for doc in per_doc {
        for (phrase, c) in doc {
            total += c;
            let e = merged.entry(phrase).or_insert((0, 0));
            e.0 += c;
            e.1 += 1;
        }
    }
    merged
        .into_iter()
        .map(|(phrase, (corpus_count, doc_count))| PhraseStats {
            phrase,
            corpus_count,
            doc_count,
            corpus_fraction: corpus_count as f64 / total as f64,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterThresholds {
    /// Phrases in more than this fraction of bills are removed.
    pub max_doc_frac: f64,
    /// Phrases in fewer bills than this are removed.
    pub min_docs: u64,
    /// Phrases below this share of all phrase occurrences are removed.
    pub min_corpus_frac: f64,
}

impl Default for FilterThresholds {
    fn default() -> Self {
        Self {
            max_doc_frac: 0.10,
            min_docs: 4,
            min_corpus_frac: 1e-5,
        }
    }
}

impl FilterThresholds {
    pub fn keeps(&self, s: &PhraseStats, n_bills: usize) -> bool {
        s.doc_count as f64 <= self.max_doc_frac * n_bills as f64
            && s.doc_count >= self.min_docs
            && s.corpus_fraction >= self.min_corpus_frac
    }
}

pub fn filter_phrases(stats: &[PhraseStats], n_bills: usize, t: &FilterThresholds) -> Vec<PhraseStats> {
    stats.iter().filter(|s| t.keeps(s, n_bills)).cloned().collect()
}

/// Feature names, in vector order.
pub const FEATURE_NAMES: [&str; 24] = [
    "log(count + 1)",
    "log(number.docs + 1)",
    "anchortext.presentTRUE",
    "anchortext",
    "frequency.sum.div.number.docs",
    "doc.sq",
    "has.secTRUE",
    "has.parTRUE",
    "has.strikTRUE",
    "has.amendTRUE",
    "has.insTRUE",
    "has.clauseTRUE",
    "has.provisionTRUE",
    "has.titleTRUE",
    "test.pos",
    "test.zeroTRUE",
    "test.neg",
    "number.terms1",
    "number.terms2",
    "number.terms3",
    "number.terms4",
    "number.terms5",
    "log(number.docs + 1) * anchortext",
    "log(count + 1) * log(number.docs + 1)",
];

pub const N_FEATURES: usize = FEATURE_NAMES.len();

const SUBSTRINGS: [&str; 8] = ["sec", "paragra", "strik", "amend", "insert", "clause", "provision", "title"];

pub fn feature_index(name: &str) -> Option<usize> {
    FEATURE_NAMES.iter().position(|n| *n == name)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhraseFeatures {
    pub phrase: String,
    pub values: [f64; N_FEATURES],
}

impl PhraseFeatures {
    pub fn get(&self, name: &str) -> Option<f64> {
        feature_index(name).map(|i| self.values[i])
    }
}

/// Independence-model deviation `(observed − expected) / sqrt(expected)`.
pub fn independence_test(observed: f64, expected: f64) -> f64 {
    (observed - expected) / expected.sqrt()
}

/// Builds the feature vector of one phrase. `anchortext` maps phrases to
/// their link-text frequency; absent phrases count as zero.
pub fn compute_features(
    stats: &PhraseStats,
    anchortext: &HashMap<String, f64>,
    expected_count: f64,
) -> Result<PhraseFeatures> {
    let anchor = anchortext.get(&stats.phrase).copied().unwrap_or(0.0);
    if !anchor.is_finite() || !expected_count.is_finite() || !stats.corpus_fraction.is_finite() {
        return Err(Error::InvalidArgument(format!("non-finite input for phrase `{}`", stats.phrase)));
    }
    if expected_count <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "expected count for `{}` must be positive, got {expected_count}",
            stats.phrase
        )));
    }
    let count = stats.corpus_count as f64;
    let docs = stats.doc_count as f64;
    let log_count = (count + 1.0).ln();
    let log_docs = (docs + 1.0).ln();
    let present = if anchor > 0.0 { 1.0 } else { 0.0 };
    let test = independence_test(count, expected_count);
    let n_terms = stats.phrase.split(' ').filter(|t| !t.is_empty()).count();
    let ind = |b: bool| if b { 1.0 } else { 0.0 };

    let mut v = [0.0; N_FEATURES];
    v[0] = log_count;
    v[1] = log_docs;
    v[2] = present;
    v[3] = anchor;
    v[4] = if docs > 0.0 { count / docs } else { 0.0 };
    v[5] = docs * docs;
    for (j, sub) in SUBSTRINGS.iter().enumerate() {
        v[6 + j] = ind(stats.phrase.contains(sub));
    }
    v[14] = ((-test).max(0.0) + 1.0).ln();
    v[15] = ind(test == 0.0);
    v[16] = (test.max(0.0) + 1.0).ln();
    for n in 1..=5 {
        v[16 + n] = ind(n_terms == n);
    }
    v[22] = log_docs * present;
    v[23] = log_count * log_docs;
    Ok(PhraseFeatures {
        phrase: stats.phrase.clone(),
        values: v,
    })
}

/// Per-phrase auxiliary statistics from the features sidecar.
#[derive(Debug, Clone, Default)]
pub struct AuxStats {
    pub anchortext: HashMap<String, f64>,
    pub expected: HashMap<String, f64>,
}

impl AuxStats {
    /// Reads `phrase,anchortext_freq,expected_count` rows.
    pub fn read(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
        let header: Vec<String> = rdr
            .headers()
            .map_err(|e| Error::parse(path, 1, e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        if header != ["phrase", "anchortext_freq", "expected_count"] {
            return Err(Error::parse(path, 1, "expected header `phrase,anchortext_freq,expected_count`"));
        }
        let mut out = AuxStats::default();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| Error::parse(path, e.position().map_or(0, |p| p.line() as usize), e.to_string()))?;
            let line = rec.position().map_or(0, |p| p.line() as usize);
            let num = |i: usize| -> Result<f64> {
                rec.get(i)
                    .and_then(|s| s.parse::<f64>().ok())
                    .ok_or_else(|| Error::parse(path, line, format!("bad number in column {}", i + 1)))
            };
            let phrase = rec.get(0).unwrap_or_default().to_string();
            out.anchortext.insert(phrase.clone(), num(1)?);
            out.expected.insert(phrase, num(2)?);
        }
        Ok(out)
    }

    /// Features for every phrase. Phrases without an expected count are
    /// treated as matching the independence model exactly.
    pub fn features(&self, stats: &[PhraseStats]) -> Result<Vec<PhraseFeatures>> {
        stats
            .iter()
            .map(|s| {
                let expected = self
                    .expected
                    .get(&s.phrase)
                    .copied()
                    .unwrap_or((s.corpus_count as f64).max(1.0));
                compute_features(s, &self.anchortext, expected)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VocabModel {
    pub weights: BTreeMap<String, f64>,
    pub intercept: f64,
    pub l2_penalty: f64,
}

impl VocabModel {
    fn weight_vector(&self) -> [f64; N_FEATURES] {
        let mut w = [0.0; N_FEATURES];
        for (i, name) in FEATURE_NAMES.iter().enumerate() {
            w[i] = self.weights.get(*name).copied().unwrap_or(0.0);
        }
        w
    }

    fn from_vector(w: &[f64], intercept: f64, l2_penalty: f64) -> Self {
        Self {
            weights: FEATURE_NAMES.iter().zip(w).map(|(n, v)| (n.to_string(), *v)).collect(),
            intercept,
            l2_penalty,
        }
    }

    /// Model that ranks phrases by `log(number.docs + 1)` alone, used when
    /// no bad-phrase list is available.
    pub fn doc_frequency() -> Self {
        let mut w = [0.0; N_FEATURES];
        w[1] = 1.0;
        Self::from_vector(&w, 0.0, 1.0)
    }

    /// Log-odds that the phrase is good.
    pub fn score(&self, f: &PhraseFeatures) -> f64 {
        let w = self.weight_vector();
        self.intercept + w.iter().zip(&f.values).map(|(a, b)| a * b).sum::<f64>()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub l2_penalty: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            l2_penalty: 1.0,
            tol: 1e-6,
            max_iter: 100,
        }
    }
}

struct LogisticProblem<'a> {
    x: &'a [PhraseFeatures],
    y: Vec<f64>,
    penalty: f64,
}

impl LogisticProblem<'_> {
    /// Penalized log-likelihood; `beta[0]` is the unpenalized intercept.
    fn objective(&self, beta: &[f64]) -> f64 {
        let mut ll = 0.0;
        for (f, &y) in self.x.iter().zip(&self.y) {
            let s = beta[0] + beta[1..].iter().zip(&f.values).map(|(a, b)| a * b).sum::<f64>();
            ll += crate::model::vote_loglik(y > 0.5, s);
        }
        ll - 0.5 * self.penalty * beta[1..].iter().map(|b| b * b).sum::<f64>()
    }

    /// Gradient and negated Hessian (row-major).
    fn derivatives(&self, beta: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = N_FEATURES + 1;
        let mut g = vec![0.0; n];
        let mut h = vec![0.0; n * n];
        let mut row = [0.0; N_FEATURES + 1];
        for (f, &y) in self.x.iter().zip(&self.y) {
            row[0] = 1.0;
            row[1..].copy_from_slice(&f.values);
            let s: f64 = beta.iter().zip(&row).map(|(a, b)| a * b).sum();
            let p = crate::model::logistic(s);
            let r = y - p;
            let w = p * (1.0 - p);
            for i in 0..n {
                g[i] += r * row[i];
                if row[i] != 0.0 {
                    for j in i..n {
                        h[i * n + j] += w * row[i] * row[j];
                    }
                }
            }
        }
        for i in 0..n {
            for j in 0..i {
                h[i * n + j] = h[j * n + i];
            }
        }
        for i in 1..n {
            g[i] -= self.penalty * beta[i];
            h[i * n + i] += self.penalty;
        }
        (g, h)
    }
}

/// Fits the L2-penalized logistic regression separating bad phrases
/// (label 0) from the rest (label 1) with damped Newton iterations.
pub fn train_phrase_classifier(
    features: &[PhraseFeatures],
    bad_phrases: &HashSet<String>,
    opts: &TrainOptions,
) -> Result<VocabModel> {
    if bad_phrases.is_empty() {
        return Err(Error::InvalidArgument("bad-phrase list is empty".into()));
    }
    if !(opts.l2_penalty > 0.0) {
        return Err(Error::InvalidArgument("l2 penalty must be positive".into()));
    }
    let y: Vec<f64> = features
        .iter()
        .map(|f| if bad_phrases.contains(&f.phrase) { 0.0 } else { 1.0 })
        .collect();
    let n_bad = y.iter().filter(|v| **v == 0.0).count();
    if n_bad == 0 || n_bad == y.len() {
        return Err(Error::InvalidArgument(
            "need at least one bad and one good phrase among the candidates".into(),
        ));
    }
    let prob = LogisticProblem {
        x: features,
        y,
        penalty: opts.l2_penalty,
    };
    let mut beta = vec![0.0; N_FEATURES + 1];
    let mut obj = prob.objective(&beta);
    for _ in 0..opts.max_iter {
        let (g, h) = prob.derivatives(&beta);
        let gnorm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if gnorm <= opts.tol {
            return Ok(VocabModel::from_vector(&beta[1..], beta[0], opts.l2_penalty));
        }
        let step = solve_spd(&h, &g)
            .ok_or_else(|| Error::Convergence("logistic Hessian is not positive definite".into()))?;
        let slope: f64 = g.iter().zip(&step).map(|(a, b)| a * b).sum();
        let mut t = 1.0;
        loop {
            let cand: Vec<f64> = beta.iter().zip(&step).map(|(b, s)| b + t * s).collect();
            let c = prob.objective(&cand);
            if c >= obj + 1e-4 * t * slope || t < 1e-10 {
                beta = cand;
                obj = c;
                break;
            }
            t *= 0.5;
        }
    }
    Err(Error::Convergence(format!(
        "phrase classifier did not reach gradient norm {} in {} iterations",
        opts.tol, opts.max_iter
    )))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    pub phrases: Vec<String>,
    pub index: HashMap<String, usize>,
    max_terms: usize,
}

impl Vocabulary {
    pub fn new(phrases: Vec<String>) -> Result<Self> {
        let mut index = HashMap::with_capacity(phrases.len());
        for (i, p) in phrases.iter().enumerate() {
            if index.insert(p.clone(), i).is_some() {
                return Err(Error::Integrity(format!("duplicate vocabulary phrase `{p}`")));
            }
        }
        let max_terms = phrases.iter().map(|p| p.split(' ').count()).max().unwrap_or(0);
        Ok(Self {
            phrases,
            index,
            max_terms,
        })
    }

    pub fn len(&self) -> usize {
        self.phrases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phrases.is_empty()
    }

    pub fn get(&self, phrase: &str) -> Option<usize> {
        self.index.get(phrase).copied()
    }

    /// One phrase per line, rank order.
    pub fn write(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
        for p in &self.phrases {
            writeln!(f, "{p}").map_err(|e| Error::io(path, e))?;
        }
        f.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::new(read_lines(path)?)
    }
}

/// Non-empty trimmed lines of a text file.
pub fn read_lines(path: &Path) -> Result<Vec<String>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for line in BufReader::new(f).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let t = line.trim();
        if !t.is_empty() {
            out.push(t.to_string());
        }
    }
    Ok(out)
}

/// The `size` highest-scoring phrases, ties broken lexicographically.
pub fn select_vocabulary(model: &VocabModel, features: &[PhraseFeatures], size: usize) -> Result<Vocabulary> {
    if size > features.len() {
        return Err(Error::InvalidArgument(format!(
            "vocabulary size {size} exceeds the {} candidates",
            features.len()
        )));
    }
    let mut scored: Vec<(f64, &str)> = features.iter().map(|f| (model.score(f), f.phrase.as_str())).collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1)));
    Vocabulary::new(scored.into_iter().take(size).map(|(_, p)| p.to_string()).collect())
}

/// Sparse `(phrase index, count)` pairs sorted by index. Overlapping
/// occurrences are all counted.
pub fn bag_of_phrases(doc: &BillDoc, vocab: &Vocabulary) -> Vec<(usize, u32)> {
    let mut counts: BTreeMap<usize, u32> = BTreeMap::new();
    let toks = &doc.tokens;
    for i in 0..toks.len() {
        let mut phrase = String::new();
        for n in 0..vocab.max_terms.min(toks.len() - i) {
            if n > 0 {
                phrase.push(' ');
            }
            phrase.push_str(&toks[i + n]);
            if let Some(j) = vocab.get(&phrase) {
                *counts.entry(j).or_insert(0) += 1;
            }
        }
    }
    counts.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn doc(id: &str, toks: &[&str]) -> BillDoc {
        BillDoc {
            id: id.into(),
            title: String::new(),
            tokens: toks.iter().map(|t| t.to_string()).collect(),
            labels: BTreeSet::new(),
        }
    }

    fn stats(phrase: &str, count: u64, docs: u64, frac: f64) -> PhraseStats {
        PhraseStats {
            phrase: phrase.into(),
            corpus_count: count,
            doc_count: docs,
            corpus_fraction: frac,
        }
    }

    #[test]
    fn extracts_all_ngrams() {
        let s = extract_phrases(&[doc("1", &["a", "b"])], 2);
        let got: Vec<(&str, u64)> = s.iter().map(|p| (p.phrase.as_str(), p.corpus_count)).collect();
        assert_eq!(got, vec![("a", 1), ("a b", 1), ("b", 1)]);
        let total: f64 = s.iter().map(|p| p.corpus_fraction).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn doc_count_counts_documents() {
        let s = extract_phrases(&[doc("1", &["tax", "tax"]), doc("2", &["tax"])], 1);
        assert_eq!(s[0].phrase, "tax");
        assert_eq!(s[0].corpus_count, 3);
        assert_eq!(s[0].doc_count, 2);
        assert!(extract_phrases(&[], 5).is_empty());
    }

    #[test]
    fn corpus_fraction_ratio() {
        let toks: Vec<String> = (0..1000).map(|i| if i < 10 { "x".into() } else { format!("w{i}") }).collect();
        let d = BillDoc {
            tokens: toks,
            ..doc("1", &[])
        };
        let s = extract_phrases(&[d], 1);
        let x = s.iter().find(|p| p.phrase == "x").unwrap();
        assert!((x.corpus_fraction - 0.01).abs() < 1e-15);
    }

    #[test]
    fn filter_thresholds() {
        let t = FilterThresholds::default();
        let n = 100;
        assert!(!t.keeps(&stats("common", 50, 11, 0.01), n));
        assert!(!t.keeps(&stats("rare", 50, 3, 0.01), n));
        assert!(t.keeps(&stats("ok", 5, 5, 0.00002), n));
        assert!(t.keeps(&stats("edge", 10, 10, 0.00001), n));
        assert!(!t.keeps(&stats("thin", 10, 5, 0.000009), n));
    }

    #[test]
    fn features_defaults_and_indicators() {
        let none = HashMap::new();
        let f = compute_features(&stats("sec amend", 7, 3, 0.1), &none, 7.0).unwrap();
        assert_eq!(f.get("test.zeroTRUE"), Some(1.0));
        assert_eq!(f.get("test.pos"), Some(0.0));
        assert_eq!(f.get("test.neg"), Some(0.0));
        assert_eq!(f.get("anchortext.presentTRUE"), Some(0.0));
        assert_eq!(f.get("anchortext"), Some(0.0));
        assert_eq!(f.get("number.terms2"), Some(1.0));
        for n in [1, 3, 4, 5] {
            assert_eq!(f.get(&format!("number.terms{n}")), Some(0.0));
        }
        assert_eq!(f.get("has.secTRUE"), Some(1.0));
        assert_eq!(f.get("has.amendTRUE"), Some(1.0));
        assert_eq!(f.get("has.strikTRUE"), Some(0.0));
        assert_eq!(f.get("doc.sq"), Some(9.0));
    }

    #[test]
    fn test_statistic_transforms() {
        let none = HashMap::new();
        // observed 13, expected 4: test = 9/2
        let f = compute_features(&stats("a b", 13, 3, 0.1), &none, 4.0).unwrap();
        assert!((f.get("test.neg").unwrap() - 5.5f64.ln()).abs() < 1e-12);
        assert_eq!(f.get("test.pos"), Some(0.0));
        assert_eq!(f.get("test.zeroTRUE"), Some(0.0));
        let mut anchor = HashMap::new();
        anchor.insert("a b".to_string(), 2.5);
        let g = compute_features(&stats("a b", 1, 1, 0.1), &anchor, 4.0).unwrap();
        // test = -3/2
        assert!((g.get("test.pos").unwrap() - 2.5f64.ln()).abs() < 1e-12);
        assert_eq!(g.get("anchortext.presentTRUE"), Some(1.0));
        assert_eq!(g.get("anchortext"), Some(2.5));
        assert!((g.get("log(number.docs + 1) * anchortext").unwrap() - 2.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn features_reject_bad_inputs() {
        let none = HashMap::new();
        assert!(compute_features(&stats("a", 1, 1, 0.1), &none, f64::NAN).is_err());
        assert!(compute_features(&stats("a", 1, 1, 0.1), &none, 0.0).is_err());
    }

    fn single_feature(phrase: &str, value: f64) -> PhraseFeatures {
        let mut v = [0.0; N_FEATURES];
        v[1] = value;
        PhraseFeatures {
            phrase: phrase.into(),
            values: v,
        }
    }

    #[test]
    fn separable_feature_gets_finite_positive_weight() {
        let feats: Vec<_> = (0..20)
            .map(|i| single_feature(&format!("p{i}"), if i < 10 { -1.0 } else { 1.0 }))
            .collect();
        let bad: HashSet<String> = (0..10).map(|i| format!("p{i}")).collect();
        let m = train_phrase_classifier(&feats, &bad, &TrainOptions::default()).unwrap();
        let w = m.weights["log(number.docs + 1)"];
        assert!(w.is_finite() && w > 0.0, "{w}");
    }

    #[test]
    fn uninformative_features_shrink_to_zero() {
        // label pattern repeats within each feature value, so features carry
        // no information about the label
        let feats: Vec<_> = (0..40).map(|i| single_feature(&format!("p{i}"), (i / 4) as f64)).collect();
        let bad: HashSet<String> = (0..40).filter(|i| i % 4 == 0).map(|i| format!("p{i}")).collect();
        let mut prev = f64::INFINITY;
        for penalty in [0.1, 10.0, 1000.0] {
            let opts = TrainOptions {
                l2_penalty: penalty,
                ..TrainOptions::default()
            };
            let m = train_phrase_classifier(&feats, &bad, &opts).unwrap();
            let w = m.weights.values().map(|v| v.abs()).fold(0.0, f64::max);
            assert!(w <= prev + 1e-12);
            prev = w;
        }
        assert!(prev < 1e-3, "{prev}");
    }

    #[test]
    fn classifier_requires_both_classes() {
        let feats = vec![single_feature("a", 1.0)];
        let bad: HashSet<String> = ["a".to_string()].into();
        assert!(train_phrase_classifier(&feats, &bad, &TrainOptions::default()).is_err());
        assert!(train_phrase_classifier(&feats, &HashSet::new(), &TrainOptions::default()).is_err());
    }

    #[test]
    fn selection_order_and_ties() {
        let feats = vec![single_feature("b", 1.0), single_feature("a", 1.0), single_feature("c", 2.0)];
        let m = VocabModel::doc_frequency();
        let v = select_vocabulary(&m, &feats, 3).unwrap();
        assert_eq!(v.phrases, vec!["c", "a", "b"]);
        let v2 = select_vocabulary(&m, &feats, 2).unwrap();
        assert_eq!(v2.phrases, vec!["c", "a"]);
        assert!(select_vocabulary(&m, &feats, 4).is_err());
    }

    #[test]
    fn bag_counts_overlapping_occurrences() {
        let v = Vocabulary::new(vec!["a b".into()]).unwrap();
        assert_eq!(bag_of_phrases(&doc("1", &["a", "b", "a", "b"]), &v), vec![(0, 2)]);
        assert!(bag_of_phrases(&doc("1", &["c", "d"]), &v).is_empty());
        assert!(bag_of_phrases(&doc("1", &[]), &v).is_empty());
        let v = Vocabulary::new(vec!["a a".into(), "a".into()]).unwrap();
        assert_eq!(bag_of_phrases(&doc("1", &["a", "a", "a"]), &v), vec![(0, 2), (1, 3)]);
    }

    #[test]
    fn vocabulary_rejects_duplicates() {
        assert!(Vocabulary::new(vec!["a".into(), "a".into()]).is_err());
    }
}
