//! Issue encoding of bill texts.
//!
//! Topics are anchored to issue labels: each label's topic starts as the
//! smoothed phrase distribution of the bills carrying it and is then refined
//! by a few variational EM iterations. A bill's issue mixture is the
//! variational posterior mean of its topic proportions.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{digamma, ln_gamma};

use crate::corpus::BillDoc;
use crate::error::{Error, Result};
use crate::rng;
use crate::vocab::{bag_of_phrases, Vocabulary};

/// Additive smoothing applied to topic word counts.
pub const PSEUDOCOUNT: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct Topic {
    pub label: String,
    pub word_dist: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopicModel {
    pub topics: Vec<Topic>,
    /// Symmetric Dirichlet concentration.
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IssueMixture {
    pub bill_id: String,
    pub theta: Vec<f64>,
}

/// Per-phrase topic assignment probabilities of one document. `words`
/// holds the distinct in-vocabulary phrases with their counts; row `i` of
/// `phi` belongs to `words[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WordAssignmentPosterior {
    pub words: Vec<(usize, u32)>,
    pub phi: Vec<Vec<f64>>,
}

/// Result of document-level inference.
#[derive(Debug, Clone)]
pub struct DocumentPosterior {
    pub gamma: Vec<f64>,
    pub assignments: WordAssignmentPosterior,
    /// Document ELBO after every coordinate-ascent iteration.
    pub elbo_trace: Vec<f64>,
}

impl DocumentPosterior {
    pub fn theta(&self) -> Vec<f64> {
        let s: f64 = self.gamma.iter().sum();
        self.gamma.iter().map(|g| g / s).collect()
    }

    pub fn elbo(&self) -> f64 {
        self.elbo_trace.last().copied().unwrap_or(f64::NEG_INFINITY)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InferOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for InferOptions {
    fn default() -> Self {
        Self {
            tol: 1e-5,
            max_iter: 200,
        }
    }
}

impl TopicModel {
    pub fn k(&self) -> usize {
        self.topics.len()
    }

    pub fn vocab_size(&self) -> usize {
        self.topics.first().map_or(0, |t| t.word_dist.len())
    }

    pub fn labels(&self) -> Vec<String> {
        self.topics.iter().map(|t| t.label.clone()).collect()
    }

    fn log_beta(&self) -> Vec<Vec<f64>> {
        self.topics
            .iter()
            .map(|t| t.word_dist.iter().map(|p| p.ln()).collect())
            .collect()
    }

    /// Writes `{alpha, labels, vocab_size, topics}` with each topic as sparse
    /// `(phrase index, probability)` pairs.
    pub fn write(&self, path: &Path) -> Result<()> {
        let file = TopicModelFile {
            alpha: self.alpha,
            labels: self.labels(),
            vocab_size: self.vocab_size(),
            topics: self
                .topics
                .iter()
                .map(|t| {
                    t.word_dist
                        .iter()
                        .enumerate()
                        .filter(|(_, p)| **p != 0.0)
                        .map(|(i, p)| (i, *p))
                        .collect()
                })
                .collect(),
        };
        let s = serde_json::to_string(&file).map_err(|e| Error::json(path, e))?;
        std::fs::write(path, s + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let f: TopicModelFile = serde_json::from_str(&s).map_err(|e| Error::json(path, e))?;
        if f.labels.len() != f.topics.len() {
            return Err(Error::Integrity("topic labels and topics differ in length".into()));
        }
        let topics = f
            .labels
            .into_iter()
            .zip(f.topics)
            .map(|(label, pairs)| {
                let mut word_dist = vec![0.0; f.vocab_size];
                for (i, p) in pairs {
                    *word_dist
                        .get_mut(i)
                        .ok_or_else(|| Error::Integrity(format!("phrase index {i} out of range")))? = p;
                }
                Ok(Topic { label, word_dist })
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            topics,
            alpha: f.alpha,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct TopicModelFile {
    alpha: f64,
    labels: Vec<String>,
    vocab_size: usize,
    topics: Vec<Vec<(usize, f64)>>,
}

fn normalize_smoothed(counts: &[f64], pseudocount: f64) -> Vec<f64> {
    let total: f64 = counts.iter().sum::<f64>() + pseudocount * counts.len() as f64;
    counts.iter().map(|c| (c + pseudocount) / total).collect()
}

/// Number of bills carrying each label.
pub fn label_counts(bills: &[BillDoc]) -> BTreeMap<String, usize> {
    let mut counts = BTreeMap::new();
    for b in bills {
        for l in &b.labels {
            *counts.entry(l.clone()).or_insert(0) += 1;
        }
    }
    counts
}

/// Labels applied to at least `min_label_count` bills, in lexicographic order.
pub fn retained_labels(bills: &[BillDoc], min_label_count: usize) -> Vec<String> {
    label_counts(bills)
        .into_iter()
        .filter(|(_, c)| *c >= min_label_count)
        .map(|(l, _)| l)
        .collect()
}

/// One topic per retained label: the smoothed phrase distribution of the
/// bills carrying that label. The Dirichlet concentration defaults to `1/K`.
pub fn build_labeled_topics(bills: &[BillDoc], vocab: &Vocabulary, min_label_count: usize) -> Result<TopicModel> {
    build_labeled_topics_with(bills, vocab, min_label_count, PSEUDOCOUNT)
}

/// [`build_labeled_topics`] with an explicit smoothing pseudocount.
pub fn build_labeled_topics_with(
    bills: &[BillDoc],
    vocab: &Vocabulary,
    min_label_count: usize,
    pseudocount: f64,
) -> Result<TopicModel> {
    if !(pseudocount > 0.0) {
        return Err(Error::InvalidArgument(format!("pseudocount must be positive, got {pseudocount}")));
    }
    let labels = retained_labels(bills, min_label_count);
    if labels.is_empty() {
        return Err(Error::EmptyModel(format!(
            "no issue label is applied to at least {min_label_count} bills"
        )));
    }
    let v = vocab.len();
    let mut counts = vec![vec![0.0; v]; labels.len()];
    let pos: BTreeMap<&str, usize> = labels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
    for b in bills {
        let bag = bag_of_phrases(b, vocab);
        for l in &b.labels {
            if let Some(&k) = pos.get(l.as_str()) {
                for &(w, c) in &bag {
                    counts[k][w] += c as f64;
                }
            }
        }
    }
    let k = labels.len();
    Ok(TopicModel {
        topics: labels
            .into_iter()
            .zip(counts)
            .map(|(label, c)| Topic {
                label,
                word_dist: normalize_smoothed(&c, pseudocount),
            })
            .collect(),
        alpha: 1.0 / k as f64,
    })
}

/// Coordinate-ascent variational inference for one document's topic
/// proportions. `init_gamma` warm-starts the Dirichlet parameters.
pub fn infer_document(
    words: &[(usize, u32)],
    model: &TopicModel,
    log_beta: &[Vec<f64>],
    opts: &InferOptions,
    init_gamma: Option<&[f64]>,
) -> DocumentPosterior {
    let k = model.k();
    let alpha = model.alpha;
    // phrases with zero probability under every topic carry no information
    let words: Vec<(usize, u32)> = words
        .iter()
        .copied()
        .filter(|&(w, _)| log_beta.iter().any(|lb| lb[w] > f64::NEG_INFINITY))
        .collect();
    let n: f64 = words.iter().map(|&(_, c)| c as f64).sum();
    let mut gamma: Vec<f64> = match init_gamma {
        Some(g) => g.to_vec(),
        None => vec![alpha + n / k as f64; k],
    };
    let mut phi = vec![vec![0.0; k]; words.len()];
    let mut trace = Vec::new();
    let const_term = ln_gamma(k as f64 * alpha) - k as f64 * ln_gamma(alpha);

    for _ in 0..opts.max_iter.max(1) {
        let dig: Vec<f64> = gamma.iter().map(|&g| digamma(g)).collect();
        for (row, &(w, _)) in phi.iter_mut().zip(&words) {
            let mut mx = f64::NEG_INFINITY;
            for j in 0..k {
                row[j] = log_beta[j][w] + dig[j];
                mx = mx.max(row[j]);
            }
            let mut s = 0.0;
            for r in row.iter_mut() {
                *r = (*r - mx).exp();
                s += *r;
            }
            row.iter_mut().for_each(|r| *r /= s);
        }
        for j in 0..k {
            gamma[j] = alpha + phi.iter().zip(&words).map(|(row, &(_, c))| c as f64 * row[j]).sum::<f64>();
        }

        let gsum: f64 = gamma.iter().sum();
        let dig_sum = digamma(gsum);
        let elog: Vec<f64> = gamma.iter().map(|&g| digamma(g) - dig_sum).collect();
        let mut elbo = const_term + (alpha - 1.0) * elog.iter().sum::<f64>();
        for (row, &(w, c)) in phi.iter().zip(&words) {
            let mut t = 0.0;
            for j in 0..k {
                if row[j] > 0.0 {
                    t += row[j] * (elog[j] + log_beta[j][w] - row[j].ln());
                }
            }
            elbo += c as f64 * t;
        }
        elbo += -ln_gamma(gsum)
            + gamma
                .iter()
                .zip(&elog)
                .map(|(&g, &e)| ln_gamma(g) - (g - 1.0) * e)
                .sum::<f64>();
        let done = trace
            .last()
            .is_some_and(|&prev: &f64| ((elbo - prev) / prev.abs().max(f64::MIN_POSITIVE)).abs() < opts.tol);
        trace.push(elbo);
        if done || k == 1 {
            break;
        }
    }
    DocumentPosterior {
        gamma,
        assignments: WordAssignmentPosterior { words, phi },
        elbo_trace: trace,
    }
}

/// Issue mixture of one bill: the variational Dirichlet mean.
pub fn infer_mixture(doc: &BillDoc, model: &TopicModel, vocab: &Vocabulary, opts: &InferOptions) -> Result<IssueMixture> {
    let bag = bag_of_phrases(doc, vocab);
    if bag.is_empty() {
        return Err(Error::EmptyDocument(doc.id.clone()));
    }
    let post = infer_document(&bag, model, &model.log_beta(), opts, None);
    if post.assignments.words.is_empty() {
        return Err(Error::EmptyDocument(doc.id.clone()));
    }
    Ok(IssueMixture {
        bill_id: doc.id.clone(),
        theta: post.theta(),
    })
}

/// Mixtures for every bill with in-vocabulary content.
pub fn infer_mixtures(bills: &[BillDoc], model: &TopicModel, vocab: &Vocabulary, opts: &InferOptions) -> Result<Vec<IssueMixture>> {
    let log_beta = model.log_beta();
    let run = |b: &BillDoc| -> Result<IssueMixture> {
        let bag = bag_of_phrases(b, vocab);
        let post = infer_document(&bag, model, &log_beta, opts, None);
        if post.assignments.words.is_empty() {
            return Err(Error::EmptyDocument(b.id.clone()));
        }
        Ok(IssueMixture {
            bill_id: b.id.clone(),
            theta: post.theta(),
        })
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        bills.par_iter().map(run).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        bills.iter().map(run).collect()
    }
}

struct EmCorpus {
    docs: Vec<Vec<(usize, u32)>>,
}

impl EmCorpus {
    fn new(bills: &[BillDoc], vocab: &Vocabulary) -> Self {
        Self {
            docs: bills
                .iter()
                .map(|b| bag_of_phrases(b, vocab))
                .filter(|bag| !bag.is_empty())
                .collect(),
        }
    }

    /// E-step over all documents; returns posteriors and the summed ELBO.
    fn e_step(&self, model: &TopicModel, gammas: &[Option<Vec<f64>>], opts: &InferOptions) -> Vec<DocumentPosterior> {
        let log_beta = model.log_beta();
        let run = |(words, g): (&Vec<(usize, u32)>, &Option<Vec<f64>>)| infer_document(words, model, &log_beta, opts, g.as_deref());
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            self.docs.par_iter().zip(gammas.par_iter()).map(run).collect()
        }
        #[cfg(not(feature = "parallel"))]
        {
            self.docs.iter().zip(gammas.iter()).map(run).collect()
        }
    }

    /// Re-estimates every topic from expected counts plus the pseudocount.
    fn m_step(model: &TopicModel, posts: &[DocumentPosterior], pseudocount: f64) -> TopicModel {
        let k = model.k();
        let v = model.vocab_size();
        let mut counts = vec![vec![0.0; v]; k];
        for p in posts {
            for (row, &(w, c)) in p.assignments.phi.iter().zip(&p.assignments.words) {
                for j in 0..k {
                    counts[j][w] += c as f64 * row[j];
                }
            }
        }
        TopicModel {
            topics: model
                .topics
                .iter()
                .zip(counts)
                .map(|(t, c)| Topic {
                    label: t.label.clone(),
                    word_dist: normalize_smoothed(&c, pseudocount),
                })
                .collect(),
            alpha: model.alpha,
        }
    }
}

fn topic_log_prior(model: &TopicModel) -> f64 {
    model
        .topics
        .iter()
        .flat_map(|t| t.word_dist.iter())
        .map(|p| PSEUDOCOUNT * p.ln())
        .sum()
}

/// Runs `iterations` of variational EM starting from `model`, keeping topic
/// labels by index.
pub fn smooth_topics(model: &TopicModel, bills: &[BillDoc], vocab: &Vocabulary, iterations: usize) -> TopicModel {
    smooth_topics_with(model, bills, vocab, iterations, PSEUDOCOUNT)
}

/// [`smooth_topics`] with an explicit M-step pseudocount.
pub fn smooth_topics_with(
    model: &TopicModel,
    bills: &[BillDoc],
    vocab: &Vocabulary,
    iterations: usize,
    pseudocount: f64,
) -> TopicModel {
    let corpus = EmCorpus::new(bills, vocab);
    let mut current = model.clone();
    let opts = InferOptions::default();
    let none = vec![None; corpus.docs.len()];
    for _ in 0..iterations {
        let posts = corpus.e_step(&current, &none, &opts);
        current = EmCorpus::m_step(&current, &posts, pseudocount);
    }
    current
}

#[derive(Debug, Clone)]
pub struct LdaFit {
    pub model: TopicModel,
    /// Corpus objective (summed document ELBOs plus the topic smoothing
    /// prior) after each EM iteration.
    pub objective_trace: Vec<f64>,
    /// False when `max_iter` was reached before the relative change fell
    /// below `1e-5`.
    pub converged: bool,
}

/// Unsupervised LDA by variational EM from a seeded random initialization.
pub fn fit_unsupervised_lda(bills: &[BillDoc], vocab: &Vocabulary, k: usize, seed: u64, max_iter: usize) -> Result<LdaFit> {
    if k == 0 {
        return Err(Error::InvalidArgument("K must be at least 1".into()));
    }
    let corpus = EmCorpus::new(bills, vocab);
    if corpus.docs.is_empty() {
        return Err(Error::EmptyModel("no bill has in-vocabulary content".into()));
    }
    let v = vocab.len();
    let mut freq = vec![0.0; v];
    for d in &corpus.docs {
        for &(w, c) in d {
            freq[w] += c as f64;
        }
    }
    let mut r = rng::stream(seed, &[0x1da]);
    let topics = (0..k)
        .map(|j| {
            let c: Vec<f64> = freq.iter().map(|f| f * (0.5 + r.random::<f64>())).collect();
            Topic {
                label: format!("topic-{j}"),
                word_dist: normalize_smoothed(&c, PSEUDOCOUNT),
            }
        })
        .collect();
    let mut model = TopicModel {
        topics,
        alpha: 1.0 / k as f64,
    };
    let opts = InferOptions {
        tol: 1e-8,
        max_iter: 100,
    };
    let mut gammas: Vec<Option<Vec<f64>>> = vec![None; corpus.docs.len()];
    let mut trace: Vec<f64> = Vec::new();
    let mut converged = false;
    for _ in 0..max_iter {
        let posts = corpus.e_step(&model, &gammas, &opts);
        let obj = posts.iter().map(DocumentPosterior::elbo).sum::<f64>() + topic_log_prior(&model);
        gammas = posts.iter().map(|p| Some(p.gamma.clone())).collect();
        model = EmCorpus::m_step(&model, &posts, PSEUDOCOUNT);
        let done = trace.last().is_some_and(|&prev| ((obj - prev) / prev.abs()).abs() < 1e-5);
        trace.push(obj);
        if done {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("unsupervised LDA reached {max_iter} iterations without converging");
    }
    Ok(LdaFit {
        model,
        objective_trace: trace,
        converged,
    })
}

/// Weight `1/J` on each of a bill's `J` retained labels.
pub fn encode_direct_labels(bills: &[BillDoc], labels: &[String]) -> Result<Vec<IssueMixture>> {
    let pos: BTreeMap<&str, usize> = labels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
    let mut out = Vec::with_capacity(bills.len());
    let mut unlabeled = Vec::new();
    for b in bills {
        let hits: BTreeSet<usize> = b.labels.iter().filter_map(|l| pos.get(l.as_str()).copied()).collect();
        if hits.is_empty() {
            unlabeled.push(b.id.clone());
            continue;
        }
        let mut theta = vec![0.0; labels.len()];
        let w = 1.0 / hits.len() as f64;
        for j in hits {
            theta[j] = w;
        }
        out.push(IssueMixture {
            bill_id: b.id.clone(),
            theta,
        });
    }
    if !unlabeled.is_empty() {
        return Err(Error::UnlabeledBills(unlabeled));
    }
    Ok(out)
}

/// Uniform random permutation of `0..n`.
pub fn permutation(n: usize, seed: u64) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(&mut rng::stream(seed, &[0x9e4]));
    p
}

/// Reassigns θ vectors to bills by a seeded permutation: bill `i` receives
/// the mixture of bill `π(i)`.
pub fn permute_mixtures(mixtures: &[IssueMixture], seed: u64) -> Vec<IssueMixture> {
    let perm = permutation(mixtures.len(), seed);
    mixtures
        .iter()
        .zip(&perm)
        .map(|(m, &src)| IssueMixture {
            bill_id: m.bill_id.clone(),
            theta: mixtures[src].theta.clone(),
        })
        .collect()
}

/// Writes `bill_id,k,theta_k` triplets for the nonzero components.
pub fn write_mixtures(path: &Path, mixtures: &[IssueMixture]) -> Result<()> {
    let mut w = std::io::BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    let res = (|| -> std::io::Result<()> {
        writeln!(w, "bill_id,k,theta_k")?;
        for m in mixtures {
            for (k, t) in m.theta.iter().enumerate() {
                if *t != 0.0 {
                    writeln!(w, "{},{k},{t}", m.bill_id)?;
                }
            }
        }
        w.flush()
    })();
    res.map_err(|e| Error::io(path, e))
}

/// Reads sparse mixture triplets into dense `k`-vectors, in first-seen
/// bill order.
pub fn read_mixtures(path: &Path, k: usize) -> Result<Vec<IssueMixture>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::parse(path, 1, e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if header != ["bill_id", "k", "theta_k"] {
        return Err(Error::parse(path, 1, "expected header `bill_id,k,theta_k`"));
    }
    let mut order: Vec<String> = Vec::new();
    let mut rows: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::parse(path, e.position().map_or(0, |p| p.line() as usize), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let j: usize = rec
            .get(1)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::parse(path, line, "bad issue index"))?;
        let t: f64 = rec
            .get(2)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::parse(path, line, "bad theta value"))?;
        if j >= k {
            return Err(Error::parse(path, line, format!("issue index {j} out of range for K = {k}")));
        }
        let id = rec.get(0).unwrap_or_default().to_string();
        let row = rows.entry(id.clone()).or_insert_with(|| {
            order.push(id);
            vec![0.0; k]
        });
        row[j] = t;
    }
    Ok(order
        .into_iter()
        .map(|id| {
            let theta = rows.remove(&id).unwrap_or_default();
            IssueMixture { bill_id: id, theta }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(id: &str, toks: &[&str], labels: &[&str]) -> BillDoc {
        BillDoc {
            id: id.into(),
            title: String::new(),
            tokens: toks.iter().map(|t| t.to_string()).collect(),
            labels: labels.iter().map(|l| l.to_string()).collect(),
        }
    }

    fn two_topic_model(alpha: f64) -> (TopicModel, Vocabulary) {
        let vocab = Vocabulary::new(vec!["a".into(), "b".into(), "c".into(), "d".into()]).unwrap();
        let model = TopicModel {
            topics: vec![
                Topic {
                    label: "one".into(),
                    word_dist: vec![0.5, 0.5, 0.0, 0.0],
                },
                Topic {
                    label: "two".into(),
                    word_dist: vec![0.0, 0.0, 0.5, 0.5],
                },
            ],
            alpha,
        };
        (model, vocab)
    }

    /// Exact posterior mean of θ by enumerating the `K^N` topic assignments
    /// (Dirichlet–multinomial conjugacy given the assignments).
    fn enumerated_posterior_mean(tokens: &[usize], model: &TopicModel) -> Vec<f64> {
        let k = model.k();
        let n = tokens.len();
        let alpha = model.alpha;
        let mut num = vec![0.0; k];
        let mut den = 0.0;
        for code in 0..k.pow(n as u32) {
            let mut c = code;
            let mut counts = vec![0usize; k];
            let mut lik = 1.0;
            for &w in tokens {
                let j = c % k;
                c /= k;
                counts[j] += 1;
                lik *= model.topics[j].word_dist[w];
            }
            if lik == 0.0 {
                continue;
            }
            // p(assignment) under the Dirichlet prior
            let log_prior = ln_gamma(k as f64 * alpha) - ln_gamma(k as f64 * alpha + n as f64)
                + counts.iter().map(|&m| ln_gamma(alpha + m as f64) - ln_gamma(alpha)).sum::<f64>();
            let weight = lik * log_prior.exp();
            den += weight;
            for j in 0..k {
                num[j] += weight * (alpha + counts[j] as f64) / (k as f64 * alpha + n as f64);
            }
        }
        num.iter().map(|v| v / den).collect()
    }

    #[test]
    fn disjoint_topics_match_enumeration() {
        let (model, vocab) = two_topic_model(1e-4);
        let d = doc("x", &["a", "b", "a", "c"], &[]);
        let m = infer_mixture(&d, &model, &vocab, &InferOptions::default()).unwrap();
        let exact = enumerated_posterior_mean(&[0, 1, 0, 2], &model);
        assert!((exact[0] - 0.75).abs() < 1e-4);
        for j in 0..2 {
            assert!((m.theta[j] - exact[j]).abs() < 1e-6, "{:?} vs {:?}", m.theta, exact);
        }
    }

    #[test]
    fn single_topic_is_one() {
        let vocab = Vocabulary::new(vec!["a".into()]).unwrap();
        let model = TopicModel {
            topics: vec![Topic {
                label: "only".into(),
                word_dist: vec![1.0],
            }],
            alpha: 1.0,
        };
        let m = infer_mixture(&doc("x", &["a", "a"], &[]), &model, &vocab, &InferOptions::default()).unwrap();
        assert_eq!(m.theta, vec![1.0]);
    }

    #[test]
    fn dominant_topic_takes_mass_as_alpha_shrinks() {
        let (model, vocab) = two_topic_model(1e-6);
        let m = infer_mixture(&doc("x", &["c", "d", "c"], &[]), &model, &vocab, &InferOptions::default()).unwrap();
        assert!(m.theta[1] > 1.0 - 1e-5);
    }

    #[test]
    fn empty_document_errors() {
        let (model, vocab) = two_topic_model(0.5);
        assert!(matches!(
            infer_mixture(&doc("x", &["zzz"], &[]), &model, &vocab, &InferOptions::default()),
            Err(Error::EmptyDocument(_))
        ));
    }

    #[test]
    fn document_elbo_is_monotone() {
        let model = TopicModel {
            topics: vec![
                Topic {
                    label: "a".into(),
                    word_dist: vec![0.3, 0.3, 0.2, 0.1, 0.05, 0.05],
                },
                Topic {
                    label: "b".into(),
                    word_dist: vec![0.05, 0.05, 0.1, 0.2, 0.3, 0.3],
                },
                Topic {
                    label: "c".into(),
                    word_dist: vec![1.0 / 6.0; 6],
                },
            ],
            alpha: 0.3,
        };
        let words = vec![(0, 3), (2, 1), (4, 5), (5, 2)];
        let post = infer_document(&words, &model, &model.log_beta(), &InferOptions { tol: 1e-12, max_iter: 200 }, None);
        assert!(post.elbo_trace.len() > 2);
        for w in post.elbo_trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-10, "{:?}", w);
        }
        let t = post.theta();
        assert!((t.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for row in &post.assignments.phi {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn label_threshold_excludes_rare_labels() {
        let vocab = Vocabulary::new(vec!["tax".into(), "health".into()]).unwrap();
        let mut bills: Vec<BillDoc> = (0..25).map(|i| doc(&format!("b{i}"), &["tax"], &["taxation"])).collect();
        for i in 0..24 {
            bills[i].labels.insert("health".into());
        }
        let m = build_labeled_topics(&bills, &vocab, 25).unwrap();
        assert_eq!(m.labels(), vec!["taxation"]);
        assert!(matches!(build_labeled_topics(&bills, &vocab, 26), Err(Error::EmptyModel(_))));
    }

    #[test]
    fn single_label_is_smoothed_corpus_distribution() {
        let vocab = Vocabulary::new(vec!["a".into(), "b".into(), "c".into()]).unwrap();
        let bills = vec![doc("1", &["a", "a", "b"], &["x"]), doc("2", &["b"], &["x"])];
        let m = build_labeled_topics(&bills, &vocab, 1).unwrap();
        let z = 4.0 + 0.03;
        let expect = [2.01 / z, 2.01 / z, 0.01 / z];
        for (got, e) in m.topics[0].word_dist.iter().zip(expect) {
            assert!((got - e).abs() < 1e-15);
        }
        assert_eq!(m.alpha, 1.0);
    }

    #[test]
    fn smoothing_keeps_simplex_and_single_doc_fixed_point() {
        let vocab = Vocabulary::new(vec!["a".into(), "b".into(), "c".into()]).unwrap();
        let bills = vec![doc("1", &["a", "b", "b", "c", "b"], &["x"])];
        let m = build_labeled_topics(&bills, &vocab, 1).unwrap();
        assert_eq!(smooth_topics(&m, &bills, &vocab, 0), m);
        let s = smooth_topics(&m, &bills, &vocab, 3);
        for (a, b) in s.topics[0].word_dist.iter().zip(&m.topics[0].word_dist) {
            assert!((a - b).abs() < 1e-12);
        }
        let bills2 = vec![
            doc("1", &["a", "b", "b"], &["x"]),
            doc("2", &["c", "c", "a"], &["y"]),
            doc("3", &["a", "c"], &["x", "y"]),
        ];
        let m2 = build_labeled_topics(&bills2, &vocab, 1).unwrap();
        let s2 = smooth_topics(&m2, &bills2, &vocab, 2);
        assert_eq!(s2.labels(), m2.labels());
        for t in &s2.topics {
            assert!(t.word_dist.iter().all(|p| *p >= 0.0));
            assert!((t.word_dist.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn direct_labels() {
        let labels: Vec<String> = (0..74).map(|i| format!("l{i:02}")).collect();
        let mut b = doc("1", &[], &["l03", "l40", "unretained"]);
        let m = encode_direct_labels(std::slice::from_ref(&b), &labels).unwrap();
        assert_eq!(m[0].theta[3], 0.5);
        assert_eq!(m[0].theta[40], 0.5);
        assert_eq!(m[0].theta.iter().filter(|t| **t != 0.0).count(), 2);
        b.labels = ["l07".to_string()].into();
        let one = encode_direct_labels(std::slice::from_ref(&b), &labels).unwrap();
        assert_eq!(one[0].theta[7], 1.0);
        let none = doc("2", &[], &["other"]);
        match encode_direct_labels(&[b, none], &labels) {
            Err(Error::UnlabeledBills(ids)) => assert_eq!(ids, vec!["2"]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn permutation_preserves_multiset() {
        let mixtures: Vec<IssueMixture> = (0..9)
            .map(|i| IssueMixture {
                bill_id: format!("b{i}"),
                theta: vec![i as f64 / 8.0, 1.0 - i as f64 / 8.0],
            })
            .collect();
        let p = permute_mixtures(&mixtures, 3);
        assert_eq!(p, permute_mixtures(&mixtures, 3));
        let key = |m: &[IssueMixture]| {
            let mut v: Vec<String> = m.iter().map(|x| format!("{:?}", x.theta)).collect();
            v.sort();
            v
        };
        assert_eq!(key(&p), key(&mixtures));
        assert!(p.iter().zip(&mixtures).all(|(a, b)| a.bill_id == b.bill_id));
        let single = &mixtures[..1];
        assert_eq!(permute_mixtures(single, 99), single);
    }

    #[test]
    fn lda_single_topic_and_monotone_objective() {
        let vocab = Vocabulary::new(vec!["a".into(), "b".into(), "c".into()]).unwrap();
        let bills = vec![doc("1", &["a", "b", "b"], &[]), doc("2", &["c", "b"], &[])];
        let fit = fit_unsupervised_lda(&bills, &vocab, 1, 4, 20).unwrap();
        assert!(fit.converged);
        let z = 5.0 + 0.03;
        let expect = [1.01 / z, 3.01 / z, 1.01 / z];
        for (got, e) in fit.model.topics[0].word_dist.iter().zip(expect) {
            assert!((got - e).abs() < 1e-12);
        }
        assert_eq!(fit.model.labels(), vec!["topic-0"]);
    }

    #[test]
    fn mixtures_file_round_trip() {
        let mixtures = vec![
            IssueMixture {
                bill_id: "b2".into(),
                theta: vec![0.1, 0.0, 0.9],
            },
            IssueMixture {
                bill_id: "b1".into(),
                theta: vec![1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
            },
        ];
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        write_mixtures(&p, &mixtures).unwrap();
        assert_eq!(read_mixtures(&p, 3).unwrap(), mixtures);
        assert!(read_mixtures(&p, 2).is_err());
    }

    #[test]
    fn topic_model_file_round_trip() {
        let (model, _) = two_topic_model(0.25);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.json");
        model.write(&p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.contains("[[0,0.5],[1,0.5]]"));
        assert_eq!(TopicModel::read(&p).unwrap(), model);
    }
}
