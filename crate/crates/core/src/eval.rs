//! Evaluation: heldout prediction, cross-validation, issue improvement,
//! corrected adjustments with permutation significance, and the party
//! discriminant.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::Write;
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::corpus::{FoldAssignment, Lawmaker, Party, RollCallDataset, VoteRecord};
use crate::error::{Error, Result};
use crate::inference::{fit, FitResult, UpdateSchedule};
use crate::linalg::{mean, pearson, sample_variance, solve_spd, variance};
use crate::model::{logistic, vote_loglik, Hyperparams, ModelParams};
use crate::rng;
use crate::topics::{permute_mixtures, IssueMixture};

const LN_HALF: f64 = -std::f64::consts::LN_2;
const TAG_FIT: u64 = 0xf17;
const TAG_PERM: u64 = 0x9e4;

/// Per-vote log-likelihoods under the issue-adjusted (`J`) and classical
/// (`I`) fits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoteLogLik {
    pub lawmaker_id: String,
    pub bill_id: String,
    pub ll_issue: f64,
    pub ll_classic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IssueImprovement {
    pub label: String,
    /// `None` when no evaluated vote carries weight on the issue.
    pub imp: Option<f64>,
    pub weight_sum: f64,
}

/// Mean heldout log-likelihood over the votes the parameters can score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeldoutScore {
    pub mean_loglik: f64,
    pub accuracy: f64,
    pub evaluated: usize,
    /// Votes on lawmakers or bills the parameters do not cover.
    pub excluded: usize,
}

/// Resolves vote ids against a parameter set.
struct Scorer<'a> {
    params: &'a ModelParams,
    lawmakers: HashMap<&'a str, usize>,
    bills: HashMap<&'a str, usize>,
    thetas: HashMap<&'a str, &'a [f64]>,
}

impl<'a> Scorer<'a> {
    fn new(params: &'a ModelParams, mixtures: &'a [IssueMixture]) -> Self {
        Self {
            params,
            lawmakers: params.lawmaker_ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect(),
            bills: params.bill_ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect(),
            thetas: mixtures.iter().map(|m| (m.bill_id.as_str(), m.theta.as_slice())).collect(),
        }
    }

    /// Log-odds of Yea, or `None` for votes the parameters do not cover.
    fn log_odds(&self, v: &VoteRecord) -> Option<f64> {
        let u = *self.lawmakers.get(v.lawmaker_id.as_str())?;
        let d = *self.bills.get(v.bill_id.as_str())?;
        if self.params.k == 0 {
            return Some(self.params.log_odds_unchecked(u, d, None));
        }
        let theta = self.thetas.get(v.bill_id.as_str())?;
        (theta.len() == self.params.k).then(|| self.params.log_odds_unchecked(u, d, Some(theta)))
    }
}

/// Mean `log p(v)` at the point estimates, plus accuracy.
pub fn heldout_loglik(params: &ModelParams, votes: &[VoteRecord], mixtures: &[IssueMixture]) -> HeldoutScore {
    let scorer = Scorer::new(params, mixtures);
    let (mut sum, mut correct, mut n, mut excluded) = (0.0, 0usize, 0usize, 0usize);
    for v in votes {
        match scorer.log_odds(v) {
            Some(s) => {
                let yea = v.vote.is_yea();
                sum += vote_loglik(yea, s);
                correct += is_correct(yea, logistic(s)) as usize;
                n += 1;
            }
            None => excluded += 1,
        }
    }
    HeldoutScore {
        mean_loglik: if n == 0 { f64::NAN } else { sum / n as f64 },
        accuracy: if n == 0 { f64::NAN } else { correct as f64 / n as f64 },
        evaluated: n,
        excluded,
    }
}

fn is_correct(yea: bool, p: f64) -> bool {
    if yea {
        p > 0.5
    } else {
        p < 0.5
    }
}

/// Fraction of votes predicted correctly; a probability of exactly ½ is
/// never correct.
pub fn accuracy(params: &ModelParams, votes: &[VoteRecord], mixtures: &[IssueMixture]) -> f64 {
    heldout_loglik(params, votes, mixtures).accuracy
}

/// `J_ud` and `I_ud` for every vote both parameter sets can score.
pub fn vote_logliks(
    votes: &[VoteRecord],
    issue: &ModelParams,
    classic: &ModelParams,
    mixtures: &[IssueMixture],
) -> Vec<VoteLogLik> {
    let si = Scorer::new(issue, mixtures);
    let sc = Scorer::new(classic, mixtures);
    votes
        .iter()
        .filter_map(|v| {
            let yea = v.vote.is_yea();
            Some(VoteLogLik {
                lawmaker_id: v.lawmaker_id.clone(),
                bill_id: v.bill_id.clone(),
                ll_issue: vote_loglik(yea, si.log_odds(v)?),
                ll_classic: vote_loglik(yea, sc.log_odds(v)?),
            })
        })
        .collect()
}

/// `Imp_k = Σ θ_dk (J_ud − I_ud) / Σ θ_dk`.
pub fn improvement_from_logliks(logliks: &[VoteLogLik], mixtures: &[IssueMixture], labels: &[String]) -> Vec<IssueImprovement> {
    let k = labels.len();
    let thetas: HashMap<&str, &[f64]> = mixtures.iter().map(|m| (m.bill_id.as_str(), m.theta.as_slice())).collect();
    let mut num = vec![0.0; k];
    let mut den = vec![0.0; k];
    for v in logliks {
        let Some(theta) = thetas.get(v.bill_id.as_str()) else {
            continue;
        };
        let gain = v.ll_issue - v.ll_classic;
        for j in 0..k.min(theta.len()) {
            num[j] += theta[j] * gain;
            den[j] += theta[j];
        }
    }
    labels
        .iter()
        .enumerate()
        .map(|(j, label)| IssueImprovement {
            label: label.clone(),
            imp: (den[j] > 0.0).then(|| num[j] / den[j]),
            weight_sum: den[j],
        })
        .collect()
}

pub fn issue_improvement(
    votes: &[VoteRecord],
    issue: &ModelParams,
    classic: &ModelParams,
    mixtures: &[IssueMixture],
    labels: &[String],
) -> Vec<IssueImprovement> {
    improvement_from_logliks(&vote_logliks(votes, issue, classic, mixtures), mixtures, labels)
}

/// Votes the classical fit gets wrong and the issue-adjusted fit gets right.
pub fn improved_votes(logliks: &[VoteLogLik]) -> usize {
    logliks
        .iter()
        .filter(|v| v.ll_classic <= LN_HALF && v.ll_issue > LN_HALF)
        .count()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Classic,
    IssueLda,
    IssueDirect,
    IssuePermuted,
    StandardLda,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::Classic,
        Variant::IssueLda,
        Variant::IssueDirect,
        Variant::IssuePermuted,
        Variant::StandardLda,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Classic => "classic",
            Variant::IssueLda => "issue_lda",
            Variant::IssueDirect => "issue_direct",
            Variant::IssuePermuted => "issue_permuted",
            Variant::StandardLda => "standard_lda",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|v| v.name() == s).ok_or_else(|| {
            Error::InvalidArgument(format!(
                "unknown variant `{s}`; expected one of {}",
                Self::ALL.map(Variant::name).join(", ")
            ))
        })
    }

    fn code(self) -> u64 {
        self as u64
    }
}

/// One model to cross-validate.
#[derive(Debug, Clone)]
pub struct VariantInput {
    pub variant: Variant,
    /// Required for every variant except `classic`.
    pub mixtures: Option<Vec<IssueMixture>>,
    /// Number of seeded permutations for `issue_permuted`.
    pub permutations: usize,
}

impl VariantInput {
    pub fn classic() -> Self {
        Self {
            variant: Variant::Classic,
            mixtures: None,
            permutations: 0,
        }
    }

    pub fn with_mixtures(variant: Variant, mixtures: Vec<IssueMixture>) -> Self {
        Self {
            variant,
            mixtures: Some(mixtures),
            permutations: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvRow {
    pub variant: Variant,
    pub fold: usize,
    pub mean_loglik: f64,
    pub accuracy: f64,
    pub evaluated: usize,
    pub excluded: usize,
    /// False if any fit behind this row hit `max_sweeps`.
    pub converged: bool,
}

/// Fitted parameters of one fold, kept for per-vote analyses.
#[derive(Debug, Clone)]
pub struct FoldFits {
    pub fold: usize,
    pub heldout: Vec<VoteRecord>,
    pub params: BTreeMap<Variant, ModelParams>,
}

#[derive(Debug, Clone)]
pub struct CvResult {
    pub rows: Vec<CvRow>,
    pub folds: Vec<FoldFits>,
}

impl CvResult {
    /// Mean over folds of the per-fold mean heldout log-likelihood.
    pub fn mean_loglik(&self, variant: Variant) -> Option<f64> {
        let v: Vec<f64> = self.rows.iter().filter(|r| r.variant == variant).map(|r| r.mean_loglik).collect();
        (!v.is_empty()).then(|| mean(&v))
    }

    /// `J` and `I` over all heldout votes, from the `issue` and `classic`
    /// fits of each fold.
    pub fn vote_logliks(&self, issue: Variant, mixtures: &[IssueMixture]) -> Vec<VoteLogLik> {
        self.folds
            .iter()
            .filter_map(|f| {
                Some(vote_logliks(
                    &f.heldout,
                    f.params.get(&issue)?,
                    f.params.get(&Variant::Classic)?,
                    mixtures,
                ))
            })
            .flatten()
            .collect()
    }
}

fn fit_seed(seed: u64, fold: usize, variant: Variant, rep: usize) -> u64 {
    rng::derive_seed(seed, &[TAG_FIT, fold as u64, variant.code(), rep as u64])
}

/// Fits every variant on each fold's complement and scores the fold.
pub fn cross_validate(
    ds: &RollCallDataset,
    variants: &[VariantInput],
    hp: &Hyperparams,
    schedule: &UpdateSchedule,
    folds: &FoldAssignment,
    seed: u64,
) -> Result<CvResult> {
    let mut rows = Vec::new();
    let mut fold_fits = Vec::new();
    for fold in 0..folds.n_folds {
        let (r, f) = cross_validate_fold(ds, variants, hp, schedule, folds, seed, fold)?;
        rows.extend(r);
        fold_fits.push(f);
    }
    Ok(CvResult { rows, folds: fold_fits })
}

/// One fold of [`cross_validate`]; depends only on its arguments, so folds
/// may be evaluated in any order.
pub fn cross_validate_fold(
    ds: &RollCallDataset,
    variants: &[VariantInput],
    hp: &Hyperparams,
    schedule: &UpdateSchedule,
    folds: &FoldAssignment,
    seed: u64,
    fold: usize,
) -> Result<(Vec<CvRow>, FoldFits)> {
    for v in variants {
        if v.variant != Variant::Classic && v.mixtures.is_none() {
            return Err(Error::InvalidArgument(format!("variant {} needs issue mixtures", v.variant.name())));
        }
        if v.variant == Variant::IssuePermuted && v.permutations == 0 {
            return Err(Error::InvalidArgument("issue_permuted needs at least one permutation".into()));
        }
    }
    let (train, heldout) = folds.split(ds, fold)?;
    let mut rows = Vec::new();
    let mut params = BTreeMap::new();
    for v in variants {
        let mixtures = v.mixtures.as_deref();
        let reps = if v.variant == Variant::IssuePermuted { v.permutations } else { 1 };
        let mut scores = Vec::with_capacity(reps);
        let mut converged = true;
        for rep in 0..reps {
            let owned;
            let m = if v.variant == Variant::IssuePermuted {
                owned = permute_mixtures(mixtures.unwrap_or(&[]), rng::derive_seed(seed, &[TAG_PERM, rep as u64]));
                Some(owned.as_slice())
            } else {
                mixtures
            };
            let res = fit(&train, m, hp, schedule, fit_seed(seed, fold, v.variant, rep))?;
            converged &= res.converged;
            let p = res.state.to_params();
            scores.push(heldout_loglik(&p, &heldout, m.unwrap_or(&[])));
            if reps == 1 {
                params.insert(v.variant, p);
            }
        }
        rows.push(CvRow {
            variant: v.variant,
            fold,
            mean_loglik: mean(&scores.iter().map(|s| s.mean_loglik).collect::<Vec<_>>()),
            accuracy: mean(&scores.iter().map(|s| s.accuracy).collect::<Vec<_>>()),
            evaluated: scores[0].evaluated,
            excluded: scores[0].excluded,
            converged,
        });
    }
    Ok((rows, FoldFits { fold, heldout, params }))
}

/// Issue adjustments with the ideal point regressed out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectedAdjustments {
    pub lawmaker_ids: Vec<String>,
    pub k: usize,
    pub beta: Vec<f64>,
    /// Zero unless fitted with an intercept.
    pub intercept: Vec<f64>,
    /// Row-major `U × K` residuals `ẑ_uk`.
    pub residuals: Vec<f64>,
}

impl CorrectedAdjustments {
    pub fn residual(&self, u: usize, k: usize) -> f64 {
        self.residuals[u * self.k + k]
    }
}

/// Per-issue least squares of `z_k` on `x`, without an intercept unless
/// `with_intercept`.
pub fn corrected_adjustments(params: &ModelParams, with_intercept: bool) -> Result<CorrectedAdjustments> {
    let x = &params.x;
    let n = x.len();
    if n < 2 || x.iter().all(|&v| v == x[0]) {
        return Err(Error::Degenerate("corrected adjustments need at least two distinct ideal points".into()));
    }
    let k = params.k;
    let mx = if with_intercept { mean(x) } else { 0.0 };
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let mut beta = vec![0.0; k];
    let mut intercept = vec![0.0; k];
    let mut residuals = vec![0.0; n * k];
    for j in 0..k {
        let col: Vec<f64> = (0..n).map(|u| params.z[u * k + j]).collect();
        let mz = if with_intercept { mean(&col) } else { 0.0 };
        let sxz: f64 = x.iter().zip(&col).map(|(a, b)| (a - mx) * (b - mz)).sum();
        beta[j] = sxz / sxx;
        intercept[j] = mz - beta[j] * mx;
        for u in 0..n {
            residuals[u * k + j] = col[u] - intercept[j] - beta[j] * x[u];
        }
    }
    Ok(CorrectedAdjustments {
        lawmaker_ids: params.lawmaker_ids.clone(),
        k,
        beta,
        intercept,
        residuals,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtremeFlag {
    pub lawmaker_id: String,
    pub issue: usize,
    pub z_hat: f64,
    /// `(1 + #{r : |ẑ⁽ʳ⁾| ≥ |ẑ|}) / (R + 1)`.
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificanceReport {
    pub replications: usize,
    pub observed: CorrectedAdjustments,
    /// Per `(u, k)`, the number of replications the observed `|ẑ|` beats.
    pub exceed_counts: Vec<usize>,
    pub flags: Vec<ExtremeFlag>,
    pub fits: Vec<FitSummary>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub sweeps: usize,
    pub converged: bool,
    pub identified: bool,
}

impl From<&FitResult> for FitSummary {
    fn from(r: &FitResult) -> Self {
        Self {
            sweeps: r.sweeps,
            converged: r.converged,
            identified: r.identified,
        }
    }
}

/// Refits under `R` seeded permutations of the mixtures and flags each
/// `(u, k)` whose `|ẑ_uk|` exceeds its counterpart in every replication.
/// Replication `r` depends only on `(seed, r)`, so increasing `R` can only
/// remove flags.
pub fn permutation_significance(
    ds: &RollCallDataset,
    mixtures: &[IssueMixture],
    hp: &Hyperparams,
    schedule: &UpdateSchedule,
    replications: usize,
    seed: u64,
    with_intercept: bool,
) -> Result<SignificanceReport> {
    if replications < 1 {
        return Err(Error::InvalidArgument("at least one permutation is required".into()));
    }
    let run = |m: &[IssueMixture], rep: usize| -> Result<(CorrectedAdjustments, FitSummary)> {
        let res = fit(ds, Some(m), hp, schedule, rng::derive_seed(seed, &[TAG_FIT, rep as u64]))?;
        Ok((corrected_adjustments(&res.state.to_params(), with_intercept)?, FitSummary::from(&res)))
    };
    let (observed, first) = run(mixtures, 0)?;
    let reps: Vec<Result<(CorrectedAdjustments, FitSummary)>> = {
        let one = |r: usize| {
            let perm = permute_mixtures(mixtures, rng::derive_seed(seed, &[TAG_PERM, r as u64]));
            run(&perm, r + 1)
        };
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            (0..replications).into_par_iter().map(one).collect()
        }
        #[cfg(not(feature = "parallel"))]
        {
            (0..replications).map(one).collect()
        }
    };
    let mut exceed = vec![0usize; observed.residuals.len()];
    let mut fits = vec![first];
    for rep in reps {
        let (c, s) = rep?;
        fits.push(s);
        for (e, (o, p)) in exceed.iter_mut().zip(observed.residuals.iter().zip(&c.residuals)) {
            if o.abs() > p.abs() {
                *e += 1;
            }
        }
    }
    let k = observed.k;
    let flags = exceed
        .iter()
        .enumerate()
        .filter(|(_, &e)| e == replications)
        .map(|(i, &e)| ExtremeFlag {
            lawmaker_id: observed.lawmaker_ids[i / k].clone(),
            issue: i % k,
            z_hat: observed.residuals[i],
            p_value: (1 + replications - e) as f64 / (replications + 1) as f64,
        })
        .collect();
    Ok(SignificanceReport {
        replications,
        observed,
        exceed_counts: exceed,
        flags,
        fits,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscriminantReport {
    /// Weights over `(x_u, z_u1, …, z_uK)`.
    pub weights: Vec<f64>,
    pub projection_correlation: f64,
    pub ideal_point_correlation: f64,
    /// Projections rescaled to the variance of `x`, for the D/R lawmakers.
    pub projections: Vec<(String, f64)>,
    pub baseline_mean: Option<f64>,
    pub baseline_sd: Option<f64>,
}

fn party_rows(params: &ModelParams, lawmakers: &[Lawmaker]) -> Vec<(usize, f64)> {
    let party: HashMap<&str, Party> = lawmakers.iter().map(|l| (l.id.as_str(), l.party)).collect();
    params
        .lawmaker_ids
        .iter()
        .enumerate()
        .filter_map(|(u, id)| match party.get(id.as_str()) {
            Some(Party::Democrat) => Some((u, -1.0)),
            Some(Party::Republican) => Some((u, 1.0)),
            _ => None,
        })
        .collect()
}

fn features(params: &ModelParams, z: &[f64], u: usize) -> Vec<f64> {
    let k = params.k;
    std::iter::once(params.x[u]).chain(z[u * k..(u + 1) * k].iter().copied()).collect()
}

fn discriminant_with(params: &ModelParams, z: &[f64], rows: &[(usize, f64)]) -> Result<DiscriminantReport> {
    let dim = params.k + 1;
    let mut mean_c = [vec![0.0; dim], vec![0.0; dim]];
    let mut count = [0usize; 2];
    let cls = |y: f64| usize::from(y > 0.0);
    for &(u, y) in rows {
        let c = cls(y);
        count[c] += 1;
        for (m, f) in mean_c[c].iter_mut().zip(features(params, z, u)) {
            *m += f;
        }
    }
    if count[0] == 0 || count[1] == 0 {
        return Err(Error::Identification("discriminant needs both Democrats and Republicans".into()));
    }
    for c in 0..2 {
        mean_c[c].iter_mut().for_each(|m| *m /= count[c] as f64);
    }
    let mut scatter = vec![0.0; dim * dim];
    for &(u, y) in rows {
        let w = features(params, z, u);
        let mu = &mean_c[cls(y)];
        for i in 0..dim {
            for j in 0..dim {
                scatter[i * dim + j] += (w[i] - mu[i]) * (w[j] - mu[j]);
            }
        }
    }
    let diff: Vec<f64> = (0..dim).map(|i| mean_c[1][i] - mean_c[0][i]).collect();
    let weights = match solve_spd(&scatter, &diff) {
        Some(w) => w,
        None => {
            for i in 0..dim {
                scatter[i * dim + i] += 1e-8;
            }
            solve_spd(&scatter, &diff).ok_or_else(|| Error::Degenerate("pooled scatter matrix is singular".into()))?
        }
    };
    let raw: Vec<f64> = rows
        .iter()
        .map(|&(u, _)| features(params, z, u).iter().zip(&weights).map(|(a, b)| a * b).sum())
        .collect();
    let xs: Vec<f64> = rows.iter().map(|&(u, _)| params.x[u]).collect();
    let ys: Vec<f64> = rows.iter().map(|&(_, y)| y).collect();
    let vp = variance(&raw);
    let scale = if vp > 0.0 { (variance(&xs) / vp).sqrt() } else { 1.0 };
    let projections = rows
        .iter()
        .zip(&raw)
        .map(|(&(u, _), p)| (params.lawmaker_ids[u].clone(), p * scale))
        .collect();
    Ok(DiscriminantReport {
        weights,
        projection_correlation: pearson(&raw, &ys),
        ideal_point_correlation: pearson(&xs, &ys),
        projections,
        baseline_mean: None,
        baseline_sd: None,
    })
}

/// Fisher two-class discriminant of Democrats against Republicans on
/// `(x_u, z_u)`. Other-party lawmakers are ignored.
pub fn party_discriminant(params: &ModelParams, lawmakers: &[Lawmaker]) -> Result<DiscriminantReport> {
    discriminant_with(params, &params.z, &party_rows(params, lawmakers))
}

/// Discriminant correlation with `z` replaced by Gaussian draws matching
/// each issue's empirical variance. Returns `(mean, sd)` over trials.
pub fn random_adjustment_baseline(params: &ModelParams, lawmakers: &[Lawmaker], trials: usize, seed: u64) -> Result<(f64, f64)> {
    if trials < 2 {
        return Err(Error::InvalidArgument("the random baseline needs at least two trials".into()));
    }
    let k = params.k;
    let n = params.n_lawmakers();
    let sds: Vec<f64> = (0..k)
        .map(|j| variance(&(0..n).map(|u| params.z[u * k + j]).collect::<Vec<_>>()).sqrt())
        .collect();
    let rows = party_rows(params, lawmakers);
    let mut corr = Vec::with_capacity(trials);
    for t in 0..trials {
        let mut r = rng::stream(seed, &[t as u64]);
        let mut z = vec![0.0; n * k];
        for u in 0..n {
            for j in 0..k {
                let e: f64 = r.sample(StandardNormal);
                z[u * k + j] = sds[j] * e;
            }
        }
        corr.push(discriminant_with(params, &z, &rows)?.projection_correlation);
    }
    Ok((mean(&corr), sample_variance(&corr).sqrt()))
}

/// Long-format parallel-plot data: one row per lawmaker and issue.
pub fn write_parallel_plot(
    path: &Path,
    params: &ModelParams,
    lawmakers: &[Lawmaker],
    labels: &[String],
    issues: &[usize],
) -> Result<()> {
    let party: HashMap<&str, Party> = lawmakers.iter().map(|l| (l.id.as_str(), l.party)).collect();
    let mut out = String::from("lawmaker_id,party,issue,x,x_plus_z\n");
    for (u, id) in params.lawmaker_ids.iter().enumerate() {
        let p = party.get(id.as_str()).map_or("", |p| p.code());
        for &j in issues {
            let z = params.z[u * params.k + j];
            out.push_str(&format!("{id},{p},{},{},{}\n", labels[j], params.x[u], params.x[u] + z));
        }
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Histogram counts of corrected adjustments per issue and party over
/// `bins` equal-width bins spanning each issue's range.
pub fn write_histograms(
    path: &Path,
    corrected: &CorrectedAdjustments,
    lawmakers: &[Lawmaker],
    labels: &[String],
    bins: usize,
) -> Result<()> {
    let party: HashMap<&str, Party> = lawmakers.iter().map(|l| (l.id.as_str(), l.party)).collect();
    let mut w = std::io::BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    let res = (|| -> std::io::Result<()> {
        writeln!(w, "issue,party,bin_lo,bin_hi,count")?;
        let n = corrected.lawmaker_ids.len();
        for (j, label) in labels.iter().enumerate().take(corrected.k) {
            let vals: Vec<f64> = (0..n).map(|u| corrected.residual(u, j)).collect();
            let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
            let mut counts: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
            for (u, v) in vals.iter().enumerate() {
                let p = party.get(corrected.lawmaker_ids[u].as_str()).map_or("O", |p| p.code());
                let b = (((v - lo) / width) as usize).min(bins - 1);
                counts.entry(p).or_insert_with(|| vec![0; bins])[b] += 1;
            }
            for (p, c) in counts {
                for (b, n) in c.iter().enumerate() {
                    let a = lo + b as f64 * width;
                    writeln!(w, "{label},{p},{a},{},{n}", a + width)?;
                }
            }
        }
        w.flush()
    })();
    res.map_err(|e| Error::io(path, e))
}
