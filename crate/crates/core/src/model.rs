//! Vote likelihood, priors and the generative process of the issue-adjusted
//! ideal point model.
//!
//! A lawmaker `u` votes Yea on bill `d` with probability
//! `σ((x_u + z_uᵀθ_d)·a_d + b_d)`. With `K = 0` issues (or `z ≡ 0`) this is
//! the classical one-dimensional ideal point model `σ(x_u·a_d + b_d)`.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::corpus::{BillDoc, Chamber, Lawmaker, Party, RollCallDataset, Vote, VoteIndex, VoteRecord};
use crate::error::{Error, Result};
use crate::rng;
use crate::topics::IssueMixture;

/// `exp(s) / (1 + exp(s))`, branching on the sign of `s` so neither side
/// overflows.
pub fn logistic(s: f64) -> f64 {
    if s >= 0.0 {
        1.0 / (1.0 + (-s).exp())
    } else {
        let e = s.exp();
        e / (1.0 + e)
    }
}

/// `ln σ(s)`.
pub fn log_logistic(s: f64) -> f64 {
    if s >= 0.0 {
        -(-s).exp().ln_1p()
    } else {
        s - s.exp().ln_1p()
    }
}

/// Log-probability of an observed vote given its log-odds.
#[inline]
pub fn vote_loglik(yea: bool, log_odds: f64) -> f64 {
    if yea {
        log_logistic(log_odds)
    } else {
        log_logistic(-log_odds)
    }
}

#[inline]
pub fn log_normal(v: f64, var: f64) -> f64 {
    -0.5 * (2.0 * PI * var).ln() - v * v / (2.0 * var)
}

/// Laplace log-density with rate `lambda`: `ln(λ/2) − λ|z|`.
#[inline]
pub fn log_laplace(z: f64, lambda: f64) -> f64 {
    (lambda / 2.0).ln() - lambda * z.abs()
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    /// Rate of the Laplace prior on issue adjustments.
    pub lambda1: f64,
    pub prior_var_x: f64,
    pub prior_var_a: f64,
    pub prior_var_b: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            lambda1: 1.0,
            prior_var_x: 1.0,
            prior_var_a: 1.0,
            prior_var_b: 1.0,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lambda1", self.lambda1),
            ("prior_var_x", self.prior_var_x),
            ("prior_var_a", self.prior_var_a),
            ("prior_var_b", self.prior_var_b),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Point values of every latent variable. `z` is stored row-major,
/// `n_lawmakers × k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub lawmaker_ids: Vec<String>,
    pub bill_ids: Vec<String>,
    pub k: usize,
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl ModelParams {
    pub fn zeros(lawmaker_ids: Vec<String>, bill_ids: Vec<String>, k: usize) -> Self {
        let (nu, nd) = (lawmaker_ids.len(), bill_ids.len());
        Self {
            lawmaker_ids,
            bill_ids,
            k,
            x: vec![0.0; nu],
            z: vec![0.0; nu * k],
            a: vec![0.0; nd],
            b: vec![0.0; nd],
        }
    }

    pub fn for_dataset(ds: &RollCallDataset, k: usize) -> Self {
        Self::zeros(
            ds.lawmakers.iter().map(|l| l.id.clone()).collect(),
            ds.bills.iter().map(|b| b.id.clone()).collect(),
            k,
        )
    }

    pub fn n_lawmakers(&self) -> usize {
        self.x.len()
    }

    pub fn n_bills(&self) -> usize {
        self.a.len()
    }

    pub fn z_row(&self, u: usize) -> &[f64] {
        &self.z[u * self.k..(u + 1) * self.k]
    }

    pub fn z_row_mut(&mut self, u: usize) -> &mut [f64] {
        let k = self.k;
        &mut self.z[u * k..(u + 1) * k]
    }

    pub fn lawmaker_index(&self, id: &str) -> Option<usize> {
        self.lawmaker_ids.iter().position(|l| l == id)
    }

    pub fn bill_index(&self, id: &str) -> Option<usize> {
        self.bill_ids.iter().position(|b| b == id)
    }

    /// Joint negation of `x`, `z` and `a`; `b` is unchanged.
    pub fn negated(&self) -> Self {
        let mut p = self.clone();
        p.x.iter_mut().for_each(|v| *v = -*v);
        p.z.iter_mut().for_each(|v| *v = -*v);
        p.a.iter_mut().for_each(|v| *v = -*v);
        p
    }

    /// Copy with the issue adjustments removed (the classical model).
    pub fn classical(&self) -> Self {
        let mut p = self.clone();
        p.k = 0;
        p.z.clear();
        p
    }

    fn check_theta(&self, theta: Option<&[f64]>) -> Result<()> {
        match theta {
            Some(t) if t.len() != self.k => Err(Error::Dimension {
                expected: self.k,
                got: t.len(),
            }),
            None if self.k != 0 && self.z.iter().any(|&v| v != 0.0) => Err(Error::InvalidArgument(
                "issue mixture required by the issue-adjusted model".into(),
            )),
            _ => Ok(()),
        }
    }

    /// `x_u + z_uᵀθ_d`, or `x_u` when no mixture is given.
    pub fn effective_ideal_point(&self, u: usize, theta: Option<&[f64]>) -> Result<f64> {
        self.check_index(u, 0)?;
        self.check_theta(theta)?;
        Ok(self.effective_unchecked(u, theta))
    }

    #[inline]
    pub(crate) fn effective_unchecked(&self, u: usize, theta: Option<&[f64]>) -> f64 {
        match theta {
            Some(t) if self.k > 0 => self.x[u] + dot(self.z_row(u), t),
            _ => self.x[u],
        }
    }

    #[inline]
    pub(crate) fn log_odds_unchecked(&self, u: usize, d: usize, theta: Option<&[f64]>) -> f64 {
        self.effective_unchecked(u, theta) * self.a[d] + self.b[d]
    }

    pub fn log_odds(&self, u: usize, d: usize, theta: Option<&[f64]>) -> Result<f64> {
        self.check_index(u, d)?;
        self.check_theta(theta)?;
        Ok(self.log_odds_unchecked(u, d, theta))
    }

    /// Probability of a Yea vote.
    pub fn vote_probability(&self, u: usize, d: usize, theta: Option<&[f64]>) -> Result<f64> {
        self.log_odds(u, d, theta).map(logistic)
    }

    /// Position `−b_d / a_d` where the classical prediction flips.
    pub fn cut_point(&self, d: usize) -> Result<f64> {
        self.check_index(0, d)?;
        if self.a[d] == 0.0 {
            return Err(Error::Degenerate(format!("bill {d} has zero polarity")));
        }
        Ok(-self.b[d] / self.a[d])
    }

    fn check_index(&self, u: usize, d: usize) -> Result<()> {
        if u >= self.n_lawmakers() && self.n_lawmakers() > 0 || d >= self.n_bills() && self.n_bills() > 0 {
            return Err(Error::InvalidArgument(format!("index ({u}, {d}) out of range")));
        }
        Ok(())
    }
}

/// Aligns `mixtures` with the bills of `ds`. Returns one θ row per bill;
/// rows are empty when `k == 0`.
pub fn align_mixtures(ds: &RollCallDataset, mixtures: &[IssueMixture], k: usize) -> Result<Vec<Vec<f64>>> {
    if k == 0 {
        return Ok(vec![Vec::new(); ds.n_bills()]);
    }
    let by_id: std::collections::HashMap<&str, &IssueMixture> =
        mixtures.iter().map(|m| (m.bill_id.as_str(), m)).collect();
    ds.bills
        .iter()
        .map(|b| {
            let m = by_id
                .get(b.id.as_str())
                .ok_or_else(|| Error::Integrity(format!("no issue mixture for bill {}", b.id)))?;
            if m.theta.len() != k {
                return Err(Error::Dimension {
                    expected: k,
                    got: m.theta.len(),
                });
            }
            Ok(m.theta.clone())
        })
        .collect()
}

/// Log prior density of all parameters.
pub fn log_prior(params: &ModelParams, hp: &Hyperparams) -> f64 {
    let mut lp = 0.0;
    for &x in &params.x {
        lp += log_normal(x, hp.prior_var_x);
    }
    for &z in &params.z {
        lp += log_laplace(z, hp.lambda1);
    }
    for &a in &params.a {
        lp += log_normal(a, hp.prior_var_a);
    }
    for &b in &params.b {
        lp += log_normal(b, hp.prior_var_b);
    }
    lp
}

/// Log-likelihood of the observed votes, summed in vote order.
pub fn log_likelihood(params: &ModelParams, index: &VoteIndex, thetas: &[Vec<f64>]) -> f64 {
    (0..index.len())
        .map(|i| {
            let d = index.bill[i];
            let s = params.log_odds_unchecked(index.lawmaker[i], d, Some(&thetas[d]));
            vote_loglik(index.yea[i], s)
        })
        .sum()
}

/// Log joint density `log p(v, x, z, a, b | θ)`; missing votes contribute
/// nothing.
pub fn log_joint(
    params: &ModelParams,
    ds: &RollCallDataset,
    mixtures: &[IssueMixture],
    hp: &Hyperparams,
) -> Result<f64> {
    if params.n_lawmakers() != ds.n_lawmakers() || params.n_bills() != ds.n_bills() {
        return Err(Error::Dimension {
            expected: ds.n_lawmakers(),
            got: params.n_lawmakers(),
        });
    }
    let thetas = align_mixtures(ds, mixtures, params.k)?;
    let index = VoteIndex::new(ds);
    Ok(log_likelihood(params, &index, &thetas) + log_prior(params, hp))
}

/// Source of synthetic bill mixtures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MixtureSource {
    /// Symmetric Dirichlet with the given concentration.
    Dirichlet(f64),
    /// A single issue per bill, drawn uniformly.
    OneHot,
}

/// Laplace draw with rate `lambda` by inverting the CDF.
pub fn sample_laplace<R: Rng + ?Sized>(rng: &mut R, lambda: f64) -> f64 {
    let u: f64 = rng.random::<f64>() - 0.5;
    -u.signum() * (1.0 - 2.0 * u.abs()).ln() / lambda
}

#[derive(Debug, Clone)]
pub struct SyntheticTruth {
    pub params: ModelParams,
    pub mixtures: Vec<IssueMixture>,
    pub labels: Vec<String>,
    pub dataset: RollCallDataset,
    pub seed: u64,
}

impl SyntheticTruth {
    /// Redraws every vote from the current `params` and `mixtures`.
    pub fn redraw_votes(&mut self, seed: u64) -> Result<()> {
        self.dataset = draw_votes(
            &self.params,
            &self.mixtures,
            self.dataset.lawmakers.clone(),
            self.dataset.bills.clone(),
            seed,
        )?;
        self.seed = seed;
        Ok(())
    }
}

/// Draws one vote per (lawmaker, bill) pair from the model.
pub fn draw_votes(
    params: &ModelParams,
    mixtures: &[IssueMixture],
    lawmakers: Vec<Lawmaker>,
    bills: Vec<BillDoc>,
    seed: u64,
) -> Result<RollCallDataset> {
    let mut rng = rng::stream(seed, &[0x7075]);
    let mut votes = Vec::with_capacity(params.n_lawmakers() * params.n_bills());
    for (u, l) in lawmakers.iter().enumerate() {
        for (d, b) in bills.iter().enumerate() {
            let theta = (params.k > 0).then(|| mixtures[d].theta.as_slice());
            let p = params.vote_probability(u, d, theta)?;
            let yea = rng.random::<f64>() < p;
            votes.push(VoteRecord {
                lawmaker_id: l.id.clone(),
                bill_id: b.id.clone(),
                vote: if yea { Vote::Yea } else { Vote::Nay },
            });
        }
    }
    RollCallDataset::new(lawmakers, bills, votes)
}

fn sample_dirichlet<R: Rng + ?Sized>(rng: &mut R, k: usize, alpha: f64) -> Vec<f64> {
    if k == 1 {
        return vec![1.0];
    }
    let gamma = Gamma::new(alpha, 1.0).expect("positive concentration");
    let g: Vec<f64> = (0..k).map(|_| gamma.sample(rng)).collect();
    let s: f64 = g.iter().sum();
    if s > 0.0 {
        g.iter().map(|v| v / s).collect()
    } else {
        // every draw underflowed; fall back to the largest-index-free one-hot
        let mut t = vec![0.0; k];
        t[rng.random_range(0..k)] = 1.0;
        t
    }
}

/// Samples parameters, mixtures and a full vote matrix from the generative
/// process. Lawmakers with a positive true ideal point are labelled
/// Republican, the rest Democrat, so sign identification has a reference.
pub fn sample_synthetic(
    n_lawmakers: usize,
    n_bills: usize,
    k: usize,
    hp: &Hyperparams,
    source: MixtureSource,
    seed: u64,
) -> Result<SyntheticTruth> {
    if n_lawmakers == 0 || n_bills == 0 || k == 0 {
        return Err(Error::InvalidArgument("U, D and K must be at least 1".into()));
    }
    hp.validate()?;
    if let MixtureSource::Dirichlet(alpha) = source {
        if !(alpha > 0.0) {
            return Err(Error::InvalidArgument(format!("alpha must be positive, got {alpha}")));
        }
    }
    let mut rng = rng::stream(seed, &[0x5eed]);
    let lawmaker_ids: Vec<String> = (0..n_lawmakers).map(|u| format!("u{u:04}")).collect();
    let bill_ids: Vec<String> = (0..n_bills).map(|d| format!("d{d:04}")).collect();
    let labels: Vec<String> = (0..k).map(|j| format!("issue-{j}")).collect();
    let mut params = ModelParams::zeros(lawmaker_ids.clone(), bill_ids.clone(), k);

    let (sx, sa, sb) = (hp.prior_var_x.sqrt(), hp.prior_var_a.sqrt(), hp.prior_var_b.sqrt());
    for u in 0..n_lawmakers {
        params.x[u] = sx * rng.sample::<f64, _>(StandardNormal);
        for j in 0..k {
            params.z[u * k + j] = sample_laplace(&mut rng, hp.lambda1);
        }
    }
    for d in 0..n_bills {
        params.a[d] = sa * rng.sample::<f64, _>(StandardNormal);
        params.b[d] = sb * rng.sample::<f64, _>(StandardNormal);
    }

    let mut mixtures = Vec::with_capacity(n_bills);
    let mut bills = Vec::with_capacity(n_bills);
    for id in &bill_ids {
        let theta = match source {
            MixtureSource::OneHot => {
                let mut t = vec![0.0; k];
                t[rng.random_range(0..k)] = 1.0;
                t
            }
            MixtureSource::Dirichlet(alpha) => sample_dirichlet(&mut rng, k, alpha),
        };
        let top = theta
            .iter()
            .enumerate()
            .fold(0, |best, (j, &t)| if t > theta[best] { j } else { best });
        bills.push(BillDoc {
            id: id.clone(),
            title: String::new(),
            tokens: Vec::new(),
            labels: BTreeSet::from([labels[top].clone()]),
        });
        mixtures.push(IssueMixture {
            bill_id: id.clone(),
            theta,
        });
    }
    let lawmakers: Vec<Lawmaker> = lawmaker_ids
        .iter()
        .enumerate()
        .map(|(u, id)| Lawmaker {
            id: id.clone(),
            name: format!("Lawmaker {u}"),
            party: if params.x[u] > 0.0 { Party::Republican } else { Party::Democrat },
            chamber: Chamber::Senate,
        })
        .collect();
    let dataset = draw_votes(&params, &mixtures, lawmakers, bills, seed)?;
    Ok(SyntheticTruth {
        params,
        mixtures,
        labels,
        dataset,
        seed,
    })
}

/// On-disk form of fitted parameters. `z` is written as sparse
/// `(lawmaker, issue, value)` triplets and omitted for the classical model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsFile {
    pub k: usize,
    pub labels: Vec<String>,
    pub lawmaker_ids: Vec<String>,
    pub bill_ids: Vec<String>,
    pub x: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z: Option<Vec<(usize, usize, f64)>>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub hyperparams: Hyperparams,
}

impl ParamsFile {
    pub fn from_params(params: &ModelParams, labels: &[String], hp: &Hyperparams) -> Self {
        let z = (params.k > 0).then(|| {
            let mut t = Vec::new();
            for u in 0..params.n_lawmakers() {
                for (j, &v) in params.z_row(u).iter().enumerate() {
                    if v != 0.0 {
                        t.push((u, j, v));
                    }
                }
            }
            t
        });
        Self {
            k: params.k,
            labels: labels.to_vec(),
            lawmaker_ids: params.lawmaker_ids.clone(),
            bill_ids: params.bill_ids.clone(),
            x: params.x.clone(),
            z,
            a: params.a.clone(),
            b: params.b.clone(),
            hyperparams: *hp,
        }
    }

    pub fn to_params(&self) -> Result<ModelParams> {
        let mut p = ModelParams::zeros(self.lawmaker_ids.clone(), self.bill_ids.clone(), self.k);
        if self.x.len() != p.n_lawmakers() || self.a.len() != p.n_bills() || self.b.len() != p.n_bills() {
            return Err(Error::Integrity("parameter vectors do not match id lists".into()));
        }
        p.x.clone_from(&self.x);
        p.a.clone_from(&self.a);
        p.b.clone_from(&self.b);
        for &(u, j, v) in self.z.iter().flatten() {
            if u >= p.n_lawmakers() || j >= self.k {
                return Err(Error::Integrity(format!("z entry ({u}, {j}) out of range")));
            }
            p.z[u * self.k + j] = v;
        }
        Ok(p)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let s = serde_json::to_string_pretty(self).map_err(|e| Error::json(path, e))?;
        std::fs::write(path, s + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&s).map_err(|e| Error::json(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn one_by_one(x: f64, z: f64, a: f64, b: f64) -> ModelParams {
        let mut p = ModelParams::zeros(vec!["u".into()], vec!["d".into()], 1);
        p.x[0] = x;
        p.z[0] = z;
        p.a[0] = a;
        p.b[0] = b;
        p
    }

    #[test]
    fn logistic_values() {
        assert_eq!(logistic(0.0), 0.5);
        // 1/(1+e^-2) to 16 digits
        assert_relative_eq!(logistic(2.0), 0.880_797_077_977_882_3, epsilon = 1e-15);
        for s in [-30.0, -2.5, 0.3, 11.0] {
            assert_relative_eq!(logistic(s) + logistic(-s), 1.0, epsilon = 1e-15);
        }
        assert!(logistic(-800.0) >= 0.0 && logistic(800.0) <= 1.0);
    }

    #[test]
    fn log_logistic_is_exact_in_the_tails() {
        assert_relative_eq!(log_logistic(-700.0), -700.0, max_relative = 1e-15);
        assert_relative_eq!(log_logistic(700.0), -(-700.0f64).exp(), max_relative = 1e-12);
        assert_relative_eq!(log_logistic(0.0), -(2.0f64).ln(), epsilon = 1e-15);
    }

    #[test]
    fn vote_probability_direct_evaluation() {
        let p = one_by_one(1.0, 0.5, 2.0, -1.0);
        // (1 + 0.5) * 2 - 1 = 2
        assert_relative_eq!(
            p.vote_probability(0, 0, Some(&[1.0])).unwrap(),
            0.880_797_077_977_882_3,
            epsilon = 1e-15
        );
        let zero = one_by_one(0.0, 0.0, 0.0, 0.0);
        assert_eq!(zero.vote_probability(0, 0, Some(&[1.0])).unwrap(), 0.5);
        assert!(matches!(
            p.vote_probability(0, 0, Some(&[0.5, 0.5])),
            Err(Error::Dimension { expected: 1, got: 2 })
        ));
    }

    #[test]
    fn effective_ideal_point_cases() {
        let mut p = ModelParams::zeros(vec!["u".into()], vec!["d".into()], 3);
        p.x[0] = 0.4;
        p.z.copy_from_slice(&[1.0, -2.0, 4.0]);
        assert_relative_eq!(p.effective_ideal_point(0, Some(&[0.0, 1.0, 0.0])).unwrap(), -1.6);
        let uniform = [1.0 / 3.0; 3];
        assert_relative_eq!(p.effective_ideal_point(0, Some(&uniform)).unwrap(), 0.4 + 1.0, epsilon = 1e-12);
        p.z.fill(0.0);
        assert_eq!(p.effective_ideal_point(0, Some(&uniform)).unwrap(), 0.4);
    }

    #[test]
    fn cut_point_requires_polarity() {
        let p = one_by_one(0.0, 0.0, 2.0, 1.0);
        assert_eq!(p.cut_point(0).unwrap(), -0.5);
        assert!(one_by_one(0.0, 0.0, 0.0, 1.0).cut_point(0).is_err());
    }

    #[test]
    fn laplace_sampling_shrinks_with_rate() {
        let mut rng = rng::stream(3, &[]);
        let mean_abs =
            |lambda: f64, rng: &mut rng::StreamRng| (0..4000).map(|_| sample_laplace(rng, lambda).abs()).sum::<f64>() / 4000.0;
        let m1 = mean_abs(1.0, &mut rng);
        let m1000 = mean_abs(1000.0, &mut rng);
        // E|z| = 1/λ
        assert!((m1 - 1.0).abs() < 0.08, "{m1}");
        assert!(m1000 < 2e-3, "{m1000}");
    }

    #[test]
    fn one_hot_single_issue() {
        let t = sample_synthetic(3, 4, 1, &Hyperparams::default(), MixtureSource::OneHot, 1).unwrap();
        assert!(t.mixtures.iter().all(|m| m.theta == vec![1.0]));
        assert_eq!(t.dataset.n_votes(), 12);
    }

    #[test]
    fn synthetic_is_deterministic() {
        let hp = Hyperparams::default();
        let a = sample_synthetic(5, 6, 2, &hp, MixtureSource::Dirichlet(0.5), 9).unwrap();
        let b = sample_synthetic(5, 6, 2, &hp, MixtureSource::Dirichlet(0.5), 9).unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(a.dataset, b.dataset);
    }

    #[test]
    fn yea_rate_at_zero_params_is_half() {
        let hp = Hyperparams::default();
        let mut t = sample_synthetic(1000, 1, 1, &hp, MixtureSource::OneHot, 4).unwrap();
        t.params.x.fill(0.0);
        t.params.z.fill(0.0);
        t.params.a.fill(0.0);
        t.params.b.fill(0.0);
        t.redraw_votes(5).unwrap();
        let yeas = t.dataset.votes.iter().filter(|v| v.vote.is_yea()).count() as f64;
        let n = 1000.0;
        let se = (0.25f64 / n).sqrt();
        assert!((yeas / n - 0.5).abs() < 3.0 * se, "{}", yeas / n);
    }

    #[test]
    fn log_joint_at_mode() {
        let p = one_by_one(0.0, 0.0, 0.0, 0.0);
        let hp = Hyperparams::default();
        let t = sample_synthetic(1, 1, 1, &hp, MixtureSource::OneHot, 2).unwrap();
        let lj = log_joint(&p, &t.dataset, &t.mixtures, &hp).unwrap();
        let gauss0 = -0.5 * (2.0 * PI).ln();
        assert_relative_eq!(lj, 0.5f64.ln() + 3.0 * gauss0 + (0.5f64).ln(), epsilon = 1e-12);
    }

    #[test]
    fn params_file_round_trip() {
        let hp = Hyperparams::default();
        let t = sample_synthetic(4, 3, 2, &hp, MixtureSource::Dirichlet(1.0), 3).unwrap();
        let f = ParamsFile::from_params(&t.params, &t.labels, &hp);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.json");
        f.write(&path).unwrap();
        let back = ParamsFile::read(&path).unwrap();
        assert_eq!(back, f);
        assert_eq!(back.to_params().unwrap(), t.params);
        let classic = ParamsFile::from_params(&t.params.classical(), &[], &hp);
        assert!(classic.z.is_none());
        let s = serde_json::to_string(&classic).unwrap();
        assert!(!s.contains("\"z\""));
    }
}
