//! Mean-field variational inference with score-function Monte Carlo.
//!
//! Every latent variable has a Gaussian variational factor with fixed
//! variance. Each block update draws quasi-Monte-Carlo samples from the
//! factors of the target's Markov blanket, estimates the first two Taylor
//! coefficients of the ELBO in the target's mean from the log-density
//! ratio, and takes a clamped Newton step.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::corpus::{Lawmaker, Party, RollCallDataset, VoteIndex};
use crate::error::{Error, Result};
use crate::linalg::solve_spd;
use crate::model::{align_mixtures, log_laplace, log_normal, vote_loglik, Hyperparams, ModelParams};
use crate::rng;
use crate::topics::IssueMixture;

/// `exp(-5)`, the default variance of every variational factor.
pub const DEFAULT_VARIANCE: f64 = 0.006_737_946_999_085_467;

const PD_EPS: f64 = 1e-12;

const TAG_INIT: u64 = 0x1417;
const TAG_LAWMAKER: u64 = 0x1a;
const TAG_BILL: u64 = 0xb1;
const TAG_ELBO: u64 = 0xe7b0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Variances {
    pub x: f64,
    pub z: f64,
    pub a: f64,
    pub b: f64,
}

impl Default for Variances {
    fn default() -> Self {
        Self {
            x: DEFAULT_VARIANCE,
            z: DEFAULT_VARIANCE,
            a: DEFAULT_VARIANCE,
            b: DEFAULT_VARIANCE,
        }
    }
}

impl Variances {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("var_x", self.x), ("var_z", self.z), ("var_a", self.a), ("var_b", self.b)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Means of the variational factors; `mean_z` is row-major `U × K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariationalState {
    pub lawmaker_ids: Vec<String>,
    pub bill_ids: Vec<String>,
    pub k: usize,
    pub mean_x: Vec<f64>,
    pub mean_z: Vec<f64>,
    pub mean_a: Vec<f64>,
    pub mean_b: Vec<f64>,
    pub var: Variances,
}

impl VariationalState {
    pub fn zeros(ds: &RollCallDataset, k: usize, var: Variances) -> Self {
        Self::from_params(&ModelParams::for_dataset(ds, k), var)
    }

    pub fn from_params(p: &ModelParams, var: Variances) -> Self {
        Self {
            lawmaker_ids: p.lawmaker_ids.clone(),
            bill_ids: p.bill_ids.clone(),
            k: p.k,
            mean_x: p.x.clone(),
            mean_z: p.z.clone(),
            mean_a: p.a.clone(),
            mean_b: p.b.clone(),
            var,
        }
    }

    /// The variational means as point estimates.
    pub fn to_params(&self) -> ModelParams {
        ModelParams {
            lawmaker_ids: self.lawmaker_ids.clone(),
            bill_ids: self.bill_ids.clone(),
            k: self.k,
            x: self.mean_x.clone(),
            z: self.mean_z.clone(),
            a: self.mean_a.clone(),
            b: self.mean_b.clone(),
        }
    }

    pub fn n_lawmakers(&self) -> usize {
        self.mean_x.len()
    }

    pub fn n_bills(&self) -> usize {
        self.mean_a.len()
    }

    pub fn z_row(&self, u: usize) -> &[f64] {
        &self.mean_z[u * self.k..(u + 1) * self.k]
    }

    pub fn negated(&self) -> Self {
        let mut s = self.clone();
        s.mean_x.iter_mut().for_each(|v| *v = -*v);
        s.mean_z.iter_mut().for_each(|v| *v = -*v);
        s.mean_a.iter_mut().for_each(|v| *v = -*v);
        s
    }

    fn check(&self, index: &VoteIndex, thetas: &[Vec<f64>]) -> Result<()> {
        if self.n_lawmakers() != index.by_lawmaker.len() || self.n_bills() != index.by_bill.len() {
            return Err(Error::Dimension {
                expected: index.by_lawmaker.len(),
                got: self.n_lawmakers(),
            });
        }
        if self.mean_z.len() != self.n_lawmakers() * self.k {
            return Err(Error::Dimension {
                expected: self.n_lawmakers() * self.k,
                got: self.mean_z.len(),
            });
        }
        if thetas.len() != self.n_bills() {
            return Err(Error::Dimension {
                expected: self.n_bills(),
                got: thetas.len(),
            });
        }
        if let Some(t) = thetas.iter().find(|t| t.len() != self.k) {
            return Err(Error::Dimension {
                expected: self.k,
                got: t.len(),
            });
        }
        self.var.validate()
    }
}

/// The unit of one coordinate update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Target {
    X(usize),
    /// The whole issue-adjustment row of a lawmaker.
    Z(usize),
    A(usize),
    B(usize),
}

/// A single scalar latent variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Latent {
    X(usize),
    Z(usize, usize),
    A(usize),
    B(usize),
}

impl Latent {
    fn stream_path(self, k: usize) -> [u64; 2] {
        match self {
            Latent::X(u) => [0, u as u64],
            Latent::Z(u, j) => [1, (u * k + j) as u64],
            Latent::A(d) => [2, d as u64],
            Latent::B(d) => [3, d as u64],
        }
    }

    fn moments(self, state: &VariationalState) -> (f64, f64) {
        match self {
            Latent::X(u) => (state.mean_x[u], state.var.x),
            Latent::Z(u, j) => (state.mean_z[u * state.k + j], state.var.z),
            Latent::A(d) => (state.mean_a[d], state.var.a),
            Latent::B(d) => (state.mean_b[d], state.var.b),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sampling {
    /// Inverse-CDF midpoint grid, permuted per variable.
    Qmc,
    /// Independent Gaussian draws.
    Iid,
}

/// Joint samples of a Markov blanket. `samples[v][m]` is sample `m` of
/// `latents[v]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    pub m: usize,
    pub qmc: bool,
    pub latents: Vec<Latent>,
    pub samples: Vec<Vec<f64>>,
}

impl SampleBatch {
    pub fn get(&self, latent: Latent) -> Option<&[f64]> {
        self.latents
            .iter()
            .position(|&l| l == latent)
            .map(|i| self.samples[i].as_slice())
    }
}

/// `Φ⁻¹((i − 0.5)/M)` for `i = 1..=M`, mirrored so the grid is exactly
/// antisymmetric.
pub fn standard_grid(m: usize) -> Vec<f64> {
    let normal = Normal::standard();
    let mut g = vec![0.0; m];
    for i in 0..m / 2 {
        let v = normal.inverse_cdf((i as f64 + 0.5) / m as f64);
        g[i] = v;
        g[m - 1 - i] = -v;
    }
    g
}

fn shuffled_grid(grid: &[f64], mean: f64, var: f64, seed: u64, path: &[u64]) -> Vec<f64> {
    let sd = var.sqrt();
    let mut s: Vec<f64> = grid.iter().map(|g| mean + sd * g).collect();
    s.shuffle(&mut rng::stream(seed, path));
    s
}

fn iid_draws(m: usize, mean: f64, var: f64, seed: u64, path: &[u64]) -> Vec<f64> {
    let sd = var.sqrt();
    let mut r = rng::stream(seed, path);
    (0..m).map(|_| mean + sd * r.sample::<f64, _>(StandardNormal)).collect()
}

/// Quasi-Monte-Carlo samples of `N(mean, var)` in seeded random order.
pub fn qmc_marginal_samples(mean: f64, var: f64, m: usize, seed: u64) -> Result<Vec<f64>> {
    if m < 1 {
        return Err(Error::InvalidArgument("sample count must be at least 1".into()));
    }
    if !(var > 0.0) {
        return Err(Error::InvalidArgument(format!("variance must be positive, got {var}")));
    }
    Ok(shuffled_grid(&standard_grid(m), mean, var, seed, &[]))
}

/// The target's own variables followed by every latent sharing a vote with
/// it, in vote order.
pub fn blanket(target: Target, index: &VoteIndex, k: usize) -> Vec<Latent> {
    let mut out = Vec::new();
    match target {
        Target::X(u) | Target::Z(u) => {
            out.push(Latent::X(u));
            out.extend((0..k).map(|j| Latent::Z(u, j)));
            for &i in &index.by_lawmaker[u] {
                let d = index.bill[i];
                out.push(Latent::A(d));
                out.push(Latent::B(d));
            }
        }
        Target::A(d) | Target::B(d) => {
            out.push(Latent::A(d));
            out.push(Latent::B(d));
            for &i in &index.by_bill[d] {
                let u = index.lawmaker[i];
                out.push(Latent::X(u));
                out.extend((0..k).map(|j| Latent::Z(u, j)));
            }
        }
    }
    out
}

fn draw_batch(
    state: &VariationalState,
    latents: Vec<Latent>,
    m: usize,
    seed: u64,
    sampling: Sampling,
    grid: &[f64],
) -> SampleBatch {
    let samples = latents
        .iter()
        .map(|l| {
            let (mean, var) = l.moments(state);
            let path = l.stream_path(state.k);
            match sampling {
                Sampling::Qmc => shuffled_grid(grid, mean, var, seed, &path),
                Sampling::Iid => iid_draws(m, mean, var, seed, &path),
            }
        })
        .collect();
    SampleBatch {
        m,
        qmc: sampling == Sampling::Qmc,
        latents,
        samples,
    }
}

/// Draws `m` joint samples of the target's Markov blanket.
pub fn blanket_samples(
    state: &VariationalState,
    target: Target,
    index: &VoteIndex,
    m: usize,
    seed: u64,
    sampling: Sampling,
) -> Result<SampleBatch> {
    if m < 1 {
        return Err(Error::InvalidArgument("sample count must be at least 1".into()));
    }
    let grid = standard_grid(m);
    Ok(draw_batch(state, blanket(target, index, state.k), m, seed, sampling, &grid))
}

/// First and second derivatives of `log N(s; mean, var)` in the mean.
pub fn score_gradient_terms(s: f64, mean: f64, var: f64) -> (f64, f64) {
    ((s - mean) / var, -1.0 / var)
}

/// Blanket-local `log p − log q` for every sample of a batch laid out by
/// [`blanket`]. Only factors involving the target enter `log p`, and only
/// the target's own factor enters `log q`.
pub fn local_log_ratio(
    state: &VariationalState,
    target: Target,
    batch: &SampleBatch,
    index: &VoteIndex,
    thetas: &[Vec<f64>],
    hp: &Hyperparams,
) -> Vec<f64> {
    let k = state.k;
    let s = &batch.samples;
    (0..batch.m)
        .map(|m| match target {
            Target::X(u) | Target::Z(u) => {
                let x = s[0][m];
                let mut f = 0.0;
                for (r, &i) in index.by_lawmaker[u].iter().enumerate() {
                    let th = &thetas[index.bill[i]];
                    let mut eff = x;
                    for j in 0..k {
                        eff += s[1 + j][m] * th[j];
                    }
                    let a = s[1 + k + 2 * r][m];
                    let b = s[2 + k + 2 * r][m];
                    f += vote_loglik(index.yea[i], eff * a + b);
                }
                if let Target::X(_) = target {
                    f += log_normal(x, hp.prior_var_x) - log_normal(x - state.mean_x[u], state.var.x);
                } else {
                    let mz = state.z_row(u);
                    for j in 0..k {
                        let z = s[1 + j][m];
                        f += log_laplace(z, hp.lambda1) - log_normal(z - mz[j], state.var.z);
                    }
                }
                f
            }
            Target::A(d) | Target::B(d) => {
                let a = s[0][m];
                let b = s[1][m];
                let th = &thetas[d];
                let mut f = 0.0;
                for (r, &i) in index.by_bill[d].iter().enumerate() {
                    let base = 2 + r * (1 + k);
                    let mut eff = s[base][m];
                    for j in 0..k {
                        eff += s[base + 1 + j][m] * th[j];
                    }
                    f += vote_loglik(index.yea[i], eff * a + b);
                }
                f + match target {
                    Target::A(_) => log_normal(a, hp.prior_var_a) - log_normal(a - state.mean_a[d], state.var.a),
                    _ => log_normal(b, hp.prior_var_b) - log_normal(b - state.mean_b[d], state.var.b),
                }
            }
        })
        .collect()
}

/// Batch mean of the log ratio.
pub fn control_constant_of(f: &[f64]) -> f64 {
    f.iter().sum::<f64>() / f.len() as f64
}

/// Control constant `C` of one block update: the batch mean of the
/// blanket-local `log p − log q`.
pub fn control_constant(
    state: &VariationalState,
    target: Target,
    batch: &SampleBatch,
    index: &VoteIndex,
    thetas: &[Vec<f64>],
    hp: &Hyperparams,
) -> f64 {
    control_constant_of(&local_log_ratio(state, target, batch, index, thetas, hp))
}

/// Estimated gradient and Hessian (row-major) of the ELBO in a block mean.
#[derive(Debug, Clone, PartialEq)]
pub struct TaylorCoefficients {
    pub gradient: Vec<f64>,
    pub hessian: Vec<f64>,
}

impl TaylorCoefficients {
    pub fn dim(&self) -> usize {
        self.gradient.len()
    }
}

/// Score-function estimates from per-dimension scores `scores[j][m]`,
/// second score derivatives `score_slope[j]`, log ratios `f[m]` and the
/// control constant `c`.
pub fn taylor_from_scores(scores: &[Vec<f64>], score_slope: &[f64], f: &[f64], c: f64) -> TaylorCoefficients {
    let n = scores.len();
    let m = f.len() as f64;
    let resid: Vec<f64> = f.iter().map(|v| v - c).collect();
    let resid_mean = resid.iter().sum::<f64>() / m;
    let gradient: Vec<f64> = scores
        .iter()
        .map(|s| s.iter().zip(&resid).map(|(a, r)| a * r).sum::<f64>() / m)
        .collect();
    let mut hessian = vec![0.0; n * n];
    for j in 0..n {
        for l in j..n {
            let v = scores[j]
                .iter()
                .zip(&scores[l])
                .zip(&resid)
                .map(|((a, b), r)| a * b * (r - 1.0))
                .sum::<f64>()
                / m;
            hessian[j * n + l] = v;
            hessian[l * n + j] = v;
        }
        hessian[j * n + j] += score_slope[j] * resid_mean;
    }
    TaylorCoefficients { gradient, hessian }
}

/// Monte-Carlo Taylor coefficients of the ELBO for one block at the current
/// state. Scalar targets give 1×1 coefficients, a `Z` target gives `K×K`.
pub fn mc_taylor_coefficients(
    state: &VariationalState,
    target: Target,
    batch: &SampleBatch,
    index: &VoteIndex,
    thetas: &[Vec<f64>],
    hp: &Hyperparams,
) -> TaylorCoefficients {
    let f = local_log_ratio(state, target, batch, index, thetas, hp);
    let c = control_constant_of(&f);
    let score = |samples: &[f64], mean: f64, var: f64| -> Vec<f64> {
        samples.iter().map(|&s| score_gradient_terms(s, mean, var).0).collect()
    };
    let (scores, slopes): (Vec<Vec<f64>>, Vec<f64>) = match target {
        Target::X(u) => (vec![score(&batch.samples[0], state.mean_x[u], state.var.x)], vec![-1.0 / state.var.x]),
        Target::Z(u) => (
            (0..state.k)
                .map(|j| score(&batch.samples[1 + j], state.z_row(u)[j], state.var.z))
                .collect(),
            vec![-1.0 / state.var.z; state.k],
        ),
        Target::A(d) => (vec![score(&batch.samples[0], state.mean_a[d], state.var.a)], vec![-1.0 / state.var.a]),
        Target::B(d) => (vec![score(&batch.samples[1], state.mean_b[d], state.var.b)], vec![-1.0 / state.var.b]),
    };
    taylor_from_scores(&scores, &slopes, &f, c)
}

/// Clamped Newton ascent step `−H⁻¹g`, or `None` when `−H` is not
/// positive definite.
pub fn newton_step(coeffs: &TaylorCoefficients, step_cap: f64) -> Option<Vec<f64>> {
    let n = coeffs.dim();
    let step = if n == 1 {
        let neg_h = -coeffs.hessian[0];
        if !(neg_h > PD_EPS) {
            return None;
        }
        vec![coeffs.gradient[0] / neg_h]
    } else {
        let neg_h: Vec<f64> = coeffs.hessian.iter().map(|v| -v).collect();
        solve_spd(&neg_h, &coeffs.gradient)?
    };
    if step.iter().any(|s| !s.is_finite()) {
        return None;
    }
    Some(step.into_iter().map(|s| s.clamp(-step_cap, step_cap)).collect())
}

fn block_means_mut(state: &mut VariationalState, target: Target) -> &mut [f64] {
    match target {
        Target::X(u) => std::slice::from_mut(&mut state.mean_x[u]),
        Target::Z(u) => {
            let k = state.k;
            &mut state.mean_z[u * k..(u + 1) * k]
        }
        Target::A(d) => std::slice::from_mut(&mut state.mean_a[d]),
        Target::B(d) => std::slice::from_mut(&mut state.mean_b[d]),
    }
}

/// Applies one Newton step to the target's means. Returns `false`, leaving
/// the state unchanged, when the Hessian check fails.
pub fn newton_update(
    state: &mut VariationalState,
    target: Target,
    coeffs: &TaylorCoefficients,
    schedule: &UpdateSchedule,
) -> bool {
    match newton_step(coeffs, schedule.step_cap) {
        Some(step) => {
            for (m, s) in block_means_mut(state, target).iter_mut().zip(step) {
                *m += s;
            }
            true
        }
        None => false,
    }
}

/// Monte-Carlo ELBO over full-model joint samples.
pub fn estimate_elbo(
    state: &VariationalState,
    index: &VoteIndex,
    thetas: &[Vec<f64>],
    hp: &Hyperparams,
    m: usize,
    seed: u64,
) -> Result<f64> {
    if m < 1 {
        return Err(Error::InvalidArgument("sample count must be at least 1".into()));
    }
    state.check(index, thetas)?;
    Ok(elbo_with_grid(state, index, thetas, hp, &standard_grid(m), seed, Sampling::Qmc))
}

/// Like [`estimate_elbo`] but with a choice of sampling scheme.
pub fn estimate_elbo_with(
    state: &VariationalState,
    index: &VoteIndex,
    thetas: &[Vec<f64>],
    hp: &Hyperparams,
    m: usize,
    seed: u64,
    sampling: Sampling,
) -> Result<f64> {
    if m < 1 {
        return Err(Error::InvalidArgument("sample count must be at least 1".into()));
    }
    state.check(index, thetas)?;
    Ok(elbo_with_grid(state, index, thetas, hp, &standard_grid(m), seed, sampling))
}

fn elbo_with_grid(
    state: &VariationalState,
    index: &VoteIndex,
    thetas: &[Vec<f64>],
    hp: &Hyperparams,
    grid: &[f64],
    seed: u64,
    sampling: Sampling,
) -> f64 {
    let m = grid.len();
    let k = state.k;
    let draw = |l: Latent| {
        let (mean, var) = l.moments(state);
        let path = l.stream_path(k);
        match sampling {
            Sampling::Qmc => shuffled_grid(grid, mean, var, seed, &path),
            Sampling::Iid => iid_draws(m, mean, var, seed, &path),
        }
    };
    // per-sample accumulator of log p − log q for a set of variables
    let factor = |acc: &mut [f64], s: &[f64], mean: f64, var: f64, log_prior: &dyn Fn(f64) -> f64| {
        for (a, &v) in acc.iter_mut().zip(s) {
            *a += log_prior(v) - log_normal(v - mean, var);
        }
    };

    let bill_samples: Vec<(Vec<f64>, Vec<f64>)> = (0..state.n_bills())
        .map(|d| (draw(Latent::A(d)), draw(Latent::B(d))))
        .collect();
    let mut total = vec![0.0; m];
    for (d, (sa, sb)) in bill_samples.iter().enumerate() {
        factor(&mut total, sa, state.mean_a[d], state.var.a, &|v| log_normal(v, hp.prior_var_a));
        factor(&mut total, sb, state.mean_b[d], state.var.b, &|v| log_normal(v, hp.prior_var_b));
    }

    let per_lawmaker = |u: usize| -> Vec<f64> {
        let mut acc = vec![0.0; m];
        let sx = draw(Latent::X(u));
        factor(&mut acc, &sx, state.mean_x[u], state.var.x, &|v| log_normal(v, hp.prior_var_x));
        let sz: Vec<Vec<f64>> = (0..k).map(|j| draw(Latent::Z(u, j))).collect();
        for (j, s) in sz.iter().enumerate() {
            factor(&mut acc, s, state.mean_z[u * k + j], state.var.z, &|v| log_laplace(v, hp.lambda1));
        }
        for &i in &index.by_lawmaker[u] {
            let d = index.bill[i];
            let th = &thetas[d];
            let (sa, sb) = &bill_samples[d];
            for mm in 0..m {
                let mut eff = sx[mm];
                for j in 0..k {
                    eff += sz[j][mm] * th[j];
                }
                acc[mm] += vote_loglik(index.yea[i], eff * sa[mm] + sb[mm]);
            }
        }
        acc
    };
    let parts: Vec<Vec<f64>> = {
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            (0..state.n_lawmakers()).into_par_iter().map(per_lawmaker).collect()
        }
        #[cfg(not(feature = "parallel"))]
        {
            (0..state.n_lawmakers()).map(per_lawmaker).collect()
        }
    };
    for p in parts {
        for (t, v) in total.iter_mut().zip(p) {
            *t += v;
        }
    }
    total.iter().sum::<f64>() / m as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpdateSchedule {
    pub m_init: usize,
    pub m_growth: f64,
    pub m_max: usize,
    pub ema_decay: f64,
    pub ema_threshold: f64,
    pub step_cap: f64,
    pub max_sweeps: usize,
    /// Samples used for the per-sweep ELBO estimate.
    pub elbo_samples: usize,
}

impl Default for UpdateSchedule {
    fn default() -> Self {
        Self {
            m_init: 21,
            m_growth: 1.2,
            m_max: 500,
            ema_decay: 0.8,
            ema_threshold: 1.0,
            step_cap: 0.1,
            max_sweeps: 500,
            elbo_samples: 500,
        }
    }
}

impl UpdateSchedule {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.into()));
        if self.m_init < 1 || self.m_init > self.m_max {
            return bad("m_init must satisfy 1 ≤ m_init ≤ m_max");
        }
        if !(self.m_growth > 1.0) {
            return bad("m_growth must exceed 1");
        }
        if !(self.ema_decay > 0.0 && self.ema_decay < 1.0) {
            return bad("ema_decay must lie in (0, 1)");
        }
        if !(self.ema_threshold > 0.0) || !(self.step_cap > 0.0) {
            return bad("ema_threshold and step_cap must be positive");
        }
        if self.elbo_samples < 1 {
            return bad("elbo_samples must be at least 1");
        }
        Ok(())
    }

    /// Next sample count after growth, capped at `m_max`.
    pub fn grow(&self, m: usize) -> usize {
        ((m as f64 * self.m_growth).ceil() as usize).clamp(m + 1, self.m_max)
    }
}

/// Resumable fitting state, written after sweeps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub state: VariationalState,
    pub sweeps: usize,
    pub m: usize,
    pub ema: Option<f64>,
    pub prev_elbo: f64,
    pub elbo_trace: Vec<f64>,
    pub skipped_updates: u64,
    pub seed: u64,
}

impl Checkpoint {
    pub fn write(&self, path: &std::path::Path) -> Result<()> {
        let s = serde_json::to_string(self).map_err(|e| Error::json(path, e))?;
        std::fs::write(path, s).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &std::path::Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&s).map_err(|e| Error::json(path, e))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub state: VariationalState,
    pub elbo_trace: Vec<f64>,
    pub sweeps: usize,
    /// Whether the sign convention (Republicans positive) was applied.
    pub identified: bool,
    /// False when `max_sweeps` was reached before convergence.
    pub converged: bool,
    pub final_m: usize,
    /// Block updates skipped because `−H` was not positive definite.
    pub skipped_updates: u64,
}

/// Called with a checkpoint after every sweep.
pub type SweepHook<'a> = dyn FnMut(&Checkpoint) -> Result<()> + 'a;

/// Optional controls for [`fit_with`].
#[derive(Default)]
pub struct FitControl<'a> {
    pub variances: Variances,
    pub resume: Option<Checkpoint>,
    /// Return a checkpoint after this many total sweeps.
    pub stop_after_sweeps: Option<usize>,
    pub on_sweep: Option<&'a mut SweepHook<'a>>,
    /// Run block updates on the rayon pool. Results are identical to serial
    /// execution.
    pub parallel: bool,
}

pub enum FitOutcome {
    Finished(FitResult),
    Stopped(Checkpoint),
}

/// Seeded starting point: `x` drawn from `N(0, 1)`, everything else zero.
pub fn initial_state(ds: &RollCallDataset, k: usize, var: Variances, seed: u64) -> VariationalState {
    let mut s = VariationalState::zeros(ds, k, var);
    let mut r = rng::stream(seed, &[TAG_INIT]);
    for x in &mut s.mean_x {
        *x = r.sample(StandardNormal);
    }
    s
}

fn issue_dim(mixtures: Option<&[IssueMixture]>) -> usize {
    mixtures.and_then(|m| m.first()).map_or(0, |m| m.theta.len())
}

/// Fits the model. `mixtures = None` gives the classical model.
pub fn fit(
    ds: &RollCallDataset,
    mixtures: Option<&[IssueMixture]>,
    hp: &Hyperparams,
    schedule: &UpdateSchedule,
    seed: u64,
) -> Result<FitResult> {
    match fit_with(ds, mixtures, hp, schedule, seed, FitControl::default())? {
        FitOutcome::Finished(r) => Ok(r),
        FitOutcome::Stopped(_) => unreachable!("no stop requested"),
    }
}

struct Sweeper<'a> {
    index: &'a VoteIndex,
    thetas: &'a [Vec<f64>],
    hp: &'a Hyperparams,
    schedule: &'a UpdateSchedule,
    parallel: bool,
}

impl Sweeper<'_> {
    /// Updates `targets` in order on a private copy of `state`, returning
    /// the touched means and the number of skipped updates.
    fn run_block(&self, state: &VariationalState, targets: &[Target], grid: &[f64], seed: u64) -> (Vec<Vec<f64>>, u64) {
        let mut local = state.clone();
        let mut skips = 0;
        for (t_i, &t) in targets.iter().enumerate() {
            let latents = blanket(t, self.index, state.k);
            let batch = draw_batch(&local, latents, grid.len(), rng::derive_seed(seed, &[t_i as u64]), Sampling::Qmc, grid);
            let coeffs = mc_taylor_coefficients(&local, t, &batch, self.index, self.thetas, self.hp);
            if !newton_update(&mut local, t, &coeffs, self.schedule) {
                skips += 1;
            }
        }
        let touched = targets.iter().map(|&t| block_means_mut(&mut local, t).to_vec()).collect();
        (touched, skips)
    }

    fn phase(&self, state: &mut VariationalState, blocks: Vec<Vec<Target>>, grid: &[f64], seeds: Vec<u64>) -> u64 {
        let run = |(targets, seed): (&Vec<Target>, &u64)| self.run_block(state, targets, grid, *seed);
        let results: Vec<(Vec<Vec<f64>>, u64)> = if self.parallel {
            #[cfg(feature = "parallel")]
            {
                use rayon::prelude::*;
                blocks.par_iter().zip(seeds.par_iter()).map(run).collect()
            }
            #[cfg(not(feature = "parallel"))]
            {
                blocks.iter().zip(seeds.iter()).map(run).collect()
            }
        } else {
            blocks.iter().zip(seeds.iter()).map(run).collect()
        };
        let mut skips = 0;
        for (targets, (values, s)) in blocks.iter().zip(results) {
            skips += s;
            for (&t, v) in targets.iter().zip(values) {
                block_means_mut(state, t).copy_from_slice(&v);
            }
        }
        skips
    }

    /// One sweep: every lawmaker block (x then z) with bills frozen, then
    /// every bill block (a then b) with lawmakers frozen.
    fn sweep(&self, state: &mut VariationalState, grid: &[f64], seed: u64, sweep: usize) -> u64 {
        let k = state.k;
        let lawmaker_blocks: Vec<Vec<Target>> = (0..state.n_lawmakers())
            .map(|u| if k > 0 { vec![Target::X(u), Target::Z(u)] } else { vec![Target::X(u)] })
            .collect();
        let lseeds = (0..state.n_lawmakers())
            .map(|u| rng::derive_seed(seed, &[sweep as u64, TAG_LAWMAKER, u as u64]))
            .collect();
        let mut skips = self.phase(state, lawmaker_blocks, grid, lseeds);
        let bill_blocks: Vec<Vec<Target>> = (0..state.n_bills()).map(|d| vec![Target::A(d), Target::B(d)]).collect();
        let bseeds = (0..state.n_bills())
            .map(|d| rng::derive_seed(seed, &[sweep as u64, TAG_BILL, d as u64]))
            .collect();
        skips += self.phase(state, bill_blocks, grid, bseeds);
        skips
    }
}

/// Fits the model with checkpointing, resumption and early stopping.
pub fn fit_with(
    ds: &RollCallDataset,
    mixtures: Option<&[IssueMixture]>,
    hp: &Hyperparams,
    schedule: &UpdateSchedule,
    seed: u64,
    mut control: FitControl<'_>,
) -> Result<FitOutcome> {
    hp.validate()?;
    schedule.validate()?;
    control.variances.validate()?;
    let k = issue_dim(mixtures);
    let thetas = align_mixtures(ds, mixtures.unwrap_or(&[]), k)?;
    let index = VoteIndex::new(ds);
    let elbo_grid = standard_grid(schedule.elbo_samples);
    let elbo_at = |state: &VariationalState, sweep: usize| -> Result<f64> {
        let e = elbo_with_grid(
            state,
            &index,
            &thetas,
            hp,
            &elbo_grid,
            rng::derive_seed(seed, &[TAG_ELBO, sweep as u64]),
            Sampling::Qmc,
        );
        if e.is_finite() {
            Ok(e)
        } else {
            Err(Error::Convergence(format!("ELBO estimate became non-finite at sweep {sweep}")))
        }
    };

    let mut cp = match control.resume.take() {
        Some(cp) => {
            if cp.seed != seed {
                return Err(Error::InvalidArgument(format!(
                    "checkpoint was written with seed {}, not {seed}",
                    cp.seed
                )));
            }
            cp.state.check(&index, &thetas)?;
            if cp.state.lawmaker_ids != ModelParams::for_dataset(ds, k).lawmaker_ids {
                return Err(Error::Integrity("checkpoint does not match the dataset".into()));
            }
            cp
        }
        None => {
            let state = initial_state(ds, k, control.variances, seed);
            let prev_elbo = elbo_at(&state, 0)?;
            Checkpoint {
                state,
                sweeps: 0,
                m: schedule.m_init,
                ema: None,
                prev_elbo,
                elbo_trace: Vec::new(),
                skipped_updates: 0,
                seed,
            }
        }
    };

    let sweeper = Sweeper {
        index: &index,
        thetas: &thetas,
        hp,
        schedule,
        parallel: control.parallel,
    };
    let mut grid = standard_grid(cp.m);
    let mut converged = false;
    while cp.sweeps < schedule.max_sweeps {
        if control.stop_after_sweeps.is_some_and(|n| cp.sweeps >= n) {
            return Ok(FitOutcome::Stopped(cp));
        }
        if grid.len() != cp.m {
            grid = standard_grid(cp.m);
        }
        cp.skipped_updates += sweeper.sweep(&mut cp.state, &grid, seed, cp.sweeps);
        cp.sweeps += 1;
        let elbo = elbo_at(&cp.state, cp.sweeps)?;
        let obs = (elbo - cp.prev_elbo).abs();
        let ema = match cp.ema {
            Some(e) => schedule.ema_decay * e + (1.0 - schedule.ema_decay) * obs,
            None => obs,
        };
        cp.ema = Some(ema);
        cp.prev_elbo = elbo;
        cp.elbo_trace.push(elbo);
        log::debug!("sweep {} M={} elbo={elbo:.4} ema={ema:.4}", cp.sweeps, cp.m);
        let mut done = false;
        if ema < schedule.ema_threshold {
            if cp.m < schedule.m_max {
                cp.m = schedule.grow(cp.m);
            } else {
                done = true;
            }
        }
        if let Some(cb) = control.on_sweep.as_mut() {
            cb(&cp)?;
        }
        if done {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("fit stopped at max_sweeps = {} before convergence", schedule.max_sweeps);
    }

    let (state, identified) = match identify_state(&cp.state, &ds.lawmakers) {
        Ok((s, _)) => (s, true),
        Err(e) => {
            log::warn!("sign identification skipped: {e}");
            (cp.state.clone(), false)
        }
    };
    Ok(FitOutcome::Finished(FitResult {
        state,
        elbo_trace: cp.elbo_trace,
        sweeps: cp.sweeps,
        identified,
        converged,
        final_m: cp.m,
        skipped_updates: cp.skipped_updates,
    }))
}

fn party_means(ids: &[String], x: &[f64], lawmakers: &[Lawmaker]) -> Result<(f64, f64)> {
    let party: std::collections::HashMap<&str, Party> = lawmakers.iter().map(|l| (l.id.as_str(), l.party)).collect();
    let (mut sr, mut nr, mut sd, mut nd) = (0.0, 0usize, 0.0, 0usize);
    for (id, &v) in ids.iter().zip(x) {
        match party.get(id.as_str()) {
            Some(Party::Republican) => {
                sr += v;
                nr += 1;
            }
            Some(Party::Democrat) => {
                sd += v;
                nd += 1;
            }
            _ => {}
        }
    }
    if nr == 0 || nd == 0 {
        return Err(Error::Identification(
            "sign identification needs at least one Democrat and one Republican".into(),
        ));
    }
    Ok((sr / nr as f64, sd / nd as f64))
}

/// Negates `x`, `z` and `a` jointly when Republicans sit left of Democrats.
/// Returns the possibly flipped copy and whether a flip happened.
pub fn identify_signs(params: &ModelParams, lawmakers: &[Lawmaker]) -> Result<(ModelParams, bool)> {
    let (r, d) = party_means(&params.lawmaker_ids, &params.x, lawmakers)?;
    Ok(if r < d { (params.negated(), true) } else { (params.clone(), false) })
}

/// [`identify_signs`] for a variational state.
pub fn identify_state(state: &VariationalState, lawmakers: &[Lawmaker]) -> Result<(VariationalState, bool)> {
    let (r, d) = party_means(&state.lawmaker_ids, &state.mean_x, lawmakers)?;
    Ok(if r < d { (state.negated(), true) } else { (state.clone(), false) })
}
