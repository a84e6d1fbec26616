//! Browser demo: vote curves, estimator spread and a small synthetic fit.
//!
//! Each export returns a JSON string so the page needs no bindings beyond
//! the generated module.

use issuepoint::corpus::{BillDoc, Chamber, Lawmaker, Party, RollCallDataset, Vote, VoteIndex, VoteRecord};
use issuepoint::inference::{
    blanket_samples, fit, mc_taylor_coefficients, Sampling, Target, UpdateSchedule, VariationalState, Variances,
};
use issuepoint::linalg::pearson;
use issuepoint::model::{logistic, sample_synthetic, Hyperparams, MixtureSource};
use issuepoint::rng::derive_seed;
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Debug, Serialize)]
pub struct Curve {
    pub x: Vec<f64>,
    pub classic: Vec<f64>,
    pub adjusted: Vec<f64>,
    pub cut_point: Option<f64>,
    pub adjusted_cut_point: Option<f64>,
}

/// Yea probability over ideal points in `[-3, 3]` for one bill, without and
/// with an adjustment `z` on an issue the bill weights by `theta`.
pub fn vote_curve(a: f64, b: f64, z: f64, theta: f64, points: usize) -> Curve {
    let n = points.max(2);
    let x: Vec<f64> = (0..n).map(|i| -3.0 + 6.0 * i as f64 / (n - 1) as f64).collect();
    let shift = z * theta.clamp(0.0, 1.0);
    let classic = x.iter().map(|&v| logistic(v * a + b)).collect();
    let adjusted = x.iter().map(|&v| logistic((v + shift) * a + b)).collect();
    let cut = (a != 0.0).then(|| -b / a);
    Curve { x, classic, adjusted, cut_point: cut, adjusted_cut_point: cut.map(|c| c - shift) }
}

#[derive(Debug, Serialize)]
pub struct Spread {
    pub coordinates: [&'static str; 4],
    pub qmc_mean: [f64; 4],
    pub qmc_sd: [f64; 4],
    pub iid_mean: [f64; 4],
    pub iid_sd: [f64; 4],
}

fn single_vote(yea: bool) -> RollCallDataset {
    RollCallDataset::new(
        vec![Lawmaker { id: "u".into(), name: String::new(), party: Party::Democrat, chamber: Chamber::Senate }],
        vec![BillDoc { id: "d".into(), title: String::new(), tokens: vec![], labels: Default::default() }],
        vec![VoteRecord {
            lawmaker_id: "u".into(),
            bill_id: "d".into(),
            vote: if yea { Vote::Yea } else { Vote::Nay },
        }],
    )
    .expect("single vote")
}

/// Spread of the score-function gradient of one vote at means
/// `(x, z, a, b)` over `trials` batches of `m` samples, QMC against i.i.d.
pub fn gradient_spread(mu: [f64; 4], yea: bool, m: usize, trials: usize, seed: u64) -> Spread {
    let ds = single_vote(yea);
    let index = VoteIndex::new(&ds);
    let mut state = VariationalState::zeros(&ds, 1, Variances::default());
    state.mean_x[0] = mu[0];
    state.mean_z[0] = mu[1];
    state.mean_a[0] = mu[2];
    state.mean_b[0] = mu[3];
    let thetas = vec![vec![1.0]];
    let hp = Hyperparams::default();
    let targets = [Target::X(0), Target::Z(0), Target::A(0), Target::B(0)];
    let run = |sampling: Sampling| -> ([f64; 4], [f64; 4]) {
        let mut sum = [0.0; 4];
        let mut sq = [0.0; 4];
        for t in 0..trials {
            for (i, &target) in targets.iter().enumerate() {
                let s = derive_seed(seed, &[t as u64, i as u64]);
                let batch = blanket_samples(&state, target, &index, m.max(1), s, sampling).expect("m >= 1");
                let g = mc_taylor_coefficients(&state, target, &batch, &index, &thetas, &hp).gradient[0];
                sum[i] += g;
                sq[i] += g * g;
            }
        }
        let n = trials.max(1) as f64;
        let mean = sum.map(|v| v / n);
        let mut sd = [0.0; 4];
        for i in 0..4 {
            sd[i] = (sq[i] / n - mean[i] * mean[i]).max(0.0).sqrt();
        }
        (mean, sd)
    };
    let (qmc_mean, qmc_sd) = run(Sampling::Qmc);
    let (iid_mean, iid_sd) = run(Sampling::Iid);
    Spread { coordinates: ["x", "z", "a", "b"], qmc_mean, qmc_sd, iid_mean, iid_sd }
}

#[derive(Debug, Serialize)]
pub struct SyntheticFit {
    pub sweeps: usize,
    pub converged: bool,
    pub skipped_updates: u64,
    pub elbo_trace: Vec<f64>,
    pub corr_x: f64,
    pub corr_a: f64,
    pub true_x: Vec<f64>,
    pub fitted_x: Vec<f64>,
}

/// Samples a small synthetic chamber and fits the issue-adjusted model.
pub fn synthetic_fit(
    lawmakers: usize,
    bills: usize,
    k: usize,
    max_sweeps: usize,
    seed: u64,
) -> issuepoint::Result<SyntheticFit> {
    let hp = Hyperparams::default();
    let truth = sample_synthetic(lawmakers, bills, k, &hp, MixtureSource::Dirichlet(1.0), seed)?;
    let schedule = UpdateSchedule { m_max: 100, max_sweeps, elbo_samples: 100, ..UpdateSchedule::default() };
    let res = fit(&truth.dataset, Some(&truth.mixtures), &hp, &schedule, seed)?;
    Ok(SyntheticFit {
        sweeps: res.sweeps,
        converged: res.converged,
        skipped_updates: res.skipped_updates,
        corr_x: pearson(&res.state.mean_x, &truth.params.x),
        corr_a: pearson(&res.state.mean_a, &truth.params.a),
        elbo_trace: res.elbo_trace,
        true_x: truth.params.x,
        fitted_x: res.state.mean_x,
    })
}

fn to_json<T: Serialize>(v: &T) -> Result<String, JsError> {
    serde_json::to_string(v).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = voteCurve)]
pub fn vote_curve_js(a: f64, b: f64, z: f64, theta: f64, points: usize) -> Result<String, JsError> {
    to_json(&vote_curve(a, b, z, theta, points))
}

#[wasm_bindgen(js_name = gradientSpread)]
#[allow(clippy::too_many_arguments)]
pub fn gradient_spread_js(
    x: f64,
    z: f64,
    a: f64,
    b: f64,
    yea: bool,
    m: usize,
    trials: usize,
    seed: u32,
) -> Result<String, JsError> {
    to_json(&gradient_spread([x, z, a, b], yea, m, trials, seed as u64))
}

#[wasm_bindgen(js_name = syntheticFit)]
pub fn synthetic_fit_js(lawmakers: usize, bills: usize, k: usize, max_sweeps: usize, seed: u32) -> Result<String, JsError> {
    let fit = synthetic_fit(lawmakers, bills, k, max_sweeps, seed as u64).map_err(|e| JsError::new(&e.to_string()))?;
    to_json(&fit)
}
