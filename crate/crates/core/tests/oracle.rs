mod common;

use common::{gauss_hermite, gh_expect, mc_gradient, prior_setting, OneByOne};
use issuepoint::corpus::VoteIndex;
use issuepoint::inference::{
    blanket_samples, estimate_elbo, newton_step, standard_grid, Sampling, Target,
    TaylorCoefficients,
};
use issuepoint::linalg::{mean, sample_variance};
use issuepoint::rng;

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

#[test]
fn gauss_hermite_integrates_moments() {
    let rule = gauss_hermite(20);
    assert!((rule.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert!((gh_expect(&rule, 0.0, 1.0, |x| x * x) - 1.0).abs() < 1e-12);
    assert!((gh_expect(&rule, 0.0, 1.0, |x| x.powi(4)) - 3.0).abs() < 1e-10);
    assert!((gh_expect(&rule, 1.5, 2.0, |x| x) - 1.5).abs() < 1e-12);
}

#[test]
fn quadrature_elbo_is_below_log_evidence() {
    for yea in [true, false] {
        let o = OneByOne::new(yea);
        let evidence = o.log_evidence();
        assert!((evidence - 0.5f64.ln()).abs() < 1e-4, "symmetric prior gives p(v) = 1/2, got {evidence}");
        for mu in [[0.0; 4], [0.5, -0.3, 1.2, 0.1], [-1.0, 0.2, 0.7, -0.4]] {
            assert!(o.elbo(mu) <= evidence);
        }
    }
}

#[test]
fn mc_gradient_tracks_quadrature_at_500_samples() {
    let mut r = rng::stream(1, &[]);
    let mut rel = Vec::new();
    for trial in 0..20 {
        let (o, mu) = prior_setting(&mut r);
        let exact = o.gradient(mu);
        let est = mc_gradient(&o, mu, 500, trial, Sampling::Qmc);
        let diff: Vec<f64> = est.iter().zip(&exact).map(|(a, b)| a - b).collect();
        rel.push(norm(&diff) / norm(&exact));
    }
    rel.sort_by(f64::total_cmp);
    assert!(rel[10] < 0.05, "median relative error {}", rel[10]);
    assert!(rel[19] < 0.1, "max relative error {}", rel[19]);
}

#[test]
fn iid_estimator_is_unbiased() {
    let mut r = rng::stream(2, &[]);
    for _ in 0..3 {
        let (o, mu) = prior_setting(&mut r);
        let exact = o.gradient(mu);
        let reps: Vec<[f64; 4]> = (0..200).map(|s| mc_gradient(&o, mu, 50, 500 + s, Sampling::Iid)).collect();
        for i in 0..4 {
            let v: Vec<f64> = reps.iter().map(|g| g[i]).collect();
            let se = (sample_variance(&v) / v.len() as f64).sqrt();
            assert!((mean(&v) - exact[i]).abs() < 3.0 * se, "coord {i}: {} vs {} (se {se})", mean(&v), exact[i]);
        }
    }
}

#[test]
fn qmc_has_lower_variance_than_iid() {
    let mut r = rng::stream(3, &[]);
    for _ in 0..4 {
        let (o, mu) = prior_setting(&mut r);
        let var = |sampling| {
            let reps: Vec<[f64; 4]> = (0..60).map(|s| mc_gradient(&o, mu, 50, 900 + s, sampling)).collect();
            (0..4)
                .map(|i| sample_variance(&reps.iter().map(|g| g[i]).collect::<Vec<_>>()))
                .collect::<Vec<_>>()
        };
        let (q, i) = (var(Sampling::Qmc), var(Sampling::Iid));
        for c in 0..4 {
            assert!(q[c] < i[c], "coord {c}: qmc {} iid {}", q[c], i[c]);
        }
    }
}

#[test]
fn score_mean_is_zero_on_the_grid() {
    let o = OneByOne::new(true);
    let mu = [0.3, -0.1, 0.9, 0.2];
    let state = o.state(mu);
    for m in [1, 7, 50, 500] {
        let b = blanket_samples(&state, Target::X(0), &o.index(), m, 4, Sampling::Qmc).unwrap();
        let s: f64 = b.samples[0].iter().map(|v| (v - mu[0]) / state.var.x).sum::<f64>() / m as f64;
        assert!(s.abs() < 1e-9, "{s}");
    }
}

#[test]
fn elbo_estimate_matches_quadrature() {
    let mut r = rng::stream(5, &[]);
    for s in 0..5 {
        let (o, mu) = prior_setting(&mut r);
        let exact = o.elbo(mu);
        let est = estimate_elbo(&o.state(mu), &o.index(), &o.thetas(), &o.hp, 500, s).unwrap();
        assert!(((est - exact) / exact).abs() < 0.01, "{est} vs {exact}");
    }
}

#[test]
fn sampled_entropy_matches_closed_form() {
    // −E[log q] on the midpoint grid differs from the Gaussian entropy by
    // ½(1 − mean t²) per variable.
    let g = standard_grid(500);
    let m2 = g.iter().map(|t| t * t).sum::<f64>() / 500.0;
    let o = OneByOne::new(true);
    let mu = [0.2, 0.1, -0.5, 0.3];
    let state = o.state(mu);
    let b = blanket_samples(&state, Target::X(0), &o.index(), 500, 6, Sampling::Qmc).unwrap();
    let mut sampled = 0.0;
    for (v, xs) in b.samples.iter().enumerate() {
        let m = mu[v];
        sampled -= xs.iter().map(|x| issuepoint::model::log_normal(x - m, o.var)).sum::<f64>() / 500.0;
    }
    let closed = 4.0 * o.entropy_one();
    assert!((sampled - closed - 2.0 * (m2 - 1.0)).abs() < 1e-9);
    assert!((sampled - closed).abs() / 4.0 < 2e-3);
}

#[test]
fn duplicated_votes_double_the_likelihood_term() {
    let o = OneByOne::new(false);
    let mu = [0.7, 0.4, -1.1, 0.5];
    let state = o.state(mu);
    let one = o.index();
    let dup = VoteIndex {
        lawmaker: vec![0, 0],
        bill: vec![0, 0],
        yea: vec![false, false],
        by_lawmaker: vec![vec![0, 1]],
        by_bill: vec![vec![0, 1]],
    };
    let none = VoteIndex {
        lawmaker: vec![],
        bill: vec![],
        yea: vec![],
        by_lawmaker: vec![vec![]],
        by_bill: vec![vec![]],
    };
    let e = |idx: &VoteIndex| estimate_elbo(&state, idx, &o.thetas(), &o.hp, 200, 8).unwrap();
    let (e0, e1, e2) = (e(&none), e(&one), e(&dup));
    assert!(((e2 - e0) - 2.0 * (e1 - e0)).abs() < 1e-10);
}

#[test]
fn newton_step_solves_a_concave_quadratic() {
    // log p = −½ (μ − c)ᵀ P (μ − c) has gradient −P(μ − c) and Hessian −P.
    let p = [2.0, 0.5, 0.5, 1.0];
    let c = [0.03, -0.02];
    let mu = [0.01, 0.015];
    let d = [mu[0] - c[0], mu[1] - c[1]];
    let coeffs = TaylorCoefficients {
        gradient: vec![-(p[0] * d[0] + p[1] * d[1]), -(p[2] * d[0] + p[3] * d[1])],
        hessian: p.iter().map(|v| -v).collect(),
    };
    let step = newton_step(&coeffs, 0.1).unwrap();
    for i in 0..2 {
        assert!((mu[i] + step[i] - c[i]).abs() < 1e-15);
    }
    let scalar = TaylorCoefficients {
        gradient: vec![-4.0 * (0.2 - 0.25)],
        hessian: vec![-4.0],
    };
    assert!((0.2 + newton_step(&scalar, 0.1).unwrap()[0] - 0.25).abs() < 1e-15);
}
