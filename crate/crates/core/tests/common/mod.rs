//! Shared oracles for the integration tests.
#![allow(dead_code)]

use issuepoint::corpus::{Chamber, Lawmaker, Party, RollCallDataset, Vote, VoteIndex, VoteRecord};
use issuepoint::inference::{blanket_samples, mc_taylor_coefficients, Sampling, Target, Variances, VariationalState};
use issuepoint::model::sample_laplace;
use issuepoint::rng;
use rand::Rng;
use rand_distr::StandardNormal;
use issuepoint::model::{log_laplace, log_normal, vote_loglik, Hyperparams};
use issuepoint::topics::IssueMixture;
use nalgebra::{DMatrix, SymmetricEigen};

/// Gauss–Hermite rule normalised for the standard normal:
/// `E[f(Z)] ≈ Σ wᵢ f(nodes[i])`.
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Golub–Welsch construction from the Hermite Jacobi matrix.
pub fn gauss_hermite(n: usize) -> GaussHermite {
    let mut j = DMatrix::<f64>::zeros(n, n);
    for i in 1..n {
        let v = (i as f64 / 2.0).sqrt();
        j[(i, i - 1)] = v;
        j[(i - 1, i)] = v;
    }
    let eig = SymmetricEigen::new(j);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| (eig.eigenvalues[i], eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    GaussHermite {
        nodes: pairs.iter().map(|p| p.0 * std::f64::consts::SQRT_2).collect(),
        weights: pairs.iter().map(|p| p.1).collect(),
    }
}

/// Expectation under `N(mean, sd²)`.
pub fn gh_expect(rule: &GaussHermite, mean: f64, sd: f64, f: impl Fn(f64) -> f64) -> f64 {
    rule.nodes.iter().zip(&rule.weights).map(|(n, w)| w * f(mean + sd * n)).sum()
}

/// One lawmaker, one bill, one issue with `θ = [theta]`, one observed vote.
/// Means are ordered `(x, z, a, b)`.
pub struct OneByOne {
    pub yea: bool,
    pub theta: f64,
    pub var: f64,
    pub hp: Hyperparams,
}

impl OneByOne {
    pub fn new(yea: bool) -> Self {
        Self {
            yea,
            theta: 1.0,
            var: Variances::default().x,
            hp: Hyperparams::default(),
        }
    }

    pub fn dataset(&self) -> RollCallDataset {
        RollCallDataset::new(
            vec![Lawmaker {
                id: "u".into(),
                name: String::new(),
                party: Party::Democrat,
                chamber: Chamber::Senate,
            }],
            vec![issuepoint::corpus::BillDoc {
                id: "d".into(),
                title: String::new(),
                tokens: vec![],
                labels: Default::default(),
            }],
            vec![VoteRecord {
                lawmaker_id: "u".into(),
                bill_id: "d".into(),
                vote: if self.yea { Vote::Yea } else { Vote::Nay },
            }],
        )
        .unwrap()
    }

    pub fn index(&self) -> VoteIndex {
        VoteIndex::new(&self.dataset())
    }

    pub fn thetas(&self) -> Vec<Vec<f64>> {
        vec![vec![self.theta]]
    }

    pub fn mixtures(&self) -> Vec<IssueMixture> {
        vec![IssueMixture {
            bill_id: "d".into(),
            theta: vec![self.theta],
        }]
    }

    pub fn state(&self, mu: [f64; 4]) -> VariationalState {
        VariationalState {
            lawmaker_ids: vec!["u".into()],
            bill_ids: vec!["d".into()],
            k: 1,
            mean_x: vec![mu[0]],
            mean_z: vec![mu[1]],
            mean_a: vec![mu[2]],
            mean_b: vec![mu[3]],
            var: Variances {
                x: self.var,
                z: self.var,
                a: self.var,
                b: self.var,
            },
        }
    }

    /// Expected log-likelihood by a tensor Gauss–Hermite rule.
    pub fn expected_loglik(&self, mu: [f64; 4], rule: &GaussHermite) -> f64 {
        let sd = self.var.sqrt();
        gh_expect(rule, mu[0], sd, |x| {
            gh_expect(rule, mu[1], sd, |z| {
                gh_expect(rule, mu[2], sd, |a| {
                    gh_expect(rule, mu[3], sd, |b| vote_loglik(self.yea, (x + z * self.theta) * a + b))
                })
            })
        })
    }

    /// Exact ELBO: closed-form prior expectations and entropies plus the
    /// quadrature likelihood term.
    pub fn elbo(&self, mu: [f64; 4]) -> f64 {
        let rule = gauss_hermite(24);
        let v = self.var;
        let sd = v.sqrt();
        let normal_prior = |m: f64, pv: f64| -0.5 * (2.0 * std::f64::consts::PI * pv).ln() - (m * m + v) / (2.0 * pv);
        let abs_mean = {
            let m = mu[1];
            let phi = statrs::function::erf::erf(m / (sd * std::f64::consts::SQRT_2));
            sd * (2.0 / std::f64::consts::PI).sqrt() * (-m * m / (2.0 * v)).exp() + m * phi
        };
        let lam = self.hp.lambda1;
        let prior = normal_prior(mu[0], self.hp.prior_var_x)
            + (lam / 2.0).ln()
            - lam * abs_mean
            + normal_prior(mu[2], self.hp.prior_var_a)
            + normal_prior(mu[3], self.hp.prior_var_b);
        let entropy = 4.0 * self.entropy_one();
        prior + self.expected_loglik(mu, &rule) + entropy
    }

    pub fn entropy_one(&self) -> f64 {
        0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E * self.var).ln()
    }

    /// Central finite-difference gradient of the exact ELBO.
    pub fn gradient(&self, mu: [f64; 4]) -> [f64; 4] {
        let h = 1e-5;
        let mut g = [0.0; 4];
        for i in 0..4 {
            let mut p = mu;
            let mut m = mu;
            p[i] += h;
            m[i] -= h;
            g[i] = (self.elbo(p) - self.elbo(m)) / (2.0 * h);
        }
        g
    }

    /// `log p(v)`: Gauss–Hermite over the Gaussian priors and a fine
    /// trapezoid rule over the Laplace prior.
    pub fn log_evidence(&self) -> f64 {
        let rule = gauss_hermite(30);
        let (sx, sa, sb) = (
            self.hp.prior_var_x.sqrt(),
            self.hp.prior_var_a.sqrt(),
            self.hp.prior_var_b.sqrt(),
        );
        let h = 0.01;
        let n: i64 = 4000;
        let mut total = 0.0;
        for i in -n..=n {
            let z = i as f64 * h;
            let wz = if i.abs() == n { 0.5 * h } else { h } * log_laplace(z, self.hp.lambda1).exp();
            total += wz
                * gh_expect(&rule, 0.0, sx, |x| {
                    gh_expect(&rule, 0.0, sa, |a| {
                        gh_expect(&rule, 0.0, sb, |b| vote_loglik(self.yea, (x + z * self.theta) * a + b).exp())
                    })
                });
        }
        total.ln()
    }

    pub fn log_prior_sanity(&self) -> f64 {
        log_normal(0.0, 1.0)
    }
}

pub const TARGETS: [Target; 4] = [Target::X(0), Target::Z(0), Target::A(0), Target::B(0)];

pub fn mc_gradient(o: &OneByOne, mu: [f64; 4], m: usize, seed: u64, sampling: Sampling) -> [f64; 4] {
    let state = o.state(mu);
    let index = o.index();
    let thetas = o.thetas();
    let mut g = [0.0; 4];
    for (i, &t) in TARGETS.iter().enumerate() {
        let batch = blanket_samples(&state, t, &index, m, rng::derive_seed(seed, &[i as u64]), sampling).unwrap();
        g[i] = mc_taylor_coefficients(&state, t, &batch, &index, &thetas, &o.hp).gradient[0];
    }
    g
}

pub fn prior_setting<R: Rng>(r: &mut R) -> (OneByOne, [f64; 4]) {
    let o = OneByOne::new(r.random::<bool>());
    let mu = [
        r.sample(StandardNormal),
        sample_laplace(r, 1.0),
        r.sample(StandardNormal),
        r.sample(StandardNormal),
    ];
    (o, mu)
}
