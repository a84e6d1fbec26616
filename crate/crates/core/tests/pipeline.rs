use std::collections::{BTreeSet, HashMap, HashSet};

use issuepoint::corpus::{split_folds, BillDoc, Party};
use issuepoint::eval::{cross_validate, cross_validate_fold, permutation_significance, VariantInput, Variant};
use issuepoint::inference::{fit, UpdateSchedule};
use issuepoint::linalg::pearson;
use issuepoint::model::{logistic, sample_synthetic, Hyperparams, MixtureSource};
use issuepoint::topics::{fit_unsupervised_lda, IssueMixture};
use issuepoint::vocab::{
    compute_features, extract_phrases, train_phrase_classifier, PhraseFeatures, TrainOptions, Vocabulary,
};

fn quick() -> UpdateSchedule {
    UpdateSchedule {
        m_max: 60,
        max_sweeps: 40,
        elbo_samples: 100,
        ..UpdateSchedule::default()
    }
}

fn synthetic_mixtures(truth: &issuepoint::model::SyntheticTruth) -> Vec<IssueMixture> {
    truth.mixtures.clone()
}

#[test]
fn classifier_reaches_a_stationary_point() {
    let words = ["the", "of", "tax", "credit", "health", "care", "and", "section"];
    let bills: Vec<BillDoc> = (0..30)
        .map(|i| BillDoc {
            id: format!("b{i}"),
            title: String::new(),
            tokens: (0..12).map(|j| words[(i * 3 + j * (1 + i % 4)) % words.len()].to_string()).collect(),
            labels: Default::default(),
        })
        .collect();
    let stats = extract_phrases(&bills, 2);
    let anchor: HashMap<String, f64> = stats.iter().map(|s| (s.phrase.clone(), (s.phrase.len() % 3) as f64)).collect();
    let features: Vec<PhraseFeatures> = stats
        .iter()
        .map(|s| compute_features(s, &anchor, 1.0 + s.doc_count as f64 / 2.0).unwrap())
        .collect();
    let bad: HashSet<String> = stats
        .iter()
        .filter(|s| s.phrase.starts_with("the") || s.phrase.ends_with("of"))
        .map(|s| s.phrase.clone())
        .collect();
    let opts = TrainOptions::default();
    let m = train_phrase_classifier(&features, &bad, &opts).unwrap();

    // gradient of the penalized log-likelihood, recomputed here
    let w = |name: &str| m.weights[name];
    let names = issuepoint::vocab::FEATURE_NAMES;
    let mut g = vec![0.0; names.len() + 1];
    for f in &features {
        let y = if bad.contains(&f.phrase) { 0.0 } else { 1.0 };
        let r = y - logistic(m.score(f));
        g[0] += r;
        for i in 0..names.len() {
            g[i + 1] += r * f.values[i];
        }
    }
    for (i, n) in names.iter().enumerate() {
        g[i + 1] -= opts.l2_penalty * w(n);
    }
    let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    assert!(norm <= 1e-6, "gradient norm {norm}");
}

#[test]
fn fold_results_do_not_depend_on_evaluation_order() {
    let hp = Hyperparams::default();
    let truth = sample_synthetic(8, 12, 2, &hp, MixtureSource::Dirichlet(1.0), 4).unwrap();
    let mixtures = synthetic_mixtures(&truth);
    let folds = split_folds(&truth.dataset, 3, 9).unwrap();
    let variants = [VariantInput::classic(), VariantInput::with_mixtures(Variant::IssueLda, mixtures)];
    let all = cross_validate(&truth.dataset, &variants, &hp, &quick(), &folds, 5).unwrap();
    let mut reversed = Vec::new();
    for fold in (0..3).rev() {
        let (rows, _) = cross_validate_fold(&truth.dataset, &variants, &hp, &quick(), &folds, 5, fold).unwrap();
        reversed.extend(rows);
    }
    for row in &all.rows {
        let twin = reversed.iter().find(|r| r.fold == row.fold && r.variant == row.variant).unwrap();
        assert_eq!(twin, row);
    }
}

#[test]
fn fitted_ideal_points_follow_the_party_convention() {
    let hp = Hyperparams::default();
    for seed in 0..3 {
        let truth = sample_synthetic(12, 30, 2, &hp, MixtureSource::Dirichlet(1.0), seed).unwrap();
        let res = fit(&truth.dataset, Some(&synthetic_mixtures(&truth)), &hp, &quick(), seed).unwrap();
        assert!(res.identified);
        let party: HashMap<&str, Party> = truth.dataset.lawmakers.iter().map(|l| (l.id.as_str(), l.party)).collect();
        let ind: Vec<f64> = res
            .state
            .lawmaker_ids
            .iter()
            .map(|id| if party[id.as_str()] == Party::Republican { 1.0 } else { 0.0 })
            .collect();
        assert!(pearson(&res.state.mean_x, &ind) >= 0.0);
    }
}

#[test]
fn more_replications_never_add_flags() {
    let hp = Hyperparams::default();
    let truth = sample_synthetic(8, 16, 2, &hp, MixtureSource::Dirichlet(1.0), 21).unwrap();
    let mixtures = synthetic_mixtures(&truth);
    let flagged = |r: usize| -> BTreeSet<(String, usize)> {
        permutation_significance(&truth.dataset, &mixtures, &hp, &quick(), r, 2, false)
            .unwrap()
            .flags
            .into_iter()
            .map(|f| (f.lawmaker_id, f.issue))
            .collect()
    };
    let few = flagged(1);
    let many = flagged(3);
    assert!(many.is_subset(&few), "{many:?} not within {few:?}");
}

#[test]
fn unsupervised_lda_separates_disjoint_vocabularies() {
    let left = ["tax", "rate", "credit", "income"];
    let right = ["health", "care", "clinic", "nurse"];
    let bills: Vec<BillDoc> = (0..20)
        .map(|i| {
            let words = if i % 2 == 0 { &left } else { &right };
            BillDoc {
                id: format!("b{i:02}"),
                title: String::new(),
                tokens: (0..30).map(|j| words[(i + j * 3) % 4].to_string()).collect(),
                labels: Default::default(),
            }
        })
        .collect();
    let vocab = Vocabulary::new(left.iter().chain(&right).map(|s| s.to_string()).collect()).unwrap();
    let lda = fit_unsupervised_lda(&bills, &vocab, 2, 3, 200).unwrap();
    for w in lda.objective_trace.windows(2) {
        assert!(w[1] >= w[0] - 1e-8 * w[0].abs(), "{} then {}", w[0], w[1]);
    }
    let mix = issuepoint::topics::infer_mixtures(&bills, &lda.model, &vocab, &Default::default()).unwrap();
    let side = |m: &IssueMixture| if m.theta[0] > m.theta[1] { 0 } else { 1 };
    for (i, m) in mix.iter().enumerate() {
        assert!(m.theta.iter().cloned().fold(0.0, f64::max) > 0.95, "{:?}", m.theta);
        assert_eq!(side(m), if i % 2 == 0 { side(&mix[0]) } else { 1 - side(&mix[0]) });
        assert!((m.theta.iter().sum::<f64>() - 1.0).abs() < 1e-6);
    }
}
