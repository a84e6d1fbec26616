use issuepoint_web::{gradient_spread, synthetic_fit, vote_curve};

#[test]
fn adjustment_shifts_the_cut_point() {
    let c = vote_curve(2.0, -1.0, 1.5, 0.5, 61);
    assert_eq!(c.x.len(), 61);
    assert_eq!(c.cut_point, Some(0.5));
    assert!((c.adjusted_cut_point.unwrap() + 0.25).abs() < 1e-12);
    assert!(c.classic.windows(2).all(|w| w[1] > w[0]));
    assert!(c.adjusted.iter().zip(&c.classic).all(|(p, q)| p >= q));
}

#[test]
fn zero_polarity_has_no_cut_point() {
    let c = vote_curve(0.0, 0.3, 1.0, 1.0, 5);
    assert_eq!(c.cut_point, None);
    assert!(c.classic.iter().all(|&p| p == c.classic[0]));
}

#[test]
fn qmc_spread_is_below_iid_spread() {
    let s = gradient_spread([0.3, -0.2, 0.8, 0.1], true, 50, 60, 4);
    for i in 0..4 {
        assert!(s.qmc_sd[i] < s.iid_sd[i], "{}: {} vs {}", s.coordinates[i], s.qmc_sd[i], s.iid_sd[i]);
    }
}

#[test]
fn small_fit_is_deterministic() {
    let a = synthetic_fit(12, 30, 2, 8, 1).unwrap();
    let b = synthetic_fit(12, 30, 2, 8, 1).unwrap();
    assert_eq!(a.fitted_x, b.fitted_x);
    assert_eq!(a.elbo_trace.len(), a.sweeps);
    assert_eq!(a.true_x.len(), 12);
}
