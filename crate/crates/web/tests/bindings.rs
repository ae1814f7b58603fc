use mca_core::alm::phase_transition;
use mca_core::mca::DEFAULT_MATCH_TOL;
use mca_web::{mickey_view, phase_rates, principal_cosines};

#[test]
fn mickey_view_flattens_both_copies() {
    let view = mickey_view(300, 0.1, 3, false).unwrap();
    assert_eq!(view.points().len(), 4 * 300);
    assert!(view.post_rms() < 0.35 * view.pre_rms());
    assert!((view.post_rms().powi(2) - view.objective()).abs() < 1e-10);
}

#[test]
fn mickey_view_rejects_bad_config() {
    assert!(mickey_view(2, 0.1, 0, false).is_err());
    assert!(mickey_view(300, -0.1, 0, false).is_err());
}

#[test]
fn phase_rates_match_the_parallel_study() {
    let rates = phase_rates(4, 5, 9, 8, 11, 20, 7).unwrap();
    let rows = phase_transition(4, 5, 9, &[8, 9, 10, 11], 20, 7).unwrap();
    let expected: Vec<f64> = rows.iter().map(|r| r.rate).collect();
    assert_eq!(rates, expected);
    assert_eq!(rates, vec![0.0, 0.0, 1.0, 1.0]);
    assert!(phase_rates(4, 5, 9, 11, 10, 20, 7).is_err());
}

#[test]
fn cosines_reveal_the_shared_dimension() {
    // d1 + d2 - D = 3 directions are shared once n >= d1 + d2 + 1.
    let cos = principal_cosines(4, 5, 6, 20, 2).unwrap();
    let matched = cos
        .iter()
        .filter(|&&c| c >= 1.0 - DEFAULT_MATCH_TOL)
        .count();
    assert_eq!(matched, 3);
    assert!(cos.windows(2).all(|w| w[0] >= w[1]));
}
