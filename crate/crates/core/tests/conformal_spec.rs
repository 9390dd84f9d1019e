//! Pinned scoring, calibration, and interval examples. Scorers are built
//! from constant-mean models fitted on one-row training sets, which makes
//! every predicted value, score, and threshold an exact hand-checkable
//! number.

use covplan_core::conformal::{
    calibrate, future_coverage, ConformityScorer, Dataset, PredictionInterval,
};
use covplan_core::models::{fit, FittedModel, ModelSpec};
use covplan_core::Error;
use num_rational::Ratio;

/// A fitted model that predicts exactly `c` everywhere.
fn constant(c: f64) -> FittedModel {
    fit(&ModelSpec::ConstantMean, &Dataset::new(vec![vec![0.0]], vec![c]).unwrap()).unwrap()
}

/// Calibration sample with the given responses at distinct 1-d points.
fn calib_with_responses(ys: &[f64]) -> Dataset {
    let rows = (0..ys.len()).map(|i| vec![i as f64]).collect();
    Dataset::new(rows, ys.to_vec()).unwrap()
}

#[test]
fn standard_score_is_the_absolute_residual() {
    let scorer = ConformityScorer::Standard { psi: constant(2.0) };
    assert_eq!(scorer.score(&[0.0], 3.5).unwrap(), 1.5);
    assert_eq!(scorer.score(&[0.0], 0.5).unwrap(), 1.5);
    assert_eq!(scorer.score(&[0.0], 2.0).unwrap(), 0.0);
}

#[test]
fn weighted_score_divides_by_the_dispersion() {
    let scorer =
        ConformityScorer::LocallyWeighted { psi: constant(2.0), sigma: constant(0.5) };
    assert_eq!(scorer.score(&[0.0], 3.0).unwrap(), 2.0);
    assert_eq!(scorer.score(&[0.0], 1.0).unwrap(), 2.0);
}

#[test]
fn weighted_score_rejects_nonpositive_dispersion() {
    let scorer =
        ConformityScorer::LocallyWeighted { psi: constant(2.0), sigma: constant(-1.0) };
    assert!(matches!(
        scorer.score(&[0.0], 3.0),
        Err(Error::DispersionNotPositive { value }) if value == -1.0
    ));
}

#[test]
fn cqr_score_is_negative_inside_the_band() {
    let scorer = ConformityScorer::Cqr { xi_lo: constant(1.0), xi_hi: constant(2.0) };
    // Interior point equidistant from both quantiles: both max arguments are
    // -0.5. A nonnegative value here would make the score's sublevel sets
    // disagree with the interval (xi_lo - s, xi_hi + s).
    assert_eq!(scorer.score(&[0.0], 1.5).unwrap(), -0.5);
    // Above the band by 0.2, below it by 0.5.
    assert!((scorer.score(&[0.0], 2.2).unwrap() - 0.2).abs() < 1e-15);
    assert_eq!(scorer.score(&[0.0], 0.5).unwrap(), 0.5);
    // At a quantile the score is exactly zero.
    assert_eq!(scorer.score(&[0.0], 1.0).unwrap(), 0.0);
    assert_eq!(scorer.score(&[0.0], 2.0).unwrap(), 0.0);
}

#[test]
fn cqr_with_collapsed_band_is_the_standard_score() {
    let cqr = ConformityScorer::Cqr { xi_lo: constant(2.0), xi_hi: constant(2.0) };
    let std = ConformityScorer::Standard { psi: constant(2.0) };
    for y in [-3.0, 0.1, 2.0, 2.7, 5.5, 1e9] {
        let a = cqr.score(&[0.0], y).unwrap();
        let b = std.score(&[0.0], y).unwrap();
        assert_eq!(a.to_bits(), b.to_bits(), "y={y}");
    }
}

#[test]
fn calibrate_stores_the_rank_b_score() {
    // Responses {0.4, 0.1, 0.3, 0.2} against psi = 0 give those very scores;
    // alpha = 0.45 on n = 4 puts the threshold at rank b = 3: 0.3.
    let scorer = ConformityScorer::Standard { psi: constant(0.0) };
    let cp = calibrate(scorer, &calib_with_responses(&[0.4, 0.1, 0.3, 0.2]), 0.45).unwrap();
    assert_eq!(cp.threshold(), 0.3);
    assert_eq!(cp.sorted_scores(), &[0.1, 0.2, 0.3, 0.4]);
    assert_eq!((cp.params().b(), cp.params().g()), (3, 2));
    assert!(!cp.tie_flag());
}

#[test]
fn calibrate_flags_exact_ties() {
    let scorer = ConformityScorer::Standard { psi: constant(0.0) };
    let cp = calibrate(scorer, &calib_with_responses(&[0.1, 0.1]), 0.5).unwrap();
    assert!(cp.tie_flag());
    assert_eq!(cp.threshold(), 0.1);
}

#[test]
fn calibrate_handles_a_single_row() {
    let scorer = ConformityScorer::Standard { psi: constant(0.0) };
    let cp = calibrate(scorer, &calib_with_responses(&[0.7]), 0.5).unwrap();
    assert_eq!(cp.params().b(), 1);
    assert_eq!(cp.threshold(), 0.7);
}

#[test]
fn calibrate_propagates_degeneracy_and_empty_input() {
    let scorer = ConformityScorer::Standard { psi: constant(0.0) };
    assert!(matches!(
        calibrate(scorer.clone(), &calib_with_responses(&[0.7]), 0.1),
        Err(Error::DegenerateCalibration { n: 1, .. })
    ));
    assert!(matches!(
        calibrate(scorer, &Dataset::new(vec![], vec![]).unwrap(), 0.5),
        Err(Error::InvalidData(_))
    ));
}

#[test]
fn intervals_take_the_three_closed_forms() {
    // Standard, psi = 2, threshold 0.5: (1.5, 2.5).
    let scorer = ConformityScorer::Standard { psi: constant(2.0) };
    let cp = calibrate(scorer, &calib_with_responses(&[2.5]), 0.5).unwrap();
    assert_eq!(cp.threshold(), 0.5);
    let iv = cp.predict_interval(&[0.0]).unwrap();
    assert_eq!((iv.lower, iv.upper), (1.5, 2.5));

    // Locally weighted, psi = 2, sigma = 2, threshold 0.5: (1, 3).
    let scorer =
        ConformityScorer::LocallyWeighted { psi: constant(2.0), sigma: constant(2.0) };
    let cp = calibrate(scorer, &calib_with_responses(&[3.0]), 0.5).unwrap();
    assert_eq!(cp.threshold(), 0.5);
    let iv = cp.predict_interval(&[0.0]).unwrap();
    assert_eq!((iv.lower, iv.upper), (1.0, 3.0));

    // CQR, band (1, 2), threshold 0.25: (0.75, 2.25).
    let scorer = ConformityScorer::Cqr { xi_lo: constant(1.0), xi_hi: constant(2.0) };
    let cp = calibrate(scorer, &calib_with_responses(&[2.25]), 0.5).unwrap();
    assert_eq!(cp.threshold(), 0.25);
    let iv = cp.predict_interval(&[0.0]).unwrap();
    assert_eq!((iv.lower, iv.upper), (0.75, 2.25));
}

#[test]
fn standard_intervals_have_constant_width() {
    let train = Dataset::new(
        vec![vec![0.0], vec![1.0], vec![4.0]],
        vec![1.0, 3.0, 17.0],
    )
    .unwrap();
    let psi = fit(&ModelSpec::KnnMean { k: 2 }, &train).unwrap();
    let cp = calibrate(
        ConformityScorer::Standard { psi },
        &calib_with_responses(&[0.3, 1.8, 2.6, 0.9]),
        0.45,
    )
    .unwrap();
    let widths: Vec<f64> = [0.0, 0.5, 2.0, 3.7]
        .iter()
        .map(|&x| {
            let iv = cp.predict_interval(&[x]).unwrap();
            iv.upper - iv.lower
        })
        .collect();
    for w in &widths {
        assert!((w - widths[0]).abs() <= 1e-12 * widths[0].abs());
    }
}

#[test]
fn a_negative_cqr_threshold_can_empty_the_interval() {
    // Calibration point deep inside the band (1, 3) scores -1; the interval
    // collapses to (2, 2) and nothing is covered.
    let scorer = ConformityScorer::Cqr { xi_lo: constant(1.0), xi_hi: constant(3.0) };
    let cp = calibrate(scorer, &calib_with_responses(&[2.0]), 0.5).unwrap();
    assert_eq!(cp.threshold(), -1.0);
    let iv = cp.predict_interval(&[0.0]).unwrap();
    assert_eq!((iv.lower, iv.upper), (2.0, 2.0));
    assert!(iv.is_empty());
    assert!(!iv.contains(2.0));

    let future = calib_with_responses(&[1.9, 2.0, 2.1]);
    let z = cp.coverage_indicators(&future).unwrap();
    assert_eq!(z, vec![false, false, false]);
}

#[test]
fn interval_membership_is_open() {
    let iv = PredictionInterval { lower: 1.0, upper: 3.0 };
    assert!(!iv.is_empty());
    assert!(iv.contains(2.0));
    assert!(!iv.contains(1.0));
    assert!(!iv.contains(3.0));
    assert!(!iv.contains(f64::NAN));
}

#[test]
fn coverage_indicators_use_the_strict_score_test() {
    let scorer = ConformityScorer::Standard { psi: constant(0.0) };
    let cp = calibrate(scorer, &calib_with_responses(&[0.5, 1.5]), 0.5).unwrap();
    assert_eq!(cp.threshold(), 1.5);
    // |0.4| < 1.5 covered; |2.0| not; boundary |1.5| = threshold not covered.
    let future = calib_with_responses(&[0.4, 2.0, 1.5, -1.5]);
    let z = cp.coverage_indicators(&future).unwrap();
    assert_eq!(z, vec![true, false, false, false]);
    assert!(cp.covers(&[0.0], -1.4).unwrap());

    assert!(matches!(
        cp.coverage_indicators(&Dataset::new(vec![], vec![]).unwrap()),
        Err(Error::InvalidData(_))
    ));
}

#[test]
fn future_coverage_is_an_exact_rational() {
    assert_eq!(future_coverage(&[true, false]), Ratio::new(1, 2));
    assert_eq!(future_coverage(&[true, true, false, true, false]), Ratio::new(3, 5));
    assert_eq!(future_coverage(&[true]), Ratio::new(1, 1));
    assert_eq!(future_coverage(&[false, false]), Ratio::new(0, 2));
}

#[test]
#[should_panic(expected = "at least one indicator")]
fn future_coverage_rejects_an_empty_slice() {
    future_coverage(&[]);
}

#[test]
fn thresholds_shrink_as_alpha_grows() {
    let ys = [0.9, 0.2, 1.4, 0.6, 1.1, 0.3, 0.8, 1.7, 0.5, 1.0];
    let mut prev = f64::INFINITY;
    for alpha in [0.1, 0.2, 0.3, 0.45, 0.6, 0.8] {
        let scorer = ConformityScorer::Standard { psi: constant(0.0) };
        let cp = calibrate(scorer, &calib_with_responses(&ys), alpha).unwrap();
        assert!(cp.threshold() <= prev, "alpha={alpha}");
        prev = cp.threshold();
    }
}
