use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use deconv_gof::measures::{DistributionSpec, ReferenceMeasureSpec, RngStream};
use deconv_gof::nullmodel::{compute_coefficients, duplicated_noise_null, CoefficientMethod, NullSpec};
use deconv_gof::simlab::{build_scenario, run_replications, ScenarioName};
use deconv_gof::teststat::{
    compute_bhat, inv_sqrt_psd, run_test, select_order, t_sequence, Calibration, KMaxPolicy, TestConfig,
};

#[test]
fn bhat_is_centered_under_the_null() {
    let null = build_scenario(ScenarioName::Mod1).unwrap().null_under_test;
    let coeffs = compute_coefficients(&null, 3, CoefficientMethod::ClosedForm).unwrap();
    let reps = 2000;
    let draws: Vec<f64> = (0..reps)
        .map(|r| {
            let data = null.sample_x(RngStream::new(41, r), 500);
            compute_bhat(&data, &null, &coeffs, 1).unwrap()[0]
        })
        .collect();
    let mean = draws.iter().sum::<f64>() / reps as f64;
    let var = draws.iter().map(|b| (b - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
    let stderr = (var / reps as f64).sqrt();
    assert!(mean.abs() < 4.0 * stderr, "mean {mean}, stderr {stderr}");
    // and its variance matches Sigma_11
    assert!((var / coeffs.sigma[0] - 1.0).abs() < 0.1, "{var} vs {}", coeffs.sigma[0]);
}

#[test]
fn pseudo_inverse_on_rank_deficient_matrix() {
    let b = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 0.5, 1.0, -0.3, 2.0, 0.0, 0.7]);
    let sigma = &b * b.transpose();
    let r = inv_sqrt_psd(&sigma, 1e12).unwrap();
    assert_eq!(r.rank, 2);
    let p = &r.matrix * &sigma * &r.matrix;
    // an orthogonal projector of rank 2
    assert!((&p * &p - &p).amax() < 1e-10);
    assert!((p.trace() - 2.0).abs() < 1e-10);
}

#[test]
fn scale_invariance_holds_on_well_conditioned_orders() {
    let null = build_scenario(ScenarioName::Mod2).unwrap().null_under_test;
    let coeffs = compute_coefficients(&null, 5, CoefficientMethod::ClosedForm).unwrap();
    let sigma = coeffs.sigma_matrix();
    let d = [0.3, 7.0, 1.9, 0.05, 12.0];
    for set in 0..10 {
        let data = null.sample_x(RngStream::new(12, set), 100);
        let b = compute_bhat(&data, &null, &coeffs, 5).unwrap();
        let t = t_sequence(&b, &sigma, 1e12).unwrap();
        let sb: Vec<f64> = b.iter().zip(d).map(|(b, d)| b * d).collect();
        let ss = DMatrix::from_fn(5, 5, |i, j| sigma[(i, j)] * d[i] * d[j]);
        let ts = t_sequence(&sb, &ss, 1e12).unwrap();
        for (a, b) in t.iter().zip(&ts) {
            assert!((a - b).abs() < 1e-8);
        }
    }
}

#[test]
fn legendre_null_end_to_end() {
    let half = DistributionSpec::Uniform { low: 0.0, high: 0.5 };
    let null = NullSpec::new(half.clone(), half, ReferenceMeasureSpec::Uniform01, 8).unwrap();
    let config = TestConfig {
        calibration: Calibration::MonteCarlo { reps: 300, seed: 5 },
        ..TestConfig::default()
    };
    let h0 = null.sample_x(RngStream::new(3, 0), 300);
    let r = run_test(&h0, &null, &config).unwrap();
    assert!(r.t_sequence.windows(2).all(|w| w[1] >= w[0]));
    // a uniform sample on [0, 1] is far from the triangular null
    let alt = DistributionSpec::uniform01().sample(RngStream::new(3, 1), 300);
    let r = run_test(&alt, &null, &config).unwrap();
    assert!(r.reject, "{r:?}");
    assert!(run_test(&[1.5], &null, &config).is_err());
}

#[test]
fn dependent_null_end_to_end() {
    let z = DistributionSpec::Exponential { mean: 0.5 };
    let null = duplicated_noise_null(z, ReferenceMeasureSpec::Exponential1, 6).unwrap();
    let config = TestConfig {
        calibration: Calibration::AsymptoticChi2_1,
        kmax_policy: KMaxPolicy::Fixed(4),
        ..TestConfig::default()
    };
    let data = null.sample_x(RngStream::new(8, 0), 200);
    let r = run_test(&data, &null, &config).unwrap();
    assert_eq!(r.used_k_max, 4);
    assert!(r.p_value > 0.0 && r.p_value <= 1.0);
}

#[test]
fn mixture_alternative_has_low_power_at_small_n() {
    let s = build_scenario(ScenarioName::Alt4).unwrap();
    let config = TestConfig {
        calibration: Calibration::MonteCarlo { reps: 1000, seed: 2 },
        ..TestConfig::default()
    };
    let r = run_replications(&s, 50, 1000, &config, 3).unwrap();
    assert!(r.rejection_rate < 0.3, "{}", r.rejection_rate);
    assert_eq!(r.errors, 0);
}

fn psd_from(entries: &[f64], n: usize) -> DMatrix<f64> {
    let b = DMatrix::from_row_slice(n, n, &entries[..n * n]);
    &b * b.transpose() + DMatrix::identity(n, n) * 0.01
}

proptest! {
    #[test]
    fn selected_order_is_the_smallest_maximizer(t in prop::collection::vec(0.0f64..60.0, 1..12), n in 2usize..5000) {
        let s = select_order(&t, n);
        let pen = |k: usize| t[k - 1] - k as f64 * (n as f64).ln();
        for k in 1..=t.len() {
            prop_assert!(pen(k) <= pen(s) + 1e-9);
            if k < s {
                prop_assert!(pen(k) < pen(s));
            }
        }
    }

    #[test]
    fn t_sequence_matches_direct_inversion(
        entries in prop::collection::vec(-1.0f64..1.0, 64),
        b in prop::collection::vec(-4.0f64..4.0, 8),
    ) {
        let sigma = psd_from(&entries, 8);
        let t = t_sequence(&b, &sigma, 1e12).unwrap();
        for k in 1..=8 {
            let inv = sigma.view((0, 0), (k, k)).into_owned().try_inverse().unwrap();
            let v = DVector::from_column_slice(&b[..k]);
            let direct = (v.transpose() * inv * &v)[(0, 0)];
            prop_assert!((direct - t[k - 1]).abs() <= 1e-8 * direct.max(1.0));
            if k > 1 {
                prop_assert!(t[k - 1] >= t[k - 2]);
            }
        }
    }
}
