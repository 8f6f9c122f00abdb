use ncorr_core::contour::{correlation_contour_q1, BigF, ContourSpec};
use ncorr_core::empirical::{determinantal_wrapped, mc_wrapped_weighted, WrapMode};
use ncorr_core::rmt::{read_samples, sample_many, write_samples};
use ncorr_core::rs_main::rs_main;
use ncorr_core::test_functions::{PhiSpec, WeightSpec};
use ncorr_core::zeta::{load_zeros, zeta_n_correlation};
use proptest::prelude::*;
use std::path::Path;

fn pair(nm: usize, t: f64, width: f64) -> BigF {
    BigF::uniform(PhiSpec::new(2, 1.0, 0.2, width, 1.0).unwrap(), 1.0, nm, t).unwrap()
}

#[test]
fn single_level_routes_coincide() {
    let f = BigF::uniform(PhiSpec::new(1, 1.0, 0.2, 0.7, 1.3).unwrap(), 1.0, 7, 3.0).unwrap();
    let c = correlation_contour_q1(&f, &ContourSpec::default()).unwrap().value.re;
    let d = determinantal_wrapped(&f, None).unwrap().value.re;
    let m = rs_main(&f).unwrap();
    assert!((c - d).abs() < 1e-10 * d && (m - d).abs() < 1e-10 * d, "{c} {d} {m}");
}

#[test]
fn pair_contour_matches_determinant_at_small_size() {
    for (nm, t) in [(6, 4.0), (10, 7.5)] {
        let f = pair(nm, t, 0.8);
        let c = correlation_contour_q1(&f, &ContourSpec::default()).unwrap().value;
        let d = determinantal_wrapped(&f, None).unwrap().value;
        assert!((c - d).norm() < 1e-8 * d.norm(), "N = {nm}: {c} vs {d}");
    }
}

#[test]
fn main_term_residual_falls_with_matrix_size() {
    // exact minus main term grows like T/N, so relative to the N·T main term it is O(1/N²)
    let gap = |nm: usize, t: f64| {
        let f = pair(nm, t, 0.9);
        let exact = determinantal_wrapped(&f, None).unwrap().value.re;
        (exact - rs_main(&f).unwrap()) / exact
    };
    let (small, large) = (gap(12, 10.0), gap(24, 10.0));
    assert!(small < 0.0 && large < 0.0);
    let ratio = small / large;
    assert!((3.0..5.0).contains(&ratio), "{small} {large}");
    assert!((gap(12, 40.0) / small - 1.0).abs() < 0.1);
}

#[test]
fn cached_samples_reproduce_the_estimate() {
    let f = pair(5, 3.0, 0.9);
    let samples = sample_many(5, 200, 77).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cache.txt");
    write_samples(&path, 5, &samples).unwrap();
    let (_, back) = read_samples(&path).unwrap();
    let a = mc_wrapped_weighted(&samples, &f, WrapMode::Resummed).unwrap();
    let b = mc_wrapped_weighted(&back, &f, WrapMode::Resummed).unwrap();
    assert_eq!(a.value, b.value);
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 6, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn zeta_pair_sum_is_linear_in_amplitude(c in 0.2f64..3.0) {
        let zeros = load_zeros(&Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/zeros_2000.txt")).unwrap();
        let w = WeightSpec::new(4.0).unwrap();
        let weights = vec![w.clone(), w];
        let run = |amp: f64| {
            let phi = PhiSpec::new(2, 1.0, 0.2, 0.8, amp).unwrap();
            zeta_n_correlation(&zeros, &phi, &weights, 30.0, false).unwrap()
        };
        let (one, scaled) = (run(1.0), run(c));
        prop_assert!((scaled.prediction - c * one.prediction).abs() <= 1e-14 * scaled.prediction.abs());
        prop_assert!((scaled.value - c * one.value).abs() <= 1e-10 * scaled.value.abs());
    }
}
