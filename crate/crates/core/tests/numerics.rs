mod common;

use common::{expm_eigen, rel_err};
use nalgebra::DMatrix;
use proptest::prelude::*;
use roadid_core::numerics::{checked_covariance, truncated_svd};
use roadid_core::{expm, periodogram_spatial, tsvd_pinv, TruncationPolicy};

fn matrix(rows: usize, cols: usize, scale: f64) -> impl Strategy<Value = DMatrix<f64>> {
    proptest::collection::vec(-scale..scale, rows * cols)
        .prop_map(move |v| DMatrix::from_vec(rows, cols, v))
}

#[test]
fn expm_of_diagonal_is_exact() {
    let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![0.5, -2.0, 0.0]));
    let e = expm(&a).unwrap();
    assert_eq!(e[(0, 0)], 0.5f64.exp());
    assert_eq!(e[(1, 1)], (-2.0f64).exp());
    assert_eq!(e[(2, 2)], 1.0);
    assert_eq!(e[(0, 1)], 0.0);
}

#[test]
fn random_full_rank_pinv_meets_penrose_conditions() {
    let m = DMatrix::from_fn(10, 6, |i, j| ((i * 7 + j * 13) % 11) as f64 - 5.0 + if i == j { 4.0 } else { 0.0 });
    let p = tsvd_pinv(&m, TruncationPolicy::count(6)).unwrap();
    let tol = 1e-10 * m.norm() * p.norm();
    assert!((&m * &p * &m - &m).amax() < tol * m.amax());
    assert!((&p * &m * &p - &p).amax() < tol * p.amax());
    let mp = &m * &p;
    let pm = &p * &m;
    assert!((&mp - mp.transpose()).amax() < 1e-10);
    assert!((&pm - pm.transpose()).amax() < 1e-10);
}

#[test]
fn spatial_spectrum_finds_sinusoid() {
    let spacing = 0.01;
    let x: Vec<f64> = (0..8192)
        .map(|i| (std::f64::consts::TAU * 0.5 * i as f64 * spacing).sin())
        .collect();
    let s = periodogram_spatial(&x, spacing).unwrap();
    let (peak, _) = s
        .power
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .unwrap();
    let resolution = s.freq[1] - s.freq[0];
    assert!((s.freq[peak] - 0.5).abs() <= resolution);
    let total: f64 = s.power.iter().sum();
    assert!((total / 0.5 - 1.0).abs() < 0.05, "sum {total}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn expm_flow_property(a in matrix(4, 4, 2.0), t1 in 0.0..1.0f64, t2 in 0.0..1.0f64) {
        let lhs = expm(&(&a * (t1 + t2))).unwrap();
        let rhs = expm(&(&a * t1)).unwrap() * expm(&(&a * t2)).unwrap();
        prop_assert!(rel_err(&rhs, &lhs) < 1e-10);
    }

    #[test]
    fn expm_matches_eigendecomposition(d in proptest::collection::vec(-3.0..3.0f64, 4), s in matrix(4, 4, 1.0)) {
        // Similarity transform of a diagonal keeps the matrix diagonalisable.
        let s = s + DMatrix::identity(4, 4) * 4.0;
        let a = &s * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(d)) * s.clone().try_inverse().unwrap();
        let e = expm(&a).unwrap();
        prop_assert!(rel_err(&e, &expm_eigen(&a)) < 1e-9);
    }

    #[test]
    fn tsvd_reconstruction_error_is_monotone(m in matrix(8, 5, 3.0)) {
        let mut last = f64::INFINITY;
        for k in 1..=5 {
            let p = tsvd_pinv(&m, TruncationPolicy::count(k)).unwrap();
            let err = (&m * &p * &m - &m).norm();
            prop_assert!(err <= last + 1e-9 * m.norm());
            last = err;
        }
        prop_assert!(last < 1e-9 * m.norm());
    }

    #[test]
    fn count_and_tolerance_agree_at_full_rank(m in matrix(6, 4, 3.0)) {
        let svd = truncated_svd(&m, TruncationPolicy::count(4)).unwrap();
        let smin = svd.spectrum[3] / svd.spectrum[0];
        prop_assume!(smin > 1e-6);
        let a = tsvd_pinv(&m, TruncationPolicy::count(4)).unwrap();
        let b = tsvd_pinv(&m, TruncationPolicy::tolerance(smin * 0.5)).unwrap();
        prop_assert!((a - b).amax() < 1e-12);
    }

    #[test]
    fn products_pass_the_covariance_check(f in matrix(5, 3, 2.0)) {
        let p = &f * f.transpose();
        let s = checked_covariance(&p, 1e-10).unwrap();
        prop_assert_eq!(&s, &s.transpose());
    }
}
