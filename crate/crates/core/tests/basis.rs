//! Bernstein basis identities on dense grids and random ranges.

use gplm_bar::bernstein::{bernstein_basis, binomial, build_sieve_block, evaluate_psi, uniform_grid};
use gplm_bar::BasisSpec;
use ndarray::Array2;
use proptest::prelude::*;

const GRID: usize = 1000;

#[test]
fn identities_on_dense_grids() {
    for m in 1..=8 {
        for (lo, hi) in [(0.0, 1.0), (-2.0, 5.0), (1.0, 5.0)] {
            let spec = BasisSpec::new(m, lo, hi).unwrap();
            for z in uniform_grid(&spec, GRID) {
                let values: Vec<f64> = (0..=m).map(|k| bernstein_basis(z, k, &spec).unwrap()).collect();
                let total: f64 = values.iter().sum();
                assert!((total - 1.0).abs() < 1e-12, "m = {m}, z = {z}: sum {total}");
                assert!(values.iter().all(|v| *v >= 0.0), "m = {m}, z = {z}: {values:?}");
                let mirror = lo + hi - z;
                for (k, v) in values.iter().enumerate() {
                    let w = bernstein_basis(mirror, m - k, &spec).unwrap();
                    assert!((v - w).abs() < 1e-12, "m = {m}, k = {k}, z = {z}: {v} vs {w}");
                }
            }
        }
    }
}

#[test]
fn sieve_rows_drop_only_the_constant_basis() {
    let spec = BasisSpec::new(5, 0.0, 2.0).unwrap();
    let z = Array2::from_shape_fn((7, 1), |(i, _)| i as f64 / 3.0);
    let block = build_sieve_block(z.view(), &[spec]).unwrap();
    assert_eq!(block.ncols(), 5);
    for i in 0..7 {
        let z = i as f64 / 3.0;
        let retained: f64 = (0..5).map(|c| block.column(c)[i]).sum();
        let b0 = bernstein_basis(z, 0, &spec).unwrap();
        assert!((retained + b0 - 1.0).abs() < 1e-12);
    }
}

#[test]
fn binomials_match_pascal() {
    for m in 1..=30 {
        for k in 1..m {
            assert_eq!(binomial(m, k), binomial(m - 1, k - 1) + binomial(m - 1, k), "C({m}, {k})");
        }
    }
}

proptest! {
    #[test]
    fn partition_of_unity_on_random_ranges(
        m in 1usize..=8,
        lo in -50.0f64..50.0,
        width in 0.01f64..100.0,
        u in 0.0f64..=1.0,
    ) {
        let spec = BasisSpec::new(m, lo, lo + width).unwrap();
        let z = (lo + u * width).clamp(lo, lo + width);
        let total: f64 = (0..=m).map(|k| bernstein_basis(z, k, &spec).unwrap()).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn equal_gamma_has_a_closed_form_curve(m in 1usize..=8, c in -3.0f64..3.0, u in 0.0f64..=1.0) {
        // With every retained coefficient equal, psi(t) = c (1 - (1 - t)^m),
        // which after centring matches the closed form below.
        let spec = BasisSpec::new(m, 0.0, 1.0).unwrap();
        let psi = evaluate_psi(&vec![c; m], &spec, &[u]).unwrap()[0];
        let expected = c * (0.5f64.powi(m as i32) - (1.0 - u).powi(m as i32));
        prop_assert!((psi - expected).abs() < 1e-12);
    }
}
