use faer::Mat;
use proptest::prelude::*;
use threefield_core::spectrum::{count_in_disk, modulus, pair_residual, spectral_order, Route};
use threefield_core::{solve_pencil, SolveOptions};

fn pencil() -> impl Strategy<Value = (Mat<f64>, Mat<f64>)> {
    (2usize..9).prop_flat_map(|n| {
        (
            prop::collection::vec(-1.0f64..1.0, n * n),
            prop::collection::vec(-1.0f64..1.0, n * n),
            0usize..n,
        )
            .prop_map(move |(a, b, rank_drop)| {
                // M negative definite, N with `rank_drop` zero columns
                let r = Mat::from_fn(n, n, |i, j| a[i * n + j]);
                let m = Mat::from_fn(n, n, |i, j| if i == j { -(n as f64) } else { 0.0 }) - &r * r.transpose();
                let nn = Mat::from_fn(n, n, |i, j| if j < rank_drop { 0.0 } else { b[i * n + j] });
                (m, nn)
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_pencils_are_well_formed((m, n) in pencil(), qz in any::<bool>()) {
        let route = if qz { Route::Qz } else { Route::Standard };
        let opts = SolveOptions { route, eigenvectors: true, ..Default::default() };
        let s = match solve_pencil(&m, &n, &opts) {
            Ok(s) => s,
            Err(threefield_core::Error::EmptyFiniteSpectrum(_)) => return Ok(()),
            Err(e) => return Err(TestCaseError::fail(format!("{e}"))),
        };
        prop_assert_eq!(s.n_total(), m.nrows());
        prop_assert!(s.conjugate_closure_defect() < 1e-8);
        for w in s.finite_eigs.windows(2) {
            prop_assert!(spectral_order(&w[0], &w[1]) != std::cmp::Ordering::Greater);
        }
        let mnorm = m.norm_l2();
        for (g, v) in s.finite_eigs.iter().zip(s.eigvecs.as_ref().unwrap()) {
            prop_assert!(pair_residual(&m, &n, *g, v) / (mnorm * (1.0 + modulus(*g) * n.norm_l2() / mnorm)) < 1e-8);
        }
        let r = s.finite_eigs.last().map_or(1.0, |z| modulus(*z)) * 1.5;
        prop_assert_eq!(count_in_disk(&s.finite_eigs, r), s.finite_eigs.len());
    }
}
