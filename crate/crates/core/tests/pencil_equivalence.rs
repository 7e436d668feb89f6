//! The finite spectrum of the reduced displacement pencil equals the finite
//! spectrum of the full stress/displacement/rotation pencil computed by QZ.

use faer::c64;
use threefield_core::spectrum::{modulus, solve_pencil, spectral_order, Route, SolveOptions};
use threefield_core::*;

fn spectra(family: MeshFamily, n: usize, lambda: f64, constraint: MeanConstraint) -> (Vec<c64>, Vec<c64>) {
    let mesh = generate(family, n, 3).unwrap();
    let dm = build_dofmap(&mesh, &BoundaryConfig::DirichletAll, constraint).unwrap();
    let bs = assemble_blocks(&mesh, &dm, &ElasticParams::new(1.0, lambda).unwrap()).unwrap();
    let pencil = reduce(&bs).unwrap();
    let reduced = solve_schur(&pencil, &SolveOptions::default()).unwrap();
    let (lhs, rhs) = bs.full_pencil();
    let full = solve_pencil(&lhs, &rhs, &SolveOptions { route: Route::Qz, ..Default::default() }).unwrap();
    let mut f = full.finite_eigs;
    f.sort_by(spectral_order);
    (reduced.finite_eigs, f)
}

fn max_rel_diff(a: &[c64], b: &[c64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| modulus(*x - *y) / modulus(*y)).fold(0.0, f64::max)
}

#[test]
fn reduced_and_full_spectra_agree() {
    for n in [2, 3, 4] {
        for lambda in [1.0, 1e2, 1e8] {
            let (r, f) = spectra(MeshFamily::SquareRight, n, lambda, MeanConstraint::Unconstrained);
            assert_eq!(r.len(), f.len(), "N={n} λ={lambda}");
            let d = max_rel_diff(&r, &f);
            eprintln!("N={n} λ={lambda:e}: {} eigenvalues, max rel diff {d:e}", r.len());
            assert!(d < 1e-8, "N={n} λ={lambda}: {d:e}");
        }
    }
}

#[test]
fn qz_and_standard_routes_agree_on_reduced_pencil() {
    for (family, n) in [(MeshFamily::SquareRight, 6), (MeshFamily::SquareNonuniform, 6), (MeshFamily::LshapeLeft, 6)] {
        for lambda in [1.0, 1e4] {
            let mesh = generate(family, n, 3).unwrap();
            let dm = build_dofmap(&mesh, &BoundaryConfig::DirichletAll, MeanConstraint::Unconstrained).unwrap();
            let bs = assemble_blocks(&mesh, &dm, &ElasticParams::new(1.0, lambda).unwrap()).unwrap();
            let pencil = reduce(&bs).unwrap();
            let std = solve_schur(&pencil, &SolveOptions::default()).unwrap();
            let qz = solve_schur(&pencil, &SolveOptions { route: Route::Qz, ..Default::default() }).unwrap();
            assert_eq!(std.finite_eigs.len(), qz.finite_eigs.len());
            let d = max_rel_diff(&std.finite_eigs, &qz.finite_eigs);
            eprintln!("{family} N={n} λ={lambda:e}: max rel diff {d:e}");
            assert!(d < 1e-8, "{family} λ={lambda}: {d:e}");
        }
    }
}
