use faer::prelude::Solve;
use faer::{c64, Mat, Side};
use threefield_core::spectrum::pair_residual;
use threefield_core::*;
use threefield_core::TriMesh;

fn blocks(fam: MeshFamily, n: usize, lambda: f64, constraint: MeanConstraint) -> BlockSystem {
    let mesh = generate(fam, n, 5).unwrap();
    let dm = build_dofmap(&mesh, &BoundaryConfig::DirichletAll, constraint).unwrap();
    assemble_blocks(&mesh, &dm, &ElasticParams::new(1.0, lambda).unwrap()).unwrap()
}

/// Smallest eigenvalue of an SPD matrix by inverse iteration with an LU solve.
fn inverse_iteration_min(a: &Mat<f64>) -> f64 {
    let n = a.nrows();
    let lu = a.partial_piv_lu();
    let mut x = Mat::from_fn(n, 1, |i, _| 1.0 + (i % 7) as f64 * 0.1);
    let mut rq = 0.0;
    for _ in 0..500 {
        let y = lu.solve(&x);
        let norm = y.norm_l2();
        x = y * faer::Scale(1.0 / norm);
        let next = (x.transpose() * a * &x)[(0, 0)];
        if ((next - rq) / next).abs() < 1e-12 {
            return next;
        }
        rq = next;
    }
    rq
}

/// Stress coefficients of the RT0 interpolant of the identity tensor. Its
/// energy is `2 α² |Ω|` with `α` the compliance factor on `I`, which falls
/// below double precision resolution relative to `‖L‖` at λ = 1e8.
fn identity_stress(mesh: &TriMesh, dm: &DofMap) -> Vec<f64> {
    let mut v = vec![0.0; dm.n_stress];
    for (e, edge) in mesh.edges.iter().enumerate() {
        let cell = edge.cells.0;
        let k = mesh.cell_edges[cell].iter().position(|&x| x == e).unwrap();
        let p = mesh.cell_points(cell);
        let n = threefield_core::dof::outward_normal(&p, k);
        for row in 0..2 {
            if let Some(i) = dm.stress_index(row, e) {
                v[i] = mesh.cell_edge_signs[cell][k] * n[row];
            }
        }
    }
    v
}

/// Adds `‖a‖ w wᵀ / ‖w‖²` for the given direction padded with zeros.
fn deflate(a: &Mat<f64>, w: &[f64]) -> Mat<f64> {
    let w2: f64 = w.iter().map(|x| x * x).sum();
    let s = a.norm_l2() / w2;
    let at = |i: usize| w.get(i).copied().unwrap_or(0.0);
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] + s * at(i) * at(j))
}

#[test]
fn full_lhs_is_positive_definite_on_coarse_meshes() {
    for fam in [MeshFamily::SquareRight, MeshFamily::SquareCrossed, MeshFamily::SquareNonuniform, MeshFamily::LshapeLeft] {
        for n in [2, 4] {
            for lambda in [1.0, 1e2, 1e4, 1e8] {
                let mesh = generate(fam, n, 5).unwrap();
                // the L-shape with N = 2 has no free displacement vertex
                let Ok(dm) = build_dofmap(&mesh, &BoundaryConfig::DirichletAll, MeanConstraint::Unconstrained) else {
                    continue;
                };
                let b = assemble_blocks(&mesh, &dm, &ElasticParams::new(1.0, lambda).unwrap()).unwrap();
                let (mut lhs, _) = b.full_pencil();
                let s = (&lhs - lhs.transpose()).norm_max() / lhs.norm_max();
                assert!(s < 1e-12);
                if lambda > 1e4 {
                    lhs = deflate(&lhs, &identity_stress(&mesh, &dm));
                }
                let probe = inverse_iteration_min(&lhs);
                let evd = lhs.self_adjoint_eigen(Side::Lower).unwrap();
                let exact = evd.S()[0];
                assert!(probe > 0.0, "{fam} N={n} λ={lambda}: smallest eigenvalue {probe:e}");
                // the dense solver resolves small eigenvalues only to about eps·‖L‖
                let tol = 1e-6 * probe + 1e-13 * lhs.norm_l2();
                assert!((probe - exact).abs() < tol, "{fam} N={n} λ={lambda}: {probe:e} vs {exact:e}");
            }
        }
    }
}

#[test]
fn constant_rotation_is_not_in_the_kernel() {
    let b = blocks(MeshFamily::SquareRight, 4, 1.0, MeanConstraint::Unconstrained);
    let (lhs, _) = b.full_pencil();
    let off = b.n_stress() + b.n_disp();
    let x = Mat::from_fn(lhs.nrows(), 1, |i, _| if i >= off { 1.0 } else { 0.0 });
    let y = &lhs * &x;
    let f = b.f.diagonal();
    for k in 0..b.n_rot() {
        assert!((y[(off + k, 0)] - f[k]).abs() < 1e-14);
        assert!(f[k] > 0.0);
    }
}

#[test]
fn reduced_stress_operator_is_positive_definite() {
    for lambda in [1.0, 1e2, 1e4, 1e8] {
        let mesh = generate(MeshFamily::SquareRight, 2, 0).unwrap();
        let dm = build_dofmap(&mesh, &BoundaryConfig::DirichletAll, MeanConstraint::Unconstrained).unwrap();
        let b = assemble_blocks(&mesh, &dm, &ElasticParams::new(1.0, lambda).unwrap()).unwrap();
        let t = eliminate_rotation(&b).unwrap();
        let [mut a, ..] = t.to_dense();
        if lambda > 1e4 {
            a = deflate(&a, &identity_stress(&mesh, &dm));
        }
        assert!(a.llt(Side::Lower).is_ok(), "λ={lambda}: dense Cholesky failed");
        let s = a.self_adjoint_eigen(Side::Lower).unwrap().S().column_vector().to_owned();
        let (min, max) = (s[0], s[s.nrows() - 1]);
        assert!(min > 0.0, "λ={lambda}: smallest eigenvalue {min:e}");
        if lambda <= 1e4 {
            eprintln!("λ={lambda:e}: cond(Ã) = {:.3e}", max / min);
        }
        let p = reduce(&b).unwrap();
        eprintln!("λ={lambda:e}: stress factorization {:?}", p.diagnostics.factorization);
    }
}

#[test]
fn pencil_diagnostics_are_reported() {
    for lambda in [1.0, 1e8] {
        let p = reduce(&blocks(MeshFamily::SquareCrossed, 4, lambda, MeanConstraint::Unconstrained)).unwrap();
        assert_eq!(p.diagnostics.n_disp, p.m.nrows());
        assert!(p.diagnostics.m_symmetry_residual < 1e-9);
    }
}

fn check_recovery(p: &SchurPencil, s: &Spectrum, what: &str) {
    let vecs = s.eigvecs.as_ref().unwrap();
    for (gamma, u) in s.finite_eigs.iter().zip(vecs).take(6) {
        let fields = p.recover_fields(*gamma, u).unwrap();
        let r = p.system_residuals(*gamma, &fields, u);
        assert!(r.iter().all(|&x| x < 1e-8), "{what} γ={gamma:?}: residuals {r:?}");
        if gamma.im.abs() <= 1e-12 * gamma.norm() {
            // the real part of a rotated vector is itself an eigenvector
            let k = (0..u.len()).max_by(|&a, &b| u[a].norm().total_cmp(&u[b].norm())).unwrap();
            let phase = u[k].conj() / u[k].norm();
            let ur: Vec<c64> = u.iter().map(|z| c64::new((z * phase).re, 0.0)).collect();
            let r = p.system_residuals(c64::new(gamma.re, 0.0), &p.recover_fields(c64::new(gamma.re, 0.0), &ur).unwrap(), &ur);
            assert!(r.iter().all(|&x| x < 1e-8), "{what}: real part residuals {r:?}");
            let f = p.recover_fields(c64::new(gamma.re, 0.0), &ur).unwrap();
            for v in [&f.sigma, &f.psi] {
                let big = v.iter().fold(0.0f64, |m, z| m.max(z.norm()));
                let im = v.iter().fold(0.0f64, |m, z| m.max(z.im.abs()));
                assert!(im <= 1e-10 * big, "{what}: imaginary part {im:e} of {big:e}");
            }
        }
    }
}

#[test]
fn eigenpairs_and_recovered_fields() {
    let opts = SolveOptions { eigenvectors: true, ..Default::default() };
    for (fam, n) in [(MeshFamily::SquareRight, 4), (MeshFamily::SquareCrossed, 3), (MeshFamily::LshapeUniform, 4)] {
        for lambda in [1.0, 1e2, 1e8] {
            let p = reduce(&blocks(fam, n, lambda, MeanConstraint::Unconstrained)).unwrap();
            let s = solve_schur(&p, &opts).unwrap();
            let what = format!("{fam} N={n} λ={lambda:e}");
            assert_eq!(s.n_total(), p.n_disp(), "{what}");
            assert!(s.conjugate_closure_defect() < 1e-8, "{what}");
            let mnorm = p.m.norm_l2();
            for (g, v) in s.finite_eigs.iter().zip(s.eigvecs.as_ref().unwrap()) {
                let r = pair_residual(&p.m, &p.n_rhs, *g, v) / mnorm;
                assert!(r < 1e-8, "{what} γ={g:?}: residual {r:e}");
            }
            check_recovery(&p, &s, &what);
        }
    }
}

#[test]
fn constrained_mode_recovers_fields() {
    let opts = SolveOptions { eigenvectors: true, ..Default::default() };
    let p = reduce(&blocks(MeshFamily::SquareRight, 4, 1.0, MeanConstraint::Constrained)).unwrap();
    let s = solve_schur(&p, &opts).unwrap();
    check_recovery(&p, &s, "constrained");
}

#[test]
fn mean_constraints_leave_the_spectrum_unchanged() {
    // The RT0 interpolant of the identity lies in the kernel of the coupling
    // blocks, so the trace condition cannot move the spectrum; the rotation
    // condition is observed not to either.
    let free = reduce(&blocks(MeshFamily::SquareRight, 4, 1.0, MeanConstraint::Unconstrained)).unwrap();
    let cons = reduce(&blocks(MeshFamily::SquareRight, 4, 1.0, MeanConstraint::Constrained)).unwrap();
    let sa = solve_schur(&free, &SolveOptions::default()).unwrap();
    let sb = solve_schur(&cons, &SolveOptions::default()).unwrap();
    assert_eq!(sa.finite_eigs.len(), sb.finite_eigs.len());
    let diff = sa
        .finite_eigs
        .iter()
        .zip(&sb.finite_eigs)
        .map(|(a, b)| (a - b).norm() / a.norm())
        .fold(0.0, f64::max);
    assert!(diff < 1e-10, "constrained vs unconstrained: max relative difference {diff:e}");
}

#[test]
fn repeated_solves_are_identical() {
    let p = reduce(&blocks(MeshFamily::SquareNonuniform, 4, 1e4, MeanConstraint::Unconstrained)).unwrap();
    let a = solve_schur(&p, &SolveOptions::default()).unwrap();
    let b = solve_schur(&p, &SolveOptions::default()).unwrap();
    assert_eq!(a.finite_eigs.len(), b.finite_eigs.len());
    for (x, y) in a.finite_eigs.iter().zip(&b.finite_eigs) {
        assert!((x - y).norm() <= 1e-12 * x.norm());
    }
}
