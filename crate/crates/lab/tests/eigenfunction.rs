use faer::c64;
use threefield_core::{MeshFamily, SolveOptions};
use threefield_lab::eigenfunction::{csv, eigen_field, record, run_eigenfunction, vtk};
use threefield_lab::{solve_case, ExperimentConfig};

fn config(family: MeshFamily, n: usize, lambda: f64) -> ExperimentConfig {
    ExperimentConfig { mesh_family: family, n_list: vec![n], lambda_list: vec![lambda], ..Default::default() }
}

fn solved(family: MeshFamily, n: usize, lambda: f64) -> threefield_lab::Solved {
    let cfg = config(family, n, lambda);
    let case = threefield_lab::Case::from_config(&cfg, n, lambda).unwrap();
    solve_case(&case, &SolveOptions { eigenvectors: true, ..Default::default() }).unwrap()
}

#[test]
fn first_eigenfunction_on_perturbed_lshape() {
    let s = solved(MeshFamily::LshapeNonuniform, 16, 100.0);
    let f = eigen_field(&s, 1).unwrap();
    assert!(!f.complex);
    let r = record(&s, &f, 1);
    assert!((r.max_displacement - 1.0).abs() < 1e-12, "{}", r.max_displacement);
    assert_eq!(r.dirichlet_max_displacement, 0.0);
    assert!(r.rotation_min < 0.0 && r.rotation_max > 0.0, "rotation in [{}, {}]", r.rotation_min, r.rotation_max);
    // the largest displacement component is positive
    let big = f
        .u
        .iter()
        .flatten()
        .copied()
        .max_by(|a, b| a.norm().total_cmp(&b.norm()))
        .unwrap();
    assert!(big.re > 0.0 && big.im == 0.0);

    let v = vtk(&s, &f);
    assert!(v.contains(&format!("POINT_DATA {}", s.mesh.n_vertices())));
    assert!(v.contains(&format!("CELL_DATA {}", s.mesh.n_cells())));
    assert!(v.contains("VECTORS displacement double") && v.contains("SCALARS rotation double 1"));
    let (pts, cells) = csv(&s, &f);
    assert_eq!(pts.lines().count(), s.mesh.n_vertices() + 1);
    assert_eq!(cells.lines().count(), s.mesh.n_cells() + 1);
}

#[test]
fn exported_field_satisfies_the_pencil() {
    let s = solved(MeshFamily::SquareCrossed, 4, 1.0);
    for which in 1..=4 {
        let f = eigen_field(&s, which).unwrap();
        let u: Vec<c64> = (0..s.pencil.n_disp())
            .map(|i| {
                let v = (0..s.mesh.n_vertices())
                    .flat_map(|v| (0..2).map(move |c| (v, c)))
                    .find(|&(v, c)| s.dofmap.disp_block_index(c, v) == Some(i))
                    .unwrap();
                f.u[v.0][v.1]
            })
            .collect();
        let r = threefield_core::spectrum::pair_residual(&s.pencil.m, &s.pencil.n_rhs, f.gamma, &u);
        assert!(r / s.pencil.m.norm_l2() < 1e-8, "eigenpair {which}: residual {r:e}");
    }
}

#[test]
fn out_of_range_selection_is_a_usage_error() {
    let s = solved(MeshFamily::SquareRight, 2, 1.0);
    assert!(matches!(eigen_field(&s, 0), Err(threefield_lab::LabError::Usage(_))));
    assert!(matches!(eigen_field(&s, 99), Err(threefield_lab::LabError::Usage(_))));
}

#[test]
fn export_writes_named_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(MeshFamily::SquareNonuniform, 4, 1e4);
    let report = run_eigenfunction(&cfg, 2, dir.path()).unwrap();
    assert_eq!(report.records.len(), 1);
    for name in &report.records[0].files {
        assert!(dir.path().join(name).exists(), "{name}");
    }
    assert!(report.records[0].files[0].starts_with("eigenfunction2_N4_lam1e4"));
    assert!(dir.path().join("report.json").exists());
}
