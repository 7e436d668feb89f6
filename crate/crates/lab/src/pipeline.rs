//! One (family, N, λ) job: mesh, spaces, blocks, Schur pencil, spectrum.

use serde::Serialize;
use threefield_core::reduce::PencilDiagnostics;
use threefield_core::spectrum::{modulus, SolverDiagnostics, SolveOptions, REAL_TOL};
use threefield_core::{
    assemble_blocks_with, build_dofmap, generate, reduce, solve_schur, AssemblyMode, BoundaryConfig, DofMap,
    ElasticParams, MeanConstraint, MeshFamily, SchurPencil, Spectrum, TriMesh,
};

use crate::config::ExperimentConfig;
use crate::error::LabResult;

#[derive(Debug, Clone)]
pub struct Case {
    pub family: MeshFamily,
    pub n: usize,
    pub params: ElasticParams,
    pub bc: BoundaryConfig,
    pub constraint: MeanConstraint,
    pub seed: u64,
}

impl Case {
    pub fn from_config(cfg: &ExperimentConfig, n: usize, lambda: f64) -> LabResult<Case> {
        Ok(Case {
            family: cfg.mesh_family,
            n,
            params: cfg.params(lambda)?,
            bc: cfg.bc.clone(),
            constraint: cfg.constraint,
            seed: cfg.seed,
        })
    }
}

pub struct Solved {
    pub case: Case,
    pub mesh: TriMesh,
    pub dofmap: DofMap,
    pub pencil: SchurPencil,
    pub spectrum: Spectrum,
}

pub fn bc_label(bc: &BoundaryConfig) -> String {
    match bc {
        BoundaryConfig::DirichletAll => "dirichlet_all".into(),
        BoundaryConfig::Segments(s) => format!("{} tagged segments", s.len()),
    }
}

/// Runs the whole chain for one case. Serial assembly keeps the result
/// bit-reproducible; the column solves inside the pencil build are
/// independent and order-free.
pub fn solve_case(case: &Case, opts: &SolveOptions) -> threefield_core::Result<Solved> {
    let mesh = generate(case.family, case.n, case.seed)?;
    let dofmap = build_dofmap(&mesh, &case.bc, case.constraint)?;
    let blocks = assemble_blocks_with(&mesh, &dofmap, &case.params, AssemblyMode::Serial)?;
    let pencil = reduce(&blocks)?;
    let mut spectrum = solve_schur(&pencil, opts)?;
    spectrum.meta.family = Some(case.family.name().into());
    spectrum.meta.n = Some(case.n);
    spectrum.meta.lambda = Some(case.params.lambda);
    spectrum.meta.mu = Some(case.params.mu);
    spectrum.meta.bc = Some(bc_label(&case.bc));
    Ok(Solved { case: case.clone(), mesh, dofmap, pencil, spectrum })
}

/// JSON summary of one solved case.
#[derive(Debug, Clone, Serialize)]
pub struct CaseRecord {
    pub family: MeshFamily,
    pub n: usize,
    pub h: f64,
    pub lambda: f64,
    pub mu: f64,
    pub bc: String,
    pub constraint: MeanConstraint,
    pub seed: u64,
    pub n_disp: usize,
    pub n_finite: usize,
    pub n_infinite: usize,
    /// Leading finite eigenvalues as `[re, im]`.
    pub leading: Vec<[f64; 2]>,
    pub n_negative_real: usize,
    pub n_non_real: usize,
    pub min_real: f64,
    pub max_modulus: f64,
    pub conjugate_closure_defect: f64,
    pub pencil: PencilDiagnostics,
    pub solver: SolverDiagnostics,
}

impl CaseRecord {
    pub fn new(s: &Solved, n_report: usize) -> CaseRecord {
        let eigs = &s.spectrum.finite_eigs;
        CaseRecord {
            family: s.case.family,
            n: s.case.n,
            h: 1.0 / s.case.n as f64,
            lambda: s.case.params.lambda,
            mu: s.case.params.mu,
            bc: bc_label(&s.case.bc),
            constraint: s.case.constraint,
            seed: s.case.seed,
            n_disp: s.pencil.n_disp(),
            n_finite: eigs.len(),
            n_infinite: s.spectrum.n_infinite,
            leading: eigs.iter().take(n_report).map(|z| [z.re, z.im]).collect(),
            n_negative_real: eigs.iter().filter(|z| z.re < 0.0).count(),
            n_non_real: eigs.iter().filter(|z| z.im.abs() > REAL_TOL * modulus(**z)).count(),
            min_real: eigs.iter().map(|z| z.re).fold(f64::INFINITY, f64::min),
            max_modulus: eigs.iter().map(|z| modulus(*z)).fold(0.0, f64::max),
            conjugate_closure_defect: s.spectrum.conjugate_closure_defect(),
            pencil: s.pencil.diagnostics.clone(),
            solver: s.spectrum.diagnostics.clone(),
        }
    }
}
