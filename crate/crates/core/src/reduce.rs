//! Rotation elimination and the displacement Schur pencil.
//!
//! Eliminating ψ = -F⁻¹(Cσ + Eu) gives
//!
//! ```text
//! Ã = A - CᵀF⁻¹C    B̃ = Bᵀ - CᵀF⁻¹E    C̃ = B - EᵀF⁻¹C    D̃ = D - EᵀF⁻¹E
//! ```
//!
//! and eliminating σ then leaves `(C̃Ã⁻¹B̃ - D̃) u = γ C̃Ã⁻¹G u`.
//!
//! In constrained mode the rotation mean is removed by replacing F⁻¹ with
//! `F⁻¹ - F⁻¹ccᵀF⁻¹ / cᵀF⁻¹c`, which adds rank-one terms to every tilde
//! matrix, and the stress trace mean is enforced by restricting Ã⁻¹ to the
//! complement of the trace constraint.

use std::io::Write;
use std::ops::Range;

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::LltError;
use faer::sparse::linalg::solvers::{Llt, Lu};
use faer::{c64, Mat, MatMut, Side};
use rayon::prelude::*;
use serde::Serialize;

use crate::assemble::BlockSystem;
use crate::error::{Error, Result};
use crate::sparse::{write_dense_matrix_market, CsrMatrix};

/// Rank-one terms from the rotation mean constraint.
#[derive(Debug, Clone)]
pub struct RotationMeanCorrection {
    /// `CᵀF⁻¹c`
    pub stress: Vec<f64>,
    /// `EᵀF⁻¹c`
    pub disp: Vec<f64>,
    /// `cᵀF⁻¹c`
    pub rho: f64,
}

/// Sparse parts of Ã, B̃, C̃, D̃ plus the optional constraint data.
#[derive(Debug, Clone)]
pub struct TildeMatrices {
    pub a: CsrMatrix,
    /// n_stress x n_disp
    pub b: CsrMatrix,
    /// n_disp x n_stress, formed independently of `b`
    pub c: CsrMatrix,
    pub d: CsrMatrix,
    pub f_inv: Vec<f64>,
    pub rotation_mean: Option<RotationMeanCorrection>,
    pub stress_mean: Option<Vec<f64>>,
}

impl TildeMatrices {
    pub fn n_stress(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_disp(&self) -> usize {
        self.d.nrows()
    }

    /// Dense Ã, B̃, C̃, D̃ including rank-one corrections.
    pub fn to_dense(&self) -> [Mat<f64>; 4] {
        let mut out = [self.a.to_dense(), self.b.to_dense(), self.c.to_dense(), self.d.to_dense()];
        if let Some(r) = &self.rotation_mean {
            let pairs: [(&[f64], &[f64]); 4] = [
                (&r.stress, &r.stress),
                (&r.stress, &r.disp),
                (&r.disp, &r.stress),
                (&r.disp, &r.disp),
            ];
            for (m, (x, y)) in out.iter_mut().zip(pairs) {
                for i in 0..x.len() {
                    for j in 0..y.len() {
                        m[(i, j)] += x[i] * y[j] / r.rho;
                    }
                }
            }
        }
        out
    }

    /// `B̃ u`
    pub fn apply_b(&self, u: &[f64]) -> Vec<f64> {
        let mut out = self.b.mul_vec(u);
        if let Some(r) = &self.rotation_mean {
            let s = dot(&r.disp, u) / r.rho;
            axpy(s, &r.stress, &mut out);
        }
        out
    }

    /// Effective `F⁻¹ x`, including the rotation mean projection.
    pub fn apply_f_inv(&self, x: &[f64], rot_mean: Option<&[f64]>) -> Vec<f64> {
        let mut out: Vec<f64> = x.iter().zip(&self.f_inv).map(|(x, f)| x * f).collect();
        if let (Some(r), Some(c)) = (&self.rotation_mean, rot_mean) {
            let s = dot(c, &out) / r.rho;
            for (o, (ci, fi)) in out.iter_mut().zip(c.iter().zip(&self.f_inv)) {
                *o -= s * ci * fi;
            }
        }
        out
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn eliminate_rotation(blocks: &BlockSystem) -> Result<TildeMatrices> {
    let f = &blocks.f;
    if f.nnz() != f.nrows() || f.iter().any(|(i, j, _)| i != j) {
        return Err(Error::InvalidArgument("rotation mass matrix must be diagonal".into()));
    }
    let diag = f.diagonal();
    if let Some((index, &value)) = diag.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(Error::RotationMassNotInvertible { index, value });
    }
    let f_inv: Vec<f64> = diag.iter().map(|v| 1.0 / v).collect();

    let ct = blocks.c.transpose();
    let et = blocks.e.transpose();
    let finv_c = blocks.c.scale_rows(&f_inv);
    let finv_e = blocks.e.scale_rows(&f_inv);

    let a = blocks.a.add_scaled(-1.0, &ct.mul_sparse(&finv_c));
    let b = blocks.b.transpose().add_scaled(-1.0, &ct.mul_sparse(&finv_e));
    let c = blocks.b.add_scaled(-1.0, &et.mul_sparse(&finv_c));
    let d = blocks.d.add_scaled(-1.0, &et.mul_sparse(&finv_e));

    let rotation_mean = blocks.rot_mean.as_ref().map(|cm| {
        let finv_cm: Vec<f64> = cm.iter().zip(&f_inv).map(|(c, f)| c * f).collect();
        RotationMeanCorrection {
            stress: ct.mul_vec(&finv_cm),
            disp: et.mul_vec(&finv_cm),
            rho: dot(cm, &finv_cm),
        }
    });

    Ok(TildeMatrices { a, b, c, d, f_inv, rotation_mean, stress_mean: blocks.stress_mean.clone() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FactorMethod {
    Cholesky,
    /// Partial-pivoting LU, used when the Cholesky factorization breaks down.
    Lu,
}

#[derive(Debug)]
enum Factor {
    Cholesky(Llt<usize, f64>),
    Lu(Lu<usize, f64>),
}

#[derive(Debug)]
struct RankOne {
    a: Vec<f64>,
    /// `Ã₀⁻¹ a`
    z: Vec<f64>,
    /// `1 / (ρ + aᵀz)`
    inv_denom: f64,
}

#[derive(Debug)]
struct Projection {
    c: Vec<f64>,
    /// `Ã⁻¹ c / cᵀÃ⁻¹c`
    w: Vec<f64>,
}

/// Solver for `Ã x = r` sharing one sparse factorization.
#[derive(Debug)]
pub struct StressSolver {
    factor: Factor,
    n: usize,
    rank_one: Option<RankOne>,
    projection: Option<Projection>,
    pub method: FactorMethod,
    /// Pivot index reported by the failed Cholesky attempt, if any.
    pub cholesky_failure: Option<usize>,
}

impl StressSolver {
    pub fn new(tilde: &TildeMatrices) -> Result<Self> {
        let n = tilde.n_stress();
        let sparse = tilde.a.to_faer();
        let (factor, method, cholesky_failure) = match sparse.sp_cholesky(Side::Lower) {
            Ok(llt) => (Factor::Cholesky(llt), FactorMethod::Cholesky, None),
            Err(err) => {
                let pivot = match err {
                    LltError::Numeric(faer::linalg::cholesky::llt::factor::LltError::NonPositivePivot {
                        index,
                    }) => Some(index),
                    LltError::Generic(_) => None,
                };
                let lu = sparse.sp_lu().map_err(|e| Error::Factorization {
                    what: format!("stress block LU after Cholesky breakdown: {e:?}"),
                    pivot: match e {
                        faer::sparse::linalg::LuError::SymbolicSingular { index } => Some(index),
                        _ => pivot,
                    },
                })?;
                (Factor::Lu(lu), FactorMethod::Lu, pivot)
            }
        };
        let mut solver = StressSolver { factor, n, rank_one: None, projection: None, method, cholesky_failure };
        if let Some(r) = &tilde.rotation_mean {
            let z = solver.solve_vec(&r.stress);
            let denom = r.rho + dot(&r.stress, &z);
            solver.rank_one = Some(RankOne { a: r.stress.clone(), z, inv_denom: 1.0 / denom });
        }
        if let Some(c) = &tilde.stress_mean {
            let mut w = solver.solve_vec(c);
            let s = dot(c, &w);
            if !(s.abs() > 0.0) || !s.is_finite() {
                return Err(Error::Factorization {
                    what: "stress trace constraint is degenerate".into(),
                    pivot: None,
                });
            }
            w.iter_mut().for_each(|x| *x /= s);
            solver.projection = Some(Projection { c: c.clone(), w });
        }
        Ok(solver)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Overwrites each column of `rhs` with the constrained solution.
    pub fn solve_in_place(&self, mut rhs: MatMut<'_, f64>) {
        assert_eq!(rhs.nrows(), self.n);
        match &self.factor {
            Factor::Cholesky(f) => f.solve_in_place(rhs.as_mut()),
            Factor::Lu(f) => f.solve_in_place(rhs.as_mut()),
        }
        for j in 0..rhs.ncols() {
            let col = rhs.as_mut().col_mut(j).try_as_col_major_mut().unwrap().as_slice_mut();
            if let Some(r) = &self.rank_one {
                let s = dot(&r.a, col) * r.inv_denom;
                axpy(-s, &r.z, col);
            }
            if let Some(p) = &self.projection {
                let s = dot(&p.c, col);
                axpy(-s, &p.w, col);
            }
        }
    }

    pub fn solve_vec(&self, rhs: &[f64]) -> Vec<f64> {
        let mut m = Mat::from_fn(rhs.len(), 1, |i, _| rhs[i]);
        self.solve_in_place(m.as_mut());
        m.col(0).iter().copied().collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PencilDiagnostics {
    pub n_stress: usize,
    pub n_disp: usize,
    pub factorization: FactorMethod,
    pub cholesky_failure_pivot: Option<usize>,
    /// `max |M - Mᵀ| / max |M|`
    pub m_symmetry_residual: f64,
}

/// Dense displacement pencil `M u = γ N u` with everything needed for recovery.
#[derive(Debug)]
pub struct SchurPencil {
    pub m: Mat<f64>,
    pub n_rhs: Mat<f64>,
    pub tilde: TildeMatrices,
    pub blocks: BlockSystem,
    solver: StressSolver,
    pub diagnostics: PencilDiagnostics,
}

const COLUMN_CHUNK: usize = 64;

pub fn build_schur_pencil(blocks: &BlockSystem, tilde: TildeMatrices) -> Result<SchurPencil> {
    let (ns, nd) = (tilde.n_stress(), tilde.n_disp());
    if blocks.g.shape() != (ns, nd) || tilde.c.shape() != (nd, ns) {
        return Err(Error::DimensionMismatch(format!(
            "G is {:?}, C̃ is {:?}, expected ({ns}, {nd}) and ({nd}, {ns})",
            blocks.g.shape(),
            tilde.c.shape()
        )));
    }
    let solver = StressSolver::new(&tilde)?;
    let bt = tilde.b.transpose();
    let gt = blocks.g.transpose();
    let dt = tilde.d.transpose();

    let chunks: Vec<Range<usize>> =
        (0..nd).step_by(COLUMN_CHUNK).map(|s| s..(s + COLUMN_CHUNK).min(nd)).collect();
    let parts: Vec<(Mat<f64>, Mat<f64>)> = chunks
        .par_iter()
        .map(|cols| pencil_columns(&tilde, &solver, &bt, &gt, &dt, cols.clone()))
        .collect();

    let mut m = Mat::<f64>::zeros(nd, nd);
    let mut n_rhs = Mat::<f64>::zeros(nd, nd);
    for (cols, (mc, nc)) in chunks.iter().zip(parts) {
        for (k, j) in cols.clone().enumerate() {
            for i in 0..nd {
                m[(i, j)] = mc[(i, k)];
                n_rhs[(i, j)] = nc[(i, k)];
            }
        }
    }
    let diagnostics = PencilDiagnostics {
        n_stress: ns,
        n_disp: nd,
        factorization: solver.method,
        cholesky_failure_pivot: solver.cholesky_failure,
        m_symmetry_residual: relative_symmetry_residual(&m),
    };
    Ok(SchurPencil { m, n_rhs, tilde, blocks: blocks.clone(), solver, diagnostics })
}

/// Eliminates rotation and stress in one call.
pub fn reduce(blocks: &BlockSystem) -> Result<SchurPencil> {
    build_schur_pencil(blocks, eliminate_rotation(blocks)?)
}

fn pencil_columns(
    tilde: &TildeMatrices,
    solver: &StressSolver,
    bt: &CsrMatrix,
    gt: &CsrMatrix,
    dt: &CsrMatrix,
    cols: Range<usize>,
) -> (Mat<f64>, Mat<f64>) {
    let (ns, nd) = (tilde.n_stress(), tilde.n_disp());
    let k = cols.len();
    // columns [0, k) hold B̃, columns [k, 2k) hold G
    let mut rhs = Mat::<f64>::zeros(ns, 2 * k);
    for (jl, j) in cols.clone().enumerate() {
        for (i, v) in bt.row(j) {
            rhs[(i, jl)] = v;
        }
        if let Some(r) = &tilde.rotation_mean {
            let s = r.disp[j] / r.rho;
            for i in 0..ns {
                rhs[(i, jl)] += s * r.stress[i];
            }
        }
        for (i, v) in gt.row(j) {
            rhs[(i, k + jl)] = v;
        }
    }
    solver.solve_in_place(rhs.as_mut());
    let mut prod = tilde.c.mul_dense(&rhs);
    if let Some(r) = &tilde.rotation_mean {
        for jl in 0..2 * k {
            let s = dot(&r.stress, rhs.col(jl).try_as_col_major().unwrap().as_slice()) / r.rho;
            for i in 0..nd {
                prod[(i, jl)] += s * r.disp[i];
            }
        }
    }
    let mut m = Mat::<f64>::zeros(nd, k);
    let mut n = Mat::<f64>::zeros(nd, k);
    for (jl, j) in cols.enumerate() {
        for i in 0..nd {
            m[(i, jl)] = prod[(i, jl)];
            n[(i, jl)] = prod[(i, k + jl)];
        }
        for (i, v) in dt.row(j) {
            m[(i, jl)] -= v;
        }
        if let Some(r) = &tilde.rotation_mean {
            let s = r.disp[j] / r.rho;
            for i in 0..nd {
                m[(i, jl)] -= s * r.disp[i];
            }
        }
    }
    (m, n)
}

pub fn relative_symmetry_residual(m: &Mat<f64>) -> f64 {
    let n = m.nrows();
    let mut num = 0.0f64;
    let mut den = 0.0f64;
    for j in 0..n {
        for i in 0..n {
            num = num.max((m[(i, j)] - m[(j, i)]).abs());
            den = den.max(m[(i, j)].abs());
        }
    }
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Stress and rotation parts of an eigenfield.
#[derive(Debug, Clone)]
pub struct RecoveredFields {
    pub sigma: Vec<c64>,
    pub psi: Vec<c64>,
}

fn split(v: &[c64]) -> (Vec<f64>, Vec<f64>) {
    (v.iter().map(|z| z.re).collect(), v.iter().map(|z| z.im).collect())
}

fn join(re: &[f64], im: &[f64]) -> Vec<c64> {
    re.iter().zip(im).map(|(&r, &i)| c64::new(r, i)).collect()
}

pub(crate) fn cnorm(v: &[c64]) -> f64 {
    v.iter().map(|z| z.re * z.re + z.im * z.im).sum::<f64>().sqrt()
}

impl SchurPencil {
    pub fn n_disp(&self) -> usize {
        self.m.nrows()
    }

    pub fn solver(&self) -> &StressSolver {
        &self.solver
    }

    /// Back-substitution `Ãσ = γGu - B̃u`, `ψ = -F⁻¹(Cσ + Eu)`.
    pub fn recover_fields(&self, gamma: c64, u: &[c64]) -> Result<RecoveredFields> {
        if u.len() != self.n_disp() {
            return Err(Error::DimensionMismatch(format!(
                "displacement vector has length {}, pencil has {}",
                u.len(),
                self.n_disp()
            )));
        }
        let norm = cnorm(u);
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::InvalidEigenvector("displacement vector must be nonzero".into()));
        }
        let (ur, ui) = split(u);
        let (gr, gi) = (self.blocks.g.mul_vec(&ur), self.blocks.g.mul_vec(&ui));
        let (br, bi) = (self.tilde.apply_b(&ur), self.tilde.apply_b(&ui));
        let ns = self.tilde.n_stress();
        let mut rhs = Mat::<f64>::zeros(ns, 2);
        for i in 0..ns {
            rhs[(i, 0)] = gamma.re * gr[i] - gamma.im * gi[i] - br[i];
            rhs[(i, 1)] = gamma.re * gi[i] + gamma.im * gr[i] - bi[i];
        }
        self.solver.solve_in_place(rhs.as_mut());
        let sr: Vec<f64> = rhs.col(0).iter().copied().collect();
        let si: Vec<f64> = rhs.col(1).iter().copied().collect();
        let rot = |s: &[f64], u: &[f64]| {
            let mut x = self.blocks.c.mul_vec(s);
            axpy(1.0, &self.blocks.e.mul_vec(u), &mut x);
            let mut y = self.tilde.apply_f_inv(&x, self.blocks.rot_mean.as_deref());
            y.iter_mut().for_each(|v| *v = -*v);
            y
        };
        let (pr, pi) = (rot(&sr, &ur), rot(&si, &ui));
        Ok(RecoveredFields { sigma: join(&sr, &si), psi: join(&pr, &pi) })
    }

    /// Residuals of the three block rows of the full system divided by `‖u‖`.
    /// In constrained mode the components along the constraint vectors,
    /// which the multipliers absorb, are removed first.
    pub fn system_residuals(&self, gamma: c64, fields: &RecoveredFields, u: &[c64]) -> [f64; 3] {
        let b = &self.blocks;
        let (sr, si) = split(&fields.sigma);
        let (ur, ui) = split(u);
        let (pr, pi) = split(&fields.psi);
        let bt = b.b.transpose();
        let ct = b.c.transpose();
        let et = b.e.transpose();
        let rows = |s: &[f64], u: &[f64], p: &[f64]| -> [Vec<f64>; 3] {
            let mut r1 = b.a.mul_vec(s);
            axpy(1.0, &bt.mul_vec(u), &mut r1);
            axpy(1.0, &ct.mul_vec(p), &mut r1);
            let mut r2 = b.b.mul_vec(s);
            axpy(1.0, &b.d.mul_vec(u), &mut r2);
            axpy(1.0, &et.mul_vec(p), &mut r2);
            let mut r3 = b.c.mul_vec(s);
            axpy(1.0, &b.e.mul_vec(u), &mut r3);
            axpy(1.0, &b.f.mul_vec(p), &mut r3);
            [r1, r2, r3]
        };
        let [mut r1r, r2r, mut r3r] = rows(&sr, &ur, &pr);
        let [mut r1i, r2i, mut r3i] = rows(&si, &ui, &pi);
        let (gr, gi) = (b.g.mul_vec(&ur), b.g.mul_vec(&ui));
        for i in 0..r1r.len() {
            r1r[i] -= gamma.re * gr[i] - gamma.im * gi[i];
            r1i[i] -= gamma.re * gi[i] + gamma.im * gr[i];
        }
        let project = |c: &Option<Vec<f64>>, v: &mut Vec<f64>| {
            if let Some(c) = c {
                let s = dot(c, v) / dot(c, c);
                axpy(-s, c, v);
            }
        };
        project(&b.stress_mean, &mut r1r);
        project(&b.stress_mean, &mut r1i);
        project(&b.rot_mean, &mut r3r);
        project(&b.rot_mean, &mut r3i);
        let un = cnorm(u);
        let nrm = |a: &[f64], b: &[f64]| (dot(a, a) + dot(b, b)).sqrt() / un;
        [nrm(&r1r, &r1i), nrm(&r2r, &r2i), nrm(&r3r, &r3i)]
    }

    pub fn write_matrix_market<W1: Write, W2: Write>(&self, m: W1, n: W2) -> std::io::Result<()> {
        write_dense_matrix_market(&self.m, m)?;
        write_dense_matrix_market(&self.n_rhs, n)
    }
}
