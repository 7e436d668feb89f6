//! Element and global assembly of the seven operator blocks
//!
//! ```text
//! A: (Aσ, Aτ) + (div σ, div τ) + (as σ, as τ)      stress x stress
//! B: -(Aσ, ∇v)                                      disp   x stress
//! C: (Aσ, χφ)                                       rot    x stress
//! D: (∇u, ∇v)                                       disp   x disp
//! E: -(∇u, χφ)                                      rot    x disp
//! F: (χψ, χφ) = 2ψφ                                 rot    x rot
//! G: -(u, div τ)                                    stress x disp
//! ```
//!
//! where `A` inside the forms is the compliance tensor and χ = [[0, -1], [1, 0]].
//! The pencil is
//!
//! ```text
//! [A  Bᵀ Cᵀ] [σ]     [0 G 0] [σ]
//! [B  D  Eᵀ] [u] = γ [0 0 0] [u]
//! [C  E  F ] [ψ]     [0 0 0] [ψ]
//! ```

use faer::Mat;
use rayon::prelude::*;

use crate::dof::{p1_gradients, rt0_basis_on_cell, DofMap, ElasticParams, MeanConstraint};
use crate::error::{Error, Result};
use crate::mesh::{Point, TriMesh};
use crate::sparse::{CsrMatrix, Triplets};

pub type Tensor2 = [[f64; 2]; 2];

pub const MIN_CELL_AREA: f64 = 1e-14;

/// `(1/2μ) (τ - λ/(2λ + 2μ) tr(τ) I)`.
pub fn compliance_apply(tau: &Tensor2, params: &ElasticParams) -> Tensor2 {
    let d = ElasticParams::DIM as f64;
    let tr = tau[0][0] + tau[1][1];
    let shift = params.lambda / (d * params.lambda + 2.0 * params.mu) * tr;
    let s = 1.0 / (2.0 * params.mu);
    [
        [s * (tau[0][0] - shift), s * tau[0][1]],
        [s * tau[1][0], s * (tau[1][1] - shift)],
    ]
}

fn frobenius(a: &Tensor2, b: &Tensor2) -> f64 {
    a[0][0] * b[0][0] + a[0][1] * b[0][1] + a[1][0] * b[1][0] + a[1][1] * b[1][1]
}

/// `X : χ` for χ = [[0, -1], [1, 0]].
fn contract_chi(x: &Tensor2) -> f64 {
    x[1][0] - x[0][1]
}

/// `s(τ) = τ₂₁ - τ₁₂`; `(as σ, as τ) = ½ s(σ) s(τ)`.
fn skew_scalar(t: &Tensor2) -> f64 {
    t[1][0] - t[0][1]
}

pub type Local6 = [[f64; 6]; 6];

/// Element matrices. Stress local index is `3 * row + local_edge`,
/// displacement local index is `3 * component + local_vertex`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalBlocks {
    pub a: Local6,
    /// rows: displacement, columns: stress
    pub b: Local6,
    pub c: [f64; 6],
    pub d: Local6,
    pub e: [f64; 6],
    pub f: f64,
    /// rows: stress, columns: displacement
    pub g: Local6,
}

/// The three terms of the stress block, kept separate for verification.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StressTerms {
    pub compliance: Local6,
    pub divergence: Local6,
    pub skew: Local6,
}

/// Edge midpoints and equal weights `|K|/3`; exact for quadratics.
pub fn midpoint_rule(points: &[Point; 3]) -> [Point; 3] {
    let mut q = [[0.0; 2]; 3];
    for k in 0..3 {
        let a = points[(k + 1) % 3];
        let b = points[(k + 2) % 3];
        q[k] = [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0];
    }
    q
}

struct CellFields {
    area: f64,
    /// stress shape tensors at each quadrature point
    tau: [[Tensor2; 6]; 3],
    div: [[f64; 2]; 6],
    /// displacement shape gradients
    grad: [Tensor2; 6],
}

fn cell_fields(mesh: &TriMesh, cell: usize) -> Result<CellFields> {
    let area = mesh.cell_area(cell);
    if area < MIN_CELL_AREA {
        return Err(Error::DegenerateCell { cell, area });
    }
    let pts = mesh.cell_points(cell);
    let rt = rt0_basis_on_cell(mesh, cell)?;
    let quad = midpoint_rule(&pts);
    let mut tau = [[[[0.0; 2]; 2]; 6]; 3];
    for (k, x) in quad.iter().enumerate() {
        for row in 0..2 {
            for i in 0..3 {
                tau[k][3 * row + i][row] = rt.value(i, *x);
            }
        }
    }
    let mut div = [[0.0; 2]; 6];
    for row in 0..2 {
        for i in 0..3 {
            div[3 * row + i][row] = rt.divergence(i);
        }
    }
    let g = p1_gradients(&pts);
    let mut grad = [[[0.0; 2]; 2]; 6];
    for comp in 0..2 {
        for a in 0..3 {
            grad[3 * comp + a][comp] = g[a];
        }
    }
    Ok(CellFields { area, tau, div, grad })
}

pub fn local_stress_terms(mesh: &TriMesh, cell: usize, params: &ElasticParams) -> Result<StressTerms> {
    let f = cell_fields(mesh, cell)?;
    let w = f.area / 3.0;
    let mut t = StressTerms { compliance: [[0.0; 6]; 6], divergence: [[0.0; 6]; 6], skew: [[0.0; 6]; 6] };
    for k in 0..3 {
        let comp: Vec<Tensor2> = f.tau[k].iter().map(|s| compliance_apply(s, params)).collect();
        for l in 0..6 {
            for m in 0..6 {
                t.compliance[l][m] += w * frobenius(&comp[l], &comp[m]);
                t.skew[l][m] += w * 0.5 * skew_scalar(&f.tau[k][l]) * skew_scalar(&f.tau[k][m]);
            }
        }
    }
    for l in 0..6 {
        for m in 0..6 {
            t.divergence[l][m] =
                f.area * (f.div[l][0] * f.div[m][0] + f.div[l][1] * f.div[m][1]);
        }
    }
    Ok(t)
}

pub fn local_blocks(mesh: &TriMesh, cell: usize, params: &ElasticParams) -> Result<LocalBlocks> {
    let f = cell_fields(mesh, cell)?;
    let terms = local_stress_terms(mesh, cell, params)?;
    let w = f.area / 3.0;
    let mut out = LocalBlocks {
        a: [[0.0; 6]; 6],
        b: [[0.0; 6]; 6],
        c: [0.0; 6],
        d: [[0.0; 6]; 6],
        e: [0.0; 6],
        f: 2.0 * f.area,
        g: [[0.0; 6]; 6],
    };
    for l in 0..6 {
        for m in 0..6 {
            out.a[l][m] = terms.compliance[l][m] + terms.divergence[l][m] + terms.skew[l][m];
        }
    }
    for k in 0..3 {
        for l in 0..6 {
            let comp = compliance_apply(&f.tau[k][l], params);
            out.c[l] += w * contract_chi(&comp);
            for v in 0..6 {
                out.b[v][l] -= w * frobenius(&comp, &f.grad[v]);
            }
        }
    }
    for u in 0..6 {
        out.e[u] = -f.area * contract_chi(&f.grad[u]);
        for v in 0..6 {
            out.d[u][v] = f.area * frobenius(&f.grad[u], &f.grad[v]);
        }
    }
    // ∫_K λ_a = |K|/3 and div τ is constant on K
    for l in 0..6 {
        for comp in 0..2 {
            for a in 0..3 {
                out.g[l][3 * comp + a] = -f.div[l][comp] * f.area / 3.0;
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AssemblyMode {
    #[default]
    Serial,
    /// Element loop over rayon; triplets are concatenated in cell order so the
    /// result matches the serial one.
    Parallel,
}

#[derive(Debug, Clone)]
pub struct BlockSystem {
    pub a: CsrMatrix,
    pub b: CsrMatrix,
    pub c: CsrMatrix,
    pub d: CsrMatrix,
    pub e: CsrMatrix,
    pub f: CsrMatrix,
    pub g: CsrMatrix,
    pub params: ElasticParams,
    /// `∫ tr(τ_j)` per stress DOF, present in constrained mode.
    pub stress_mean: Option<Vec<f64>>,
    /// `∫ φ_k` per rotation DOF, present in constrained mode.
    pub rot_mean: Option<Vec<f64>>,
}

impl BlockSystem {
    pub fn n_stress(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_disp(&self) -> usize {
        self.d.nrows()
    }

    pub fn n_rot(&self) -> usize {
        self.f.nrows()
    }

    pub fn is_constrained(&self) -> bool {
        self.stress_mean.is_some()
    }

    /// Dense left and right matrices of the full block pencil. In constrained
    /// mode two multiplier rows and columns are appended after the rotation.
    pub fn full_pencil(&self) -> (Mat<f64>, Mat<f64>) {
        let (ns, nd, nr) = (self.n_stress(), self.n_disp(), self.n_rot());
        let extra = if self.is_constrained() { 2 } else { 0 };
        let n = ns + nd + nr + extra;
        let mut lhs = Mat::<f64>::zeros(n, n);
        let mut rhs = Mat::<f64>::zeros(n, n);
        let mut put = |m: &CsrMatrix, r0: usize, c0: usize, transpose: bool| {
            for (i, j, v) in m.iter() {
                if transpose {
                    lhs[(r0 + j, c0 + i)] += v;
                } else {
                    lhs[(r0 + i, c0 + j)] += v;
                }
            }
        };
        put(&self.a, 0, 0, false);
        put(&self.b, ns, 0, false);
        put(&self.b, 0, ns, true);
        put(&self.c, ns + nd, 0, false);
        put(&self.c, 0, ns + nd, true);
        put(&self.d, ns, ns, false);
        put(&self.e, ns + nd, ns, false);
        put(&self.e, ns, ns + nd, true);
        put(&self.f, ns + nd, ns + nd, false);
        if let (Some(sm), Some(rm)) = (&self.stress_mean, &self.rot_mean) {
            let (ps, pr) = (ns + nd + nr, ns + nd + nr + 1);
            for (j, &v) in sm.iter().enumerate() {
                lhs[(ps, j)] = v;
                lhs[(j, ps)] = v;
            }
            for (k, &v) in rm.iter().enumerate() {
                lhs[(pr, ns + nd + k)] = v;
                lhs[(ns + nd + k, pr)] = v;
            }
        }
        for (i, j, v) in self.g.iter() {
            rhs[(i, ns + j)] = v;
        }
        (lhs, rhs)
    }
}

struct CellContribution {
    blocks: LocalBlocks,
    stress: [Option<usize>; 6],
    disp: [Option<usize>; 6],
    stress_trace: [f64; 6],
}

fn cell_contribution(
    mesh: &TriMesh,
    dofmap: &DofMap,
    params: &ElasticParams,
    cell: usize,
) -> Result<CellContribution> {
    let blocks = local_blocks(mesh, cell, params)?;
    let mut stress = [None; 6];
    let mut disp = [None; 6];
    for row in 0..2 {
        for i in 0..3 {
            stress[3 * row + i] = dofmap.stress_index(row, mesh.cell_edges[cell][i]);
        }
    }
    for comp in 0..2 {
        for a in 0..3 {
            disp[3 * comp + a] = dofmap.disp_block_index(comp, mesh.cells[cell][a]);
        }
    }
    // ∫_K tr τ for τ with row r equal to φ_i is ∫_K φ_i[r] = c_i |K| (centroid - p_i)[r]
    let rt = rt0_basis_on_cell(mesh, cell)?;
    let pts = mesh.cell_points(cell);
    let centroid = [
        (pts[0][0] + pts[1][0] + pts[2][0]) / 3.0,
        (pts[0][1] + pts[1][1] + pts[2][1]) / 3.0,
    ];
    let area = mesh.cell_area(cell);
    let mut stress_trace = [0.0; 6];
    for row in 0..2 {
        for i in 0..3 {
            stress_trace[3 * row + i] = area * rt.value(i, centroid)[row];
        }
    }
    Ok(CellContribution { blocks, stress, disp, stress_trace })
}

pub fn assemble_blocks(mesh: &TriMesh, dofmap: &DofMap, params: &ElasticParams) -> Result<BlockSystem> {
    assemble_blocks_with(mesh, dofmap, params, AssemblyMode::Serial)
}

pub fn assemble_blocks_with(
    mesh: &TriMesh,
    dofmap: &DofMap,
    params: &ElasticParams,
    mode: AssemblyMode,
) -> Result<BlockSystem> {
    if dofmap.n_rot != mesh.n_cells() || dofmap.edge_tags.len() != mesh.n_edges() {
        return Err(Error::DimensionMismatch(format!(
            "dofmap built for {} cells / {} edges, mesh has {} / {}",
            dofmap.n_rot,
            dofmap.edge_tags.len(),
            mesh.n_cells(),
            mesh.n_edges()
        )));
    }
    let contributions: Vec<CellContribution> = match mode {
        AssemblyMode::Serial => (0..mesh.n_cells())
            .map(|c| cell_contribution(mesh, dofmap, params, c))
            .collect::<Result<_>>()?,
        AssemblyMode::Parallel => (0..mesh.n_cells())
            .into_par_iter()
            .map(|c| cell_contribution(mesh, dofmap, params, c))
            .collect::<Result<_>>()?,
    };

    let (ns, nd, nr) = (dofmap.n_stress, dofmap.n_disp, dofmap.n_rot);
    let t = contributions.len();
    let mut a = Triplets::with_capacity(ns, ns, 36 * t);
    let mut b = Triplets::with_capacity(nd, ns, 36 * t);
    let mut c = Triplets::with_capacity(nr, ns, 6 * t);
    let mut d = Triplets::with_capacity(nd, nd, 36 * t);
    let mut e = Triplets::with_capacity(nr, nd, 6 * t);
    let mut f = Triplets::with_capacity(nr, nr, t);
    let mut g = Triplets::with_capacity(ns, nd, 36 * t);
    let mut stress_mean = vec![0.0; ns];
    let mut rot_mean = vec![0.0; nr];

    for (cell, cc) in contributions.iter().enumerate() {
        let lb = &cc.blocks;
        for l in 0..6 {
            let Some(sl) = cc.stress[l] else { continue };
            stress_mean[sl] += cc.stress_trace[l];
            c.push(cell, sl, lb.c[l]);
            for m in 0..6 {
                if let Some(sm) = cc.stress[m] {
                    a.push(sl, sm, lb.a[l][m]);
                }
            }
            for v in 0..6 {
                if let Some(dv) = cc.disp[v] {
                    b.push(dv, sl, lb.b[v][l]);
                    g.push(sl, dv, lb.g[l][v]);
                }
            }
        }
        for u in 0..6 {
            let Some(du) = cc.disp[u] else { continue };
            e.push(cell, du, lb.e[u]);
            for v in 0..6 {
                if let Some(dv) = cc.disp[v] {
                    d.push(du, dv, lb.d[u][v]);
                }
            }
        }
        f.push(cell, cell, lb.f);
        rot_mean[cell] = mesh.cell_area(cell);
    }

    let constrained = dofmap.constraint == MeanConstraint::Constrained;
    Ok(BlockSystem {
        a: a.into_csr(),
        b: b.into_csr(),
        c: c.into_csr(),
        d: d.into_csr(),
        e: e.into_csr(),
        f: f.into_csr(),
        g: g.into_csr(),
        params: *params,
        stress_mean: constrained.then_some(stress_mean),
        rot_mean: constrained.then_some(rot_mean),
    })
}
