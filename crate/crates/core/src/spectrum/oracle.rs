//! Independent reference eigenvalues from a conforming primal discretization.
//!
//! Find γ and `u` in vector continuous P2 with `u = 0` on the boundary and
//! `(2μ ε(u), ε(v)) + λ (div u, div v) = γ (u, v)` for all test functions.
//! The n smallest eigenvalues come from shift-invert subspace iteration with
//! Rayleigh-Ritz. Conforming, so values decrease under refinement. Suffers
//! from volumetric locking for large λ.

use faer::linalg::solvers::Solve;
use faer::linalg::triangular_solve::solve_lower_triangular_in_place;
use faer::{Mat, Par, Side};
use serde::{Deserialize, Serialize};

use crate::dof::{p1_gradients, ElasticParams};
use crate::error::{Error, Result};
use crate::mesh::{generate, splitmix64, Domain, MeshFamily, TriMesh};
use crate::sparse::{CsrMatrix, Triplets};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOptions {
    /// Extra subspace vectors beyond the requested count.
    pub guard: usize,
    pub max_iter: usize,
    /// Relative change of the requested Ritz values that stops the iteration.
    pub tol: f64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self { guard: 10, max_iter: 500, tol: 1e-13 }
    }
}

/// Family used by the oracle on each domain.
pub fn oracle_family(domain: Domain) -> MeshFamily {
    match domain {
        Domain::Square => MeshFamily::SquareCrossed,
        Domain::Lshape => MeshFamily::LshapeUniform,
    }
}

/// Degree-4 six-point rule: barycentric points and weights summing to one.
const QUAD4: [([f64; 3], f64); 6] = {
    const A1: f64 = 0.445_948_490_915_965;
    const W1: f64 = 0.223_381_589_678_011;
    const A2: f64 = 0.091_576_213_509_771;
    const W2: f64 = 0.109_951_743_655_322;
    [
        ([A1, A1, 1.0 - 2.0 * A1], W1),
        ([A1, 1.0 - 2.0 * A1, A1], W1),
        ([1.0 - 2.0 * A1, A1, A1], W1),
        ([A2, A2, 1.0 - 2.0 * A2], W2),
        ([A2, 1.0 - 2.0 * A2, A2], W2),
        ([1.0 - 2.0 * A2, A2, A2], W2),
    ]
};

/// Scalar P2 shape functions: vertices 0..3 then edge nodes 3..6, with edge
/// node `3 + i` on the edge opposite vertex `i`.
fn p2_values(l: [f64; 3]) -> [f64; 6] {
    [
        l[0] * (2.0 * l[0] - 1.0),
        l[1] * (2.0 * l[1] - 1.0),
        l[2] * (2.0 * l[2] - 1.0),
        4.0 * l[1] * l[2],
        4.0 * l[2] * l[0],
        4.0 * l[0] * l[1],
    ]
}

fn p2_gradients(l: [f64; 3], g: &[[f64; 2]; 3]) -> [[f64; 2]; 6] {
    let mut out = [[0.0; 2]; 6];
    for c in 0..2 {
        for i in 0..3 {
            out[i][c] = (4.0 * l[i] - 1.0) * g[i][c];
        }
        for i in 0..3 {
            let (j, k) = ((i + 1) % 3, (i + 2) % 3);
            out[3 + i][c] = 4.0 * (l[k] * g[j][c] + l[j] * g[k][c]);
        }
    }
    out
}

/// Stiffness and mass on free P2 nodes, components blocked by node.
pub fn assemble_primal(mesh: &TriMesh, params: &ElasticParams) -> Result<(CsrMatrix, CsrMatrix)> {
    let nv = mesh.n_vertices();
    let n_nodes = nv + mesh.n_edges();
    let on_boundary = mesh.boundary_vertices();
    let mut free = vec![true; n_nodes];
    for v in 0..nv {
        free[v] = !on_boundary[v];
    }
    for (e, edge) in mesh.edges.iter().enumerate() {
        free[nv + e] = !edge.is_boundary();
    }
    let mut slot = vec![usize::MAX; n_nodes];
    let mut n_free = 0;
    for (i, f) in free.iter().enumerate() {
        if *f {
            slot[i] = n_free;
            n_free += 1;
        }
    }
    if n_free == 0 {
        return Err(Error::EmptyDisplacementSpace);
    }
    let dim = 2 * n_free;
    let mut k = Triplets::with_capacity(dim, dim, 144 * mesh.n_cells());
    let mut m = Triplets::with_capacity(dim, dim, 72 * mesh.n_cells());
    let (mu, lambda) = (params.mu, params.lambda);
    for cell in 0..mesh.n_cells() {
        let area = mesh.cell_area(cell);
        if area < crate::assemble::MIN_CELL_AREA {
            return Err(Error::DegenerateCell { cell, area });
        }
        let g = p1_gradients(&mesh.cell_points(cell));
        let mut nodes = [0usize; 6];
        for i in 0..3 {
            nodes[i] = mesh.cells[cell][i];
            nodes[3 + i] = nv + mesh.cell_edges[cell][i];
        }
        let mut ke = [[0.0; 12]; 12];
        let mut me = [[0.0; 6]; 6];
        // gradients are linear: edge midpoints integrate their products exactly
        for q in 0..3 {
            let mut l = [0.5; 3];
            l[q] = 0.0;
            let dphi = p2_gradients(l, &g);
            let w = area / 3.0;
            for a in 0..6 {
                for ca in 0..2 {
                    for b in 0..6 {
                        for cb in 0..2 {
                            // u = φ_a e_ca, v = φ_b e_cb
                            let mut eps = 0.0;
                            for i in 0..2 {
                                for j in 0..2 {
                                    let eu = 0.5
                                        * (if i == ca { dphi[a][j] } else { 0.0 }
                                            + if j == ca { dphi[a][i] } else { 0.0 });
                                    let ev = 0.5
                                        * (if i == cb { dphi[b][j] } else { 0.0 }
                                            + if j == cb { dphi[b][i] } else { 0.0 });
                                    eps += eu * ev;
                                }
                            }
                            let div = dphi[a][ca] * dphi[b][cb];
                            ke[2 * a + ca][2 * b + cb] += w * (2.0 * mu * eps + lambda * div);
                        }
                    }
                }
            }
        }
        for (l, wq) in QUAD4 {
            let phi = p2_values(l);
            for a in 0..6 {
                for b in 0..6 {
                    me[a][b] += area * wq * phi[a] * phi[b];
                }
            }
        }
        for a in 0..6 {
            if !free[nodes[a]] {
                continue;
            }
            for b in 0..6 {
                if !free[nodes[b]] {
                    continue;
                }
                for ca in 0..2 {
                    let ia = 2 * slot[nodes[a]] + ca;
                    m.push(ia, 2 * slot[nodes[b]] + ca, me[a][b]);
                    for cb in 0..2 {
                        k.push(ia, 2 * slot[nodes[b]] + cb, ke[2 * a + ca][2 * b + cb]);
                    }
                }
            }
        }
    }
    Ok((k.into_csr(), m.into_csr()))
}

/// The `n_eigs` smallest eigenvalues of the primal problem on the oracle mesh
/// of size `n`, ascending.
pub fn primal_oracle(
    domain: Domain,
    n: usize,
    params: &ElasticParams,
    n_eigs: usize,
    opts: &OracleOptions,
) -> Result<Vec<f64>> {
    let mesh = generate(oracle_family(domain), n, 0)?;
    let (k, m) = assemble_primal(&mesh, params)?;
    smallest_eigenvalues(&k, &m, n_eigs, opts)
}

/// Shift-invert (shift zero) subspace iteration for the SPD pair `(K, M)`.
pub fn smallest_eigenvalues(k: &CsrMatrix, m: &CsrMatrix, n_eigs: usize, opts: &OracleOptions) -> Result<Vec<f64>> {
    let dim = k.nrows();
    if n_eigs == 0 || n_eigs > dim {
        return Err(Error::InvalidArgument(format!("cannot compute {n_eigs} eigenvalues of a {dim}-dimensional problem")));
    }
    let p = (n_eigs + opts.guard).min(dim);
    let llt = k.to_faer().sp_cholesky(Side::Lower).map_err(|e| Error::Factorization {
        what: format!("primal stiffness: {e:?}"),
        pivot: match e {
            faer::sparse::linalg::LltError::Numeric(
                faer::linalg::cholesky::llt::factor::LltError::NonPositivePivot { index },
            ) => Some(index),
            _ => None,
        },
    })?;
    let mut x = Mat::from_fn(dim, p, |i, j| {
        let h = splitmix64((i as u64) << 20 ^ j as u64 ^ 0x5eed);
        (h >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    });
    let mut prev: Vec<f64> = vec![f64::INFINITY; n_eigs];
    for _ in 0..opts.max_iter {
        let mut y = m.mul_dense(&x);
        llt.solve_in_place(y.as_mut());
        let ky = k.mul_dense(&y);
        let my = m.mul_dense(&y);
        let kr = y.transpose() * &ky;
        let mr = y.transpose() * &my;
        let (vals, vecs) = small_generalized(&kr, &mr)?;
        x = &y * &vecs;
        let cur = vals[..n_eigs].to_vec();
        let change = cur
            .iter()
            .zip(&prev)
            .map(|(a, b)| ((a - b) / a).abs())
            .fold(0.0, f64::max);
        prev = cur;
        if change < opts.tol {
            return Ok(prev);
        }
    }
    Err(Error::NoConvergence(format!("primal subspace iteration after {} steps", opts.max_iter)))
}

/// Symmetric-definite `Kr v = θ Mr v` on the subspace; ascending.
fn small_generalized(kr: &Mat<f64>, mr: &Mat<f64>) -> Result<(Vec<f64>, Mat<f64>)> {
    let p = kr.nrows();
    let sym = |a: &Mat<f64>| Mat::from_fn(p, p, |i, j| 0.5 * (a[(i, j)] + a[(j, i)]));
    let llt = sym(mr)
        .llt(Side::Lower)
        .map_err(|_| Error::Factorization { what: "subspace mass matrix".into(), pivot: None })?;
    let l = llt.L().to_owned();
    let mut linv = Mat::<f64>::identity(p, p);
    solve_lower_triangular_in_place(l.as_ref(), linv.as_mut(), Par::Seq);
    let c = sym(&(&linv * sym(kr) * linv.transpose()));
    let evd = c
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::NoConvergence(format!("subspace eigenproblem: {e:?}")))?;
    let s = evd.S();
    let vals: Vec<f64> = (0..p).map(|i| s[i]).collect();
    let vecs = linv.transpose() * evd.U();
    Ok((vals, vecs))
}

/// Extrapolated reference eigenvalue with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceEigen {
    pub domain: Domain,
    pub lambda: f64,
    pub mu: f64,
    /// 1-based position in the ascending primal spectrum.
    pub index: usize,
    pub value: f64,
    pub uncertainty: f64,
    /// Observed order used for the extrapolation.
    pub order: f64,
    /// `(n, value)` for each oracle mesh.
    pub samples: Vec<(usize, f64)>,
    pub provenance: String,
}

/// Richardson extrapolation of the `index`-th (1-based) oracle eigenvalue
/// over three mesh sizes each doubling the previous.
pub fn reference_eigenvalue(
    domain: Domain,
    params: &ElasticParams,
    index: usize,
    ns: [usize; 3],
    opts: &OracleOptions,
) -> Result<ReferenceEigen> {
    if index == 0 || ns[1] != 2 * ns[0] || ns[2] != 2 * ns[1] {
        return Err(Error::InvalidArgument("need index >= 1 and mesh sizes n, 2n, 4n".into()));
    }
    let mut values = [0.0; 3];
    for (v, &n) in values.iter_mut().zip(&ns) {
        *v = primal_oracle(domain, n, params, index, opts)?[index - 1];
    }
    let (value, order, uncertainty) = richardson(values)?;
    Ok(ReferenceEigen {
        domain,
        lambda: params.lambda,
        mu: params.mu,
        index,
        value,
        uncertainty,
        order,
        samples: ns.iter().copied().zip(values).collect(),
        provenance: format!(
            "conforming vector P2, {} meshes n = {:?}, shift-invert subspace iteration, \
             Richardson extrapolation with observed order {order:.4}",
            oracle_family(domain).name(),
            ns
        ),
    })
}

/// `(limit, order, uncertainty)` from three values on meshes h, h/2, h/4.
/// The uncertainty is the size of the extrapolation correction.
pub fn richardson(v: [f64; 3]) -> Result<(f64, f64, f64)> {
    let d1 = v[0] - v[1];
    let d2 = v[1] - v[2];
    if !(d1 / d2 > 1.0) {
        return Err(Error::NoConvergence(format!(
            "oracle sequence {v:?} is not in the asymptotic range"
        )));
    }
    let order = (d1 / d2).log2();
    let correction = d2 / (2f64.powf(order) - 1.0);
    let limit = v[2] - correction;
    let uncertainty = correction.abs().max(f64::EPSILON * limit.abs());
    Ok((limit, order, uncertainty))
}
