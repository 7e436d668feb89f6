//! Generalized eigenvalues of the displacement pencil `M u = γ N u`.
//!
//! `N` is singular, so some modes are infinite. Two routes are provided:
//!
//! * [`Route::Standard`] factors `M` (symmetric negative definite) and computes
//!   the eigenvalues θ of `M⁻¹N`; γ = 1/θ, and θ ≈ 0 marks an infinite mode.
//! * [`Route::Qz`] runs a real QZ reduction of `(M, N)` and reads γ = α/β.
//!
//! Both classify a mode as infinite when its reciprocal `β/α` is below
//! `infinite_tol` times the largest one, then drop finite values whose modulus
//! exceeds `filter_ratio` times the median modulus.

pub mod oracle;
pub mod rate;

use std::cmp::Ordering;

use faer::linalg::solvers::Solve;
use faer::{c64, Mat, Side};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reduce::SchurPencil;

pub use oracle::{primal_oracle, reference_eigenvalue, OracleOptions, ReferenceEigen};
pub use rate::{estimate_rate, RateEstimate};

pub const DEFAULT_FILTER_RATIO: f64 = 1e10;
pub const DEFAULT_INFINITE_TOL: f64 = 1e-11;
/// `|Im γ| / |γ|` below this counts as real.
pub const REAL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    #[default]
    Standard,
    Qz,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub route: Route,
    pub filter_ratio: f64,
    pub infinite_tol: f64,
    pub eigenvectors: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            route: Route::Standard,
            filter_ratio: DEFAULT_FILTER_RATIO,
            infinite_tol: DEFAULT_INFINITE_TOL,
            eigenvectors: false,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct SolverDiagnostics {
    pub route: Route,
    pub dim: usize,
    /// Modes whose reciprocal fell below the infinite threshold.
    pub n_reciprocal_zero: usize,
    /// Finite candidates removed by the modulus outlier cut.
    pub n_outliers: usize,
    pub median_modulus: f64,
    /// Largest [`backward_error`] over reported pairs, when vectors exist.
    pub max_residual: Option<f64>,
    /// Whether `-M` admitted a Cholesky factorization (standard route only).
    pub m_negative_definite: Option<bool>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
pub struct SpectrumMeta {
    pub family: Option<String>,
    pub n: Option<usize>,
    pub lambda: Option<f64>,
    pub mu: Option<f64>,
    pub bc: Option<String>,
}

#[derive(Debug, Clone)]
pub struct Spectrum {
    /// Sorted by modulus, then imaginary part.
    pub finite_eigs: Vec<c64>,
    pub n_infinite: usize,
    pub eigvecs: Option<Vec<Vec<c64>>>,
    pub meta: SpectrumMeta,
    pub diagnostics: SolverDiagnostics,
}

/// Modulus first, then imaginary part with negative values first.
pub fn spectral_order(a: &c64, b: &c64) -> Ordering {
    modulus(*a).total_cmp(&modulus(*b)).then(a.im.total_cmp(&b.im))
}

pub fn modulus(z: c64) -> f64 {
    z.re.hypot(z.im)
}

fn cdiv(a: c64, b: c64) -> c64 {
    let d = b.re * b.re + b.im * b.im;
    c64::new((a.re * b.re + a.im * b.im) / d, (a.im * b.re - a.re * b.im) / d)
}

fn frobenius(m: &Mat<f64>) -> f64 {
    let mut s = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            s += m[(i, j)] * m[(i, j)];
        }
    }
    s.sqrt()
}

/// Spectrum of the Schur pencil.
pub fn solve_schur(pencil: &SchurPencil, opts: &SolveOptions) -> Result<Spectrum> {
    solve_pencil(&pencil.m, &pencil.n_rhs, opts)
}

pub fn solve_pencil(m: &Mat<f64>, n: &Mat<f64>, opts: &SolveOptions) -> Result<Spectrum> {
    let dim = m.nrows();
    if m.ncols() != dim || n.shape() != (dim, dim) {
        return Err(Error::DimensionMismatch(format!(
            "pencil matrices {:?} and {:?} must be square and equal",
            m.shape(),
            n.shape()
        )));
    }
    if !(opts.filter_ratio > 0.0) || !(opts.infinite_tol >= 0.0) {
        return Err(Error::InvalidArgument("filter_ratio must be positive".into()));
    }
    if dim == 0 {
        return Err(Error::EmptyFiniteSpectrum(0));
    }
    let mut diagnostics = SolverDiagnostics { route: opts.route, dim, ..Default::default() };
    // (reciprocal θ = β/α, optional vector)
    let (recip, vecs): (Vec<c64>, Option<Mat<c64>>) = match opts.route {
        Route::Standard => {
            let (recip, vecs, spd) = standard_route(m, n, opts.eigenvectors)?;
            diagnostics.m_negative_definite = Some(spd);
            (recip, vecs)
        }
        Route::Qz => {
            let (recip, vecs) = qz_route(m, n)?;
            (recip, opts.eigenvectors.then_some(vecs))
        }
    };

    let scale = recip.iter().map(|z| modulus(*z)).fold(0.0, f64::max);
    let mut candidates: Vec<(c64, usize)> = Vec::with_capacity(dim);
    for (i, t) in recip.iter().enumerate() {
        if scale > 0.0 && modulus(*t) > opts.infinite_tol * scale {
            candidates.push((cdiv(c64::new(1.0, 0.0), *t), i));
        }
    }
    diagnostics.n_reciprocal_zero = dim - candidates.len();
    if candidates.is_empty() {
        return Err(Error::EmptyFiniteSpectrum(dim));
    }
    let mut mods: Vec<f64> = candidates.iter().map(|(g, _)| modulus(*g)).collect();
    mods.sort_by(f64::total_cmp);
    let median = median_sorted(&mods);
    diagnostics.median_modulus = median;
    let before = candidates.len();
    candidates.retain(|(g, _)| modulus(*g) <= opts.filter_ratio * median);
    diagnostics.n_outliers = before - candidates.len();
    candidates.sort_by(|a, b| spectral_order(&a.0, &b.0));

    let finite_eigs: Vec<c64> = candidates.iter().map(|(g, _)| *g).collect();
    let mut eigvecs = vecs.map(|v| {
        candidates
            .iter()
            .map(|&(_, i)| (0..dim).map(|r| v[(r, i)]).collect::<Vec<c64>>())
            .collect::<Vec<_>>()
    });
    if let Some(vs) = eigvecs.as_mut() {
        refine_vectors(m, n, &finite_eigs, vs);
        let worst = backward_errors(m, n, &finite_eigs, vs).into_iter().fold(0.0, f64::max);
        diagnostics.max_residual = Some(worst);
    }
    Ok(Spectrum {
        n_infinite: dim - finite_eigs.len(),
        finite_eigs,
        eigvecs,
        meta: SpectrumMeta::default(),
        diagnostics,
    })
}

/// Pairs whose backward error exceeds this are refined.
const REFINE_TOL: f64 = 1e-10;

/// Shifted inverse iteration for eigenvectors that the dense solver got
/// wrong. This happens for exactly repeated complex pairs, which symmetric
/// meshes produce. One factorization serves a whole cluster of equal
/// eigenvalues; the cluster's vectors are kept orthogonal.
fn refine_vectors(m: &Mat<f64>, n: &Mat<f64>, eigs: &[c64], vecs: &mut [Vec<c64>]) {
    let dim = m.nrows();
    let errors = backward_errors(m, n, eigs, vecs);
    let bad: Vec<usize> = (0..eigs.len()).filter(|&k| !(errors[k] <= REFINE_TOL)).collect();
    let mut done = vec![false; eigs.len()];
    for &k in &bad {
        if done[k] {
            continue;
        }
        let gamma = eigs[k];
        let same = |j: usize| modulus(eigs[j] - gamma) <= 1e-8 * modulus(gamma);
        let cluster: Vec<usize> = (0..eigs.len()).filter(|&j| same(j)).collect();
        let shift = gamma * c64::new(1.0 + 1e-10, 1e-10);
        let a = Mat::<c64>::from_fn(dim, dim, |i, j| c64::new(m[(i, j)], 0.0) - shift * n[(i, j)]);
        let lu = a.partial_piv_lu();
        let mut basis: Vec<Vec<c64>> = cluster
            .iter()
            .filter(|&&j| !bad.contains(&j))
            .map(|&j| vecs[j].clone())
            .collect();
        for &j in cluster.iter().filter(|j| bad.contains(j)) {
            let mut x = vecs[j].clone();
            for _ in 0..3 {
                let rhs = Mat::<c64>::from_fn(dim, 1, |i, _| {
                    (0..dim).fold(c64::new(0.0, 0.0), |acc, l| acc + x[l] * n[(i, l)])
                });
                let y = lu.solve(&rhs);
                x = (0..dim).map(|i| y[(i, 0)]).collect();
                for b in &basis {
                    let b2: f64 = b.iter().map(|z| z.norm_sqr()).sum();
                    let proj = b.iter().zip(&x).fold(c64::new(0.0, 0.0), |acc, (p, q)| acc + p.conj() * q) / b2;
                    x.iter_mut().zip(b).for_each(|(q, p)| *q -= proj * p);
                }
                let norm = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                if !(norm > 0.0 && norm.is_finite()) {
                    break;
                }
                x.iter_mut().for_each(|z| *z /= norm);
            }
            if pair_residual(m, n, gamma, &x) < pair_residual(m, n, gamma, &vecs[j]) {
                vecs[j] = x.clone();
            }
            basis.push(vecs[j].clone());
            done[j] = true;
        }
    }
}

fn median_sorted(v: &[f64]) -> f64 {
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

fn standard_route(m: &Mat<f64>, n: &Mat<f64>, vectors: bool) -> Result<(Vec<c64>, Option<Mat<c64>>, bool)> {
    let neg = -m;
    let (k, spd) = match neg.llt(Side::Lower) {
        Ok(llt) => {
            let mut k = n.clone();
            llt.solve_in_place(k.as_mut());
            (-k, true)
        }
        Err(_) => {
            let lu = m.partial_piv_lu();
            let k = lu.solve(n);
            if !k.norm_max().is_finite() {
                return Err(Error::Factorization { what: "pencil matrix M".into(), pivot: None });
            }
            (k, false)
        }
    };
    if vectors {
        let evd = k.eigen().map_err(|e| Error::NoConvergence(format!("{e:?}")))?;
        let s = evd.S();
        let vals: Vec<c64> = (0..k.nrows()).map(|i| s[i]).collect();
        let u = evd.U();
        let vecs = Mat::from_fn(k.nrows(), k.ncols(), |i, j| u[(i, j)]);
        Ok((vals, Some(vecs), spd))
    } else {
        let vals = k.eigenvalues().map_err(|e| Error::NoConvergence(format!("{e:?}")))?;
        Ok((vals, None, spd))
    }
}

/// Reciprocals `β/α` and right vectors from a real QZ reduction. The
/// eigenvector accumulation is always requested: the eigenvalue-only QZ path
/// in faer 0.23 returns zero pairs on these pencils.
fn qz_route(m: &Mat<f64>, n: &Mat<f64>) -> Result<(Vec<c64>, Mat<c64>)> {
    let dim = m.nrows();
    let g = m.generalized_eigen(n).map_err(|e| Error::NoConvergence(format!("QZ: {e:?}")))?;
    let (sa, sb) = (g.S_a(), g.S_b());
    let recip = (0..dim).map(|i| cdiv(sb[i], sa[i])).collect();
    let u = g.U();
    Ok((recip, Mat::from_fn(dim, dim, |i, j| u[(i, j)])))
}

/// Normwise backward error `‖M v - γ N v‖ / ((‖M‖ + |γ| ‖N‖) ‖v‖)` for
/// precomputed `(‖M‖, ‖N‖)`.
pub fn backward_error(m: &Mat<f64>, n: &Mat<f64>, norms: (f64, f64), gamma: c64, v: &[c64]) -> f64 {
    pair_residual(m, n, gamma, v) / (norms.0 + modulus(gamma) * norms.1)
}

/// [`backward_error`] of every pair, from real products with the real and
/// imaginary parts of the stacked vectors.
fn backward_errors(m: &Mat<f64>, n: &Mat<f64>, eigs: &[c64], vecs: &[Vec<c64>]) -> Vec<f64> {
    let (dim, k) = (m.nrows(), eigs.len());
    let vr = Mat::from_fn(dim, k, |i, j| vecs[j][i].re);
    let vi = Mat::from_fn(dim, k, |i, j| vecs[j][i].im);
    let (mr, mi, nr, ni) = (m * &vr, m * &vi, n * &vr, n * &vi);
    let norms = (frobenius(m), frobenius(n));
    (0..k)
        .map(|j| {
            let g = eigs[j];
            let (mut r2, mut v2) = (0.0, 0.0);
            for i in 0..dim {
                let re = mr[(i, j)] - (g.re * nr[(i, j)] - g.im * ni[(i, j)]);
                let im = mi[(i, j)] - (g.re * ni[(i, j)] + g.im * nr[(i, j)]);
                r2 += re * re + im * im;
                v2 += vr[(i, j)] * vr[(i, j)] + vi[(i, j)] * vi[(i, j)];
            }
            (r2 / v2).sqrt() / (norms.0 + modulus(g) * norms.1)
        })
        .collect()
}

/// `‖M v - γ N v‖ / ‖v‖`.
pub fn pair_residual(m: &Mat<f64>, n: &Mat<f64>, gamma: c64, v: &[c64]) -> f64 {
    let dim = m.nrows();
    let mut res = 0.0;
    for i in 0..dim {
        let mut mv = c64::new(0.0, 0.0);
        let mut nv = c64::new(0.0, 0.0);
        for (j, vj) in v.iter().enumerate() {
            mv += *vj * m[(i, j)];
            nv += *vj * n[(i, j)];
        }
        let r = mv - gamma * nv;
        res += r.re * r.re + r.im * r.im;
    }
    let vn: f64 = v.iter().map(|z| z.re * z.re + z.im * z.im).sum();
    (res / vn).sqrt()
}

impl Spectrum {
    pub fn n_total(&self) -> usize {
        self.finite_eigs.len() + self.n_infinite
    }

    /// Number of finite eigenvalues with `|γ| < radius`.
    pub fn count_in_disk(&self, radius: f64) -> usize {
        count_in_disk(&self.finite_eigs, radius)
    }

    /// Largest relative distance from a non-real eigenvalue to the nearest
    /// conjugate of another listed eigenvalue.
    pub fn conjugate_closure_defect(&self) -> f64 {
        conjugate_closure_defect(&self.finite_eigs)
    }

    /// Smallest-modulus eigenvalue, required to be real.
    pub fn first_eigenvalue(&self) -> Result<f64> {
        first_eigenvalue(&self.finite_eigs)
    }

    /// Leading eigenvalues that are real to [`REAL_TOL`], in order.
    pub fn leading_real(&self, k: usize) -> Vec<f64> {
        self.finite_eigs
            .iter()
            .filter(|z| z.im.abs() <= REAL_TOL * modulus(**z))
            .take(k)
            .map(|z| z.re)
            .collect()
    }
}

pub fn count_in_disk(eigs: &[c64], radius: f64) -> usize {
    assert!(radius > 0.0, "disk radius must be positive");
    eigs.iter().filter(|z| modulus(**z) < radius).count()
}

pub fn conjugate_closure_defect(eigs: &[c64]) -> f64 {
    let mut worst = 0.0f64;
    for (i, z) in eigs.iter().enumerate() {
        let m = modulus(*z);
        if z.im.abs() <= 1e-14 * m {
            continue;
        }
        let conj = c64::new(z.re, -z.im);
        let best = eigs
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, w)| modulus(*w - conj))
            .fold(f64::INFINITY, f64::min);
        worst = worst.max(best / m);
    }
    worst
}

pub fn first_eigenvalue(eigs: &[c64]) -> Result<f64> {
    let first = eigs.first().ok_or(Error::EmptyFiniteSpectrum(0))?;
    if first.im.abs() < REAL_TOL * modulus(*first) {
        return Ok(first.re);
    }
    Err(Error::AmbiguousFirstEigenvalue(format!("{:.12e} {:+.12e}i", first.re, first.im)))
}
