//! Eigenfunction recovery and export: displacement as point vectors, rotation
//! as cell scalars.

use std::fmt::Write;
use std::path::Path;

use faer::c64;
use rayon::prelude::*;
use serde::Serialize;
use threefield_core::spectrum::{modulus, SolveOptions, REAL_TOL};
use threefield_core::MeshFamily;

use crate::config::{lambda_tag, ExperimentConfig};
use crate::error::{LabError, LabResult};
use crate::output::{num, write_file, write_json};
use crate::pipeline::{solve_case, Case, Solved};

/// A normalized eigenfunction: `max_x |u(x)| = 1`, and the largest displacement
/// component is positive real.
#[derive(Debug, Clone)]
pub struct EigenField {
    pub gamma: c64,
    /// Whether the eigenvalue is genuinely complex; the fields then carry
    /// meaningful imaginary parts.
    pub complex: bool,
    /// Per mesh vertex, zero on the Dirichlet boundary.
    pub u: Vec<[c64; 2]>,
    /// Per cell.
    pub psi: Vec<c64>,
}

fn scale(v: &mut [c64], s: c64) {
    v.iter_mut().for_each(|z| *z *= s);
}

fn largest(v: &[c64]) -> usize {
    (0..v.len()).fold(0, |k, i| if v[i].norm() > v[k].norm() { i } else { k })
}

/// Recovers the fields of the `which`-th (1-based) finite eigenpair.
pub fn eigen_field(s: &Solved, which: usize) -> LabResult<EigenField> {
    let eigs = &s.spectrum.finite_eigs;
    if which == 0 || which > eigs.len() {
        return Err(LabError::Usage(format!("eigenpair {which} requested, {} available", eigs.len())));
    }
    let vecs = s
        .spectrum
        .eigvecs
        .as_ref()
        .ok_or_else(|| LabError::Usage("spectrum was computed without eigenvectors".into()))?;
    let mut gamma = eigs[which - 1];
    let mut u = vecs[which - 1].clone();
    let complex = gamma.im.abs() > REAL_TOL * modulus(gamma);
    let k = largest(&u);
    let phase = u[k].conj() / u[k].norm();
    scale(&mut u, phase);
    if !complex {
        // for a real eigenvalue the real part of the rotated vector is itself
        // an eigenvector, also inside a repeated eigenspace
        gamma = c64::new(gamma.re, 0.0);
        u.iter_mut().for_each(|z| *z = c64::new(z.re, 0.0));
        let k = largest(&u);
        if u[k].re < 0.0 {
            scale(&mut u, c64::new(-1.0, 0.0));
        }
    } else {
        log::warn!(
            "eigenvalue {which} = {} {:+}i is complex; exporting real and imaginary parts",
            gamma.re,
            gamma.im
        );
    }
    let mesh = &s.mesh;
    let dm = &s.dofmap;
    let mut field = vec![[c64::new(0.0, 0.0); 2]; mesh.n_vertices()];
    for (v, f) in field.iter_mut().enumerate() {
        for (c, fc) in f.iter_mut().enumerate() {
            if let Some(i) = dm.disp_block_index(c, v) {
                *fc = u[i];
            }
        }
    }
    let peak = field.iter().map(|f| (f[0].norm_sqr() + f[1].norm_sqr()).sqrt()).fold(0.0, f64::max);
    let inv = c64::new(1.0 / peak, 0.0);
    scale(&mut u, inv);
    field.iter_mut().for_each(|f| f.iter_mut().for_each(|z| *z *= inv));
    let rec = s.pencil.recover_fields(gamma, &u)?;
    Ok(EigenField { gamma, complex, u: field, psi: rec.psi[..mesh.n_cells()].to_vec() })
}

pub fn vtk(s: &Solved, f: &EigenField) -> String {
    let mut buf = Vec::new();
    let title = format!("{} N={} lambda={:e} gamma={}{:+}i", s.case.family, s.case.n, s.case.params.lambda, f.gamma.re, f.gamma.im);
    s.mesh.write_vtk_geometry(&mut buf, &title).expect("writing to memory");
    let mut out = String::from_utf8(buf).expect("ascii");
    let parts: &[(&str, fn(c64) -> f64)] =
        if f.complex { &[("_re", |z| z.re), ("_im", |z| z.im)] } else { &[("", |z| z.re)] };
    let _ = writeln!(out, "POINT_DATA {}", f.u.len());
    for (suffix, part) in parts {
        let _ = writeln!(out, "VECTORS displacement{suffix} double");
        for p in &f.u {
            let _ = writeln!(out, "{} {} 0", num(part(p[0])), num(part(p[1])));
        }
    }
    let _ = writeln!(out, "CELL_DATA {}", f.psi.len());
    for (suffix, part) in parts {
        let _ = writeln!(out, "SCALARS rotation{suffix} double 1");
        let _ = writeln!(out, "LOOKUP_TABLE default");
        for z in &f.psi {
            let _ = writeln!(out, "{}", num(part(*z)));
        }
    }
    out
}

/// `(points csv, cells csv)`.
pub fn csv(s: &Solved, f: &EigenField) -> (String, String) {
    let mut pts = String::from(if f.complex { "vertex,x,y,u1,u2,u1_im,u2_im\n" } else { "vertex,x,y,u1,u2\n" });
    for (v, (x, u)) in s.mesh.vertices.iter().zip(&f.u).enumerate() {
        let _ = write!(pts, "{v},{},{},{},{}", num(x[0]), num(x[1]), num(u[0].re), num(u[1].re));
        if f.complex {
            let _ = write!(pts, ",{},{}", num(u[0].im), num(u[1].im));
        }
        pts.push('\n');
    }
    let mut cells = String::from(if f.complex { "cell,x,y,psi,psi_im\n" } else { "cell,x,y,psi\n" });
    for (c, z) in f.psi.iter().enumerate() {
        let p = s.mesh.cell_points(c);
        let cx = (p[0][0] + p[1][0] + p[2][0]) / 3.0;
        let cy = (p[0][1] + p[1][1] + p[2][1]) / 3.0;
        let _ = write!(cells, "{c},{},{},{}", num(cx), num(cy), num(z.re));
        if f.complex {
            let _ = write!(cells, ",{}", num(z.im));
        }
        cells.push('\n');
    }
    (pts, cells)
}

#[derive(Debug, Clone, Serialize)]
pub struct EigenfunctionRecord {
    pub family: MeshFamily,
    pub n: usize,
    pub lambda: f64,
    pub which: usize,
    pub gamma: [f64; 2],
    pub complex: bool,
    pub max_displacement: f64,
    pub dirichlet_max_displacement: f64,
    pub rotation_min: f64,
    pub rotation_max: f64,
    pub files: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EigenfunctionReport {
    pub records: Vec<EigenfunctionRecord>,
}

pub fn run_eigenfunction(cfg: &ExperimentConfig, which: usize, dir: &Path) -> LabResult<EigenfunctionReport> {
    let opts = SolveOptions { route: cfg.route, filter_ratio: cfg.filter_ratio, eigenvectors: true, ..Default::default() };
    let mut cases = Vec::new();
    for &lambda in &cfg.lambda_list {
        for &n in &cfg.n_list {
            cases.push(Case::from_config(cfg, n, lambda)?);
        }
    }
    let done: Vec<_> = cases
        .par_iter()
        .map(|c| -> LabResult<_> {
            let s = solve_case(c, &opts)?;
            let f = eigen_field(&s, which)?;
            Ok((vtk(&s, &f), csv(&s, &f), record(&s, &f, which)))
        })
        .collect::<LabResult<Vec<_>>>()?;
    let mut records = Vec::new();
    for (vtk_text, (pts, cells), mut rec) in done {
        let stem = format!("eigenfunction{which}_N{}_lam{}", rec.n, lambda_tag(rec.lambda));
        let names = [format!("{stem}.vtk"), format!("{stem}_points.csv"), format!("{stem}_cells.csv")];
        for (name, text) in names.iter().zip([&vtk_text, &pts, &cells]) {
            write_file(&dir.join(name), text)?;
        }
        rec.files = names.to_vec();
        records.push(rec);
    }
    let report = EigenfunctionReport { records };
    write_json(&dir.join("report.json"), &report)?;
    Ok(report)
}

pub fn record(s: &Solved, f: &EigenField, which: usize) -> EigenfunctionRecord {
    let norm = |u: &[c64; 2]| (u[0].norm_sqr() + u[1].norm_sqr()).sqrt();
    let boundary = f
        .u
        .iter()
        .enumerate()
        .filter(|(v, _)| !s.dofmap.is_free_vertex(*v))
        .map(|(_, u)| norm(u))
        .fold(0.0, f64::max);
    EigenfunctionRecord {
        family: s.case.family,
        n: s.case.n,
        lambda: s.case.params.lambda,
        which,
        gamma: [f.gamma.re, f.gamma.im],
        complex: f.complex,
        max_displacement: f.u.iter().map(norm).fold(0.0, f64::max),
        dirichlet_max_displacement: boundary,
        rotation_min: f.psi.iter().map(|z| z.re).fold(f64::INFINITY, f64::min),
        rotation_max: f.psi.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max),
        files: Vec::new(),
    }
}
