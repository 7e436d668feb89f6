//! Structured triangulations of the unit square and the L-shaped domain.
//!
//! Every generator works on the `N x N` grid of squares with spacing `1/N` and
//! differs only in which squares are kept and how each square is split. After
//! generation the topology (edges, adjacency, orientation signs, boundary
//! tags) is always filled and validated.

use std::collections::HashSet;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Square,
    Lshape,
}

impl Domain {
    pub fn area(self) -> f64 {
        match self {
            Domain::Square => 1.0,
            Domain::Lshape => 0.75,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeshFamily {
    SquareRight,
    SquareCrossed,
    SquareNonuniform,
    LshapeLeft,
    LshapeUniform,
    LshapeNonuniform,
}

impl MeshFamily {
    pub const ALL: [MeshFamily; 6] = [
        MeshFamily::SquareRight,
        MeshFamily::SquareCrossed,
        MeshFamily::SquareNonuniform,
        MeshFamily::LshapeLeft,
        MeshFamily::LshapeUniform,
        MeshFamily::LshapeNonuniform,
    ];

    pub fn domain(self) -> Domain {
        match self {
            MeshFamily::SquareRight | MeshFamily::SquareCrossed | MeshFamily::SquareNonuniform => {
                Domain::Square
            }
            _ => Domain::Lshape,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MeshFamily::SquareRight => "square_right",
            MeshFamily::SquareCrossed => "square_crossed",
            MeshFamily::SquareNonuniform => "square_nonuniform",
            MeshFamily::LshapeLeft => "lshape_left",
            MeshFamily::LshapeUniform => "lshape_uniform",
            MeshFamily::LshapeNonuniform => "lshape_nonuniform",
        }
    }

    pub fn is_crossed(self) -> bool {
        matches!(self, MeshFamily::SquareCrossed | MeshFamily::LshapeUniform)
    }
}

impl std::fmt::Display for MeshFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for MeshFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MeshFamily::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown mesh family `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SquarePattern {
    Right,
    Crossed,
    Nonuniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LshapePattern {
    Left,
    Uniform,
    Nonuniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryTag {
    Dirichlet,
    Neumann,
}

/// A mesh edge. `vertices` is sorted; `cells.0 < cells.1` when the edge is interior.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub vertices: [usize; 2],
    pub cells: (usize, Option<usize>),
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.cells.1.is_none()
    }
}

#[derive(Debug, Clone)]
pub struct TriMesh {
    pub vertices: Vec<Point>,
    /// Counterclockwise vertex triples.
    pub cells: Vec<[usize; 3]>,
    pub edges: Vec<Edge>,
    /// Local edge `i` of a cell is the edge opposite its local vertex `i`.
    pub cell_edges: Vec<[usize; 3]>,
    /// +1 where the global edge normal is outward for the cell, -1 otherwise.
    pub cell_edge_signs: Vec<[f64; 3]>,
    /// `Some` exactly for boundary edges.
    pub boundary_tags: Vec<Option<BoundaryTag>>,
    pub family: MeshFamily,
    pub n_per_side: usize,
}

#[derive(Clone, Copy)]
enum Split {
    /// lower-left to upper-right diagonal
    Right,
    /// lower-right to upper-left diagonal
    Left,
    Crossed,
}

pub fn generate(family: MeshFamily, n: usize, seed: u64) -> Result<TriMesh> {
    match family {
        MeshFamily::SquareRight => generate_square(SquarePattern::Right, n, seed),
        MeshFamily::SquareCrossed => generate_square(SquarePattern::Crossed, n, seed),
        MeshFamily::SquareNonuniform => generate_square(SquarePattern::Nonuniform, n, seed),
        MeshFamily::LshapeLeft => generate_lshape(LshapePattern::Left, n, seed),
        MeshFamily::LshapeUniform => generate_lshape(LshapePattern::Uniform, n, seed),
        MeshFamily::LshapeNonuniform => generate_lshape(LshapePattern::Nonuniform, n, seed),
    }
}

pub fn generate_square(pattern: SquarePattern, n: usize, seed: u64) -> Result<TriMesh> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be positive".into()));
    }
    if pattern == SquarePattern::Nonuniform && n < 2 {
        return Err(Error::InvalidArgument("nonuniform square mesh needs n >= 2".into()));
    }
    let (split, family) = match pattern {
        SquarePattern::Right => (Split::Right, MeshFamily::SquareRight),
        SquarePattern::Crossed => (Split::Crossed, MeshFamily::SquareCrossed),
        SquarePattern::Nonuniform => (Split::Right, MeshFamily::SquareNonuniform),
    };
    let (mesh, grid) = grid_mesh(n, |_, _| true, split, family)?;
    if pattern == SquarePattern::Nonuniform {
        perturb(mesh, &grid, seed)
    } else {
        Ok(mesh)
    }
}

pub fn generate_lshape(pattern: LshapePattern, n: usize, seed: u64) -> Result<TriMesh> {
    if n == 0 || n % 2 != 0 {
        return Err(Error::InvalidArgument(format!("L-shape needs a positive even n, got {n}")));
    }
    let (split, family) = match pattern {
        LshapePattern::Left => (Split::Left, MeshFamily::LshapeLeft),
        LshapePattern::Uniform => (Split::Crossed, MeshFamily::LshapeUniform),
        LshapePattern::Nonuniform => (Split::Left, MeshFamily::LshapeNonuniform),
    };
    let half = n / 2;
    let (mesh, grid) = grid_mesh(n, |i, j| !(i >= half && j >= half), split, family)?;
    if pattern == LshapePattern::Nonuniform {
        perturb(mesh, &grid, seed)
    } else {
        Ok(mesh)
    }
}

/// Builds the kept squares of the `n x n` grid. Returns the mesh together with
/// the grid coordinates of every grid vertex (`None` for square centers).
fn grid_mesh(
    n: usize,
    keep: impl Fn(usize, usize) -> bool,
    split: Split,
    family: MeshFamily,
) -> Result<(TriMesh, Vec<Option<(usize, usize)>>)> {
    let stride = n + 1;
    let mut used = vec![false; stride * stride];
    for j in 0..n {
        for i in 0..n {
            if keep(i, j) {
                for (di, dj) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                    used[(j + dj) * stride + i + di] = true;
                }
            }
        }
    }
    let h = 1.0 / n as f64;
    let mut index = vec![usize::MAX; stride * stride];
    let mut vertices = Vec::new();
    let mut grid = Vec::new();
    for j in 0..=n {
        for i in 0..=n {
            if used[j * stride + i] {
                index[j * stride + i] = vertices.len();
                vertices.push([i as f64 * h, j as f64 * h]);
                grid.push(Some((i, j)));
            }
        }
    }
    let mut cells = Vec::new();
    for j in 0..n {
        for i in 0..n {
            if !keep(i, j) {
                continue;
            }
            let v00 = index[j * stride + i];
            let v10 = index[j * stride + i + 1];
            let v01 = index[(j + 1) * stride + i];
            let v11 = index[(j + 1) * stride + i + 1];
            match split {
                Split::Right => {
                    cells.push([v00, v10, v11]);
                    cells.push([v00, v11, v01]);
                }
                Split::Left => {
                    cells.push([v00, v10, v01]);
                    cells.push([v10, v11, v01]);
                }
                Split::Crossed => {
                    let c = vertices.len();
                    vertices.push([(i as f64 + 0.5) * h, (j as f64 + 0.5) * h]);
                    grid.push(None);
                    cells.push([v00, v10, c]);
                    cells.push([v10, v11, c]);
                    cells.push([v11, v01, c]);
                    cells.push([v01, v00, c]);
                }
            }
        }
    }
    let mesh = build_topology(vertices, cells, family, n)?;
    Ok((mesh, grid))
}

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic value in `[-1, 1)` for grid vertex `(i, j)` and `axis`.
pub fn vertex_offset_unit(seed: u64, i: usize, j: usize, axis: usize) -> f64 {
    let mut h = splitmix64(seed);
    h = splitmix64(h ^ i as u64);
    h = splitmix64(h ^ j as u64);
    h = splitmix64(h ^ axis as u64);
    let u = (h >> 11) as f64 / (1u64 << 53) as f64;
    2.0 * u - 1.0
}

const MAX_PERTURB_ATTEMPTS: usize = 12;

/// Displaces every interior grid vertex by at most `0.25/N` per coordinate,
/// halving the magnitude until no cell is inverted.
fn perturb(mesh: TriMesh, grid: &[Option<(usize, usize)>], seed: u64) -> Result<TriMesh> {
    let on_boundary = mesh.boundary_vertices();
    let amplitude = 0.25 / mesh.n_per_side as f64;
    let mut scale = 1.0;
    for _ in 0..MAX_PERTURB_ATTEMPTS {
        let mut candidate = mesh.clone();
        for (v, g) in grid.iter().enumerate() {
            let Some((i, j)) = *g else { continue };
            if on_boundary[v] {
                continue;
            }
            for axis in 0..2 {
                candidate.vertices[v][axis] +=
                    scale * amplitude * vertex_offset_unit(seed, i, j, axis);
            }
        }
        if (0..candidate.cells.len()).all(|c| candidate.cell_area(c) > 0.0) {
            return Ok(candidate);
        }
        scale *= 0.5;
    }
    Err(Error::Mesh("vertex perturbation inverts cells at every magnitude tried".into()))
}

/// Enumerates edges (sorted vertex pairs, lexicographic order), cell adjacency
/// and orientation signs. Normals point from the lower to the higher adjacent
/// cell index and outward on the boundary. All boundary edges are tagged
/// Dirichlet.
pub fn build_topology(
    vertices: Vec<Point>,
    cells: Vec<[usize; 3]>,
    family: MeshFamily,
    n_per_side: usize,
) -> Result<TriMesh> {
    let nv = vertices.len();
    for (c, cell) in cells.iter().enumerate() {
        if cell.iter().any(|&v| v >= nv) {
            return Err(Error::Mesh(format!("cell {c} references a missing vertex")));
        }
    }
    let mut half_edges: Vec<(usize, usize, usize, usize)> = Vec::with_capacity(3 * cells.len());
    for (c, cell) in cells.iter().enumerate() {
        for local in 0..3 {
            let a = cell[(local + 1) % 3];
            let b = cell[(local + 2) % 3];
            half_edges.push((a.min(b), a.max(b), c, local));
        }
    }
    half_edges.sort_unstable();

    let mut edges = Vec::new();
    let mut cell_edges = vec![[usize::MAX; 3]; cells.len()];
    let mut cell_edge_signs = vec![[0.0; 3]; cells.len()];
    let mut k = 0;
    while k < half_edges.len() {
        let (a, b, c0, l0) = half_edges[k];
        let mut m = k + 1;
        while m < half_edges.len() && half_edges[m].0 == a && half_edges[m].1 == b {
            m += 1;
        }
        let e = edges.len();
        match m - k {
            1 => {
                edges.push(Edge { vertices: [a, b], cells: (c0, None) });
                cell_edges[c0][l0] = e;
                cell_edge_signs[c0][l0] = 1.0;
            }
            2 => {
                let (_, _, c1, l1) = half_edges[k + 1];
                if c0 == c1 {
                    return Err(Error::Mesh(format!("cell {c0} repeats edge ({a}, {b})")));
                }
                // sorted tuples give c0 < c1
                edges.push(Edge { vertices: [a, b], cells: (c0, Some(c1)) });
                cell_edges[c0][l0] = e;
                cell_edges[c1][l1] = e;
                cell_edge_signs[c0][l0] = 1.0;
                cell_edge_signs[c1][l1] = -1.0;
            }
            count => {
                return Err(Error::Mesh(format!(
                    "non-manifold edge ({a}, {b}) shared by {count} cells"
                )))
            }
        }
        k = m;
    }
    let boundary_tags =
        edges.iter().map(|e| e.is_boundary().then_some(BoundaryTag::Dirichlet)).collect();
    Ok(TriMesh {
        vertices,
        cells,
        edges,
        cell_edges,
        cell_edge_signs,
        boundary_tags,
        family,
        n_per_side,
    })
}

impl TriMesh {
    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// Grid spacing `1/N`.
    pub fn h(&self) -> f64 {
        1.0 / self.n_per_side as f64
    }

    pub fn cell_points(&self, cell: usize) -> [Point; 3] {
        let [a, b, c] = self.cells[cell];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// Signed area, positive for counterclockwise cells.
    pub fn cell_area(&self, cell: usize) -> f64 {
        let [p0, p1, p2] = self.cell_points(cell);
        0.5 * ((p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]))
    }

    pub fn edge_length(&self, edge: usize) -> f64 {
        let [a, b] = self.edges[edge].vertices;
        let (p, q) = (self.vertices[a], self.vertices[b]);
        (q[0] - p[0]).hypot(q[1] - p[1])
    }

    pub fn boundary_vertices(&self) -> Vec<bool> {
        let mut flags = vec![false; self.vertices.len()];
        for e in self.edges.iter().filter(|e| e.is_boundary()) {
            flags[e.vertices[0]] = true;
            flags[e.vertices[1]] = true;
        }
        flags
    }

    pub fn total_area(&self) -> f64 {
        (0..self.n_cells()).map(|c| self.cell_area(c)).sum()
    }

    /// Checks orientation, Euler's formula, adjacency signs and total area.
    pub fn validate(&self) -> Result<()> {
        for c in 0..self.n_cells() {
            let area = self.cell_area(c);
            if area <= 0.0 {
                return Err(Error::Mesh(format!("cell {c} has non-positive area {area:e}")));
            }
        }
        let euler =
            self.n_vertices() as i64 - self.n_edges() as i64 + self.n_cells() as i64;
        if euler != 1 {
            return Err(Error::Mesh(format!("Euler characteristic V - E + T = {euler}")));
        }
        for (e, edge) in self.edges.iter().enumerate() {
            let sign_in = |c: usize| {
                let l = self.cell_edges[c].iter().position(|&x| x == e);
                l.map(|l| self.cell_edge_signs[c][l])
            };
            match edge.cells {
                (c0, Some(c1)) => {
                    if sign_in(c0) != Some(1.0) || sign_in(c1) != Some(-1.0) {
                        return Err(Error::Mesh(format!("edge {e} has inconsistent signs")));
                    }
                }
                (c0, None) => {
                    if sign_in(c0) != Some(1.0) || self.boundary_tags[e].is_none() {
                        return Err(Error::Mesh(format!("boundary edge {e} is malformed")));
                    }
                }
            }
        }
        let expected = self.family.domain().area();
        let total = self.total_area();
        if ((total - expected) / expected).abs() > 1e-12 {
            return Err(Error::Mesh(format!("total area {total} differs from {expected}")));
        }
        Ok(())
    }

    /// Plain-text export: `V T E`, then one `x y` line per vertex, then one
    /// `a b c` line per cell.
    pub fn write_text<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{} {} {}", self.n_vertices(), self.n_cells(), self.n_edges())?;
        for p in &self.vertices {
            writeln!(w, "{} {}", p[0], p[1])?;
        }
        for c in &self.cells {
            writeln!(w, "{} {} {}", c[0], c[1], c[2])?;
        }
        Ok(())
    }

    /// VTK legacy ASCII unstructured grid of the triangulation alone.
    pub fn write_vtk<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        self.write_vtk_geometry(&mut w, &format!("{} N={}", self.family, self.n_per_side))
    }

    pub fn write_vtk_geometry<W: Write>(&self, mut w: W, title: &str) -> std::io::Result<()> {
        writeln!(w, "# vtk DataFile Version 3.0")?;
        writeln!(w, "{title}")?;
        writeln!(w, "ASCII")?;
        writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
        writeln!(w, "POINTS {} double", self.n_vertices())?;
        for p in &self.vertices {
            writeln!(w, "{} {} 0", p[0], p[1])?;
        }
        writeln!(w, "CELLS {} {}", self.n_cells(), 4 * self.n_cells())?;
        for c in &self.cells {
            writeln!(w, "3 {} {} {}", c[0], c[1], c[2])?;
        }
        writeln!(w, "CELL_TYPES {}", self.n_cells())?;
        for _ in &self.cells {
            writeln!(w, "5")?;
        }
        Ok(())
    }

    /// Indices of vertices lying on the segment from `a` to `b`.
    pub fn vertices_on_segment(&self, a: Point, b: Point) -> HashSet<usize> {
        (0..self.n_vertices()).filter(|&v| on_segment(self.vertices[v], a, b)).collect()
    }
}

pub(crate) fn on_segment(p: Point, a: Point, b: Point) -> bool {
    let tol = 1e-12;
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let cross = (p[0] - a[0]) * dy - (p[1] - a[1]) * dx;
    if cross.abs() > tol * len2.sqrt().max(1.0) {
        return false;
    }
    let t = ((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2;
    (-tol..=1.0 + tol).contains(&t)
}
