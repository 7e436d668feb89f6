//! Discrete spaces and the global index layout.
//!
//! Stress: one RT0 field per tensor row, one normal-component DOF per edge
//! and row. Displacement: vector continuous P1 on vertices off the Dirichlet
//! boundary. Rotation: one constant per cell. Global unknowns are ordered
//! stress, then displacement, then rotation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{on_segment, BoundaryTag, Point, TriMesh};

/// Lamé parameters of an isotropic material in two dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElasticParams {
    pub mu: f64,
    pub lambda: f64,
}

impl ElasticParams {
    pub const DIM: usize = 2;

    pub fn new(mu: f64, lambda: f64) -> Result<Self> {
        if !(mu.is_finite() && mu > 0.0) {
            return Err(Error::InvalidArgument(format!("mu must be positive and finite, got {mu}")));
        }
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "lambda must be positive and finite, got {lambda}"
            )));
        }
        Ok(Self { mu, lambda })
    }
}

/// A straight piece of the boundary carrying a tag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundarySegment {
    pub tag: BoundaryTag,
    pub from: Point,
    pub to: Point,
}

/// Partition of the boundary into the displacement (Dirichlet) and traction
/// (Neumann) parts. Boundary edges not covered by a segment are Dirichlet.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryConfig {
    #[default]
    DirichletAll,
    Segments(Vec<BoundarySegment>),
}

impl BoundaryConfig {
    pub fn tag_edge(&self, a: Point, b: Point) -> BoundaryTag {
        match self {
            BoundaryConfig::DirichletAll => BoundaryTag::Dirichlet,
            BoundaryConfig::Segments(segments) => segments
                .iter()
                .find(|s| on_segment(a, s.from, s.to) && on_segment(b, s.from, s.to))
                .map_or(BoundaryTag::Dirichlet, |s| s.tag),
        }
    }
}

/// Treatment of the zero-mean conditions on `tr(tau)` and the rotation that
/// apply when the whole boundary is Dirichlet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeanConstraint {
    #[default]
    Unconstrained,
    /// One multiplier for `∫ tr(tau) = 0` and one for `∫ psi = 0`.
    Constrained,
}

impl TriMesh {
    /// Re-tags boundary edges according to `bc`.
    pub fn retag_boundary(&mut self, bc: &BoundaryConfig) {
        for e in 0..self.edges.len() {
            if self.edges[e].is_boundary() {
                let [a, b] = self.edges[e].vertices;
                self.boundary_tags[e] = Some(bc.tag_edge(self.vertices[a], self.vertices[b]));
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct DofMap {
    pub n_stress: usize,
    pub n_disp: usize,
    pub n_rot: usize,
    /// Per mesh edge, its slot among the unconstrained stress edges.
    edge_slot: Vec<Option<usize>>,
    n_stress_edges: usize,
    /// Per mesh vertex, its slot among the free displacement vertices.
    vertex_slot: Vec<Option<usize>>,
    n_free_vertices: usize,
    pub edge_tags: Vec<Option<BoundaryTag>>,
    pub bc: BoundaryConfig,
    pub constraint: MeanConstraint,
}

pub fn build_dofmap(mesh: &TriMesh, bc: &BoundaryConfig, constraint: MeanConstraint) -> Result<DofMap> {
    let edge_tags: Vec<Option<BoundaryTag>> = mesh
        .edges
        .iter()
        .map(|e| {
            e.is_boundary().then(|| {
                let [a, b] = e.vertices;
                bc.tag_edge(mesh.vertices[a], mesh.vertices[b])
            })
        })
        .collect();
    let has_neumann = edge_tags.iter().any(|t| *t == Some(BoundaryTag::Neumann));
    if has_neumann && constraint == MeanConstraint::Constrained {
        return Err(Error::InvalidArgument(
            "mean-value constraints apply only to a fully Dirichlet boundary".into(),
        ));
    }

    let mut edge_slot = vec![None; mesh.n_edges()];
    let mut n_stress_edges = 0;
    for (e, tag) in edge_tags.iter().enumerate() {
        if *tag != Some(BoundaryTag::Neumann) {
            edge_slot[e] = Some(n_stress_edges);
            n_stress_edges += 1;
        }
    }

    let mut dirichlet = vec![false; mesh.n_vertices()];
    for (e, tag) in edge_tags.iter().enumerate() {
        if *tag == Some(BoundaryTag::Dirichlet) {
            for v in mesh.edges[e].vertices {
                dirichlet[v] = true;
            }
        }
    }
    let mut vertex_slot = vec![None; mesh.n_vertices()];
    let mut n_free_vertices = 0;
    for v in 0..mesh.n_vertices() {
        if !dirichlet[v] {
            vertex_slot[v] = Some(n_free_vertices);
            n_free_vertices += 1;
        }
    }
    if n_free_vertices == 0 {
        return Err(Error::EmptyDisplacementSpace);
    }

    Ok(DofMap {
        n_stress: 2 * n_stress_edges,
        n_disp: 2 * n_free_vertices,
        n_rot: mesh.n_cells(),
        edge_slot,
        n_stress_edges,
        vertex_slot,
        n_free_vertices,
        edge_tags,
        bc: bc.clone(),
        constraint,
    })
}

impl DofMap {
    pub fn total(&self) -> usize {
        self.n_stress + self.n_disp + self.n_rot
    }

    pub fn n_free_vertices(&self) -> usize {
        self.n_free_vertices
    }

    /// Global index of stress row `row` on `edge`; `None` on Neumann edges.
    pub fn stress_index(&self, row: usize, edge: usize) -> Option<usize> {
        debug_assert!(row < 2);
        self.edge_slot[edge].map(|s| row * self.n_stress_edges + s)
    }

    /// Index of displacement `component` at `vertex` within the displacement block.
    pub fn disp_block_index(&self, component: usize, vertex: usize) -> Option<usize> {
        debug_assert!(component < 2);
        self.vertex_slot[vertex].map(|s| component * self.n_free_vertices + s)
    }

    pub fn disp_index(&self, component: usize, vertex: usize) -> Option<usize> {
        self.disp_block_index(component, vertex).map(|i| self.n_stress + i)
    }

    pub fn rot_index(&self, cell: usize) -> usize {
        self.n_stress + self.n_disp + cell
    }

    pub fn is_free_vertex(&self, vertex: usize) -> bool {
        self.vertex_slot[vertex].is_some()
    }
}

/// The three RT0 shape functions of one cell,
/// `phi_i(x) = s_i |e_i| / (2|K|) (x - p_i)` with `p_i` the vertex opposite
/// local edge `i`. Their normal component on edge `j`, measured along the
/// global edge orientation, is `delta_ij`.
#[derive(Debug, Clone, Copy)]
pub struct Rt0Basis {
    pub coeff: [f64; 3],
    pub apex: [Point; 3],
}

impl Rt0Basis {
    pub fn value(&self, i: usize, x: Point) -> [f64; 2] {
        let c = self.coeff[i];
        [c * (x[0] - self.apex[i][0]), c * (x[1] - self.apex[i][1])]
    }

    pub fn divergence(&self, i: usize) -> f64 {
        2.0 * self.coeff[i]
    }
}

pub fn rt0_basis_on_cell(mesh: &TriMesh, cell: usize) -> Result<Rt0Basis> {
    if cell >= mesh.n_cells() {
        return Err(Error::InvalidArgument(format!("cell {cell} out of range")));
    }
    let area = mesh.cell_area(cell);
    let apex = mesh.cell_points(cell);
    let mut coeff = [0.0; 3];
    for i in 0..3 {
        let e = mesh.cell_edges[cell][i];
        coeff[i] = mesh.cell_edge_signs[cell][i] * mesh.edge_length(e) / (2.0 * area);
    }
    Ok(Rt0Basis { coeff, apex })
}

/// Gradients of the barycentric coordinates of a cell.
pub fn p1_gradients(points: &[Point; 3]) -> [[f64; 2]; 3] {
    let [p0, p1, p2] = *points;
    let det = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
    let mut g = [[0.0; 2]; 3];
    for i in 0..3 {
        let a = points[(i + 1) % 3];
        let b = points[(i + 2) % 3];
        g[i] = [(a[1] - b[1]) / det, (b[0] - a[0]) / det];
    }
    g
}

/// Barycentric coordinates of `x` in the triangle.
pub fn barycentric(points: &[Point; 3], x: Point) -> [f64; 3] {
    let g = p1_gradients(points);
    let mut l = [0.0; 3];
    for i in 0..3 {
        let p = points[(i + 1) % 3];
        l[i] = g[i][0] * (x[0] - p[0]) + g[i][1] * (x[1] - p[1]);
    }
    l
}

/// Outward unit normal of local edge `i` of a counterclockwise cell.
pub fn outward_normal(points: &[Point; 3], i: usize) -> [f64; 2] {
    let a = points[(i + 1) % 3];
    let b = points[(i + 2) % 3];
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len = dx.hypot(dy);
    [dy / len, -dx / len]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_topology, generate_square, MeshFamily, SquarePattern};

    fn reference_mesh() -> TriMesh {
        build_topology(
            vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            vec![[0, 1, 2]],
            MeshFamily::SquareRight,
            1,
        )
        .unwrap()
    }

    #[test]
    fn params_are_validated() {
        assert!(ElasticParams::new(1.0, 1e8).is_ok());
        assert!(ElasticParams::new(0.0, 1.0).is_err());
        assert!(ElasticParams::new(1.0, f64::INFINITY).is_err());
        assert!(ElasticParams::new(1.0, -1.0).is_err());
    }

    #[test]
    fn counts_square_right_4() {
        let m = generate_square(SquarePattern::Right, 4, 0).unwrap();
        let d = build_dofmap(&m, &BoundaryConfig::DirichletAll, MeanConstraint::Unconstrained).unwrap();
        assert_eq!((d.n_stress, d.n_disp, d.n_rot, d.total()), (112, 18, 32, 162));
    }

    #[test]
    fn counts_square_crossed_2() {
        let m = generate_square(SquarePattern::Crossed, 2, 0).unwrap();
        let d = build_dofmap(&m, &BoundaryConfig::DirichletAll, MeanConstraint::Unconstrained).unwrap();
        assert_eq!((d.n_stress, d.n_disp, d.n_rot), (56, 10, 16));
    }

    #[test]
    fn empty_displacement_space() {
        let m = generate_square(SquarePattern::Right, 1, 0).unwrap();
        let err = build_dofmap(&m, &BoundaryConfig::DirichletAll, MeanConstraint::Unconstrained);
        assert!(matches!(err, Err(Error::EmptyDisplacementSpace)));
    }

    #[test]
    fn index_ranges_are_contiguous() {
        let m = generate_square(SquarePattern::Crossed, 3, 0).unwrap();
        let d = build_dofmap(&m, &BoundaryConfig::DirichletAll, MeanConstraint::Unconstrained).unwrap();
        let mut seen = vec![false; d.total()];
        for e in 0..m.n_edges() {
            for r in 0..2 {
                seen[d.stress_index(r, e).unwrap()] = true;
            }
        }
        for v in 0..m.n_vertices() {
            for c in 0..2 {
                if let Some(i) = d.disp_index(c, v) {
                    assert!(i >= d.n_stress && i < d.n_stress + d.n_disp);
                    seen[i] = true;
                }
            }
        }
        for c in 0..m.n_cells() {
            seen[d.rot_index(c)] = true;
        }
        assert!(seen.into_iter().all(|s| s));
    }

    #[test]
    fn neumann_side_removes_stress_and_frees_vertices() {
        let m = generate_square(SquarePattern::Right, 4, 0).unwrap();
        let bc = BoundaryConfig::Segments(vec![BoundarySegment {
            tag: BoundaryTag::Neumann,
            from: [1.0, 0.0],
            to: [1.0, 1.0],
        }]);
        let d = build_dofmap(&m, &bc, MeanConstraint::Unconstrained).unwrap();
        assert_eq!(d.n_stress, 2 * (56 - 4));
        // three interior vertices of the right side become free
        assert_eq!(d.n_disp, 2 * (9 + 3));
        assert!(build_dofmap(&m, &bc, MeanConstraint::Constrained).is_err());
    }

    #[test]
    fn reference_triangle_divergence() {
        let m = reference_mesh();
        let basis = rt0_basis_on_cell(&m, 0).unwrap();
        let div = basis.divergence(0);
        assert!((div - 2.0 * 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn rt0_flux_duality_on_reference() {
        let m = reference_mesh();
        let basis = rt0_basis_on_cell(&m, 0).unwrap();
        let pts = m.cell_points(0);
        for i in 0..3 {
            for j in 0..3 {
                let a = pts[(j + 1) % 3];
                let b = pts[(j + 2) % 3];
                let mid = [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0];
                let n = outward_normal(&pts, j);
                let v = basis.value(i, mid);
                let flux = m.cell_edge_signs[0][j] * (v[0] * n[0] + v[1] * n[1]);
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((flux - expect).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn barycentric_partition_of_unity() {
        let pts = [[0.1, 0.2], [0.9, 0.3], [0.4, 1.1]];
        let l = barycentric(&pts, [0.3, 0.5]);
        assert!((l.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        let at_vertex = barycentric(&pts, pts[1]);
        assert!((at_vertex[1] - 1.0).abs() < 1e-14 && at_vertex[0].abs() < 1e-14);
    }
}
