//! Least-squares three-field elasticity: meshes, RT0/CG1/DG0 spaces, block
//! assembly, the reduced displacement pencil and its spectrum.

pub mod assemble;
pub mod dof;
pub mod error;
pub mod mesh;
pub mod reduce;
pub mod sparse;
pub mod spectrum;

pub use assemble::{assemble_blocks, assemble_blocks_with, AssemblyMode, BlockSystem};
pub use dof::{build_dofmap, BoundaryConfig, BoundarySegment, DofMap, ElasticParams, MeanConstraint};
pub use error::{Error, Result};
pub use mesh::{generate, BoundaryTag, Domain, MeshFamily, TriMesh};
pub use reduce::{build_schur_pencil, eliminate_rotation, reduce, SchurPencil, TildeMatrices};
pub use spectrum::{solve_pencil, solve_schur, SolveOptions, Spectrum};
