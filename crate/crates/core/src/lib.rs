//! Boundary element engine for time-harmonic acoustic transmission through
//! several disjoint penetrable objects.
//!
//! The crate is organised bottom-up:
//!
//! * [`model`]: materials, wavenumber law, plane waves and scenes.
//! * [`mesh`]: closed triangulated interfaces (geodesic spheres, MSH 2.2 I/O).
//! * [`assembly`]: dense Galerkin boundary operators on P1 spaces plus the
//!   sparse mass and Laplace–Beltrami matrices.
//! * [`linalg`]: composable linear actions, sparse factorisations and GMRES.
//! * [`formulation`]: block systems for the single-trace, multiple-traces,
//!   auxiliary-field, single-potential and mixed-potential families.
//! * [`precond`]: mass, Calderón, opposite-order and OSRC preconditioners.
//! * [`oracle`]: the series solution for a single penetrable sphere.
//! * [`field`]: field reconstruction on grids and the PSNR metric.
//! * [`harness`]: benchmark configuration, records, reports and the
//!   acceptance checks shared by the CLI and the test suite.

pub mod assembly;
pub mod error;
pub mod field;
pub mod formulation;
pub mod harness;
pub mod linalg;
pub mod mesh;
pub mod model;
pub mod oracle;
pub mod precond;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;

pub use mesh::{MeshSpec, TriangleMesh};
pub use model::{Material, Scene, SceneObject, Wavenumber};
pub use linalg::{Action, LinearAction, SolveReport};
pub use assembly::{
    AssemblyOptions, DenseOperator, OperatorKind, P1Space, SparseKind, SparseLocalOperator,
};
pub use field::{FieldGrid, GridSpec, Region};
pub use formulation::{BlockSystem, CombinedCoefficients, Family, FormulationSpec, SolutionTraces};
pub use precond::{OsrcParams, PreconditionerKind, PreconditionerSpec};
