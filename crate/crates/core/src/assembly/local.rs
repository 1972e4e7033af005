//! Sparse mass and Laplace–Beltrami matrices on P1 spaces.

use std::sync::Arc;

use super::P1Space;
use crate::linalg::CsrMatrix;
use crate::mesh::geom::{cross, dot, scale, sub};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SparseKind {
    Mass,
    LaplaceBeltrami,
}

#[derive(Debug, Clone)]
pub struct SparseLocalOperator {
    pub kind: SparseKind,
    pub space: P1Space,
    pub matrix: Arc<CsrMatrix>,
}

/// `M_ij = int phi_i phi_j`: `A/6` on the diagonal, `A/12` off it, per triangle.
pub fn assemble_mass(space: &P1Space) -> SparseLocalOperator {
    let mesh = &space.mesh;
    let mut t = Vec::with_capacity(9 * mesh.triangle_count());
    for (tri, &area) in mesh.triangles.iter().zip(&mesh.areas) {
        for a in 0..3 {
            for b in 0..3 {
                let v = if a == b { area / 6.0 } else { area / 12.0 };
                t.push((tri[a], tri[b], v));
            }
        }
    }
    SparseLocalOperator {
        kind: SparseKind::Mass,
        space: space.clone(),
        matrix: Arc::new(CsrMatrix::from_triplets(space.dof_count(), &t)),
    }
}

/// `S_ij = int grad_G phi_i . grad_G phi_j` with flat-triangle gradients.
pub fn assemble_laplace_beltrami(space: &P1Space) -> SparseLocalOperator {
    let mesh = &space.mesh;
    let mut t = Vec::with_capacity(9 * mesh.triangle_count());
    for (i, tri) in mesh.triangles.iter().enumerate() {
        let p = mesh.corners(tri);
        let n = mesh.normals[i];
        let area = mesh.areas[i];
        // grad phi_a = n x (opposite edge) / 2A
        let grads: Vec<_> = (0..3)
            .map(|a| scale(cross(n, sub(p[(a + 2) % 3], p[(a + 1) % 3])), 0.5 / area))
            .collect();
        for a in 0..3 {
            for b in 0..3 {
                t.push((tri[a], tri[b], area * dot(grads[a], grads[b])));
            }
        }
    }
    SparseLocalOperator {
        kind: SparseKind::LaplaceBeltrami,
        space: space.clone(),
        matrix: Arc::new(CsrMatrix::from_triplets(space.dof_count(), &t)),
    }
}
