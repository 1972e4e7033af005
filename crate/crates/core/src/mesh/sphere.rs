//! Geodesic sphere generation and the elements-per-wavelength rule.

use std::collections::HashMap;

use super::geom::{self, Point};
use super::TriangleMesh;
use crate::{Error, Result};

/// Largest accepted icosphere subdivision level.
pub const MAX_SUBDIVISIONS: u32 = 8;

/// Sphere meshing request driven by the minimum wavelength at the interface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshSpec {
    pub radius: f64,
    pub center: Point,
    /// Elements per wavelength.
    pub n_h: f64,
    pub lambda_min: f64,
}

impl MeshSpec {
    /// Target edge length `lambda_min / n_h`.
    pub fn max_edge(&self) -> f64 {
        self.lambda_min / self.n_h
    }
}

fn icosahedron() -> (Vec<Point>, Vec<[usize; 3]>) {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let v: Vec<Point> = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ]
    .iter()
    .map(|&p| geom::normalize(p))
    .collect();
    let f = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    (v, f)
}

/// Icosahedron with every face split into `n * n` triangles, projected onto
/// the sphere. `V = 10 n^2 + 2`.
pub fn geodesic_sphere(radius: f64, center: Point, n: usize) -> Result<TriangleMesh> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::InvalidInput(format!("radius must be positive, got {radius}")));
    }
    if n == 0 {
        return Err(Error::InvalidInput("at least one division per edge is required".into()));
    }
    let (ico_v, ico_f) = icosahedron();
    let mut vertices: Vec<Point> = Vec::with_capacity(10 * n * n + 2);
    // key: corner ids with positive integer weight, sorted
    let mut index: HashMap<Vec<(usize, usize)>, usize> = HashMap::new();
    let mut triangles = Vec::with_capacity(20 * n * n);

    for face in &ico_f {
        let mut local = vec![vec![0usize; n + 1]; n + 1];
        for i in 0..=n {
            for j in 0..=(n - i) {
                let w = [n - i - j, i, j];
                let mut key: Vec<(usize, usize)> =
                    (0..3).filter(|&c| w[c] > 0).map(|c| (face[c], w[c])).collect();
                key.sort_unstable();
                let id = *index.entry(key).or_insert_with(|| {
                    let mut p = [0.0; 3];
                    for c in 0..3 {
                        p = geom::add(p, geom::scale(ico_v[face[c]], w[c] as f64));
                    }
                    let q = geom::add(center, geom::scale(geom::normalize(p), radius));
                    vertices.push(q);
                    vertices.len() - 1
                });
                local[i][j] = id;
            }
        }
        for i in 0..n {
            for j in 0..(n - i) {
                triangles.push([local[i][j], local[i + 1][j], local[i][j + 1]]);
                if j + 1 < n - i {
                    triangles.push([local[i + 1][j], local[i + 1][j + 1], local[i][j + 1]]);
                }
            }
        }
    }
    TriangleMesh::new(vertices, triangles)
}

/// Icosahedron refined `subdivisions` times by edge bisection: `V = 10 4^s + 2`.
pub fn icosphere(radius: f64, center: Point, subdivisions: u32) -> Result<TriangleMesh> {
    if subdivisions > MAX_SUBDIVISIONS {
        return Err(Error::Capacity(format!(
            "subdivision level {subdivisions} exceeds the limit {MAX_SUBDIVISIONS}"
        )));
    }
    geodesic_sphere(radius, center, 1usize << subdivisions)
}

/// Coarsest geodesic sphere whose longest edge is at most `lambda_min / n_h`.
///
/// The refinement runs over divisions per icosahedron edge rather than over
/// bisection levels, so the node count tracks the target size closely.
pub fn refine_for_frequency(spec: &MeshSpec) -> Result<TriangleMesh> {
    if !(spec.lambda_min > 0.0 && spec.lambda_min.is_finite()) {
        return Err(Error::InvalidInput("minimum wavelength must be positive".into()));
    }
    if !(spec.n_h > 0.0) {
        return Err(Error::InvalidInput("elements per wavelength must be positive".into()));
    }
    let h = spec.max_edge();
    let max_n = 1usize << MAX_SUBDIVISIONS;
    // icosahedron edge over circumradius, stretched by at most ~1.3 after projection
    let estimate = (1.0515 * spec.radius / h).ceil();
    if !estimate.is_finite() || estimate > 2.0 * max_n as f64 {
        return Err(Error::Capacity(format!(
            "edge length {h:.3e} m needs about {estimate} divisions per edge, limit is {max_n}"
        )));
    }
    let mut n = (estimate as usize).max(1);
    // step back in case the estimate overshoots
    while n > 1 && geodesic_sphere(spec.radius, spec.center, n - 1)?.max_edge_length() <= h {
        n -= 1;
    }
    loop {
        if n > max_n {
            return Err(Error::Capacity(format!(
                "edge length {h:.3e} m needs more than {max_n} divisions per edge \
                 (subdivision level above {MAX_SUBDIVISIONS})"
            )));
        }
        let mesh = geodesic_sphere(spec.radius, spec.center, n)?;
        if mesh.max_edge_length() <= h {
            return Ok(mesh);
        }
        n += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn counts() {
        for s in 0..4 {
            let m = icosphere(1.0, [0.0; 3], s).unwrap();
            let expected = 10 * 4usize.pow(s) + 2;
            assert_eq!(m.vertex_count(), expected);
            assert_eq!(m.triangle_count(), 2 * expected - 4);
            assert_eq!(m.euler_characteristic(), 2);
        }
        let m = geodesic_sphere(1.0, [0.0; 3], 3).unwrap();
        assert_eq!(m.vertex_count(), 92);
    }

    #[test]
    fn guard() {
        assert!(matches!(icosphere(1.0, [0.0; 3], 9), Err(Error::Capacity(_))));
        assert!(icosphere(0.0, [0.0; 3], 1).is_err());
    }

    #[test]
    fn volume_and_area_increase() {
        let r = 2.0;
        let exact_v = 4.0 / 3.0 * PI * r * r * r;
        let mut last = (0.0, 0.0);
        for s in 0..5 {
            let m = icosphere(r, [0.5, -1.0, 2.0], s).unwrap();
            let v = m.signed_volume();
            let a = m.area();
            assert!(v > last.0 && a > last.1);
            assert!(a < 4.0 * PI * r * r);
            if s >= 2 {
                assert!(v / exact_v > 0.9 && v / exact_v <= 1.0);
            }
            last = (v, a);
        }
    }

    #[test]
    fn quasi_uniform() {
        for n in [1, 2, 5, 16, 40] {
            let m = geodesic_sphere(1.0, [0.0; 3], n).unwrap();
            assert!(m.max_edge_length() / m.min_edge_length() <= 2.5, "n = {n}");
        }
    }

    #[test]
    fn frequency_rule() {
        let spec = MeshSpec { radius: 5e-3, center: [0.0; 3], n_h: 4.0, lambda_min: 1.412e-3 };
        let m = refine_for_frequency(&spec).unwrap();
        assert!(m.max_edge_length() <= 0.353e-3 + 1e-12);
        assert!((2500..=4500).contains(&m.vertex_count()), "{}", m.vertex_count());
        let n = ((m.vertex_count() - 2) as f64 / 10.0).sqrt().round() as usize;
        let coarser = geodesic_sphere(5e-3, [0.0; 3], n - 1).unwrap();
        assert!(coarser.max_edge_length() > 0.353e-3);

        let bad = MeshSpec { n_h: f64::INFINITY, ..spec };
        assert!(matches!(refine_for_frequency(&bad), Err(Error::Capacity(_))));
        let huge = MeshSpec { n_h: 1e6, ..spec };
        assert!(matches!(refine_for_frequency(&huge), Err(Error::Capacity(_))));
    }
}
