//! Closed triangulated interfaces with outward normals.

pub mod geom;
mod msh;
mod sphere;

use std::collections::HashMap;

use crate::{Error, Result};
use geom::Point;

pub use msh::{export_msh, import_msh};
pub use sphere::{geodesic_sphere, icosphere, refine_for_frequency, MeshSpec, MAX_SUBDIVISIONS};

/// Flat-triangle surface mesh of a closed, outward-oriented 2-manifold.
#[derive(Debug, Clone)]
pub struct TriangleMesh {
    pub vertices: Vec<Point>,
    pub triangles: Vec<[usize; 3]>,
    /// Outward unit normal of each triangle.
    pub normals: Vec<Point>,
    pub areas: Vec<f64>,
}

impl TriangleMesh {
    /// Validates a closed surface and flips it if the signed volume is negative.
    ///
    /// Triangles must already be consistently oriented among themselves; use
    /// [`TriangleMesh::from_unoriented`] for soups with mixed winding.
    pub fn new(vertices: Vec<Point>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        if triangles.is_empty() {
            return Err(Error::MeshValidation("mesh has no triangles".into()));
        }
        for t in &triangles {
            if t.iter().any(|&v| v >= vertices.len()) {
                return Err(Error::MeshValidation(format!("triangle {t:?} references a missing vertex")));
            }
            if t[0] == t[1] || t[1] == t[2] || t[0] == t[2] {
                return Err(Error::MeshValidation(format!("triangle {t:?} repeats a vertex")));
            }
        }
        check_manifold(&triangles)?;
        let mut mesh = TriangleMesh {
            vertices,
            triangles,
            normals: Vec::new(),
            areas: Vec::new(),
        };
        if mesh.signed_volume() < 0.0 {
            for t in &mut mesh.triangles {
                t.swap(1, 2);
            }
        }
        mesh.compute_geometry();
        let h = mesh.max_edge_length();
        let threshold = 1e-14 * h * h;
        if let Some(i) = mesh.areas.iter().position(|&a| !(a > threshold)) {
            return Err(Error::MeshValidation(format!(
                "triangle {i} is degenerate (area {:.3e})",
                mesh.areas[i]
            )));
        }
        Ok(mesh)
    }

    /// Like [`TriangleMesh::new`] but first makes the winding consistent by
    /// propagating orientation across shared edges.
    pub fn from_unoriented(vertices: Vec<Point>, mut triangles: Vec<[usize; 3]>) -> Result<Self> {
        orient_consistently(&mut triangles)?;
        Self::new(vertices, triangles)
    }

    fn compute_geometry(&mut self) {
        self.normals.clear();
        self.areas.clear();
        for t in &self.triangles {
            let [a, b, c] = self.corners(t);
            let n = geom::cross(geom::sub(b, a), geom::sub(c, a));
            let twice = geom::norm(n);
            self.areas.push(0.5 * twice);
            self.normals.push(geom::scale(n, 1.0 / twice));
        }
    }

    #[inline]
    pub fn corners(&self, t: &[usize; 3]) -> [Point; 3] {
        [self.vertices[t[0]], self.vertices[t[1]], self.vertices[t[2]]]
    }

    #[inline]
    pub fn triangle_corners(&self, i: usize) -> [Point; 3] {
        self.corners(&self.triangles[i])
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut e: Vec<(usize, usize)> = self
            .triangles
            .iter()
            .flat_map(|t| [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])])
            .map(|(a, b)| (a.min(b), a.max(b)))
            .collect();
        e.sort_unstable();
        e.dedup();
        e
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.vertices.len() as i64 - self.edges().len() as i64 + self.triangles.len() as i64
    }

    pub fn signed_volume(&self) -> f64 {
        self.triangles
            .iter()
            .map(|t| {
                let [a, b, c] = self.corners(t);
                geom::dot(a, geom::cross(b, c)) / 6.0
            })
            .sum()
    }

    pub fn area(&self) -> f64 {
        self.areas.iter().sum()
    }

    fn edge_lengths(&self) -> impl Iterator<Item = f64> + '_ {
        self.triangles.iter().flat_map(move |t| {
            let [a, b, c] = self.corners(t);
            [geom::dist(a, b), geom::dist(b, c), geom::dist(c, a)]
        })
    }

    pub fn max_edge_length(&self) -> f64 {
        self.edge_lengths().fold(0.0, f64::max)
    }

    pub fn min_edge_length(&self) -> f64 {
        self.edge_lengths().fold(f64::INFINITY, f64::min)
    }

    pub fn centroid(&self, i: usize) -> Point {
        let [a, b, c] = self.triangle_corners(i);
        geom::scale(geom::add(a, geom::add(b, c)), 1.0 / 3.0)
    }

    pub fn bounding_box(&self) -> (Point, Point) {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for v in &self.vertices {
            for d in 0..3 {
                lo[d] = lo[d].min(v[d]);
                hi[d] = hi[d].max(v[d]);
            }
        }
        (lo, hi)
    }

    /// Radius of a sphere around the bounding-box centre enclosing every vertex.
    pub fn enclosing_radius(&self) -> f64 {
        let (lo, hi) = self.bounding_box();
        let c = geom::scale(geom::add(lo, hi), 0.5);
        self.vertices.iter().map(|&v| geom::dist(v, c)).fold(0.0, f64::max)
    }

    /// Point-in-solid test from the summed solid angle of all triangles.
    pub fn contains_point(&self, p: Point) -> bool {
        let mut omega = 0.0;
        for t in &self.triangles {
            let [a, b, c] = self.corners(t);
            let (ra, rb, rc) = (geom::sub(a, p), geom::sub(b, p), geom::sub(c, p));
            let (la, lb, lc) = (geom::norm(ra), geom::norm(rb), geom::norm(rc));
            let num = geom::dot(ra, geom::cross(rb, rc));
            let den = la * lb * lc + geom::dot(ra, rb) * lc + geom::dot(rb, rc) * la + geom::dot(rc, ra) * lb;
            omega += 2.0 * num.atan2(den);
        }
        omega > 2.0 * std::f64::consts::PI
    }

    /// Minimum distance between the vertices of either mesh and the triangles of the other.
    pub fn distance_to_mesh(&self, other: &TriangleMesh) -> f64 {
        fn one_way(a: &TriangleMesh, b: &TriangleMesh) -> f64 {
            let mut best = f64::INFINITY;
            for &p in &a.vertices {
                for t in &b.triangles {
                    let [x, y, z] = b.corners(t);
                    best = best.min(geom::point_triangle_distance(p, x, y, z));
                }
            }
            best
        }
        one_way(self, other).min(one_way(other, self))
    }

    /// Triangles incident to each vertex.
    pub fn vertex_triangles(&self) -> Vec<Vec<usize>> {
        let mut star = vec![Vec::new(); self.vertices.len()];
        for (i, t) in self.triangles.iter().enumerate() {
            for &v in t {
                star[v].push(i);
            }
        }
        star
    }

    pub fn translated(&self, offset: Point) -> TriangleMesh {
        let mut m = self.clone();
        for v in &mut m.vertices {
            *v = geom::add(*v, offset);
        }
        m
    }
}

fn check_manifold(triangles: &[[usize; 3]]) -> Result<()> {
    let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
    for t in triangles {
        for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
            *directed.entry((a, b)).or_default() += 1;
        }
    }
    let mut bad: Vec<(usize, usize)> = Vec::new();
    for (&(a, b), &count) in &directed {
        let back = directed.get(&(b, a)).copied().unwrap_or(0);
        if count != 1 || back != 1 {
            bad.push((a.min(b), a.max(b)));
        }
    }
    if bad.is_empty() {
        return Ok(());
    }
    bad.sort_unstable();
    bad.dedup();
    let shown: Vec<String> = bad.iter().take(10).map(|(a, b)| format!("({a},{b})")).collect();
    Err(Error::MeshValidation(format!(
        "surface is not a closed, consistently oriented 2-manifold; {} offending edges: {}{}",
        bad.len(),
        shown.join(", "),
        if bad.len() > 10 { ", ..." } else { "" }
    )))
}

fn orient_consistently(triangles: &mut [[usize; 3]]) -> Result<()> {
    let mut by_edge: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    for (i, t) in triangles.iter().enumerate() {
        for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
            by_edge.entry((a.min(b), a.max(b))).or_default().push(i);
        }
    }
    if let Some((e, _)) = by_edge.iter().find(|(_, v)| v.len() != 2) {
        return Err(Error::MeshValidation(format!(
            "edge ({}, {}) is not shared by exactly two triangles",
            e.0, e.1
        )));
    }
    let has_directed = |t: &[usize; 3], a: usize, b: usize| {
        (t[0] == a && t[1] == b) || (t[1] == a && t[2] == b) || (t[2] == a && t[0] == b)
    };
    let mut visited = vec![false; triangles.len()];
    for seed in 0..triangles.len() {
        if visited[seed] {
            continue;
        }
        visited[seed] = true;
        let mut stack = vec![seed];
        while let Some(i) = stack.pop() {
            let t = triangles[i];
            for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                for &j in &by_edge[&(a.min(b), a.max(b))] {
                    if j == i {
                        continue;
                    }
                    if visited[j] {
                        if has_directed(&triangles[j], a, b) {
                            return Err(Error::MeshValidation("surface is not orientable".into()));
                        }
                        continue;
                    }
                    if has_directed(&triangles[j], a, b) {
                        triangles[j].swap(1, 2);
                    }
                    visited[j] = true;
                    stack.push(j);
                }
            }
        }
    }
    Ok(())
}
