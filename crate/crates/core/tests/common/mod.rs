#![allow(dead_code)]

use std::sync::Arc;

use bemtrans::assembly::{assemble_boundary_operator, AssemblyOptions, OperatorKind, P1Space};
use bemtrans::mesh::{icosphere, TriangleMesh};
use bemtrans::C64;
use rand::{Rng, SeedableRng};

pub type Point = [f64; 3];

pub fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}
pub fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}
pub fn cross(a: Point, b: Point) -> Point {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}
pub fn norm(a: Point) -> f64 {
    dot(a, a).sqrt()
}

pub fn sphere_space(radius: f64, s: u32) -> P1Space {
    P1Space::new(Arc::new(icosphere(radius, [0.0; 3], s).unwrap()))
}

pub fn op(kind: OperatorKind, k: C64, space: &P1Space) -> bemtrans::DenseOperator {
    assemble_boundary_operator(kind, k, space, space, &AssemblyOptions::default()).unwrap()
}

pub fn random_vec(n: usize, seed: u64) -> Vec<C64> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
}

pub fn rel(a: &[C64], b: &[C64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    let n: f64 = b.iter().map(|y| y.norm_sqr()).sum();
    (d / n).sqrt()
}

/// `int_T 1/|x - y| dy` in closed form for any point `x` (edge-sum formula with
/// the solid-angle correction for off-plane points).
pub fn triangle_inverse_distance(x: Point, t: [Point; 3]) -> f64 {
    let n = {
        let c = cross(sub(t[1], t[0]), sub(t[2], t[0]));
        let l = norm(c);
        [c[0] / l, c[1] / l, c[2] / l]
    };
    let d = dot(sub(x, t[0]), n);
    let rho = [x[0] - d * n[0], x[1] - d * n[1], x[2] - d * n[2]];
    let ad = d.abs();
    let mut total = 0.0;
    for i in 0..3 {
        let (a, b) = (t[i], t[(i + 1) % 3]);
        let e = sub(b, a);
        let le = norm(e);
        let s = [e[0] / le, e[1] / le, e[2] / le];
        let u = cross(s, n); // outward in-plane edge normal for counter-clockwise triangles
        let lp = dot(sub(b, rho), s);
        let lm = dot(sub(a, rho), s);
        let p0 = dot(sub(a, rho), u);
        let rp = norm(sub(x, b));
        let rm = norm(sub(x, a));
        let r0sq = p0 * p0 + d * d;
        if p0.abs() > 1e-14 {
            total += p0 * ((rp + lp) / (rm + lm)).ln();
        }
        if ad > 1e-14 {
            total -= ad * ((p0 * lp / (r0sq + ad * rp)).atan() - (p0 * lm / (r0sq + ad * rm)).atan());
        }
    }
    total
}

/// Collapsed Gauss rule of `n x n` points on a physical triangle: (point, weight, barycentrics).
pub fn collapsed_rule(t: [Point; 3], n: usize) -> Vec<(Point, f64, [f64; 3])> {
    let (g, w) = bemtrans::assembly::quadrature::gauss_legendre_01(n);
    let area = 0.5 * norm(cross(sub(t[1], t[0]), sub(t[2], t[0])));
    let mut out = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let u = g[i];
            let v = g[j] * (1.0 - u);
            let wt = w[i] * w[j] * (1.0 - u) * 2.0 * area;
            let l = [1.0 - u - v, u, v];
            let p = [0, 1, 2].map(|d| l[0] * t[0][d] + l[1] * t[1][d] + l[2] * t[2][d]);
            out.push((p, wt, l));
        }
    }
    out
}

pub fn mesh_of(space: &P1Space) -> &TriangleMesh {
    &space.mesh
}
