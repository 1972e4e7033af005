//! Series solution for a plane wave transmitted through one penetrable sphere.

use crate::mesh::geom::{self, Point};
use crate::mesh::TriangleMesh;
use crate::model::{Scene, Wavenumber};
use crate::{Error, Result, C64};

/// `(j_n, j_n', h_n, h_n')` for `n = 0..=nmax`, with `h_n` of the first kind.
pub fn spherical_bessel_all(nmax: usize, z: C64) -> Result<Vec<[C64; 4]>> {
    if z.norm() == 0.0 || !z.is_finite() {
        return Err(Error::Range(format!("spherical Bessel functions need a finite non-zero argument, got {z}")));
    }
    // j_n: Miller's downward recurrence, normalised against j_0 or j_1
    let top = nmax.max(z.norm().ceil() as usize);
    let start = top + 20 + (40.0 * top as f64).sqrt().ceil() as usize;
    let mut j = vec![C64::new(0.0, 0.0); start + 2];
    j[start] = C64::new(1.0, 0.0);
    for n in (1..=start).rev() {
        j[n - 1] = j[n] * ((2 * n + 1) as f64) / z - j[n + 1];
        if j[n - 1].norm() > 1e200 {
            let s = 1.0 / j[n - 1].norm();
            for v in j.iter_mut().skip(n - 1) {
                *v *= s;
            }
        }
    }
    let (sz, cz) = (z.sin(), z.cos());
    let j0 = sz / z;
    let j1 = sz / (z * z) - cz / z;
    let scale = if j0.norm() >= j1.norm() { j0 / j[0] } else { j1 / j[1] };
    let jn: Vec<C64> = j[..=nmax + 1].iter().map(|v| v * scale).collect();

    // h_n: upward recurrence from closed forms
    let eiz = (C64::i() * z).exp();
    let mut h = vec![-C64::i() * eiz / z, -eiz * (z + C64::i()) / (z * z)];
    for n in 1..=nmax {
        let next = h[n] * ((2 * n + 1) as f64) / z - h[n - 1];
        h.push(next);
    }
    let mut out = Vec::with_capacity(nmax + 1);
    for n in 0..=nmax {
        let (dj, dh) = if n == 0 {
            (-jn[1], -h[1])
        } else {
            let c = (n + 1) as f64 / z;
            (jn[n - 1] - c * jn[n], h[n - 1] - c * h[n])
        };
        let v = [jn[n], dj, h[n], dh];
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Range(format!("spherical Bessel functions overflow at order {n}, argument {z}")));
        }
        out.push(v);
    }
    Ok(out)
}

/// `(j_n, j_n', h_n, h_n')` at a single order.
pub fn spherical_bessel(n: usize, z: C64) -> Result<[C64; 4]> {
    Ok(spherical_bessel_all(n, z)?[n])
}

/// Legendre polynomials `P_0..=P_nmax` at `x`.
pub fn legendre_all(nmax: usize, x: f64) -> Vec<f64> {
    let mut p = Vec::with_capacity(nmax + 1);
    p.push(1.0);
    if nmax >= 1 {
        p.push(x);
    }
    for n in 1..nmax {
        p.push(((2 * n + 1) as f64 * x * p[n] - n as f64 * p[n - 1]) / (n + 1) as f64);
    }
    p
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphereProblem {
    pub radius: f64,
    pub center: Point,
    /// Exterior medium.
    pub k0: Wavenumber,
    /// Interior medium.
    pub k1: Wavenumber,
    pub direction: Point,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesSolution {
    pub n_max: usize,
    /// Scattered-field coefficients.
    pub a: Vec<C64>,
    /// Interior-field coefficients.
    pub b: Vec<C64>,
}

/// Centre and radius of a mesh whose vertices lie on a sphere, if they do.
pub fn fit_sphere(mesh: &TriangleMesh) -> Option<(Point, f64)> {
    let (lo, hi) = mesh.bounding_box();
    let c = geom::scale(geom::add(lo, hi), 0.5);
    let r: Vec<f64> = mesh.vertices.iter().map(|&v| geom::dist(v, c)).collect();
    let mean = r.iter().sum::<f64>() / r.len() as f64;
    r.iter().all(|x| (x - mean).abs() <= 1e-9 * mean).then_some((c, mean))
}

impl SphereProblem {
    /// The single-object scene as a sphere problem, if the object is a sphere.
    pub fn from_scene(scene: &Scene) -> Option<Self> {
        if scene.object_count() != 1 {
            return None;
        }
        let (center, radius) = fit_sphere(&scene.objects[0].mesh)?;
        Some(SphereProblem {
            radius,
            center,
            k0: scene.exterior_wavenumber(),
            k1: scene.interior_wavenumber(0),
            direction: scene.direction,
        })
    }

    /// `ceil(|k| R + 4 (|k| R)^(1/3) + 16)` with the larger of the two wavenumbers.
    pub fn truncation(&self) -> usize {
        let kr = self.k0.k.norm().max(self.k1.k.norm()) * self.radius;
        (kr + 4.0 * kr.cbrt() + 16.0).ceil() as usize
    }
}

pub fn solve_sphere(p: &SphereProblem) -> Result<SeriesSolution> {
    solve_sphere_with(p, p.truncation())
}

/// Solves the per-order 2x2 interface system up to order `n_max`.
pub fn solve_sphere_with(p: &SphereProblem, n_max: usize) -> Result<SeriesSolution> {
    if !(p.radius > 0.0) {
        return Err(Error::InvalidInput("sphere radius must be positive".into()));
    }
    if (geom::norm(p.direction) - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidInput("incident direction must be a unit vector".into()));
    }
    let (k0, k1) = (p.k0.k, p.k1.k);
    let f0 = spherical_bessel_all(n_max, k0 * p.radius)?;
    let f1 = spherical_bessel_all(n_max, k1 * p.radius)?;
    let (s0, s1) = (p.k0.sigma * k0, p.k1.sigma * k1);
    let mut a = Vec::with_capacity(n_max + 1);
    let mut b = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        let [j0, dj0, h0, dh0] = f0[n];
        let [j1, dj1, _, _] = f1[n];
        // [h0, -j1; s0 h0', -s1 j1'] [a; b] = [-j0; -s0 j0']
        let det = -h0 * s1 * dj1 + j1 * s0 * dh0;
        let scale = (h0.norm() * (s1 * dj1).norm()).max(j1.norm() * (s0 * dh0).norm());
        if !(det.norm() > 1e-13 * scale) {
            return Err(Error::Resonance(n));
        }
        let (r1, r2) = (-j0, -s0 * dj0);
        a.push((r1 * (-s1 * dj1) + j1 * r2) / det);
        b.push((h0 * r2 - s0 * dh0 * r1) / det);
    }
    Ok(SeriesSolution { n_max, a, b })
}

fn partial_wave(n: usize) -> C64 {
    C64::i().powu(n as u32) * (2 * n + 1) as f64
}

/// Total pressure at `points`: incident plus scattered outside, transmitted inside.
pub fn evaluate_exact(p: &SphereProblem, sol: &SeriesSolution, points: &[Point]) -> Result<Vec<C64>> {
    let phase = (C64::i() * p.k0.k * geom::dot(p.direction, p.center)).exp();
    points
        .iter()
        .map(|&x| {
            let rel = geom::sub(x, p.center);
            let r = geom::norm(rel);
            let inside = r < p.radius;
            if r == 0.0 {
                return Ok(phase * sol.b[0] * C64::new(1.0, 0.0));
            }
            let ct = geom::dot(rel, p.direction) / r;
            let leg = legendre_all(sol.n_max, ct);
            if inside {
                let f = spherical_bessel_all(sol.n_max, p.k1.k * r)?;
                Ok(phase * (0..=sol.n_max).map(|n| partial_wave(n) * sol.b[n] * f[n][0] * leg[n]).sum::<C64>())
            } else {
                let f = spherical_bessel_all(sol.n_max, p.k0.k * r)?;
                let sca: C64 = (0..=sol.n_max).map(|n| partial_wave(n) * sol.a[n] * f[n][2] * leg[n]).sum();
                let inc = crate::model::plane_wave(p.direction, p.k0.k, x);
                Ok(inc + phase * sca)
            }
        })
        .collect()
}

/// Scattered pressure only, for exterior points.
pub fn evaluate_scattered(p: &SphereProblem, sol: &SeriesSolution, points: &[Point]) -> Result<Vec<C64>> {
    let phase = (C64::i() * p.k0.k * geom::dot(p.direction, p.center)).exp();
    points
        .iter()
        .map(|&x| {
            let rel = geom::sub(x, p.center);
            let r = geom::norm(rel);
            let leg = legendre_all(sol.n_max, geom::dot(rel, p.direction) / r);
            let f = spherical_bessel_all(sol.n_max, p.k0.k * r)?;
            Ok(phase * (0..=sol.n_max).map(|n| partial_wave(n) * sol.a[n] * f[n][2] * leg[n]).sum::<C64>())
        })
        .collect()
}

/// Exterior Dirichlet and Neumann traces of the total field at points on the sphere.
pub fn exact_traces(p: &SphereProblem, sol: &SeriesSolution, points: &[Point]) -> Result<(Vec<C64>, Vec<C64>)> {
    let phase = (C64::i() * p.k0.k * geom::dot(p.direction, p.center)).exp();
    let k0 = p.k0.k;
    let f = spherical_bessel_all(sol.n_max, k0 * p.radius)?;
    let mut dir = Vec::with_capacity(points.len());
    let mut neu = Vec::with_capacity(points.len());
    for &x in points {
        let rel = geom::sub(x, p.center);
        let ct = geom::dot(rel, p.direction) / geom::norm(rel);
        let leg = legendre_all(sol.n_max, ct);
        let (mut d, mut nn) = (C64::new(0.0, 0.0), C64::new(0.0, 0.0));
        for n in 0..=sol.n_max {
            let w = partial_wave(n) * leg[n];
            d += w * (f[n][0] + sol.a[n] * f[n][2]);
            nn += w * k0 * (f[n][1] + sol.a[n] * f[n][3]);
        }
        dir.push(phase * d);
        neu.push(phase * nn);
    }
    Ok((dir, neu))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{wavenumber, Material};

    fn problem(inner: Material, f: f64) -> SphereProblem {
        let water = Material::water();
        SphereProblem {
            radius: 5e-3,
            center: [0.001, -0.002, 0.0005],
            k0: wavenumber(&water, f).unwrap(),
            k1: wavenumber(&inner, f).unwrap(),
            direction: [0.0, 0.0, 1.0],
        }
    }

    #[test]
    fn closed_forms() {
        let z = C64::new(1.0, 0.0);
        let f = spherical_bessel(0, z).unwrap();
        assert!((f[0] - C64::new(0.8414709848078965, 0.0)).norm() < 1e-15);
        let h0 = -C64::i() * (C64::i() * z).exp() / z;
        assert!((f[2] - h0).norm() < 1e-15);
        let zc = C64::new(3.0, 0.7);
        let all = spherical_bessel_all(30, zc).unwrap();
        assert!((all[0][0] - zc.sin() / zc).norm() < 1e-14);
        let j2 = (3.0 / (zc * zc) - 1.0) * zc.sin() / zc - 3.0 * zc.cos() / (zc * zc);
        assert!((all[2][0] - j2).norm() < 1e-13);
    }

    #[test]
    fn wronskian() {
        let x = 2.7;
        let f = spherical_bessel_all(20, C64::new(x, 0.0)).unwrap();
        for (n, v) in f.iter().enumerate() {
            let y = (v[2] - v[0]) / C64::i();
            let dy = (v[3] - v[1]) / C64::i();
            let w = v[0] * dy - v[1] * y;
            assert!((w - C64::new(1.0 / (x * x), 0.0)).norm() < 1e-10 * (1.0 / (x * x)), "n = {n}: {w}");
        }
    }

    #[test]
    fn large_order_small_argument_stays_finite() {
        let f = spherical_bessel_all(200, C64::new(0.01, 0.0));
        assert!(matches!(f, Err(Error::Range(_))));
        assert!(spherical_bessel_all(10, C64::new(0.0, 0.0)).is_err());
        assert!(spherical_bessel_all(40, C64::new(0.5, 0.0)).is_ok());
    }

    #[test]
    fn zero_contrast() {
        let p = problem(Material::water(), 5e5);
        let s = solve_sphere(&p).unwrap();
        assert!(s.a.iter().all(|a| a.norm() <= 1e-12));
        assert!(s.b.iter().all(|b| (b - 1.0).norm() <= 1e-12));
        let pts = [[0.0, 0.0, 0.0], [0.004, 0.001, 0.0], [0.01, 0.0, -0.01], [-0.012, 0.003, 0.011]];
        let v = evaluate_exact(&p, &s, &pts).unwrap();
        for (x, u) in pts.iter().zip(v) {
            let inc = crate::model::plane_wave(p.direction, p.k0.k, *x);
            assert!((u - inc).norm() <= 1e-12, "{u} vs {inc}");
        }
    }

    #[test]
    fn unitarity_of_lossless_partial_waves() {
        let mut p = problem(Material::fat().lossless(), 5e5);
        p.k0 = wavenumber(&Material::water().lossless(), 5e5).unwrap();
        let s = solve_sphere(&p).unwrap();
        for a in &s.a {
            assert!(((C64::new(1.0, 0.0) + 2.0 * a).norm() - 1.0).abs() <= 1e-10);
        }
    }

    #[test]
    fn sound_hard_limit() {
        let mut p = problem(Material::bone(), 3e5);
        p.k1.sigma = p.k0.sigma * 1e-8;
        let s = solve_sphere(&p).unwrap();
        let f = spherical_bessel_all(s.n_max, p.k0.k * p.radius).unwrap();
        for n in 0..=s.n_max {
            let hard = -f[n][1] / f[n][3];
            assert!((s.a[n] - hard).norm() <= 1e-6 * (1.0 + hard.norm()), "n = {n}");
        }
    }

    #[test]
    fn truncation_tail_and_robustness() {
        let p = problem(Material::fat(), 1e6);
        let s = solve_sphere(&p).unwrap();
        let amax = s.a.iter().map(|a| a.norm()).fold(0.0, f64::max);
        assert!(s.a[s.n_max].norm() <= 1e-12 * amax);
        let s2 = solve_sphere_with(&p, 2 * s.n_max).unwrap();
        let pts: Vec<Point> = (0..20)
            .map(|i| {
                let t = i as f64 * 0.3;
                [0.012 * t.cos(), 0.003 * (i as f64 - 10.0) * 1e-1, 0.012 * t.sin() * 0.9]
            })
            .collect();
        let u = evaluate_exact(&p, &s, &pts).unwrap();
        let v = evaluate_exact(&p, &s2, &pts).unwrap();
        for (a, b) in u.iter().zip(&v) {
            assert!((a - b).norm() <= 1e-10 * b.norm());
        }
    }

    #[test]
    fn continuity_across_interface() {
        let p = problem(Material::fat(), 5e5);
        let s = solve_sphere(&p).unwrap();
        for dir in [[1.0, 0.0, 0.0], [0.6, 0.0, 0.8], [0.0, -0.6, -0.8]] {
            let on = geom::add(p.center, geom::scale(dir, p.radius));
            let out = geom::add(p.center, geom::scale(dir, p.radius * (1.0 + 1e-11)));
            let inn = geom::add(p.center, geom::scale(dir, p.radius * (1.0 - 1e-11)));
            let v = evaluate_exact(&p, &s, &[inn, out, on]).unwrap();
            assert!((v[0] - v[1]).norm() <= 1e-8 * v[1].norm());
            assert!((v[0] - v[2]).norm() <= 1e-8 * v[2].norm());
        }
    }

    #[test]
    fn scattered_field_decays_like_inverse_distance() {
        let mut p = problem(Material::fat(), 5e5);
        p.k0.k.im = 0.0;
        let s = solve_sphere(&p).unwrap();
        let r = 40.0 / p.k0.k.re * 2.0;
        let dir = [0.0, 0.6, 0.8];
        let x1 = geom::add(p.center, geom::scale(dir, r));
        let x2 = geom::add(p.center, geom::scale(dir, 2.0 * r));
        let v = evaluate_scattered(&p, &s, &[x1, x2]).unwrap();
        let ratio = v[1].norm() / v[0].norm();
        assert!((ratio - 0.5).abs() <= 0.01, "ratio {ratio}");
    }

    #[test]
    fn rotation_invariance() {
        let p = problem(Material::fat(), 5e5);
        let s = solve_sphere(&p).unwrap();
        // rotation by 90 degrees about the x axis: (x, y, z) -> (x, -z, y)
        let rot = |v: Point| [v[0], -v[2], v[1]];
        let mut q = p;
        q.direction = rot(p.direction);
        q.center = rot(p.center);
        let sq = solve_sphere(&q).unwrap();
        let pts: Vec<Point> = vec![[0.003, 0.001, 0.002], [0.01, -0.004, 0.006], [-0.011, 0.002, -0.007]];
        let rp: Vec<Point> = pts.iter().map(|&x| rot(x)).collect();
        let a = evaluate_exact(&p, &s, &pts).unwrap();
        let b = evaluate_exact(&q, &sq, &rp).unwrap();
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v).norm() <= 1e-12 * (1.0 + u.norm()));
        }
    }

    #[test]
    fn neumann_trace_matches_radial_difference() {
        let p = problem(Material::fat(), 5e5);
        let s = solve_sphere(&p).unwrap();
        let dir = geom::normalize([0.3, -0.5, 0.4]);
        let on = geom::add(p.center, geom::scale(dir, p.radius));
        let (d, n) = exact_traces(&p, &s, &[on]).unwrap();
        let h = 1e-7 * p.radius;
        let out = geom::add(on, geom::scale(dir, h));
        let out2 = geom::add(on, geom::scale(dir, 2.0 * h));
        let v = evaluate_exact(&p, &s, &[out, out2]).unwrap();
        let direct = evaluate_exact(&p, &s, &[on]).unwrap();
        assert!((d[0] - direct[0]).norm() <= 1e-10 * d[0].norm());
        let fd = (4.0 * v[0] - v[1] - 3.0 * d[0]) / (2.0 * h);
        assert!((fd - n[0]).norm() <= 1e-4 * n[0].norm(), "{fd} vs {}", n[0]);
    }
}
