//! On-surface radiation condition approximations of the NtD and DtN maps.
//!
//! The square root `(1 + z)^(1/2)` and its inverse are replaced by rotated
//! Padé approximants written as partial fractions `c0 + sum c_j / (1 + p_j z)`,
//! where `z` stands for `Delta_G / k_eps^2`. Each fraction becomes a shifted
//! surface Helmholtz matrix `M - p_j S / k_eps^2`, factorised once.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::formulation::LocalOperators;
use crate::linalg::{Action, LdlFactor, LinearAction};
use crate::{Error, Result, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WavenumberChoice {
    Interior,
    Exterior,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OsrcParams {
    pub pade_terms: usize,
    pub branch_angle: f64,
    /// Damping `eps`; `None` selects `0.4 (Re(k) R)^(-2/3)` per interface.
    pub damping_eps: Option<f64>,
    pub wavenumber: WavenumberChoice,
}

impl Default for OsrcParams {
    fn default() -> Self {
        OsrcParams { pade_terms: 4, branch_angle: PI / 3.0, damping_eps: None, wavenumber: WavenumberChoice::Interior }
    }
}

impl OsrcParams {
    pub fn validate(&self) -> Result<()> {
        if self.pade_terms == 0 {
            return Err(Error::InvalidInput("OSRC needs at least one Padé term".into()));
        }
        if !(self.branch_angle > 0.0 && self.branch_angle < PI) {
            return Err(Error::InvalidInput(format!("branch angle {} outside (0, pi)", self.branch_angle)));
        }
        if let Some(e) = self.damping_eps {
            if !(e > 0.0 && e.is_finite()) {
                return Err(Error::InvalidInput(format!("damping must be positive, got {e}")));
            }
        }
        Ok(())
    }

    pub fn epsilon(&self, k: C64, radius: f64) -> f64 {
        self.damping_eps.unwrap_or_else(|| 0.4 * (k.re * radius).powf(-2.0 / 3.0))
    }
}

/// `c0 + sum_j c_j / (1 + p_j z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialFractions {
    pub c0: C64,
    pub terms: Vec<(C64, C64)>,
}

fn pade_nodes(n: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let d = (2 * n + 1) as f64;
    let a = (1..=n).map(|j| 2.0 / d * (j as f64 * PI / d).sin().powi(2)).collect();
    let b = (1..=n).map(|j| (j as f64 * PI / d).cos().powi(2)).collect();
    let s = (1..=n).map(|j| (j as f64 * PI / d).sin().powi(2)).collect();
    (a, b, s)
}

impl PartialFractions {
    /// Order-`n` Padé approximant of `(1 + z)^(1/2)` with the branch cut rotated by `theta`.
    pub fn sqrt(n: usize, theta: f64) -> Self {
        let (a, b, _) = pade_nodes(n);
        // sqrt(1+z) ~ 1 + sum a z/(1 + b z) = (1 + sum a/b) - sum (a/b)/(1 + b z)
        let base = PartialFractions {
            c0: C64::new(1.0 + a.iter().zip(&b).map(|(a, b)| a / b).sum::<f64>(), 0.0),
            terms: a.iter().zip(&b).map(|(a, b)| (C64::new(-a / b, 0.0), C64::new(*b, 0.0))).collect(),
        };
        base.rotated(theta, 0.5)
    }

    /// Order-`n` approximant of `(1 + z)^(-1/2)`: the reciprocal of [`Self::sqrt`].
    pub fn inverse_sqrt(n: usize, theta: f64) -> Self {
        let (_, b, s) = pade_nodes(n);
        // the Padé approximant factors as prod (1 + s z)/(1 + b z); invert and expand
        let c0 = b.iter().zip(&s).map(|(b, s)| b / s).product::<f64>();
        let terms = (0..n)
            .map(|j| {
                let zj = -1.0 / s[j];
                let num: f64 = b.iter().map(|bi| 1.0 + bi * zj).product();
                let den: f64 = (0..n).filter(|&i| i != j).map(|i| 1.0 + s[i] * zj).product();
                (C64::new(num / den, 0.0), C64::new(s[j], 0.0))
            })
            .collect();
        PartialFractions { c0: C64::new(c0, 0.0), terms }.rotated(theta, -0.5)
    }

    // f(z) = e^{i power theta} g(e^{-i theta}(1 + z) - 1)
    fn rotated(self, theta: f64, power: f64) -> Self {
        let r = C64::from_polar(1.0, -theta);
        let outer = C64::from_polar(1.0, power * theta);
        let terms = self
            .terms
            .into_iter()
            .map(|(c, p)| {
                let alpha = 1.0 + p * (r - 1.0);
                (outer * c / alpha, p * r / alpha)
            })
            .collect();
        PartialFractions { c0: outer * self.c0, terms }
    }

    pub fn eval(&self, z: C64) -> C64 {
        self.c0 + self.terms.iter().map(|(c, p)| c / (1.0 + p * z)).sum::<C64>()
    }
}

/// `prefactor (c0 M^-1 + sum c_j (M - p_j S / k_eps^2)^-1)`: a map from Galerkin
/// residuals to coefficient vectors.
pub struct OsrcAction {
    prefactor: C64,
    c0: C64,
    mass_inverse: Action,
    shifted: Vec<(C64, Arc<LdlFactor<C64>>)>,
}

impl LinearAction for OsrcAction {
    fn rows(&self) -> usize {
        self.mass_inverse.rows()
    }
    fn cols(&self) -> usize {
        self.mass_inverse.cols()
    }
    fn apply(&self, x: &[C64], y: &mut [C64]) {
        self.mass_inverse.apply(x, y);
        for v in y.iter_mut() {
            *v *= self.c0;
        }
        let mut w = vec![C64::new(0.0, 0.0); x.len()];
        for (c, f) in &self.shifted {
            w.copy_from_slice(x);
            f.solve_in_place(&mut w);
            for (yi, wi) in y.iter_mut().zip(&w) {
                *yi += c * wi;
            }
        }
        for v in y.iter_mut() {
            *v *= self.prefactor;
        }
    }
    fn dense_products(&self) -> usize {
        0
    }
    fn sparse_solves(&self) -> usize {
        1 + self.shifted.len()
    }
}

fn realise(local: &LocalOperators, f: &PartialFractions, k_eps: C64, prefactor: C64) -> Result<Action> {
    let shifted = f
        .terms
        .iter()
        .map(|(c, p)| {
            let shift = -p / (k_eps * k_eps);
            LdlFactor::<C64>::new(&[(&local.mass, C64::new(1.0, 0.0)), (&local.laplace_beltrami, shift)], false)
                .map(|fac| (*c, Arc::new(fac)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Arc::new(OsrcAction { prefactor, c0: f.c0, mass_inverse: local.mass_inverse.clone(), shifted }))
}

/// `(NtD, DtN)` approximations `(1/(ik)) (I + Delta/k_eps^2)^(-1/2)` and
/// `ik (I + Delta/k_eps^2)^(1/2)` as residual-to-coefficient maps.
pub fn build_osrc_actions(local: &LocalOperators, k: C64, params: &OsrcParams) -> Result<(Action, Action)> {
    params.validate()?;
    let radius = local.space.mesh.enclosing_radius();
    let eps = params.epsilon(k, radius);
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidInput(format!("OSRC damping {eps} is not positive")));
    }
    let k_eps = k * C64::new(1.0, eps);
    let ik = C64::i() * k;
    let ntd = realise(local, &PartialFractions::inverse_sqrt(params.pade_terms, params.branch_angle), k_eps, 1.0 / ik)?;
    let dtn = realise(local, &PartialFractions::sqrt(params.pade_terms, params.branch_angle), k_eps, ik)?;
    Ok((ntd, dtn))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unrotated_approximants() {
        for n in 1..6 {
            let f = PartialFractions::sqrt(n, 0.0);
            let g = PartialFractions::inverse_sqrt(n, 0.0);
            for z in [0.0, 0.3, 1.5, -0.5] {
                let z = C64::new(z, 0.0);
                let tol = if n >= 4 { 1e-4 } else { 0.05 };
                assert!((f.eval(z) - (1.0 + z).sqrt()).norm() < tol, "n = {n}, z = {z}: {}", (f.eval(z) - (1.0 + z).sqrt()).norm());
                assert!((g.eval(z) * f.eval(z) - 1.0).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn product_form_matches_sum_form() {
        let (a, b, s) = pade_nodes(4);
        for z in [0.2, 2.0, -0.7] {
            let sum: f64 = 1.0 + a.iter().zip(&b).map(|(a, b)| a * z / (1.0 + b * z)).sum::<f64>();
            let prod: f64 = b.iter().zip(&s).map(|(b, s)| (1.0 + s * z) / (1.0 + b * z)).product();
            assert!((sum - prod).abs() < 1e-13);
        }
    }

    #[test]
    fn rotated_branch_covers_negative_axis() {
        let f = PartialFractions::sqrt(8, PI / 3.0);
        let g = PartialFractions::inverse_sqrt(8, PI / 3.0);
        for z in [0.5, -0.5, -2.0, -5.0] {
            let z = C64::new(z, 0.05);
            assert!((f.eval(z) - (1.0 + z).sqrt()).norm() < 0.03 * (1.0 + z).norm().sqrt(), "z = {z}");
            assert!((g.eval(z) * f.eval(z) - 1.0).norm() < 1e-10);
        }
    }

    #[test]
    fn default_damping() {
        let p = OsrcParams::default();
        let eps = p.epsilon(C64::new(4188.79, 0.0), 5e-3);
        assert!((eps - 0.0527).abs() < 5e-4, "{eps}");
        assert!(OsrcParams { pade_terms: 0, ..p }.validate().is_err());
        assert!(OsrcParams { branch_angle: PI, ..p }.validate().is_err());
        assert!(OsrcParams { damping_eps: Some(0.0), ..p }.validate().is_err());
    }

    use crate::assembly::{assemble_boundary_operator, AssemblyOptions, OperatorKind, P1Space};
    use crate::formulation::OperatorCache;
    use crate::mesh::icosphere;
    use rand::{Rng, SeedableRng};

    fn sphere(s: u32) -> Arc<LocalOperators> {
        let space = P1Space::new(Arc::new(icosphere(5e-3, [0.0; 3], s).unwrap()));
        OperatorCache::default().local(&space).unwrap()
    }

    fn rel(a: &[C64], b: &[C64]) -> f64 {
        let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
        (d / b.iter().map(|y| y.norm_sqr()).sum::<f64>()).sqrt()
    }

    fn mass_times(local: &LocalOperators, x: &[C64]) -> Vec<C64> {
        let mut y = vec![C64::new(0.0, 0.0); x.len()];
        local.mass.matvec(x, &mut y);
        y
    }

    #[test]
    fn flat_mode_and_mutual_inverse() {
        let local = sphere(2);
        let k = C64::new(4000.0, 0.0);
        let (ntd, dtn) = build_osrc_actions(&local, k, &OsrcParams::default()).unwrap();
        let ones = vec![C64::new(1.0, 0.0); local.mass.n];
        let y = ntd.apply_vec(&mass_times(&local, &ones));
        let expected: Vec<C64> = ones.iter().map(|v| v / (C64::i() * k)).collect();
        assert!(rel(&y, &expected) < 1e-2, "{}", rel(&y, &expected));
        // low spherical harmonics
        for f in [|p: [f64; 3]| p[2], |p: [f64; 3]| p[0] * p[1]] {
            let x: Vec<C64> = local.space.mesh.vertices.iter().map(|&p| C64::new(f(p), 0.0)).collect();
            let y = ntd.apply_vec(&mass_times(&local, &x));
            let z = dtn.apply_vec(&mass_times(&local, &y));
            assert!(rel(&z, &x) < 0.1, "{}", rel(&z, &x));
        }
    }

    #[test]
    fn dtn_inverts_minus_the_single_layer() {
        let local = sphere(2);
        let k = C64::new(1000.0, 0.0);
        let (_, dtn) = build_osrc_actions(&local, k, &OsrcParams::default()).unwrap();
        let v = assemble_boundary_operator(OperatorKind::V, k, &local.space, &local.space, &AssemblyOptions::default())
            .unwrap();
        let x: Vec<C64> = local.space.mesh.vertices.iter().map(|p| C64::new(p[2], 0.0)).collect();
        let mut vx = vec![C64::new(0.0, 0.0); x.len()];
        v.matrix.matvec(&x, &mut vx);
        let y = dtn.apply_vec(&vx);
        let mx = mass_times(&local, &x);
        let ratio: C64 = y.iter().zip(&mx).map(|(a, b)| a * b.conj()).sum::<C64>()
            / x.iter().zip(&mx).map(|(a, b)| a * b.conj()).sum::<C64>();
        assert!(ratio.re < -0.1 && ratio.re > -1.0, "{ratio}");
    }

    #[test]
    fn bounded_for_any_damping() {
        let local = sphere(1);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let k = C64::new(4000.0, 1.0);
        for eps in [1e-4, 1e-2, 0.3, 1.0] {
            let p = OsrcParams { damping_eps: Some(eps), ..OsrcParams::default() };
            let (ntd, dtn) = build_osrc_actions(&local, k, &p).unwrap();
            let mut worst: f64 = 0.0;
            for _ in 0..100 {
                let x: Vec<C64> =
                    (0..local.mass.n).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
                let (a, b) = (ntd.apply_vec(&x), dtn.apply_vec(&x));
                assert!(a.iter().chain(&b).all(|v| v.is_finite()));
                let nx = x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
                worst = worst.max(a.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt() / nx);
            }
            assert!(worst.is_finite() && worst > 0.0);
        }
    }
}
