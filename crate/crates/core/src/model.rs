//! Physical constants, the attenuation power law and scene descriptions.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::mesh::{geom, TriangleMesh};
use crate::{Error, Result};

/// Homogeneous acoustic medium.
///
/// `alpha` is expressed per MHz^b: the attenuation law evaluates
/// `alpha * (f * 1e-6)^b` with `f` in Hz, so coefficients quoted in other
/// frequency units must be converted before use.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Material {
    pub name: String,
    /// Mass density, kg/m^3.
    pub rho: f64,
    /// Wave speed, m/s.
    pub c: f64,
    /// Attenuation coefficient, Np/m at 1 MHz.
    pub alpha: f64,
    /// Power-law exponent.
    pub b: f64,
}

impl Material {
    pub fn new(name: impl Into<String>, rho: f64, c: f64, alpha: f64, b: f64) -> Result<Self> {
        let m = Material {
            name: name.into(),
            rho,
            c,
            alpha,
            b,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(Error::InvalidInput(format!("{}: density must be positive", self.name)));
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::InvalidInput(format!("{}: wave speed must be positive", self.name)));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "{}: attenuation must be non-negative",
                self.name
            )));
        }
        if !(self.b >= 0.0 && self.b.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "{}: attenuation exponent must be non-negative",
                self.name
            )));
        }
        Ok(())
    }

    pub fn water() -> Self {
        Material { name: "water".into(), rho: 1000.0, c: 1500.0, alpha: 0.015, b: 2.0 }
    }

    pub fn fat() -> Self {
        Material { name: "fat".into(), rho: 917.0, c: 1412.0, alpha: 9.334, b: 1.0 }
    }

    pub fn bone() -> Self {
        Material { name: "bone".into(), rho: 1912.0, c: 4080.0, alpha: 47.20, b: 1.0 }
    }

    /// Built-in materials by name.
    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "water" => Some(Self::water()),
            "fat" => Some(Self::fat()),
            "bone" => Some(Self::bone()),
            _ => None,
        }
    }

    pub fn builtin_names() -> &'static [&'static str] {
        &["water", "fat", "bone"]
    }

    /// Wavelength at frequency `f`, m.
    pub fn wavelength(&self, f: f64) -> f64 {
        self.c / f
    }

    /// Same medium without attenuation.
    pub fn lossless(&self) -> Self {
        Material { alpha: 0.0, ..self.clone() }
    }
}

/// Complex wavenumber and material constant of one domain at one frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Wavenumber {
    pub k: C64,
    /// sigma = 1 / rho.
    pub sigma: f64,
}

impl Wavenumber {
    pub fn new(k: C64, sigma: f64) -> Result<Self> {
        if !(k.re > 0.0) || k.im < 0.0 || !k.is_finite() {
            return Err(Error::InvalidInput(format!(
                "wavenumber must satisfy Re(k) > 0 and Im(k) >= 0, got {k}"
            )));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidInput("material constant must be positive".into()));
        }
        Ok(Wavenumber { k, sigma })
    }
}

/// `k = 2 pi f / c + i alpha (f * 1e-6)^b`, `sigma = 1 / rho`.
pub fn wavenumber(material: &Material, f: f64) -> Result<Wavenumber> {
    if !(f > 0.0 && f.is_finite()) {
        return Err(Error::InvalidInput(format!("frequency must be positive, got {f}")));
    }
    material.validate()?;
    let re = 2.0 * PI * f / material.c;
    let im = material.alpha * (f * 1e-6).powf(material.b);
    Wavenumber::new(C64::new(re, im), 1.0 / material.rho)
}

/// `exp(i k0 d.x)`.
pub fn plane_wave(direction: [f64; 3], k0: C64, x: [f64; 3]) -> C64 {
    (C64::i() * k0 * geom::dot(direction, x)).exp()
}

/// Gradient of [`plane_wave`]: `i k0 d exp(i k0 d.x)`.
pub fn plane_wave_gradient(direction: [f64; 3], k0: C64, x: [f64; 3]) -> [C64; 3] {
    let p = C64::i() * k0 * plane_wave(direction, k0, x);
    [p * direction[0], p * direction[1], p * direction[2]]
}

/// One penetrable object.
#[derive(Debug, Clone)]
pub struct SceneObject {
    pub mesh: Arc<TriangleMesh>,
    pub material: Material,
}

/// Exterior medium, objects, frequency and incident direction.
#[derive(Debug, Clone)]
pub struct Scene {
    pub exterior: Material,
    pub objects: Vec<SceneObject>,
    pub frequency: f64,
    pub direction: [f64; 3],
}

impl Scene {
    /// Builds a scene and checks disjointness with a margin of one mesh width.
    pub fn new(
        exterior: Material,
        objects: Vec<SceneObject>,
        frequency: f64,
        direction: [f64; 3],
    ) -> Result<Self> {
        let margin = objects
            .iter()
            .map(|o| o.mesh.max_edge_length())
            .fold(0.0, f64::max);
        Self::with_margin(exterior, objects, frequency, direction, margin)
    }

    pub fn with_margin(
        exterior: Material,
        objects: Vec<SceneObject>,
        frequency: f64,
        direction: [f64; 3],
        margin: f64,
    ) -> Result<Self> {
        if objects.is_empty() {
            return Err(Error::InvalidInput("a scene needs at least one object".into()));
        }
        if !(frequency > 0.0 && frequency.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "frequency must be positive, got {frequency}"
            )));
        }
        if (geom::norm(direction) - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput("incident direction must be a unit vector".into()));
        }
        exterior.validate()?;
        for o in &objects {
            o.material.validate()?;
        }
        for i in 0..objects.len() {
            for j in (i + 1)..objects.len() {
                check_disjoint(&objects[i].mesh, &objects[j].mesh, margin)
                    .map_err(|e| Error::InvalidInput(format!("objects {i} and {j}: {e}")))?;
            }
        }
        Ok(Scene { exterior, objects, frequency, direction })
    }

    pub fn object_count(&self) -> usize {
        self.objects.len()
    }

    pub fn exterior_wavenumber(&self) -> Wavenumber {
        wavenumber(&self.exterior, self.frequency).expect("validated scene")
    }

    /// Wavenumber of domain `j`: 0 is the exterior, `1..=l` the objects.
    pub fn domain_wavenumber(&self, j: usize) -> Wavenumber {
        if j == 0 {
            self.exterior_wavenumber()
        } else {
            wavenumber(&self.objects[j - 1].material, self.frequency).expect("validated scene")
        }
    }

    /// Interior wavenumber of object `m` (zero-based).
    pub fn interior_wavenumber(&self, m: usize) -> Wavenumber {
        self.domain_wavenumber(m + 1)
    }

    /// sigma_m / sigma_0 for object `m` (zero-based).
    pub fn sigma_ratio(&self, m: usize) -> f64 {
        self.interior_wavenumber(m).sigma / self.exterior_wavenumber().sigma
    }

    pub fn incident(&self, x: [f64; 3]) -> C64 {
        plane_wave(self.direction, self.exterior_wavenumber().k, x)
    }

    /// Diameter over minimum wavelength of the whole configuration.
    pub fn size_over_wavelength(&self) -> f64 {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for o in &self.objects {
            let (a, b) = o.mesh.bounding_box();
            for d in 0..3 {
                lo[d] = lo[d].min(a[d]);
                hi[d] = hi[d].max(b[d]);
            }
        }
        let diameter = geom::norm(geom::sub(hi, lo)) / 3f64.sqrt();
        let lambda = self
            .objects
            .iter()
            .map(|o| o.material.wavelength(self.frequency))
            .fold(self.exterior.wavelength(self.frequency), f64::min);
        diameter / lambda
    }
}

fn check_disjoint(a: &TriangleMesh, b: &TriangleMesh, margin: f64) -> std::result::Result<(), String> {
    let (alo, ahi) = a.bounding_box();
    let (blo, bhi) = b.bounding_box();
    let separated = (0..3).any(|d| alo[d] > bhi[d] + margin || blo[d] > ahi[d] + margin);
    if separated {
        return Ok(());
    }
    if a.contains_point(b.vertices[0]) || b.contains_point(a.vertices[0]) {
        return Err("one object lies inside the other".into());
    }
    let d = a.distance_to_mesh(b);
    if d > margin {
        Ok(())
    } else {
        Err(format!("surfaces are {d:.3e} m apart, below the margin {margin:.3e} m"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn water_and_fat_at_one_megahertz() {
        let w = wavenumber(&Material::water(), 1e6).unwrap();
        assert_relative_eq!(w.k.re, 4188.790204786391, epsilon = 1e-9);
        assert_relative_eq!(w.k.im, 0.015, epsilon = 1e-15);
        assert_relative_eq!(w.sigma, 1e-3, epsilon = 1e-18);
        let f = wavenumber(&Material::fat(), 1e6).unwrap();
        assert_relative_eq!(f.k.re, 2.0 * PI * 1e6 / 1412.0, epsilon = 1e-9);
        assert_relative_eq!(f.k.re, 4449.823, max_relative = 1e-5);
        assert_relative_eq!(f.k.im, 9.334, epsilon = 1e-12);
    }

    #[test]
    fn lossless_medium_has_real_wavenumber() {
        for m in [Material::water(), Material::fat(), Material::bone()] {
            assert_eq!(wavenumber(&m.lossless(), 7.3e5).unwrap().k.im, 0.0);
        }
    }

    #[test]
    fn non_positive_frequency_rejected() {
        assert!(matches!(wavenumber(&Material::water(), 0.0), Err(Error::InvalidInput(_))));
        assert!(matches!(wavenumber(&Material::water(), -1.0), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn linear_law_is_homogeneous() {
        let m = Material::fat();
        let k1 = wavenumber(&m, 3e5).unwrap().k;
        let k2 = wavenumber(&m, 6e5).unwrap().k;
        assert_relative_eq!(k2.re, 2.0 * k1.re, epsilon = 1e-9);
        assert_relative_eq!(k2.im, 2.0 * k1.im, epsilon = 1e-12);
    }

    #[test]
    fn plane_wave_values() {
        let z = [0.0, 0.0, 1.0];
        assert_eq!(plane_wave(z, C64::new(3.0, 0.0), [0.0; 3]), C64::new(1.0, 0.0));
        let k0 = C64::new(2.5, 0.0);
        let p = plane_wave(z, k0, [0.0, 0.0, PI / 2.5]);
        assert!((p - C64::new(-1.0, 0.0)).norm() < 1e-14);
        let k0 = C64::new(4188.79, 0.015);
        let p = plane_wave(z, k0, [0.0, 0.0, 0.01]);
        assert_relative_eq!(p.norm(), (-0.00015f64).exp(), epsilon = 1e-14);
    }

    #[test]
    fn plane_wave_gradient_matches_finite_differences() {
        let d = geom::normalize([0.3, -0.4, 0.8]);
        let k0 = C64::new(5.0, 0.2);
        let x = [0.1, 0.2, -0.3];
        let g = plane_wave_gradient(d, k0, x);
        let h = 1e-6;
        for a in 0..3 {
            let mut xp = x;
            let mut xm = x;
            xp[a] += h;
            xm[a] -= h;
            let fd = (plane_wave(d, k0, xp) - plane_wave(d, k0, xm)) / (2.0 * h);
            assert!((fd - g[a]).norm() < 1e-7);
        }
    }

    #[test]
    fn scene_rejects_bad_direction() {
        let mesh = Arc::new(crate::mesh::icosphere(1.0, [0.0; 3], 1).unwrap());
        let objects = vec![SceneObject { mesh, material: Material::fat() }];
        let r = Scene::new(Material::water(), objects, 1e3, [0.0, 0.0, 1.1]);
        assert!(matches!(r, Err(Error::InvalidInput(_))));
    }

    #[test]
    fn scene_rejects_overlapping_objects() {
        let a = Arc::new(crate::mesh::icosphere(1.0, [0.0; 3], 1).unwrap());
        let b = Arc::new(crate::mesh::icosphere(1.0, [1.5, 0.0, 0.0], 1).unwrap());
        let c = Arc::new(crate::mesh::icosphere(1.0, [5.0, 0.0, 0.0], 1).unwrap());
        let inner = Arc::new(crate::mesh::icosphere(0.2, [0.0; 3], 1).unwrap());
        let obj = |m: &Arc<TriangleMesh>| SceneObject { mesh: m.clone(), material: Material::fat() };
        let z = [0.0, 0.0, 1.0];
        assert!(Scene::new(Material::water(), vec![obj(&a), obj(&b)], 1e3, z).is_err());
        assert!(Scene::new(Material::water(), vec![obj(&a), obj(&inner)], 1e3, z).is_err());
        let s = Scene::new(Material::water(), vec![obj(&a), obj(&c)], 1e3, z).unwrap();
        assert_eq!(s.object_count(), 2);
        assert!(s.sigma_ratio(0) > 1.0);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn plane_wave_solves_helmholtz(
                x in prop::array::uniform3(-1.0f64..1.0),
                theta in 0.0f64..PI,
                phi in 0.0f64..(2.0 * PI),
                kr in 0.5f64..4.0,
            ) {
                let d = [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()];
                let k0 = C64::new(kr, 0.0);
                let h = 1e-3;
                let center = plane_wave(d, k0, x);
                let mut lap = C64::new(0.0, 0.0);
                for a in 0..3 {
                    let mut xp = x;
                    let mut xm = x;
                    xp[a] += h;
                    xm[a] -= h;
                    lap += (plane_wave(d, k0, xp) + plane_wave(d, k0, xm) - 2.0 * center) / (h * h);
                }
                let r = lap + k0 * k0 * center;
                // O(h^2 k^4) truncation
                prop_assert!(r.norm() < 1e-5 * kr.powi(4) + 1e-6);
            }
        }
    }
}
