//! Shared fixtures for the criterion benches.

use std::sync::Arc;

use bemtrans::mesh::icosphere;
use bemtrans::{Material, P1Space, Scene, SceneObject};

pub fn sphere_space(s: u32) -> P1Space {
    P1Space::new(Arc::new(icosphere(1.0, [0.0; 3], s).expect("valid level")))
}

/// Water-fat sphere of radius 5 mm at `f` Hz on icosphere level `s`.
pub fn fat_sphere(s: u32, f: f64) -> Scene {
    let mesh = Arc::new(icosphere(5e-3, [0.0; 3], s).expect("valid level"));
    Scene::new(Material::water(), vec![SceneObject { mesh, material: Material::fat() }], f, [0.0, 0.0, 1.0])
        .expect("valid scene")
}
