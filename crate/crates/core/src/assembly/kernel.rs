//! Helmholtz Green's function and its normal derivatives.

use std::f64::consts::PI;

use crate::mesh::geom::{dot, sub, Point};
use crate::C64;

const FOUR_PI_INV: f64 = 1.0 / (4.0 * PI);

/// `exp(i k r) / (4 pi r)`.
#[inline]
pub fn green(k: C64, x: Point, y: Point) -> C64 {
    let d = sub(x, y);
    let r = dot(d, d).sqrt();
    (C64::i() * k * r).exp() * (FOUR_PI_INV / r)
}

/// `d/dn_y G(x, y) = (x - y).n_y (1 - i k r) exp(i k r) / (4 pi r^3)`.
#[inline]
pub fn green_dn_y(k: C64, x: Point, y: Point, ny: Point) -> C64 {
    let d = sub(x, y);
    let r2 = dot(d, d);
    let r = r2.sqrt();
    let ikr = C64::i() * k * r;
    ikr.exp() * (C64::new(1.0, 0.0) - ikr) * (dot(d, ny) * FOUR_PI_INV / (r2 * r))
}

/// `d/dn_x G(x, y)`.
#[inline]
pub fn green_dn_x(k: C64, x: Point, y: Point, nx: Point) -> C64 {
    green_dn_y(k, y, x, nx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pt() -> impl Strategy<Value = Point> {
        prop::array::uniform3(-2.0f64..2.0)
    }

    proptest! {
        #[test]
        fn reciprocity(x in pt(), y in pt(), kr in 0.1f64..20.0, ki in 0.0f64..2.0) {
            prop_assume!(crate::mesh::geom::dist(x, y) > 1e-3);
            let k = C64::new(kr, ki);
            prop_assert_eq!(green(k, x, y), green(k, y, x));
        }

        #[test]
        fn normal_derivative_matches_difference(x in pt(), y in pt(), n in pt(), kr in 0.1f64..5.0) {
            prop_assume!(crate::mesh::geom::dist(x, y) > 0.2 && crate::mesh::geom::norm(n) > 0.1);
            let n = crate::mesh::geom::normalize(n);
            let k = C64::new(kr, 0.3);
            let h = 1e-5;
            let yp = crate::mesh::geom::add(y, crate::mesh::geom::scale(n, h));
            let ym = crate::mesh::geom::sub(y, crate::mesh::geom::scale(n, h));
            let fd = (green(k, x, yp) - green(k, x, ym)) / (2.0 * h);
            let an = green_dn_y(k, x, y, n);
            prop_assert!((fd - an).norm() <= 1e-6 * (1.0 + an.norm()));
            prop_assert!((green_dn_x(k, y, x, n) - an).norm() <= 1e-14 * (1.0 + an.norm()));
        }
    }
}
