//! Triangle rules and Sauter–Schwab singular quadrature.
//!
//! Regular rules live on the reference triangle (0,0), (1,0), (0,1) with
//! weights summing to one, so physical weights are `w * area`.
//!
//! Singular rules use the reference element `{0 <= s2 <= s1 <= 1}` mapped by
//! `A + s1 (B - A) + s2 (C - B)`; its area is 1/2 and its Jacobian `2 |T|`.
//! P1 shape functions there are `1 - s1`, `s1 - s2`, `s2`.

/// Point `(u, v)` and weight on the reference triangle.
pub type TriPoint = ([f64; 2], f64);

/// Degree-2 rule: barycentric permutations of (2/3, 1/6, 1/6), weights 1/3.
pub const FAR3: [TriPoint; 3] = [
    ([1.0 / 6.0, 1.0 / 6.0], 1.0 / 3.0),
    ([2.0 / 3.0, 1.0 / 6.0], 1.0 / 3.0),
    ([1.0 / 6.0, 2.0 / 3.0], 1.0 / 3.0),
];

/// Degree-3 rule with a centroid point and positive weights.
pub const NEAR5: [TriPoint; 5] = [
    ([1.0 / 3.0, 1.0 / 3.0], 0.15771863430905503),
    ([0.6959844184070224, 0.1693509793899263], 0.2634770507350698),
    ([0.1693509793899263, 0.6959844184070224], 0.2634770507350698),
    ([0.2948807829166931, 0.039783819286361], 0.1576636321104027),
    ([0.039783819286361, 0.2948807829166931], 0.1576636321104027),
];

const A6: f64 = 0.445948490915965;
const B6: f64 = 0.091576213509771;
const WA6: f64 = 0.223381589678011;
const WB6: f64 = 0.109951743655322;

/// Degree-4 symmetric 6-point rule.
pub const RULE6: [TriPoint; 6] = [
    ([A6, A6], WA6),
    ([1.0 - 2.0 * A6, A6], WA6),
    ([A6, 1.0 - 2.0 * A6], WA6),
    ([B6, B6], WB6),
    ([1.0 - 2.0 * B6, B6], WB6),
    ([B6, 1.0 - 2.0 * B6], WB6),
];

/// Regular triangle rule selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum TriRule {
    Three,
    Five,
    Six,
}

impl TriRule {
    pub fn points(self) -> &'static [TriPoint] {
        match self {
            TriRule::Three => &FAR3,
            TriRule::Five => &NEAR5,
            TriRule::Six => &RULE6,
        }
    }
}

/// Gauss–Legendre nodes and weights on [0, 1].
pub fn gauss_legendre_01(n: usize) -> (Vec<f64>, Vec<f64>) {
    // Newton on P_n, starting from the Chebyshev-like guess
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let (pn, pm) = if n == 1 { (z, 1.0) } else { (p1, p0) };
            let dp = n as f64 * (z * pn - pm) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                let mut pv = (1.0, z);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * z * pv.1 - (k - 1) as f64 * pv.0) / k as f64;
                    pv = (pv.1, p2);
                }
                let (pn, pm) = if n == 1 { (z, 1.0) } else { (pv.1, pv.0) };
                let dp = n as f64 * (z * pn - pm) / (z * z - 1.0);
                w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
                break;
            }
        }
        x[i] = z;
    }
    let mut pairs: Vec<(f64, f64)> = x.iter().zip(&w).map(|(&x, &w)| (0.5 * (1.0 - x), 0.5 * w)).collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    pairs.into_iter().unzip()
}

/// Adjacency class of an element pair on the same surface.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Adjacency {
    Coincident,
    Edge,
    Vertex,
}

/// Tensor rule on the four-cube mapped to pairs of points in the singular
/// reference element. Weights include the Duffy Jacobians and sum to 1/4.
#[derive(Debug, Clone)]
pub struct SingularRule {
    pub x: Vec<[f64; 2]>,
    pub y: Vec<[f64; 2]>,
    pub w: Vec<f64>,
}

impl SingularRule {
    pub fn new(adjacency: Adjacency, order: usize) -> Self {
        let (g, gw) = gauss_legendre_01(order);
        let mut rule = SingularRule { x: Vec::new(), y: Vec::new(), w: Vec::new() };
        for (i0, &xi) in g.iter().enumerate() {
            for (i1, &e1) in g.iter().enumerate() {
                for (i2, &e2) in g.iter().enumerate() {
                    for (i3, &e3) in g.iter().enumerate() {
                        let base = gw[i0] * gw[i1] * gw[i2] * gw[i3];
                        let mut push = |x: [f64; 2], y: [f64; 2], w: f64| {
                            rule.x.push(x);
                            rule.y.push(y);
                            rule.w.push(base * w);
                        };
                        match adjacency {
                            Adjacency::Coincident => {
                                let w = xi.powi(3) * e1 * e1 * e2;
                                let a = [xi, xi * (1.0 - e1 + e1 * e2)];
                                let b = [xi * (1.0 - e1 * e2 * e3), xi * (1.0 - e1)];
                                push(a, b, w);
                                push(b, a, w);
                                let a = [xi, xi * e1 * (1.0 - e2 + e2 * e3)];
                                let b = [xi * (1.0 - e1 * e2), xi * e1 * (1.0 - e2)];
                                push(a, b, w);
                                push(b, a, w);
                                let a = [xi * (1.0 - e1 * e2 * e3), xi * e1 * (1.0 - e2 * e3)];
                                let b = [xi, xi * e1 * (1.0 - e2)];
                                push(a, b, w);
                                push(b, a, w);
                            }
                            Adjacency::Edge => {
                                let w1 = xi.powi(3) * e1 * e1;
                                let w2 = w1 * e2;
                                push(
                                    [xi, xi * e1 * e3],
                                    [xi * (1.0 - e1 * e2), xi * e1 * (1.0 - e2)],
                                    w1,
                                );
                                push(
                                    [xi, xi * e1],
                                    [xi * (1.0 - e1 * e2 * e3), xi * e1 * e2 * (1.0 - e3)],
                                    w2,
                                );
                                push(
                                    [xi * (1.0 - e1 * e2), xi * e1 * (1.0 - e2)],
                                    [xi, xi * e1 * e2 * e3],
                                    w2,
                                );
                                push(
                                    [xi * (1.0 - e1 * e2 * e3), xi * e1 * e2 * (1.0 - e3)],
                                    [xi, xi * e1],
                                    w2,
                                );
                                push(
                                    [xi * (1.0 - e1 * e2 * e3), xi * e1 * (1.0 - e2 * e3)],
                                    [xi, xi * e1 * e2],
                                    w2,
                                );
                            }
                            Adjacency::Vertex => {
                                let w = xi.powi(3) * e2;
                                push([xi, xi * e1], [xi * e2, xi * e2 * e3], w);
                                push([xi * e2, xi * e2 * e3], [xi, xi * e1], w);
                            }
                        }
                    }
                }
            }
        }
        rule
    }
}

/// P1 shape functions at a point of the singular reference element.
#[inline]
pub fn shape_ss(s: [f64; 2]) -> [f64; 3] {
    [1.0 - s[0], s[0] - s[1], s[1]]
}

/// P1 shape functions at a point of the regular reference triangle.
#[inline]
pub fn shape_ref(p: [f64; 2]) -> [f64; 3] {
    [1.0 - p[0] - p[1], p[0], p[1]]
}
