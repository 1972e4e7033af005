//! Envelope (skyline) LDL^T factorisation with reverse Cuthill–McKee ordering.
//!
//! Works for real symmetric and complex symmetric (non-Hermitian) matrices;
//! no pivoting, so the matrix must admit the factorisation as ordered.

use std::collections::VecDeque;
use std::ops::{Add, Div, Mul, Sub};

use super::sparse::CsrMatrix;
use crate::{Error, Result, C64};

pub trait Scalar:
    Copy
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + std::fmt::Debug
{
    fn zero() -> Self;
    fn from_real(x: f64) -> Self;
    fn modulus(self) -> f64;
    fn is_finite(self) -> bool;
    fn real(self) -> f64;
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn from_real(x: f64) -> Self {
        x
    }
    fn modulus(self) -> f64 {
        self.abs()
    }
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
    fn real(self) -> f64 {
        self
    }
}

impl Scalar for C64 {
    fn zero() -> Self {
        C64::new(0.0, 0.0)
    }
    fn from_real(x: f64) -> Self {
        C64::new(x, 0.0)
    }
    fn modulus(self) -> f64 {
        self.norm()
    }
    fn is_finite(self) -> bool {
        C64::is_finite(self)
    }
    fn real(self) -> f64 {
        self.re
    }
}

/// Reverse Cuthill–McKee permutation: `perm[new] = old`.
pub fn rcm(a: &CsrMatrix) -> Vec<usize> {
    let n = a.n;
    let adj: Vec<Vec<usize>> = (0..n)
        .map(|i| a.row(i).map(|(j, _)| j).filter(|&j| j != i).collect())
        .collect();
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);

    let bfs_levels = |start: usize| -> (usize, usize) {
        // returns (eccentricity, last node of the deepest level with min degree)
        let mut dist = vec![usize::MAX; n];
        dist[start] = 0;
        let mut q = VecDeque::from([start]);
        let mut far = start;
        while let Some(u) = q.pop_front() {
            let deeper = dist[u] > dist[far] || (dist[u] == dist[far] && degree[u] < degree[far]);
            if deeper {
                far = u;
            }
            for &v in &adj[u] {
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    q.push_back(v);
                }
            }
        }
        (dist[far], far)
    };

    while order.len() < n {
        let seed = (0..n)
            .filter(|&i| !visited[i])
            .min_by_key(|&i| (degree[i], i))
            .expect("unvisited node");
        // pseudo-peripheral start
        let mut start = seed;
        let (mut ecc, mut far) = bfs_levels(start);
        for _ in 0..8 {
            let (e2, f2) = bfs_levels(far);
            if e2 <= ecc {
                break;
            }
            start = far;
            ecc = e2;
            far = f2;
        }
        visited[start] = true;
        let mut q = VecDeque::from([start]);
        while let Some(u) = q.pop_front() {
            order.push(u);
            let mut nb: Vec<usize> = adj[u].iter().copied().filter(|&v| !visited[v]).collect();
            nb.sort_by_key(|&v| (degree[v], v));
            for v in nb {
                visited[v] = true;
                q.push_back(v);
            }
        }
    }
    order.reverse();
    order
}

/// LDL^T factor of `P A P^T` in envelope storage.
#[derive(Debug, Clone)]
pub struct LdlFactor<T: Scalar> {
    n: usize,
    perm: Vec<usize>,
    first: Vec<usize>,
    offset: Vec<usize>,
    /// Strictly-lower envelope of L, row by row.
    lower: Vec<T>,
    diag: Vec<T>,
}

impl<T: Scalar> LdlFactor<T> {
    /// Factorises `sum_t coeff_t * A_t` for matrices sharing a symmetric pattern.
    pub fn new(terms: &[(&CsrMatrix, T)], require_positive: bool) -> Result<Self> {
        let n = terms.first().map(|t| t.0.n).ok_or_else(|| Error::InvalidInput("empty matrix".into()))?;
        let pattern = terms
            .iter()
            .skip(1)
            .fold(terms[0].0.clone(), |acc, (m, _)| acc.linear_combination(1.0, m, 0.0));
        let perm = rcm(&pattern);
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut first: Vec<usize> = (0..n).collect();
        for i in 0..n {
            for (j, _) in pattern.row(perm[i]) {
                first[i] = first[i].min(inv[j]);
            }
        }
        let mut offset = Vec::with_capacity(n + 1);
        offset.push(0);
        for i in 0..n {
            offset.push(offset[i] + (i - first[i]));
        }
        let mut lower = vec![T::zero(); offset[n]];
        let mut diag = vec![T::zero(); n];
        for (m, c) in terms {
            for i in 0..n {
                for (j, v) in m.row(perm[i]) {
                    let jj = inv[j];
                    let val = *c * T::from_real(v);
                    if jj == i {
                        diag[i] = diag[i] + val;
                    } else if jj < i {
                        let at = offset[i] + jj - first[i];
                        lower[at] = lower[at] + val;
                    }
                }
            }
        }
        let scale = diag.iter().map(|d| d.modulus()).fold(0.0, f64::max);

        for i in 0..n {
            let fi = first[i];
            // g_ij = a_ij - sum_k g_ik l_jk, stored in place
            for j in fi..i {
                let fj = first[j].max(fi);
                let mut s = lower[offset[i] + j - fi];
                for k in fj..j {
                    s = s - lower[offset[i] + k - fi] * lower[offset[j] + k - first[j]];
                }
                lower[offset[i] + j - fi] = s;
            }
            let mut d = diag[i];
            for k in fi..i {
                let g = lower[offset[i] + k - fi];
                let l = g / diag[k];
                d = d - g * l;
                lower[offset[i] + k - fi] = l;
            }
            let bad = !d.is_finite()
                || d.modulus() <= 1e-14 * scale
                || (require_positive && !(d.real() > 0.0));
            if bad {
                return Err(Error::Singular(format!("zero or invalid pivot at row {i} of {n}")));
            }
            diag[i] = d;
        }
        Ok(LdlFactor { n, perm, first, offset, lower, diag })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn envelope_size(&self) -> usize {
        self.lower.len()
    }
}

impl<T: Scalar> LdlFactor<T>
where
    C64: Mul<T, Output = C64> + Div<T, Output = C64>,
{
    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [C64]) {
        let n = self.n;
        let mut y: Vec<C64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.lower[self.offset[i]..self.offset[i + 1]];
            let mut s = y[i];
            for (k, &l) in row.iter().enumerate() {
                s -= y[fi + k] * l;
            }
            y[i] = s;
        }
        for i in 0..n {
            y[i] = y[i] / self.diag[i];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let row = &self.lower[self.offset[i]..self.offset[i + 1]];
            let yi = y[i];
            for (k, &l) in row.iter().enumerate() {
                y[fi + k] -= yi * l;
            }
        }
        for (new, &old) in self.perm.iter().enumerate() {
            b[old] = y[new];
        }
    }
}
