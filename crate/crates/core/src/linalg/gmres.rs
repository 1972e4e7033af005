//! Unrestarted GMRES with modified Gram–Schmidt and Givens rotations.

use std::time::Instant;

use serde::Serialize;

use super::action::LinearAction;
use crate::{Error, Result, C64};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmresOptions {
    /// Relative residual tolerance.
    pub tol: f64,
    pub maxit: usize,
}

impl Default for GmresOptions {
    fn default() -> Self {
        GmresOptions { tol: 1e-5, maxit: 1000 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    #[serde(skip)]
    pub solution: Vec<C64>,
    pub iterations: usize,
    /// Relative residual before the first and after every iteration.
    pub residual_history: Vec<f64>,
    pub converged: bool,
    /// Krylov space became invariant before convergence or maxit.
    pub breakdown: bool,
    pub time_total: f64,
    pub time_per_iteration: f64,
}

impl SolveReport {
    pub fn final_residual(&self) -> f64 {
        *self.residual_history.last().unwrap_or(&0.0)
    }
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[C64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Solves `A x = b` from a zero initial guess.
pub fn gmres(a: &dyn LinearAction, b: &[C64], opts: &GmresOptions) -> Result<SolveReport> {
    let n = b.len();
    if a.rows() != n || a.cols() != n {
        return Err(Error::InvalidInput(format!(
            "operator is {}x{} but the right-hand side has length {n}",
            a.rows(),
            a.cols()
        )));
    }
    if b.iter().any(|z| !z.is_finite()) {
        return Err(Error::InvalidInput("right-hand side is not finite".into()));
    }
    let start = Instant::now();
    let beta = norm(b);
    if beta == 0.0 {
        return Ok(SolveReport {
            solution: vec![ZERO; n],
            iterations: 0,
            residual_history: vec![0.0],
            converged: true,
            breakdown: false,
            time_total: start.elapsed().as_secs_f64(),
            time_per_iteration: 0.0,
        });
    }

    let maxit = opts.maxit.min(n.max(1));
    let mut basis: Vec<Vec<C64>> = vec![b.iter().map(|z| z / beta).collect()];
    // column j of the rotated Hessenberg matrix, length j + 1
    let mut r: Vec<Vec<C64>> = Vec::new();
    let mut cs: Vec<f64> = Vec::new();
    let mut sn: Vec<C64> = Vec::new();
    let mut g = vec![C64::new(beta, 0.0)];
    let mut history = vec![1.0];
    let mut breakdown = false;
    let mut converged = false;

    for j in 0..maxit {
        let mut w = a.apply_vec(&basis[j]);
        let mut h = vec![ZERO; j + 2];
        for (i, v) in basis.iter().enumerate() {
            let hij = dot(v, &w);
            for (wk, vk) in w.iter_mut().zip(v) {
                *wk -= hij * vk;
            }
            h[i] = hij;
        }
        let hnext = norm(&w);
        h[j + 1] = C64::new(hnext, 0.0);

        for i in 0..j {
            let (x, y) = (h[i], h[i + 1]);
            h[i] = cs[i] * x + sn[i] * y;
            h[i + 1] = -sn[i].conj() * x + cs[i] * y;
        }
        let (x, y) = (h[j], h[j + 1]);
        let t = (x.norm_sqr() + y.norm_sqr()).sqrt();
        let (c, s) = if x.norm() == 0.0 {
            (0.0, C64::new(1.0, 0.0))
        } else {
            (x.norm() / t, (x / x.norm()) * y.conj() / t)
        };
        h[j] = c * x + s * y;
        h.truncate(j + 1);
        cs.push(c);
        sn.push(s);
        let gj = g[j];
        g[j] = c * gj;
        g.push(-s.conj() * gj);
        r.push(h);

        let rel = g[j + 1].norm() / beta;
        let last = *history.last().unwrap();
        history.push(rel.min(last));
        if rel <= opts.tol {
            converged = true;
            break;
        }
        if hnext < 1e-14 * beta {
            breakdown = true;
            break;
        }
        basis.push(w.iter().map(|z| z / hnext).collect());
    }

    let m = r.len();
    let mut y = vec![ZERO; m];
    for i in (0..m).rev() {
        let mut s = g[i];
        for k in (i + 1)..m {
            s -= r[k][i] * y[k];
        }
        y[i] = if r[i][i].norm() > 0.0 { s / r[i][i] } else { ZERO };
    }
    let mut x = vec![ZERO; n];
    for (yk, v) in y.iter().zip(&basis) {
        for (xi, vi) in x.iter_mut().zip(v) {
            *xi += yk * vi;
        }
    }
    let final_rel = *history.last().unwrap();
    converged |= final_rel <= opts.tol;
    let total = start.elapsed().as_secs_f64();
    Ok(SolveReport {
        solution: x,
        iterations: m,
        residual_history: history,
        converged,
        breakdown,
        time_total: total,
        time_per_iteration: if m > 0 { total / m as f64 } else { 0.0 },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{dense, identity, DenseMatrix};
    use rand::{Rng, SeedableRng};
    use std::sync::Arc;

    fn true_residual(a: &DenseMatrix, x: &[C64], b: &[C64]) -> f64 {
        let mut ax = vec![ZERO; b.len()];
        a.matvec(x, &mut ax);
        norm(&ax.iter().zip(b).map(|(p, q)| p - q).collect::<Vec<_>>()) / norm(b)
    }

    #[test]
    fn identity_converges_immediately() {
        let b: Vec<C64> = (0..10).map(|i| C64::new(i as f64, 1.0)).collect();
        let rep = gmres(&*identity(10), &b, &GmresOptions::default()).unwrap();
        assert_eq!(rep.iterations, 1);
        assert!(rep.converged);
        for (x, y) in rep.solution.iter().zip(&b) {
            assert!((x - y).norm() < 1e-14);
        }
    }

    #[test]
    fn zero_tolerance_terminates_at_dimension() {
        let n = 12;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let m = DenseMatrix::from_fn(n, n, |i, j| {
            C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) + if i == j { C64::new(3.0, 0.0) } else { ZERO }
        });
        let b: Vec<C64> = (0..n).map(|_| C64::new(rng.gen(), rng.gen())).collect();
        let rep = gmres(&*dense(Arc::new(m.clone())), &b, &GmresOptions { tol: 0.0, maxit: 1000 }).unwrap();
        assert!(rep.iterations <= n);
        assert!(true_residual(&m, &rep.solution, &b) < 1e-12);
    }

    #[test]
    fn dimension_mismatch() {
        let b = vec![C64::new(1.0, 0.0); 3];
        assert!(gmres(&*identity(4), &b, &GmresOptions::default()).is_err());
        let b = vec![C64::new(f64::NAN, 0.0); 4];
        assert!(gmres(&*identity(4), &b, &GmresOptions::default()).is_err());
    }

    #[test]
    fn zero_rhs() {
        let rep = gmres(&*identity(4), &[ZERO; 4], &GmresOptions::default()).unwrap();
        assert!(rep.converged && rep.solution.iter().all(|z| *z == ZERO));
    }

    #[test]
    fn breakdown_returns_exact_solution() {
        // b in a 2-dimensional invariant subspace
        let m = DenseMatrix::from_fn(5, 5, |i, j| if i == j { C64::new(1.0 + i as f64, 0.0) } else { ZERO });
        let mut b = vec![ZERO; 5];
        b[1] = C64::new(1.0, 0.0);
        b[3] = C64::new(0.0, 2.0);
        let rep = gmres(&*dense(Arc::new(m.clone())), &b, &GmresOptions { tol: 0.0, maxit: 50 }).unwrap();
        assert_eq!(rep.iterations, 2);
        assert!(true_residual(&m, &rep.solution, &b) < 1e-13);
    }
}
