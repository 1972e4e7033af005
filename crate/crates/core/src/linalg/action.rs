//! Composable "apply to vector" operators.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use super::dense::DenseMatrix;
use super::ldl::LdlFactor;
use super::sparse::CsrMatrix;
use crate::C64;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Linear map between complex vector spaces.
pub trait LinearAction: Send + Sync {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;
    /// `y = A x`; `y` is overwritten.
    fn apply(&self, x: &[C64], y: &mut [C64]);
    /// Dense matrix-vector products performed by one call of `apply`.
    fn dense_products(&self) -> usize;
    /// Sparse factorisation solves performed by one call of `apply`.
    fn sparse_solves(&self) -> usize {
        0
    }

    fn apply_vec(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![ZERO; self.rows()];
        self.apply(x, &mut y);
        y
    }
}

/// Shared handle to a linear action.
pub type Action = Arc<dyn LinearAction>;

/// Dense matrix action that counts how often it was applied.
pub struct DenseAction {
    pub matrix: Arc<DenseMatrix>,
    calls: AtomicUsize,
}

impl DenseAction {
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }
}

impl LinearAction for DenseAction {
    fn rows(&self) -> usize {
        self.matrix.rows
    }
    fn cols(&self) -> usize {
        self.matrix.cols
    }
    fn apply(&self, x: &[C64], y: &mut [C64]) {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.matrix.matvec(x, y);
    }
    fn dense_products(&self) -> usize {
        1
    }
}

pub fn dense(matrix: Arc<DenseMatrix>) -> Action {
    Arc::new(DenseAction { matrix, calls: AtomicUsize::new(0) })
}

struct Sparse(Arc<CsrMatrix>);

impl LinearAction for Sparse {
    fn rows(&self) -> usize {
        self.0.n
    }
    fn cols(&self) -> usize {
        self.0.n
    }
    fn apply(&self, x: &[C64], y: &mut [C64]) {
        self.0.matvec(x, y);
    }
    fn dense_products(&self) -> usize {
        0
    }
}

pub fn sparse(m: Arc<CsrMatrix>) -> Action {
    Arc::new(Sparse(m))
}

struct RealSolve(Arc<LdlFactor<f64>>);

impl LinearAction for RealSolve {
    fn rows(&self) -> usize {
        self.0.dim()
    }
    fn cols(&self) -> usize {
        self.0.dim()
    }
    fn apply(&self, x: &[C64], y: &mut [C64]) {
        y.copy_from_slice(x);
        self.0.solve_in_place(y);
    }
    fn dense_products(&self) -> usize {
        0
    }
    fn sparse_solves(&self) -> usize {
        1
    }
}

struct ComplexSolve(Arc<LdlFactor<C64>>);

impl LinearAction for ComplexSolve {
    fn rows(&self) -> usize {
        self.0.dim()
    }
    fn cols(&self) -> usize {
        self.0.dim()
    }
    fn apply(&self, x: &[C64], y: &mut [C64]) {
        y.copy_from_slice(x);
        self.0.solve_in_place(y);
    }
    fn dense_products(&self) -> usize {
        0
    }
    fn sparse_solves(&self) -> usize {
        1
    }
}

pub fn solve_real(f: Arc<LdlFactor<f64>>) -> Action {
    Arc::new(RealSolve(f))
}

pub fn solve_complex(f: Arc<LdlFactor<C64>>) -> Action {
    Arc::new(ComplexSolve(f))
}

struct Identity(usize);

impl LinearAction for Identity {
    fn rows(&self) -> usize {
        self.0
    }
    fn cols(&self) -> usize {
        self.0
    }
    fn apply(&self, x: &[C64], y: &mut [C64]) {
        y.copy_from_slice(x);
    }
    fn dense_products(&self) -> usize {
        0
    }
}

pub fn identity(n: usize) -> Action {
    Arc::new(Identity(n))
}

/// `sum_t c_t A_t`.
struct LinComb(Vec<(C64, Action)>);

impl LinearAction for LinComb {
    fn rows(&self) -> usize {
        self.0[0].1.rows()
    }
    fn cols(&self) -> usize {
        self.0[0].1.cols()
    }
    fn apply(&self, x: &[C64], y: &mut [C64]) {
        let mut tmp = vec![ZERO; y.len()];
        y.fill(ZERO);
        for (c, a) in &self.0 {
            a.apply(x, &mut tmp);
            for (yi, ti) in y.iter_mut().zip(&tmp) {
                *yi += c * ti;
            }
        }
    }
    fn dense_products(&self) -> usize {
        self.0.iter().map(|(_, a)| a.dense_products()).sum()
    }
    fn sparse_solves(&self) -> usize {
        self.0.iter().map(|(_, a)| a.sparse_solves()).sum()
    }
}

/// Linear combination of actions of equal shape.
pub fn lin_comb(terms: Vec<(C64, Action)>) -> Action {
    assert!(!terms.is_empty(), "empty linear combination");
    let (r, c) = (terms[0].1.rows(), terms[0].1.cols());
    assert!(terms.iter().all(|(_, a)| a.rows() == r && a.cols() == c), "shape mismatch in sum");
    if terms.len() == 1 && terms[0].0 == C64::new(1.0, 0.0) {
        return terms.into_iter().next().unwrap().1;
    }
    Arc::new(LinComb(terms))
}

pub fn scaled(c: C64, a: Action) -> Action {
    lin_comb(vec![(c, a)])
}

pub fn sum(terms: Vec<Action>) -> Action {
    lin_comb(terms.into_iter().map(|a| (C64::new(1.0, 0.0), a)).collect())
}

/// `A_0 A_1 ... A_k`, applied right to left.
struct Product(Vec<Action>);

impl LinearAction for Product {
    fn rows(&self) -> usize {
        self.0[0].rows()
    }
    fn cols(&self) -> usize {
        self.0.last().unwrap().cols()
    }
    fn apply(&self, x: &[C64], y: &mut [C64]) {
        let mut cur = x.to_vec();
        for a in self.0.iter().rev() {
            let mut next = vec![ZERO; a.rows()];
            a.apply(&cur, &mut next);
            cur = next;
        }
        y.copy_from_slice(&cur);
    }
    fn dense_products(&self) -> usize {
        self.0.iter().map(|a| a.dense_products()).sum()
    }
    fn sparse_solves(&self) -> usize {
        self.0.iter().map(|a| a.sparse_solves()).sum()
    }
}

pub fn product(factors: Vec<Action>) -> Action {
    assert!(!factors.is_empty(), "empty product");
    for w in factors.windows(2) {
        assert_eq!(w[0].cols(), w[1].rows(), "shape mismatch in product");
    }
    if factors.len() == 1 {
        return factors.into_iter().next().unwrap();
    }
    Arc::new(Product(factors))
}

/// Block grid with `None` for zero blocks.
pub struct BlockAction {
    pub row_sizes: Vec<usize>,
    pub col_sizes: Vec<usize>,
    pub blocks: Vec<Vec<Option<Action>>>,
}

impl BlockAction {
    pub fn new(row_sizes: Vec<usize>, col_sizes: Vec<usize>, blocks: Vec<Vec<Option<Action>>>) -> Self {
        assert_eq!(blocks.len(), row_sizes.len());
        for (i, row) in blocks.iter().enumerate() {
            assert_eq!(row.len(), col_sizes.len());
            for (j, b) in row.iter().enumerate() {
                if let Some(b) = b {
                    assert_eq!((b.rows(), b.cols()), (row_sizes[i], col_sizes[j]), "block ({i}, {j})");
                }
            }
        }
        BlockAction { row_sizes, col_sizes, blocks }
    }

    pub fn diagonal(blocks: Vec<Action>) -> Self {
        let sizes: Vec<usize> = blocks.iter().map(|b| b.rows()).collect();
        let n = blocks.len();
        let grid = blocks
            .into_iter()
            .enumerate()
            .map(|(i, b)| (0..n).map(|j| if i == j { Some(b.clone()) } else { None }).collect())
            .collect();
        BlockAction::new(sizes.clone(), sizes, grid)
    }
}

impl LinearAction for BlockAction {
    fn rows(&self) -> usize {
        self.row_sizes.iter().sum()
    }
    fn cols(&self) -> usize {
        self.col_sizes.iter().sum()
    }
    fn apply(&self, x: &[C64], y: &mut [C64]) {
        y.fill(ZERO);
        let mut r0 = 0;
        for (i, row) in self.blocks.iter().enumerate() {
            let rs = self.row_sizes[i];
            let mut tmp = vec![ZERO; rs];
            let mut c0 = 0;
            for (j, b) in row.iter().enumerate() {
                let cs = self.col_sizes[j];
                if let Some(b) = b {
                    b.apply(&x[c0..c0 + cs], &mut tmp);
                    for (yi, ti) in y[r0..r0 + rs].iter_mut().zip(&tmp) {
                        *yi += ti;
                    }
                }
                c0 += cs;
            }
            r0 += rs;
        }
    }
    fn dense_products(&self) -> usize {
        self.blocks.iter().flatten().flatten().map(|b| b.dense_products()).sum()
    }
    fn sparse_solves(&self) -> usize {
        self.blocks.iter().flatten().flatten().map(|b| b.sparse_solves()).sum()
    }
}

pub fn block(row_sizes: Vec<usize>, col_sizes: Vec<usize>, blocks: Vec<Vec<Option<Action>>>) -> Action {
    Arc::new(BlockAction::new(row_sizes, col_sizes, blocks))
}

/// Materialises an action column by column.
pub fn to_dense(a: &dyn LinearAction) -> DenseMatrix {
    let (r, c) = (a.rows(), a.cols());
    let mut m = DenseMatrix::zeros(r, c);
    let mut e = vec![ZERO; c];
    let mut col = vec![ZERO; r];
    for j in 0..c {
        e[j] = C64::new(1.0, 0.0);
        a.apply(&e, &mut col);
        for i in 0..r {
            m.data[i * c + j] = col[i];
        }
        e[j] = ZERO;
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn random_dense(r: usize, c: usize, seed: u64) -> Arc<DenseMatrix> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        Arc::new(DenseMatrix::from_fn(r, c, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))))
    }

    fn random_vec(n: usize, seed: u64) -> Vec<C64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
    }

    fn composite() -> Action {
        let a = dense(random_dense(4, 4, 1));
        let b = dense(random_dense(4, 3, 2));
        let c = dense(random_dense(3, 4, 3));
        let top = sum(vec![a.clone(), scaled(C64::new(0.5, -2.0), product(vec![b.clone(), c.clone()]))]);
        block(vec![4, 3], vec![4, 4], vec![vec![Some(top), Some(a)], vec![Some(c), None]])
    }

    #[test]
    fn counts_are_structural() {
        let g = composite();
        assert_eq!(g.dense_products(), 5);
        let raw = Arc::new(DenseAction { matrix: random_dense(3, 3, 9), calls: AtomicUsize::new(0) });
        let d: Action = raw.clone();
        product(vec![d.clone(), d]).apply_vec(&[C64::new(1.0, 0.0); 3]);
        assert_eq!(raw.calls(), 2);
    }

    #[test]
    fn block_matches_dense_assembly() {
        let g = composite();
        let m = to_dense(&*g);
        let x = random_vec(8, 5);
        let mut y = vec![ZERO; 7];
        m.matvec(&x, &mut y);
        let z = g.apply_vec(&x);
        for (u, v) in y.iter().zip(&z) {
            assert!((u - v).norm() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn linearity(seed in 0u64..1000, ar in -2.0f64..2.0, ai in -2.0f64..2.0, br in -2.0f64..2.0) {
            let g = composite();
            let (x, y) = (random_vec(8, seed), random_vec(8, seed + 1));
            let (alpha, beta) = (C64::new(ar, ai), C64::new(br, 0.3));
            let mix: Vec<C64> = x.iter().zip(&y).map(|(a, b)| alpha * a + beta * b).collect();
            let lhs = g.apply_vec(&mix);
            let (gx, gy) = (g.apply_vec(&x), g.apply_vec(&y));
            for i in 0..lhs.len() {
                let rhs = alpha * gx[i] + beta * gy[i];
                prop_assert!((lhs[i] - rhs).norm() <= 1e-12 * (1.0 + rhs.norm()));
            }
        }

        #[test]
        fn composition_associativity(seed in 0u64..1000) {
            let p = dense(random_dense(8, 7, seed));
            let a = composite();
            let x = random_vec(8, seed + 7);
            let composed = product(vec![p.clone(), a.clone()]).apply_vec(&x);
            let nested = p.apply_vec(&a.apply_vec(&x));
            for (u, v) in composed.iter().zip(&nested) {
                prop_assert!((u - v).norm() <= 1e-13 * (1.0 + v.norm()));
            }
        }
    }
}
