#![allow(dead_code)]

use lmn_core::Matrix;
use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
}

pub fn to_na(m: &Matrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.data())
}

/// Reference singular values (descending, all `min(rows, cols)` of them)
/// from the eigenvalues of the smaller Gram matrix, via nalgebra.
pub fn oracle_singular_values(m: &Matrix) -> Vec<f64> {
    oracle_squared_singular_values(m)
        .into_iter()
        .map(|l| l.max(0.0).sqrt())
        .collect()
}

pub fn oracle_squared_singular_values(m: &Matrix) -> Vec<f64> {
    let a = to_na(m);
    let gram = if m.rows() >= m.cols() {
        a.transpose() * &a
    } else {
        &a * a.transpose()
    };
    let mut vals: Vec<f64> = SymmetricEigen::new(gram).eigenvalues.iter().copied().collect();
    vals.sort_by(|a, b| b.total_cmp(a));
    vals
}

pub fn orthonormality_error(m: &Matrix) -> f64 {
    m.transpose().matmul(m).max_abs_diff(&Matrix::identity(m.cols()))
}
