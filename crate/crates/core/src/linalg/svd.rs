//! Truncated singular value decomposition.
//!
//! `svd` runs one-sided (Hestenes) Jacobi directly on the matrix. `gram_svd`
//! diagonalizes the smaller Gram matrix with cyclic Jacobi and recovers the
//! other factor by projection. Both return `M ≈ V · diag(S) · Uᵀ` with `V`
//! holding left and `U` holding right singular vectors.

use super::matrix::{dot, norm, Matrix};
use crate::error::{Error, Result};

/// Default relative tolerance for numerical rank.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Smallest relative tolerance the Gram route can resolve. Squaring the
/// matrix pushes singular values below roughly `sqrt(eps)·S₀` into
/// rounding noise.
pub const GRAM_RANK_TOL_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct SvdResult {
    /// Left singular vectors, `rows × r`.
    pub v: Matrix,
    /// Singular values, descending.
    pub s: Vec<f64>,
    /// Right singular vectors, `cols × r`.
    pub u: Matrix,
}

impl SvdResult {
    pub fn rank(&self) -> usize {
        self.s.len()
    }

    /// `V · diag(S) · Uᵀ`
    pub fn reconstruct(&self) -> Matrix {
        let mut vs = self.v.clone();
        for r in 0..vs.rows() {
            for (x, s) in vs.row_mut(r).iter_mut().zip(&self.s) {
                *x *= s;
            }
        }
        vs.matmul(&self.u.transpose())
    }

    /// Keeps the leading `r` triplets.
    pub fn truncate(&self, r: usize) -> SvdResult {
        assert!(r >= 1 && r <= self.rank(), "truncate to {r} of {}", self.rank());
        SvdResult {
            v: self.v.leading_columns(r),
            s: self.s[..r].to_vec(),
            u: self.u.leading_columns(r),
        }
    }
}

/// Number of singular values strictly above `rel_tol · S₀`.
pub fn rank_estimate(s: &[f64], rel_tol: f64) -> usize {
    match s.first() {
        Some(&s0) if s0 > 0.0 => {
            let cutoff = rel_tol * s0;
            s.iter().take_while(|&&v| v > cutoff).count()
        }
        _ => 0,
    }
}

pub fn default_sweep_budget(rows: usize, cols: usize) -> usize {
    100 * rows.max(cols)
}

pub fn svd(m: &Matrix, max_rank: Option<usize>, tol: f64) -> Result<SvdResult> {
    svd_with_budget(m, max_rank, tol, default_sweep_budget(m.rows(), m.cols()))
}

pub fn svd_with_budget(
    m: &Matrix,
    max_rank: Option<usize>,
    tol: f64,
    max_sweeps: usize,
) -> Result<SvdResult> {
    check_input(m, tol)?;
    // Jacobi works on columns; keep the column count small.
    let (left, s, right) = if m.rows() >= m.cols() {
        one_sided_jacobi(m, max_sweeps)?
    } else {
        let (l, s, r) = one_sided_jacobi(&m.transpose(), max_sweeps)?;
        (r, s, l)
    };
    finish(left, s, right, max_rank, tol)
}

pub fn gram_svd(m: &Matrix, max_rank: Option<usize>, tol: f64) -> Result<SvdResult> {
    check_input(m, tol)?;
    let budget = default_sweep_budget(m.rows(), m.cols());
    if m.rows() >= m.cols() {
        let gram = m.transpose().matmul(m);
        let (u, s) = gram_factor(&gram, max_rank, tol, budget)?;
        let v = project(m.matmul(&u), &s);
        finish_columns(v, s, u)
    } else {
        let gram = m.matmul(&m.transpose());
        gram_svd_from_row_gram(&gram, max_rank, tol, |v| m.transpose().matmul(v))
    }
}

/// SVD of an implicit matrix `M` given its row Gram matrix `MMᵀ` and a way
/// to apply `Mᵀ`. Lets callers avoid materializing a wide `M`.
pub fn gram_svd_from_row_gram(
    row_gram: &Matrix,
    max_rank: Option<usize>,
    tol: f64,
    apply_transpose: impl FnOnce(&Matrix) -> Matrix,
) -> Result<SvdResult> {
    let budget = default_sweep_budget(row_gram.rows(), row_gram.cols());
    let (v, s) = gram_factor(row_gram, max_rank, tol, budget)?;
    let u = project(apply_transpose(&v), &s);
    finish_columns(v, s, u)
}

/// Singular values and one factor from a precomputed Gram matrix
/// (`MᵀM` gives right vectors, `MMᵀ` gives left vectors).
pub fn gram_factor(
    gram: &Matrix,
    max_rank: Option<usize>,
    tol: f64,
    max_sweeps: usize,
) -> Result<(Matrix, Vec<f64>)> {
    let (values, vectors) = symmetric_eigen(gram, max_sweeps)?;
    let s: Vec<f64> = values.iter().map(|&l| l.max(0.0).sqrt()).collect();
    let mut r = rank_estimate(&s, tol.max(GRAM_RANK_TOL_FLOOR));
    if let Some(cap) = max_rank {
        r = r.min(cap);
    }
    if r == 0 {
        return Err(Error::InvalidInput("matrix has numerical rank 0".into()));
    }
    Ok((vectors.leading_columns(r), s[..r].to_vec()))
}

/// Divides column `k` by `s[k]`, then re-orthonormalizes to remove the
/// error amplified by small singular values.
fn project(mut out: Matrix, s: &[f64]) -> Matrix {
    for r in 0..out.rows() {
        for (v, sv) in out.row_mut(r).iter_mut().zip(s) {
            *v /= sv;
        }
    }
    reorthonormalize(&mut out);
    out
}

fn reorthonormalize(m: &mut Matrix) {
    let cols: Vec<Vec<f64>> = (0..m.cols()).map(|c| m.column(c)).collect();
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(cols.len());
    for mut c in cols {
        for _ in 0..2 {
            for b in &basis {
                let d = dot(&c, b);
                c.iter_mut().zip(b).for_each(|(x, y)| *x -= d * y);
            }
        }
        let n = norm(&c);
        if n > 0.0 {
            c.iter_mut().for_each(|x| *x /= n);
        }
        basis.push(c);
    }
    for (j, b) in basis.iter().enumerate() {
        m.set_column(j, b);
    }
}

fn check_input(m: &Matrix, tol: f64) -> Result<()> {
    if !m.is_finite() {
        return Err(Error::InvalidInput("svd input contains non-finite entries".into()));
    }
    if !tol.is_finite() || tol < 0.0 {
        return Err(Error::InvalidInput(format!("svd tolerance must be >= 0, got {tol}")));
    }
    Ok(())
}

/// Orthogonalizes the columns of `m` (rows ≥ cols). Returns the normalized
/// columns, their norms and the accumulated rotation, unsorted.
type Columns = Vec<Vec<f64>>;

fn one_sided_jacobi(m: &Matrix, max_sweeps: usize) -> Result<(Columns, Vec<f64>, Columns)> {
    let n = m.cols();
    let mut w: Vec<Vec<f64>> = (0..n).map(|c| m.column(c)).collect();
    let mut j: Vec<Vec<f64>> = (0..n)
        .map(|c| {
            let mut e = vec![0.0; n];
            e[c] = 1.0;
            e
        })
        .collect();
    let threshold = f64::EPSILON * (m.rows() as f64).sqrt().max(1.0);
    // Columns at rounding level of ‖M‖_F cannot be orthogonalized further
    // against large ones and count as zero.
    let negligible = (f64::EPSILON * m.frobenius_norm()).powi(2);

    let mut converged = n < 2;
    let mut sweeps = 0;
    while !converged {
        if sweeps >= max_sweeps {
            return Err(Error::NoConvergence { iterations: sweeps });
        }
        sweeps += 1;
        converged = true;
        for p in 0..n - 1 {
            for q in p + 1..n {
                let alpha = dot(&w[p], &w[p]);
                let beta = dot(&w[q], &w[q]);
                let gamma = dot(&w[p], &w[q]);
                if gamma == 0.0
                    || alpha <= negligible
                    || beta <= negligible
                    || gamma.abs() <= threshold * (alpha * beta).sqrt()
                {
                    continue;
                }
                converged = false;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut w, p, q, c, s);
                rotate(&mut j, p, q, c, s);
            }
        }
    }

    let sigma: Vec<f64> = w
        .iter()
        .map(|c| dot(c, c))
        .map(|sq| if sq <= negligible { 0.0 } else { sq.sqrt() })
        .collect();
    for (col, &sv) in w.iter_mut().zip(&sigma) {
        if sv > 0.0 {
            col.iter_mut().for_each(|x| *x /= sv);
        }
    }
    Ok((w, sigma, j))
}

fn rotate(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (head, tail) = cols.split_at_mut(q);
    let (a, b) = (&mut head[p], &mut tail[0]);
    for (x, y) in a.iter_mut().zip(b.iter_mut()) {
        let (xp, yq) = (*x, *y);
        *x = c * xp - s * yq;
        *y = s * xp + c * yq;
    }
}

/// Sorts triplets, truncates, applies the sign convention.
fn finish(
    left: Vec<Vec<f64>>,
    s: Vec<f64>,
    right: Vec<Vec<f64>>,
    max_rank: Option<usize>,
    tol: f64,
) -> Result<SvdResult> {
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
    let sorted: Vec<f64> = order.iter().map(|&i| s[i]).collect();
    let mut r = rank_estimate(&sorted, tol);
    if let Some(cap) = max_rank {
        r = r.min(cap);
    }
    if r == 0 {
        return Err(Error::InvalidInput("matrix has numerical rank 0".into()));
    }
    let rows = left[0].len();
    let cols = right[0].len();
    let mut v = Matrix::zeros(rows, r);
    let mut u = Matrix::zeros(cols, r);
    for (k, &i) in order.iter().take(r).enumerate() {
        v.set_column(k, &left[i]);
        u.set_column(k, &right[i]);
    }
    finish_columns(v, sorted[..r].to_vec(), u)
}

/// Flips each (v, u) pair so the first nonzero entry of the `u` column is
/// nonnegative.
fn finish_columns(mut v: Matrix, s: Vec<f64>, mut u: Matrix) -> Result<SvdResult> {
    for k in 0..s.len() {
        let first = (0..u.rows()).map(|r| u[(r, k)]).find(|x| x.abs() > 1e-12);
        if matches!(first, Some(x) if x < 0.0) {
            for r in 0..u.rows() {
                u[(r, k)] = -u[(r, k)];
            }
            for r in 0..v.rows() {
                v[(r, k)] = -v[(r, k)];
            }
        }
    }
    Ok(SvdResult { v, s, u })
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Eigenvalues are
/// returned descending, eigenvectors as matching columns.
pub fn symmetric_eigen(a: &Matrix, max_sweeps: usize) -> Result<(Vec<f64>, Matrix)> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::shape("symmetric_eigen", "square matrix", format!("{}x{}", n, a.cols())));
    }
    let mut m = a.clone();
    let mut vecs = Matrix::identity(n);
    let scale = m.frobenius_norm();
    let mut sweeps = 0;
    loop {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)] * m[(i, j)])
            .sum::<f64>()
            .sqrt();
        if off <= f64::EPSILON * 1e-2 * scale || scale == 0.0 {
            break;
        }
        if sweeps >= max_sweeps {
            return Err(Error::NoConvergence { iterations: sweeps });
        }
        sweeps += 1;
        let mut rotated = false;
        for p in 0..n.saturating_sub(1) {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                if apq.abs() <= f64::EPSILON * 1e-3 * (app.abs() * aqq.abs()).sqrt() {
                    m[(p, q)] = 0.0;
                    m[(q, p)] = 0.0;
                    continue;
                }
                rotated = true;
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (1.0 + theta * theta).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = m[(k, p)];
                    let akq = m[(k, q)];
                    m[(k, p)] = c * akp - s * akq;
                    m[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = m[(p, k)];
                    let aqk = m[(q, k)];
                    m[(p, k)] = c * apk - s * aqk;
                    m[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = vecs[(k, p)];
                    let vkq = vecs[(k, q)];
                    vecs[(k, p)] = c * vkp - s * vkq;
                    vecs[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(j, j)].total_cmp(&m[(i, i)]));
    let values = order.iter().map(|&i| m[(i, i)]).collect();
    let sorted = Matrix::from_fn(n, n, |r, c| vecs[(r, order[c])]);
    Ok((values, sorted))
}
