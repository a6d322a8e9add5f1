//! Dense matrices and truncated SVD.

mod matrix;
mod svd;

pub use matrix::{dot, norm, Matrix};
pub use svd::{
    default_sweep_budget, gram_factor, gram_svd, gram_svd_from_row_gram, rank_estimate, svd, svd_with_budget,
    symmetric_eigen, SvdResult, DEFAULT_RANK_TOL, GRAM_RANK_TOL_FLOOR,
};
