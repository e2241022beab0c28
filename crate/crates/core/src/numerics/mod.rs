//! Dense numerical kernels shared by the model, estimators and evaluation.

mod expm;
mod linalg;
mod spectrum;
mod tsvd;

pub use expm::expm;
pub use linalg::{checked_covariance, pivoted_cholesky, symmetrize};
pub use spectrum::{periodogram_spatial, SpatialSpectrum};
pub use tsvd::{truncated_svd, tsvd_pinv, TruncatedSvd, TruncationPolicy};
