use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How many singular values a truncated inverse keeps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum TruncationPolicy {
    /// Keep the `k` largest.
    Count { k: usize },
    /// Keep values above `tol` times the largest.
    Tolerance { tol: f64 },
}

impl TruncationPolicy {
    pub fn count(k: usize) -> Self {
        Self::Count { k }
    }

    pub fn tolerance(tol: f64) -> Self {
        Self::Tolerance { tol }
    }

    /// Check the policy against a target with `max_rank` singular values.
    pub fn validate(&self, max_rank: usize) -> Result<()> {
        match *self {
            Self::Count { k } if k == 0 || k > max_rank => Err(Error::invalid(format!(
                "truncation count {k} outside 1..={max_rank}"
            ))),
            Self::Tolerance { tol } if !(tol > 0.0 && tol < 1.0) => Err(Error::invalid(format!(
                "truncation tolerance {tol} outside (0, 1)"
            ))),
            _ => Ok(()),
        }
    }

    /// Indices to keep from `values`, largest first. Ties keep the lower
    /// original index.
    fn select(&self, values: &[f64]) -> Vec<usize> {
        let mut order: Vec<usize> = (0..values.len()).collect();
        order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
        match *self {
            Self::Count { k } => order.truncate(k),
            Self::Tolerance { tol } => {
                let top = order.first().map_or(0.0, |&i| values[i]);
                order.retain(|&i| values[i] > tol * top);
            }
        }
        order
    }
}

/// Leading singular triplets of a matrix: `M ≈ U_k diag(s_k) V_k^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedSvd {
    pub u: DMatrix<f64>,
    pub s: Vec<f64>,
    pub v: DMatrix<f64>,
    /// Every singular value, largest first.
    pub spectrum: Vec<f64>,
}

impl TruncatedSvd {
    /// `V_k S_k^-1 U_k^T`.
    pub fn pinv(&self) -> DMatrix<f64> {
        let mut vs = self.v.clone();
        for (c, s) in self.s.iter().enumerate() {
            vs.column_mut(c).unscale_mut(*s);
        }
        vs * self.u.transpose()
    }
}

/// Keep the singular triplets chosen by `policy`. Zero singular values are
/// never kept.
pub fn truncated_svd(m: &DMatrix<f64>, policy: TruncationPolicy) -> Result<TruncatedSvd> {
    let (rows, cols) = m.shape();
    policy.validate(rows.min(cols))?;
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("SVD input contains NaN or Inf".into()));
    }
    let a = faer::Mat::<f64>::from_fn(rows, cols, |i, j| m[(i, j)]);
    let svd = a
        .thin_svd()
        .map_err(|_| Error::Numeric("SVD did not converge".into()))?;
    let (u_all, v_all) = (svd.U(), svd.V());
    let sv: Vec<f64> = svd.S().column_vector().iter().copied().collect();
    let keep: Vec<usize> = policy.select(&sv).into_iter().filter(|&i| sv[i] > 0.0).collect();
    let u = DMatrix::from_fn(rows, keep.len(), |r, c| u_all[(r, keep[c])]);
    let v = DMatrix::from_fn(cols, keep.len(), |r, c| v_all[(r, keep[c])]);
    let mut spectrum = sv.to_vec();
    spectrum.sort_by(|a, b| b.total_cmp(a));
    Ok(TruncatedSvd {
        u,
        s: keep.iter().map(|&i| sv[i]).collect(),
        v,
        spectrum,
    })
}

/// Truncated Moore–Penrose pseudoinverse `V_k S_k^-1 U_k^T`.
pub fn tsvd_pinv(m: &DMatrix<f64>, policy: TruncationPolicy) -> Result<DMatrix<f64>> {
    Ok(truncated_svd(m, policy)?.pinv())
}
