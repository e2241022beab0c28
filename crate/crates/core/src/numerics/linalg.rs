use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// `(P + P^T) / 2`.
pub fn symmetrize(p: &DMatrix<f64>) -> DMatrix<f64> {
    (p + p.transpose()) * 0.5
}

/// Symmetrise `p` and check that its smallest eigenvalue is at least
/// `-rel_tol * ||p||_2`.
pub fn checked_covariance(p: &DMatrix<f64>, rel_tol: f64) -> Result<DMatrix<f64>> {
    if p.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("covariance contains NaN or Inf".into()));
    }
    let s = symmetrize(p);
    let ev = s.clone().symmetric_eigenvalues();
    let max_abs = ev.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let min = ev.iter().copied().fold(f64::INFINITY, f64::min);
    if min < -rel_tol * max_abs {
        return Err(Error::Numeric(format!(
            "covariance not positive semidefinite: min eigenvalue {min:e}, norm {max_abs:e}"
        )));
    }
    Ok(s)
}

/// Pivoted Cholesky of a symmetric PSD matrix, stopped when the largest
/// remaining pivot drops below `rel_tol * scale`. Returns the selected
/// row indices in pivot order and the lower Cholesky factor of the
/// selected principal submatrix.
pub fn pivoted_cholesky(
    s: &DMatrix<f64>,
    rel_tol: f64,
    scale: f64,
) -> (Vec<usize>, DMatrix<f64>) {
    let n = s.nrows();
    let mut work = s.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let threshold = rel_tol * scale;
    let mut rank = 0;
    for j in 0..n {
        let (mut best, mut best_val) = (j, f64::NEG_INFINITY);
        for i in j..n {
            let v = work[(i, i)];
            if v > best_val {
                best = i;
                best_val = v;
            }
        }
        if !(best_val > threshold) {
            break;
        }
        if best != j {
            work.swap_rows(j, best);
            work.swap_columns(j, best);
            perm.swap(j, best);
        }
        let pivot = work[(j, j)].sqrt();
        work[(j, j)] = pivot;
        for i in (j + 1)..n {
            work[(i, j)] /= pivot;
        }
        for c in (j + 1)..n {
            let lc = work[(c, j)];
            if lc == 0.0 {
                continue;
            }
            for i in c..n {
                let li = work[(i, j)];
                work[(i, c)] -= li * lc;
            }
        }
        rank += 1;
    }
    let mut l = DMatrix::zeros(rank, rank);
    for c in 0..rank {
        for r in c..rank {
            l[(r, c)] = work[(r, c)];
        }
    }
    perm.truncate(rank);
    (perm, l)
}
