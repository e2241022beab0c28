use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Output residual error. Per step, `beta_k` is the scalar least-squares
/// fit of `beta u_k = u_k - u^_k` across channels; steps where `u_k` is
/// zero contribute `beta_k = 0`. Returns `sqrt(sum beta_k^2)`.
pub fn error_eu(measured: &DMatrix<f64>, estimated: &DMatrix<f64>) -> Result<f64> {
    if measured.shape() != estimated.shape() {
        return Err(Error::invalid(format!(
            "measured {:?} and estimated {:?} outputs differ in shape",
            measured.shape(),
            estimated.shape()
        )));
    }
    let mut sum = 0.0;
    for (u, u_hat) in measured.row_iter().zip(estimated.row_iter()) {
        let uu = u.dot(&u);
        if uu > 0.0 {
            let beta = (uu - u.dot(&u_hat)) / uu;
            sum += beta * beta;
        }
    }
    Ok(sum.sqrt())
}

/// Input covariance error `sqrt(sum tr(P^r_k) / sum |r^_k|^2)`.
pub fn error_er(trace_pr: &[f64], r_hat: &DMatrix<f64>) -> Result<f64> {
    if trace_pr.len() != r_hat.nrows() {
        return Err(Error::invalid(format!(
            "{} covariance traces for {} estimates",
            trace_pr.len(),
            r_hat.nrows()
        )));
    }
    let energy = r_hat.norm_squared();
    if energy <= 0.0 {
        return Err(Error::invalid("input estimates are all zero; E_r is undefined"));
    }
    Ok((trace_pr.iter().sum::<f64>() / energy).sqrt())
}

/// Combined tuning error `|[E_u, E_r]|_2`.
pub fn sigma_e(e_u: f64, e_r: f64) -> f64 {
    e_u.hypot(e_r)
}

/// Root-mean-square error over the true series' peak-to-peak range.
pub fn nrmse(truth: &[f64], estimate: &[f64]) -> Result<f64> {
    if truth.len() != estimate.len() || truth.is_empty() {
        return Err(Error::invalid(format!(
            "nrmse needs equal non-empty series, got {} and {}",
            truth.len(),
            estimate.len()
        )));
    }
    let (lo, hi) = truth
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let range = hi - lo;
    if !(range > 0.0) {
        return Err(Error::invalid("true series is flat; nrmse is undefined"));
    }
    let mse = truth
        .iter()
        .zip(estimate)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / truth.len() as f64;
    Ok(mse.sqrt() / range)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sinusoid_against_zero() {
        let truth: Vec<f64> = (0..1000)
            .map(|i| 0.3 * (std::f64::consts::TAU * i as f64 / 100.0).sin())
            .collect();
        let e = nrmse(&truth, &vec![0.0; 1000]).unwrap();
        assert!((e - 0.5f64.sqrt() / 2.0).abs() < 1e-3);
    }

    #[test]
    fn er_homogeneity() {
        let r = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, -1.0, 0.5]);
        let a = error_er(&[0.1, 0.2], &r).unwrap();
        let b = error_er(&[0.2, 0.4], &r).unwrap();
        assert!((b / a - 2f64.sqrt()).abs() < 1e-14);
        assert!(error_er(&[0.1, 0.2], &DMatrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn eu_zero_rows_skip() {
        let u = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 1.0]);
        let est = DMatrix::from_row_slice(2, 2, &[5.0, 5.0, 1.0, 1.0]);
        assert_eq!(error_eu(&u, &est).unwrap(), 0.0);
    }
}
