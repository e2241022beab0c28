//! Dual Kalman filter: a random-walk input filter followed by a state
//! filter, both on the same discrete model as the smoother.

use nalgebra::{DMatrix, DVector};

use super::{EstimateSeries, NoiseConfig, INITIAL_COVARIANCE};
use crate::error::{Error, Result};
use crate::model::DiscreteSystem;
use crate::numerics::symmetrize;
use crate::simulator::MeasurementSeries;

/// Covariance traces above this are treated as divergence.
const DIVERGENCE_TRACE: f64 = 1e12;

pub fn run_dkf(
    sys: &DiscreteSystem,
    meas: &MeasurementSeries,
    noise: &NoiseConfig,
) -> Result<EstimateSeries> {
    let (n, m, q) = (sys.states(), sys.inputs(), sys.outputs());
    noise.validate(q)?;
    if meas.channels() != q {
        return Err(Error::invalid(format!(
            "measurements have {} channels, system has {q}",
            meas.channels()
        )));
    }
    let r = DMatrix::from_diagonal(&DVector::from_vec(noise.r_vector(q)));
    let qx = DMatrix::identity(n, n) * noise.qx;
    let qr = DMatrix::identity(m, m) * noise.qr;
    // Output sensitivity to the current input through the state and the
    // feedthrough.
    let j = &sys.c * &sys.bd + &sys.d;

    let mut x = DVector::zeros(n);
    let mut p = DMatrix::identity(n, n) * INITIAL_COVARIANCE;
    let mut r_hat = DVector::zeros(m);
    let mut pr = DMatrix::identity(m, m) * INITIAL_COVARIANCE;
    let mut out = EstimateSeries::with_capacity(meas.len(), n, m);

    for k in 0..meas.len() {
        let fail = |detail: &str| Error::Numeric(format!("dual Kalman filter {detail} at step {k}"));
        let y = meas.y.row(k).transpose();
        let r_prev = r_hat.clone();

        // Input stage.
        let pr_pred = &pr + &qr;
        let x_free = &sys.ad * &x - &sys.gd * &r_prev;
        let innov = &y - &sys.c * &x_free + &sys.h * &r_prev - &j * &r_prev;
        let p_free = &sys.ad * &p * sys.ad.transpose() + &qx;
        let s = &j * &pr_pred * j.transpose() + &sys.c * &p_free * sys.c.transpose() + &r;
        let s_inv = s
            .cholesky()
            .ok_or_else(|| fail("input innovation covariance not positive definite"))?
            .inverse();
        let gain_r = &pr_pred * j.transpose() * s_inv;
        r_hat = &r_prev + &gain_r * innov;
        let ir = DMatrix::identity(m, m) - &gain_r * &j;
        pr = symmetrize(&(&ir * &pr_pred * ir.transpose() + &gain_r * &r * gain_r.transpose()));

        // State stage.
        let x_pred = &sys.ad * &x + &sys.bd * &r_hat - &sys.gd * &r_prev;
        let p_pred = &sys.ad * &p * sys.ad.transpose() + &qx;
        let innov = &y - &sys.c * &x_pred - &sys.d * &r_hat + &sys.h * &r_prev;
        let s = &sys.c * &p_pred * sys.c.transpose() + &r;
        let s_inv = s
            .cholesky()
            .ok_or_else(|| fail("state innovation covariance not positive definite"))?
            .inverse();
        let gain_x = &p_pred * sys.c.transpose() * s_inv;
        x = x_pred + &gain_x * innov;
        let ix = DMatrix::identity(n, n) - &gain_x * &sys.c;
        p = symmetrize(&(&ix * &p_pred * ix.transpose() + &gain_x * &r * gain_x.transpose()));

        let (tp, tr) = (p.trace(), pr.trace());
        if !(tp.is_finite() && tr.is_finite() && tp < DIVERGENCE_TRACE && tr < DIVERGENCE_TRACE)
            || x.iter().chain(r_hat.iter()).any(|v| !v.is_finite())
        {
            return Err(fail("covariance diverged"));
        }
        out.push(meas.times[k], &r_hat, &x, tr, tp);
    }
    Ok(out)
}
