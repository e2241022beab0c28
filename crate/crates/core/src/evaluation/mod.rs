//! Tuning and accuracy metrics, grid search and the window-length sweep.

mod grid;
mod metrics;
mod scenario;
mod sweep;

use serde::Serialize;

pub use grid::{argmin, grid_search, log_range, GridResult, SurfacePoint, TuningGrid};
pub use metrics::{error_er, error_eu, nrmse, sigma_e};
pub use scenario::{Scenario, ScenarioData, CONTAMINATED_BRIDGE_AMP};
pub use sweep::{window_sweep, write_sweep_csv, SweepRow};

use crate::error::{Error, Result};
use crate::estimators::EstimateSeries;
use crate::model::DiscreteSystem;
use crate::numerics::{periodogram_spatial, SpatialSpectrum};
use crate::profile::InputSeries;
use crate::simulator::{highpass, MeasurementSeries};

/// Spatial cut-off below which profiles are not compared [cycles/m].
pub const HIGHPASS_CYCLES_PER_M: f64 = 0.1;

/// NRMSE after removing content below [`HIGHPASS_CYCLES_PER_M`] from both
/// series. `dt` and `speed` convert the spatial cut-off to a temporal one.
pub fn nrmse_highpassed(truth: &[f64], estimate: &[f64], speed: f64, dt: f64) -> Result<f64> {
    let fs = 1.0 / dt;
    let fc = HIGHPASS_CYCLES_PER_M * speed;
    nrmse(&highpass(truth, fs, fc)?, &highpass(estimate, fs, fc)?)
}

/// Spectra of one wheel's estimated and true profiles.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WheelSpectrum {
    pub wheel: &'static str,
    pub estimate: SpatialSpectrum,
    pub truth: Option<SpatialSpectrum>,
}

/// Metrics of one estimator run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationReport {
    pub sigma_e: f64,
    pub e_u: f64,
    pub e_r: f64,
    pub nrmse_front: Option<f64>,
    pub nrmse_rear: Option<f64>,
    pub nrmse_mean: Option<f64>,
    #[serde(skip)]
    pub cov_trace: Vec<f64>,
    #[serde(skip)]
    pub spectra: Vec<WheelSpectrum>,
    pub wall_time_s: f64,
}

/// Tuning error of an estimate against the measurements it came from.
pub fn tuning_error(sys: &DiscreteSystem, meas: &MeasurementSeries, est: &EstimateSeries) -> Result<(f64, f64, f64)> {
    let predicted = est.predicted_outputs(sys);
    let measured = meas.y.rows(0, est.len()).into_owned();
    let e_u = error_eu(&measured, &predicted)?;
    let e_r = error_er(&est.trace_pr, &est.r_hat)?;
    Ok((sigma_e(e_u, e_r), e_u, e_r))
}

/// Per-wheel high-passed NRMSE of an estimate against true inputs.
pub fn profile_nrmse(truth: &InputSeries, est: &EstimateSeries, dt: f64) -> Result<[f64; 2]> {
    if est.len() > truth.len() || est.r_hat.ncols() != 2 {
        return Err(Error::invalid("estimate does not match the true input series"));
    }
    let n = est.len();
    let front = nrmse_highpassed(&truth.r_front[..n], &est.input(0), truth.speed, dt)?;
    let rear = nrmse_highpassed(&truth.r_rear[..n], &est.input(1), truth.speed, dt)?;
    Ok([front, rear])
}

/// Full report: tuning error, accuracy when the truth is known, spectra.
pub fn evaluate(
    sys: &DiscreteSystem,
    meas: &MeasurementSeries,
    est: &EstimateSeries,
    truth: Option<&InputSeries>,
    speed: f64,
    wall_time_s: f64,
) -> Result<EvaluationReport> {
    let (se, e_u, e_r) = tuning_error(sys, meas, est)?;
    let nr = truth.map(|t| profile_nrmse(t, est, meas.dt)).transpose()?;
    let spacing = speed * meas.dt;
    let mut spectra = Vec::new();
    if est.len() >= 16 && est.r_hat.ncols() == 2 {
        for (c, wheel) in [(0, "front"), (1, "rear")] {
            let truth_spec = truth
                .map(|t| {
                    let col = if c == 0 { &t.r_front } else { &t.r_rear };
                    periodogram_spatial(&col[..est.len()], spacing)
                })
                .transpose()?;
            spectra.push(WheelSpectrum {
                wheel,
                estimate: periodogram_spatial(&est.input(c), spacing)?,
                truth: truth_spec,
            });
        }
    }
    Ok(EvaluationReport {
        sigma_e: se,
        e_u,
        e_r,
        nrmse_front: nr.map(|v| v[0]),
        nrmse_rear: nr.map(|v| v[1]),
        nrmse_mean: nr.map(|v| 0.5 * (v[0] + v[1])),
        cov_trace: est.trace_pr.clone(),
        spectra,
        wall_time_s,
    })
}
