//! Joint input–state estimators: the windowed universal smoother and two
//! baselines (dual Kalman filter, minimum-variance unbiased smoother).

mod dkf;
mod extended;
mod us;

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use dkf::run_dkf;
pub use extended::ExtendedSystem;
pub use us::{run_mvus, run_us, us_step, Smoother, SmootherState, StepDiagnostics};

use crate::error::{Error, Result};
use crate::io;
use crate::model::DiscreteSystem;
use crate::numerics::TruncationPolicy;
use crate::simulator::MeasurementSeries;

/// Initial state and input covariance scale.
pub const INITIAL_COVARIANCE: f64 = 1e-12;

/// Noise levels assumed by the estimators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    /// Process noise: `Q = qx I`.
    pub qx: f64,
    /// Measurement variance per channel. A single entry applies to every
    /// channel.
    pub r_diag: Vec<f64>,
    /// Input random-walk variance (dual Kalman filter only).
    pub qr: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            qx: 1e-8,
            r_diag: vec![1e-6],
            qr: 1e-4,
        }
    }
}

impl NoiseConfig {
    pub fn validate(&self, q: usize) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if !ok(self.qx) || !ok(self.qr) || !self.r_diag.iter().all(|&v| ok(v)) {
            return Err(Error::invalid("noise levels must be finite and non-negative"));
        }
        if self.r_diag.len() != 1 && self.r_diag.len() != q {
            return Err(Error::invalid(format!(
                "r_diag has {} entries for {q} channels",
                self.r_diag.len()
            )));
        }
        Ok(())
    }

    /// Measurement variances expanded to `q` channels.
    pub fn r_vector(&self, q: usize) -> Vec<f64> {
        if self.r_diag.len() == 1 {
            vec![self.r_diag[0]; q]
        } else {
            self.r_diag.clone()
        }
    }
}

/// Per-step estimates. Row `i` refers to `times[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateSeries {
    pub times: Vec<f64>,
    /// Input estimates, one row per step.
    pub r_hat: DMatrix<f64>,
    /// State estimates, one row per step.
    pub x_hat: DMatrix<f64>,
    /// Trace of the input error covariance.
    pub trace_pr: Vec<f64>,
    /// Trace of the state error covariance.
    pub trace_p: Vec<f64>,
}

impl EstimateSeries {
    fn with_capacity(steps: usize, n: usize, m: usize) -> Self {
        Self {
            times: Vec::with_capacity(steps),
            r_hat: DMatrix::zeros(steps, m),
            x_hat: DMatrix::zeros(steps, n),
            trace_pr: Vec::with_capacity(steps),
            trace_p: Vec::with_capacity(steps),
        }
    }

    fn push(&mut self, t: f64, r: &DVector<f64>, x: &DVector<f64>, trace_pr: f64, trace_p: f64) {
        let i = self.times.len();
        self.times.push(t);
        self.r_hat.row_mut(i).copy_from(&r.transpose());
        self.x_hat.row_mut(i).copy_from(&x.transpose());
        self.trace_pr.push(trace_pr);
        self.trace_p.push(trace_p);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Input estimate for one channel.
    pub fn input(&self, channel: usize) -> Vec<f64> {
        self.r_hat.column(channel).iter().copied().collect()
    }

    /// Outputs implied by the estimates, `C x_k + D r_k - H r_{k-1}`, one row
    /// per step. The input before the first step is taken as zero.
    pub fn predicted_outputs(&self, sys: &DiscreteSystem) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.len(), sys.outputs());
        let mut prev = DVector::zeros(sys.inputs());
        for k in 0..self.len() {
            let x = self.x_hat.row(k).transpose();
            let r = self.r_hat.row(k).transpose();
            let y = &sys.c * x + &sys.d * &r - &sys.h * &prev;
            out.row_mut(k).copy_from(&y.transpose());
            prev = r;
        }
        out
    }

    /// `t_s,r_front_est,r_rear_est,trace_Pr,x1..x4`.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let m = self.r_hat.ncols();
        let n = self.x_hat.ncols();
        let mut names: Vec<String> = vec!["t_s".into()];
        names.extend(match m {
            2 => vec!["r_front_est".to_string(), "r_rear_est".to_string()],
            _ => (1..=m).map(|i| format!("r{i}_est")).collect(),
        });
        names.push("trace_Pr".into());
        names.extend((1..=n).map(|i| format!("x{i}")));
        let mut cols: Vec<Vec<f64>> = vec![self.times.clone()];
        cols.extend((0..m).map(|c| self.input(c)));
        cols.push(self.trace_pr.clone());
        cols.extend((0..n).map(|c| self.x_hat.column(c).iter().copied().collect()));
        let headers: Vec<&str> = names.iter().map(String::as_str).collect();
        let refs: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
        io::write_columns(path.as_ref(), &headers, &refs)
    }
}

/// Which estimator to run and its structural settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EstimatorSpec {
    Us {
        window: usize,
        truncation: TruncationPolicy,
    },
    Mvus {
        window: usize,
    },
    Dkf,
}

impl EstimatorSpec {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Us { .. } => "us",
            Self::Mvus { .. } => "mvus",
            Self::Dkf => "dkf",
        }
    }

    pub fn run(
        &self,
        sys: &DiscreteSystem,
        meas: &MeasurementSeries,
        noise: &NoiseConfig,
    ) -> Result<EstimateSeries> {
        match *self {
            Self::Us { window, truncation } => run_us(sys, meas, noise, truncation, window),
            Self::Mvus { window } => run_mvus(sys, meas, noise, window),
            Self::Dkf => run_dkf(sys, meas, noise),
        }
    }
}
