use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;

/// Exponents `lo, lo + step, ..., hi` rounded to 12 decimals so that grid
/// labels print cleanly.
pub fn log_range(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && lo.is_finite() && hi.is_finite() && hi >= lo) {
        return Err(Error::invalid(format!("bad range {lo}..{hi} step {step}")));
    }
    let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    Ok((0..count)
        .map(|i| ((lo + i as f64 * step) * 1e12).round() / 1e12)
        .collect())
}

/// Hyperparameter grid. The US search pairs `qx_exponents` with
/// `k_values`; the DKF search pairs them with `qr_exponents`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningGrid {
    pub qx_exponents: Vec<f64>,
    pub qr_exponents: Vec<f64>,
    pub k_values: Vec<usize>,
}

impl TuningGrid {
    /// `log10 Qx` in `[-12, -1]` step 0.1, `log10 Qr` in `[-8, 2]` step 0.1,
    /// `k` in `1..=2(N+1)`.
    pub fn standard(window: usize, inputs: usize) -> Self {
        Self {
            qx_exponents: log_range(-12.0, -1.0, 0.1).expect("static range"),
            qr_exponents: log_range(-8.0, 2.0, 0.1).expect("static range"),
            k_values: (1..=inputs * (window + 1)).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.qx_exponents.is_empty() {
            return Err(Error::invalid("grid has no Qx values"));
        }
        if self.qx_exponents.iter().chain(&self.qr_exponents).any(|v| !v.is_finite()) {
            return Err(Error::invalid("grid exponents must be finite"));
        }
        Ok(())
    }

    /// `(log10 Qx, k)` pairs, Qx-major, both ascending.
    pub fn us_points(&self) -> Vec<(f64, f64)> {
        let mut ks = self.k_values.clone();
        ks.sort_unstable();
        ks.dedup();
        pairs(&self.qx_exponents, &ks.iter().map(|&k| k as f64).collect::<Vec<_>>())
    }

    /// `(log10 Qx, log10 Qr)` pairs, Qx-major, both ascending.
    pub fn dkf_points(&self) -> Vec<(f64, f64)> {
        pairs(&self.qx_exponents, &self.qr_exponents)
    }
}

fn pairs(a: &[f64], b: &[f64]) -> Vec<(f64, f64)> {
    let sorted = |v: &[f64]| {
        let mut v = v.to_vec();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    };
    let (a, b) = (sorted(a), sorted(b));
    a.iter().flat_map(|&x| b.iter().map(move |&y| (x, y))).collect()
}

/// One evaluated grid point. `second` is `k` for the smoother and
/// `log10 Qr` for the dual Kalman filter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfacePoint {
    pub log10_qx: f64,
    pub second: f64,
    /// `+inf` when the run failed.
    pub sigma_e: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    pub best: SurfacePoint,
    pub surface: Vec<SurfacePoint>,
}

impl GridResult {
    /// Write `log10_qx,<second_name>,sigma_e`.
    pub fn write_csv(&self, path: impl AsRef<Path>, second_name: &str) -> Result<()> {
        let qx: Vec<f64> = self.surface.iter().map(|p| p.log10_qx).collect();
        let second: Vec<f64> = self.surface.iter().map(|p| p.second).collect();
        let se: Vec<f64> = self.surface.iter().map(|p| p.sigma_e).collect();
        io::write_columns(
            path.as_ref(),
            &["log10_qx", second_name, "sigma_e"],
            &[&qx, &second, &se],
        )
    }
}

/// Lowest-scoring point; ties go to the lowest Qx, then the lowest second
/// coordinate. Non-finite scores never win.
pub fn argmin(surface: &[SurfacePoint]) -> Option<SurfacePoint> {
    surface
        .iter()
        .filter(|p| p.sigma_e.is_finite())
        .min_by(|a, b| {
            a.sigma_e
                .total_cmp(&b.sigma_e)
                .then(a.log10_qx.total_cmp(&b.log10_qx))
                .then(a.second.total_cmp(&b.second))
        })
        .copied()
}

/// Evaluate `score` at every point on a pool of `workers` threads. Errors
/// and non-finite scores record `+inf`. The result does not depend on the
/// worker count.
pub fn grid_search<F>(points: &[(f64, f64)], workers: usize, score: F) -> Result<GridResult>
where
    F: Fn(f64, f64) -> Result<f64> + Sync,
{
    if points.is_empty() {
        return Err(Error::invalid("empty grid"));
    }
    let eval = |&(a, b): &(f64, f64)| SurfacePoint {
        log10_qx: a,
        second: b,
        sigma_e: score(a, b).ok().filter(|v| v.is_finite()).unwrap_or(f64::INFINITY),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Numeric(format!("cannot start worker pool: {e}")))?;
    let surface: Vec<SurfacePoint> = pool.install(|| points.par_iter().map(eval).collect());
    let best = argmin(&surface).ok_or(Error::NoFeasiblePoint)?;
    Ok(GridResult { best, surface })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_grid_sizes() {
        let g = TuningGrid::standard(100, 2);
        assert_eq!(g.qx_exponents.len(), 111);
        assert_eq!(g.qr_exponents.len(), 101);
        assert_eq!(g.k_values.len(), 202);
        assert_eq!(g.qx_exponents[1], -11.9);
        assert_eq!(*g.qx_exponents.last().unwrap(), -1.0);
    }

    #[test]
    fn single_point() {
        let r = grid_search(&[(-3.0, 2.0)], 1, |_, _| Ok(0.5)).unwrap();
        assert_eq!(r.best, SurfacePoint { log10_qx: -3.0, second: 2.0, sigma_e: 0.5 });
    }

    #[test]
    fn ties_prefer_low_qx_then_low_second() {
        let pts = vec![(-2.0, 1.0), (-2.0, 3.0), (-1.0, 1.0), (-3.0, 5.0), (-3.0, 4.0)];
        let r = grid_search(&pts, 3, |_, _| Ok(1.0)).unwrap();
        assert_eq!((r.best.log10_qx, r.best.second), (-3.0, 4.0));
    }

    #[test]
    fn all_failed() {
        let r = grid_search(&[(-1.0, 1.0), (-2.0, 1.0)], 2, |_, _| Err(Error::NoFeasiblePoint));
        assert!(matches!(r, Err(Error::NoFeasiblePoint)));
    }

    #[test]
    fn worker_count_does_not_matter() {
        let g = TuningGrid {
            qx_exponents: log_range(-5.0, -1.0, 0.5).unwrap(),
            qr_exponents: vec![],
            k_values: vec![1, 2, 3],
        };
        let f = |a: f64, b: f64| Ok((a + 3.0).powi(2) + (b - 2.0).powi(2));
        let one = grid_search(&g.us_points(), 1, f).unwrap();
        let many = grid_search(&g.us_points(), 4, f).unwrap();
        assert_eq!(one, many);
        assert_eq!((one.best.log10_qx, one.best.second), (-3.0, 2.0));
    }
}
