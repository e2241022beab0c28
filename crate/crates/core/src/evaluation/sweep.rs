use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::io;

/// Accuracy and cost of one window length.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub window: usize,
    /// `NaN` when the run failed.
    pub nrmse: f64,
    pub wall_time_s: f64,
    pub error: Option<String>,
}

/// Run `run(N)` for each window length in order, timing each call. A failed
/// run is recorded in its row and the sweep continues.
pub fn window_sweep(
    windows: &[usize],
    mut run: impl FnMut(usize) -> Result<f64>,
) -> Result<Vec<SweepRow>> {
    if windows.is_empty() {
        return Err(Error::invalid("window sweep needs at least one N"));
    }
    Ok(windows
        .iter()
        .map(|&window| {
            let start = Instant::now();
            let result = run(window);
            let wall_time_s = start.elapsed().as_secs_f64();
            match result {
                Ok(nrmse) => SweepRow {
                    window,
                    nrmse,
                    wall_time_s,
                    error: None,
                },
                Err(e) => SweepRow {
                    window,
                    nrmse: f64::NAN,
                    wall_time_s,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect())
}

/// Write `N,nrmse,wall_time_s`.
pub fn write_sweep_csv(rows: &[SweepRow], path: impl AsRef<Path>) -> Result<()> {
    let n: Vec<f64> = rows.iter().map(|r| r.window as f64).collect();
    let e: Vec<f64> = rows.iter().map(|r| r.nrmse).collect();
    let t: Vec<f64> = rows.iter().map(|r| r.wall_time_s).collect();
    io::write_columns(path.as_ref(), &["N", "nrmse", "wall_time_s"], &[&n, &e, &t])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn failures_do_not_abort() {
        let rows = window_sweep(&[1, 2, 3], |n| {
            if n == 2 {
                Err(Error::invalid("boom"))
            } else {
                Ok(n as f64)
            }
        })
        .unwrap();
        assert_eq!(rows.len(), 3);
        assert!(rows[1].nrmse.is_nan());
        assert_eq!(rows[2].nrmse, 3.0);
        assert!(window_sweep(&[], |_| Ok(0.0)).is_err());
    }
}
