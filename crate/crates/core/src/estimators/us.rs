//! Windowed universal smoother and its exact-inverse counterpart.
//!
//! Each step stacks the next `N + 1` measurements, solves a weighted least
//! squares problem for the stacked inputs `R_k`, keeps the first block as
//! the current input estimate, then corrects the state with whatever part of
//! the window the input solution leaves unexplained.
//!
//! The weight is the covariance of the stacked error
//! `e = Gamma x~_{k-1} + Hbreve W + V + Xi r~_{k-1}`, where `x~` and `r~` are
//! the previous estimation errors. The state error is correlated with the
//! window noise because consecutive windows overlap; those correlations are
//! carried in `Pxw` and `Pxv` and shifted by one block per step.
//!
//! With `L L^T = R~` and `Fw = L^-1 F = U S V^T`, the truncated solution is
//! `M = V_k S_k^-1 U_k^T L^-1`, `R^ = M nu`. Only thin products with `M` are
//! ever formed.

use nalgebra::{Cholesky, DMatrix, DVector};

use super::{EstimateSeries, ExtendedSystem, NoiseConfig, INITIAL_COVARIANCE};
use crate::error::{Error, Result};
use crate::model::DiscreteSystem;
use crate::numerics::{pivoted_cholesky, symmetrize, truncated_svd, TruncationPolicy};
use crate::simulator::MeasurementSeries;

/// Relative pivot threshold that decides which rows of `Phi` the state gain
/// uses, measured against the largest diagonal entry of `R~`.
const GAIN_RANK_TOL: f64 = 1e-10;
/// Largest condition number of the retained part of `F^T R~^-1 F`. Beyond
/// it the inversion amplifies rounding more than the data constrain it.
const MAX_CONDITION: f64 = 1e12;

/// Recursive quantities carried between steps.
#[derive(Debug, Clone, PartialEq)]
pub struct SmootherState {
    /// Index of the next step.
    pub step: usize,
    pub x_hat: DVector<f64>,
    pub p: DMatrix<f64>,
    pub r_prev: DVector<f64>,
    pub pr_prev: DMatrix<f64>,
    /// Covariance of the state error with the window process noise.
    pub pxw: DMatrix<f64>,
    /// Covariance of the state error with the window measurement noise.
    pub pxv: DMatrix<f64>,
    /// Closed-loop state transition of the last step.
    pub a_tilde: DMatrix<f64>,
    /// Process-noise gain of the last step.
    pub w: DMatrix<f64>,
    /// Measurement-noise gain of the last step.
    pub v: DMatrix<f64>,
}

impl SmootherState {
    /// Zero state with covariances `1e-12 I`.
    pub fn initial(sys: &DiscreteSystem, window: usize) -> Self {
        let n = sys.states();
        let m = sys.inputs();
        let q = sys.outputs();
        let len = window + 1;
        Self {
            step: 0,
            x_hat: DVector::zeros(n),
            p: DMatrix::identity(n, n) * INITIAL_COVARIANCE,
            r_prev: DVector::zeros(m),
            pr_prev: DMatrix::identity(m, m) * INITIAL_COVARIANCE,
            pxw: DMatrix::zeros(n, len * n),
            pxv: DMatrix::zeros(n, len * q),
            a_tilde: sys.ad.clone(),
            w: DMatrix::zeros(n, len * n),
            v: DMatrix::zeros(n, len * q),
        }
    }
}

/// Per-step by-products.
#[derive(Debug, Clone, PartialEq)]
pub struct StepDiagnostics {
    pub trace_pr: f64,
    /// Singular values kept in the input inversion.
    pub retained: usize,
    /// Rows of `Phi` used by the state gain.
    pub gain_rank: usize,
    /// Singular values of the weighted input matrix, largest first.
    pub spectrum: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Inversion {
    Truncated(TruncationPolicy),
    Exact,
}

/// Precomputed per-run quantities of the smoother.
#[derive(Debug, Clone)]
pub struct Smoother {
    sys: DiscreteSystem,
    ext: ExtendedSystem,
    qx: f64,
    /// Measurement variances over the window.
    rbar: DVector<f64>,
    /// `Hbreve Qbar Hbreve^T + Rbar`.
    noise_weight: DMatrix<f64>,
    weight_previous_input: bool,
    inversion: Inversion,
}

impl Smoother {
    /// Universal smoother with truncated inversion.
    pub fn universal(
        sys: &DiscreteSystem,
        window: usize,
        noise: &NoiseConfig,
        policy: TruncationPolicy,
    ) -> Result<Self> {
        policy.validate((window + 1) * sys.inputs().min(sys.outputs()))?;
        Self::new(sys, window, noise, true, Inversion::Truncated(policy))
    }

    /// Minimum-variance unbiased smoother: exact inversion, no weighting of
    /// the previous input error. Needs at least as many outputs as inputs
    /// and full-rank feedthrough.
    pub fn minimum_variance(sys: &DiscreteSystem, window: usize, noise: &NoiseConfig) -> Result<Self> {
        let (q, m) = (sys.outputs(), sys.inputs());
        if q < m {
            return Err(Error::StructuralRank(format!(
                "{q} outputs cannot determine {m} inputs"
            )));
        }
        let d_rank = sys.d.clone().svd(false, false).rank(1e-12 * sys.d.amax().max(f64::MIN_POSITIVE));
        if d_rank < m {
            return Err(Error::StructuralRank(format!(
                "feedthrough has rank {d_rank}, {m} inputs need full rank"
            )));
        }
        Self::new(sys, window, noise, false, Inversion::Exact)
    }

    fn new(
        sys: &DiscreteSystem,
        window: usize,
        noise: &NoiseConfig,
        weight_previous_input: bool,
        inversion: Inversion,
    ) -> Result<Self> {
        let q = sys.outputs();
        noise.validate(q)?;
        let ext = ExtendedSystem::build(sys, window);
        let r = noise.r_vector(q);
        let rbar = DVector::from_fn((window + 1) * q, |i, _| r[i % q]);
        let mut noise_weight = &ext.hbreve * ext.hbreve.transpose() * noise.qx;
        for i in 0..rbar.len() {
            noise_weight[(i, i)] += rbar[i];
        }
        Ok(Self {
            sys: sys.clone(),
            ext,
            qx: noise.qx,
            rbar,
            noise_weight,
            weight_previous_input,
            inversion,
        })
    }

    pub fn window(&self) -> usize {
        self.ext.window
    }

    pub fn extended(&self) -> &ExtendedSystem {
        &self.ext
    }

    pub fn initial_state(&self) -> SmootherState {
        SmootherState::initial(&self.sys, self.ext.window)
    }

    /// One smoothing step. `y_window` stacks `y_k, ..., y_{k+N}`.
    pub fn step(
        &self,
        state: &SmootherState,
        y_window: &DVector<f64>,
    ) -> Result<(SmootherState, DVector<f64>, StepDiagnostics)> {
        let sys = &self.sys;
        let ext = &self.ext;
        let (n, m) = (sys.states(), sys.inputs());
        let rows = ext.rows();
        let k = state.step;
        if y_window.len() != rows {
            return Err(Error::invalid(format!(
                "window has {} values, expected {rows}",
                y_window.len()
            )));
        }
        let ill = |detail: String| Error::IllConditioned { step: k, detail };
        let gamma = &ext.gamma;
        let hbreve = &ext.hbreve;
        let xi = &ext.xi;
        let (p, pxw, pxv, pr) = (&state.p, &state.pxw, &state.pxv, &state.pr_prev);

        // Weight: covariance of the stacked error.
        let gp = gamma * p;
        let cross = gamma * (pxw * hbreve.transpose() + pxv);
        let mut rt = &gp * gamma.transpose() + &cross + cross.transpose() + &self.noise_weight;
        if self.weight_previous_input {
            rt += xi * pr * xi.transpose();
        }
        let rt = symmetrize(&rt);
        if rt.iter().any(|v| !v.is_finite()) {
            return Err(ill("weight matrix is not finite".into()));
        }
        let max_diag = rt.diagonal().max();
        let chol = Cholesky::new(rt.clone())
            .ok_or_else(|| ill("weight matrix is not positive definite".into()))?;
        let l = chol.l();

        // Input solution in whitened coordinates.
        let fw = l
            .solve_lower_triangular(&ext.f)
            .ok_or_else(|| ill("singular weight factor".into()))?;
        let policy = match self.inversion {
            Inversion::Truncated(policy) => policy,
            Inversion::Exact => TruncationPolicy::count(fw.ncols()),
        };
        let svd = truncated_svd(&fw, policy).map_err(|e| ill(e.to_string()))?;
        let smax = svd.spectrum[0];
        let smin = match self.inversion {
            Inversion::Exact => svd.spectrum.last(),
            Inversion::Truncated(_) => svd.s.last(),
        }
        .copied()
        .unwrap_or(0.0);
        let cond = (smax / smin).powi(2);
        if !(cond.is_finite() && cond <= MAX_CONDITION) {
            return Err(ill(format!("normal matrix condition number {cond:.3e}")));
        }
        let psi = &svd.u;
        let mut z = svd.v.clone();
        for (c, s) in svd.s.iter().enumerate() {
            z.column_mut(c).unscale_mut(*s);
        }
        let pr_full_top = z.rows(0, m) * z.rows(0, m).transpose();

        // X -> M X and Y -> Y M for thin X, Y.
        let m_right = |x: &DMatrix<f64>| -> DMatrix<f64> {
            let w = l.solve_lower_triangular(x).expect("factor checked above");
            &z * (psi.transpose() * w)
        };
        let m_left = |y: &DMatrix<f64>| -> DMatrix<f64> {
            let t = (y * &z) * psi.transpose();
            l.transpose()
                .solve_upper_triangular(&t.transpose())
                .expect("factor checked above")
                .transpose()
        };

        let nu = y_window - gamma * &state.x_hat + xi * &state.r_prev;
        let nu_m = DMatrix::from_column_slice(rows, 1, nu.as_slice());
        let r_stack = m_right(&nu_m).column(0).into_owned();
        let r_hat = r_stack.rows(0, m).into_owned();

        // Gains that map the window onto the state prediction.
        let mut bd_s = DMatrix::zeros(n, ext.input_cols());
        bd_s.view_mut((0, 0), (n, m)).copy_from(&sys.bd);
        let v = m_left(&bd_s);
        let a_tilde = &sys.ad - &v * gamma;
        let mut wm = -&v * hbreve;
        for i in 0..n {
            wm[(i, i)] += 1.0;
        }
        let vx = &v * xi - &sys.gd;
        let x_pred = &sys.ad * &state.x_hat + &sys.bd * &r_hat - &sys.gd * &state.r_prev;

        let v_r = scale_columns(&v, &self.rbar);
        let apw = &a_tilde * pxw * wm.transpose();
        let apv = &a_tilde * pxv * v.transpose();
        let px = &a_tilde * p * a_tilde.transpose() + &apw + apw.transpose()
            - &apv
            - apv.transpose()
            + &wm * wm.transpose() * self.qx
            + &v_r * v.transpose()
            + &vx * pr * vx.transpose();

        // Covariance of the window error with the predicted state error.
        let slp = gamma * (p * a_tilde.transpose() + pxw * wm.transpose() - pxv * v.transpose())
            + hbreve * (pxw.transpose() * a_tilde.transpose() + wm.transpose() * self.qx)
            + (pxv.transpose() * a_tilde.transpose() - v_r.transpose())
            - xi * pr * vx.transpose();
        let yc = &slp - &ext.f * m_right(&slp);

        // Covariance of the residual (I - F M) e = L (I - Psi Psi^T) L^T.
        let l_psi = &l * psi;
        let l_perp = &l - &l_psi * psi.transpose();
        let phi = &l_perp * l_perp.transpose();
        let (sel, ls) = pivoted_cholesky(&phi, GAIN_RANK_TOL, max_diag);
        let mut gain = DMatrix::zeros(n, rows);
        if !sel.is_empty() {
            let yc_sel = DMatrix::from_fn(sel.len(), n, |i, j| yc[(sel[i], j)]);
            let t = ls
                .solve_lower_triangular(&yc_sel)
                .and_then(|t| ls.transpose().solve_upper_triangular(&t))
                .ok_or_else(|| ill("singular gain factor".into()))?;
            for (i, &row) in sel.iter().enumerate() {
                gain.column_mut(row).copy_from(&t.row(i).transpose());
            }
        }

        let rho = &nu - &ext.f * &r_stack;
        let x_hat = x_pred + &gain * rho;
        let kyc = &gain * &yc;
        let p_new = symmetrize(&(px - &kyc - kyc.transpose() + &gain * &phi * gain.transpose()));

        // Posterior error maps for the cross-covariance recursion.
        let kit = &gain - m_left(&(&gain * &ext.f));
        let a_post = &a_tilde - &kit * gamma;
        let w_post = &wm - &kit * hbreve;
        let v_post = -&v - &kit;
        let pxw_new = shift_blocks(&(&a_post * pxw + w_post * self.qx), n);
        let pxv_new = shift_blocks(&(&a_post * pxv + scale_columns(&v_post, &self.rbar)), sys.outputs());

        let pr_new = symmetrize(&pr_full_top);
        if x_hat.iter().chain(p_new.iter()).any(|v| !v.is_finite()) {
            return Err(ill("state estimate diverged".into()));
        }
        let diag = StepDiagnostics {
            trace_pr: pr_new.trace(),
            retained: svd.s.len(),
            gain_rank: sel.len(),
            spectrum: svd.spectrum,
        };
        let next = SmootherState {
            step: k + 1,
            x_hat,
            p: p_new,
            r_prev: r_hat.clone(),
            pr_prev: pr_new,
            pxw: pxw_new,
            pxv: pxv_new,
            a_tilde,
            w: wm,
            v,
        };
        Ok((next, r_hat, diag))
    }

    /// Run over a record, calling `observe` after every step. The last `N`
    /// samples only appear inside windows and get no estimate.
    pub fn run_with(
        &self,
        meas: &MeasurementSeries,
        mut observe: impl FnMut(&SmootherState, &StepDiagnostics),
    ) -> Result<EstimateSeries> {
        let q = self.sys.outputs();
        if meas.channels() != q {
            return Err(Error::invalid(format!(
                "measurements have {} channels, system has {q}",
                meas.channels()
            )));
        }
        let len = self.ext.window + 1;
        let total = meas.len();
        if total <= self.ext.window {
            return Err(Error::invalid(format!(
                "record of {total} samples is too short for window {}",
                self.ext.window
            )));
        }
        let steps = total - self.ext.window;
        let mut out = EstimateSeries::with_capacity(steps, self.sys.states(), self.sys.inputs());
        let mut state = self.initial_state();
        let mut y_window = DVector::zeros(len * q);
        for k in 0..steps {
            for i in 0..len {
                for c in 0..q {
                    y_window[i * q + c] = meas.y[(k + i, c)];
                }
            }
            let (next, r_hat, diag) = self.step(&state, &y_window)?;
            observe(&next, &diag);
            out.push(meas.times[k], &r_hat, &next.x_hat, diag.trace_pr, next.p.trace());
            state = next;
        }
        Ok(out)
    }

    pub fn run(&self, meas: &MeasurementSeries) -> Result<EstimateSeries> {
        self.run_with(meas, |_, _| {})
    }
}

/// Single universal-smoother step with freshly built window matrices.
pub fn us_step(
    state: &SmootherState,
    sys: &DiscreteSystem,
    window: usize,
    y_window: &DVector<f64>,
    noise: &NoiseConfig,
    policy: TruncationPolicy,
) -> Result<(SmootherState, DVector<f64>, StepDiagnostics)> {
    Smoother::universal(sys, window, noise, policy)?.step(state, y_window)
}

/// Universal smoother over a whole record.
pub fn run_us(
    sys: &DiscreteSystem,
    meas: &MeasurementSeries,
    noise: &NoiseConfig,
    policy: TruncationPolicy,
    window: usize,
) -> Result<EstimateSeries> {
    Smoother::universal(sys, window, noise, policy)?.run(meas)
}

/// Minimum-variance unbiased smoother over a whole record.
pub fn run_mvus(
    sys: &DiscreteSystem,
    meas: &MeasurementSeries,
    noise: &NoiseConfig,
    window: usize,
) -> Result<EstimateSeries> {
    Smoother::minimum_variance(sys, window, noise)?.run(meas)
}

fn scale_columns(x: &DMatrix<f64>, s: &DVector<f64>) -> DMatrix<f64> {
    let mut out = x.clone();
    for (c, v) in s.iter().enumerate() {
        out.column_mut(c).scale_mut(*v);
    }
    out
}

/// Move column blocks of width `b` one block left, zero-filling the last.
fn shift_blocks(x: &DMatrix<f64>, b: usize) -> DMatrix<f64> {
    let cols = x.ncols();
    let mut out = DMatrix::zeros(x.nrows(), cols);
    if cols > b {
        out.columns_mut(0, cols - b).copy_from(&x.columns(b, cols - b));
    }
    out
}
