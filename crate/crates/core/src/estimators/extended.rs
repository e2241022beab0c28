//! Stacked observation over a window of `N + 1` samples.
//!
//! With `Y_k = [y_k; ...; y_{k+N}]`, `R_k = [r_k; ...; r_{k+N}]`,
//! `W = [w_{k-1}; ...; w_{k+N-1}]` and `V = [v_k; ...; v_{k+N}]`:
//!
//! `Y_k = Cbar x_k + Dbar R_k - Hbar R_{k-1} + Jbar W + V`
//!
//! Eliminating `x_k` in favour of `x_{k-1}` and merging the two input
//! stacks gives the form the smoother works with:
//!
//! `Y_k = Gamma x_{k-1} + F R_k - Xi r_{k-1} + Hbreve W + V`

use nalgebra::DMatrix;

use crate::model::DiscreteSystem;

/// Window matrices of a time-invariant system.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedSystem {
    pub window: usize,
    /// `(N+1)q x n`, block `i` is `C A^i`.
    pub cbar: DMatrix<f64>,
    /// `(N+1)q x (N+1)m` current-input matrix.
    pub dbar: DMatrix<f64>,
    /// `(N+1)q x (N+1)m` previous-input matrix.
    pub hbar: DMatrix<f64>,
    /// `(N+1)q x (N+1)n` process-noise matrix, first block row and column zero.
    pub jbar: DMatrix<f64>,
    /// `(N+1)q x m`, block `i` is `C A^i G` plus `H` in block 0.
    pub xi: DMatrix<f64>,
    /// `Cbar A`.
    pub gamma: DMatrix<f64>,
    /// `Jbar + [Cbar, 0]`: block `(i, j)` is `C A^(i-j)` for `j <= i`.
    pub hbreve: DMatrix<f64>,
    /// `Dbar - Hbar` with the previous-input blocks shifted onto the
    /// current-input columns they refer to: the map from `R_k` to `Y_k`.
    pub f: DMatrix<f64>,
}

impl ExtendedSystem {
    pub fn build(sys: &DiscreteSystem, window: usize) -> Self {
        let n = sys.states();
        let m = sys.inputs();
        let q = sys.outputs();
        let len = window + 1;

        // C A^i for i = 0..=N+1.
        let mut ca = Vec::with_capacity(len + 1);
        ca.push(sys.c.clone());
        for i in 1..=len {
            let next = &ca[i - 1] * &sys.ad;
            ca.push(next);
        }
        let cab: Vec<DMatrix<f64>> = ca.iter().map(|x| x * &sys.bd).collect();
        let cag: Vec<DMatrix<f64>> = ca.iter().map(|x| x * &sys.gd).collect();

        let mut cbar = DMatrix::zeros(len * q, n);
        let mut gamma = DMatrix::zeros(len * q, n);
        let mut xi = DMatrix::zeros(len * q, m);
        let mut dbar = DMatrix::zeros(len * q, len * m);
        let mut hbar = DMatrix::zeros(len * q, len * m);
        let mut jbar = DMatrix::zeros(len * q, len * n);
        let mut hbreve = DMatrix::zeros(len * q, len * n);
        let mut f = DMatrix::zeros(len * q, len * m);

        for i in 0..len {
            let rows = i * q;
            cbar.view_mut((rows, 0), (q, n)).copy_from(&ca[i]);
            gamma.view_mut((rows, 0), (q, n)).copy_from(&ca[i + 1]);
            let mut x = cag[i].clone();
            if i == 0 {
                x += &sys.h;
            }
            xi.view_mut((rows, 0), (q, m)).copy_from(&x);

            for j in 0..=i {
                let d = i - j;
                hbreve.view_mut((rows, j * n), (q, n)).copy_from(&ca[d]);
                if j >= 1 {
                    jbar.view_mut((rows, j * n), (q, n)).copy_from(&ca[d]);
                }

                // Dbar and Hbar as stacked against x_k: column 0 only holds
                // the direct feedthrough of the first sample.
                if i == 0 {
                    dbar.view_mut((0, 0), (q, m)).copy_from(&sys.d);
                    hbar.view_mut((0, 0), (q, m)).copy_from(&sys.h);
                } else if j >= 1 {
                    let mut db = cab[d].clone();
                    let mut hb = cag[d].clone();
                    if d == 0 {
                        db += &sys.d;
                        hb += &sys.h;
                    }
                    dbar.view_mut((rows, j * m), (q, m)).copy_from(&db);
                    hbar.view_mut((rows, j * m), (q, m)).copy_from(&hb);
                }

                // r_{k+j} enters step k+j through B and D, and step k+j+1
                // through -G and -H.
                let mut blk = cab[d].clone();
                if d >= 1 {
                    blk -= &cag[d - 1];
                }
                if d == 0 {
                    blk += &sys.d;
                }
                if d == 1 {
                    blk -= &sys.h;
                }
                f.view_mut((rows, j * m), (q, m)).copy_from(&blk);
            }
        }

        Self {
            window,
            cbar,
            dbar,
            hbar,
            jbar,
            xi,
            gamma,
            hbreve,
            f,
        }
    }

    /// Stacked output length `(N+1)q`.
    pub fn rows(&self) -> usize {
        self.cbar.nrows()
    }

    /// Stacked input length `(N+1)m`.
    pub fn input_cols(&self) -> usize {
        self.f.ncols()
    }
}
