//! Independent oracles shared by the integration tests. Nothing here calls
//! the library's own model builders.
#![allow(dead_code)]

use nalgebra::{Complex, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use roadid_core::{DiscreteSystem, HalfCarParams, MeasurementSeries};

/// Largest entry-wise deviation relative to the largest reference entry.
pub fn rel_err(actual: &DMatrix<f64>, expected: &DMatrix<f64>) -> f64 {
    assert_eq!(actual.shape(), expected.shape());
    let scale = expected.amax().max(f64::MIN_POSITIVE);
    (actual - expected).amax() / scale
}

/// Half-car matrices written out entry by entry from the parameter symbols.
pub struct HandModel {
    pub mass: [[f64; 2]; 2],
    pub kv: [[f64; 2]; 2],
    pub cv: [[f64; 2]; 2],
    pub kr: [[f64; 2]; 2],
    pub cr: [[f64; 2]; 2],
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub g: DMatrix<f64>,
    /// Bounce and pitch acceleration rows.
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
    pub h: DMatrix<f64>,
}

pub fn hand_model(p: &HalfCarParams, dt: f64) -> HandModel {
    let (m, iv) = (p.m_v, p.i_v);
    let (k1, k2, c1, c2, d1, d2) = (p.k_1, p.k_2, p.c_1, p.c_2, p.d_1, p.d_2);
    let kv = [[k1 + k2, d1 * k1 - d2 * k2], [d1 * k1 - d2 * k2, d1 * d1 * k1 + d2 * d2 * k2]];
    let cv = [[c1 + c2, d1 * c1 - d2 * c2], [d1 * c1 - d2 * c2, d1 * d1 * c1 + d2 * d2 * c2]];
    let kr = [[k1, k2], [d1 * k1, -d2 * k2]];
    let cr = [[c1, c2], [d1 * c1, -d2 * c2]];
    let inv = [1.0 / m, 1.0 / iv];

    let mut a = DMatrix::zeros(4, 4);
    a[(0, 2)] = 1.0;
    a[(1, 3)] = 1.0;
    let mut b = DMatrix::zeros(4, 2);
    let mut g = DMatrix::zeros(4, 2);
    let mut c = DMatrix::zeros(2, 4);
    let mut d = DMatrix::zeros(2, 2);
    let mut h = DMatrix::zeros(2, 2);
    for r in 0..2 {
        for col in 0..2 {
            a[(2 + r, col)] = -kv[r][col] * inv[r];
            a[(2 + r, 2 + col)] = -cv[r][col] * inv[r];
            c[(r, col)] = -kv[r][col] * inv[r];
            c[(r, 2 + col)] = -cv[r][col] * inv[r];
            let stiff = kr[r][col] * inv[r];
            let rate = cr[r][col] * inv[r] / dt;
            b[(2 + r, col)] = stiff + rate;
            g[(2 + r, col)] = rate;
            d[(r, col)] = stiff + rate;
            h[(r, col)] = rate;
        }
    }
    HandModel {
        mass: [[m, 0.0], [0.0, iv]],
        kv,
        cv,
        kr,
        cr,
        a,
        b,
        g,
        c,
        d,
        h,
    }
}

/// `expm` through a complex eigendecomposition `V diag(e^λ) V^-1`. Only
/// valid for diagonalisable matrices.
pub fn expm_eigen(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let lambdas = a.complex_eigenvalues();
    let ac: DMatrix<Complex<f64>> = a.map(|v| Complex::new(v, 0.0));
    let mut v = DMatrix::<Complex<f64>>::zeros(n, n);
    for (i, &l) in lambdas.iter().enumerate() {
        let shifted = &ac - DMatrix::<Complex<f64>>::identity(n, n) * l;
        let svd = shifted.svd(false, true);
        // Right singular vector of the smallest singular value.
        let (idx, _) = svd
            .singular_values
            .iter()
            .enumerate()
            .min_by(|x, y| x.1.total_cmp(y.1))
            .unwrap();
        let vt = svd.v_t.unwrap();
        for r in 0..n {
            v[(r, i)] = vt[(idx, r)].conj();
        }
    }
    let v_inv = v.clone().try_inverse().expect("diagonalisable input");
    let e = DMatrix::from_diagonal(&DVector::from_iterator(n, lambdas.iter().map(|l| l.exp())));
    (v * e * v_inv).map(|z| z.re)
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| normal(rng))
}

pub fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| normal(rng))
}

pub fn spectral_radius(a: &DMatrix<f64>) -> f64 {
    a.complex_eigenvalues().iter().map(|l| l.norm()).fold(0.0, f64::max)
}

/// Random system of random size with spectral radius 0.9.
pub fn random_stable_system(seed: u64) -> DiscreteSystem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=5);
    let m = rng.random_range(1..=3);
    let q = rng.random_range(1..=4);
    let mut a = random_matrix(&mut rng, n, n);
    let rho = spectral_radius(&a);
    a *= 0.9 / rho;
    DiscreteSystem::new(
        a,
        random_matrix(&mut rng, n, m),
        random_matrix(&mut rng, n, m),
        random_matrix(&mut rng, q, n),
        random_matrix(&mut rng, q, m),
        random_matrix(&mut rng, q, m),
        0.01,
    )
    .unwrap()
}

/// Stack `vs` into one column.
pub fn stack(vs: &[DVector<f64>]) -> DVector<f64> {
    DVector::from_iterator(vs.iter().map(|v| v.len()).sum(), vs.iter().flat_map(|v| v.iter().copied()))
}

/// Run the one-step model `N + 1` times from `x_{k-1}` and stack the
/// outputs. `r[0]` is `r_{k-1}`, `w[i]` is `w_{k+i-1}`, `v[i]` is `v_{k+i}`.
/// Returns the stacked outputs and `x_k`.
pub fn unroll(
    sys: &DiscreteSystem,
    x_prev: &DVector<f64>,
    r: &[DVector<f64>],
    w: &[DVector<f64>],
    v: &[DVector<f64>],
) -> (DVector<f64>, DVector<f64>) {
    let len = v.len();
    let mut x = x_prev.clone();
    let mut x_k = None;
    let mut ys = Vec::with_capacity(len);
    for i in 0..len {
        x = &sys.ad * &x + &sys.bd * &r[i + 1] - &sys.gd * &r[i] + &w[i];
        if i == 0 {
            x_k = Some(x.clone());
        }
        ys.push(&sys.c * &x + &sys.d * &r[i + 1] - &sys.h * &r[i] + &v[i]);
    }
    (stack(&ys), x_k.unwrap())
}

/// Measurements generated by the discrete model itself with white process
/// and measurement noise. Row `t` of the result is `y_t`; inputs before the
/// record are zero.
pub fn exact_model_record(
    sys: &DiscreteSystem,
    inputs: &[DVector<f64>],
    qx: f64,
    r_var: f64,
    seed: u64,
) -> MeasurementSeries {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n, m, q) = (sys.ad.nrows(), sys.bd.ncols(), sys.c.nrows());
    let mut x = DVector::zeros(n);
    let mut prev = DVector::zeros(m);
    let mut y = DMatrix::zeros(inputs.len(), q);
    for (t, r) in inputs.iter().enumerate() {
        let w = random_vector(&mut rng, n) * qx.sqrt();
        x = &sys.ad * &x + &sys.bd * r - &sys.gd * &prev + w;
        let v = random_vector(&mut rng, q) * r_var.sqrt();
        let yt = &sys.c * &x + &sys.d * r - &sys.h * &prev + v;
        y.row_mut(t).copy_from(&yt.transpose());
        prev = r.clone();
    }
    let times = (0..inputs.len()).map(|t| t as f64 * sys.dt).collect();
    MeasurementSeries::new(times, y).unwrap()
}
