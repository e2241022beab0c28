//! Half-car vehicle model: physical parameters, continuous and discrete
//! state-space matrices, and the sensor selection that forms the output.
//!
//! State layout is `x = [u; u̇]` with `u = [bounce, pitch]`. Inputs are the
//! road heights under the front and rear axles, `r = [r_front, r_rear]`.
//! The road-rate term is replaced by a backward difference, which splits the
//! input matrix into a current-step part `B` and a previous-step part `G`.

use std::path::Path;

use nalgebra::{DMatrix, Matrix2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::expm;

/// Number of mechanical degrees of freedom in the half-car model.
pub const DOFS: usize = 2;
/// Number of unknown road inputs (front and rear).
pub const INPUTS: usize = 2;

/// Physical constants of the half-car.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HalfCarParams {
    /// Sprung mass [kg].
    pub m_v: f64,
    /// Pitch moment of inertia [kg m^2].
    #[serde(rename = "I_v")]
    pub i_v: f64,
    /// Front suspension stiffness [N/m].
    pub k_1: f64,
    /// Rear suspension stiffness [N/m].
    pub k_2: f64,
    /// Front damping [N s/m].
    pub c_1: f64,
    /// Rear damping [N s/m].
    pub c_2: f64,
    /// Centroid to front axle [m].
    pub d_1: f64,
    /// Centroid to rear axle [m].
    pub d_2: f64,
}

impl Default for HalfCarParams {
    fn default() -> Self {
        Self {
            m_v: 1994.0,
            i_v: 3954.0,
            k_1: 75749.0,
            k_2: 99646.0,
            c_1: 12535.0,
            c_2: 3602.0,
            d_1: 0.82,
            d_2: 1.90,
        }
    }
}

impl HalfCarParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("m_v", self.m_v),
            ("I_v", self.i_v),
            ("k_1", self.k_1),
            ("k_2", self.k_2),
            ("d_1", self.d_1),
            ("d_2", self.d_2),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        // Undamped suspensions are allowed so that C_v and C_r may vanish.
        for (name, v) in [("c_1", self.c_1), ("c_2", self.c_2)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(format!(
                    "{name} must be non-negative, got {v}"
                )));
            }
        }
        Ok(())
    }

    pub fn wheelbase(&self) -> f64 {
        self.d_1 + self.d_2
    }

    /// Parse a TOML table whose keys are the parameter symbols. Missing keys
    /// take their default values.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let p: Self = toml::from_str(text).map_err(|e| Error::invalid(format!("vehicle config: {e}")))?;
        p.validate()?;
        Ok(p)
    }

    pub fn from_toml_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }
}

/// Mass, stiffness and damping matrices of the equation of motion
/// `M ü + C u̇ + K u = K_r r + C_r ṙ`.
#[derive(Debug, Clone, PartialEq)]
pub struct VehicleMatrices {
    pub mass: Matrix2<f64>,
    pub stiffness: Matrix2<f64>,
    pub damping: Matrix2<f64>,
    pub road_stiffness: Matrix2<f64>,
    pub road_damping: Matrix2<f64>,
}

impl VehicleMatrices {
    pub fn mass_inverse(&self) -> Matrix2<f64> {
        Matrix2::new(1.0 / self.mass[(0, 0)], 0.0, 0.0, 1.0 / self.mass[(1, 1)])
    }
}

pub fn build_vehicle_matrices(p: &HalfCarParams) -> Result<VehicleMatrices> {
    p.validate()?;
    let HalfCarParams {
        m_v,
        i_v,
        k_1,
        k_2,
        c_1,
        c_2,
        d_1,
        d_2,
    } = *p;
    let coupled = |a: f64, b: f64| {
        Matrix2::new(
            a + b,
            d_1 * a - d_2 * b,
            d_1 * a - d_2 * b,
            d_1 * d_1 * a + d_2 * d_2 * b,
        )
    };
    let road = |a: f64, b: f64| Matrix2::new(a, b, d_1 * a, -d_2 * b);
    Ok(VehicleMatrices {
        mass: Matrix2::new(m_v, 0.0, 0.0, i_v),
        stiffness: coupled(k_1, k_2),
        damping: coupled(c_1, c_2),
        road_stiffness: road(k_1, k_2),
        road_damping: road(c_1, c_2),
    })
}

fn to_dynamic(m: &Matrix2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(2, 2, |i, j| m[(i, j)])
}

/// `x' = A x + B r_k - G r_{k-1}` with the backward-difference road rate.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousSystem {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub g: DMatrix<f64>,
    pub dt: f64,
}

impl ContinuousSystem {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, g: DMatrix<f64>, dt: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::invalid(format!("dt must be positive, got {dt}")));
        }
        let n = a.nrows();
        if !a.is_square() || b.nrows() != n || g.shape() != b.shape() {
            return Err(Error::invalid(format!(
                "inconsistent shapes: A {:?}, B {:?}, G {:?}",
                a.shape(),
                b.shape(),
                g.shape()
            )));
        }
        Ok(Self { a, b, g, dt })
    }
}

pub fn assemble_continuous(p: &HalfCarParams, dt: f64) -> Result<ContinuousSystem> {
    let vm = build_vehicle_matrices(p)?;
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::invalid(format!("dt must be positive, got {dt}")));
    }
    let mi = vm.mass_inverse();
    let mut a = DMatrix::zeros(4, 4);
    a.view_mut((0, 2), (2, 2)).fill_with_identity();
    a.view_mut((2, 0), (2, 2))
        .copy_from(&to_dynamic(&(-mi * vm.stiffness)));
    a.view_mut((2, 2), (2, 2))
        .copy_from(&to_dynamic(&(-mi * vm.damping)));

    let mut b = DMatrix::zeros(4, 2);
    let mut g = DMatrix::zeros(4, 2);
    let rate = mi * vm.road_damping / dt;
    b.view_mut((2, 0), (2, 2))
        .copy_from(&to_dynamic(&(mi * vm.road_stiffness + rate)));
    g.view_mut((2, 0), (2, 2)).copy_from(&to_dynamic(&rate));
    ContinuousSystem::new(a, b, g, dt)
}

/// Discrete process matrices: `x_k = Ad x_{k-1} + Bd r_k - Gd r_{k-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDynamics {
    pub ad: DMatrix<f64>,
    pub bd: DMatrix<f64>,
    pub gd: DMatrix<f64>,
    pub dt: f64,
}

/// `Ad = expm(A dt)`, `Bd = B dt`, `Gd = G dt`.
pub fn discretize(cs: &ContinuousSystem) -> Result<DiscreteDynamics> {
    Ok(DiscreteDynamics {
        ad: expm(&(&cs.a * cs.dt))?,
        bd: &cs.b * cs.dt,
        gd: &cs.g * cs.dt,
        dt: cs.dt,
    })
}

impl DiscreteDynamics {
    pub fn with_observation(
        self,
        c: DMatrix<f64>,
        d: DMatrix<f64>,
        h: DMatrix<f64>,
    ) -> Result<DiscreteSystem> {
        DiscreteSystem::new(self.ad, self.bd, self.gd, c, d, h, self.dt)
    }
}

/// Full discrete model, process and observation:
///
/// `x_k = Ad x_{k-1} + Bd r_k - Gd r_{k-1} + w_{k-1}`
/// `y_k = C x_k + D r_k - H r_{k-1} + v_k`
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteSystem {
    pub ad: DMatrix<f64>,
    pub bd: DMatrix<f64>,
    pub gd: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
    pub h: DMatrix<f64>,
    pub dt: f64,
}

impl DiscreteSystem {
    pub fn new(
        ad: DMatrix<f64>,
        bd: DMatrix<f64>,
        gd: DMatrix<f64>,
        c: DMatrix<f64>,
        d: DMatrix<f64>,
        h: DMatrix<f64>,
        dt: f64,
    ) -> Result<Self> {
        let n = ad.nrows();
        let m = bd.ncols();
        let q = c.nrows();
        let ok = ad.is_square()
            && bd.nrows() == n
            && gd.shape() == (n, m)
            && c.ncols() == n
            && d.shape() == (q, m)
            && h.shape() == (q, m);
        if !ok {
            return Err(Error::invalid(format!(
                "inconsistent system shapes: Ad {:?}, Bd {:?}, Gd {:?}, C {:?}, D {:?}, H {:?}",
                ad.shape(),
                bd.shape(),
                gd.shape(),
                c.shape(),
                d.shape(),
                h.shape()
            )));
        }
        if q == 0 || m == 0 || n == 0 {
            return Err(Error::invalid("system needs at least one state, input and output"));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::invalid(format!("dt must be positive, got {dt}")));
        }
        Ok(Self { ad, bd, gd, c, d, h, dt })
    }

    /// Half-car system with the given sensor selection.
    pub fn half_car(p: &HalfCarParams, sel: &SelectionMatrix, dt: f64) -> Result<Self> {
        let dynamics = discretize(&assemble_continuous(p, dt)?)?;
        let (c, d, h) = build_observation(p, sel, dt)?;
        dynamics.with_observation(c, d, h)
    }

    pub fn states(&self) -> usize {
        self.ad.nrows()
    }

    pub fn inputs(&self) -> usize {
        self.bd.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.c.nrows()
    }
}

/// Boolean `q x 3n` matrix picking sensor channels out of the stacked
/// `[displacement; velocity; acceleration]` vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectionMatrix {
    dofs: usize,
    channels: Vec<usize>,
}

impl SelectionMatrix {
    /// Select channels by index into `[u; u̇; ü]` (length `3 * dofs`).
    pub fn from_channels(dofs: usize, channels: &[usize]) -> Result<Self> {
        if channels.is_empty() {
            return Err(Error::invalid("selection needs at least one channel"));
        }
        if let Some(&bad) = channels.iter().find(|&&c| c >= 3 * dofs) {
            return Err(Error::invalid(format!(
                "channel {bad} out of range for {} columns",
                3 * dofs
            )));
        }
        Ok(Self {
            dofs,
            channels: channels.to_vec(),
        })
    }

    /// Validate an explicit 0/1 matrix with exactly one nonzero per row.
    pub fn from_matrix(entries: &DMatrix<f64>) -> Result<Self> {
        if entries.ncols() % 3 != 0 || entries.ncols() == 0 {
            return Err(Error::invalid(format!(
                "selector width {} is not a positive multiple of 3",
                entries.ncols()
            )));
        }
        let mut channels = Vec::with_capacity(entries.nrows());
        for (i, row) in entries.row_iter().enumerate() {
            if row.iter().any(|&v| v != 0.0 && v != 1.0) {
                return Err(Error::invalid(format!("selector row {i} has non-boolean entry")));
            }
            let ones: Vec<usize> = (0..row.len()).filter(|&j| row[j] == 1.0).collect();
            if ones.len() != 1 {
                return Err(Error::invalid(format!(
                    "selector row {i} has {} nonzero entries, expected 1",
                    ones.len()
                )));
            }
            channels.push(ones[0]);
        }
        Self::from_channels(entries.ncols() / 3, &channels)
    }

    /// Bounce and pitch accelerations, the default sensor layout.
    pub fn accelerations() -> Self {
        Self {
            dofs: DOFS,
            channels: vec![2 * DOFS, 2 * DOFS + 1],
        }
    }

    pub fn rows(&self) -> usize {
        self.channels.len()
    }

    pub fn channels(&self) -> &[usize] {
        &self.channels
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        let mut s = DMatrix::zeros(self.channels.len(), 3 * self.dofs);
        for (i, &c) in self.channels.iter().enumerate() {
            s[(i, c)] = 1.0;
        }
        s
    }
}

/// Output matrices `(C, D, H)` for the selected channels.
pub fn build_observation(
    p: &HalfCarParams,
    sel: &SelectionMatrix,
    dt: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)> {
    if sel.dofs != DOFS {
        return Err(Error::invalid(format!(
            "selector built for {} DOFs, half-car has {DOFS}",
            sel.dofs
        )));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::invalid(format!("dt must be positive, got {dt}")));
    }
    let vm = build_vehicle_matrices(p)?;
    let mi = vm.mass_inverse();
    let mut full_c = DMatrix::zeros(6, 4);
    full_c.view_mut((0, 0), (4, 4)).fill_with_identity();
    full_c
        .view_mut((4, 0), (2, 2))
        .copy_from(&to_dynamic(&(-mi * vm.stiffness)));
    full_c
        .view_mut((4, 2), (2, 2))
        .copy_from(&to_dynamic(&(-mi * vm.damping)));
    let rate = mi * vm.road_damping / dt;
    let mut full_d = DMatrix::zeros(6, 2);
    full_d
        .view_mut((4, 0), (2, 2))
        .copy_from(&to_dynamic(&(mi * vm.road_stiffness + rate)));
    let mut full_h = DMatrix::zeros(6, 2);
    full_h.view_mut((4, 0), (2, 2)).copy_from(&to_dynamic(&rate));

    let s = sel.to_matrix();
    Ok((&s * full_c, &s * full_d, &s * full_h))
}
