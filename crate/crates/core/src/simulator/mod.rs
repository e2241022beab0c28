//! Forward simulation of the half-car over a road profile, producing the
//! noisy sensor records the estimators consume.
//!
//! The equation of motion is integrated with classical RK4 on a finer grid
//! than the sampling interval, using the exact road rate from the profile
//! slope. Estimators instead use the matrix-exponential model with a
//! backward-difference road rate, so the two never agree exactly.

mod filter;

use std::path::Path;

use nalgebra::{DMatrix, Matrix2, Vector2, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

pub use filter::{bandpass, highpass, SosFilter};

use crate::error::{Error, Result};
use crate::io;
use crate::model::{build_vehicle_matrices, HalfCarParams, SelectionMatrix, VehicleMatrices};
use crate::profile::{profile_to_inputs, Drive, InputSeries, RoadProfile};

/// Additive disturbances on the simulated sensors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSpec {
    /// White-noise standard deviation per channel. A single entry applies
    /// to every channel.
    pub measurement_std: Vec<f64>,
    /// Amplitude of each injected bridge-vibration sinusoid.
    pub bridge_amp: f64,
    /// Frequencies of the bridge sinusoids [Hz].
    pub bridge_freqs: Vec<f64>,
    pub seed: u64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            measurement_std: vec![1e-3],
            bridge_amp: 0.0,
            bridge_freqs: vec![2.5, 3.4],
            seed: 0,
        }
    }
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        if self.measurement_std.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(Error::invalid("measurement_std entries must be non-negative"));
        }
        if !(self.bridge_amp.is_finite() && self.bridge_amp >= 0.0) {
            return Err(Error::invalid("bridge_amp must be non-negative"));
        }
        if self.bridge_freqs.iter().any(|f| !(f.is_finite() && *f > 0.0)) {
            return Err(Error::invalid("bridge_freqs must be positive"));
        }
        Ok(())
    }

    fn std_for(&self, channel: usize) -> f64 {
        match self.measurement_std.len() {
            0 => 0.0,
            1 => self.measurement_std[0],
            _ => self.measurement_std.get(channel).copied().unwrap_or(0.0),
        }
    }
}

/// Sensor record: one row per sample, one column per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSeries {
    pub times: Vec<f64>,
    pub y: DMatrix<f64>,
    pub dt: f64,
}

impl MeasurementSeries {
    pub fn new(times: Vec<f64>, y: DMatrix<f64>) -> Result<Self> {
        if times.len() != y.nrows() {
            return Err(Error::invalid(format!(
                "{} times for {} measurement rows",
                times.len(),
                y.nrows()
            )));
        }
        if times.len() < 2 {
            return Err(Error::invalid("measurement series needs at least 2 samples"));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("measurements contain NaN or Inf"));
        }
        let dt = times[1] - times[0];
        if !(dt > 0.0) {
            return Err(Error::invalid("measurement times not increasing"));
        }
        if let Some(i) = times
            .windows(2)
            .position(|w| ((w[1] - w[0]) - dt).abs() > 1e-9 * dt.max(1.0))
        {
            return Err(Error::invalid(format!(
                "non-uniform sampling interval at sample {}",
                i + 1
            )));
        }
        Ok(Self { times, y, dt })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn channels(&self) -> usize {
        self.y.ncols()
    }

    /// Write `t_s,acc_bounce,acc_pitch` (or `t_s,y1..yq` for other layouts).
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let names: Vec<String> = if self.channels() == 2 {
            vec!["acc_bounce".into(), "acc_pitch".into()]
        } else {
            (1..=self.channels()).map(|i| format!("y{i}")).collect()
        };
        let cols: Vec<Vec<f64>> = (0..self.channels())
            .map(|c| self.y.column(c).iter().copied().collect())
            .collect();
        let mut headers = vec!["t_s"];
        headers.extend(names.iter().map(String::as_str));
        let mut refs: Vec<&[f64]> = vec![&self.times];
        refs.extend(cols.iter().map(Vec::as_slice));
        io::write_columns(path.as_ref(), &headers, &refs)
    }

    /// Read a measurement CSV. Raw four-sensor files (`t_s,a1,a2,a3,a4`,
    /// front-left, front-right, rear-left, rear-right) are averaged per axle
    /// and passed through [`rigid_body_transform`] with the given lever arms.
    pub fn load_csv(path: impl AsRef<Path>, lever_arms: (f64, f64)) -> Result<Self> {
        let path = path.as_ref();
        let table = io::read_table(path)?;
        let h: Vec<&str> = table.headers.iter().map(String::as_str).collect();
        let parse_err = |detail: String| Error::Parse {
            path: path.into(),
            row: 1,
            detail,
        };
        if h.first() != Some(&"t_s") || h.len() < 2 {
            return Err(parse_err(format!("expected t_s as first column, found {h:?}")));
        }
        let times = table.columns[0].clone();
        let y = if h == ["t_s", "a1", "a2", "a3", "a4"] {
            let c = &table.columns;
            let mut y = DMatrix::zeros(times.len(), 2);
            for k in 0..times.len() {
                let front = 0.5 * (c[1][k] + c[2][k]);
                let rear = 0.5 * (c[3][k] + c[4][k]);
                let (b, p) = rigid_body_transform(front, rear, lever_arms.0, lever_arms.1)?;
                y[(k, 0)] = b;
                y[(k, 1)] = p;
            }
            y
        } else {
            let q = h.len() - 1;
            DMatrix::from_fn(times.len(), q, |k, c| table.columns[c + 1][k])
        };
        Self::new(times, y).map_err(|e| parse_err(e.to_string()))
    }
}

/// Bounce and pitch acceleration from front and rear vertical accelerations
/// at lever arms `l_f`, `l_r` from the centroid. Positive pitch is front up.
pub fn rigid_body_transform(a_front: f64, a_rear: f64, l_f: f64, l_r: f64) -> Result<(f64, f64)> {
    let span = l_f + l_r;
    if !(span.is_finite() && span > 0.0) {
        return Err(Error::invalid(format!("lever arms must sum to a positive length, got {span}")));
    }
    Ok(((l_r * a_front + l_f * a_rear) / span, (a_front - a_rear) / span))
}

/// Integrator settings.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationOptions {
    /// RK4 steps per sampling interval.
    pub substeps: usize,
    /// Output channels from `[u; u̇; ü]`.
    pub selection: SelectionMatrix,
    /// State `[u; u̇]` at `t = 0`.
    pub initial_state: [f64; 4],
}

impl Default for SimulationOptions {
    fn default() -> Self {
        Self {
            substeps: 10,
            selection: SelectionMatrix::accelerations(),
            initial_state: [0.0; 4],
        }
    }
}

/// Result of a forward simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub measurements: MeasurementSeries,
    /// Noise-free outputs, same layout as `measurements.y`.
    pub clean: DMatrix<f64>,
    /// True `[u; u̇]` per sample, one row per sample.
    pub states: DMatrix<f64>,
    pub inputs: InputSeries,
}

/// Road under both axles. Heights are continuous and piecewise linear in
/// time; rates jump only at the instants `breaks` reports.
trait Excitation {
    fn height(&self, t: f64) -> Vector2<f64>;
    /// Rate on the segment that starts at `t`.
    fn rate(&self, t: f64) -> Vector2<f64>;
    /// Instants in `(t0, t1)` where either rate jumps, appended unsorted.
    fn breaks(&self, t0: f64, t1: f64, out: &mut Vec<f64>);
}

struct ProfileExcitation<'a> {
    profile: &'a RoadProfile,
    drive: Drive,
}

impl Excitation for ProfileExcitation<'_> {
    fn height(&self, t: f64) -> Vector2<f64> {
        let [sf, sr] = self.drive.axle_positions(t);
        Vector2::new(self.profile.height_at(sf), self.profile.height_at(sr))
    }

    fn rate(&self, t: f64) -> Vector2<f64> {
        let [sf, sr] = self.drive.axle_positions(t);
        let v = self.drive.speed;
        Vector2::new(self.profile.slope_at(sf) * v, self.profile.slope_at(sr) * v)
    }

    fn breaks(&self, t0: f64, t1: f64, out: &mut Vec<f64>) {
        let [f0, r0] = self.drive.axle_positions(t0);
        let [f1, r1] = self.drive.axle_positions(t1);
        let v = self.drive.speed;
        for s in self.profile.knots_between(f0, f1) {
            out.push(t0 + (s - f0) / v);
        }
        for s in self.profile.knots_between(r0, r1) {
            out.push(t0 + (s - r0) / v);
        }
    }
}

/// Piecewise-linear interpolation of a sampled input series.
struct SeriesExcitation<'a> {
    inputs: &'a InputSeries,
    dt: f64,
}

impl SeriesExcitation<'_> {
    fn segment(&self, t: f64) -> usize {
        ((t / self.dt).floor().max(0.0) as usize).min(self.inputs.len().saturating_sub(2))
    }
}

impl Excitation for SeriesExcitation<'_> {
    fn height(&self, t: f64) -> Vector2<f64> {
        let i = self.segment(t);
        let frac = t / self.dt - i as f64;
        let [f0, r0] = self.inputs.at(i);
        let [f1, r1] = self.inputs.at(i + 1);
        Vector2::new(f0 + frac * (f1 - f0), r0 + frac * (r1 - r0))
    }

    fn rate(&self, t: f64) -> Vector2<f64> {
        let i = self.segment(t);
        let [f0, r0] = self.inputs.at(i);
        let [f1, r1] = self.inputs.at(i + 1);
        Vector2::new((f1 - f0) / self.dt, (r1 - r0) / self.dt)
    }

    /// Knots fall on sample instants, which are already step boundaries.
    fn breaks(&self, _: f64, _: f64, _: &mut Vec<f64>) {}
}

struct Dynamics {
    mi: Matrix2<f64>,
    vm: VehicleMatrices,
}

impl Dynamics {
    fn acceleration(&self, u: &Vector2<f64>, ud: &Vector2<f64>, r: &Vector2<f64>, rd: &Vector2<f64>) -> Vector2<f64> {
        self.mi
            * (self.vm.road_stiffness * r + self.vm.road_damping * rd
                - self.vm.stiffness * u
                - self.vm.damping * ud)
    }

    fn derivative(&self, z: &Vector4<f64>, r: &Vector2<f64>, rd: &Vector2<f64>) -> Vector4<f64> {
        let u = z.fixed_rows::<2>(0).into_owned();
        let ud = z.fixed_rows::<2>(2).into_owned();
        let acc = self.acceleration(&u, &ud, r, rd);
        Vector4::new(ud[0], ud[1], acc[0], acc[1])
    }

    /// One RK4 step over `[t0, t0 + h]`, inside which the road rate is the
    /// constant `rd`.
    fn rk4(&self, ex: &dyn Excitation, z: &Vector4<f64>, t0: f64, h: f64, rd: &Vector2<f64>) -> Vector4<f64> {
        let f = |t: f64, zz: &Vector4<f64>| self.derivative(zz, &ex.height(t), rd);
        let k1 = f(t0, z);
        let k2 = f(t0 + h / 2.0, &(z + k1 * (h / 2.0)));
        let k3 = f(t0 + h / 2.0, &(z + k2 * (h / 2.0)));
        let k4 = f(t0 + h, &(z + k3 * h));
        z + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
    }
}

/// Drive the vehicle over `profile` and record the selected channels.
pub fn simulate_response(
    p: &HalfCarParams,
    profile: &RoadProfile,
    drive: &Drive,
    noise: &NoiseSpec,
    opts: &SimulationOptions,
) -> Result<Simulation> {
    let inputs = profile_to_inputs(profile, drive)?;
    let excitation = ProfileExcitation {
        profile,
        drive: *drive,
    };
    integrate(p, &excitation, inputs, drive.dt, noise, opts)
}

/// Simulate from a sampled input series, interpolated linearly between
/// samples.
pub fn simulate_inputs(
    p: &HalfCarParams,
    inputs: &InputSeries,
    noise: &NoiseSpec,
    opts: &SimulationOptions,
) -> Result<Simulation> {
    let dt = inputs
        .dt()
        .filter(|d| *d > 0.0)
        .ok_or_else(|| Error::invalid("input series needs at least 2 increasing samples"))?;
    let excitation = SeriesExcitation { inputs, dt };
    integrate(p, &excitation, inputs.clone(), dt, noise, opts)
}

fn integrate(
    p: &HalfCarParams,
    excitation: &dyn Excitation,
    inputs: InputSeries,
    dt: f64,
    noise: &NoiseSpec,
    opts: &SimulationOptions,
) -> Result<Simulation> {
    noise.validate()?;
    if opts.substeps == 0 {
        return Err(Error::invalid("substeps must be at least 1"));
    }
    let vm = build_vehicle_matrices(p)?;
    let dynamics = Dynamics {
        mi: vm.mass_inverse(),
        vm,
    };
    let steps = inputs.len();
    if steps < 2 {
        return Err(Error::invalid("simulation needs at least 2 samples"));
    }
    let sel = opts.selection.to_matrix();
    let q = sel.nrows();
    let h = dt / opts.substeps as f64;

    let mut z = Vector4::from_row_slice(&opts.initial_state);
    let mut knots = Vec::new();
    let mut states = DMatrix::zeros(steps, 4);
    let mut clean = DMatrix::zeros(steps, q);
    for k in 0..steps {
        let t = k as f64 * dt;
        if k > 0 {
            for j in 0..opts.substeps {
                let ta = t - dt + j as f64 * h;
                let tb = ta + h;
                // RK4 only converges at its design order where the forcing
                // is smooth, so substeps are split where the rate jumps.
                knots.clear();
                excitation.breaks(ta, tb, &mut knots);
                knots.sort_by(f64::total_cmp);
                knots.push(tb);
                let mut a = ta;
                for &b in &knots {
                    if b - a > 1e-12 * dt {
                        let rd = excitation.rate(0.5 * (a + b));
                        z = dynamics.rk4(excitation, &z, a, b - a, &rd);
                    }
                    a = b;
                }
            }
        }
        let (r, rd) = (excitation.height(t), excitation.rate(t));
        let acc = dynamics.derivative(&z, &r, &rd);
        let full = nalgebra::DVector::from_column_slice(&[
            z[0], z[1], z[2], z[3], acc[2], acc[3],
        ]);
        clean.row_mut(k).copy_from(&(&sel * full).transpose());
        states.row_mut(k).copy_from(&z.transpose());
    }

    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    let phases: Vec<Vec<f64>> = (0..q)
        .map(|_| {
            noise
                .bridge_freqs
                .iter()
                .map(|_| rng.random_range(0.0..std::f64::consts::TAU))
                .collect()
        })
        .collect();
    let mut y = clean.clone();
    for k in 0..steps {
        let t = k as f64 * dt;
        for c in 0..q {
            let bridge: f64 = noise
                .bridge_freqs
                .iter()
                .zip(&phases[c])
                .map(|(f, ph)| (std::f64::consts::TAU * f * t + ph).sin())
                .sum();
            let white: f64 = rng.sample(StandardNormal);
            y[(k, c)] += noise.bridge_amp * bridge + noise.std_for(c) * white;
        }
    }
    let times = inputs.times.clone();
    Ok(Simulation {
        measurements: MeasurementSeries::new(times, y)?,
        clean,
        states,
        inputs,
    })
}

/// Kinetic plus suspension strain energy of state `[u; u̇]` with the road
/// at rest at zero height.
pub fn mechanical_energy(vm: &VehicleMatrices, state: &[f64; 4]) -> f64 {
    let u = Vector2::new(state[0], state[1]);
    let ud = Vector2::new(state[2], state[3]);
    0.5 * (ud.transpose() * vm.mass * ud)[0] + 0.5 * (u.transpose() * vm.stiffness * u)[0]
}
