//! Road profiles and the time-indexed wheel inputs they induce.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;

/// ISO 8608 roughness class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RoughnessClass {
    A,
    B,
    C,
    D,
    E,
}

impl RoughnessClass {
    /// Displacement PSD at the reference frequency `n0 = 0.1` cycles/m [m^3].
    pub fn reference_psd(self) -> f64 {
        match self {
            Self::A => 16e-6,
            Self::B => 64e-6,
            Self::C => 256e-6,
            Self::D => 1024e-6,
            Self::E => 4096e-6,
        }
    }
}

impl FromStr for RoughnessClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A" => Ok(Self::A),
            "B" => Ok(Self::B),
            "C" => Ok(Self::C),
            "D" => Ok(Self::D),
            "E" => Ok(Self::E),
            other => Err(Error::invalid(format!("unknown roughness class {other:?}"))),
        }
    }
}

impl fmt::Display for RoughnessClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// Elevation along one wheel track.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoadProfile {
    /// Positions [m], strictly increasing.
    pub distances: Vec<f64>,
    /// Heights [m].
    pub heights: Vec<f64>,
    pub track_id: String,
}

impl RoadProfile {
    pub fn new(distances: Vec<f64>, heights: Vec<f64>, track_id: impl Into<String>) -> Result<Self> {
        if distances.len() != heights.len() {
            return Err(Error::invalid(format!(
                "profile has {} distances and {} heights",
                distances.len(),
                heights.len()
            )));
        }
        if distances.len() < 2 {
            return Err(Error::invalid("profile needs at least 2 points"));
        }
        if let Some(i) = heights.iter().position(|h| !h.is_finite()) {
            return Err(Error::invalid(format!("non-finite height at index {i}")));
        }
        if let Some(i) = distances.iter().position(|d| !d.is_finite()) {
            return Err(Error::invalid(format!("non-finite distance at index {i}")));
        }
        if let Some(i) = distances.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::invalid(format!(
                "distances not strictly increasing at index {}",
                i + 1
            )));
        }
        Ok(Self {
            distances,
            heights,
            track_id: track_id.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.distances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.distances.is_empty()
    }

    pub fn start(&self) -> f64 {
        self.distances[0]
    }

    pub fn end(&self) -> f64 {
        self.distances[self.distances.len() - 1]
    }

    /// Uniform spacing if every interval matches the mean within 1e-9 m.
    pub fn uniform_spacing(&self) -> Option<f64> {
        let n = self.distances.len();
        let dx = (self.end() - self.start()) / (n - 1) as f64;
        self.distances
            .windows(2)
            .all(|w| ((w[1] - w[0]) - dx).abs() <= 1e-9)
            .then_some(dx)
    }

    /// Resample onto a uniform grid with the given spacing.
    pub fn resample(&self, spacing: f64) -> Result<Self> {
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(Error::invalid(format!("spacing must be positive, got {spacing}")));
        }
        let count = ((self.end() - self.start()) / spacing + 1e-9).floor() as usize + 1;
        let x0 = self.start();
        let distances: Vec<f64> = (0..count).map(|i| x0 + i as f64 * spacing).collect();
        let heights = distances.iter().map(|&s| self.height_at(s)).collect();
        Self::new(distances, heights, self.track_id.clone())
    }

    /// Linear interpolation; zero before the start, last value after the end.
    pub fn height_at(&self, s: f64) -> f64 {
        self.locate(s).map_or_else(
            |outside| outside,
            |(i, frac)| self.heights[i] + frac * (self.heights[i + 1] - self.heights[i]),
        )
    }

    /// Slope of the interpolant [m/m]; zero outside the profile.
    pub fn slope_at(&self, s: f64) -> f64 {
        match self.locate(s) {
            Ok((i, _)) => {
                (self.heights[i + 1] - self.heights[i])
                    / (self.distances[i + 1] - self.distances[i])
            }
            Err(_) => 0.0,
        }
    }

    /// Sample distances strictly inside `(a, b)`, where the slope jumps.
    pub fn knots_between(&self, a: f64, b: f64) -> &[f64] {
        let d = &self.distances;
        let lo = d.partition_point(|&v| v <= a);
        let hi = d.partition_point(|&v| v < b).max(lo);
        &d[lo..hi]
    }

    /// Segment index and fraction, or the value to use outside the profile.
    fn locate(&self, s: f64) -> std::result::Result<(usize, f64), f64> {
        let d = &self.distances;
        if s < d[0] {
            return Err(0.0);
        }
        if s > d[d.len() - 1] {
            return Err(self.heights[d.len() - 1]);
        }
        let i = d.partition_point(|&v| v <= s).clamp(1, d.len() - 1) - 1;
        Ok((i, (s - d[i]) / (d[i + 1] - d[i])))
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        io::write_columns(
            path.as_ref(),
            &["distance_m", "height_m"],
            &[&self.distances, &self.heights],
        )
    }
}

/// Length of the raised-cosine lead-in applied to generated profiles [m].
const LEAD_IN: f64 = 2.0;
const N0: f64 = 0.1;
const BAND: (f64, f64) = (0.01, 10.0);
const DN: f64 = 0.01;

/// Synthetic profile by summing sinusoids whose amplitudes follow the
/// ISO 8608 displacement PSD `G(n) = G(n0) (n / n0)^-2`. Phases are uniform
/// random from `seed`. A raised-cosine lead-in over `min(2 m, L/4)` starts
/// the road at zero height, and the mean is removed.
pub fn generate_iso_profile(
    class: RoughnessClass,
    length: f64,
    spacing: f64,
    seed: u64,
) -> Result<RoadProfile> {
    if !(length.is_finite() && length > 0.0) {
        return Err(Error::invalid(format!("length must be positive, got {length}")));
    }
    if !(spacing.is_finite() && spacing > 0.0 && spacing < length) {
        return Err(Error::invalid(format!(
            "spacing must be in (0, length), got {spacing}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g0 = class.reference_psd();
    let bins = ((BAND.1 - BAND.0) / DN).round() as usize;
    let components: Vec<(f64, f64, f64)> = (0..bins)
        .map(|i| {
            let n = BAND.0 + (i as f64 + 0.5) * DN;
            let amp = (2.0 * g0 * (n / N0).powi(-2) * DN).sqrt();
            let phase = rng.random_range(0.0..std::f64::consts::TAU);
            (std::f64::consts::TAU * n, amp, phase)
        })
        .collect();

    let count = (length / spacing + 1e-9).floor() as usize + 1;
    let distances: Vec<f64> = (0..count).map(|i| i as f64 * spacing).collect();
    let lead = LEAD_IN.min(length / 4.0);
    let mut heights: Vec<f64> = distances
        .iter()
        .map(|&x| {
            let h: f64 = components
                .iter()
                .map(|&(w, a, p)| a * (w * x + p).cos())
                .sum();
            let taper = if x < lead {
                0.5 - 0.5 * (std::f64::consts::PI * x / lead).cos()
            } else {
                1.0
            };
            h * taper
        })
        .collect();
    let mean = heights.iter().sum::<f64>() / heights.len() as f64;
    heights.iter_mut().for_each(|h| *h -= mean);
    RoadProfile::new(distances, heights, format!("iso-{class}-{seed}"))
}

/// Read a `distance_m,height_m` CSV. Non-uniform spacing is accepted.
pub fn load_profile_csv(path: impl AsRef<Path>) -> Result<RoadProfile> {
    let path = path.as_ref();
    let cols = io::read_columns(path, &["distance_m", "height_m"])?;
    let (d, h) = (&cols[0], &cols[1]);
    if d.len() < 2 {
        return Err(Error::Parse {
            path: path.into(),
            row: d.len(),
            detail: "profile needs at least 2 rows".into(),
        });
    }
    if let Some(i) = d.windows(2).position(|w| w[1] <= w[0]) {
        return Err(Error::Parse {
            path: path.into(),
            // Header is line 1 and the offending value sits at index i + 1.
            row: i + 3,
            detail: "distance_m not strictly increasing".into(),
        });
    }
    let track = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    RoadProfile::new(d.clone(), h.clone(), track)
}

/// Wheel inputs sampled at a constant interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputSeries {
    /// Sample times [s].
    pub times: Vec<f64>,
    /// Height under the front axle [m].
    pub r_front: Vec<f64>,
    /// Height under the rear axle [m].
    pub r_rear: Vec<f64>,
    /// Vehicle speed [m/s].
    pub speed: f64,
}

impl InputSeries {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dt(&self) -> Option<f64> {
        (self.times.len() >= 2).then(|| self.times[1] - self.times[0])
    }

    /// `[r_front, r_rear]` at step `k`.
    pub fn at(&self, k: usize) -> [f64; 2] {
        [self.r_front[k], self.r_rear[k]]
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        io::write_columns(
            path.as_ref(),
            &["t_s", "r_front_m", "r_rear_m"],
            &[&self.times, &self.r_front, &self.r_rear],
        )
    }

    /// Read a `t_s,r_front_m,r_rear_m` CSV. Speed is not stored in the file.
    pub fn load_csv(path: impl AsRef<Path>, speed: f64) -> Result<Self> {
        let cols = io::read_columns(path.as_ref(), &["t_s", "r_front_m", "r_rear_m"])?;
        let mut it = cols.into_iter();
        Ok(Self {
            times: it.next().unwrap_or_default(),
            r_front: it.next().unwrap_or_default(),
            r_rear: it.next().unwrap_or_default(),
            speed,
        })
    }
}

/// Constant-speed pass over a profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Drive {
    /// [m/s].
    pub speed: f64,
    /// Sampling interval [s].
    pub dt: f64,
    /// Axle spacing [m].
    pub wheelbase: f64,
    /// Profile position of the front axle at `t = 0` [m].
    pub offset: f64,
}

impl Drive {
    pub fn new(speed: f64, dt: f64, wheelbase: f64) -> Result<Self> {
        let d = Self {
            speed,
            dt,
            wheelbase,
            offset: 0.0,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.speed.is_finite() && self.speed > 0.0) {
            return Err(Error::invalid(format!("speed must be positive, got {}", self.speed)));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::invalid(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.wheelbase.is_finite() && self.wheelbase >= 0.0) {
            return Err(Error::invalid(format!(
                "wheelbase must be non-negative, got {}",
                self.wheelbase
            )));
        }
        if !self.offset.is_finite() {
            return Err(Error::invalid("offset must be finite"));
        }
        Ok(())
    }

    /// Samples until the front axle reaches the end of the profile.
    pub fn steps(&self, profile: &RoadProfile) -> usize {
        let travel = profile.end() - self.offset;
        if travel < 0.0 {
            return 0;
        }
        (travel / (self.speed * self.dt) + 1e-9).floor() as usize + 1
    }

    /// Profile positions of the front and rear axles at time `t`.
    pub fn axle_positions(&self, t: f64) -> [f64; 2] {
        let front = self.offset + self.speed * t;
        [front, front - self.wheelbase]
    }
}

/// Sample wheel heights along the pass. Positions before the profile start
/// read as zero.
pub fn profile_to_inputs(pr: &RoadProfile, drive: &Drive) -> Result<InputSeries> {
    drive.validate()?;
    let steps = drive.steps(pr);
    let mut out = InputSeries {
        times: Vec::with_capacity(steps),
        r_front: Vec::with_capacity(steps),
        r_rear: Vec::with_capacity(steps),
        speed: drive.speed,
    };
    for k in 0..steps {
        let t = k as f64 * drive.dt;
        let [sf, sr] = drive.axle_positions(t);
        out.times.push(t);
        out.r_front.push(pr.height_at(sf));
        out.r_rear.push(pr.height_at(sr));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn class_parsing() {
        assert_eq!("b".parse::<RoughnessClass>().unwrap(), RoughnessClass::B);
        assert!("F".parse::<RoughnessClass>().is_err());
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_iso_profile(RoughnessClass::A, 10.0, 0.01, 3).unwrap();
        let b = generate_iso_profile(RoughnessClass::A, 10.0, 0.01, 3).unwrap();
        let c = generate_iso_profile(RoughnessClass::A, 10.0, 0.01, 4).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.heights, c.heights);
        assert_eq!(a.len(), 1001);
        let mean = a.heights.iter().sum::<f64>() / a.len() as f64;
        assert!(mean.abs() < 1e-15);
    }

    #[test]
    fn generation_rejects_bad_sizes() {
        assert!(generate_iso_profile(RoughnessClass::A, 0.0, 0.01, 1).is_err());
        assert!(generate_iso_profile(RoughnessClass::A, 1.0, 0.0, 1).is_err());
    }

    #[test]
    fn ramp_interpolation_is_exact() {
        let d: Vec<f64> = (0..11).map(|i| i as f64 * 0.3).collect();
        let h: Vec<f64> = d.iter().map(|x| 0.002 * x - 0.001).collect();
        let p = RoadProfile::new(d, h, "ramp").unwrap();
        for i in 0..100 {
            let s = i as f64 * 0.0297;
            assert!((p.height_at(s) - (0.002 * s - 0.001)).abs() < 1e-12);
            assert!((p.slope_at(s) - 0.002).abs() < 1e-12);
        }
        assert_eq!(p.height_at(-1.0), 0.0);
        assert_eq!(p.slope_at(-1.0), 0.0);
    }

    #[test]
    fn resample_uniform() {
        let p = RoadProfile::new(vec![0.0, 0.3, 1.0], vec![0.0, 0.3, 1.0], "x").unwrap();
        assert!(p.uniform_spacing().is_none());
        let r = p.resample(0.1).unwrap();
        assert_eq!(r.len(), 11);
        assert!((r.uniform_spacing().unwrap() - 0.1).abs() < 1e-12);
        assert!((r.heights[7] - 0.7).abs() < 1e-12);
    }

    #[test]
    fn rear_lag_and_zero_fill() {
        let p = generate_iso_profile(RoughnessClass::C, 20.0, 0.01, 1).unwrap();
        let drive = Drive::new(10.0 / 3.6, 0.005, 2.72).unwrap();
        let inputs = profile_to_inputs(&p, &drive).unwrap();
        let lag = 2.72 / drive.speed / drive.dt;
        assert!((lag - 195.84).abs() < 1e-9);
        assert!(inputs.r_rear[..195].iter().all(|&v| v == 0.0));
        assert!(inputs.r_rear[196..].iter().any(|&v| v != 0.0));
        let same = profile_to_inputs(&p, &Drive::new(drive.speed, 0.005, 0.0).unwrap()).unwrap();
        assert_eq!(same.r_front, same.r_rear);
    }

    #[test]
    fn rejects_bad_drive() {
        assert!(Drive::new(0.0, 0.005, 2.72).is_err());
        assert!(Drive::new(1.0, 0.005, -1.0).is_err());
    }

    #[test]
    fn flat_profile_gives_zero_inputs() {
        let p = RoadProfile::new(vec![0.0, 5.0], vec![0.0, 0.0], "flat").unwrap();
        let inputs = profile_to_inputs(&p, &Drive::new(2.0, 0.01, 1.0).unwrap()).unwrap();
        assert!(inputs.r_front.iter().chain(&inputs.r_rear).all(|&v| v == 0.0));
        assert_eq!(inputs.len(), 251);
    }
}
