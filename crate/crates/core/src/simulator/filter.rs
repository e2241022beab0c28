//! Zero-phase Butterworth filtering with second-order sections.

use crate::error::{Error, Result};

/// Normalised direct-form-II-transposed biquad (`a0 = 1`).
#[derive(Debug, Clone, Copy, PartialEq)]
struct Biquad {
    b: [f64; 3],
    a: [f64; 2],
}

impl Biquad {
    /// Second-order Butterworth section via the prewarped bilinear transform.
    fn butterworth(fc: f64, fs: f64, high: bool) -> Self {
        let w0 = std::f64::consts::TAU * fc / fs;
        let alpha = w0.sin() / std::f64::consts::SQRT_2;
        let cw = w0.cos();
        let a0 = 1.0 + alpha;
        let b = if high {
            [(1.0 + cw) / 2.0, -(1.0 + cw), (1.0 + cw) / 2.0]
        } else {
            [(1.0 - cw) / 2.0, 1.0 - cw, (1.0 - cw) / 2.0]
        };
        Self {
            b: [b[0] / a0, b[1] / a0, b[2] / a0],
            a: [-2.0 * cw / a0, (1.0 - alpha) / a0],
        }
    }

    fn dc_gain(&self) -> f64 {
        (self.b[0] + self.b[1] + self.b[2]) / (1.0 + self.a[0] + self.a[1])
    }

    /// Internal state that holds the output steady for a unit constant input.
    fn steady_state(&self) -> [f64; 2] {
        let g = self.dc_gain();
        [g - self.b[0], self.b[2] - self.a[1] * g]
    }

    fn run(&self, x: &mut [f64], scale: f64) {
        let zi = self.steady_state();
        let (mut z0, mut z1) = (zi[0] * scale, zi[1] * scale);
        for v in x.iter_mut() {
            let input = *v;
            let y = self.b[0] * input + z0;
            z0 = self.b[1] * input - self.a[0] * y + z1;
            z1 = self.b[2] * input - self.a[1] * y;
            *v = y;
        }
    }
}

/// Cascade of second-order sections.
#[derive(Debug, Clone, PartialEq)]
pub struct SosFilter {
    sections: Vec<Biquad>,
    /// Decay time of the slowest pole [samples].
    settle: f64,
}

impl SosFilter {
    /// 4th-order band-pass: 2nd-order high-pass at `f_lo` then 2nd-order
    /// low-pass at `f_hi`.
    pub fn bandpass(fs: f64, f_lo: f64, f_hi: f64) -> Result<Self> {
        let nyq = fs / 2.0;
        if !(fs > 0.0 && f_lo > 0.0 && f_lo < f_hi && f_hi < nyq) {
            return Err(Error::invalid(format!(
                "invalid band {f_lo}..{f_hi} Hz at sampling rate {fs} Hz"
            )));
        }
        Ok(Self {
            sections: vec![
                Biquad::butterworth(f_lo, fs, true),
                Biquad::butterworth(f_hi, fs, false),
            ],
            settle: settle_samples(f_lo, fs),
        })
    }

    /// 2nd-order Butterworth high-pass.
    pub fn highpass(fs: f64, fc: f64) -> Result<Self> {
        if !(fs > 0.0 && fc > 0.0 && fc < fs / 2.0) {
            return Err(Error::invalid(format!(
                "invalid cut-off {fc} Hz at sampling rate {fs} Hz"
            )));
        }
        Ok(Self {
            sections: vec![Biquad::butterworth(fc, fs, true)],
            settle: settle_samples(fc, fs),
        })
    }

    fn run(&self, x: &mut [f64]) {
        let mut level = x.first().copied().unwrap_or(0.0);
        for s in &self.sections {
            s.run(x, level);
            level *= s.dc_gain();
        }
    }

    /// Forward-backward filtering with odd-reflection padding and
    /// steady-state initial conditions. The padding covers ten decay times
    /// of the slowest pole when the record is long enough. Output length
    /// equals input length.
    pub fn filtfilt(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        if n == 0 {
            return Vec::new();
        }
        let pad = ((10.0 * self.settle).ceil() as usize).max(6 * self.sections.len() + 3).min(n - 1);
        let mut ext = Vec::with_capacity(n + 2 * pad);
        ext.extend((1..=pad).rev().map(|i| 2.0 * x[0] - x[i]));
        ext.extend_from_slice(x);
        ext.extend((1..=pad).map(|i| 2.0 * x[n - 1] - x[n - 1 - i]));
        self.run(&mut ext);
        ext.reverse();
        self.run(&mut ext);
        ext.reverse();
        ext[pad..pad + n].to_vec()
    }
}

/// Decay time constant of a 2nd-order Butterworth pole pair at `fc`.
fn settle_samples(fc: f64, fs: f64) -> f64 {
    fs / (std::f64::consts::TAU * fc * std::f64::consts::FRAC_1_SQRT_2)
}

/// Zero-phase 4th-order band-pass of a uniformly sampled series.
pub fn bandpass(series: &[f64], fs: f64, f_lo: f64, f_hi: f64) -> Result<Vec<f64>> {
    Ok(SosFilter::bandpass(fs, f_lo, f_hi)?.filtfilt(series))
}

/// Zero-phase 2nd-order high-pass of a uniformly sampled series.
pub fn highpass(series: &[f64], fs: f64, fc: f64) -> Result<Vec<f64>> {
    Ok(SosFilter::highpass(fs, fc)?.filtfilt(series))
}
