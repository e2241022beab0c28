use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{Error, Result};

/// One-sided spatial spectrum. `power[i]` is the signal variance carried by
/// the bin centred on `freq[i]`, so the sum over bins approximates the
/// variance of the input.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpatialSpectrum {
    /// Spatial frequency [cycles/m].
    pub freq: Vec<f64>,
    /// Power per bin [m^2].
    pub power: Vec<f64>,
}

const MAX_SEGMENT: usize = 1024;

/// Welch estimate with a Hann window and 50% overlap, DC bin excluded.
pub fn periodogram_spatial(values: &[f64], spacing: f64) -> Result<SpatialSpectrum> {
    if values.len() < 16 {
        return Err(Error::invalid(format!(
            "spectrum needs at least 16 samples, got {}",
            values.len()
        )));
    }
    if !(spacing.is_finite() && spacing > 0.0) {
        return Err(Error::invalid(format!("spacing must be positive, got {spacing}")));
    }
    let seg = segment_length(values.len());
    let step = seg / 2;
    let window: Vec<f64> = (0..seg)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / seg as f64).cos())
        .collect();
    let w2: f64 = window.iter().map(|w| w * w).sum();
    let fft = FftPlanner::new().plan_fft_forward(seg);
    let bins = seg / 2;
    let mut acc = vec![0.0; bins + 1];
    let mut count = 0usize;
    let mut start = 0;
    let mut buf = vec![Complex::new(0.0, 0.0); seg];
    while start + seg <= values.len() {
        let chunk = &values[start..start + seg];
        let mean = chunk.iter().sum::<f64>() / seg as f64;
        for (b, (&v, &w)) in buf.iter_mut().zip(chunk.iter().zip(&window)) {
            *b = Complex::new((v - mean) * w, 0.0);
        }
        fft.process(&mut buf);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a += b.norm_sqr();
        }
        count += 1;
        start += step;
    }
    // Variance per bin: |X|^2 / (sum w^2 * seg), doubled off the edges.
    let norm = w2 * seg as f64 * count as f64;
    let df = 1.0 / (seg as f64 * spacing);
    let mut freq = Vec::with_capacity(bins);
    let mut power = Vec::with_capacity(bins);
    for (i, &a) in acc.iter().enumerate().skip(1) {
        let edge = i == bins && seg % 2 == 0;
        freq.push(i as f64 * df);
        power.push(a / norm * if edge { 1.0 } else { 2.0 });
    }
    Ok(SpatialSpectrum { freq, power })
}

fn segment_length(len: usize) -> usize {
    // Largest power of two giving at least ~8 averaged segments, capped.
    let mut seg = 16;
    while seg * 2 <= MAX_SEGMENT && seg * 2 * 4 <= len {
        seg *= 2;
    }
    seg.min(len)
}
