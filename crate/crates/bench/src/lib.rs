//! Fixtures shared by the benchmarks.

use nalgebra::DVector;
use roadid_core::{DiscreteSystem, HalfCarParams, Scenario, SelectionMatrix};

pub use roadid_core::{ExtendedSystem, NoiseConfig, Smoother, TruncationPolicy};

pub const DT: f64 = 0.005;

/// Default vehicle observed through bounce and pitch acceleration.
pub fn half_car() -> DiscreteSystem {
    DiscreteSystem::half_car(&HalfCarParams::default(), &SelectionMatrix::accelerations(), DT)
        .expect("default vehicle is valid")
}

/// Stacked measurements of the first `window + 1` samples of the clean
/// scenario.
pub fn first_window(window: usize) -> DVector<f64> {
    let data = Scenario {
        length_m: 6.0,
        ..Scenario::clean()
    }
    .realise()
    .expect("scenario realises");
    let y = &data.sim.measurements.y;
    DVector::from_iterator(2 * (window + 1), (0..=window).flat_map(|k| [y[(k, 0)], y[(k, 1)]]))
}

pub fn smoother_noise() -> NoiseConfig {
    NoiseConfig {
        qx: 1e-8,
        r_diag: vec![1e-6],
        qr: 0.0,
    }
}
