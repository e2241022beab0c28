use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DiscreteSystem, HalfCarParams, SelectionMatrix};
use crate::profile::{generate_iso_profile, Drive, RoadProfile, RoughnessClass};
use crate::simulator::{simulate_response, NoiseSpec, Simulation, SimulationOptions};

/// A synthetic test drive: vehicle, road, speed and sensor disturbances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub vehicle: HalfCarParams,
    pub class: RoughnessClass,
    pub length_m: f64,
    pub spacing_m: f64,
    pub profile_seed: u64,
    pub speed_kmh: f64,
    pub sample_rate_hz: f64,
    pub noise: NoiseSpec,
}

/// Bridge-vibration amplitude of the contaminated scenario [m/s^2].
pub const CONTAMINATED_BRIDGE_AMP: f64 = 0.05;

impl Scenario {
    /// Class A, 40.5 m, 10 km/h, 200 Hz, 1e-3 sensor noise, no bridge.
    pub fn clean() -> Self {
        Self {
            vehicle: HalfCarParams::default(),
            class: RoughnessClass::A,
            length_m: 40.5,
            spacing_m: 0.01,
            profile_seed: 7,
            speed_kmh: 10.0,
            sample_rate_hz: 200.0,
            noise: NoiseSpec {
                measurement_std: vec![1e-3],
                bridge_amp: 0.0,
                bridge_freqs: vec![2.5, 3.4],
                seed: 11,
            },
        }
    }

    /// As [`Scenario::clean`] at 20 km/h with bridge sinusoids added.
    pub fn contaminated() -> Self {
        let mut s = Self::clean();
        s.speed_kmh = 20.0;
        s.noise.bridge_amp = CONTAMINATED_BRIDGE_AMP;
        s
    }

    pub fn speed(&self) -> f64 {
        self.speed_kmh / 3.6
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.sample_rate_hz
    }

    pub fn drive(&self) -> Result<Drive> {
        Drive::new(self.speed(), self.dt(), self.vehicle.wheelbase())
    }

    pub fn validate(&self) -> Result<()> {
        self.vehicle.validate()?;
        self.noise.validate()?;
        if !(self.sample_rate_hz.is_finite() && self.sample_rate_hz > 0.0) {
            return Err(Error::invalid("sample rate must be positive"));
        }
        self.drive()?;
        Ok(())
    }

    pub fn profile(&self) -> Result<RoadProfile> {
        generate_iso_profile(self.class, self.length_m, self.spacing_m, self.profile_seed)
    }

    /// Generate the road, simulate the drive and build the estimator model.
    pub fn realise(&self) -> Result<ScenarioData> {
        self.validate()?;
        let profile = self.profile()?;
        let sim = simulate_response(
            &self.vehicle,
            &profile,
            &self.drive()?,
            &self.noise,
            &SimulationOptions::default(),
        )?;
        let system = DiscreteSystem::half_car(&self.vehicle, &SelectionMatrix::accelerations(), self.dt())?;
        Ok(ScenarioData {
            scenario: self.clone(),
            profile,
            sim,
            system,
        })
    }
}

/// Everything produced by [`Scenario::realise`].
#[derive(Debug, Clone)]
pub struct ScenarioData {
    pub scenario: Scenario,
    pub profile: RoadProfile,
    pub sim: Simulation,
    pub system: DiscreteSystem,
}
