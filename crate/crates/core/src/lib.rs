//! Road-roughness identification from vehicle axle accelerations.
//!
//! A half-car model driven by the road heights under both axles is observed
//! through bounce and pitch accelerations only. The windowed universal
//! smoother recovers the road inputs jointly with the vehicle state,
//! regularising the input inversion by truncated SVD. A dual Kalman filter
//! and a minimum-variance unbiased smoother serve as baselines, and a
//! forward simulator supplies data with known ground truth.
//!
//! ```no_run
//! use roadid_core::{run_us, Scenario, TruncationPolicy, NoiseConfig, profile_nrmse};
//!
//! let data = Scenario::clean().realise()?;
//! let noise = NoiseConfig { qx: 1e-8, r_diag: vec![1e-6], qr: 0.0 };
//! let est = run_us(&data.system, &data.sim.measurements, &noise, TruncationPolicy::count(201), 100)?;
//! let [front, rear] = profile_nrmse(&data.sim.inputs, &est, data.system.dt)?;
//! println!("NRMSE front {front:.3} rear {rear:.3}");
//! # Ok::<(), roadid_core::Error>(())
//! ```

pub mod error;
pub mod estimators;
pub mod evaluation;
pub mod io;
pub mod model;
pub mod numerics;
pub mod profile;
pub mod simulator;

pub use error::{Error, Result};
pub use estimators::{
    run_dkf, run_mvus, run_us, us_step, EstimateSeries, EstimatorSpec, ExtendedSystem, NoiseConfig,
    Smoother, SmootherState, StepDiagnostics,
};
pub use evaluation::{
    evaluate, grid_search, nrmse, profile_nrmse, tuning_error, window_sweep, EvaluationReport,
    GridResult, Scenario, ScenarioData, SurfacePoint, TuningGrid,
};
pub use model::{
    assemble_continuous, build_observation, build_vehicle_matrices, discretize, ContinuousSystem,
    DiscreteDynamics, DiscreteSystem, HalfCarParams, SelectionMatrix, VehicleMatrices,
};
pub use numerics::{expm, periodogram_spatial, tsvd_pinv, SpatialSpectrum, TruncationPolicy};
pub use profile::{
    generate_iso_profile, load_profile_csv, profile_to_inputs, Drive, InputSeries, RoadProfile,
    RoughnessClass,
};
pub use simulator::{
    bandpass, rigid_body_transform, simulate_inputs, simulate_response, MeasurementSeries,
    NoiseSpec, Simulation, SimulationOptions,
};
