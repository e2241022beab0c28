mod common;

use common::hand_model;
use nalgebra::{Matrix2, Vector2};
use proptest::prelude::*;
use roadid_core::simulator::{bandpass, highpass, mechanical_energy, rigid_body_transform};
use roadid_core::{
    build_vehicle_matrices, generate_iso_profile, simulate_inputs,
    simulate_response, Drive, HalfCarParams, InputSeries, MeasurementSeries, NoiseSpec,
    RoadProfile, RoughnessClass, SelectionMatrix, SimulationOptions,
};

fn silent() -> NoiseSpec {
    NoiseSpec {
        measurement_std: vec![0.0],
        ..Default::default()
    }
}

fn constant_inputs(front: f64, rear: f64, samples: usize, dt: f64) -> InputSeries {
    InputSeries {
        times: (0..samples).map(|k| k as f64 * dt).collect(),
        r_front: vec![front; samples],
        r_rear: vec![rear; samples],
        speed: 1.0,
    }
}

#[test]
fn step_on_front_settles_to_static_equilibrium() {
    // The rear wheel stays at rest. Removing the rear damper instead leaves a
    // pitch-dominated mode that rings for minutes.
    let p = HalfCarParams::default();
    let r = Vector2::new(0.01, 0.0);
    let mut inputs = constant_inputs(r[0], r[1], 12_000, 0.005);
    inputs.r_front[0] = 0.0;
    let opts = SimulationOptions {
        selection: SelectionMatrix::from_channels(2, &[0, 1]).unwrap(),
        ..Default::default()
    };
    let sim = simulate_inputs(&p, &inputs, &silent(), &opts).unwrap();

    let hand = hand_model(&p, 0.005);
    let kv = Matrix2::new(hand.kv[0][0], hand.kv[0][1], hand.kv[1][0], hand.kv[1][1]);
    let kr = Matrix2::new(hand.kr[0][0], hand.kr[0][1], hand.kr[1][0], hand.kr[1][1]);
    let u = kv.lu().solve(&(kr * r)).unwrap();
    let last = sim.measurements.y.row(sim.measurements.len() - 1);
    assert!((last[0] - u[0]).abs() < 1e-9 * r[0], "{} vs {}", last[0], u[0]);
    assert!((last[1] - u[1]).abs() < 1e-9 * r[0], "{} vs {}", last[1], u[1]);
}

#[test]
fn per_channel_noise_levels() {
    let inputs = constant_inputs(0.0, 0.0, 10_000, 0.005);
    let noise = NoiseSpec {
        measurement_std: vec![0.01, 0.002],
        seed: 31,
        ..Default::default()
    };
    let sim = simulate_inputs(&HalfCarParams::default(), &inputs, &noise, &Default::default()).unwrap();
    for (c, expected) in [(0, 0.01), (1, 0.002)] {
        let col = sim.measurements.y.column(c);
        let mean = col.mean();
        let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (col.len() - 1) as f64).sqrt();
        assert!((sd / expected - 1.0).abs() < 0.1, "channel {c}: {sd}");
    }
}

#[test]
fn bridge_sinusoids_add_a_narrowband_line() {
    let inputs = constant_inputs(0.0, 0.0, 4000, 0.005);
    let noise = NoiseSpec {
        measurement_std: vec![0.0],
        bridge_amp: 0.05,
        bridge_freqs: vec![2.5],
        seed: 3,
    };
    let sim = simulate_inputs(&HalfCarParams::default(), &inputs, &noise, &Default::default()).unwrap();
    for c in 0..2 {
        let col: Vec<f64> = sim.measurements.y.column(c).iter().copied().collect();
        let rms = (col.iter().map(|v| v * v).sum::<f64>() / col.len() as f64).sqrt();
        assert!((rms - 0.05 / 2f64.sqrt()).abs() < 1e-3 * 0.05, "rms {rms}");
        // Removing the band around the line leaves nothing.
        let rest = bandpass(&col, 200.0, 25.0, 90.0).unwrap();
        assert!(rest[500..3500].iter().all(|v| v.abs() < 1e-3));
    }
}

#[test]
fn halving_the_substep_does_not_change_outputs() {
    let profile = generate_iso_profile(RoughnessClass::A, 20.0, 0.01, 4).unwrap();
    let drive = Drive::new(10.0 / 3.6, 0.005, 2.72).unwrap();
    let run = |substeps| {
        let opts = SimulationOptions {
            substeps,
            ..Default::default()
        };
        simulate_response(&HalfCarParams::default(), &profile, &drive, &silent(), &opts).unwrap()
    };
    let (a, b) = (run(10), run(20));
    let diff = (&a.measurements.y - &b.measurements.y).amax();
    assert!(diff < 1e-8 * b.measurements.y.amax(), "relative change {}", diff / b.measurements.y.amax());
}

#[test]
fn seeded_runs_repeat_and_seeds_differ() {
    let profile = generate_iso_profile(RoughnessClass::B, 10.0, 0.01, 1).unwrap();
    let drive = Drive::new(3.0, 0.005, 2.72).unwrap();
    let noise = |seed| NoiseSpec {
        seed,
        bridge_amp: 0.01,
        ..Default::default()
    };
    let p = HalfCarParams::default();
    let a = simulate_response(&p, &profile, &drive, &noise(5), &Default::default()).unwrap();
    let b = simulate_response(&p, &profile, &drive, &noise(5), &Default::default()).unwrap();
    let c = simulate_response(&p, &profile, &drive, &noise(6), &Default::default()).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.measurements, c.measurements);
    assert_eq!(a.clean, c.clean);
}

#[test]
fn outputs_are_the_equation_of_motion() {
    // Clean accelerations equal M^-1 (K_r r + C_r ṙ - K_v u - C_v u̇) at the
    // recorded states, with ṙ from the profile slope.
    let p = HalfCarParams::default();
    let profile = RoadProfile::new(vec![0.0, 5.0, 30.0], vec![0.0, 0.02, -0.01], "kinked").unwrap();
    let drive = Drive::new(2.0, 0.005, 2.72).unwrap();
    let sim = simulate_response(&p, &profile, &drive, &silent(), &Default::default()).unwrap();
    let hand = hand_model(&p, 1.0);
    let k = 1500;
    let x = sim.states.row(k);
    let t = k as f64 * 0.005;
    let slope = |s: f64| if s < 5.0 { 0.004 } else { -0.0012 };
    let (sf, sr) = (2.0 * t, 2.0 * t - 2.72);
    let r = [sim.inputs.r_front[k], sim.inputs.r_rear[k]];
    let rd = [slope(sf) * 2.0, slope(sr) * 2.0];
    for row in 0..2 {
        let inv = 1.0 / hand.mass[row][row];
        let mut acc = 0.0;
        for col in 0..2 {
            acc += hand.kr[row][col] * r[col] + hand.cr[row][col] * rd[col];
            acc -= hand.kv[row][col] * x[col] + hand.cv[row][col] * x[2 + col];
        }
        let got = sim.clean[(k, row)];
        assert!((got - acc * inv).abs() < 1e-10 * got.abs().max(1e-3), "{got} vs {}", acc * inv);
    }
}

#[test]
fn filters_reject_dc_and_keep_length() {
    let offset = 2.5;
    let y = bandpass(&vec![offset; 6000], 200.0, 0.1, 50.0).unwrap();
    assert_eq!(y.len(), 6000);
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    assert!(mean.abs() < 1e-3 * offset, "mean {mean}");
    assert!(highpass(&[], 200.0, 1.0).unwrap().is_empty());
}

#[test]
fn raw_four_sensor_files_use_the_rigid_body_transform() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("raw.csv");
    std::fs::write(&path, "t_s,a1,a2,a3,a4\n0,1,3,2,2\n0.005,0.5,0.5,-1,-1\n0.01,0,0,0,0\n").unwrap();
    let m = MeasurementSeries::load_csv(&path, (0.82, 1.90)).unwrap();
    assert_eq!(m.channels(), 2);
    let (b, p) = rigid_body_transform(2.0, 2.0, 0.82, 1.90).unwrap();
    assert_eq!((m.y[(0, 0)], m.y[(0, 1)]), (b, p));
    assert!((m.y[(1, 0)] - (1.90 * 0.5 - 0.82) / 2.72).abs() < 1e-15);
    assert!((m.y[(1, 1)] - 1.5 / 2.72).abs() < 1e-15);
    assert!((m.dt - 0.005).abs() < 1e-15);

    std::fs::write(&path, "time,a\n0,1\n").unwrap();
    assert!(MeasurementSeries::load_csv(&path, (0.82, 1.90)).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn free_vibration_loses_energy(
        state in proptest::array::uniform4(-0.05..0.05f64),
        c_1 in 0.0..2e4f64,
        c_2 in 0.0..2e4f64,
    ) {
        let p = HalfCarParams { c_1, c_2, ..Default::default() };
        let opts = SimulationOptions { initial_state: state, ..Default::default() };
        let sim = simulate_inputs(&p, &constant_inputs(0.0, 0.0, 600, 0.005), &silent(), &opts).unwrap();
        let vm = build_vehicle_matrices(&p).unwrap();
        let energy: Vec<f64> = (0..sim.states.nrows())
            .map(|k| {
                let r = sim.states.row(k);
                mechanical_energy(&vm, &[r[0], r[1], r[2], r[3]])
            })
            .collect();
        let scale = energy[0].max(f64::MIN_POSITIVE);
        for w in energy.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-10 * scale, "{} -> {}", w[0], w[1]);
        }
    }
}

