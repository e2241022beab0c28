use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use roadid_core::evaluation::{write_sweep_csv, SweepRow};
use roadid_core::simulator::SimulationOptions;
use roadid_core::{
    evaluate, generate_iso_profile, grid_search, load_profile_csv, periodogram_spatial, profile_nrmse,
    simulate_response, tuning_error, window_sweep, DiscreteSystem, Drive, EstimateSeries, EstimatorSpec,
    InputSeries, MeasurementSeries, NoiseConfig, RoadProfile, Simulation, TruncationPolicy,
};
use serde_json::json;

use crate::config::{EstimatorKind, ProfileSource, RunConfig};
use crate::svg::{line_chart, Chart, Series};
use crate::CliError;

pub struct Context {
    pub cfg: RunConfig,
    pub out: PathBuf,
    pub workers: usize,
    pub svg: bool,
    pub argv: Vec<String>,
}

/// Files written by one command, in order.
struct Outputs<'a> {
    dir: &'a Path,
    files: Vec<String>,
}

impl<'a> Outputs<'a> {
    fn new(dir: &'a Path) -> Self {
        Self { dir, files: Vec::new() }
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_owned());
        self.dir.join(name)
    }

    fn text(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.path(name);
        std::fs::write(&path, contents).map_err(|e| CliError::run(format!("cannot write {}: {e}", path.display())))
    }

    fn chart(&mut self, enabled: bool, name: &str, chart: &Chart, series: &[Series]) -> Result<(), CliError> {
        if enabled {
            self.text(name, &line_chart(chart, series))?;
        }
        Ok(())
    }

    /// Write `manifest.json` last, listing everything written before it.
    fn manifest(mut self, ctx: &Context, command: &str, extra: serde_json::Value) -> Result<(), CliError> {
        let path = self.path("manifest.json");
        let doc = json!({
            "tool": env!("CARGO_PKG_NAME"),
            "version": env!("CARGO_PKG_VERSION"),
            "command": command,
            "argv": ctx.argv,
            "workers": ctx.workers,
            "config": ctx.cfg,
            "outputs": self.files,
            "results": extra,
        });
        let text = serde_json::to_string_pretty(&doc).map_err(CliError::run)?;
        std::fs::write(&path, text + "\n").map_err(|e| CliError::run(format!("cannot write {}: {e}", path.display())))
    }
}

struct Realised {
    profile: RoadProfile,
    sim: Simulation,
    system: DiscreteSystem,
}

fn realise(cfg: &RunConfig) -> Result<Realised, CliError> {
    let profile = match &cfg.scenario.profile {
        ProfileSource::Generated {
            class,
            length_m,
            spacing_m,
            seed,
        } => generate_iso_profile(*class, *length_m, *spacing_m, *seed).map_err(CliError::config)?,
        ProfileSource::Csv { path } => load_profile_csv(path)?,
    };
    let drive = Drive::new(cfg.speed(), cfg.dt(), cfg.vehicle.wheelbase()).map_err(CliError::config)?;
    let options = SimulationOptions {
        selection: cfg.selection()?,
        ..Default::default()
    };
    let sim = simulate_response(&cfg.vehicle, &profile, &drive, &cfg.scenario.noise, &options)?;
    let system = DiscreteSystem::half_car(&cfg.vehicle, &cfg.selection()?, cfg.dt())?;
    Ok(Realised { profile, sim, system })
}

fn pool(workers: usize) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(CliError::run)
}

fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
    let err = |e: csv::Error| CliError::run(format!("cannot write {}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    w.write_record(header).map_err(err)?;
    for row in rows {
        w.write_record(row).map_err(err)?;
    }
    w.flush().map_err(|e| CliError::run(format!("cannot write {}: {e}", path.display())))
}

fn num(v: Option<f64>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

pub fn simulate(ctx: &Context) -> Result<(), CliError> {
    let data = realise(&ctx.cfg)?;
    let mut out = Outputs::new(&ctx.out);
    data.profile.write_csv(out.path("profile.csv"))?;
    data.sim.inputs.write_csv(out.path("inputs.csv"))?;
    data.sim.measurements.write_csv(out.path("measurements.csv"))?;
    out.chart(
        ctx.svg,
        "inputs.svg",
        &Chart {
            title: "Wheel inputs",
            x_label: "time [s]",
            y_label: "height [m]",
            log_x: false,
            log_y: false,
        },
        &[
            Series {
                name: "front",
                x: &data.sim.inputs.times,
                y: &data.sim.inputs.r_front,
            },
            Series {
                name: "rear",
                x: &data.sim.inputs.times,
                y: &data.sim.inputs.r_rear,
            },
        ],
    )?;
    let samples = data.sim.measurements.len();
    eprintln!("simulate: {samples} samples written to {}", ctx.out.display());
    out.manifest(ctx, "simulate", json!({ "samples": samples }))
}

/// Per-wheel spectra of the estimate and, when known, the truth.
fn write_spectra(
    out: &mut Outputs,
    name: &str,
    est: &EstimateSeries,
    truth: Option<&InputSeries>,
    spacing: f64,
) -> Result<(), CliError> {
    let n = est.len();
    let mut headers = vec!["freq_cpm".to_owned()];
    let mut cols: Vec<Vec<f64>> = Vec::new();
    for (c, wheel) in ["front", "rear"].iter().enumerate() {
        let s = periodogram_spatial(&est.input(c), spacing)?;
        if cols.is_empty() {
            cols.push(s.freq.clone());
        }
        headers.push(format!("{wheel}_est"));
        cols.push(s.power);
        if let Some(t) = truth {
            let series = if c == 0 { &t.r_front } else { &t.r_rear };
            headers.push(format!("{wheel}_true"));
            cols.push(periodogram_spatial(&series[..n], spacing)?.power);
        }
    }
    let h: Vec<&str> = headers.iter().map(String::as_str).collect();
    let refs: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
    roadid_core::io::write_columns(&out.path(name), &h, &refs)?;
    Ok(())
}

pub fn estimate(
    ctx: &Context,
    measurements: &Path,
    truth: Option<&Path>,
    kind: Option<EstimatorKind>,
) -> Result<(), CliError> {
    let cfg = &ctx.cfg;
    let kind = kind.unwrap_or(cfg.estimator.kind);
    let meas = MeasurementSeries::load_csv(measurements, (cfg.vehicle.d_1, cfg.vehicle.d_2))?;
    let truth = truth.map(|p| InputSeries::load_csv(p, cfg.speed())).transpose()?;
    if let Some(t) = &truth {
        if t.len() < meas.len() {
            return Err(CliError::run(format!(
                "truth has {} samples, measurements {}",
                t.len(),
                meas.len()
            )));
        }
    }
    let system = DiscreteSystem::half_car(&cfg.vehicle, &cfg.selection()?, meas.dt)?;
    let spec = cfg.estimator.spec(kind, system.inputs());
    let start = Instant::now();
    let est = spec.run(&system, &meas, &cfg.noise)?;
    let wall = start.elapsed().as_secs_f64();

    let mut out = Outputs::new(&ctx.out);
    est.write_csv(out.path("estimate.csv"))?;
    roadid_core::io::write_columns(
        &out.path("cov_trace.csv"),
        &["t_s", "trace_Pr", "trace_P"],
        &[&est.times, &est.trace_pr, &est.trace_p],
    )?;
    write_spectra(&mut out, "spectrum.csv", &est, truth.as_ref(), cfg.speed() * meas.dt)?;
    let mut results = json!({ "estimator": kind.name(), "steps": est.len(), "wall_time_s": wall });
    if let Some(t) = &truth {
        let report = evaluate(&system, &meas, &est, Some(t), cfg.speed(), wall)?;
        out.text("report.json", &(serde_json::to_string_pretty(&report).map_err(CliError::run)? + "\n"))?;
        eprintln!(
            "estimate: {} NRMSE front {:.4} rear {:.4} mean {:.4}",
            kind.name(),
            report.nrmse_front.unwrap_or(f64::NAN),
            report.nrmse_rear.unwrap_or(f64::NAN),
            report.nrmse_mean.unwrap_or(f64::NAN)
        );
        results["report"] = serde_json::to_value(&report).map_err(CliError::run)?;
    }
    if ctx.svg {
        let n = est.len();
        for (c, wheel) in ["front", "rear"].iter().enumerate() {
            let estimate = est.input(c);
            let mut series = vec![Series {
                name: "estimate",
                x: &est.times,
                y: &estimate,
            }];
            let true_series = truth.as_ref().map(|t| if c == 0 { &t.r_front[..n] } else { &t.r_rear[..n] });
            if let Some(y) = true_series {
                series.insert(0, Series { name: "true", x: &est.times, y });
            }
            let title = format!("{wheel} wheel profile");
            out.chart(
                true,
                &format!("profile_{wheel}.svg"),
                &Chart {
                    title: &title,
                    x_label: "time [s]",
                    y_label: "height [m]",
                    log_x: false,
                    log_y: false,
                },
                &series,
            )?;
        }
    }
    out.manifest(ctx, "estimate", results)
}

pub fn tune(ctx: &Context, kind: Option<EstimatorKind>, measurements: Option<&Path>) -> Result<(), CliError> {
    let cfg = &ctx.cfg;
    let kind = kind.unwrap_or(cfg.estimator.kind);
    let (system, meas, truth) = match measurements {
        Some(path) => {
            let meas = MeasurementSeries::load_csv(path, (cfg.vehicle.d_1, cfg.vehicle.d_2))?;
            let system = DiscreteSystem::half_car(&cfg.vehicle, &cfg.selection()?, meas.dt)?;
            (system, meas, None)
        }
        None => {
            let data = realise(cfg)?;
            (data.system, data.sim.measurements, Some(data.sim.inputs))
        }
    };
    let window = cfg.estimator.window;
    let grid = cfg.tune.grid(window, system.inputs())?;
    let (points, second) = match kind {
        EstimatorKind::Us => (grid.us_points(), "k"),
        EstimatorKind::Dkf => (grid.dkf_points(), "log10_qr"),
        EstimatorKind::Mvus => (grid.qx_exponents.iter().map(|&q| (q, window as f64)).collect(), "N"),
    };
    let config_at = |qx: f64, b: f64| -> (EstimatorSpec, NoiseConfig) {
        let mut noise = cfg.noise.clone();
        noise.qx = 10f64.powf(qx);
        let spec = match kind {
            EstimatorKind::Us => EstimatorSpec::Us {
                window,
                truncation: TruncationPolicy::count(b as usize),
            },
            EstimatorKind::Dkf => {
                noise.qr = 10f64.powf(b);
                EstimatorSpec::Dkf
            }
            EstimatorKind::Mvus => EstimatorSpec::Mvus { window },
        };
        (spec, noise)
    };
    eprintln!("tune: {} {} points on {} workers", points.len(), kind.name(), ctx.workers);
    let result = grid_search(&points, ctx.workers, |a, b| {
        let (spec, noise) = config_at(a, b);
        let est = spec.run(&system, &meas, &noise)?;
        Ok(tuning_error(&system, &meas, &est)?.0)
    })?;
    let failed = result.surface.iter().filter(|p| p.sigma_e.is_infinite()).count();

    let mut out = Outputs::new(&ctx.out);
    result.write_csv(out.path("surface.csv"), second)?;
    let best = result.best;
    let (spec, noise) = config_at(best.log10_qx, best.second);
    let nrmse = match &truth {
        Some(t) => Some(profile_nrmse(t, &spec.run(&system, &meas, &noise)?, system.dt)?),
        None => None,
    };
    let row = vec![
        kind.name().to_owned(),
        window.to_string(),
        best.log10_qx.to_string(),
        best.second.to_string(),
        best.sigma_e.to_string(),
        num(nrmse.map(|v| v[0])),
        num(nrmse.map(|v| v[1])),
        num(nrmse.map(|v| 0.5 * (v[0] + v[1]))),
    ];
    write_table(
        &out.path("best.csv"),
        &["estimator", "N", "log10_qx", second, "sigma_e", "nrmse_front", "nrmse_rear", "nrmse_mean"],
        &[row],
    )?;
    if ctx.svg {
        // Lowest tuning error at each Qx.
        let mut qx: Vec<f64> = result.surface.iter().map(|p| p.log10_qx).collect();
        qx.dedup();
        let floor: Vec<f64> = qx
            .iter()
            .map(|&q| {
                result
                    .surface
                    .iter()
                    .filter(|p| p.log10_qx == q)
                    .map(|p| p.sigma_e)
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        out.chart(
            true,
            "sigma_e.svg",
            &Chart {
                title: "Lowest tuning error per process-noise level",
                x_label: "log10 Qx",
                y_label: "sigma_E",
                log_x: false,
                log_y: true,
            },
            &[Series {
                name: kind.name(),
                x: &qx,
                y: &floor,
            }],
        )?;
    }
    eprintln!(
        "tune: best log10 Qx {} {second} {} sigma_E {:.4} ({failed} of {} points failed)",
        best.log10_qx,
        best.second,
        best.sigma_e,
        result.surface.len()
    );
    out.manifest(
        ctx,
        "tune",
        json!({ "best": best, "failed_points": failed, "nrmse_at_best": nrmse }),
    )
}

pub fn sweep(ctx: &Context, windows: &[usize]) -> Result<(), CliError> {
    let cfg = &ctx.cfg;
    let windows = if windows.is_empty() { &cfg.sweep.windows[..] } else { windows };
    let data = realise(cfg)?;
    let m = data.system.inputs();
    // A fixed count cannot follow the window size; a tolerance can.
    let truncation = |n: usize| match cfg.estimator.truncation {
        Some(t @ TruncationPolicy::Tolerance { .. }) => t,
        _ => TruncationPolicy::count(m * (n + 1) - 1),
    };
    // One window at a time, so that the timings are comparable.
    let rows: Vec<SweepRow> = window_sweep(windows, |n| {
        eprintln!("sweep: N = {n}");
        let est = roadid_core::run_us(&data.system, &data.sim.measurements, &cfg.noise, truncation(n), n)?;
        let [f, r] = profile_nrmse(&data.sim.inputs, &est, data.system.dt)?;
        Ok(0.5 * (f + r))
    })?;
    for row in &rows {
        if let Some(e) = &row.error {
            eprintln!("sweep: N = {} failed: {e}", row.window);
        }
    }
    let mut out = Outputs::new(&ctx.out);
    write_sweep_csv(&rows, out.path("sweep.csv"))?;
    let n: Vec<f64> = rows.iter().map(|r| r.window as f64).collect();
    let e: Vec<f64> = rows.iter().map(|r| r.nrmse).collect();
    let t: Vec<f64> = rows.iter().map(|r| r.wall_time_s).collect();
    out.chart(
        ctx.svg,
        "sweep_nrmse.svg",
        &Chart {
            title: "Accuracy against window length",
            x_label: "N",
            y_label: "NRMSE",
            log_x: false,
            log_y: false,
        },
        &[Series { name: "US", x: &n, y: &e }],
    )?;
    out.chart(
        ctx.svg,
        "sweep_time.svg",
        &Chart {
            title: "Run time against window length",
            x_label: "N",
            y_label: "wall time [s]",
            log_x: false,
            log_y: false,
        },
        &[Series { name: "US", x: &n, y: &t }],
    )?;
    let ok = rows.iter().filter(|r| r.error.is_none()).count();
    out.manifest(ctx, "sweep", serde_json::to_value(&rows).map_err(CliError::run)?)?;
    if ok == 0 {
        return Err(CliError::run("every window length failed"));
    }
    Ok(())
}

struct Run {
    kind: EstimatorKind,
    wall: f64,
    result: Result<EstimateSeries, roadid_core::Error>,
}

pub fn compare(ctx: &Context) -> Result<(), CliError> {
    let cfg = &ctx.cfg;
    let data = realise(cfg)?;
    let (sys, meas, truth) = (&data.system, &data.sim.measurements, &data.sim.inputs);
    let runs: Vec<Run> = pool(ctx.workers)?.install(|| {
        EstimatorKind::ALL
            .par_iter()
            .map(|&kind| {
                let start = Instant::now();
                let result = cfg.estimator.spec(kind, sys.inputs()).run(sys, meas, &cfg.noise);
                Run {
                    kind,
                    wall: start.elapsed().as_secs_f64(),
                    result,
                }
            })
            .collect()
    });

    let mut summary = Vec::new();
    let mut ok: Vec<(&str, &EstimateSeries)> = Vec::new();
    for run in &runs {
        let name = run.kind.name();
        match &run.result {
            Ok(est) => {
                let report = evaluate(sys, meas, est, Some(truth), cfg.speed(), run.wall);
                let (nf, nr, nm, se) = match &report {
                    Ok(r) => (r.nrmse_front, r.nrmse_rear, r.nrmse_mean, Some(r.sigma_e)),
                    Err(_) => (None, None, None, None),
                };
                let detail = report.err().map(|e| e.to_string()).unwrap_or_default();
                summary.push(vec![
                    name.to_owned(),
                    "OK".to_owned(),
                    num(nf),
                    num(nr),
                    num(nm),
                    num(se),
                    run.wall.to_string(),
                    detail,
                ]);
                ok.push((name, est));
            }
            Err(e) => {
                eprintln!("compare: {name} failed: {e}");
                summary.push(vec![
                    name.to_owned(),
                    "FAILED".to_owned(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    run.wall.to_string(),
                    e.to_string(),
                ]);
            }
        }
    }
    let mut out = Outputs::new(&ctx.out);
    write_table(
        &out.path("summary.csv"),
        &["estimator", "status", "nrmse_front", "nrmse_rear", "nrmse_mean", "sigma_e", "wall_time_s", "detail"],
        &summary,
    )?;
    if ok.is_empty() {
        out.manifest(ctx, "compare", json!({ "succeeded": 0 }))?;
        return Err(CliError::run("every estimator failed"));
    }

    let n = ok.iter().map(|(_, e)| e.len()).min().unwrap_or(0);
    let times = &truth.times[..n];
    let spacing = cfg.speed() * sys.dt;
    for (c, wheel) in ["front", "rear"].iter().enumerate() {
        let true_series = if c == 0 { &truth.r_front[..n] } else { &truth.r_rear[..n] };
        // The rear axle trails the front by the wheelbase.
        let offset = if c == 0 { 0.0 } else { -cfg.vehicle.wheelbase() };
        let distance: Vec<f64> = times.iter().map(|t| t * cfg.speed() + offset).collect();
        let estimates: Vec<Vec<f64>> = ok.iter().map(|(_, e)| e.input(c)[..n].to_vec()).collect();

        let mut headers = vec!["distance_m", "t_s", "true"];
        headers.extend(ok.iter().map(|(name, _)| *name));
        let mut cols: Vec<&[f64]> = vec![&distance, times, true_series];
        cols.extend(estimates.iter().map(Vec::as_slice));
        roadid_core::io::write_columns(&out.path(&format!("overlay_{wheel}.csv")), &headers, &cols)?;

        let truth_spec = periodogram_spatial(true_series, spacing)?;
        let specs = estimates
            .iter()
            .map(|e| periodogram_spatial(e, spacing).map(|s| s.power))
            .collect::<Result<Vec<_>, _>>()?;
        let mut headers = vec!["freq_cpm", "true"];
        headers.extend(ok.iter().map(|(name, _)| *name));
        let mut cols: Vec<&[f64]> = vec![&truth_spec.freq, &truth_spec.power];
        cols.extend(specs.iter().map(Vec::as_slice));
        roadid_core::io::write_columns(&out.path(&format!("spectra_{wheel}.csv")), &headers, &cols)?;

        if ctx.svg {
            let mut series = vec![Series {
                name: "true",
                x: &distance,
                y: true_series,
            }];
            series.extend(ok.iter().zip(&estimates).map(|((name, _), e)| Series { name, x: &distance, y: e }));
            let title = format!("{wheel} wheel profile");
            out.chart(
                true,
                &format!("overlay_{wheel}.svg"),
                &Chart {
                    title: &title,
                    x_label: "distance [m]",
                    y_label: "height [m]",
                    log_x: false,
                    log_y: false,
                },
                &series,
            )?;
            let mut series = vec![Series {
                name: "true",
                x: &truth_spec.freq,
                y: &truth_spec.power,
            }];
            series.extend(ok.iter().zip(&specs).map(|((name, _), p)| Series {
                name,
                x: &truth_spec.freq,
                y: p,
            }));
            let title = format!("{wheel} wheel spectrum");
            out.chart(
                true,
                &format!("spectra_{wheel}.svg"),
                &Chart {
                    title: &title,
                    x_label: "spatial frequency [cycles/m]",
                    y_label: "power [m^2]",
                    log_x: true,
                    log_y: true,
                },
                &series,
            )?;
        }
    }
    let traces: Vec<&[f64]> = ok.iter().map(|(_, e)| &e.trace_pr[..n]).collect();
    let mut headers = vec!["t_s"];
    headers.extend(ok.iter().map(|(name, _)| *name));
    let mut cols: Vec<&[f64]> = vec![times];
    cols.extend(traces.iter().copied());
    roadid_core::io::write_columns(&out.path("cov_trace.csv"), &headers, &cols)?;
    if ctx.svg {
        let series: Vec<Series> = ok
            .iter()
            .zip(&traces)
            .map(|((name, _), y)| Series { name, x: times, y })
            .collect();
        out.chart(
            true,
            "cov_trace.svg",
            &Chart {
                title: "Input covariance trace",
                x_label: "time [s]",
                y_label: "trace Pr [m^2]",
                log_x: false,
                log_y: true,
            },
            &series,
        )?;
    }
    for row in &summary {
        eprintln!("compare: {:<5} {:<7} NRMSE mean {}", row[0], row[1], row[4]);
    }
    out.manifest(ctx, "compare", json!({ "succeeded": ok.len(), "summary": summary }))
}
