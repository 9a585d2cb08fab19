//! Command implementations.

use std::path::Path;
use std::time::Instant;

use scatter1d::dataprep::{ingest_external, write_scatter_csv};
use scatter1d::forward::{add_noise, origin_field_sweep, synthesize_data, Profile, ScatterData};
use scatter1d::grid::SpatialGrid;
use scatter1d::pipeline::{invert, l2_error, peak, InversionOutput};
use scatter1d::verify::{
    check_carleman, check_convexity_gap, check_lipschitz, noise_sweep, CheckContext, SweepConfig,
};

use crate::config::ExperimentConfig;
use crate::output::{f, header_comments, write_csv, write_json};
use crate::{VerifyKind, EXIT_CHECK_FAILED, EXIT_NUMERICAL, EXIT_OK};

type CmdResult = Result<i32, scatter1d::Error>;

fn ensure_dir(dir: &Path) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)
}

/// Forward solve: writes `data.csv` (noiseless and noisy data side by side),
/// `measurement.csv` (noisy data in the ingestion format) and `spectrum.csv`
/// (|u(0,k)| over a wide sweep).
pub fn simulate(config: &ExperimentConfig) -> CmdResult {
    let grid = config.spatial_grid();
    let kgrid = config.wavenumber_grid();
    let profile = Profile::Step(config.step_target());
    let clean = synthesize_data(&profile, &grid, &kgrid, config.forward.quad_n)?;
    let noisy = add_noise(&clean, config.noise.level, config.noise.seed);

    let dir = Path::new(&config.output.dir);
    ensure_dir(dir)?;
    let comments = header_comments(&config.echo(), config.noise.seed);

    let rows: Vec<Vec<String>> = kgrid
        .nodes()
        .iter()
        .enumerate()
        .map(|(m, &k)| {
            vec![
                f(k),
                f(clean.g0[m].re),
                f(clean.g0[m].im),
                f(noisy.g0[m].re),
                f(noisy.g0[m].im),
            ]
        })
        .collect();
    write_csv(
        &dir.join("data.csv"),
        &comments,
        &["k", "re_g0", "im_g0", "re_g0_noisy", "im_g0_noisy"],
        &rows,
    )?;

    write_scatter_csv(
        &dir.join("measurement.csv"),
        kgrid.nodes(),
        &noisy.g0,
        &comments,
    )?;

    let sweep: Vec<f64> = {
        let mut ks = Vec::new();
        let mut k = 0.1;
        while k <= config.forward.sweep_k_max + 1e-12 {
            ks.push(k);
            k += 0.05;
        }
        ks
    };
    let moduli = origin_field_sweep(&profile, &grid, &sweep, config.forward.quad_n)?;
    let rows: Vec<Vec<String>> = sweep
        .iter()
        .zip(&moduli)
        .map(|(&k, &a)| vec![f(k), f(a)])
        .collect();
    write_csv(
        &dir.join("spectrum.csv"),
        &comments,
        &["k", "abs_u0k"],
        &rows,
    )?;
    println!(
        "simulate: wrote data.csv, measurement.csv, spectrum.csv to {}",
        dir.display()
    );
    Ok(EXIT_OK)
}

fn obtain_data(
    config: &ExperimentConfig,
    data_path: Option<&Path>,
    calibration: Option<f64>,
    grid: &SpatialGrid,
    kgrid: &scatter1d::grid::WavenumberGrid,
) -> Result<ScatterData, scatter1d::Error> {
    match data_path {
        Some(path) => {
            let cal = calibration
                .or(config.data.as_ref().map(|d| d.calibration))
                .unwrap_or(1.0);
            let mut data = ingest_external(path, cal, grid, kgrid)?;
            // noise level drives the delta-rule tail weight
            data.noise_level = config.noise.level;
            Ok(data)
        }
        None => {
            let profile = Profile::Step(config.step_target());
            let clean = synthesize_data(&profile, grid, kgrid, config.forward.quad_n)?;
            Ok(add_noise(&clean, config.noise.level, config.noise.seed))
        }
    }
}

fn write_inversion_artifacts(
    dir: &Path,
    config: &ExperimentConfig,
    out: &InversionOutput,
    runtime_s: f64,
    extra: serde_json::Value,
) -> std::io::Result<()> {
    ensure_dir(dir)?;
    let comments = header_comments(&config.echo(), config.noise.seed);

    let rows: Vec<Vec<String>> = out
        .trace
        .records
        .iter()
        .map(|r| vec![r.iter.to_string(), f(r.j), f(r.grad_norm), f(r.p_norm)])
        .collect();
    write_csv(
        &dir.join("trace.csv"),
        &comments,
        &["iter", "j", "grad_norm", "p_norm"],
        &rows,
    )?;

    let grid = config.spatial_grid();
    let rows: Vec<Vec<String>> = grid
        .nodes()
        .iter()
        .enumerate()
        .map(|(j, &x)| vec![f(x), f(out.result.c_tilde[j]), f(out.result.c_comp[j])])
        .collect();
    write_csv(
        &dir.join("c_comp.csv"),
        &comments,
        &["x", "c_tilde", "c_comp"],
        &rows,
    )?;

    let summary = serde_json::json!({
        "p_tilde": out.result.p_tilde,
        "c_est_range": [out.result.c_est_range.0, out.result.c_est_range.1],
        "c_bckgr_range": [out.result.c_bckgr_range.0, out.result.c_bckgr_range.1],
        "mode": match out.result.mode {
            scatter1d::reconstruct::ContrastMode::AboveUnity => "above-unity",
            scatter1d::reconstruct::ContrastMode::BelowUnity => "below-unity",
        },
        "iterations": out.trace.last().iter,
        "final_j": out.trace.last().j,
        "final_grad_norm": out.trace.last().grad_norm,
        "runtime_seconds": runtime_s,
        "seed": config.noise.seed,
        "config": serde_json::to_value(config).unwrap_or(serde_json::Value::Null),
        "extra": extra,
    });
    write_json(&dir.join("summary.json"), &summary)
}

/// Inverse solve: tail, minimization and back-substitution; writes
/// `trace.csv`, `c_comp.csv` and `summary.json`. On divergence the partial
/// trace is still written and the exit code is 3.
pub fn reconstruct(
    config: &ExperimentConfig,
    data_path: Option<&Path>,
    calibration: Option<f64>,
) -> CmdResult {
    let grid = config.spatial_grid();
    let kgrid = config.wavenumber_grid();
    let data = obtain_data(config, data_path, calibration, &grid, &kgrid)?;
    let settings = config.inversion_settings();
    let dir = Path::new(&config.output.dir);
    let started = Instant::now();
    match invert(&data, &grid, &kgrid, &settings) {
        Ok(out) => {
            write_inversion_artifacts(
                dir,
                config,
                &out,
                started.elapsed().as_secs_f64(),
                serde_json::Value::Null,
            )?;
            println!(
                "reconstruct: P~ = {:.4}, c_est in [{:.4}, {:.4}] ({})",
                out.result.p_tilde,
                out.result.c_est_range.0,
                out.result.c_est_range.1,
                dir.display()
            );
            Ok(EXIT_OK)
        }
        Err(scatter1d::Error::Diverged {
            iter,
            reason,
            trace,
        }) => {
            ensure_dir(dir)?;
            let comments = header_comments(&config.echo(), config.noise.seed);
            let rows: Vec<Vec<String>> = trace
                .records
                .iter()
                .map(|r| vec![r.iter.to_string(), f(r.j), f(r.grad_norm), f(r.p_norm)])
                .collect();
            write_csv(
                &dir.join("trace.csv"),
                &comments,
                &["iter", "j", "grad_norm", "p_norm"],
                &rows,
            )?;
            eprintln!("reconstruct: diverged at iteration {iter}: {reason} (trace written)");
            Ok(EXIT_NUMERICAL)
        }
        Err(e) => Err(e),
    }
}

/// Dispatch one verification check and write its JSON report; the exit code
/// reflects the pass flag (report-only checks exit 0).
pub fn verify(config: &ExperimentConfig, kind: VerifyKind) -> CmdResult {
    let grid = config.spatial_grid();
    let kgrid = config.wavenumber_grid();
    let dir = Path::new(&config.output.dir);
    ensure_dir(dir)?;
    let seed = config.noise.seed;

    let (name, report_json, pass): (&str, serde_json::Value, Option<bool>) = match kind {
        VerifyKind::Carleman => {
            let report = check_carleman(&[2.0, 3.0, 5.0], 200, seed, &grid)?;
            (
                "carleman",
                serde_json::to_value(&report).unwrap(),
                report.pass,
            )
        }
        VerifyKind::Convexity | VerifyKind::Lipschitz => {
            let profile = Profile::Step(config.step_target());
            let clean = synthesize_data(&profile, &grid, &kgrid, config.forward.quad_n)?;
            let data = add_noise(&clean, config.noise.level, seed);
            let prepared = scatter1d::dataprep::prepare(&data, &kgrid)?;
            let tail = scatter1d::tail::qrm_tail(
                &prepared,
                &grid,
                &kgrid,
                scatter1d::tail::choose_alpha(data.noise_level),
            );
            let lift = scatter1d::functional::build_lift(&prepared.p0, &prepared.p1, &grid);
            let ctx = CheckContext {
                grid: &grid,
                kgrid: &kgrid,
                lift: &lift,
                tail: &tail,
            };
            let radius = match config.inversion_settings().radius {
                scatter1d::minimize::Radius::Ball(r) => r,
                scatter1d::minimize::Radius::Unbounded => 10.0,
            };
            match kind {
                VerifyKind::Convexity => {
                    let report =
                        check_convexity_gap(config.carleman.lambda, radius, 100, seed, &ctx);
                    (
                        "convexity",
                        serde_json::to_value(&report).unwrap(),
                        report.pass,
                    )
                }
                _ => {
                    let report = check_lipschitz(config.carleman.lambda, radius, 100, seed, &ctx);
                    (
                        "lipschitz",
                        serde_json::to_value(&report).unwrap(),
                        report.pass,
                    )
                }
            }
        }
        VerifyKind::NoiseSweep => {
            let table = noise_sweep(
                &[0.0, 0.025, 0.05],
                &config.step_target(),
                &grid,
                &kgrid,
                &SweepConfig {
                    seeds_per_delta: 5,
                    base_seed: seed,
                    quad_n: config.forward.quad_n,
                    settings: config.inversion_settings(),
                },
            )?;
            let pass = table.pass;
            (
                "noise-sweep",
                serde_json::to_value(&table).unwrap(),
                Some(pass),
            )
        }
    };

    let path = dir.join(format!("verify_{name}.json"));
    let wrapped = serde_json::json!({
        "seed": seed,
        "config": serde_json::to_value(config).unwrap_or(serde_json::Value::Null),
        "report": report_json,
    });
    write_json(&path, &wrapped)?;
    match pass {
        Some(true) => {
            println!("verify {name}: PASS ({})", path.display());
            Ok(EXIT_OK)
        }
        Some(false) => {
            println!("verify {name}: FAIL ({})", path.display());
            Ok(EXIT_CHECK_FAILED)
        }
        None => {
            println!("verify {name}: report-only ({})", path.display());
            Ok(EXIT_OK)
        }
    }
}

/// Simulate, invert and compare against the known target over a batch of
/// locations and contrasts. Each run gets its own directory; `summary.csv`
/// collects one row per run with the error metrics.
pub fn pipeline(config: &ExperimentConfig, targets: &[f64], contrasts: &[f64]) -> CmdResult {
    let grid = config.spatial_grid();
    let kgrid = config.wavenumber_grid();
    let dir = Path::new(&config.output.dir);
    ensure_dir(dir)?;

    let targets = if targets.is_empty() {
        vec![config.target.x_loc]
    } else {
        targets.to_vec()
    };
    let contrasts = if contrasts.is_empty() {
        vec![config.target.contrast]
    } else {
        contrasts.to_vec()
    };

    let mut rows = Vec::new();
    let mut any_failed = false;
    for &x_loc in &targets {
        for &contrast in &contrasts {
            let mut run_config = config.clone();
            run_config.target.x_loc = x_loc;
            run_config.target.contrast = contrast;
            run_config.validate().map_err(|e| scatter1d::Error::Parse {
                path: "pipeline".into(),
                line: 0,
                msg: e.to_string(),
            })?;
            let run_dir = dir.join(format!("run_x{x_loc:.2}_c{contrast:.1}"));
            let profile = Profile::Step(run_config.step_target());
            let c_true = profile.sample(&grid);

            let clean = synthesize_data(&profile, &grid, &kgrid, run_config.forward.quad_n)?;
            let data = add_noise(&clean, run_config.noise.level, run_config.noise.seed);
            let started = Instant::now();
            match invert(&data, &grid, &kgrid, &run_config.inversion_settings()) {
                Ok(out) => {
                    let err = l2_error(&out.result.c_comp, &c_true, &grid);
                    let (x_peak, value) = peak(&out.result.c_comp, &grid);
                    let extra = serde_json::json!({
                        "l2_error": err,
                        "peak_location": x_peak,
                        "peak_value": value,
                        "location_error": (x_peak - x_loc).abs(),
                        "value_error": (value - contrast).abs(),
                    });
                    write_inversion_artifacts(
                        &run_dir,
                        &run_config,
                        &out,
                        started.elapsed().as_secs_f64(),
                        extra,
                    )?;
                    rows.push(vec![
                        f(x_loc),
                        f(contrast),
                        f(err),
                        f(x_peak),
                        f(value),
                        "ok".into(),
                    ]);
                }
                Err(scatter1d::Error::Diverged { iter, .. }) => {
                    any_failed = true;
                    rows.push(vec![
                        f(x_loc),
                        f(contrast),
                        "inf".into(),
                        "nan".into(),
                        "nan".into(),
                        format!("diverged@{iter}"),
                    ]);
                }
                Err(e) => return Err(e),
            }
        }
    }

    let comments = header_comments(&config.echo(), config.noise.seed);
    write_csv(
        &dir.join("summary.csv"),
        &comments,
        &[
            "x_loc",
            "contrast",
            "l2_error",
            "peak_x",
            "peak_value",
            "status",
        ],
        &rows,
    )?;
    println!(
        "pipeline: {} runs, summary at {}",
        rows.len(),
        dir.join("summary.csv").display()
    );
    Ok(if any_failed { EXIT_NUMERICAL } else { EXIT_OK })
}
