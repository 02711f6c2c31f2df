//! The six user-facing commands.
//!
//! Each command writes its outputs plus `<command>-report.json` into the
//! output directory. The report is a pure function of the inputs, the
//! configuration and the seed; wall-clock timings go to a separate
//! `<command>-timings.json`.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use coxrate::diagnose::{bin_residuals, pearson_residuals};
use coxrate::estimate::{bootstrap_ci, default_init, newton_solve, FitData, McSamples, NewtonOptions};
use coxrate::posterior::{forecast_intensity, run_monitor, ChainOutput, MalaConfig, NextInterval};
use coxrate::pressure::Scaling;
use coxrate::rate::{mean_ci, rate_mean_approx, rate_var_approx, sample_rates, var_ci};
use coxrate::rng::{derive_seed, Purpose};
use coxrate::scenario::{decreasing_spec, increasing_spec, slochteren_spec};
use coxrate::{eval_mean, CountsField, CovariateField, MeanField, ModelParams, ParamMode, SpaceTimeGrid};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::binning::{bin_catalogue, BinningReport};
use crate::config::RunConfig;
use crate::io;
use crate::production::smooth_production;
use crate::synth::synthesize;
use crate::trend::{design_for, fit_pressure_trend, TrendFit};

/// Reference scenarios reproduced by `moments`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    /// Increasing pressure 6 − 1/(0.5k + 1), k = 0..=50.
    Fig1,
    /// Decreasing pressure 5 + 10/(2k + 1), k = 0..=50.
    Fig2,
    /// Slochteren series 1995–2021.
    Table1,
}

/// Stage timings, kept out of the deterministic report.
struct Clock {
    start: Instant,
    stages: Vec<(String, f64)>,
}

impl Clock {
    fn new() -> Self {
        Self {
            start: Instant::now(),
            stages: Vec::new(),
        }
    }

    fn lap(&mut self, stage: &str) {
        let total: f64 = self.stages.iter().map(|s| s.1).sum();
        self.stages.push((stage.into(), self.start.elapsed().as_secs_f64() - total));
    }

    fn write(&self, dir: &Path, command: &str) -> Result<()> {
        let stages: serde_json::Map<String, Value> = self.stages.iter().map(|(k, v)| (k.clone(), json!(v))).collect();
        io::write_json(
            &dir.join(format!("{command}-timings.json")),
            &json!({ "command": command, "total_seconds": self.start.elapsed().as_secs_f64(), "stages_seconds": stages }),
        )
    }
}

#[derive(Serialize)]
struct Report<'a> {
    command: &'a str,
    version: &'a str,
    seed: u64,
    config: String,
    results: Value,
}

fn write_report(cfg: &RunConfig, command: &str, seed: u64, results: Value) -> Result<()> {
    let report = Report {
        command,
        version: env!("CARGO_PKG_VERSION"),
        seed,
        config: toml::to_string(cfg).context("serializing the configuration")?,
        results,
    };
    io::write_json(&cfg.output_dir.join(format!("{command}-report.json")), &report)
}

/// Trend description recorded in every report that fits one.
fn trend_summary(fit: &TrendFit) -> Value {
    let (x, y, t) = match &fit.model.mean {
        coxrate::MeanSurface::Trend { design, .. } => (design.x_scaling, design.y_scaling, design.t_scaling),
        coxrate::MeanSurface::Tabulated { .. } => (Scaling::IDENTITY, Scaling::IDENTITY, Scaling::IDENTITY),
    };
    json!({
        "columns": fit.column_names,
        "beta": fit.beta,
        "sigma_hat": fit.sigma(),
        "sigma2_hat": fit.sigma2,
        "n_obs": fit.n_obs,
        "scaling": { "x": x, "y": y, "t": t },
    })
}

/// Observed inputs on the grid.
pub struct Prepared {
    pub grid: SpaceTimeGrid,
    pub trend: TrendFit,
    pub mean: MeanField,
    pub sigma2: f64,
    pub covariates: CovariateField,
    pub counts: CountsField,
    pub binning: BinningReport,
    pub production: Vec<io::ProductionRecord>,
}

impl Prepared {
    pub fn data(&self) -> Result<FitData<'_>> {
        Ok(FitData::new(&self.grid, &self.counts, &self.covariates, &self.mean, self.sigma2)?)
    }

    fn summary(&self) -> Value {
        json!({
            "n_cells": self.grid.n_cells(),
            "n_steps": self.grid.n_steps(),
            "sigma2": self.sigma2,
            "trend": trend_summary(&self.trend),
            "binning": self.binning,
            "total_count": self.counts.total(),
        })
    }
}

/// Trend fit, gridded mean, production covariate and binned counts.
pub fn prepare(cfg: &RunConfig) -> Result<Prepared> {
    let grid = cfg.grid()?;
    let obs = io::read_pressure(&cfg.pressure)?;
    let design = design_for(
        (cfg.spatial_order, cfg.temporal_order, cfg.interaction_time_order, cfg.interaction_space_order),
        (cfg.x_min, cfg.x_max, cfg.y_min, cfg.y_max),
        cfg.t0,
        grid.time(grid.n_steps()),
    );
    let trend = fit_pressure_trend(&obs, design)?;
    let mean = eval_mean(&trend.model, &grid)?;
    let sigma2 = cfg.sigma2.unwrap_or(trend.sigma2);
    let production = io::read_production(&cfg.production)?;
    let covariates = smooth_production(&production, &grid, cfg.production_bandwidth_km, cfg.units_per_km, cfg.production_window, grid.n_steps())?;
    let events = io::read_catalogue(&cfg.catalogue)?;
    let (counts, binning) = bin_catalogue(&events, &grid, cfg.min_magnitude);
    if binning.outside_grid + binning.outside_window > 0 {
        log::warn!(
            "{} events outside the grid and {} outside the time window were dropped",
            binning.outside_grid,
            binning.outside_window
        );
    }
    Ok(Prepared {
        grid,
        trend,
        mean,
        sigma2,
        covariates,
        counts,
        binning,
        production,
    })
}

pub fn write_counts(path: &Path, grid: &SpaceTimeGrid, counts: &CountsField) -> Result<()> {
    let mut w = io::create(path)?;
    writeln!(w, "cellId,x,y,k,tStart,tEnd,count")?;
    for (i, cell) in grid.cells().iter().enumerate() {
        for k in 1..grid.n_times() {
            writeln!(w, "{},{},{},{},{},{},{}", cell.id, cell.x, cell.y, k, grid.time(k - 1), grid.time(k), counts.get(i, k))?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Parameters for the post-fit commands: `zeta_hat` of a fit report if one
/// is given or present in the output directory, the configured values otherwise.
pub fn resolve_params(cfg: &RunConfig, params_file: Option<&Path>) -> Result<(ModelParams, String)> {
    #[derive(Deserialize)]
    struct Fitted {
        zeta_hat: ModelParams,
    }
    let default = cfg.output_dir.join("fit.json");
    let path: Option<PathBuf> = match params_file {
        Some(p) => Some(p.to_path_buf()),
        None => default.exists().then_some(default),
    };
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
            let fitted: Fitted = serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?;
            fitted.zeta_hat.validate()?;
            let name = p.file_name().map_or_else(|| p.display().to_string(), |n| n.to_string_lossy().into_owned());
            Ok((fitted.zeta_hat, name))
        }
        None => Ok((cfg.params()?, "config".into())),
    }
}

pub fn simulate(cfg: &RunConfig, seed: u64) -> Result<()> {
    let mut clock = Clock::new();
    let world = synthesize(cfg, seed)?;
    clock.lap("synthesize");
    io::write_catalogue(&cfg.catalogue, &world.catalogue)?;
    io::write_pressure(&cfg.pressure, &world.pressure)?;
    io::write_production(&cfg.production, &world.production)?;
    let grid = cfg.grid()?;
    write_counts(&cfg.output_dir.join("counts.csv"), &grid, &world.counts)?;
    io::write_json(&cfg.output_dir.join("truth.json"), &world.truth)?;
    clock.lap("write");
    write_report(
        cfg,
        "simulate",
        seed,
        json!({
            "truth": world.truth,
            "files": {
                "catalogue": cfg.catalogue,
                "pressure": cfg.pressure,
                "production": cfg.production,
            },
            "pressure_observations": world.pressure.len(),
            "production_records": world.production.len(),
        }),
    )?;
    clock.write(&cfg.output_dir, "simulate")
}

fn newton_options(cfg: &RunConfig, seed: u64) -> NewtonOptions {
    NewtonOptions {
        mode: cfg.mode,
        n_mc: cfg.n_mc,
        mc_seed: derive_seed(seed, Purpose::McSamples, 0),
        ..NewtonOptions::default()
    }
}

pub fn fit(cfg: &RunConfig, seed: u64) -> Result<()> {
    let mut clock = Clock::new();
    let prep = prepare(cfg)?;
    let data = prep.data()?;
    clock.lap("prepare");
    let opts = newton_options(cfg, seed);
    let init = if cfg.default_init {
        default_init(&data, cfg.mode)
    } else {
        let mut p = cfg.params()?;
        if cfg.mode == ParamMode::Full && p.is_reduced() {
            p.log_ratio = -10.0;
        }
        p
    };
    let mut result = newton_solve(&data, &init, &opts)?;
    clock.lap("newton");
    if !result.converged {
        log::warn!("Newton iterations did not converge; residual {}", result.final_residual);
    }
    let mut bootstrap = Value::Null;
    if cfg.n_boot >= 2 && result.converged {
        match bootstrap_ci(&result, &data, &opts, cfg.n_boot, cfg.level, derive_seed(seed, Purpose::Bootstrap, u64::MAX)) {
            Ok(boot) => {
                result.bootstrap_cis = Some(boot.cis.clone());
                bootstrap = json!({ "n_boot": boot.n_boot, "failed": boot.failed, "cis": boot.cis });
            }
            Err(e) => {
                log::warn!("bootstrap abandoned: {e}");
                bootstrap = json!({ "n_boot": cfg.n_boot, "error": e.to_string() });
            }
        }
        clock.lap("bootstrap");
    }
    io::write_json(&cfg.output_dir.join("fit.json"), &result)?;
    write_counts(&cfg.output_dir.join("counts.csv"), &prep.grid, &prep.counts)?;
    write_report(
        cfg,
        "fit",
        seed,
        json!({
            "inputs": prep.summary(),
            "init": init,
            "zeta_hat": result.zeta_hat,
            "mode": result.mode,
            "converged": result.converged,
            "iterations": result.iterations,
            "final_residual": result.final_residual,
            "standard_errors": result.godambe.as_ref().map(|g| g.standard_errors()),
            "bootstrap": bootstrap,
        }),
    )?;
    clock.write(&cfg.output_dir, "fit")
}

pub fn diagnose(cfg: &RunConfig, seed: u64, params_file: Option<&Path>) -> Result<()> {
    let mut clock = Clock::new();
    let prep = prepare(cfg)?;
    let data = prep.data()?;
    let (params, source) = resolve_params(cfg, params_file)?;
    let samples = McSamples::generate(&prep.grid, prep.sigma2, cfg.n_mc, derive_seed(seed, Purpose::McSamples, 0))?;
    let res = pearson_residuals(&data, &params, &samples, cfg.variance_correction)?;
    let bins = bin_residuals(&res.residuals, &res.fitted, cfg.n_bins)?;
    clock.lap("residuals");
    let mut w = io::create(&cfg.output_dir.join("residual-bins.csv"))?;
    bins.write_csv(&mut w)?;
    w.flush()?;
    let inside = bins.bins.iter().filter(|b| b.inside()).count();
    write_report(
        cfg,
        "diagnose",
        seed,
        json!({
            "inputs": prep.summary(),
            "params": params,
            "params_source": source,
            "variance_correction": cfg.variance_correction,
            "n_bins": bins.n_bins(),
            "bins_inside_two_sigma": inside,
        }),
    )?;
    clock.write(&cfg.output_dir, "diagnose")
}

fn mala_config(cfg: &RunConfig, sigma2: f64, seed: u64) -> MalaConfig {
    MalaConfig {
        step_size: cfg.mala_step_size.unwrap_or(0.02 * sigma2.sqrt()),
        burn_in: cfg.burn_in,
        thin: cfg.thin,
        n_samples: cfg.n_samples,
        seed: derive_seed(seed, Purpose::Mala, 0),
        keep_full: false,
    }
}

fn chains(cfg: &RunConfig, seed: u64, params_file: Option<&Path>) -> Result<(Prepared, ModelParams, String, ChainOutput)> {
    let prep = prepare(cfg)?;
    let (params, source) = resolve_params(cfg, params_file)?;
    if !params.is_reduced() {
        bail!("monitoring uses the reduced model; the parameters have a finite log_ratio");
    }
    let mala = mala_config(cfg, prep.sigma2, seed);
    let out = run_monitor(&prep.data()?, &params, &mala)?;
    Ok((prep, params, source, out))
}

pub fn monitor(cfg: &RunConfig, seed: u64, params_file: Option<&Path>) -> Result<()> {
    let mut clock = Clock::new();
    let (prep, params, source, out) = chains(cfg, seed, params_file)?;
    clock.lap("mala");
    let mut w = io::create(&cfg.output_dir.join("monitor.csv"))?;
    writeln!(w, "cellId,x,y,acceptanceRate,e0Mean,e0Sd,lastIntervalMean,lastIntervalSd")?;
    for (c, cell) in out.cells.iter().zip(prep.grid.cells()) {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            c.cell_id, cell.x, cell.y, c.acceptance_rate, c.e0_mean, c.e0_sd, c.intensity_mean, c.intensity_sd
        )?;
    }
    w.flush()?;
    let rates: Vec<f64> = out.cells.iter().map(|c| c.acceptance_rate).collect();
    write_report(
        cfg,
        "monitor",
        seed,
        json!({
            "inputs": prep.summary(),
            "params": params,
            "params_source": source,
            "mala": out.config,
            "acceptance_min": rates.iter().copied().fold(f64::INFINITY, f64::min),
            "acceptance_max": rates.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            "warnings": out.warnings,
        }),
    )?;
    clock.write(&cfg.output_dir, "monitor")
}

/// m(s, t_{m+1}) and V(s, t_{m+1}) for the interval after the data.
pub fn next_interval(cfg: &RunConfig, prep: &Prepared) -> Result<NextInterval> {
    let grid = &prep.grid;
    let m = grid.n_steps();
    let t_next = grid.time(m) + grid.step();
    let mean: Result<Vec<f64>> = grid
        .cells()
        .iter()
        .map(|c| Ok(prep.trend.model.mean_at(c.x, c.y, t_next)?))
        .collect();
    let v = smooth_production(&prep.production, grid, cfg.production_bandwidth_km, cfg.units_per_km, cfg.production_window, m + 1)?;
    Ok(NextInterval {
        mean: mean?,
        covariate: v.rows().map(|r| r[m + 1]).collect(),
    })
}

pub fn forecast(cfg: &RunConfig, seed: u64, params_file: Option<&Path>) -> Result<()> {
    let mut clock = Clock::new();
    let (prep, params, source, out) = chains(cfg, seed, params_file)?;
    clock.lap("mala");
    let next = next_interval(cfg, &prep)?;
    let fc = forecast_intensity(&out, &prep.data()?, &params, &next, derive_seed(seed, Purpose::Forecast, 0))?;
    clock.lap("forecast");
    let mut w = io::create(&cfg.output_dir.join("riskmap.csv"))?;
    writeln!(w, "cellId,x,y,postMeanIntensity,postSdIntensity")?;
    for c in &fc.cells {
        writeln!(w, "{},{},{},{},{}", c.cell_id, c.x, c.y, c.mean_intensity, c.sd_intensity)?;
    }
    w.flush()?;
    let mut w = io::create(&cfg.output_dir.join("forecast-hist.csv"))?;
    writeln!(w, "count,frequency")?;
    for (c, f) in &fc.histogram {
        writeln!(w, "{c},{f}")?;
    }
    w.flush()?;
    let (lo, hi) = fc.central_interval(cfg.level);
    let next_total_v: f64 = next.covariate.iter().sum();
    write_report(
        cfg,
        "forecast",
        seed,
        json!({
            "inputs": prep.summary(),
            "params": params,
            "params_source": source,
            "mala": out.config,
            "warnings": out.warnings,
            "forecast_interval_start": prep.grid.time(prep.grid.n_steps()),
            "next_interval_production": next_total_v,
            "expected_total": fc.expected_total(),
            "central_interval": { "level": cfg.level, "lo": lo, "hi": hi },
        }),
    )?;
    clock.write(&cfg.output_dir, "forecast")
}

pub fn moments(cfg: &RunConfig, seed: u64, scenario: Scenario, n_trajectories: usize) -> Result<()> {
    let mut clock = Clock::new();
    let spec = match scenario {
        Scenario::Fig1 => increasing_spec(50),
        Scenario::Fig2 => decreasing_spec(50),
        Scenario::Table1 => slochteren_spec(),
    };
    let samples = sample_rates(&spec, n_trajectories, derive_seed(seed, Purpose::RateTrajectory, 0))?;
    clock.lap("monte_carlo");
    let mut mean_w = io::create(&cfg.output_dir.join("moments-mean.csv"))?;
    let mut var_w = io::create(&cfg.output_dir.join("moments-var.csv"))?;
    writeln!(mean_w, "k,mcMean,ciLo,ciHi,approx,inside")?;
    writeln!(var_w, "k,mcVar,ciLo,ciHi,approx,inside")?;
    let (mut mean_inside, mut var_inside, mut degenerate) = (0usize, 0usize, 0usize);
    let last = spec.last_index();
    for k in 1..=last {
        let s = &samples.samples[k];
        let mc_mean = s.iter().sum::<f64>() / s.len() as f64;
        let ci = mean_ci(s, cfg.level)?;
        let approx = rate_mean_approx(&spec, k)?;
        let inside = ci.contains(approx);
        mean_inside += inside as usize;
        writeln!(mean_w, "{k},{mc_mean},{},{},{approx},{inside}", ci.lo, ci.hi)?;

        let mc_var = s.iter().map(|v| (v - mc_mean).powi(2)).sum::<f64>() / (s.len() as f64 - 1.0);
        let approx = rate_var_approx(&spec, k)?;
        match var_ci(s, cfg.level) {
            Ok(ci) => {
                let inside = ci.contains(approx);
                var_inside += inside as usize;
                writeln!(var_w, "{k},{mc_var},{},{},{approx},{inside}", ci.lo, ci.hi)?;
            }
            Err(_) => {
                degenerate += 1;
                writeln!(var_w, "{k},{mc_var},,,{approx},false")?;
            }
        }
    }
    mean_w.flush()?;
    var_w.flush()?;
    clock.lap("write");
    write_report(
        cfg,
        "moments",
        seed,
        json!({
            "scenario": scenario,
            "n_trajectories": n_trajectories,
            "alpha": spec.alpha(),
            "gamma0": spec.gamma0(),
            "sigma2": spec.sigma2(),
            "step": spec.step(),
            "k_max": last,
            "mean_inside": mean_inside,
            "var_inside": var_inside,
            "var_degenerate_intervals": degenerate,
        }),
    )?;
    clock.write(&cfg.output_dir, "moments")
}

/// Pressure model check used by the opt-in real-data tests.
pub fn trend_only(cfg: &RunConfig) -> Result<TrendFit> {
    let grid = cfg.grid()?;
    let obs = io::read_pressure(&cfg.pressure)?;
    let design = design_for(
        (cfg.spatial_order, cfg.temporal_order, cfg.interaction_time_order, cfg.interaction_space_order),
        (cfg.x_min, cfg.x_max, cfg.y_min, cfg.y_max),
        cfg.t0,
        grid.time(grid.n_steps()),
    );
    fit_pressure_trend(&obs, design)
}

