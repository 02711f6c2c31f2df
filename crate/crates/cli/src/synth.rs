//! Synthetic field used by `simulate`: wells with monthly production, noisy
//! pressure observations around a known trend, and an event catalogue drawn
//! from the Cox model on the configured grid.

use anyhow::{Context, Result};
use coxrate::rng::{stream, Purpose};
use coxrate::sim::simulate_with_mean;
use coxrate::{CountsField, CovariateField, MeanField, ModelParams, SpaceTimeGrid};
use rand::Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::Serialize;

use crate::config::RunConfig;
use crate::io::{month_span, Event, PressureObs, ProductionRecord};
use crate::production::smooth_production;

/// Decimal-year margin keeping synthetic event times clear of interval edges
/// after rounding to whole seconds.
const TIME_MARGIN: f64 = 1e-4;

#[derive(Debug, Clone)]
pub struct SyntheticWorld {
    pub production: Vec<ProductionRecord>,
    pub pressure: Vec<PressureObs>,
    pub catalogue: Vec<Event>,
    pub counts: CountsField,
    pub mean: MeanField,
    pub covariates: CovariateField,
    pub truth: Truth,
}

#[derive(Debug, Clone, Serialize)]
pub struct Truth {
    pub params: ModelParams,
    pub sigma2: f64,
    pub mean_surface: String,
    pub total_count: u64,
    pub catalogue_events: usize,
    pub seed: u64,
}

/// True pressure mean: 180 bara at t₀, falling 2.8 to 4.8 bara/yr across the field.
pub fn true_mean(cfg: &RunConfig, x: f64, y: f64, t: f64) -> f64 {
    let xs = (2.0 * x - cfg.x_min - cfg.x_max) / (cfg.x_max - cfg.x_min);
    let ys = (2.0 * y - cfg.y_min - cfg.y_max) / (cfg.y_max - cfg.y_min);
    180.0 - 3.8 * (1.0 + 0.25 * xs - 0.15 * ys) * (t - cfg.t0)
}

fn uniform_in(rng: &mut impl Rng, lo: f64, hi: f64, margin: f64) -> f64 {
    rng.random_range(lo + margin..hi - margin)
}

/// Monthly production from the year containing t₀ − w through the year
/// containing t_m, concentrated south-west of the centre and peaking mid-period.
fn production(cfg: &RunConfig, grid: &SpaceTimeGrid, seed: u64) -> Result<(Vec<ProductionRecord>, CovariateField)> {
    let mut rng = stream(seed, Purpose::Synthetic, 0);
    let t_end = grid.time(grid.n_steps());
    let first = (cfg.t0 - cfg.production_window).floor() as i32;
    let last = (t_end - 1e-9).floor() as i32;
    let peak = 0.5 * (cfg.t0 + t_end);
    let width = (0.3 * (t_end - cfg.t0)).max(1.0);
    let cx = cfg.x_min + 0.4 * (cfg.x_max - cfg.x_min);
    let cy = cfg.y_min + 0.3 * (cfg.y_max - cfg.y_min);
    let spread = 0.25 * (cfg.x_max - cfg.x_min).max(cfg.y_max - cfg.y_min);
    let wells: Vec<(String, f64, f64, f64)> = (0..cfg.synth_wells.max(1))
        .map(|i| {
            let x = (cx + spread * rng.sample::<f64, _>(rand_distr::StandardNormal)).clamp(cfg.x_min, cfg.x_max);
            let y = (cy + spread * rng.sample::<f64, _>(rand_distr::StandardNormal)).clamp(cfg.y_min, cfg.y_max);
            (format!("W{:03}", i + 1), x, y, rng.random_range(0.5..1.5))
        })
        .collect();
    let mut records = Vec::new();
    for year in first..=last {
        for month in 1..=12 {
            let (a, b) = month_span(year, month);
            let t = 0.5 * (a + b);
            let temporal = 0.35 + 0.65 * (-((t - peak) / width).powi(2)).exp();
            for (id, x, y, scale) in &wells {
                records.push(ProductionRecord {
                    well_id: id.clone(),
                    x: *x,
                    y: *y,
                    year,
                    month,
                    volume: scale * temporal / 12.0,
                });
            }
        }
    }
    let v = smooth_production(&records, grid, cfg.production_bandwidth_km, cfg.units_per_km, cfg.production_window, grid.n_steps())?;
    let peak_v = v.as_slice().iter().copied().fold(0.0, f64::max);
    let factor = cfg.synth_production_per_cell / peak_v;
    for r in &mut records {
        r.volume = round_sig(r.volume * factor);
    }
    let v = smooth_production(&records, grid, cfg.production_bandwidth_km, cfg.units_per_km, cfg.production_window, grid.n_steps())?;
    Ok((records, v))
}

/// Ten significant digits, so values survive a CSV round trip unchanged.
fn round_sig(v: f64) -> f64 {
    format!("{v:.9e}").parse().expect("formatted float")
}

fn pressure_obs(cfg: &RunConfig, grid: &SpaceTimeGrid, seed: u64) -> Result<Vec<PressureObs>> {
    let mut rng = stream(seed, Purpose::Synthetic, 1);
    let noise = Normal::new(0.0, cfg.synth_noise_sd).context("pressure noise SD")?;
    let t_end = grid.time(grid.n_steps());
    Ok((0..cfg.synth_pressure_obs)
        .map(|_| {
            let x = round_sig(rng.random_range(cfg.x_min..cfg.x_max));
            let y = round_sig(rng.random_range(cfg.y_min..cfg.y_max));
            // Whole seconds, as written to the CSV.
            let time = crate::io::parse_iso(&crate::io::format_iso(rng.random_range(cfg.t0..t_end))).expect("own format");
            let pressure = round_sig((true_mean(cfg, x, y, time) + noise.sample(&mut rng)).max(1.0));
            PressureObs { x, y, time, pressure }
        })
        .collect())
}

/// Events uniform within each cell and interval, magnitudes Gutenberg–Richter
/// with b = 1 above the threshold, plus extra events below the threshold.
fn events(cfg: &RunConfig, grid: &SpaceTimeGrid, counts: &CountsField, seed: u64) -> Result<Vec<Event>> {
    let layout = grid.layout().context("synthetic events need a rectangular grid")?;
    let gr = Exp::new(std::f64::consts::LN_10).expect("positive rate");
    let mut out = Vec::new();
    for (i, cell) in grid.cells().iter().enumerate() {
        let mut rng = stream(seed, Purpose::Synthetic, 16 + cell.id);
        let (mx, my) = (1e-6 * layout.dx, 1e-6 * layout.dy);
        for k in 1..grid.n_times() {
            for _ in 0..*counts.get(i, k) {
                out.push(Event {
                    time: uniform_in(&mut rng, grid.time(k - 1), grid.time(k), TIME_MARGIN),
                    x: uniform_in(&mut rng, cell.x - 0.5 * layout.dx, cell.x + 0.5 * layout.dx, mx),
                    y: uniform_in(&mut rng, cell.y - 0.5 * layout.dy, cell.y + 0.5 * layout.dy, my),
                    magnitude: cfg.min_magnitude + gr.sample(&mut rng),
                });
            }
        }
    }
    let n_small = (cfg.synth_small_event_fraction * out.len() as f64).round() as usize;
    let mut rng = stream(seed, Purpose::Synthetic, 2);
    let t_end = grid.time(grid.n_steps());
    for _ in 0..n_small {
        out.push(Event {
            time: uniform_in(&mut rng, cfg.t0, t_end, TIME_MARGIN),
            x: rng.random_range(cfg.x_min..cfg.x_max),
            y: rng.random_range(cfg.y_min..cfg.y_max),
            magnitude: cfg.min_magnitude - rng.random_range(0.05..1.0),
        });
    }
    for e in &mut out {
        e.x = round_sig(e.x);
        e.y = round_sig(e.y);
        e.magnitude = (e.magnitude * 100.0).round() / 100.0;
        // Keep the threshold split stable under the two-decimal magnitude format.
        if e.magnitude < cfg.min_magnitude && e.magnitude > cfg.min_magnitude - 0.01 {
            e.magnitude = cfg.min_magnitude - 0.01;
        }
        e.time = crate::io::parse_iso(&crate::io::format_iso(e.time)).expect("own format");
    }
    out.sort_by(|a, b| a.time.total_cmp(&b.time).then(a.x.total_cmp(&b.x)).then(a.y.total_cmp(&b.y)));
    Ok(out)
}

/// Builds the whole synthetic world from the configuration and seed.
pub fn synthesize(cfg: &RunConfig, seed: u64) -> Result<SyntheticWorld> {
    let grid = cfg.grid()?;
    let params = cfg.params()?;
    let sigma2 = cfg.synth_noise_sd * cfg.synth_noise_sd;
    let (production, covariates) = production(cfg, &grid, seed)?;
    let pressure = pressure_obs(cfg, &grid, seed)?;
    let mut mean = MeanField::filled(grid.n_cells(), grid.n_times(), 0.0);
    for (i, cell) in grid.cells().iter().enumerate() {
        for k in 0..grid.n_times() {
            mean.set(i, k, true_mean(cfg, cell.x, cell.y, grid.time(k)));
        }
    }
    let sim = simulate_with_mean(&mean, sigma2, &covariates, &params, &grid, seed)?;
    let catalogue = events(cfg, &grid, &sim.counts, seed)?;
    let truth = Truth {
        params,
        sigma2,
        mean_surface: "180 - 3.8*(1 + 0.25*xs - 0.15*ys)*(t - t0), xs and ys scaled to [-1, 1] over the bounding box".into(),
        total_count: sim.counts.total(),
        catalogue_events: catalogue.len(),
        seed,
    };
    Ok(SyntheticWorld {
        production,
        pressure,
        catalogue,
        counts: sim.counts,
        mean,
        covariates,
        truth,
    })
}
