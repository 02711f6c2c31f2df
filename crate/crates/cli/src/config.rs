//! Run configuration: a flat TOML file of `key = value` pairs.
//!
//! Every key is optional; unknown keys are rejected. Relative paths are
//! resolved against the directory holding the configuration file.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use coxrate::diagnose::VarianceCorrection;
use coxrate::params::{ModelParams, ParamMode};
use coxrate::SpaceTimeGrid;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    // Grid, in field coordinates.
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub nx: usize,
    pub ny: usize,
    /// Coordinate units per km (1000 for metres).
    pub units_per_km: f64,
    /// Optional CSV ring `x,y`; cells with centres outside are dropped.
    pub mask: Option<PathBuf>,
    /// Decimal year of t₀.
    pub t0: f64,
    /// Δ in years.
    pub step: f64,
    /// m, the number of counting intervals.
    pub n_steps: usize,

    pub catalogue: PathBuf,
    pub pressure: PathBuf,
    pub production: PathBuf,
    pub output_dir: PathBuf,
    pub min_magnitude: f64,
    /// Gaussian kernel bandwidth in km; 0 assigns each well to its nearest cell.
    pub production_bandwidth_km: f64,
    /// Trailing production window in years.
    pub production_window: f64,

    pub spatial_order: u32,
    pub temporal_order: u32,
    pub interaction_time_order: u32,
    pub interaction_space_order: u32,
    /// Overrides the residual variance of the pressure trend fit.
    pub sigma2: Option<f64>,

    /// Generating values for `simulate`, starting values for `fit`.
    pub theta1: f64,
    pub theta2: f64,
    pub alpha: f64,
    pub log_ratio: f64,
    /// Start `fit` from the default initial values instead of the ones above.
    pub default_init: bool,
    pub mode: ParamMode,
    pub n_mc: usize,
    pub n_boot: usize,
    pub level: f64,

    /// Proposal variance ε; defaults to 0.02σ̂.
    pub mala_step_size: Option<f64>,
    pub burn_in: usize,
    pub thin: usize,
    pub n_samples: usize,

    pub n_bins: usize,
    pub variance_correction: VarianceCorrection,
    pub seed: u64,

    // Synthetic world used by `simulate`.
    pub synth_wells: usize,
    pub synth_pressure_obs: usize,
    /// Pressure noise SD used to generate data.
    pub synth_noise_sd: f64,
    /// Peak annual production per cell, Nbcm.
    pub synth_production_per_cell: f64,
    /// Share of extra events generated below `min_magnitude`.
    pub synth_small_event_fraction: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            x_min: 0.0,
            x_max: 40.0,
            y_min: 0.0,
            y_max: 40.0,
            nx: 32,
            ny: 32,
            units_per_km: 1.0,
            mask: None,
            t0: 1995.0,
            step: 1.0,
            n_steps: 27,
            catalogue: "catalogue.csv".into(),
            pressure: "pressure.csv".into(),
            production: "production.csv".into(),
            output_dir: "out".into(),
            min_magnitude: 1.5,
            production_bandwidth_km: 2.0,
            production_window: 1.0,
            spatial_order: 4,
            temporal_order: 2,
            interaction_time_order: 1,
            interaction_space_order: 3,
            sigma2: None,
            theta1: -5.3,
            theta2: 9.7,
            alpha: 0.0097,
            log_ratio: f64::NEG_INFINITY,
            default_init: false,
            mode: ParamMode::Reduced,
            n_mc: 1000,
            n_boot: 200,
            level: 0.95,
            mala_step_size: None,
            burn_in: 10_000,
            thin: 1_000,
            n_samples: 5_000,
            n_bins: 25,
            variance_correction: VarianceCorrection::Printed,
            seed: 1,
            synth_wells: 30,
            synth_pressure_obs: 2009,
            synth_noise_sd: 7.17,
            synth_production_per_cell: 0.12,
            synth_small_event_fraction: 0.25,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg: RunConfig = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.catalogue);
        fix(&mut self.pressure);
        fix(&mut self.production);
        fix(&mut self.output_dir);
        if let Some(m) = self.mask.as_mut() {
            fix(m);
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx == 0 || self.ny == 0 || self.n_steps == 0 {
            bail!("nx, ny and n_steps must be positive");
        }
        if !(self.step > 0.0) || !(self.production_window > 0.0) {
            bail!("step and production_window must be positive");
        }
        if !(self.production_bandwidth_km >= 0.0) {
            bail!("production_bandwidth_km must be non-negative");
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            bail!("level must lie in (0, 1)");
        }
        if self.n_mc == 0 {
            bail!("n_mc must be positive");
        }
        self.params()?;
        Ok(())
    }

    pub fn params(&self) -> Result<ModelParams> {
        Ok(ModelParams::new(self.theta1, self.theta2, self.alpha, self.log_ratio)?)
    }

    pub fn grid(&self) -> Result<SpaceTimeGrid> {
        let ring = match &self.mask {
            Some(p) => Some(crate::io::read_ring(p)?),
            None => None,
        };
        Ok(SpaceTimeGrid::rectangular(
            (self.x_min, self.x_max, self.y_min, self.y_max),
            self.nx,
            self.ny,
            self.units_per_km,
            ring.as_deref(),
            self.t0,
            self.step,
            self.n_steps,
        )?)
    }
}
