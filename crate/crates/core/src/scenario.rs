//! Reference scenarios: the published pressure series and moment set-ups, plus a
//! synthetic field at Groningen-like scale for estimation experiments.

use crate::error::Result;
use crate::field::{CovariateField, MeanField};
use crate::grid::SpaceTimeGrid;
use crate::params::ModelParams;
use crate::state::MomentSpec;

/// Estimated pore pressure (bara) on January 1st 1995..=2021 near Slochteren.
pub const SLOCHTEREN_BARA: [f64; 27] = [
    179.81, 177.39, 174.86, 172.20, 169.42, 166.50, 163.48, //
    160.32, 157.05, 153.65, 150.13, 146.49, 142.72, 138.82, //
    134.81, 130.68, 126.43, 122.04, 117.53, 112.91, 108.16, //
    103.28, 98.29, 93.17, 87.94, 82.56, 77.08,
];

/// Noise standard deviation of the pressure trend fit (bara).
pub const SIGMA_HAT: f64 = 7.17;

pub fn slochteren_pressure() -> Vec<f64> {
    SLOCHTEREN_BARA.to_vec()
}

/// Increasing pressure m_k = 6 − 1/(0.5k + 1), α = 0.01, Δ = 0.1, γ₀ = 0.2, σ² = 2.
pub fn increasing_spec(m: usize) -> MomentSpec {
    let series = (0..=m).map(|k| 6.0 - 1.0 / (0.5 * k as f64 + 1.0)).collect();
    MomentSpec::new(series, 0.01, 0.2, 2.0, 0.1).expect("valid scenario")
}

/// Decreasing pressure m_k = 5 + 10/(2k + 1), same parameters as [`increasing_spec`].
pub fn decreasing_spec(m: usize) -> MomentSpec {
    let series = (0..=m).map(|k| 5.0 + 10.0 / (2.0 * k as f64 + 1.0)).collect();
    MomentSpec::new(series, 0.01, 0.2, 2.0, 0.1).expect("valid scenario")
}

/// Slochteren series with α = 0.0097, σ = 7.17, γ₀ = 0, Δ = 1 year.
pub fn slochteren_spec() -> MomentSpec {
    MomentSpec::new(slochteren_pressure(), 0.0097, 0.0, SIGMA_HAT * SIGMA_HAT, 1.0).expect("valid scenario")
}

/// Fitted values reported for the Groningen field, with η = −∞.
pub fn groningen_params() -> ModelParams {
    ModelParams::reduced(-5.3, 9.7, 0.0097).expect("valid parameters")
}

/// A synthetic field for estimation and monitoring experiments.
#[derive(Debug, Clone)]
pub struct FieldScenario {
    pub grid: SpaceTimeGrid,
    pub mean: MeanField,
    pub covariates: CovariateField,
    pub params: ModelParams,
    pub sigma2: f64,
}

impl FieldScenario {
    /// Expected total count Σ λ(s,t;ζ)ΔΔ(s) over k ≥ 1 under the log-Gaussian model.
    pub fn expected_total(&self) -> f64 {
        crate::estimate::godambe::marginal_intensity_field(&self.params, &self.mean, &self.covariates, self.sigma2)
            .rows()
            .enumerate()
            .map(|(i, row)| row.iter().skip(1).sum::<f64>() * self.grid.exposure(i))
            .sum()
    }
}

/// `nx × ny` cells over a 40 km square, `m` annual steps from 1995.
///
/// Pressure falls from 180 bara at 2.8–4.8 bara/yr depending on position;
/// production is concentrated south of the centre and peaks mid-period,
/// ranging over 0–0.12 Nbcm per cell-year. Cell areas are scaled so that the
/// expected total count equals `expected_total`.
pub fn groningen_like(nx: usize, ny: usize, m: usize, params: ModelParams, sigma2: f64, expected_total: f64) -> Result<FieldScenario> {
    let base = SpaceTimeGrid::rectangular((0.0, 40.0, 0.0, 40.0), nx, ny, 1.0, None, 1995.0, 1.0, m)?;
    let n_times = m + 1;
    let mut mean = MeanField::filled(base.n_cells(), n_times, 0.0);
    let mut covariates = CovariateField::filled(base.n_cells(), n_times, 0.0);
    let peak = 0.55 * m as f64;
    let width = (0.3 * m as f64).max(1.0);
    for (i, cell) in base.cells().iter().enumerate() {
        let xs = (cell.x - 20.0) / 20.0;
        let ys = (cell.y - 20.0) / 20.0;
        let rate = 3.8 * (1.0 + 0.25 * xs - 0.15 * ys);
        let spatial = (-((xs + 0.2).powi(2) + (ys + 0.4).powi(2)) / 0.5).exp();
        for k in 0..n_times {
            mean.set(i, k, 180.0 - rate * k as f64);
            let temporal = 0.35 + 0.65 * (-((k as f64 - peak) / width).powi(2)).exp();
            covariates.set(i, k, 0.12 * spatial * temporal);
        }
    }
    let mut scenario = FieldScenario {
        grid: base,
        mean,
        covariates,
        params,
        sigma2,
    };
    let unit_total = scenario.expected_total();
    let area = scenario.grid.cells()[0].area * expected_total / unit_total;
    let cells = scenario
        .grid
        .cells()
        .iter()
        .map(|c| crate::grid::Cell { area, ..*c })
        .collect();
    scenario.grid = SpaceTimeGrid::new(cells, 1995.0, 1.0, m)?;
    Ok(scenario)
}
