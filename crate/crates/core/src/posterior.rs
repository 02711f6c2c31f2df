//! Posterior monitoring of the noise field with per-cell MALA chains, and the
//! one-step-ahead forecast built on the chains.
//!
//! Only the log-Gaussian model (η = −∞) is supported. For a cell with counts
//! n_j, exposure a = ΔΔ(s) and noise e = (e_0, …, e_m),
//!
//! ```text
//! log f(e | n) = −Σ_j e_j²/(2σ²) + Σ_{j≥1} [n_j log Λ_j − aΛ_j]
//! log Λ_j      = θ₁ + θ₂V_j + α(m_0 + e_0 − m_j − e_j)
//! ```

use log::warn;
use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{finite, Error, Result};
use crate::estimate::equation::FitData;
use crate::params::ModelParams;
use crate::rng::{stream, Purpose};

/// MALA tuning. `step_size` is the proposal variance ε.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MalaConfig {
    pub step_size: f64,
    pub burn_in: usize,
    pub thin: usize,
    pub n_samples: usize,
    pub seed: u64,
    /// Keep all I noise vectors per cell rather than just e₀.
    pub keep_full: bool,
}

impl MalaConfig {
    /// ε = 0.02σ̂, burn-in 10 000, thinning 1 000, I = 5 000.
    pub fn defaults_for(sigma_hat: f64, seed: u64) -> Self {
        Self {
            step_size: 0.02 * sigma_hat,
            burn_in: 10_000,
            thin: 1_000,
            n_samples: 5_000,
            seed,
            keep_full: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::InvalidParameter(format!("MALA step size must be positive, got {}", self.step_size)));
        }
        if self.thin == 0 || self.n_samples == 0 {
            return Err(Error::InvalidParameter("thinning and sample count must be at least 1".into()));
        }
        Ok(())
    }
}

/// Data of one cell entering its posterior.
#[derive(Debug, Clone)]
pub struct CellModel<'a> {
    pub counts: Vec<f64>,
    pub covariates: &'a [f64],
    pub mean: &'a [f64],
    pub params: ModelParams,
    pub sigma2: f64,
    pub exposure: f64,
}

impl<'a> CellModel<'a> {
    pub fn new(data: &FitData<'a>, cell: usize, params: &ModelParams) -> Result<Self> {
        params.validate()?;
        if !params.is_reduced() {
            return Err(Error::InvalidParameter("posterior monitoring requires η = −∞".into()));
        }
        if !(data.sigma2 > 0.0) {
            return Err(Error::InvalidParameter("posterior monitoring requires σ² > 0".into()));
        }
        Ok(Self {
            counts: data.counts.row(cell),
            covariates: data.covariates.row(cell),
            mean: data.mean.row(cell),
            params: *params,
            sigma2: data.sigma2,
            exposure: data.grid.exposure(cell),
        })
    }

    pub fn n_coords(&self) -> usize {
        self.mean.len()
    }

    /// log Λ_e(t_j).
    pub fn log_intensity(&self, e: &[f64], j: usize) -> f64 {
        let p = &self.params;
        p.theta1 + p.theta2 * self.covariates[j] + p.alpha * (self.mean[0] + e[0] - self.mean[j] - e[j])
    }

    /// log f(e | n) up to an additive constant.
    pub fn log_posterior(&self, e: &[f64]) -> Result<f64> {
        let prior: f64 = e.iter().map(|v| v * v).sum::<f64>() / (2.0 * self.sigma2);
        let mut lik = 0.0;
        for j in 1..e.len() {
            let log_lam = self.log_intensity(e, j);
            let lam = finite(log_lam.exp(), "posterior intensity")?;
            lik += self.counts[j] * log_lam - self.exposure * lam;
        }
        finite(lik - prior, "log posterior")
    }

    /// ∇ log f(e | n).
    pub fn gradient(&self, e: &[f64]) -> Result<Vec<f64>> {
        let alpha = self.params.alpha;
        let mut g: Vec<f64> = e.iter().map(|v| -v / self.sigma2).collect();
        for j in 1..e.len() {
            let lam = finite(self.log_intensity(e, j).exp(), "posterior intensity")?;
            let r = self.counts[j] - lam * self.exposure;
            g[j] -= alpha * r;
            g[0] += alpha * r;
        }
        Ok(g)
    }
}

/// μ(e) = e + (ε/2)∇ log f(e | n).
pub fn proposal_mean(e: &[f64], grad: &[f64], step_size: f64) -> Vec<f64> {
    e.iter().zip(grad).map(|(v, g)| v + 0.5 * step_size * g).collect()
}

fn log_q(to: &[f64], mean: &[f64], step_size: f64) -> f64 {
    -to.iter().zip(mean).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / (2.0 * step_size)
}

/// Current chain state with cached log posterior and gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct MalaState {
    pub e: Vec<f64>,
    pub log_f: f64,
    pub grad: Vec<f64>,
}

impl MalaState {
    pub fn new(model: &CellModel<'_>, e: Vec<f64>) -> Result<Self> {
        Ok(Self {
            log_f: model.log_posterior(&e)?,
            grad: model.gradient(&e)?,
            e,
        })
    }
}

/// log of f(ẽ)q(e|ẽ) / (f(e)q(ẽ|e)).
pub fn mala_log_acceptance(current: &MalaState, proposed: &MalaState, step_size: f64) -> f64 {
    let forward = log_q(&proposed.e, &proposal_mean(&current.e, &current.grad, step_size), step_size);
    let backward = log_q(&current.e, &proposal_mean(&proposed.e, &proposed.grad, step_size), step_size);
    (proposed.log_f - current.log_f) + (backward - forward)
}

/// One Metropolis-adjusted Langevin step; returns whether the move was accepted.
///
/// Proposals where the intensity overflows are rejected.
pub fn mala_step_cell<R: Rng>(model: &CellModel<'_>, state: &mut MalaState, step_size: f64, rng: &mut R) -> bool {
    let sd = step_size.sqrt();
    let mu = proposal_mean(&state.e, &state.grad, step_size);
    let proposal: Vec<f64> = mu
        .iter()
        .map(|m| {
            let z: f64 = StandardNormal.sample(rng);
            m + sd * z
        })
        .collect();
    let u: f64 = rng.random();
    let Ok(next) = MalaState::new(model, proposal) else {
        return false;
    };
    let log_ratio = mala_log_acceptance(state, &next, step_size);
    if u.ln() < log_ratio {
        *state = next;
        true
    } else {
        false
    }
}

/// One cell's chain after burn-in and thinning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellChain {
    pub cell_id: u64,
    /// Fraction of accepted proposals after burn-in.
    pub acceptance_rate: f64,
    /// e₀ of each retained sample.
    pub e0: Vec<f64>,
    /// All retained noise vectors when `keep_full` is set.
    pub samples: Vec<Vec<f64>>,
    pub e0_mean: f64,
    pub e0_sd: f64,
    /// Posterior mean and SD of Λ_e(t_m)ΔΔ(s), the expected count in the last interval.
    pub intensity_mean: f64,
    pub intensity_sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainOutput {
    pub cells: Vec<CellChain>,
    pub config: MalaConfig,
    pub warnings: Vec<String>,
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Runs one chain for `cell` starting at e = 0.
pub fn run_chain(model: &CellModel<'_>, cell_id: u64, cfg: &MalaConfig) -> Result<CellChain> {
    cfg.validate()?;
    let mut rng = stream(cfg.seed, Purpose::Mala, cell_id);
    let mut state = MalaState::new(model, vec![0.0; model.n_coords()])?;
    for _ in 0..cfg.burn_in {
        mala_step_cell(model, &mut state, cfg.step_size, &mut rng);
    }
    let last = model.n_coords() - 1;
    let mut accepted = 0usize;
    let mut e0 = Vec::with_capacity(cfg.n_samples);
    let mut samples = Vec::new();
    let mut intensity = Vec::with_capacity(cfg.n_samples);
    for _ in 0..cfg.n_samples {
        for _ in 0..cfg.thin {
            accepted += mala_step_cell(model, &mut state, cfg.step_size, &mut rng) as usize;
        }
        e0.push(state.e[0]);
        intensity.push(model.log_intensity(&state.e, last).exp() * model.exposure);
        if cfg.keep_full {
            samples.push(state.e.clone());
        }
    }
    let (e0_mean, e0_sd) = mean_sd(&e0);
    let (intensity_mean, intensity_sd) = mean_sd(&intensity);
    Ok(CellChain {
        cell_id,
        acceptance_rate: accepted as f64 / (cfg.n_samples * cfg.thin) as f64,
        e0,
        samples,
        e0_mean,
        e0_sd,
        intensity_mean,
        intensity_sd,
    })
}

/// Independent MALA chains for every cell.
///
/// Cells with acceptance rates below 1% or above 99.9% are summarized in one warning.
pub fn run_monitor(data: &FitData<'_>, params: &ModelParams, cfg: &MalaConfig) -> Result<ChainOutput> {
    cfg.validate()?;
    let cells: Result<Vec<CellChain>> = (0..data.grid.n_cells())
        .into_par_iter()
        .map(|i| {
            let model = CellModel::new(data, i, params)?;
            run_chain(&model, data.grid.cells()[i].id, cfg)
        })
        .collect();
    let cells = cells?;
    let flagged: Vec<&CellChain> = cells
        .iter()
        .filter(|c| c.acceptance_rate < 0.01 || c.acceptance_rate > 0.999)
        .collect();
    let mut warnings = Vec::new();
    if !flagged.is_empty() {
        let lo = flagged.iter().map(|c| c.acceptance_rate).fold(f64::INFINITY, f64::min);
        let hi = flagged.iter().map(|c| c.acceptance_rate).fold(f64::NEG_INFINITY, f64::max);
        let ids: Vec<String> = flagged.iter().take(10).map(|c| c.cell_id.to_string()).collect();
        let more = if flagged.len() > 10 { ", ..." } else { "" };
        let w = format!(
            "{} of {} cells have acceptance rates outside [0.01, 0.999] (range {lo:.4} to {hi:.4}; cells {}{more}); consider retuning the step size",
            flagged.len(),
            cells.len(),
            ids.join(", ")
        );
        warn!("{w}");
        warnings.push(w);
    }
    Ok(ChainOutput {
        cells,
        config: *cfg,
        warnings,
    })
}

/// Inputs for the interval following the last observed one.
#[derive(Debug, Clone, PartialEq)]
pub struct NextInterval {
    /// m(s, t_m + Δ) per cell.
    pub mean: Vec<f64>,
    /// V(s, t_m + Δ) per cell, in Nbcm.
    pub covariate: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellForecast {
    pub cell_id: u64,
    pub x: f64,
    pub y: f64,
    /// Posterior mean and SD of the intensity in events per km² per year.
    pub mean_intensity: f64,
    pub sd_intensity: f64,
    /// Posterior mean of the expected count ΛΔΔ(s).
    pub expected_count: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forecast {
    pub cells: Vec<CellForecast>,
    /// Field total per posterior draw.
    pub totals: Vec<u64>,
    /// (count, relative frequency) for every observed total, ascending.
    pub histogram: Vec<(u64, f64)>,
}

impl Forecast {
    /// Central interval of the predictive totals with nearest-rank quantiles.
    pub fn central_interval(&self, level: f64) -> (u64, u64) {
        let mut t = self.totals.clone();
        t.sort_unstable();
        let n = t.len();
        let rank = |p: f64| t[(((n as f64) * p).ceil() as usize).clamp(1, n) - 1];
        (rank((1.0 - level) / 2.0), rank((1.0 + level) / 2.0))
    }

    pub fn expected_total(&self) -> f64 {
        self.totals.iter().sum::<u64>() as f64 / self.totals.len() as f64
    }
}

/// Posterior-predictive intensity and counts for the next interval: for each
/// posterior draw i, X_i(s,t₀) = m₀ + e₀ᵢ, fresh E_i ~ N(0, σ²) and
/// Λ_i = exp[θ₁ + θ₂V_next + α(X_i(s,t₀) − m_next − E_i)].
pub fn forecast_intensity(
    chain: &ChainOutput,
    data: &FitData<'_>,
    params: &ModelParams,
    next: &NextInterval,
    seed: u64,
) -> Result<Forecast> {
    params.validate()?;
    let n_cells = data.grid.n_cells();
    if chain.cells.len() != n_cells {
        return Err(Error::DimensionMismatch(format!("{} chains for {n_cells} cells", chain.cells.len())));
    }
    if next.mean.len() != n_cells || next.covariate.len() != n_cells {
        return Err(Error::DimensionMismatch("next-interval inputs must have one value per cell".into()));
    }
    if let Some(i) = next.covariate.iter().position(|v| !v.is_finite()) {
        return Err(Error::InsufficientData(format!(
            "missing production covariate for cell {} in the forecast interval",
            data.grid.cells()[i].id
        )));
    }
    let n_draws = chain.cells.first().map_or(0, |c| c.e0.len());
    if n_draws == 0 || chain.cells.iter().any(|c| c.e0.len() != n_draws) {
        return Err(Error::InsufficientData("posterior samples missing or of unequal length".into()));
    }
    let sd = data.sigma2.sqrt();
    let per_cell: Result<Vec<(CellForecast, Vec<u64>)>> = (0..n_cells)
        .into_par_iter()
        .map(|i| {
            let cell = &data.grid.cells()[i];
            let a = data.grid.exposure(i);
            let m0 = *data.mean.get(i, 0);
            let base = params.theta1 + params.theta2 * next.covariate[i];
            let mut rng = stream(seed, Purpose::Forecast, cell.id);
            let mut lam = Vec::with_capacity(n_draws);
            let mut counts = Vec::with_capacity(n_draws);
            for &e0 in &chain.cells[i].e0 {
                let z: f64 = StandardNormal.sample(&mut rng);
                let l = finite((base + params.alpha * (m0 + e0 - next.mean[i] - sd * z)).exp(), "forecast intensity")?;
                let mu = l * a;
                let n = if mu > 0.0 {
                    Poisson::new(mu)
                        .map_err(|e| Error::InvalidParameter(format!("Poisson mean {mu}: {e}")))?
                        .sample(&mut rng) as u64
                } else {
                    0
                };
                lam.push(l);
                counts.push(n);
            }
            let (mean_intensity, sd_intensity) = mean_sd(&lam);
            Ok((
                CellForecast {
                    cell_id: cell.id,
                    x: cell.x,
                    y: cell.y,
                    mean_intensity,
                    sd_intensity,
                    expected_count: mean_intensity * a,
                },
                counts,
            ))
        })
        .collect();
    let per_cell = per_cell?;
    let mut totals = vec![0u64; n_draws];
    for (_, counts) in &per_cell {
        for (t, c) in totals.iter_mut().zip(counts) {
            *t += c;
        }
    }
    let mut freq = std::collections::BTreeMap::new();
    for &t in &totals {
        *freq.entry(t).or_insert(0usize) += 1;
    }
    let histogram = freq
        .into_iter()
        .map(|(c, n)| (c, n as f64 / n_draws as f64))
        .collect();
    Ok(Forecast {
        cells: per_cell.into_iter().map(|(c, _)| c).collect(),
        totals,
        histogram,
    })
}
