//! Simulation of the Cox rate-and-state process on a grid.

use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{finite, Error, Result};
use crate::field::{CountsField, CovariateField, Field, MeanField, NoiseField};
use crate::grid::SpaceTimeGrid;
use crate::params::ModelParams;
use crate::pressure::{eval_mean, PressureModel};
use crate::rng::{stream, Purpose};
use crate::state::gamma_closed_form;

/// One simulated catalogue with its latent noise and intensity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimOutput {
    pub noise: NoiseField,
    /// Λ(s, t_k) in events per km² per year.
    pub lambda: Field<f64>,
    pub counts: CountsField,
    pub seed: u64,
}

/// Gaussian noise E(s, t_k) with variance σ², one stream per cell.
pub fn sample_noise(grid: &SpaceTimeGrid, sigma2: f64, seed: u64) -> Result<NoiseField> {
    if !(sigma2 >= 0.0) {
        return Err(Error::InvalidParameter(format!("noise variance must be >= 0, got {sigma2}")));
    }
    let sd = sigma2.sqrt();
    let n_times = grid.n_times();
    let rows: Vec<Vec<f64>> = grid
        .cells()
        .par_iter()
        .map(|cell| {
            let mut rng = stream(seed, Purpose::Noise, cell.id);
            (0..n_times)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    sd * z
                })
                .collect()
        })
        .collect();
    Field::from_rows(rows)
}

/// X = m + E.
pub fn sample_pressure(pm: &PressureModel, grid: &SpaceTimeGrid, seed: u64) -> Result<Field<f64>> {
    let mean = eval_mean(pm, grid)?;
    let noise = sample_noise(grid, pm.noise_var, seed)?;
    add_fields(&mean, &noise)
}

fn add_fields(a: &Field<f64>, b: &Field<f64>) -> Result<Field<f64>> {
    b.check_shape(a.n_cells(), a.n_times(), "noise")?;
    let data = a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| x + y).collect();
    Field::from_vec(a.n_cells(), a.n_times(), data)
}

/// Λ(s, t_k) along one pressure series.
pub fn driving_row(x: &[f64], v: &[f64], params: &ModelParams, step: f64) -> Result<Vec<f64>> {
    let gamma0 = params.gamma0();
    if params.is_reduced() || !gamma0.is_finite() {
        return x
            .iter()
            .zip(v)
            .map(|(&xk, &vk)| {
                finite(
                    (params.theta1 + params.theta2 * vk + params.alpha * (x[0] - xk)).exp(),
                    "driving measure",
                )
            })
            .collect();
    }
    let gamma = gamma_closed_form(x, params.alpha, gamma0, step)?;
    gamma
        .gamma
        .iter()
        .zip(v)
        .map(|(&g, &vk)| finite((params.theta1 + params.theta2 * vk).exp() * gamma0 / g, "driving measure"))
        .collect()
}

/// Λ(s, t) = exp[θ₁ + θ₂V]·γ₀/Γ(s, t) with γ₀ = αe^{−η}; for η = −∞ the
/// log-Gaussian form exp[θ₁ + θ₂V + α(X(s,t₀) − X(s,t))].
pub fn driving_measure(x: &Field<f64>, v: &CovariateField, params: &ModelParams, grid: &SpaceTimeGrid) -> Result<Field<f64>> {
    params.validate()?;
    x.check_shape(grid.n_cells(), grid.n_times(), "pressure")?;
    v.check_shape(grid.n_cells(), grid.n_times(), "covariates")?;
    let rows: Result<Vec<Vec<f64>>> = (0..grid.n_cells())
        .into_par_iter()
        .map(|i| driving_row(x.row(i), v.row(i), params, grid.step()))
        .collect();
    Field::from_rows(rows?)
}

fn poisson_draw<R: rand::Rng>(mean: f64, rng: &mut R) -> Result<u64> {
    if mean == 0.0 {
        return Ok(0);
    }
    if !(mean > 0.0 && mean.is_finite()) {
        return Err(Error::InvalidParameter(format!("Poisson mean {mean}")));
    }
    let d = Poisson::new(mean).map_err(|e| Error::InvalidParameter(format!("Poisson mean {mean}: {e}")))?;
    Ok(d.sample(rng) as u64)
}

/// Counts for one cell from its intensity row; index 0 stays zero.
pub(crate) fn count_row<R: rand::Rng>(lambda: &[f64], exposure: f64, rng: &mut R) -> Result<Vec<u64>> {
    let mut out = vec![0u64; lambda.len()];
    for k in 1..lambda.len() {
        out[k] = poisson_draw(lambda[k] * exposure, rng)?;
    }
    Ok(out)
}

/// Independent Poisson counts with mean Λ·Δ·Δ(s) for k ≥ 1.
pub fn sample_counts(lambda: &Field<f64>, grid: &SpaceTimeGrid, seed: u64) -> Result<CountsField> {
    lambda.check_shape(grid.n_cells(), grid.n_times(), "intensity")?;
    let rows: Result<Vec<Vec<u64>>> = grid
        .cells()
        .par_iter()
        .enumerate()
        .map(|(i, cell)| {
            let mut rng = stream(seed, Purpose::Counts, cell.id);
            count_row(lambda.row(i), grid.exposure(i), &mut rng)
        })
        .collect();
    Field::from_rows(rows?)
}

/// Noise, intensity and counts in one pass.
pub fn simulate_catalogue(
    pm: &PressureModel,
    v: &CovariateField,
    params: &ModelParams,
    grid: &SpaceTimeGrid,
    seed: u64,
) -> Result<SimOutput> {
    let mean = eval_mean(pm, grid)?;
    simulate_with_mean(&mean, pm.noise_var, v, params, grid, seed)
}

/// [`simulate_catalogue`] on an already evaluated mean field.
pub fn simulate_with_mean(
    mean: &MeanField,
    sigma2: f64,
    v: &CovariateField,
    params: &ModelParams,
    grid: &SpaceTimeGrid,
    seed: u64,
) -> Result<SimOutput> {
    let noise = sample_noise(grid, sigma2, seed)?;
    let x = add_fields(mean, &noise)?;
    let lambda = driving_measure(&x, v, params, grid)?;
    let counts = sample_counts(&lambda, grid, seed)?;
    Ok(SimOutput {
        noise,
        lambda,
        counts,
        seed,
    })
}
