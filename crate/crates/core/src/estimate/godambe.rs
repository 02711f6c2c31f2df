//! Grid-sum approximation of the Godambe matrix in the log-Gaussian limit.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{CovariateField, Field, MeanField};
use crate::grid::SpaceTimeGrid;
use crate::params::ModelParams;

/// U = −E J_F, Σ_F = Var F and the sandwich (UᵀΣ_F⁻¹U)⁻¹, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GodambeReport {
    pub u: Vec<Vec<f64>>,
    pub sigma_f: Vec<Vec<f64>>,
    pub sandwich: Vec<Vec<f64>>,
}

impl GodambeReport {
    /// Square roots of the sandwich diagonal.
    pub fn standard_errors(&self) -> Vec<f64> {
        (0..self.sandwich.len()).map(|i| self.sandwich[i][i].sqrt()).collect()
    }
}

/// λ(s,t;ζ) = exp[θ₁ + θ₂V + α(m₀ − m_t) + α²σ²], the marginal intensity of
/// the log-Gaussian model. At k = 0 the noise cancels and λ = e^{θ₁+θ₂V}.
pub fn marginal_intensity_field(params: &ModelParams, mean: &MeanField, covariates: &CovariateField, sigma2: f64) -> Field<f64> {
    let mut out = Field::filled(mean.n_cells(), mean.n_times(), 0.0);
    let a2s2 = params.alpha * params.alpha * sigma2;
    for i in 0..mean.n_cells() {
        let m = mean.row(i);
        let v = covariates.row(i);
        let row = out.row_mut(i);
        row[0] = (params.theta1 + params.theta2 * v[0]).exp();
        for k in 1..m.len() {
            row[k] = (params.theta1 + params.theta2 * v[k] + params.alpha * (m[0] - m[k]) + a2s2).exp();
        }
    }
    out
}

/// l = E[(X₀ − X_t) e^{θ₁+θ₂V} e^{α(X₀−X_t)}] for X₀ − X_t ~ N(μ_d, 2σ²):
/// e^{θ₁+θ₂V}(μ_d + 2ασ²) e^{αμ_d + α²σ²}.
pub fn l_closed_form(params: &ModelParams, covariate: f64, mu_d: f64, sigma2: f64) -> f64 {
    let a = params.alpha;
    (params.theta1 + params.theta2 * covariate).exp() * (mu_d + 2.0 * a * sigma2) * (a * mu_d + a * a * sigma2).exp()
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

/// U and Σ_F summed over cells and k ≥ 1 with weights Δ·Δ(s).
pub fn godambe_matrix(
    params: &ModelParams,
    grid: &SpaceTimeGrid,
    mean: &MeanField,
    covariates: &CovariateField,
    sigma2: f64,
) -> Result<GodambeReport> {
    params.validate()?;
    if !params.is_reduced() {
        return Err(Error::InvalidParameter("the Godambe matrix is only available for η = −∞".into()));
    }
    mean.check_shape(grid.n_cells(), grid.n_times(), "mean pressure")?;
    covariates.check_shape(grid.n_cells(), grid.n_times(), "covariates")?;
    let lambda = marginal_intensity_field(params, mean, covariates, sigma2);
    let mut u = DMatrix::<f64>::zeros(3, 3);
    let mut sf = DMatrix::<f64>::zeros(3, 3);
    for i in 0..grid.n_cells() {
        let a = grid.exposure(i);
        let (m, v) = (mean.row(i), covariates.row(i));
        for k in 1..grid.n_times() {
            let d = m[0] - m[k];
            let g = [1.0, v[k], d];
            let lam = lambda.get(i, k) * a;
            let l = l_closed_form(params, v[k], d, sigma2) * a;
            for r in 0..3 {
                u[(r, 0)] += g[r] * lam;
                u[(r, 1)] += g[r] * v[k] * lam;
                u[(r, 2)] += g[r] * l;
                for c in 0..3 {
                    sf[(r, c)] += g[r] * g[c] * lam;
                }
            }
        }
    }
    let sf_inv = sf
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Singular("Σ_F".into()))?;
    let info = u.transpose() * sf_inv * &u;
    let sandwich = info
        .try_inverse()
        .ok_or_else(|| Error::Singular("UᵀΣ_F⁻¹U".into()))?;
    Ok(GodambeReport {
        u: to_rows(&u),
        sigma_f: to_rows(&sf),
        sandwich: to_rows(&sandwich),
    })
}
