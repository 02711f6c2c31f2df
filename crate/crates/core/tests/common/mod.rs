#![allow(dead_code)]

use coxrate::field::{CountsField, Field};
use coxrate::params::ModelParams;
use coxrate::scenario::{groningen_like, FieldScenario};
use coxrate::sim::simulate_with_mean;
use nalgebra::{DMatrix, DVector};

pub fn scenario(n: usize, m: usize, sigma2: f64, total: f64) -> FieldScenario {
    groningen_like(n, n, m, coxrate::scenario::groningen_params(), sigma2, total).unwrap()
}

pub fn simulate(sc: &FieldScenario, params: &ModelParams, seed: u64) -> CountsField {
    simulate_with_mean(&sc.mean, sc.sigma2, &sc.covariates, params, &sc.grid, seed)
        .unwrap()
        .counts
}

/// Expected counts λΔΔ(s) under the log-Gaussian marginal.
pub fn expected_counts(sc: &FieldScenario, params: &ModelParams) -> Field<f64> {
    let lam = coxrate::estimate::marginal_intensity_field(params, &sc.mean, &sc.covariates, sc.sigma2);
    let mut out = lam.clone();
    for i in 0..sc.grid.n_cells() {
        let a = sc.grid.exposure(i);
        for v in out.row_mut(i).iter_mut() {
            *v *= a;
        }
        out.row_mut(i)[0] = 0.0;
    }
    out
}

/// Poisson log-linear regression by iteratively reweighted least squares.
///
/// Rows are (design, offset, response); returns β maximizing
/// Σ y(xβ + o) − exp(xβ + o).
pub fn poisson_irls(rows: &[(Vec<f64>, f64, f64)], init: &[f64]) -> Vec<f64> {
    let p = init.len();
    let mut beta = DVector::from_column_slice(init);
    for _ in 0..200 {
        let mut xtwx = DMatrix::<f64>::zeros(p, p);
        let mut score = DVector::<f64>::zeros(p);
        for (x, offset, y) in rows {
            let x = DVector::from_column_slice(x);
            let mu = (x.dot(&beta) + offset).exp();
            xtwx += &x * x.transpose() * mu;
            score += &x * (y - mu);
        }
        let step = xtwx.lu().solve(&score).expect("non-singular information");
        beta += &step;
        if step.amax() < 1e-13 * beta.amax().max(1.0) {
            break;
        }
    }
    beta.iter().copied().collect()
}
