//! The modified estimating equation, its Monte Carlo intensity estimator
//! and the analytic Jacobian.

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::samples::McSamples;
use super::skeleton::{s_first_order, s_recursions, SkeletonSeries};
use crate::error::{finite, Error, Result};
use crate::field::{CountsField, CovariateField, Field, MeanField};
use crate::grid::SpaceTimeGrid;
use crate::params::{ModelParams, ParamMode};

/// Counts entering the estimating equation: observed integers, or real-valued
/// stand-ins such as expected counts.
#[derive(Debug, Clone, Copy)]
pub enum CountData<'a> {
    Observed(&'a CountsField),
    Expected(&'a Field<f64>),
}

impl CountData<'_> {
    pub fn get(&self, cell: usize, k: usize) -> f64 {
        match self {
            CountData::Observed(c) => *c.get(cell, k) as f64,
            CountData::Expected(c) => *c.get(cell, k),
        }
    }

    pub fn row(&self, cell: usize) -> Vec<f64> {
        match self {
            CountData::Observed(c) => c.row(cell).iter().map(|&n| n as f64).collect(),
            CountData::Expected(c) => c.row(cell).to_vec(),
        }
    }

    /// Sum over cells and k ≥ 1.
    pub fn total(&self) -> f64 {
        match self {
            CountData::Observed(c) => c.total() as f64,
            CountData::Expected(c) => c.rows().map(|r| r.iter().skip(1).sum::<f64>()).sum(),
        }
    }

    fn check_shape(&self, n_cells: usize, n_times: usize) -> Result<()> {
        match self {
            CountData::Observed(c) => c.check_shape(n_cells, n_times, "counts"),
            CountData::Expected(c) => {
                c.check_shape(n_cells, n_times, "counts")?;
                if c.as_slice().iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
                    return Err(Error::InvalidParameter("counts must be finite and non-negative".into()));
                }
                Ok(())
            }
        }
    }
}

/// Observed data and the fitted pressure model.
#[derive(Debug, Clone, Copy)]
pub struct FitData<'a> {
    pub grid: &'a SpaceTimeGrid,
    pub counts: CountData<'a>,
    pub covariates: &'a CovariateField,
    pub mean: &'a MeanField,
    pub sigma2: f64,
}

impl<'a> FitData<'a> {
    pub fn new(
        grid: &'a SpaceTimeGrid,
        counts: &'a CountsField,
        covariates: &'a CovariateField,
        mean: &'a MeanField,
        sigma2: f64,
    ) -> Result<Self> {
        let (n, t) = (grid.n_cells(), grid.n_times());
        CountData::Observed(counts).check_shape(n, t)?;
        covariates.check_shape(n, t, "covariates")?;
        mean.check_shape(n, t, "mean pressure")?;
        if !(sigma2 >= 0.0 && sigma2.is_finite()) {
            return Err(Error::InvalidParameter(format!("noise variance must be >= 0, got {sigma2}")));
        }
        if covariates.as_slice().iter().chain(mean.as_slice()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite covariate or mean pressure".into()));
        }
        Ok(Self {
            grid,
            counts: CountData::Observed(counts),
            covariates,
            mean,
            sigma2,
        })
    }

    pub fn with_counts(&self, counts: &'a CountsField) -> Self {
        Self {
            counts: CountData::Observed(counts),
            ..*self
        }
    }

    /// Replaces the counts by real values, e.g. their expectations.
    pub fn with_expected_counts(&self, counts: &'a Field<f64>) -> Result<Self> {
        let c = CountData::Expected(counts);
        c.check_shape(self.grid.n_cells(), self.grid.n_times())?;
        Ok(Self { counts: c, ..*self })
    }

    /// Σ N over k ≥ 1.
    pub fn total_count(&self) -> f64 {
        self.counts.total()
    }

    /// Σ Δ·Δ(s) over cells and k ≥ 1.
    pub fn total_exposure(&self) -> f64 {
        (0..self.grid.n_cells()).map(|i| self.grid.exposure(i)).sum::<f64>() * self.grid.n_steps() as f64
    }
}

/// Skeleton on the mean pressure plus L-averaged terms on the sampled pressures.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSkeleton {
    pub mean: SkeletonSeries,
    /// (1/L) Σ_l 1/S_{X_l}.
    pub inv_s: Vec<f64>,
    /// (1/L) Σ_l ∂(1/S_{X_l})/∂α.
    pub dinv_alpha: Vec<f64>,
    /// (1/L) Σ_l ∂(1/S_{X_l})/∂η.
    pub dinv_eta: Vec<f64>,
}

/// Per-cell [`CellSkeleton`]s at one parameter value.
#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonCache {
    pub cells: Vec<CellSkeleton>,
}

impl SkeletonCache {
    pub fn build(data: &FitData<'_>, params: &ModelParams, samples: &McSamples) -> Result<Self> {
        check_samples(data, samples)?;
        let cells = (0..data.grid.n_cells())
            .into_par_iter()
            .map(|i| cell_skeleton(data.mean.row(i), params, data.grid.step(), samples, i))
            .collect();
        Ok(Self { cells })
    }
}

fn check_samples(data: &FitData<'_>, samples: &McSamples) -> Result<()> {
    if samples.n_times() != data.grid.n_times() {
        return Err(Error::DimensionMismatch(format!(
            "samples have {} times, grid has {}",
            samples.n_times(),
            data.grid.n_times()
        )));
    }
    Ok(())
}

fn cell_skeleton(mean: &[f64], params: &ModelParams, step: f64, samples: &McSamples, cell: usize) -> CellSkeleton {
    let n = mean.len();
    let sk = s_recursions(mean, params.alpha, params.log_ratio, step);
    if samples.is_degenerate() {
        let inv_s: Vec<f64> = sk.s.iter().map(|s| 1.0 / s).collect();
        let dinv_alpha = sk.d_alpha.iter().zip(&sk.s).map(|(d, s)| -d / (s * s)).collect();
        let dinv_eta = sk.d_eta.iter().zip(&sk.s).map(|(d, s)| -d / (s * s)).collect();
        return CellSkeleton {
            mean: sk,
            inv_s,
            dinv_alpha,
            dinv_eta,
        };
    }
    let mut inv_s = vec![0.0; n];
    let mut dinv_alpha = vec![0.0; n];
    let mut dinv_eta = vec![0.0; n];
    let mut x = vec![0.0; n];
    let (mut s, mut sa, mut se) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let c = params.log_ratio.exp() * step;
    let reduced = params.is_reduced();
    for l in 0..samples.n_samples() {
        for ((xk, m), e) in x.iter_mut().zip(mean).zip(samples.noise(cell, l)) {
            *xk = m + e;
        }
        if reduced {
            for k in 0..n {
                let d = x[0] - x[k];
                let w = (params.alpha * d).exp();
                inv_s[k] += w;
                dinv_alpha[k] += d * w;
            }
        } else {
            s_first_order(&x, params.alpha, c, &mut s, &mut sa, &mut se);
            for k in 0..n {
                let inv = 1.0 / s[k];
                inv_s[k] += inv;
                dinv_alpha[k] -= sa[k] * inv * inv;
                dinv_eta[k] -= se[k] * inv * inv;
            }
        }
    }
    let scale = 1.0 / samples.n_samples() as f64;
    for k in 0..n {
        inv_s[k] *= scale;
        dinv_alpha[k] *= scale;
        dinv_eta[k] *= scale;
    }
    CellSkeleton {
        mean: sk,
        inv_s,
        dinv_alpha,
        dinv_eta,
    }
}

/// λ̂(s, t_k; ζ) = e^{θ₁+θ₂V}·(1/L) Σ_l 1/S_{X_l}(s, t_k).
pub fn lambda_hat(data: &FitData<'_>, cell: usize, k: usize, params: &ModelParams, samples: &McSamples) -> Result<f64> {
    params.validate()?;
    check_samples(data, samples)?;
    let sk = cell_skeleton(data.mean.row(cell), params, data.grid.step(), samples, cell);
    let v = data.covariates.get(cell, k);
    finite((params.theta1 + params.theta2 * v).exp() * sk.inv_s[k], "intensity estimate")
}

/// F(ζ) and, optionally, its Jacobian.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub f: Vec<f64>,
    pub jacobian: Option<DMatrix<f64>>,
}

impl Evaluation {
    pub fn sup_norm(&self) -> f64 {
        self.f.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }
}

fn effective(params: &ModelParams, mode: ParamMode) -> Result<ModelParams> {
    params.validate()?;
    Ok(match mode {
        ParamMode::Reduced => ModelParams {
            log_ratio: f64::NEG_INFINITY,
            ..*params
        },
        ParamMode::Full => *params,
    })
}

fn cell_terms(
    data: &FitData<'_>,
    cell: usize,
    sk: &CellSkeleton,
    params: &ModelParams,
    dim: usize,
    with_jacobian: bool,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut f = vec![0.0; dim];
    let mut j = vec![0.0; if with_jacobian { dim * dim } else { 0 }];
    let a = data.grid.exposure(cell);
    let v_row = data.covariates.row(cell);
    let n_row = data.counts.row(cell);
    let m = &sk.mean;
    for k in 1..v_row.len() {
        let v = v_row[k];
        let th = finite((params.theta1 + params.theta2 * v).exp(), "exp(θ₁ + θ₂V)")?;
        let lam = finite(th * sk.inv_s[k], "intensity estimate")?;
        let r = n_row[k] - lam * a;
        let s = m.s[k];
        let ga = m.d_alpha[k] / s;
        let ge = m.d_eta[k] / s;
        let g = [1.0, v, -ga, -ge];
        for i in 0..dim {
            f[i] += g[i] * r;
        }
        if with_jacobian {
            let dl = [lam, v * lam, th * sk.dinv_alpha[k], th * sk.dinv_eta[k]];
            // ∂g₃/∂(α, η) and ∂g₄/∂(α, η); the first two components of g are constant.
            let dg = [
                [-(m.d_alpha2[k] / s - ga * ga), -(m.d_alpha_eta[k] / s - ga * ge)],
                [-(m.d_alpha_eta[k] / s - ga * ge), -(m.d_eta2[k] / s - ge * ge)],
            ];
            for row in 0..dim {
                for col in 0..dim {
                    let mut entry = -g[row] * dl[col] * a;
                    if row >= 2 && col >= 2 {
                        entry += dg[row - 2][col - 2] * r;
                    }
                    j[row * dim + col] += entry;
                }
            }
        }
    }
    Ok((f, j))
}

/// F(ζ) and optionally J_F(ζ), both on the same frozen samples.
pub fn evaluate(
    data: &FitData<'_>,
    params: &ModelParams,
    mode: ParamMode,
    samples: &McSamples,
    with_jacobian: bool,
) -> Result<Evaluation> {
    let params = effective(params, mode)?;
    check_samples(data, samples)?;
    let dim = mode.dim();
    let step = data.grid.step();
    let parts: Result<Vec<(Vec<f64>, Vec<f64>)>> = (0..data.grid.n_cells())
        .into_par_iter()
        .map(|i| {
            let sk = cell_skeleton(data.mean.row(i), &params, step, samples, i);
            cell_terms(data, i, &sk, &params, dim, with_jacobian)
        })
        .collect();
    let mut f = vec![0.0; dim];
    let mut j = vec![0.0; dim * dim];
    for (pf, pj) in parts? {
        for (acc, v) in f.iter_mut().zip(&pf) {
            *acc += v;
        }
        for (acc, v) in j.iter_mut().zip(&pj) {
            *acc += v;
        }
    }
    for v in f.iter().chain(&j) {
        finite(*v, "estimating function")?;
    }
    Ok(Evaluation {
        f,
        jacobian: with_jacobian.then(|| DMatrix::from_row_slice(dim, dim, &j)),
    })
}

/// F(ζ) = Σ_{cells, k≥1} (∇h/h)·[N − λ̂ΔΔ(s)].
pub fn estimating_function(data: &FitData<'_>, params: &ModelParams, mode: ParamMode, samples: &McSamples) -> Result<Vec<f64>> {
    Ok(evaluate(data, params, mode, samples, false)?.f)
}

/// J_F(ζ) with rows indexed by the components of F and columns by ζ.
pub fn jacobian(data: &FitData<'_>, params: &ModelParams, mode: ParamMode, samples: &McSamples) -> Result<DMatrix<f64>> {
    Ok(evaluate(data, params, mode, samples, true)?
        .jacobian
        .expect("jacobian requested"))
}
