use log::{debug, warn};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::equation::{evaluate, Evaluation, FitData};
use super::godambe::{godambe_matrix, GodambeReport};
use super::samples::McSamples;
use crate::error::{Error, Result};
use crate::params::{ModelParams, ParamMode};
use crate::rate::CiPair;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonOptions {
    pub mode: ParamMode,
    /// Absolute tolerance on ‖F‖∞; `None` means 1e-8 × max(total count, 1).
    pub tolerance: Option<f64>,
    pub max_iterations: usize,
    pub max_halvings: usize,
    /// η is pinned to −∞ after staying below this floor...
    pub eta_floor: f64,
    /// ...for this many consecutive iterations.
    pub eta_pin_after: usize,
    /// Monte Carlo sample size L.
    pub n_mc: usize,
    pub mc_seed: u64,
    /// Assemble the Godambe report at the solution (reduced mode only).
    pub godambe: bool,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            mode: ParamMode::Reduced,
            tolerance: None,
            max_iterations: 100,
            max_halvings: 30,
            eta_floor: -40.0,
            eta_pin_after: 3,
            n_mc: 1000,
            mc_seed: 0,
            godambe: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewtonStep {
    pub iteration: usize,
    pub params: ModelParams,
    pub residual: f64,
    pub halvings: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub zeta_hat: ModelParams,
    /// Mode at termination; a full-mode fit whose η was pinned ends as `Reduced`.
    pub mode: ParamMode,
    pub iterations: usize,
    pub converged: bool,
    pub final_residual: f64,
    pub tolerance: f64,
    pub godambe: Option<GodambeReport>,
    pub bootstrap_cis: Option<Vec<CiPair>>,
    pub trace: Vec<NewtonStep>,
}

/// Starting point: θ₁ = log(total / exposure), θ₂ = 0, α = 0.01, η = −10 (full mode).
pub fn default_init(data: &FitData<'_>, mode: ParamMode) -> ModelParams {
    let total = data.total_count().max(1.0);
    ModelParams {
        theta1: (total / data.total_exposure()).ln(),
        theta2: 0.0,
        alpha: 0.01,
        log_ratio: match mode {
            ParamMode::Reduced => f64::NEG_INFINITY,
            ParamMode::Full => -10.0,
        },
    }
}

/// Solves F(ζ) = 0 with fresh samples drawn from `opts.mc_seed`.
pub fn newton_solve(data: &FitData<'_>, init: &ModelParams, opts: &NewtonOptions) -> Result<FitResult> {
    let samples = McSamples::generate(data.grid, data.sigma2, opts.n_mc, opts.mc_seed)?;
    newton_solve_with(data, init, opts, &samples)
}

fn newton_direction(eval: &Evaluation) -> Result<DVector<f64>> {
    let j: &DMatrix<f64> = eval.jacobian.as_ref().expect("jacobian requested");
    let lu = j.clone().lu();
    let rhs = -DVector::from_column_slice(&eval.f);
    let step = lu
        .solve(&rhs)
        .ok_or_else(|| Error::Singular("Jacobian of the estimating function".into()))?;
    if step.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular("Jacobian of the estimating function".into()));
    }
    Ok(step)
}

/// Newton iterations J(ζₙ)(ζₙ₊₁ − ζₙ) = −F(ζₙ) on a frozen sample set, with
/// step halving until ‖F‖∞ decreases and α stays positive.
pub fn newton_solve_with(data: &FitData<'_>, init: &ModelParams, opts: &NewtonOptions, samples: &McSamples) -> Result<FitResult> {
    init.validate()?;
    let tol = opts
        .tolerance
        .unwrap_or(1e-8 * data.total_count().max(1.0));
    let mut mode = opts.mode;
    let mut zeta = match mode {
        ParamMode::Reduced => ModelParams::from_slice(&init.to_vec(ParamMode::Reduced), ParamMode::Reduced),
        ParamMode::Full if init.is_reduced() => ModelParams { log_ratio: opts.eta_floor / 4.0, ..*init },
        ParamMode::Full => *init,
    };
    let mut eval = evaluate(data, &zeta, mode, samples, true)?;
    let mut residual = eval.sup_norm();
    let mut trace = vec![NewtonStep {
        iteration: 0,
        params: zeta,
        residual,
        halvings: 0,
    }];
    let mut below_floor = 0;
    let mut iterations = 0;
    let mut converged = residual < tol;
    while !converged && iterations < opts.max_iterations {
        iterations += 1;
        let dir = newton_direction(&eval)?;
        let current = zeta.to_vec(mode);
        let mut t = 1.0;
        let mut accepted = None;
        for halvings in 0..=opts.max_halvings {
            let trial: Vec<f64> = current.iter().zip(dir.iter()).map(|(z, d)| z + t * d).collect();
            let candidate = ModelParams::from_slice(&trial, mode);
            if candidate.validate().is_ok() {
                if let Ok(next) = evaluate(data, &candidate, mode, samples, true) {
                    let r = next.sup_norm();
                    if r < residual {
                        accepted = Some((candidate, next, r, halvings));
                        break;
                    }
                }
            }
            t *= 0.5;
        }
        let Some((candidate, next, r, halvings)) = accepted else {
            warn!("Newton step failed to reduce the residual after {} halvings", opts.max_halvings);
            break;
        };
        zeta = candidate;
        eval = next;
        residual = r;
        debug!("newton iteration {iterations}: residual {residual:e}, halvings {halvings}");
        trace.push(NewtonStep {
            iteration: iterations,
            params: zeta,
            residual,
            halvings,
        });
        converged = residual < tol;
        if mode == ParamMode::Full && !converged {
            below_floor = if zeta.log_ratio < opts.eta_floor { below_floor + 1 } else { 0 };
            if below_floor >= opts.eta_pin_after {
                mode = ParamMode::Reduced;
                zeta.log_ratio = f64::NEG_INFINITY;
                eval = evaluate(data, &zeta, mode, samples, true)?;
                residual = eval.sup_norm();
                converged = residual < tol;
            }
        }
    }
    let godambe = if opts.godambe && converged && mode == ParamMode::Reduced {
        godambe_matrix(&zeta, data.grid, data.mean, data.covariates, data.sigma2).ok()
    } else {
        None
    };
    Ok(FitResult {
        zeta_hat: zeta,
        mode,
        iterations,
        converged,
        final_residual: residual,
        tolerance: tol,
        godambe,
        bootstrap_cis: None,
        trace,
    })
}
