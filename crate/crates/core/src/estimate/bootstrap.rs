use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::equation::FitData;
use super::newton::{newton_solve, FitResult, NewtonOptions};
use crate::error::{Error, Result};
use crate::params::{ModelParams, ParamMode};
use crate::rate::CiPair;
use crate::rng::{derive_seed, Purpose};
use crate::sim::simulate_with_mean;

/// Percentile intervals and the refitted estimates they came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    pub cis: Vec<CiPair>,
    /// Successful refits in replicate order.
    pub estimates: Vec<ModelParams>,
    pub failed: usize,
    pub n_boot: usize,
}

/// Type-7 (linear interpolation) sample quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    let frac = h - lo as f64;
    if lo == hi || sorted[lo] == sorted[hi] || frac == 0.0 {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}

/// Simulates `n_boot` catalogues at ζ̂, refits each from ζ̂ on fresh Monte Carlo
/// samples and returns per-parameter percentile intervals.
///
/// Aborts when more than 20% of the refits fail to converge.
pub fn bootstrap_ci(
    fit: &FitResult,
    data: &FitData<'_>,
    opts: &NewtonOptions,
    n_boot: usize,
    level: f64,
    seed: u64,
) -> Result<BootstrapResult> {
    if !fit.converged {
        return Err(Error::InvalidParameter("bootstrap requires a converged fit".into()));
    }
    if n_boot < 2 {
        return Err(Error::InsufficientData("at least two bootstrap replicates are required".into()));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidParameter(format!("confidence level must lie in (0, 1), got {level}")));
    }
    let zeta = fit.zeta_hat;
    let refit_opts = NewtonOptions {
        mode: fit.mode,
        godambe: false,
        ..*opts
    };
    let outcomes: Vec<Option<ModelParams>> = (0..n_boot as u64)
        .into_par_iter()
        .map(|b| {
            let replicate = derive_seed(seed, Purpose::Bootstrap, b);
            let sim = simulate_with_mean(data.mean, data.sigma2, data.covariates, &zeta, data.grid, replicate).ok()?;
            let boot = data.with_counts(&sim.counts);
            let o = NewtonOptions {
                mc_seed: derive_seed(replicate, Purpose::McSamples, 0),
                ..refit_opts
            };
            let refit = newton_solve(&boot, &zeta, &o).ok()?;
            refit.converged.then_some(refit.zeta_hat)
        })
        .collect();
    let estimates: Vec<ModelParams> = outcomes.iter().flatten().copied().collect();
    let failed = n_boot - estimates.len();
    if failed > 0 {
        warn!("{failed} of {n_boot} bootstrap refits failed");
    }
    if failed * 5 > n_boot || estimates.len() < 2 {
        return Err(Error::BootstrapFailures { failed, total: n_boot });
    }
    let dim = fit.mode.dim();
    let cis = (0..dim)
        .map(|c| {
            let mut values: Vec<f64> = estimates.iter().map(|p| p.to_vec(ParamMode::Full)[c]).collect();
            values.sort_by(f64::total_cmp);
            CiPair {
                lo: quantile_sorted(&values, (1.0 - level) / 2.0),
                hi: quantile_sorted(&values, (1.0 + level) / 2.0),
                level,
            }
        })
        .collect();
    Ok(BootstrapResult {
        cis,
        estimates,
        failed,
        n_boot,
    })
}
