//! Moments of the rate 1/Γ: second-order delta approximations, a Monte Carlo
//! reference, and the pointwise confidence intervals used to compare them.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::rng::{stream, Purpose};
use crate::state::MomentSpec;

/// Delta approximations over k = 0..=m.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateMoments {
    pub mean_approx: Vec<f64>,
    pub var_approx: Vec<f64>,
    /// Row-major (m+1) × (m+1) approximations of E[1/(Γ_kΓ_l)].
    pub cross_approx: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CiPair {
    pub lo: f64,
    pub hi: f64,
    pub level: f64,
}

impl CiPair {
    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

fn positive_mean(spec: &MomentSpec, k: usize) -> Result<f64> {
    let mean = spec.state_mean(k)?;
    if !(mean > 0.0) {
        return Err(Error::NonPositive(format!("E Γ(t_{k}) = {mean}")));
    }
    Ok(mean)
}

/// E[1/Γ_k] ≈ 1/EΓ_k + VarΓ_k/(EΓ_k)³.
pub fn rate_mean_approx(spec: &MomentSpec, k: usize) -> Result<f64> {
    let mean = positive_mean(spec, k)?;
    Ok(1.0 / mean + spec.state_var(k)? / mean.powi(3))
}

/// Var[1/Γ_k] ≈ VarΓ_k/(EΓ_k)⁴.
pub fn rate_var_approx(spec: &MomentSpec, k: usize) -> Result<f64> {
    let mean = positive_mean(spec, k)?;
    Ok(spec.state_var(k)? / mean.powi(4))
}

/// E[1/(Γ_kΓ_l)] from the second-order expansion of (x, y) ↦ 1/(xy) around the means.
/// The first-order terms vanish in expectation, leaving
/// `1/(E_kE_l) + Cov/(E_k²E_l²) + Var_k/(E_k³E_l) + Var_l/(E_kE_l³)`.
pub fn rate_cross_approx(spec: &MomentSpec, k: usize, l: usize) -> Result<f64> {
    let ek = positive_mean(spec, k)?;
    let el = positive_mean(spec, l)?;
    let cov = spec.state_cov(k, l)?;
    let vk = spec.state_var(k)?;
    let vl = spec.state_var(l)?;
    Ok(1.0 / (ek * el) + cov / (ek * ek * el * el) + vk / (ek.powi(3) * el) + vl / (ek * el.powi(3)))
}

/// All three approximations for k, l in `1..=m`. Index 0 entries are NaN when γ₀ = 0.
pub fn rate_moments(spec: &MomentSpec) -> Result<RateMoments> {
    let n = spec.last_index() + 1;
    let start = if spec.gamma0() > 0.0 { 0 } else { 1 };
    let mut mean_approx = vec![f64::NAN; n];
    let mut var_approx = vec![f64::NAN; n];
    let mut cross_approx = vec![f64::NAN; n * n];
    for k in start..n {
        mean_approx[k] = rate_mean_approx(spec, k)?;
        var_approx[k] = rate_var_approx(spec, k)?;
        for l in start..n {
            cross_approx[k * n + l] = rate_cross_approx(spec, k, l)?;
        }
    }
    Ok(RateMoments {
        mean_approx,
        var_approx,
        cross_approx,
    })
}

/// Simulated rates 1/Γ_k: `samples[k][j]` for trajectory j.
#[derive(Debug, Clone, PartialEq)]
pub struct RateSamples {
    pub samples: Vec<Vec<f64>>,
}

/// Sample statistics of 1/Γ_k over independent trajectories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McRateMoments {
    pub n: usize,
    pub mean: Vec<f64>,
    pub mean_se: Vec<f64>,
    /// Unbiased sample variance.
    pub var: Vec<f64>,
    pub var_se: Vec<f64>,
    /// Row-major sample means of 1/(Γ_kΓ_l).
    pub cross: Vec<f64>,
    pub cross_se: Vec<f64>,
}

/// Simulates `n` trajectories X = m + E and returns 1/Γ_k for k = 0..=m.
/// Trajectory j uses its own stream, so the output does not depend on the worker count.
pub fn sample_rates(spec: &MomentSpec, n: usize, seed: u64) -> Result<RateSamples> {
    let m = spec.last_index();
    let sd = spec.sigma2().sqrt();
    let series = spec.mean_series();
    let trajectories: Vec<Result<Vec<f64>>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let mut rng = stream(seed, Purpose::RateTrajectory, j as u64);
            let x: Vec<f64> = series
                .iter()
                .map(|&mu| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    mu + sd * z
                })
                .collect();
            let gamma = crate::state::gamma_closed_form(&x, spec.alpha(), spec.gamma0(), spec.step())?;
            Ok(gamma.gamma.iter().map(|g| 1.0 / g).collect())
        })
        .collect();
    let mut samples = vec![Vec::with_capacity(n); m + 1];
    for t in trajectories {
        for (k, r) in t?.into_iter().enumerate() {
            samples[k].push(r);
        }
    }
    Ok(RateSamples { samples })
}

fn mean_of(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn sample_var(v: &[f64]) -> f64 {
    let mu = mean_of(v);
    v.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (v.len() as f64 - 1.0)
}

/// Monte Carlo moments of 1/Γ with standard errors. Reductions run in trajectory order.
pub fn mc_rate_moments(spec: &MomentSpec, n: usize, seed: u64) -> Result<McRateMoments> {
    if n < 2 {
        return Err(Error::InsufficientData("need at least two trajectories".into()));
    }
    let RateSamples { samples } = sample_rates(spec, n, seed)?;
    let nk = samples.len();
    let nf = n as f64;
    let mut out = McRateMoments {
        n,
        mean: vec![0.0; nk],
        mean_se: vec![0.0; nk],
        var: vec![0.0; nk],
        var_se: vec![0.0; nk],
        cross: vec![0.0; nk * nk],
        cross_se: vec![0.0; nk * nk],
    };
    for (k, s) in samples.iter().enumerate() {
        let mu = mean_of(s);
        let var = sample_var(s);
        let m4 = s.iter().map(|x| (x - mu).powi(4)).sum::<f64>() / nf;
        out.mean[k] = mu;
        out.var[k] = var;
        out.mean_se[k] = (var / nf).sqrt();
        out.var_se[k] = ((m4 - var * var * (nf - 3.0) / (nf - 1.0)).max(0.0) / nf).sqrt();
    }
    for k in 0..nk {
        for l in k..nk {
            let prod: Vec<f64> = samples[k].iter().zip(&samples[l]).map(|(a, b)| a * b).collect();
            let mu = mean_of(&prod);
            let se = (sample_var(&prod) / nf).sqrt();
            for (a, b) in [(k, l), (l, k)] {
                out.cross[a * nk + b] = mu;
                out.cross_se[a * nk + b] = se;
            }
        }
    }
    Ok(out)
}

fn normal_quantile(level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidParameter(format!("confidence level must lie in (0,1), got {level}")));
    }
    let std = Normal::new(0.0, 1.0).expect("standard normal");
    Ok(std.inverse_cdf(0.5 + level / 2.0))
}

/// Ȳ ± ξ·S/√n.
pub fn mean_ci(sample: &[f64], level: f64) -> Result<CiPair> {
    if sample.len() < 2 {
        return Err(Error::InsufficientData("mean interval needs two observations".into()));
    }
    let xi = normal_quantile(level)?;
    let n = sample.len() as f64;
    let mu = mean_of(sample);
    let half = xi * (sample_var(sample) / n).sqrt();
    Ok(CiPair {
        lo: mu - half,
        hi: mu + half,
        level,
    })
}

/// Kurtosis estimate n Σ(Y − med)⁴ / ((n − 1)² S⁴) with the sample median as centre.
pub fn kurtosis_median(sample: &[f64]) -> f64 {
    let n = sample.len() as f64;
    let med = median(sample);
    let s2 = sample_var(sample);
    n * sample.iter().map(|y| (y - med).powi(4)).sum::<f64>() / ((n - 1.0).powi(2) * s2 * s2)
}

/// Median with the midpoint convention for even sizes.
pub fn median(sample: &[f64]) -> f64 {
    let mut v = sample.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Variance interval S²/(1 ± ξ√(2ζ/(n − 1))) with ζ = (γ̂₄ − 1)/2.
pub fn var_ci(sample: &[f64], level: f64) -> Result<CiPair> {
    if sample.len() < 2 {
        return Err(Error::InsufficientData("variance interval needs two observations".into()));
    }
    let s2 = sample_var(sample);
    let zeta = 0.5 * (kurtosis_median(sample) - 1.0);
    var_ci_with_zeta(s2, sample.len(), zeta, level)
}

/// [`var_ci`] with the kurtosis factor ζ supplied.
pub fn var_ci_with_zeta(s2: f64, n: usize, zeta: f64, level: f64) -> Result<CiPair> {
    let xi = normal_quantile(level)?;
    if !(zeta >= 0.0) {
        return Err(Error::DegenerateInterval(format!("kurtosis factor {zeta} is not a non-negative number")));
    }
    let spread = xi * (2.0 * zeta / (n as f64 - 1.0)).sqrt();
    if !(1.0 - spread > 0.0) {
        return Err(Error::DegenerateInterval(format!(
            "kurtosis factor {zeta} makes the lower denominator 1 - {spread} non-positive"
        )));
    }
    Ok(CiPair {
        lo: s2 / (1.0 + spread),
        hi: s2 / (1.0 - spread),
        level,
    })
}
