//! The deterministic skeleton S and its partial derivatives.
//!
//! With `c = e^η Δ` and `d_k = m_{k−1} − m_k`,
//!
//! ```text
//! S_0 = 1,   S_k = (S_{k−1} + c) e^{−α d_k}
//! ```
//!
//! which is `e^{α m_k} (c Σ_{i<k} e^{−α m_i} + e^{−α m_0})`. The scaling by
//! `e^{α m_k}` keeps everything O(1) at pressures of a few hundred bara and
//! turns the intensity skeleton into `h = e^{θ₁+θ₂V} / S`.

use serde::{Deserialize, Serialize};

use crate::error::{finite, Result};
use crate::params::ModelParams;

/// S along one series together with all first and second partials in (α, η).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkeletonSeries {
    pub s: Vec<f64>,
    pub d_alpha: Vec<f64>,
    pub d_eta: Vec<f64>,
    pub d_alpha2: Vec<f64>,
    pub d_alpha_eta: Vec<f64>,
    pub d_eta2: Vec<f64>,
}

/// Runs the recursions along `series`. `log_ratio = −∞` gives c = 0.
pub fn s_recursions(series: &[f64], alpha: f64, log_ratio: f64, step: f64) -> SkeletonSeries {
    let n = series.len();
    let c = log_ratio.exp() * step;
    let mut out = SkeletonSeries {
        s: vec![0.0; n],
        d_alpha: vec![0.0; n],
        d_eta: vec![0.0; n],
        d_alpha2: vec![0.0; n],
        d_alpha_eta: vec![0.0; n],
        d_eta2: vec![0.0; n],
    };
    if n == 0 {
        return out;
    }
    out.s[0] = 1.0;
    for k in 1..n {
        let d = series[k - 1] - series[k];
        let e = (-alpha * d).exp();
        out.s[k] = (out.s[k - 1] + c) * e;
        out.d_alpha[k] = out.d_alpha[k - 1] * e - d * out.s[k];
        out.d_eta[k] = (out.d_eta[k - 1] + c) * e;
        out.d_alpha2[k] = out.d_alpha2[k - 1] * e - d * (out.d_alpha[k] + out.d_alpha[k - 1] * e);
        out.d_alpha_eta[k] = out.d_alpha_eta[k - 1] * e - d * out.d_eta[k];
        out.d_eta2[k] = (out.d_eta2[k - 1] + c) * e;
    }
    out
}

/// First-order recursion only, written into caller buffers; used on MC samples.
pub(crate) fn s_first_order(series: &[f64], alpha: f64, c: f64, s: &mut [f64], d_alpha: &mut [f64], d_eta: &mut [f64]) {
    s[0] = 1.0;
    d_alpha[0] = 0.0;
    d_eta[0] = 0.0;
    for k in 1..series.len() {
        let d = series[k - 1] - series[k];
        let e = (-alpha * d).exp();
        s[k] = (s[k - 1] + c) * e;
        d_alpha[k] = d_alpha[k - 1] * e - d * s[k];
        d_eta[k] = (d_eta[k - 1] + c) * e;
    }
}

/// S by direct summation, `c Σ_{i<k} e^{α(m_k − m_i)} + e^{α(m_k − m_0)}`.
pub fn s_direct(series: &[f64], alpha: f64, log_ratio: f64, step: f64) -> Vec<f64> {
    let c = log_ratio.exp() * step;
    (0..series.len())
        .map(|k| {
            let tail: f64 = series[..k].iter().map(|&mi| (alpha * (series[k] - mi)).exp()).sum();
            c * tail + (alpha * (series[k] - series[0])).exp()
        })
        .collect()
}

/// h(s, t_k) = e^{θ₁+θ₂V} / S(s, t_k), the intensity when there is no noise.
pub fn skeleton_h(k: usize, covariate: f64, params: &ModelParams, series: &[f64], step: f64) -> Result<f64> {
    params.validate()?;
    let sk = s_recursions(&series[..=k], params.alpha, params.log_ratio, step);
    finite(
        (params.theta1 + params.theta2 * covariate).exp() * (1.0 / sk.s[k]),
        "skeleton h",
    )
}
