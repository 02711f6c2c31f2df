//! The state variable Γ: exact simulation and its first two moments under
//! independent Gaussian pressure noise.

use serde::{Deserialize, Serialize};

use crate::error::{finite, Error, Result};

/// Γ(s, t_k) for k = 0..=m at one location.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateTrajectory {
    pub gamma: Vec<f64>,
}

/// One Euler step `(Γ_k + αΔ)·exp[α(x_{k+1} − x_k)]`.
pub fn gamma_euler_step(gamma_k: f64, x_k: f64, x_k1: f64, alpha: f64, step: f64) -> Result<f64> {
    if !(gamma_k >= 0.0) {
        return Err(Error::InvalidParameter(format!("state must be non-negative, got {gamma_k}")));
    }
    finite((gamma_k + alpha * step) * (alpha * (x_k1 - x_k)).exp(), "Euler step")
}

/// Explicit solution of the Euler recursion started at Γ(t₀) = γ₀.
///
/// Evaluated on pressure differences, `Γ_k = αΔ Σ_{i<k} e^{α(x_k − x_i)} + γ₀ e^{α(x_k − x_0)}`,
/// so that large α·x products do not overflow.
pub fn gamma_closed_form(x: &[f64], alpha: f64, gamma0: f64, step: f64) -> Result<StateTrajectory> {
    if !(alpha > 0.0) || !(gamma0 >= 0.0) || !(step > 0.0) {
        return Err(Error::InvalidParameter("need alpha > 0, gamma0 >= 0, step > 0".into()));
    }
    if x.is_empty() || x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("pressure series must be finite and non-empty".into()));
    }
    let mut gamma = Vec::with_capacity(x.len());
    gamma.push(gamma0);
    for k in 1..x.len() {
        let sum: f64 = x[..k].iter().map(|&xi| (alpha * (x[k] - xi)).exp()).sum();
        let g = alpha * step * sum + gamma0 * (alpha * (x[k] - x[0])).exp();
        gamma.push(finite(g, "closed-form state")?);
    }
    Ok(StateTrajectory { gamma })
}

/// Inputs for the moments of Γ at one location.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSpec {
    mean_series: Vec<f64>,
    alpha: f64,
    gamma0: f64,
    sigma2: f64,
    step: f64,
    /// c − 1, c² − 1 and 1 − 1/c, computed with expm1.
    c_minus_1: f64,
    c2_minus_1: f64,
    one_minus_inv_c: f64,
    /// f_{ij} = exp[α(m_i − m_j)], row-major.
    f: Vec<f64>,
}

/// Sign structure of Cov(Γ_k, Γ_l) implied by the monotonicity of m.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CovSign {
    /// Every covariance is non-negative.
    NonNegAll,
    /// Cov(Γ_k, Γ_l) − (αΔγ₀ + γ₀²)c²(c − 1)f_{k0}f_{l0} ≤ 0 for all 0 < k < l.
    BoundedNegative,
    /// Neither sufficient condition applies.
    Indeterminate,
}

impl MomentSpec {
    pub fn new(mean_series: Vec<f64>, alpha: f64, gamma0: f64, sigma2: f64, step: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidParameter(format!("alpha must be positive, got {alpha}")));
        }
        if !(gamma0 >= 0.0 && gamma0.is_finite()) {
            return Err(Error::InvalidParameter(format!("gamma0 must be >= 0, got {gamma0}")));
        }
        if !(sigma2 >= 0.0 && sigma2.is_finite()) {
            return Err(Error::InvalidParameter(format!("sigma2 must be >= 0, got {sigma2}")));
        }
        if !(step > 0.0) {
            return Err(Error::InvalidParameter("step must be positive".into()));
        }
        if mean_series.is_empty() || mean_series.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("mean series must be finite and non-empty".into()));
        }
        let n = mean_series.len();
        let mut f = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                f[i * n + j] = finite((alpha * (mean_series[i] - mean_series[j])).exp(), "f table")?;
            }
        }
        let a2s2 = alpha * alpha * sigma2;
        Ok(Self {
            mean_series,
            alpha,
            gamma0,
            sigma2,
            step,
            c_minus_1: a2s2.exp_m1(),
            c2_minus_1: (2.0 * a2s2).exp_m1(),
            one_minus_inv_c: -(-a2s2).exp_m1(),
            f,
        })
    }

    pub fn mean_series(&self) -> &[f64] {
        &self.mean_series
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn gamma0(&self) -> f64 {
        self.gamma0
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// Largest epoch index m.
    pub fn last_index(&self) -> usize {
        self.mean_series.len() - 1
    }

    /// c = exp(α²σ²).
    pub fn c_factor(&self) -> f64 {
        1.0 + self.c_minus_1
    }

    pub fn f(&self, i: usize, j: usize) -> f64 {
        self.f[i * self.mean_series.len() + j]
    }

    fn check_index(&self, k: usize) -> Result<()> {
        if k > self.last_index() {
            return Err(Error::InvalidParameter(format!("index {k} beyond m = {}", self.last_index())));
        }
        Ok(())
    }

    /// E Γ(t_k) = c(αΔ Σ_{i<k} f_{ki} + γ₀ f_{k0}) for k ≥ 1, and γ₀ at k = 0.
    pub fn state_mean(&self, k: usize) -> Result<f64> {
        self.check_index(k)?;
        if k == 0 {
            return Ok(self.gamma0);
        }
        let sum: f64 = (0..k).map(|i| self.f(k, i)).sum();
        let ad = self.alpha * self.step;
        finite(self.c_factor() * (ad * sum + self.gamma0 * self.f(k, 0)), "state mean")
    }

    /// Cov(Γ(t_k), Γ(t_l)); symmetric, and zero whenever an index is 0 because Γ(t₀) = γ₀.
    pub fn state_cov(&self, k: usize, l: usize) -> Result<f64> {
        self.check_index(k)?;
        self.check_index(l)?;
        let (k, l) = if k <= l { (k, l) } else { (l, k) };
        if k == 0 || self.sigma2 == 0.0 {
            return Ok(0.0);
        }
        let c = self.c_factor();
        let c2 = c * c;
        let ad = self.alpha * self.step;
        let g0 = self.gamma0;
        let value = if k == l {
            let sum: f64 = (0..k).map(|i| self.f(k, i)).sum();
            let sum_sq: f64 = (0..k).map(|i| self.f(k, i).powi(2)).sum();
            let cross = sum * sum - sum_sq;
            let tail: f64 = (1..k).map(|i| self.f(0, i)).sum();
            let fk0 = self.f(k, 0);
            ad * ad * c2 * self.c2_minus_1 * sum_sq
                + ad * ad * c2 * self.c_minus_1 * cross
                + 2.0 * ad * g0 * c2 * fk0 * fk0 * (self.c2_minus_1 + self.c_minus_1 * tail)
                + g0 * g0 * fk0 * fk0 * c2 * self.c2_minus_1
        } else {
            let sum: f64 = (0..k)
                .map(|i| self.f(k, i) * self.f(l, i) * self.c_minus_1 - self.f(l, i) * self.one_minus_inv_c)
                .sum();
            ad * ad * c2 * sum + (2.0 * ad * g0 + g0 * g0) * c2 * self.f(k, 0) * self.f(l, 0) * self.c_minus_1
                - ad * g0 * c2 * self.f(l, 0) * self.one_minus_inv_c
        };
        finite(value, "state covariance")
    }

    /// Var Γ(t_k).
    pub fn state_var(&self, k: usize) -> Result<f64> {
        self.state_cov(k, k)
    }

    /// The term subtracted in the bounded-negative statement,
    /// (αΔγ₀ + γ₀²)c²(c − 1)f_{k0}f_{l0}.
    pub fn negative_bound_offset(&self, k: usize, l: usize) -> f64 {
        let c = self.c_factor();
        let ad = self.alpha * self.step;
        (ad * self.gamma0 + self.gamma0 * self.gamma0) * c * c * self.c_minus_1 * self.f(k, 0) * self.f(l, 0)
    }

    /// Classifies the covariance sign structure from the monotonicity of m.
    ///
    /// Uses the conditions on ασ²: `ασ² > m(t₀)` for a decreasing series
    /// gives non-negative covariances, `ασ² < min_i {m(t_i) − m(t_{i+1})}` gives the
    /// bounded-negative statement. Both come from `c·f_{ki} ≥ 1 ⇔ ασ² ≥ m(t_i) − m(t_k)`.
    /// A printed variant of the same argument writes α²σ² in place of ασ²;
    /// for α = 1 the two agree.
    pub fn cov_sign_classify(&self) -> CovSign {
        let m = &self.mean_series;
        let non_decreasing = m.windows(2).all(|w| w[1] >= w[0]);
        if non_decreasing {
            return CovSign::NonNegAll;
        }
        let non_increasing = m.windows(2).all(|w| w[1] <= w[0]);
        if !non_increasing {
            return CovSign::Indeterminate;
        }
        let a_s2 = self.alpha * self.sigma2;
        if a_s2 > m[0] {
            return CovSign::NonNegAll;
        }
        let min_drop = m.windows(2).map(|w| w[0] - w[1]).fold(f64::INFINITY, f64::min);
        if a_s2 < min_drop {
            CovSign::BoundedNegative
        } else {
            CovSign::Indeterminate
        }
    }
}
