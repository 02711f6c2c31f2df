use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// ζ = (θ₁, θ₂, α, η) with η = log(α/γ₀).
///
/// `log_ratio = -inf` is the log-Gaussian limit where the intensity reduces to
/// `exp[θ₁ + θ₂V + α(X(s,t₀) − X(s,t))]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub theta1: f64,
    pub theta2: f64,
    pub alpha: f64,
    #[serde(serialize_with = "ser_ext", deserialize_with = "de_ext")]
    pub log_ratio: f64,
}

/// Which components of ζ are free during estimation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamMode {
    /// (θ₁, θ₂, α) with η ≡ −∞.
    Reduced,
    /// (θ₁, θ₂, α, η).
    Full,
}

impl ParamMode {
    pub fn dim(self) -> usize {
        match self {
            ParamMode::Reduced => 3,
            ParamMode::Full => 4,
        }
    }
}

impl ModelParams {
    pub fn new(theta1: f64, theta2: f64, alpha: f64, log_ratio: f64) -> Result<Self> {
        let p = Self {
            theta1,
            theta2,
            alpha,
            log_ratio,
        };
        p.validate()?;
        Ok(p)
    }

    /// Log-Gaussian limit, η = −∞.
    pub fn reduced(theta1: f64, theta2: f64, alpha: f64) -> Result<Self> {
        Self::new(theta1, theta2, alpha, f64::NEG_INFINITY)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidParameter(format!("alpha must be positive, got {}", self.alpha)));
        }
        if !self.theta1.is_finite() || !self.theta2.is_finite() {
            return Err(Error::InvalidParameter("theta must be finite".into()));
        }
        if self.log_ratio.is_nan() || self.log_ratio == f64::INFINITY {
            return Err(Error::InvalidParameter(format!("eta must be finite or -inf, got {}", self.log_ratio)));
        }
        Ok(())
    }

    pub fn is_reduced(&self) -> bool {
        self.log_ratio == f64::NEG_INFINITY
    }

    /// e^η (zero in the reduced model).
    pub fn exp_eta(&self) -> f64 {
        self.log_ratio.exp()
    }

    /// γ₀ = α e^{−η}; infinite in the reduced model.
    pub fn gamma0(&self) -> f64 {
        self.alpha * (-self.log_ratio).exp()
    }

    /// Free components for `mode`.
    pub fn to_vec(&self, mode: ParamMode) -> Vec<f64> {
        match mode {
            ParamMode::Reduced => vec![self.theta1, self.theta2, self.alpha],
            ParamMode::Full => vec![self.theta1, self.theta2, self.alpha, self.log_ratio],
        }
    }

    /// Inverse of [`ModelParams::to_vec`]; the reduced mode sets η = −∞.
    pub fn from_slice(v: &[f64], mode: ParamMode) -> Self {
        Self {
            theta1: v[0],
            theta2: v[1],
            alpha: v[2],
            log_ratio: match mode {
                ParamMode::Reduced => f64::NEG_INFINITY,
                ParamMode::Full => v[3],
            },
        }
    }
}

fn ser_ext<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else if *v < 0.0 {
        s.serialize_str("-inf")
    } else if *v > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_str("nan")
    }
}

fn de_ext<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Ext {
        Num(f64),
        Text(String),
    }
    match Ext::deserialize(d)? {
        Ext::Num(v) => Ok(v),
        Ext::Text(t) => match t.trim().to_ascii_lowercase().as_str() {
            "-inf" | "-infinity" => Ok(f64::NEG_INFINITY),
            "inf" | "infinity" | "+inf" => Ok(f64::INFINITY),
            other => other
                .parse::<f64>()
                .map_err(|_| serde::de::Error::custom(format!("not an extended real: {t}"))),
        },
    }
}
