//! Least-squares fit of the pressure trend m(s, t) = c(s, t)ᵀβ.

use anyhow::{bail, Result};
use coxrate::pressure::{PressureModel, Scaling, TrendDesign};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::io::PressureObs;

#[derive(Debug, Clone, Serialize)]
pub struct TrendFit {
    pub model: PressureModel,
    pub beta: Vec<f64>,
    /// σ̂² = RSS / (n − p).
    pub sigma2: f64,
    pub rss: f64,
    pub n_obs: usize,
    pub column_names: Vec<String>,
    #[serde(skip)]
    pub residuals: Vec<f64>,
}

impl TrendFit {
    pub fn sigma(&self) -> f64 {
        self.sigma2.sqrt()
    }
}

/// Design with coordinates scaled to the bounding box and [t₀, t_end].
pub fn design_for(orders: (u32, u32, u32, u32), bbox: (f64, f64, f64, f64), t0: f64, t_end: f64) -> TrendDesign {
    let (x_min, x_max, y_min, y_max) = bbox;
    TrendDesign::new(
        orders.0,
        orders.1,
        orders.2,
        orders.3,
        Scaling::from_range([x_min, x_max].into_iter()),
        Scaling::from_range([y_min, y_max].into_iter()),
        Scaling::from_range([t0, t_end].into_iter()),
    )
}

pub fn design_matrix(obs: &[PressureObs], design: &TrendDesign) -> DMatrix<f64> {
    let p = design.n_columns();
    let mut x = DMatrix::zeros(obs.len(), p);
    for (i, o) in obs.iter().enumerate() {
        for (j, v) in design.features(o.x, o.y, o.time).into_iter().enumerate() {
            x[(i, j)] = v;
        }
    }
    x
}

/// Ordinary least squares through a QR factorization.
///
/// A column whose QR pivot is negligible relative to its own norm lies in the
/// span of the columns before it; such columns are named in the error.
pub fn fit_pressure_trend(obs: &[PressureObs], design: TrendDesign) -> Result<TrendFit> {
    let n = obs.len();
    let p = design.n_columns();
    if n <= p {
        bail!("{n} pressure observations for {p} design columns; need more observations than columns");
    }
    let x = design_matrix(obs, &design);
    let y = DVector::from_iterator(n, obs.iter().map(|o| o.pressure));
    let qr = x.clone().qr();
    let r = qr.r();
    let names = design.column_names();
    let collinear: Vec<&str> = (0..p)
        .filter(|&j| r[(j, j)].abs() < 1e-10 * x.column(j).norm().max(f64::MIN_POSITIVE))
        .map(|j| names[j].as_str())
        .collect();
    if !collinear.is_empty() {
        bail!("pressure design matrix is rank deficient; collinear columns: {}", collinear.join(", "));
    }
    let qty = qr.q().transpose() * &y;
    let Some(beta) = r.solve_upper_triangular(&qty) else {
        bail!("pressure design matrix is singular");
    };
    let residuals: Vec<f64> = (&y - &x * &beta).iter().copied().collect();
    let rss: f64 = residuals.iter().map(|e| e * e).sum();
    let sigma2 = rss / (n - p) as f64;
    let beta: Vec<f64> = beta.iter().copied().collect();
    let model = PressureModel::trend(design, beta.clone(), sigma2)?;
    Ok(TrendFit {
        model,
        beta,
        sigma2,
        rss,
        n_obs: n,
        column_names: names,
        residuals,
    })
}
