//! Pressure decomposition X(s,t) = m(s,t) + E(s,t).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::MeanField;
use crate::grid::SpaceTimeGrid;

/// Monomial x^a y^b t^c in the centred and scaled coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Monomial {
    pub x: u32,
    pub y: u32,
    pub t: u32,
}

impl Monomial {
    pub fn name(&self) -> String {
        let mut parts = Vec::new();
        for (sym, p) in [("x", self.x), ("y", self.y), ("t", self.t)] {
            match p {
                0 => {}
                1 => parts.push(sym.to_string()),
                _ => parts.push(format!("{sym}^{p}")),
            }
        }
        if parts.is_empty() {
            "1".to_string()
        } else {
            parts.join("*")
        }
    }
}

/// Affine map applied to a coordinate before it enters the polynomial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scaling {
    pub center: f64,
    pub scale: f64,
}

impl Scaling {
    pub const IDENTITY: Scaling = Scaling { center: 0.0, scale: 1.0 };

    /// Centre at the midrange, scale to half the range (so data map into [-1, 1]).
    pub fn from_range(values: impl Iterator<Item = f64>) -> Self {
        let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        if !lo.is_finite() || !hi.is_finite() || hi <= lo {
            return Scaling {
                center: if lo.is_finite() { lo } else { 0.0 },
                scale: 1.0,
            };
        }
        Scaling {
            center: 0.5 * (lo + hi),
            scale: 0.5 * (hi - lo),
        }
    }

    pub fn apply(&self, v: f64) -> f64 {
        (v - self.center) / self.scale
    }
}

/// Polynomial design function c(s, t).
///
/// Terms are enumerated as: every spatial monomial x^a y^b with a + b ≤
/// `spatial_order` (including the intercept), then pure time powers t^c for
/// 1 ≤ c ≤ `temporal_order`, then interactions t^c x^a y^b with
/// 1 ≤ c ≤ `interaction_time_order` and 1 ≤ a + b ≤ `interaction_space_order`.
/// With orders (4, 2, 1, 3) this gives 15 + 2 + 9 = 26 columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendDesign {
    pub spatial_order: u32,
    pub temporal_order: u32,
    pub interaction_time_order: u32,
    pub interaction_space_order: u32,
    pub x_scaling: Scaling,
    pub y_scaling: Scaling,
    pub t_scaling: Scaling,
    pub terms: Vec<Monomial>,
}

impl TrendDesign {
    pub fn new(
        spatial_order: u32,
        temporal_order: u32,
        interaction_time_order: u32,
        interaction_space_order: u32,
        x_scaling: Scaling,
        y_scaling: Scaling,
        t_scaling: Scaling,
    ) -> Self {
        let mut terms = Vec::new();
        for d in 0..=spatial_order {
            for a in (0..=d).rev() {
                terms.push(Monomial { x: a, y: d - a, t: 0 });
            }
        }
        for c in 1..=temporal_order {
            terms.push(Monomial { x: 0, y: 0, t: c });
        }
        for c in 1..=interaction_time_order {
            for d in 1..=interaction_space_order {
                for a in (0..=d).rev() {
                    terms.push(Monomial { x: a, y: d - a, t: c });
                }
            }
        }
        Self {
            spatial_order,
            temporal_order,
            interaction_time_order,
            interaction_space_order,
            x_scaling,
            y_scaling,
            t_scaling,
            terms,
        }
    }

    /// Intercept-only design.
    pub fn intercept() -> Self {
        Self::new(0, 0, 0, 0, Scaling::IDENTITY, Scaling::IDENTITY, Scaling::IDENTITY)
    }

    pub fn n_columns(&self) -> usize {
        self.terms.len()
    }

    pub fn column_names(&self) -> Vec<String> {
        self.terms.iter().map(Monomial::name).collect()
    }

    /// Row of the design matrix at `(x, y, t)`.
    pub fn features(&self, x: f64, y: f64, t: f64) -> Vec<f64> {
        let xs = self.x_scaling.apply(x);
        let ys = self.y_scaling.apply(y);
        let ts = self.t_scaling.apply(t);
        self.terms
            .iter()
            .map(|m| xs.powi(m.x as i32) * ys.powi(m.y as i32) * ts.powi(m.t as i32))
            .collect()
    }
}

/// Deterministic part of the pressure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum MeanSurface {
    /// m(s_i, t_k) given directly, cells × epochs.
    Tabulated { values: MeanField },
    /// m(s, t) = c(s, t)ᵀβ.
    Trend { design: TrendDesign, beta: Vec<f64> },
}

/// Mean surface plus the noise variance σ² (bara²).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PressureModel {
    pub mean: MeanSurface,
    pub noise_var: f64,
}

impl PressureModel {
    pub fn tabulated(values: MeanField, noise_var: f64) -> Result<Self> {
        Self::checked(MeanSurface::Tabulated { values }, noise_var)
    }

    pub fn trend(design: TrendDesign, beta: Vec<f64>, noise_var: f64) -> Result<Self> {
        if design.n_columns() != beta.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} coefficients for {} design columns",
                beta.len(),
                design.n_columns()
            )));
        }
        Self::checked(MeanSurface::Trend { design, beta }, noise_var)
    }

    fn checked(mean: MeanSurface, noise_var: f64) -> Result<Self> {
        if !(noise_var >= 0.0 && noise_var.is_finite()) {
            return Err(Error::InvalidParameter(format!("noise variance must be >= 0, got {noise_var}")));
        }
        Ok(Self { mean, noise_var })
    }

    /// m(x, y, t) at an arbitrary point; only trend surfaces can do this.
    pub fn mean_at(&self, x: f64, y: f64, t: f64) -> Result<f64> {
        match &self.mean {
            MeanSurface::Trend { design, beta } => {
                let v: f64 = design.features(x, y, t).iter().zip(beta).map(|(c, b)| c * b).sum();
                crate::error::finite(v, "pressure trend")
            }
            MeanSurface::Tabulated { .. } => Err(Error::InvalidParameter(
                "tabulated pressure means are only defined on their grid".into(),
            )),
        }
    }
}

/// Matrix of m(s_i, t_k) over the grid.
pub fn eval_mean(pm: &PressureModel, grid: &SpaceTimeGrid) -> Result<MeanField> {
    match &pm.mean {
        MeanSurface::Tabulated { values } => {
            values.check_shape(grid.n_cells(), grid.n_times(), "tabulated mean")?;
            if values.as_slice().iter().any(|v| !v.is_finite()) {
                return Err(Error::Overflow("tabulated mean contains non-finite values".into()));
            }
            Ok(values.clone())
        }
        MeanSurface::Trend { .. } => {
            let times = grid.times();
            let mut data = Vec::with_capacity(grid.n_cells() * times.len());
            for c in grid.cells() {
                for &t in &times {
                    data.push(pm.mean_at(c.x, c.y, t)?);
                }
            }
            MeanField::from_vec(grid.n_cells(), times.len(), data)
        }
    }
}
