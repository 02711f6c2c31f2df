//! Cox rate-and-state model for induced seismicity.
//!
//! Pore-pressure depletion drives a state variable Γ through the discretized
//! recursion Γ_{k+1} = (Γ_k + αΔ)·exp[α(X_{k+1} − X_k)]; the earthquake rate is
//! proportional to 1/Γ. Because pressure is only known up to Gaussian noise,
//! the resulting point process is a Cox process. The crate covers
//!
//! * [`state`]: Γ trajectories and their exact mean and covariance,
//! * [`rate`]: delta-method moments of the rate 1/Γ with a Monte Carlo reference,
//! * [`sim`]: simulation of noise, intensities and counts on a grid,
//! * [`estimate`]: the unbiased estimating equation, Newton's method, the
//!   Godambe matrix and the parametric bootstrap,
//! * [`diagnose`]: Pearson residuals and binned residual summaries,
//! * [`posterior`]: per-cell MALA chains for the noise field and forecasts.
//!
//! Units are fixed throughout: years, km², bara and Nbcm.

pub mod diagnose;
pub mod error;
pub mod estimate;
pub mod field;
pub mod grid;
pub mod params;
pub mod posterior;
pub mod pressure;
pub mod rate;
pub mod rng;
pub mod scenario;
pub mod sim;
pub mod state;

pub use error::{Error, Result};
pub use field::{CountsField, CovariateField, Field, MeanField, NoiseField};
pub use grid::{Cell, RectLayout, SpaceTimeGrid};
pub use params::{ModelParams, ParamMode};
pub use pressure::{eval_mean, MeanSurface, PressureModel, TrendDesign};
pub use rate::CiPair;
pub use state::{gamma_closed_form, gamma_euler_step, CovSign, MomentSpec, StateTrajectory};
