//! Parameter estimation: the modified unbiased estimating equation, Newton's
//! method with the analytic Jacobian, the Godambe matrix and the parametric
//! bootstrap.

pub mod bootstrap;
pub mod equation;
pub mod godambe;
pub mod newton;
pub mod samples;
pub mod skeleton;

pub use bootstrap::{bootstrap_ci, BootstrapResult};
pub use equation::{estimating_function, evaluate, jacobian, lambda_hat, CountData, Evaluation, FitData, SkeletonCache};
pub use godambe::{godambe_matrix, l_closed_form, marginal_intensity_field, GodambeReport};
pub use newton::{default_init, newton_solve, newton_solve_with, FitResult, NewtonOptions, NewtonStep};
pub use samples::McSamples;
pub use skeleton::{s_direct, s_recursions, skeleton_h, SkeletonSeries};
