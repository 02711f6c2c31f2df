//! Command-line front end: file formats, pressure-trend fitting, binning,
//! production smoothing and the commands built on the `coxrate` library.

pub mod binning;
pub mod commands;
pub mod config;
pub mod io;
pub mod production;
pub mod synth;
pub mod trend;
