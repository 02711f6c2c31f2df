use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::SpaceTimeGrid;
use crate::rng::{stream, Purpose};

/// Monte Carlo noise realizations E_l(s, t_k), frozen for one fit.
///
/// Stored as noise rather than pressure so the same set can be reused with a
/// different mean field. With σ² = 0 nothing is stored.
#[derive(Debug, Clone, PartialEq)]
pub struct McSamples {
    n_samples: usize,
    n_times: usize,
    seed: u64,
    /// Per cell, `n_samples × n_times` row-major.
    noise: Vec<Vec<f64>>,
    zeros: Vec<f64>,
}

impl McSamples {
    pub fn generate(grid: &SpaceTimeGrid, sigma2: f64, n_samples: usize, seed: u64) -> Result<Self> {
        if n_samples == 0 {
            return Err(Error::InvalidParameter("at least one Monte Carlo sample is required".into()));
        }
        if !(sigma2 >= 0.0 && sigma2.is_finite()) {
            return Err(Error::InvalidParameter(format!("noise variance must be >= 0, got {sigma2}")));
        }
        let n_times = grid.n_times();
        let noise = if sigma2 == 0.0 {
            Vec::new()
        } else {
            let sd = sigma2.sqrt();
            grid.cells()
                .par_iter()
                .map(|cell| {
                    let mut rng = stream(seed, Purpose::McSamples, cell.id);
                    (0..n_samples * n_times)
                        .map(|_| {
                            let z: f64 = StandardNormal.sample(&mut rng);
                            sd * z
                        })
                        .collect()
                })
                .collect()
        };
        Ok(Self {
            n_samples,
            n_times,
            seed,
            noise,
            zeros: vec![0.0; n_times],
        })
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn n_times(&self) -> usize {
        self.n_times
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn is_degenerate(&self) -> bool {
        self.noise.is_empty()
    }

    /// Noise series of replicate `l` in cell index `cell`.
    pub fn noise(&self, cell: usize, l: usize) -> &[f64] {
        if self.noise.is_empty() {
            &self.zeros
        } else {
            &self.noise[cell][l * self.n_times..(l + 1) * self.n_times]
        }
    }
}
