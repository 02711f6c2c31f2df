use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense per-cell, per-epoch matrix. Rows follow the grid's cell order and
/// columns the epochs `t_0..=t_m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Field<T> {
    n_cells: usize,
    n_times: usize,
    data: Vec<T>,
}

/// Mean pressure m(s, t_k) in bara.
pub type MeanField = Field<f64>;
/// Annual production V(s, t_k) in Nbcm.
pub type CovariateField = Field<f64>;
/// Realised pressure noise e(s, t_k) in bara.
pub type NoiseField = Field<f64>;
/// Earthquake counts N(s, t_k); column 0 is always zero.
pub type CountsField = Field<u64>;

impl<T: Clone> Field<T> {
    pub fn filled(n_cells: usize, n_times: usize, value: T) -> Self {
        Self {
            n_cells,
            n_times,
            data: vec![value; n_cells * n_times],
        }
    }

    pub fn from_rows(rows: Vec<Vec<T>>) -> Result<Self> {
        let n_cells = rows.len();
        let n_times = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_times) {
            return Err(Error::DimensionMismatch("ragged field rows".into()));
        }
        Ok(Self {
            n_cells,
            n_times,
            data: rows.into_iter().flatten().collect(),
        })
    }

    pub fn from_vec(n_cells: usize, n_times: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != n_cells * n_times {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {n_cells}x{n_times} field",
                data.len()
            )));
        }
        Ok(Self {
            n_cells,
            n_times,
            data,
        })
    }
}

impl<T> Field<T> {
    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn n_times(&self) -> usize {
        self.n_times
    }

    pub fn row(&self, cell: usize) -> &[T] {
        &self.data[cell * self.n_times..(cell + 1) * self.n_times]
    }

    pub fn row_mut(&mut self, cell: usize) -> &mut [T] {
        &mut self.data[cell * self.n_times..(cell + 1) * self.n_times]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[T]> {
        self.data.chunks(self.n_times.max(1)).take(self.n_cells)
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn get(&self, cell: usize, k: usize) -> &T {
        &self.data[cell * self.n_times + k]
    }

    pub fn set(&mut self, cell: usize, k: usize, value: T) {
        self.data[cell * self.n_times + k] = value;
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Field<U> {
        Field {
            n_cells: self.n_cells,
            n_times: self.n_times,
            data: self.data.iter().map(f).collect(),
        }
    }

    /// Checks that the field has `n_cells` rows and `n_times` columns.
    pub fn check_shape(&self, n_cells: usize, n_times: usize, what: &str) -> Result<()> {
        if self.n_cells != n_cells || self.n_times != n_times {
            return Err(Error::DimensionMismatch(format!(
                "{what} is {}x{}, expected {n_cells}x{n_times}",
                self.n_cells, self.n_times
            )));
        }
        Ok(())
    }
}

impl Field<u64> {
    /// Sum over all cells of the counts attached to intervals k >= 1.
    pub fn total(&self) -> u64 {
        self.rows().map(|r| r.iter().skip(1).sum::<u64>()).sum()
    }
}
