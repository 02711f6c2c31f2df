//! Space-time discretisation.
//!
//! Times are decimal years, areas km². Epochs are `t_k = t_0 + kΔ` for
//! `k = 0..=m`; counts and covariates at index `k >= 1` belong to the interval
//! `(t_{k-1}, t_k]`, and index 0 carries no counts.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A spatial cell: representative point and area Δ(s) in km².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub id: u64,
    pub x: f64,
    pub y: f64,
    pub area: f64,
}

/// Regular rectangular layout the cells were cut from, kept for point lookup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RectLayout {
    pub x_min: f64,
    pub y_min: f64,
    pub dx: f64,
    pub dy: f64,
    pub nx: usize,
    pub ny: usize,
}

impl RectLayout {
    /// Cell id of the rectangle containing `(x, y)`, if inside the bounding box.
    /// The upper and right edges belong to the last row and column.
    pub fn cell_id_at(&self, x: f64, y: f64) -> Option<u64> {
        let fx = (x - self.x_min) / self.dx;
        let fy = (y - self.y_min) / self.dy;
        if !(fx >= 0.0 && fy >= 0.0 && fx <= self.nx as f64 && fy <= self.ny as f64) {
            return None;
        }
        let ix = (fx.floor() as usize).min(self.nx - 1);
        let iy = (fy.floor() as usize).min(self.ny - 1);
        Some((iy * self.nx + ix) as u64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpaceTimeGrid {
    cells: Vec<Cell>,
    t_origin: f64,
    step: f64,
    n_steps: usize,
    layout: Option<RectLayout>,
    #[serde(skip)]
    index_of: BTreeMap<u64, usize>,
}

impl SpaceTimeGrid {
    /// Validates and builds a grid. Cell order is the canonical iteration order.
    pub fn new(cells: Vec<Cell>, t_origin: f64, step: f64, n_steps: usize) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::InvalidGrid(format!("time step must be positive, got {step}")));
        }
        if n_steps < 1 {
            return Err(Error::InvalidGrid("need at least one time step".into()));
        }
        if !t_origin.is_finite() {
            return Err(Error::InvalidGrid("time origin must be finite".into()));
        }
        let mut index_of = BTreeMap::new();
        for (i, c) in cells.iter().enumerate() {
            if !(c.area > 0.0 && c.area.is_finite()) {
                return Err(Error::InvalidGrid(format!("cell {} has area {}", c.id, c.area)));
            }
            if !(c.x.is_finite() && c.y.is_finite()) {
                return Err(Error::InvalidGrid(format!("cell {} has non-finite centre", c.id)));
            }
            if index_of.insert(c.id, i).is_some() {
                return Err(Error::InvalidGrid(format!("duplicate cell id {}", c.id)));
            }
        }
        Ok(Self {
            cells,
            t_origin,
            step,
            n_steps,
            layout: None,
            index_of,
        })
    }

    /// `nx × ny` rectangle over the bounding box. Cells whose centre falls outside
    /// `mask` (a closed polygon ring) are dropped. `units_per_km` converts
    /// coordinate units to km for the cell areas.
    #[allow(clippy::too_many_arguments)]
    pub fn rectangular(
        bbox: (f64, f64, f64, f64),
        nx: usize,
        ny: usize,
        units_per_km: f64,
        mask: Option<&[(f64, f64)]>,
        t_origin: f64,
        step: f64,
        n_steps: usize,
    ) -> Result<Self> {
        let (x_min, x_max, y_min, y_max) = bbox;
        if nx == 0 || ny == 0 || !(x_max > x_min) || !(y_max > y_min) {
            return Err(Error::InvalidGrid("empty bounding box or zero cells".into()));
        }
        if !(units_per_km > 0.0) {
            return Err(Error::InvalidGrid("units_per_km must be positive".into()));
        }
        let dx = (x_max - x_min) / nx as f64;
        let dy = (y_max - y_min) / ny as f64;
        let area = (dx / units_per_km) * (dy / units_per_km);
        let mut cells = Vec::with_capacity(nx * ny);
        for iy in 0..ny {
            for ix in 0..nx {
                let x = x_min + (ix as f64 + 0.5) * dx;
                let y = y_min + (iy as f64 + 0.5) * dy;
                if let Some(ring) = mask {
                    if !point_in_polygon(x, y, ring) {
                        continue;
                    }
                }
                cells.push(Cell {
                    id: (iy * nx + ix) as u64,
                    x,
                    y,
                    area,
                });
            }
        }
        if cells.is_empty() {
            return Err(Error::InvalidGrid("mask removes every cell".into()));
        }
        let mut grid = Self::new(cells, t_origin, step, n_steps)?;
        grid.layout = Some(RectLayout {
            x_min,
            y_min,
            dx,
            dy,
            nx,
            ny,
        });
        Ok(grid)
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn t_origin(&self) -> f64 {
        self.t_origin
    }

    /// Δ in years.
    pub fn step(&self) -> f64 {
        self.step
    }

    /// m, the number of intervals.
    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    /// Number of epochs, m + 1.
    pub fn n_times(&self) -> usize {
        self.n_steps + 1
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t_origin + k as f64 * self.step
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|k| self.time(k)).collect()
    }

    /// Δ · Δ(s), the space-time volume of one cell-interval.
    pub fn exposure(&self, cell: usize) -> f64 {
        self.step * self.cells[cell].area
    }

    pub fn layout(&self) -> Option<&RectLayout> {
        self.layout.as_ref()
    }

    /// Position of cell `id` in the canonical order.
    pub fn index_of(&self, id: u64) -> Option<usize> {
        self.index_of.get(&id).copied()
    }

    /// Cell index containing `(x, y)`; requires a rectangular layout.
    pub fn locate(&self, x: f64, y: f64) -> Option<usize> {
        let id = self.layout.as_ref()?.cell_id_at(x, y)?;
        self.index_of(id)
    }

    /// Same cells, different number of steps (used to extend a grid by a forecast interval).
    pub fn with_steps(&self, n_steps: usize) -> Result<Self> {
        let mut grid = Self::new(self.cells.clone(), self.t_origin, self.step, n_steps)?;
        grid.layout = self.layout.clone();
        Ok(grid)
    }
}

/// Even-odd rule; the ring may or may not repeat its first vertex.
pub fn point_in_polygon(x: f64, y: f64, ring: &[(f64, f64)]) -> bool {
    let n = ring.len();
    if n < 3 {
        return false;
    }
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (xi, yi) = ring[i];
        let (xj, yj) = ring[j];
        if (yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi {
            inside = !inside;
        }
        j = i;
    }
    inside
}
