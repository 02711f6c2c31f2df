use coxrate::{CountsField, SpaceTimeGrid};
use serde::{Deserialize, Serialize};

use crate::io::Event;

/// What happened to each catalogue event.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinningReport {
    pub input: usize,
    pub retained: usize,
    pub below_magnitude: usize,
    pub outside_grid: usize,
    pub outside_window: usize,
}

/// Interval index k with t ∈ (t_{k−1}, t_k], or `None` outside 1..=m.
pub fn interval_of(t: f64, grid: &SpaceTimeGrid) -> Option<usize> {
    let k = ((t - grid.t_origin()) / grid.step()).ceil();
    (k >= 1.0 && k <= grid.n_steps() as f64).then_some(k as usize)
}

/// Counts per (cell, interval) of events with magnitude ≥ `min_magnitude`.
pub fn bin_catalogue(events: &[Event], grid: &SpaceTimeGrid, min_magnitude: f64) -> (CountsField, BinningReport) {
    let mut counts = CountsField::filled(grid.n_cells(), grid.n_times(), 0);
    let mut report = BinningReport {
        input: events.len(),
        ..Default::default()
    };
    for e in events {
        if e.magnitude < min_magnitude {
            report.below_magnitude += 1;
            continue;
        }
        let Some(k) = interval_of(e.time, grid) else {
            report.outside_window += 1;
            continue;
        };
        let Some(cell) = grid.locate(e.x, e.y) else {
            report.outside_grid += 1;
            continue;
        };
        let n = *counts.get(cell, k);
        counts.set(cell, k, n + 1);
        report.retained += 1;
    }
    (counts, report)
}
