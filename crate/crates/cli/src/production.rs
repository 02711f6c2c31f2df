//! Per-cell production covariate V from monthly well volumes.
//!
//! Each well's volume is spread over cells with normalized Gaussian kernel
//! weights (or assigned to the nearest cell when the bandwidth is zero), and
//! V(s, t_k) is the volume produced in the window [t_{k−1} − w, t_{k−1}),
//! i.e. the year preceding the counting interval (t_{k−1}, t_k]. Months that
//! straddle a window edge contribute pro rata. V(s, t₀) never enters a count
//! interval and is left at zero.

use std::collections::{BTreeMap, BTreeSet};

use anyhow::{bail, Result};
use coxrate::{CovariateField, SpaceTimeGrid};

use crate::io::{month_span, ProductionRecord};

/// Kernel weights of a point over the cells; they sum to one.
pub fn kernel_weights(x: f64, y: f64, grid: &SpaceTimeGrid, bandwidth_km: f64, units_per_km: f64) -> Vec<f64> {
    let d2: Vec<f64> = grid
        .cells()
        .iter()
        .map(|c| ((c.x - x).powi(2) + (c.y - y).powi(2)) / (units_per_km * units_per_km))
        .collect();
    let mut w = vec![0.0; d2.len()];
    if bandwidth_km == 0.0 {
        let nearest = d2
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .expect("grid has cells");
        w[nearest] = 1.0;
        return w;
    }
    let dmin = d2.iter().copied().fold(f64::INFINITY, f64::min);
    let h2 = 2.0 * bandwidth_km * bandwidth_km;
    for (wi, di) in w.iter_mut().zip(&d2) {
        *wi = (-(di - dmin) / h2).exp();
    }
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    w
}

/// Window [start, end) feeding V(·, t_k).
pub fn window(grid: &SpaceTimeGrid, k: usize, width: f64) -> (f64, f64) {
    let end = grid.t_origin() + (k as f64 - 1.0) * grid.step();
    (end - width, end)
}

/// Months overlapping [start, end).
fn months_in(start: f64, end: f64) -> Vec<(i32, u32)> {
    let mut out = Vec::new();
    let mut year = start.floor() as i32;
    let mut month = 1;
    loop {
        let (a, b) = month_span(year, month);
        if a >= end {
            break;
        }
        if b > start {
            out.push((year, month));
        }
        month += 1;
        if month == 13 {
            month = 1;
            year += 1;
        }
    }
    out
}

/// V(s, t_k) for k = 0..=`last`, from the production records.
///
/// `last` may exceed the grid's m to produce the covariate of the interval
/// that follows the data. Errors list months without any record.
pub fn smooth_production(
    records: &[ProductionRecord],
    grid: &SpaceTimeGrid,
    bandwidth_km: f64,
    units_per_km: f64,
    width: f64,
    last: usize,
) -> Result<CovariateField> {
    let mut wells: BTreeMap<&str, (f64, f64)> = BTreeMap::new();
    let mut monthly: BTreeMap<(i32, u32), Vec<(&str, f64)>> = BTreeMap::new();
    for r in records {
        let pos = wells.entry(&r.well_id).or_insert((r.x, r.y));
        if *pos != (r.x, r.y) {
            bail!("well {} appears at two locations", r.well_id);
        }
        monthly.entry((r.year, r.month)).or_default().push((&r.well_id, r.volume));
    }
    let mut missing = BTreeSet::new();
    for k in 1..=last {
        let (a, b) = window(grid, k, width);
        for ym in months_in(a, b) {
            if !monthly.contains_key(&ym) {
                missing.insert(ym);
            }
        }
    }
    if !missing.is_empty() {
        let list: Vec<String> = missing.iter().map(|(y, m)| format!("{y:04}-{m:02}")).collect();
        bail!("production records missing for months: {}", list.join(", "));
    }
    let weights: BTreeMap<&str, Vec<f64>> = wells
        .iter()
        .map(|(id, &(x, y))| (*id, kernel_weights(x, y, grid, bandwidth_km, units_per_km)))
        .collect();
    let mut v = CovariateField::filled(grid.n_cells(), last + 1, 0.0);
    for k in 1..=last {
        let (a, b) = window(grid, k, width);
        for ym in months_in(a, b) {
            let (ma, mb) = month_span(ym.0, ym.1);
            let frac = (mb.min(b) - ma.max(a)) / (mb - ma);
            for (id, vol) in &monthly[&ym] {
                for (i, w) in weights[id].iter().enumerate() {
                    let cur = *v.get(i, k);
                    v.set(i, k, cur + frac * vol * w);
                }
            }
        }
    }
    Ok(v)
}

/// Field production within [start, end), pro rata for partial months.
pub fn field_total(records: &[ProductionRecord], start: f64, end: f64) -> f64 {
    records
        .iter()
        .map(|r| {
            let (a, b) = month_span(r.year, r.month);
            let overlap = (b.min(end) - a.max(start)).max(0.0);
            r.volume * overlap / (b - a)
        })
        .sum()
}
