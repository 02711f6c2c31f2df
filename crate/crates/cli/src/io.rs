//! CSV readers and writers for catalogues, pressure observations and production.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use chrono::{Datelike, NaiveDate, NaiveDateTime, NaiveTime, TimeDelta};
use serde::Deserialize;

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    /// Decimal year.
    pub time: f64,
    pub x: f64,
    pub y: f64,
    pub magnitude: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PressureObs {
    pub x: f64,
    pub y: f64,
    /// Decimal year.
    pub time: f64,
    pub pressure: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProductionRecord {
    pub well_id: String,
    pub x: f64,
    pub y: f64,
    pub year: i32,
    pub month: u32,
    pub volume: f64,
}

fn year_start(year: i32) -> NaiveDateTime {
    NaiveDate::from_ymd_opt(year, 1, 1)
        .expect("valid year")
        .and_time(NaiveTime::MIN)
}

/// Fraction of the calendar year elapsed, added to the year.
pub fn decimal_year(t: NaiveDateTime) -> f64 {
    let start = year_start(t.year());
    let end = year_start(t.year() + 1);
    let elapsed = (t - start).num_milliseconds() as f64;
    let total = (end - start).num_milliseconds() as f64;
    t.year() as f64 + elapsed / total
}

/// Inverse of [`decimal_year`], rounded to the second.
pub fn from_decimal_year(t: f64) -> NaiveDateTime {
    let year = t.floor() as i32;
    let start = year_start(year);
    let total = (year_start(year + 1) - start).num_seconds() as f64;
    start + TimeDelta::seconds(((t - year as f64) * total).round() as i64)
}

/// Accepts `YYYY-MM-DD`, `YYYY-MM-DDTHH:MM:SS` and `YYYY-MM-DD HH:MM:SS`.
pub fn parse_iso(s: &str) -> Result<f64> {
    let s = s.trim();
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"] {
        if let Ok(t) = NaiveDateTime::parse_from_str(s, fmt) {
            return Ok(decimal_year(t));
        }
    }
    let d = NaiveDate::parse_from_str(s, "%Y-%m-%d").map_err(|_| anyhow!("not an ISO date: {s:?}"))?;
    Ok(decimal_year(d.and_time(NaiveTime::MIN)))
}

pub fn format_iso(t: f64) -> String {
    from_decimal_year(t).format("%Y-%m-%dT%H:%M:%S").to_string()
}

/// `YYYY-MM` to (year, month).
pub fn parse_month(s: &str) -> Result<(i32, u32)> {
    let d = NaiveDate::parse_from_str(&format!("{}-01", s.trim()), "%Y-%m-%d").map_err(|_| anyhow!("not a YYYY-MM month: {s:?}"))?;
    Ok((d.year(), d.month()))
}

/// Decimal-year bounds [start, end) of a calendar month.
pub fn month_span(year: i32, month: u32) -> (f64, f64) {
    let start = NaiveDate::from_ymd_opt(year, month, 1).expect("valid month");
    let next = if month == 12 {
        NaiveDate::from_ymd_opt(year + 1, 1, 1)
    } else {
        NaiveDate::from_ymd_opt(year, month + 1, 1)
    }
    .expect("valid month");
    (
        decimal_year(start.and_time(NaiveTime::MIN)),
        decimal_year(next.and_time(NaiveTime::MIN)),
    )
}

fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<(u64, T)>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let mut rows = Vec::new();
    for rec in reader.deserialize::<T>() {
        match rec {
            Ok(row) => rows.push(row),
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                bail!("{}: line {line}: {e}", path.display());
            }
        }
    }
    // Header is line 1.
    Ok(rows.into_iter().enumerate().map(|(i, r)| (i as u64 + 2, r)).collect())
}

#[derive(Deserialize)]
struct RawEvent {
    time: String,
    x: f64,
    y: f64,
    magnitude: f64,
}

/// Reads `time,x,y,magnitude`.
pub fn read_catalogue(path: &Path) -> Result<Vec<Event>> {
    read_rows::<RawEvent>(path)?
        .into_iter()
        .map(|(line, r)| {
            let at = || format!("{}: line {line}", path.display());
            let time = parse_iso(&r.time).with_context(at)?;
            if !r.magnitude.is_finite() || !r.x.is_finite() || !r.y.is_finite() {
                bail!("{}: non-finite coordinate or magnitude", at());
            }
            Ok(Event {
                time,
                x: r.x,
                y: r.y,
                magnitude: r.magnitude,
            })
        })
        .collect()
}

#[derive(Deserialize)]
struct RawPressure {
    x: f64,
    y: f64,
    time: String,
    pressure_bara: f64,
}

/// Reads `x,y,time,pressure_bara`.
pub fn read_pressure(path: &Path) -> Result<Vec<PressureObs>> {
    read_rows::<RawPressure>(path)?
        .into_iter()
        .map(|(line, r)| {
            let at = || format!("{}: line {line}", path.display());
            let time = parse_iso(&r.time).with_context(at)?;
            if !(r.pressure_bara > 0.0 && r.pressure_bara.is_finite()) {
                bail!("{}: pressure must be positive, got {}", at(), r.pressure_bara);
            }
            Ok(PressureObs {
                x: r.x,
                y: r.y,
                time,
                pressure: r.pressure_bara,
            })
        })
        .collect()
}

#[derive(Deserialize)]
struct RawProduction {
    well_id: String,
    x: f64,
    y: f64,
    month: String,
    volume_nbcm: f64,
}

/// Reads `well_id,x,y,month,volume_nbcm`.
pub fn read_production(path: &Path) -> Result<Vec<ProductionRecord>> {
    read_rows::<RawProduction>(path)?
        .into_iter()
        .map(|(line, r)| {
            let at = || format!("{}: line {line}", path.display());
            let (year, month) = parse_month(&r.month).with_context(at)?;
            if !(r.volume_nbcm >= 0.0 && r.volume_nbcm.is_finite()) {
                bail!("{}: volume must be non-negative, got {}", at(), r.volume_nbcm);
            }
            Ok(ProductionRecord {
                well_id: r.well_id,
                x: r.x,
                y: r.y,
                year,
                month,
                volume: r.volume_nbcm,
            })
        })
        .collect()
}

#[derive(Deserialize)]
struct RawVertex {
    x: f64,
    y: f64,
}

/// Polygon ring with columns `x,y`.
pub fn read_ring(path: &Path) -> Result<Vec<(f64, f64)>> {
    let ring: Vec<(f64, f64)> = read_rows::<RawVertex>(path)?.into_iter().map(|(_, v)| (v.x, v.y)).collect();
    if ring.len() < 3 {
        bail!("{}: a mask polygon needs at least three vertices", path.display());
    }
    Ok(ring)
}

/// Buffered CSV-ish text writer that creates parent directories.
pub fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn write_catalogue(path: &Path, events: &[Event]) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "time,x,y,magnitude")?;
    for e in events {
        writeln!(w, "{},{},{},{:.2}", format_iso(e.time), e.x, e.y, e.magnitude)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_pressure(path: &Path, obs: &[PressureObs]) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "x,y,time,pressure_bara")?;
    for o in obs {
        writeln!(w, "{},{},{},{}", o.x, o.y, format_iso(o.time), o.pressure)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_production(path: &Path, records: &[ProductionRecord]) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "well_id,x,y,month,volume_nbcm")?;
    for r in records {
        writeln!(w, "{},{},{},{:04}-{:02},{}", r.well_id, r.x, r.y, r.year, r.month, r.volume)?;
    }
    w.flush()?;
    Ok(())
}
