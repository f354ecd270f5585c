//! CSV readers and writers for the raw inputs and the panel export.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::de::DeserializeOwned;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::ingest::{
    DroughtCategoryAreas, EsiObservation, Fips, ImpactCategory, ImpactFlags, ImpactReport, Panel,
    UsdmRow, WeekGrid, WeeklyCountyRecord,
};

/// Deserializes every row, attaching the 1-based line number to any failure.
fn read_rows<T, R, F, U>(rdr: R, source_name: &str, mut convert: F) -> Result<Vec<U>>
where
    T: DeserializeOwned,
    R: Read,
    F: FnMut(T) -> Result<U>,
{
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(rdr);
    let headers = reader.headers()?.clone();
    let mut out = Vec::new();
    let mut record = csv::StringRecord::new();
    loop {
        let more = reader.read_record(&mut record).map_err(|e| Error::Parse {
            source_name: source_name.to_string(),
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        if !more {
            break;
        }
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let parse_err = |message: String| Error::Parse {
            source_name: source_name.to_string(),
            line,
            message,
        };
        let row: T = record
            .deserialize(Some(&headers))
            .map_err(|e| parse_err(e.to_string()))?;
        out.push(convert(row).map_err(|e| parse_err(e.to_string()))?);
    }
    Ok(out)
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })
}

fn source_name(path: &Path) -> String {
    path.display().to_string()
}

#[derive(Deserialize)]
struct RawUsdm {
    fips: String,
    week_start: NaiveDate,
    d0: f64,
    d1: f64,
    d2: f64,
    d3: f64,
    d4: f64,
}

/// Reads `fips, week_start, d0..d4`. With `cumulative`, the percentages are
/// treated as cumulative (D0 includes D1..D4) and converted.
pub fn read_usdm<R: Read>(rdr: R, source: &str, cumulative: bool) -> Result<Vec<UsdmRow>> {
    read_rows(rdr, source, |r: RawUsdm| {
        let d = [r.d0, r.d1, r.d2, r.d3, r.d4];
        let areas = if cumulative {
            DroughtCategoryAreas::from_cumulative(d)?
        } else {
            DroughtCategoryAreas::new(d)?
        };
        Ok(UsdmRow {
            county: r.fips.parse()?,
            week_start: r.week_start,
            areas,
        })
    })
}

pub fn read_usdm_file(path: &Path, cumulative: bool) -> Result<Vec<UsdmRow>> {
    read_usdm(open(path)?, &source_name(path), cumulative)
}

#[derive(Deserialize)]
struct RawEsi {
    fips: String,
    date: NaiveDate,
    esi: Option<f64>,
}

/// Reads `fips, date, esi`; blank ESI cells are dropped.
pub fn read_esi<R: Read>(rdr: R, source: &str) -> Result<Vec<EsiObservation>> {
    let rows = read_rows(rdr, source, |r: RawEsi| {
        Ok(r.esi.map(|value| (r.fips, r.date, value)))
    })?;
    rows.into_iter()
        .flatten()
        .map(|(fips, date, value)| {
            Ok(EsiObservation {
                county: fips.parse()?,
                date,
                value,
            })
        })
        .collect()
}

pub fn read_esi_file(path: &Path) -> Result<Vec<EsiObservation>> {
    read_esi(open(path)?, &source_name(path))
}

#[derive(Deserialize)]
struct RawReport {
    fips: String,
    span_start: NaiveDate,
    span_end: NaiveDate,
    category: String,
}

/// Reads `fips, span_start, span_end, category` (one county per row).
pub fn read_dir<R: Read>(rdr: R, source: &str) -> Result<Vec<ImpactReport>> {
    read_rows(rdr, source, |r: RawReport| {
        ImpactReport::new(r.fips.parse()?, r.span_start, r.span_end, r.category.parse()?)
    })
}

pub fn read_dir_file(path: &Path) -> Result<Vec<ImpactReport>> {
    read_dir(open(path)?, &source_name(path))
}

#[derive(Deserialize)]
struct RawEdge {
    fips_a: String,
    fips_b: String,
}

pub fn read_adjacency<R: Read>(rdr: R, source: &str) -> Result<Vec<(Fips, Fips)>> {
    read_rows(rdr, source, |r: RawEdge| Ok((r.fips_a.parse()?, r.fips_b.parse()?)))
}

pub fn read_adjacency_file(path: &Path) -> Result<Vec<(Fips, Fips)>> {
    read_adjacency(open(path)?, &source_name(path))
}

const PANEL_CATEGORIES: [ImpactCategory; 7] = ImpactCategory::MODELED;

/// Writes `fips, week_start, dsci, esi, agriculture, ..., tourism`.
pub fn write_panel<W: Write>(panel: &Panel, w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let mut header = vec!["fips", "week_start", "dsci", "esi"];
    header.extend(PANEL_CATEGORIES.iter().map(|c| c.short_name()));
    wtr.write_record(&header)?;
    for r in panel.records() {
        let mut row = vec![
            r.county.to_string(),
            r.week_start.to_string(),
            r.dsci.to_string(),
            r.esi.map(|v| v.to_string()).unwrap_or_default(),
        ];
        row.extend(
            PANEL_CATEGORIES
                .iter()
                .map(|&c| if r.impacts.get(c) { "1" } else { "0" }.to_string()),
        );
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

#[derive(Deserialize)]
struct RawPanelRow {
    fips: String,
    week_start: NaiveDate,
    dsci: f64,
    esi: Option<f64>,
    agriculture: u8,
    water: u8,
    fire: u8,
    plants: u8,
    relief: u8,
    society: u8,
    tourism: u8,
}

/// Reads a panel previously written by [`write_panel`]. The week grid starts
/// at the earliest week and must be gap-free.
pub fn read_panel<R: Read>(rdr: R, source: &str) -> Result<Panel> {
    let records = read_rows(rdr, source, |r: RawPanelRow| {
        if !(0.0..=500.0).contains(&r.dsci) {
            return Err(Error::Invalid(format!("dsci {} outside [0, 500]", r.dsci)));
        }
        let flags = [
            r.agriculture,
            r.water,
            r.fire,
            r.plants,
            r.relief,
            r.society,
            r.tourism,
        ];
        let mut impacts = ImpactFlags::default();
        for (&cat, &v) in PANEL_CATEGORIES.iter().zip(flags.iter()) {
            match v {
                0 => {}
                1 => impacts.set(cat, true),
                other => {
                    return Err(Error::Invalid(format!("{cat} flag must be 0 or 1, got {other}")))
                }
            }
        }
        Ok(WeeklyCountyRecord {
            county: r.fips.parse()?,
            week_start: r.week_start,
            dsci: r.dsci,
            esi: r.esi,
            impacts,
        })
    })?;
    let start = records
        .iter()
        .map(|r| r.week_start)
        .min()
        .ok_or_else(|| Error::Invalid(format!("{source}: panel is empty")))?;
    let end = records.iter().map(|r| r.week_start).max().expect("non-empty");
    let grid = WeekGrid::spanning(start, end)?;
    Panel::from_records(grid, records)
}

pub fn read_panel_file(path: &Path) -> Result<Panel> {
    read_panel(open(path)?, &source_name(path))
}
