//! Seeded synthetic inputs with a planted impact rule.
//!
//! Each county-week is independently "dry" (all area in D4, DSCI 410 to 490) or
//! "wet" (some area in D0, DSCI 0 to 60) with equal probability. Agriculture
//! impacts are planted exactly when the mean DSCI of the previous four weeks
//! exceeds 300, which happens iff at least three of those weeks were dry.
//! Other categories receive rare impacts independent of everything else, and
//! ESI is pure noise. Counties are drawn independently, so neighbor features
//! carry no information about a county's own label.

use std::fs;
use std::path::Path;

use chrono::{Duration, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dip::Dataset;
use crate::error::Result;
use crate::ingest::{
    build_panel, compute_dsci, AdjacencyGraph, DroughtCategoryAreas, EsiObservation, Fips, ImpactCategory,
    ImpactReport, Panel, UsdmRow, WeekGrid,
};

/// The category carrying the planted rule.
pub const PLANTED_CATEGORY: ImpactCategory = ImpactCategory::Agriculture;
/// DSCI threshold of the planted rule.
pub const PLANTED_THRESHOLD: f64 = 300.0;
/// Lags averaged by the planted rule.
pub const PLANTED_LAGS: std::ops::RangeInclusive<usize> = 1..=4;

/// The 33 New Mexico county FIPS codes.
pub const NM_COUNTIES: [u32; 33] = [
    35001, 35003, 35005, 35006, 35007, 35009, 35011, 35013, 35015, 35017, 35019, 35021, 35023,
    35025, 35027, 35028, 35029, 35031, 35033, 35035, 35037, 35039, 35041, 35043, 35045, 35047,
    35049, 35051, 35053, 35055, 35057, 35059, 35061,
];

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub counties: Vec<Fips>,
    /// Adjacency; a ring over `counties` when `None`.
    pub edges: Option<Vec<(Fips, Fips)>>,
    pub start: NaiveDate,
    pub weeks: usize,
    pub seed: u64,
    /// Per-week probability of a dry week.
    pub dry_probability: f64,
    /// Per-week probability of an impact in each unplanted category.
    pub noise_rate: f64,
    /// Probability that a week has no ESI observation.
    pub esi_missing: f64,
}

impl SyntheticConfig {
    /// `n` counties (NM codes first, then 99001, 99003, ...) for `weeks`
    /// weeks starting 2020-01-07.
    pub fn new(n: usize, weeks: usize, seed: u64) -> Self {
        let counties = (0..n)
            .map(|i| match NM_COUNTIES.get(i) {
                Some(&c) => Fips(c),
                None => Fips(99001 + 2 * (i - NM_COUNTIES.len()) as u32),
            })
            .collect();
        SyntheticConfig {
            counties,
            edges: None,
            start: NaiveDate::from_ymd_opt(2020, 1, 7).expect("valid date"),
            weeks,
            seed,
            dry_probability: 0.5,
            noise_rate: 0.03,
            esi_missing: 0.1,
        }
    }

    pub fn with_edges(mut self, edges: Vec<(Fips, Fips)>) -> Self {
        self.edges = Some(edges);
        self
    }
}

/// Raw inputs as they would come from the CSV readers.
#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub grid: WeekGrid,
    pub counties: Vec<Fips>,
    pub usdm: Vec<UsdmRow>,
    pub esi: Vec<EsiObservation>,
    pub reports: Vec<ImpactReport>,
    pub edges: Vec<(Fips, Fips)>,
}

fn ring(counties: &[Fips]) -> Vec<(Fips, Fips)> {
    match counties.len() {
        0 | 1 => Vec::new(),
        2 => vec![(counties[0], counties[1])],
        n => (0..n).map(|i| (counties[i], counties[(i + 1) % n])).collect(),
    }
}

/// Whether the planted rule fires for a county's DSCI series at week `t`.
pub fn planted_label(dsci: &[f64], t: usize) -> bool {
    if t < *PLANTED_LAGS.end() {
        return false;
    }
    let sum: f64 = PLANTED_LAGS.map(|l| dsci[t - l]).sum();
    sum / PLANTED_LAGS.count() as f64 > PLANTED_THRESHOLD
}

pub fn generate(cfg: &SyntheticConfig) -> Result<SyntheticData> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let grid = WeekGrid::new(cfg.start, cfg.weeks);
    let mut usdm = Vec::with_capacity(cfg.counties.len() * cfg.weeks);
    let mut esi = Vec::new();
    let mut reports = Vec::new();
    let noise_categories: Vec<ImpactCategory> = ImpactCategory::MODELED
        .iter()
        .copied()
        .filter(|&c| c != PLANTED_CATEGORY)
        .collect();

    for &county in &cfg.counties {
        let mut dsci = Vec::with_capacity(cfg.weeks);
        for t in 0..cfg.weeks {
            let week = grid.week(t);
            let areas = if rng.gen_bool(cfg.dry_probability) {
                DroughtCategoryAreas::new([0.0, 0.0, 0.0, 0.0, rng.gen_range(82.0..=98.0)])?
            } else {
                DroughtCategoryAreas::new([rng.gen_range(0.0..=60.0), 0.0, 0.0, 0.0, 0.0])?
            };
            dsci.push(compute_dsci(&areas));
            usdm.push(UsdmRow {
                county,
                week_start: week,
                areas,
            });
            if !rng.gen_bool(cfg.esi_missing) {
                esi.push(EsiObservation {
                    county,
                    date: week + Duration::days(rng.gen_range(0..7)),
                    value: rng.gen_range(-3.0..3.0),
                });
            }
            let week_end = week + Duration::days(6);
            if planted_label(&dsci, t) {
                reports.push(ImpactReport::new(county, week, week_end, PLANTED_CATEGORY)?);
            }
            for &c in &noise_categories {
                if rng.gen_bool(cfg.noise_rate) {
                    reports.push(ImpactReport::new(county, week, week_end, c)?);
                }
            }
        }
    }
    Ok(SyntheticData {
        grid,
        counties: cfg.counties.clone(),
        usdm,
        esi,
        reports,
        edges: cfg.edges.clone().unwrap_or_else(|| ring(&cfg.counties)),
    })
}

impl SyntheticData {
    pub fn panel(&self) -> Result<Panel> {
        build_panel(&self.usdm, &self.esi, &self.reports, self.grid, &self.counties)
    }

    pub fn graph(&self) -> Result<AdjacencyGraph> {
        AdjacencyGraph::from_edges(&self.edges, &self.counties)
    }

    pub fn dataset(&self) -> Result<Dataset> {
        Ok(Dataset::new(self.panel()?, self.graph()?))
    }

    /// Writes `usdm.csv`, `esi.csv`, `dir.csv` and `adjacency.csv` in the
    /// reader formats.
    pub fn write_csvs(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut w = csv::Writer::from_path(dir.join("usdm.csv"))?;
        w.write_record(["fips", "week_start", "d0", "d1", "d2", "d3", "d4"])?;
        for r in &self.usdm {
            let mut rec = vec![r.county.to_string(), r.week_start.to_string()];
            rec.extend(r.areas.values().iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;

        let mut w = csv::Writer::from_path(dir.join("esi.csv"))?;
        w.write_record(["fips", "date", "esi"])?;
        for o in &self.esi {
            w.write_record([o.county.to_string(), o.date.to_string(), o.value.to_string()])?;
        }
        w.flush()?;

        let mut w = csv::Writer::from_path(dir.join("dir.csv"))?;
        w.write_record(["fips", "span_start", "span_end", "category"])?;
        for r in &self.reports {
            w.write_record([
                r.county.to_string(),
                r.span_start.to_string(),
                r.span_end.to_string(),
                r.category.to_string(),
            ])?;
        }
        w.flush()?;

        let mut w = csv::Writer::from_path(dir.join("adjacency.csv"))?;
        w.write_record(["fips_a", "fips_b"])?;
        for (a, b) in &self.edges {
            w.write_record([a.to_string(), b.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::io;

    #[test]
    fn panel_labels_follow_rule() {
        let data = generate(&SyntheticConfig::new(3, 60, 9)).unwrap();
        let panel = data.panel().unwrap();
        let mut positives = 0;
        for ci in 0..3 {
            let dsci: Vec<f64> = (0..60).map(|w| panel.get(ci, w).dsci).collect();
            for t in 0..60 {
                let planted = planted_label(&dsci, t);
                assert_eq!(panel.get(ci, t).impacts.get(PLANTED_CATEGORY), planted);
                positives += planted as usize;
                assert!(dsci[t] <= 60.0 || (410.0..=490.0).contains(&dsci[t]));
            }
        }
        assert!(positives > 10);
        assert_eq!(data.graph().unwrap().edge_count(), 3);
    }

    #[test]
    fn rule_threshold_equals_three_dry_weeks() {
        assert!(planted_label(&[410.0, 410.0, 410.0, 0.0, 0.0], 4));
        assert!(!planted_label(&[490.0, 490.0, 60.0, 60.0, 0.0], 4));
        assert!(!planted_label(&[490.0; 3], 2));
    }

    #[test]
    fn csv_round_trip() {
        let data = generate(&SyntheticConfig::new(2, 20, 1)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        data.write_csvs(dir.path()).unwrap();
        let usdm = io::read_usdm_file(&dir.path().join("usdm.csv"), false).unwrap();
        let esi = io::read_esi_file(&dir.path().join("esi.csv")).unwrap();
        let reports = io::read_dir_file(&dir.path().join("dir.csv")).unwrap();
        let panel = build_panel(&usdm, &esi, &reports, data.grid, &data.counties).unwrap();
        assert_eq!(panel, data.panel().unwrap());
    }

    #[test]
    fn deterministic() {
        let a = generate(&SyntheticConfig::new(2, 30, 5)).unwrap().panel().unwrap();
        let b = generate(&SyntheticConfig::new(2, 30, 5)).unwrap().panel().unwrap();
        assert_eq!(a, b);
    }
}
