//! Raw drought inputs to a gap-free weekly county panel.
//!
//! Four inputs feed the panel: USDM categorical area percentages (turned into
//! DSCI), dated ESI observations (averaged per week), Drought Impact Reporter
//! spans (binarized per week and category) and a county adjacency list. All of
//! them are aligned to a single weekly grid keyed by the USDM release-week
//! start date.

mod graph;
pub mod io;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, Duration, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use graph::AdjacencyGraph;

/// County FIPS code, e.g. `35001`. Displayed zero-padded to five digits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Fips(pub u32);

impl fmt::Display for Fips {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:05}", self.0)
    }
}

impl FromStr for Fips {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() || s.len() > 5 || !s.bytes().all(|b| b.is_ascii_digit()) {
            return Err(Error::Invalid(format!("malformed FIPS code {s:?}")));
        }
        Ok(Fips(s.parse().expect("digits checked")))
    }
}

impl TryFrom<String> for Fips {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Fips> for String {
    fn from(f: Fips) -> String {
        f.to_string()
    }
}

/// Drought Impact Reporter sector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImpactCategory {
    Agriculture,
    Water,
    Business,
    Energy,
    Fire,
    Plants,
    Relief,
    Society,
    Tourism,
}

impl ImpactCategory {
    pub const ALL: [ImpactCategory; 9] = [
        ImpactCategory::Agriculture,
        ImpactCategory::Water,
        ImpactCategory::Business,
        ImpactCategory::Energy,
        ImpactCategory::Fire,
        ImpactCategory::Plants,
        ImpactCategory::Relief,
        ImpactCategory::Society,
        ImpactCategory::Tourism,
    ];

    /// Categories modeled by default. Business and Energy never produced a
    /// usable model and are left out unless explicitly requested.
    pub const MODELED: [ImpactCategory; 7] = [
        ImpactCategory::Agriculture,
        ImpactCategory::Water,
        ImpactCategory::Fire,
        ImpactCategory::Plants,
        ImpactCategory::Relief,
        ImpactCategory::Society,
        ImpactCategory::Tourism,
    ];

    pub fn short_name(self) -> &'static str {
        match self {
            ImpactCategory::Agriculture => "agriculture",
            ImpactCategory::Water => "water",
            ImpactCategory::Business => "business",
            ImpactCategory::Energy => "energy",
            ImpactCategory::Fire => "fire",
            ImpactCategory::Plants => "plants",
            ImpactCategory::Relief => "relief",
            ImpactCategory::Society => "society",
            ImpactCategory::Tourism => "tourism",
        }
    }

    pub(crate) fn index(self) -> usize {
        self as usize
    }

    /// Categories with few positives; trained but kept out of default report
    /// tables.
    pub fn is_low_support(self) -> bool {
        self == ImpactCategory::Tourism
    }
}

impl fmt::Display for ImpactCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for ImpactCategory {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        let cat = match lower.as_str() {
            "agriculture" => ImpactCategory::Agriculture,
            "water" | "water supply & quality" => ImpactCategory::Water,
            "business" | "business & industry" => ImpactCategory::Business,
            "energy" => ImpactCategory::Energy,
            "fire" => ImpactCategory::Fire,
            "plants" | "plants & wildlife" => ImpactCategory::Plants,
            "relief" | "relief, response & restrictions" => ImpactCategory::Relief,
            "society" | "society & public health" => ImpactCategory::Society,
            "tourism" | "tourism & recreation" => ImpactCategory::Tourism,
            _ => return Err(Error::Invalid(format!("unknown impact category {s:?}"))),
        };
        Ok(cat)
    }
}

/// Per-category binary impact flags for one county-week.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct ImpactFlags([bool; 9]);

impl ImpactFlags {
    pub fn get(&self, cat: ImpactCategory) -> bool {
        self.0[cat.index()]
    }

    pub fn set(&mut self, cat: ImpactCategory, value: bool) {
        self.0[cat.index()] = value;
    }

    pub fn count(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }
}

/// Categorical (non-cumulative) percent of county area in D0..D4.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DroughtCategoryAreas {
    d: [f64; 5],
}

/// Slack allowed on the D0..D4 sum for rounding in published tables.
const AREA_SUM_SLACK: f64 = 1e-6;

impl DroughtCategoryAreas {
    pub fn new(d: [f64; 5]) -> Result<Self> {
        for (i, &v) in d.iter().enumerate() {
            if !v.is_finite() || !(0.0..=100.0).contains(&v) {
                return Err(Error::Invalid(format!("D{i} percent {v} outside [0, 100]")));
            }
        }
        let sum: f64 = d.iter().sum();
        if sum > 100.0 + AREA_SUM_SLACK {
            return Err(Error::Invalid(format!("D0..D4 percents sum to {sum} > 100")));
        }
        Ok(DroughtCategoryAreas { d })
    }

    /// Converts cumulative percentages (D0 includes D1..D4, and so on) to
    /// categorical ones.
    pub fn from_cumulative(c: [f64; 5]) -> Result<Self> {
        for i in 0..4 {
            if c[i + 1] > c[i] + AREA_SUM_SLACK {
                return Err(Error::Invalid(format!(
                    "cumulative D{} ({}) exceeds D{} ({})",
                    i + 1,
                    c[i + 1],
                    i,
                    c[i]
                )));
            }
        }
        let mut d = [0.0; 5];
        for i in 0..4 {
            d[i] = (c[i] - c[i + 1]).max(0.0);
        }
        d[4] = c[4];
        Self::new(d)
    }

    pub fn values(&self) -> [f64; 5] {
        self.d
    }
}

/// Drought Severity and Coverage Index: `1·D0 + 2·D1 + 3·D2 + 4·D3 + 5·D4`.
pub fn compute_dsci(areas: &DroughtCategoryAreas) -> f64 {
    let mut total = 0.0;
    for (i, &pct) in areas.d.iter().enumerate() {
        total += (i + 1) as f64 * pct;
    }
    total.min(500.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeeklyCountyRecord {
    pub county: Fips,
    pub week_start: NaiveDate,
    pub dsci: f64,
    pub esi: Option<f64>,
    pub impacts: ImpactFlags,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImpactReport {
    pub county: Fips,
    pub span_start: NaiveDate,
    pub span_end: NaiveDate,
    pub category: ImpactCategory,
}

impl ImpactReport {
    pub fn new(
        county: Fips,
        span_start: NaiveDate,
        span_end: NaiveDate,
        category: ImpactCategory,
    ) -> Result<Self> {
        if span_start > span_end {
            return Err(Error::Invalid(format!(
                "impact span {span_start}..{span_end} for {county} ends before it starts"
            )));
        }
        Ok(ImpactReport {
            county,
            span_start,
            span_end,
            category,
        })
    }

    fn overlaps_week(&self, week_start: NaiveDate) -> bool {
        let week_end = week_start + Duration::days(6);
        self.span_start <= week_end && self.span_end >= week_start
    }
}

/// 1 iff any report for `(county, category)` overlaps the seven days starting
/// at `week_start`.
pub fn binarize_impacts(
    reports: &[ImpactReport],
    county: Fips,
    week_start: NaiveDate,
    category: ImpactCategory,
) -> bool {
    reports
        .iter()
        .any(|r| r.county == county && r.category == category && r.overlaps_week(week_start))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EsiObservation {
    pub county: Fips,
    pub date: NaiveDate,
    pub value: f64,
}

/// Regular seven-day grid of week start dates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeekGrid {
    pub start: NaiveDate,
    pub n_weeks: usize,
}

impl WeekGrid {
    pub fn new(start: NaiveDate, n_weeks: usize) -> Self {
        WeekGrid { start, n_weeks }
    }

    /// Grid covering `start` through the week containing `end`.
    pub fn spanning(start: NaiveDate, end: NaiveDate) -> Result<Self> {
        if end < start {
            return Err(Error::Invalid(format!("date range {start}..{end} is empty")));
        }
        let days = (end - start).num_days();
        Ok(WeekGrid::new(start, days as usize / 7 + 1))
    }

    pub fn week(&self, idx: usize) -> NaiveDate {
        self.start + Duration::weeks(idx as i64)
    }

    pub fn weeks(&self) -> impl Iterator<Item = NaiveDate> + '_ {
        (0..self.n_weeks).map(|i| self.week(i))
    }

    pub fn last(&self) -> Option<NaiveDate> {
        self.n_weeks.checked_sub(1).map(|i| self.week(i))
    }

    /// Signed offset in weeks of an exact week start, on or off the grid's span.
    pub fn offset_of(&self, week_start: NaiveDate) -> Option<i64> {
        let days = (week_start - self.start).num_days();
        (days % 7 == 0).then_some(days / 7)
    }

    /// Index of an exact week start inside the grid.
    pub fn index_of(&self, week_start: NaiveDate) -> Option<usize> {
        self.offset_of(week_start)
            .filter(|&k| k >= 0 && (k as usize) < self.n_weeks)
            .map(|k| k as usize)
    }

    /// Index of the week whose seven days contain `date`.
    pub fn containing(&self, date: NaiveDate) -> Option<usize> {
        let days = (date - self.start).num_days();
        if days < 0 {
            return None;
        }
        let idx = (days / 7) as usize;
        (idx < self.n_weeks).then_some(idx)
    }
}

/// Mean ESI per `(county, week index)`; weeks with no observation are absent.
pub fn align_esi_weekly(obs: &[EsiObservation], grid: &WeekGrid) -> HashMap<(Fips, usize), f64> {
    let mut acc: HashMap<(Fips, usize), (f64, usize)> = HashMap::new();
    for o in obs.iter().filter(|o| o.value.is_finite()) {
        if let Some(w) = grid.containing(o.date) {
            let e = acc.entry((o.county, w)).or_insert((0.0, 0));
            e.0 += o.value;
            e.1 += 1;
        }
    }
    acc.into_iter()
        .map(|(k, (sum, n))| (k, sum / n as f64))
        .collect()
}

/// One USDM row: a county's categorical drought areas for one release week.
#[derive(Debug, Clone, PartialEq)]
pub struct UsdmRow {
    pub county: Fips,
    pub week_start: NaiveDate,
    pub areas: DroughtCategoryAreas,
}

/// Immutable gap-free panel, stored county-major over the week grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    grid: WeekGrid,
    counties: Vec<Fips>,
    records: Vec<WeeklyCountyRecord>,
}

impl Panel {
    /// Assembles a panel from records already on `grid`. Records must cover
    /// every (county, week) exactly once.
    pub fn from_records(
        grid: WeekGrid,
        mut records: Vec<WeeklyCountyRecord>,
    ) -> Result<Self> {
        let mut counties: Vec<Fips> = records.iter().map(|r| r.county).collect();
        counties.sort_unstable();
        counties.dedup();
        let expected = counties.len() * grid.n_weeks;
        for r in &records {
            if grid.index_of(r.week_start).is_none() {
                return Err(Error::Invalid(format!(
                    "record week {} for {} is not on the weekly grid starting {}",
                    r.week_start, r.county, grid.start
                )));
            }
        }
        records.sort_by_key(|r| (r.county, r.week_start));
        records.dedup_by_key(|r| (r.county, r.week_start));
        if records.len() != expected {
            // locate the first hole for a useful message
            for &c in &counties {
                for w in grid.weeks() {
                    if records
                        .binary_search_by_key(&(c, w), |r| (r.county, r.week_start))
                        .is_err()
                    {
                        return Err(Error::MissingWeek { county: c, week: w });
                    }
                }
            }
        }
        Ok(Panel {
            grid,
            counties,
            records,
        })
    }

    pub fn grid(&self) -> &WeekGrid {
        &self.grid
    }

    pub fn counties(&self) -> &[Fips] {
        &self.counties
    }

    pub fn n_weeks(&self) -> usize {
        self.grid.n_weeks
    }

    pub fn records(&self) -> &[WeeklyCountyRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn county_index(&self, county: Fips) -> Option<usize> {
        self.counties.binary_search(&county).ok()
    }

    pub fn get(&self, county_idx: usize, week_idx: usize) -> &WeeklyCountyRecord {
        &self.records[county_idx * self.grid.n_weeks + week_idx]
    }

    /// Number of (county, week) records flagged for `category`.
    pub fn positives(&self, category: ImpactCategory) -> usize {
        self.records.iter().filter(|r| r.impacts.get(category)).count()
    }
}

/// Builds the weekly panel for `counties` over `grid`.
///
/// USDM rows outside the grid span or for other counties are ignored; a USDM
/// row inside the span that is not on a week boundary is rejected. ESI and
/// impact rows for counties not in the panel are ignored.
pub fn build_panel(
    usdm: &[UsdmRow],
    esi: &[EsiObservation],
    reports: &[ImpactReport],
    grid: WeekGrid,
    counties: &[Fips],
) -> Result<Panel> {
    let mut counties = counties.to_vec();
    counties.sort_unstable();
    counties.dedup();
    if counties.is_empty() || grid.n_weeks == 0 {
        return Err(Error::Invalid("panel needs at least one county and one week".into()));
    }
    let n_weeks = grid.n_weeks;
    let slot = |c: Fips| counties.binary_search(&c).ok();

    let mut dsci: Vec<Option<f64>> = vec![None; counties.len() * n_weeks];
    for row in usdm {
        let Some(ci) = slot(row.county) else { continue };
        let Some(offset) = grid.offset_of(row.week_start) else {
            if grid.containing(row.week_start).is_some() {
                return Err(Error::Invalid(format!(
                    "USDM week {} for {} is not aligned to the grid starting {}",
                    row.week_start, row.county, grid.start
                )));
            }
            continue;
        };
        if offset < 0 || offset as usize >= n_weeks {
            continue;
        }
        let cell = &mut dsci[ci * n_weeks + offset as usize];
        if cell.is_some() {
            return Err(Error::Invalid(format!(
                "duplicate USDM row for {} week {}",
                row.county, row.week_start
            )));
        }
        *cell = Some(compute_dsci(&row.areas));
    }

    let esi_weekly = align_esi_weekly(esi, &grid);

    let mut impacts = vec![ImpactFlags::default(); counties.len() * n_weeks];
    for r in reports {
        let Some(ci) = slot(r.county) else { continue };
        let first = (r.span_start - grid.start).num_days().div_euclid(7).max(0);
        let last = (r.span_end - grid.start).num_days().div_euclid(7);
        if last < 0 {
            continue;
        }
        for w in first..=last.min(n_weeks as i64 - 1) {
            impacts[ci * n_weeks + w as usize].set(r.category, true);
        }
    }

    let mut records = Vec::with_capacity(counties.len() * n_weeks);
    for (ci, &county) in counties.iter().enumerate() {
        for w in 0..n_weeks {
            let week_start = grid.week(w);
            let value = dsci[ci * n_weeks + w].ok_or(Error::MissingWeek {
                county,
                week: week_start,
            })?;
            records.push(WeeklyCountyRecord {
                county,
                week_start,
                dsci: value,
                esi: esi_weekly.get(&(county, w)).copied(),
                impacts: impacts[ci * n_weeks + w],
            });
        }
    }
    Ok(Panel {
        grid,
        counties,
        records,
    })
}

/// First day of the calendar month containing `date`.
pub(crate) fn month_of(date: NaiveDate) -> (i32, u32) {
    (date.year(), date.month())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(s: &str) -> NaiveDate {
        s.parse().unwrap()
    }

    fn areas(v: [f64; 5]) -> DroughtCategoryAreas {
        DroughtCategoryAreas::new(v).unwrap()
    }

    #[test]
    fn dsci_examples() {
        assert_eq!(compute_dsci(&areas([0.0; 5])), 0.0);
        assert_eq!(compute_dsci(&areas([0.0, 0.0, 0.0, 0.0, 100.0])), 500.0);
        assert_eq!(compute_dsci(&areas([20.0, 30.0, 10.0, 0.0, 0.0])), 110.0);
    }

    #[test]
    fn areas_validation() {
        assert!(DroughtCategoryAreas::new([-1.0, 0.0, 0.0, 0.0, 0.0]).is_err());
        assert!(DroughtCategoryAreas::new([0.0, 0.0, 101.0, 0.0, 0.0]).is_err());
        assert!(DroughtCategoryAreas::new([60.0, 50.0, 0.0, 0.0, 0.0]).is_err());
        assert!(DroughtCategoryAreas::new([f64::NAN, 0.0, 0.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn cumulative_conversion() {
        let a = DroughtCategoryAreas::from_cumulative([100.0, 80.0, 50.0, 10.0, 0.0]).unwrap();
        assert_eq!(a.values(), [20.0, 30.0, 40.0, 10.0, 0.0]);
        assert!(DroughtCategoryAreas::from_cumulative([10.0, 20.0, 0.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn binarize_examples() {
        let c = Fips(35001);
        let w = d("2024-06-03");
        assert!(!binarize_impacts(&[], c, w, ImpactCategory::Fire));

        let r = ImpactReport::new(c, w + Duration::days(2), w + Duration::days(2), ImpactCategory::Fire)
            .unwrap();
        assert!(binarize_impacts(std::slice::from_ref(&r), c, w, ImpactCategory::Fire));
        assert!(!binarize_impacts(std::slice::from_ref(&r), c, w, ImpactCategory::Water));
        assert!(!binarize_impacts(std::slice::from_ref(&r), Fips(35003), w, ImpactCategory::Fire));

        // span touching W3..W5 of a grid starting at w
        let grid = WeekGrid::new(w, 8);
        let span = ImpactReport::new(
            c,
            grid.week(3) + Duration::days(4),
            grid.week(5) + Duration::days(1),
            ImpactCategory::Water,
        )
        .unwrap();
        let hits: Vec<usize> = (0..8)
            .filter(|&i| binarize_impacts(std::slice::from_ref(&span), c, grid.week(i), ImpactCategory::Water))
            .collect();
        assert_eq!(hits, vec![3, 4, 5]);
    }

    #[test]
    fn report_span_order_checked() {
        assert!(ImpactReport::new(Fips(1), d("2020-01-10"), d("2020-01-01"), ImpactCategory::Fire).is_err());
    }

    #[test]
    fn esi_weekly_mean() {
        let grid = WeekGrid::new(d("2024-01-01"), 3);
        let c = Fips(35001);
        let obs = [
            EsiObservation { county: c, date: d("2024-01-02"), value: 0.7 },
            EsiObservation { county: c, date: d("2024-01-08"), value: -0.5 },
            EsiObservation { county: c, date: d("2024-01-14"), value: -1.5 },
        ];
        let m = align_esi_weekly(&obs, &grid);
        assert_eq!(m[&(c, 0)], 0.7);
        assert_eq!(m[&(c, 1)], -1.0);
        assert!(!m.contains_key(&(c, 2)));
    }

    fn usdm_row(c: u32, week: NaiveDate, dsci_d0: f64) -> UsdmRow {
        UsdmRow {
            county: Fips(c),
            week_start: week,
            areas: areas([dsci_d0, 0.0, 0.0, 0.0, 0.0]),
        }
    }

    #[test]
    fn minimal_panel() {
        let grid = WeekGrid::new(d("2024-01-02"), 1);
        let p = build_panel(&[usdm_row(1, grid.start, 12.0)], &[], &[], grid, &[Fips(1)]).unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(p.get(0, 0).dsci, 12.0);
        assert_eq!(p.get(0, 0).esi, None);
    }

    #[test]
    fn panel_row_count_and_impacts() {
        let grid = WeekGrid::new(d("2020-01-07"), 200);
        let counties: Vec<Fips> = (0..5).map(|i| Fips(35001 + 2 * i)).collect();
        let mut usdm = Vec::new();
        for c in &counties {
            for w in grid.weeks() {
                usdm.push(usdm_row(c.0, w, 10.0));
            }
        }
        let reports = vec![ImpactReport::new(
            counties[2],
            grid.week(10) + Duration::days(3),
            grid.week(12),
            ImpactCategory::Relief,
        )
        .unwrap()];
        let p = build_panel(&usdm, &[], &reports, grid, &counties).unwrap();
        assert_eq!(p.len(), 1000);
        assert_eq!(p.positives(ImpactCategory::Relief), 3);
        for w in 0..200 {
            assert_eq!(
                p.get(2, w).impacts.get(ImpactCategory::Relief),
                binarize_impacts(&reports, counties[2], grid.week(w), ImpactCategory::Relief)
            );
        }
    }

    #[test]
    fn missing_usdm_week_is_named() {
        let grid = WeekGrid::new(d("2020-01-07"), 3);
        let usdm = vec![usdm_row(7, grid.week(0), 1.0), usdm_row(7, grid.week(2), 1.0)];
        match build_panel(&usdm, &[], &[], grid, &[Fips(7)]) {
            Err(Error::MissingWeek { county, week }) => {
                assert_eq!(county, Fips(7));
                assert_eq!(week, grid.week(1));
            }
            other => panic!("expected MissingWeek, got {other:?}"),
        }
    }

    #[test]
    fn misaligned_usdm_week_rejected() {
        let grid = WeekGrid::new(d("2020-01-07"), 3);
        let usdm = vec![usdm_row(7, d("2020-01-09"), 1.0)];
        assert!(matches!(
            build_panel(&usdm, &[], &[], grid, &[Fips(7)]),
            Err(Error::Invalid(_))
        ));
    }

    #[test]
    fn fips_parse_and_display() {
        assert_eq!("01001".parse::<Fips>().unwrap(), Fips(1001));
        assert_eq!(Fips(1001).to_string(), "01001");
        assert!("35a01".parse::<Fips>().is_err());
        assert!("".parse::<Fips>().is_err());
    }

    #[test]
    fn category_names() {
        for c in ImpactCategory::ALL {
            assert_eq!(c.short_name().parse::<ImpactCategory>().unwrap(), c);
        }
        assert_eq!("Plants & Wildlife".parse::<ImpactCategory>().unwrap(), ImpactCategory::Plants);
        assert!(!ImpactCategory::MODELED.contains(&ImpactCategory::Business));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn valid_areas() -> impl Strategy<Value = [f64; 5]> {
            prop::array::uniform5(0.0f64..1.0).prop_flat_map(|w| {
                (0.0f64..=100.0).prop_map(move |total| {
                    let s: f64 = w.iter().sum::<f64>().max(1e-12);
                    let mut d = [0.0; 5];
                    for i in 0..5 {
                        d[i] = (w[i] / s * total * 0.999_999).clamp(0.0, 100.0);
                    }
                    d
                })
            })
        }

        proptest! {
            #[test]
            fn dsci_bounded_and_linear(a in valid_areas(), b in valid_areas()) {
                let x = compute_dsci(&areas(a));
                prop_assert!((0.0..=500.0).contains(&x));
                let half: [f64; 5] = std::array::from_fn(|i| 0.5 * a[i] + 0.5 * b[i]);
                let mid = compute_dsci(&areas(half));
                let expect = 0.5 * x + 0.5 * compute_dsci(&areas(b));
                prop_assert!((mid - expect).abs() < 1e-9);
            }

            #[test]
            fn binarize_monotone(offsets in prop::collection::vec((0i64..60, 0i64..20), 0..6), extra in (0i64..60, 0i64..20), week in 0i64..10) {
                let base = NaiveDate::from_ymd_opt(2021, 1, 5).unwrap();
                let c = Fips(9);
                let mk = |(s, len): (i64, i64)| ImpactReport::new(
                    c, base + Duration::days(s), base + Duration::days(s + len), ImpactCategory::Fire).unwrap();
                let mut reports: Vec<_> = offsets.into_iter().map(mk).collect();
                let w = base + Duration::weeks(week);
                let before = binarize_impacts(&reports, c, w, ImpactCategory::Fire);
                reports.push(mk(extra));
                let after = binarize_impacts(&reports, c, w, ImpactCategory::Fire);
                prop_assert!(!before || after);
            }
        }
    }
}
