//! Lead-time forecasting with trained models.
//!
//! A model trained on window `a : 8` forecasts week `t` from weeks
//! `t-8 ..= t-a`, which gives a lead time of `a` weeks. Every panel read made
//! while building a forecast row is logged and checked against that cutoff.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Write;

use chrono::{Duration, NaiveDate};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dip::TrainedModel;
use crate::error::{Error, Result};
use crate::features::{IndexSet, WindowConfig};
use crate::ingest::{month_of, AdjacencyGraph, Fips, ImpactCategory, Panel, WeeklyCountyRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastRecord {
    pub target_week: NaiveDate,
    pub county: Fips,
    pub category: ImpactCategory,
    pub window: WindowConfig,
    pub lead_weeks: u8,
    /// `None` when the panel lacks the history the window needs.
    pub probability: Option<f64>,
    pub label: Option<u8>,
    pub available: bool,
}

/// Panel weeks read while forecasting, per county.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AccessLog {
    pub reads: BTreeSet<(Fips, NaiveDate)>,
}

impl AccessLog {
    pub fn latest(&self) -> Option<NaiveDate> {
        self.reads.iter().map(|&(_, w)| w).max()
    }

    pub fn weeks(&self) -> BTreeSet<NaiveDate> {
        self.reads.iter().map(|&(_, w)| w).collect()
    }
}

/// Forecasts `target` for every panel county with one model.
pub fn forecast_week(
    model: &TrainedModel,
    panel: &Panel,
    graph: &AdjacencyGraph,
    target: NaiveDate,
) -> Result<Vec<ForecastRecord>> {
    forecast_week_logged(model, panel, graph, target).map(|(r, _)| r)
}

/// [`forecast_week`] that also returns the access log.
pub fn forecast_week_logged(
    model: &TrainedModel,
    panel: &Panel,
    graph: &AdjacencyGraph,
    target: NaiveDate,
) -> Result<(Vec<ForecastRecord>, AccessLog)> {
    let layout = &model.layout;
    if layout.options.include_lag0 {
        return Err(Error::Config(
            "models using lag 0 cannot forecast: they read the target week".into(),
        ));
    }
    let grid = panel.grid();
    let t = grid
        .offset_of(target)
        .ok_or_else(|| Error::Invalid(format!("{target} is not a week start of the panel grid")))?;
    let lead = layout.window.lead_weeks();
    let cutoff = target - Duration::weeks(i64::from(lead));

    let max_deg = panel
        .counties()
        .iter()
        .map(|&c| graph.degree(c))
        .max()
        .unwrap_or(0);
    if max_deg > layout.neighbor_slots {
        return Err(Error::Layout(format!(
            "a county has {max_deg} neighbors but the model has {} slots",
            layout.neighbor_slots
        )));
    }

    let per_county: Vec<(ForecastRecord, Vec<(usize, usize)>)> = (0..panel.counties().len())
        .into_par_iter()
        .map(|ci| {
            let log = RefCell::new(Vec::new());
            let read = |c: usize, w: usize| -> &WeeklyCountyRecord {
                log.borrow_mut().push((c, w));
                panel.get(c, w)
            };
            let mut values = Vec::with_capacity(layout.n_cols());
            let mut mask = Vec::with_capacity(layout.n_cols());
            let filled = layout.fill_row(panel, graph, ci, t, &read, &mut values, &mut mask);
            let mut rec = ForecastRecord {
                target_week: target,
                county: panel.counties()[ci],
                category: layout.category,
                window: layout.window,
                lead_weeks: lead,
                probability: None,
                label: None,
                available: false,
            };
            if filled.is_some() {
                model.normalizer.apply_in_place(&mut values, &mask);
                let p = model.ensemble.predict_row(&values, &mask)?;
                rec.probability = Some(p);
                rec.label = Some((p >= model.threshold) as u8);
                rec.available = true;
            }
            Ok((rec, log.into_inner()))
        })
        .collect::<Result<_>>()?;

    let mut out = Vec::with_capacity(per_county.len());
    let mut log = AccessLog::default();
    for (rec, reads) in per_county {
        for (c, w) in reads {
            log.reads.insert((panel.counties()[c], grid.week(w)));
        }
        out.push(rec);
    }
    if let Some(read) = log.latest().filter(|&w| w > cutoff) {
        return Err(Error::Causality {
            target,
            cutoff,
            read,
        });
    }
    Ok((out, log))
}

/// Forecasts for several target weeks, concatenated in target order.
pub fn forecast_weeks(
    model: &TrainedModel,
    panel: &Panel,
    graph: &AdjacencyGraph,
    targets: &[NaiveDate],
) -> Result<Vec<ForecastRecord>> {
    let mut out = Vec::new();
    for &t in targets {
        out.extend(forecast_week(model, panel, graph, t)?);
    }
    Ok(out)
}

/// A forecast configuration a range is taken over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RangeMember {
    pub index_set: IndexSet,
    pub window: WindowConfig,
}

impl fmt::Display for RangeMember {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}:8", self.index_set, self.window.start_lag())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastRange {
    pub target_week: NaiveDate,
    pub min_total: usize,
    pub max_total: usize,
    /// Total predicted impacts (over counties and categories) per member.
    pub per_member: Vec<(RangeMember, usize)>,
    /// Per category, min and max across members.
    pub per_category: BTreeMap<ImpactCategory, (usize, usize)>,
}

impl ForecastRange {
    /// Member totals keyed by a `"<a>:8"` window label (or
    /// `"<index set>/<a>:8"` when the range spans index sets).
    pub fn totals_by_label(&self) -> BTreeMap<String, usize> {
        let sets: BTreeSet<IndexSet> = self.per_member.iter().map(|(m, _)| m.index_set).collect();
        self.per_member
            .iter()
            .map(|&(m, v)| {
                let label = if sets.len() > 1 {
                    m.to_string()
                } else {
                    format!("{}:8", m.window.start_lag())
                };
                (label, v)
            })
            .collect()
    }
}

/// Range of total predicted impacts at `target` across windows. Models are
/// grouped by (index set, window); a group counts as available when any of
/// its county forecasts is. Unless `across_index_sets` is set all models must
/// share one index set.
pub fn forecast_range(
    models: &[TrainedModel],
    panel: &Panel,
    graph: &AdjacencyGraph,
    target: NaiveDate,
    across_index_sets: bool,
) -> Result<ForecastRange> {
    let sets: BTreeSet<IndexSet> = models.iter().map(|m| m.layout.index_set).collect();
    if sets.len() > 1 && !across_index_sets {
        return Err(Error::Config(format!(
            "models span {} index sets; enable the index-set range to combine them",
            sets.len()
        )));
    }
    let mut seen = BTreeSet::new();
    for m in models {
        let key = (m.layout.category, m.layout.index_set, m.layout.window);
        if !seen.insert(key) {
            return Err(Error::Config(format!(
                "two models for {} / {} / {}",
                key.0, key.1, key.2
            )));
        }
    }

    let mut per_member: BTreeMap<RangeMember, (bool, BTreeMap<ImpactCategory, usize>)> = BTreeMap::new();
    for m in models {
        let member = RangeMember {
            index_set: m.layout.index_set,
            window: m.layout.window,
        };
        let recs = forecast_week(m, panel, graph, target)?;
        let entry = per_member.entry(member).or_default();
        entry.0 |= recs.iter().any(|r| r.available);
        let n: usize = recs.iter().filter_map(|r| r.label).map(usize::from).sum();
        *entry.1.entry(m.layout.category).or_default() += n;
    }
    per_member.retain(|_, (available, _)| *available);
    if per_member.is_empty() {
        return Err(Error::Invalid(format!("no window has enough history to forecast {target}")));
    }

    let totals: Vec<(RangeMember, usize)> = per_member
        .iter()
        .map(|(k, (_, cats))| (*k, cats.values().sum()))
        .collect();
    let categories: BTreeSet<ImpactCategory> = models.iter().map(|m| m.layout.category).collect();
    let per_category = categories
        .into_iter()
        .map(|c| {
            let counts = per_member.values().map(|(_, cats)| cats.get(&c).copied().unwrap_or(0));
            let lo = counts.clone().min().unwrap_or(0);
            let hi = counts.max().unwrap_or(0);
            (c, (lo, hi))
        })
        .collect();
    Ok(ForecastRange {
        target_week: target,
        min_total: totals.iter().map(|t| t.1).min().expect("nonempty"),
        max_total: totals.iter().map(|t| t.1).max().expect("nonempty"),
        per_member: totals,
        per_category,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Month {
    pub year: i32,
    pub month: u32,
}

impl Month {
    pub fn of(date: NaiveDate) -> Self {
        let (year, month) = month_of(date);
        Month { year, month }
    }

    fn succ(self) -> Self {
        if self.month == 12 {
            Month { year: self.year + 1, month: 1 }
        } else {
            Month { month: self.month + 1, ..self }
        }
    }
}

impl fmt::Display for Month {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonthlyTotal {
    pub month: Month,
    pub predicted_total: usize,
    pub observed_total: Option<usize>,
}

/// Per-week totals, used for plotting forecast against observed impacts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeeklyTotal {
    pub week: NaiveDate,
    pub predicted_total: usize,
    pub observed_total: Option<usize>,
}

fn observed_flag(panel: &Panel, r: &ForecastRecord) -> Option<bool> {
    let ci = panel.county_index(r.county)?;
    let wi = panel.grid().index_of(r.target_week)?;
    Some(panel.get(ci, wi).impacts.get(r.category))
}

/// Predicted (and optionally observed) impact counts per key. Records of
/// `exclude`d categories are dropped. Observed counts are taken once per
/// distinct (county, week, category) present in `records`.
fn totals_by<K: Ord + Copy>(
    records: &[ForecastRecord],
    observed: Option<&Panel>,
    exclude: &[ImpactCategory],
    key: impl Fn(NaiveDate) -> K,
) -> BTreeMap<K, (usize, usize)> {
    let mut out: BTreeMap<K, (usize, usize)> = BTreeMap::new();
    let mut counted = BTreeSet::new();
    for r in records.iter().filter(|r| !exclude.contains(&r.category)) {
        let slot = out.entry(key(r.target_week)).or_default();
        slot.0 += usize::from(r.label.unwrap_or(0));
        if let Some(panel) = observed {
            if counted.insert((r.county, r.target_week, r.category)) {
                slot.1 += usize::from(observed_flag(panel, r).unwrap_or(false));
            }
        }
    }
    out
}

/// Sums predicted labels per calendar month of each record's target week.
/// Months between the first and last record without any forecast get 0.
pub fn aggregate_monthly(
    records: &[ForecastRecord],
    observed: Option<&Panel>,
    exclude: &[ImpactCategory],
) -> Vec<MonthlyTotal> {
    let by_month = totals_by(records, observed, exclude, Month::of);
    let (Some(&first), Some(&last)) = (by_month.keys().next(), by_month.keys().next_back()) else {
        return Vec::new();
    };
    let mut out = Vec::new();
    let mut m = first;
    while m <= last {
        let (p, o) = by_month.get(&m).copied().unwrap_or((0, 0));
        out.push(MonthlyTotal {
            month: m,
            predicted_total: p,
            observed_total: observed.map(|_| o),
        });
        m = m.succ();
    }
    out
}

pub fn aggregate_weekly(
    records: &[ForecastRecord],
    observed: Option<&Panel>,
    exclude: &[ImpactCategory],
) -> Vec<WeeklyTotal> {
    totals_by(records, observed, exclude, |d| d)
        .into_iter()
        .map(|(week, (p, o))| WeeklyTotal {
            week,
            predicted_total: p,
            observed_total: observed.map(|_| o),
        })
        .collect()
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_forecast_csv<W: Write>(records: &[ForecastRecord], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record([
        "target_week",
        "county",
        "category",
        "window",
        "lead_weeks",
        "probability",
        "label",
        "available",
    ])?;
    for r in records {
        wtr.write_record([
            r.target_week.to_string(),
            r.county.to_string(),
            r.category.to_string(),
            format!("{}:8", r.window.start_lag()),
            r.lead_weeks.to_string(),
            opt(r.probability.map(|p| format!("{p:.6}"))),
            opt(r.label),
            r.available.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_range_csv<W: Write>(ranges: &[ForecastRange], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["target_week", "min_total", "max_total", "per_window_totals"])?;
    for r in ranges {
        wtr.write_record([
            r.target_week.to_string(),
            r.min_total.to_string(),
            r.max_total.to_string(),
            serde_json::to_string(&r.totals_by_label())?,
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_monthly_csv<W: Write>(totals: &[MonthlyTotal], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let with_observed = totals.iter().any(|t| t.observed_total.is_some());
    if with_observed {
        wtr.write_record(["month", "predicted_total", "observed_total"])?;
    } else {
        wtr.write_record(["month", "predicted_total"])?;
    }
    for t in totals {
        let mut rec = vec![t.month.to_string(), t.predicted_total.to_string()];
        if with_observed {
            rec.push(opt(t.observed_total));
        }
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_weekly_csv<W: Write>(totals: &[WeeklyTotal], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["week", "predicted_total", "observed_total"])?;
    for t in totals {
        wtr.write_record([t.week.to_string(), t.predicted_total.to_string(), opt(t.observed_total)])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Week starts from `from` through `to` (inclusive) on the panel's grid.
pub fn target_weeks(panel: &Panel, from: NaiveDate, to: NaiveDate) -> Result<Vec<NaiveDate>> {
    let grid = panel.grid();
    let a = grid
        .offset_of(from)
        .ok_or_else(|| Error::Invalid(format!("{from} is not a week start of the panel grid")))?;
    let b = grid
        .offset_of(to)
        .ok_or_else(|| Error::Invalid(format!("{to} is not a week start of the panel grid")))?;
    Ok((a..=b).map(|k| grid.start + Duration::weeks(k)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(week: &str, cat: ImpactCategory, label: u8) -> ForecastRecord {
        ForecastRecord {
            target_week: week.parse().unwrap(),
            county: Fips(35001),
            category: cat,
            window: WindowConfig::new(1).unwrap(),
            lead_weeks: 1,
            probability: Some(label as f64),
            label: Some(label),
            available: true,
        }
    }

    #[test]
    fn monthly_sums_and_gaps() {
        let mut rs = Vec::new();
        for w in ["2024-01-01", "2024-01-08", "2024-01-15", "2024-01-29"] {
            for c in [ImpactCategory::Fire, ImpactCategory::Water, ImpactCategory::Plants] {
                rs.push(ForecastRecord { county: Fips(1), ..rec(w, c, 1) });
            }
        }
        rs.push(rec("2024-03-04", ImpactCategory::Fire, 1));
        let m = aggregate_monthly(&rs, None, &[]);
        assert_eq!(m.len(), 3);
        assert_eq!(m[0].month.to_string(), "2024-01");
        assert_eq!(m[0].predicted_total, 12);
        assert_eq!(m[1].predicted_total, 0);
        assert_eq!(m[2].predicted_total, 1);
        let no_plants = aggregate_monthly(&rs, None, &[ImpactCategory::Plants]);
        assert_eq!(no_plants[0].predicted_total, 8);
    }

    #[test]
    fn week_starting_late_in_month_stays() {
        assert_eq!(Month::of("2024-01-29".parse().unwrap()), Month { year: 2024, month: 1 });
        assert_eq!(Month { year: 2023, month: 12 }.succ(), Month { year: 2024, month: 1 });
    }

    #[test]
    fn forecast_csv_shape() {
        let mut r = rec("2024-06-03", ImpactCategory::Fire, 1);
        r.probability = Some(0.75);
        let mut u = r.clone();
        u.probability = None;
        u.label = None;
        u.available = false;
        let mut buf = Vec::new();
        write_forecast_csv(&[r, u], &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "target_week,county,category,window,lead_weeks,probability,label,available\n\
             2024-06-03,35001,fire,1:8,1,0.750000,1,true\n\
             2024-06-03,35001,fire,1:8,1,,,false\n"
        );
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn monthly_totals_sum_member_weeks(
                labels in prop::collection::vec((0usize..60, 0u8..2, 0usize..3), 0..120),
            ) {
                let start: NaiveDate = "2023-12-04".parse().unwrap();
                let cats = [ImpactCategory::Fire, ImpactCategory::Water, ImpactCategory::Plants];
                let records: Vec<ForecastRecord> = labels
                    .iter()
                    .map(|&(w, y, c)| ForecastRecord {
                        target_week: start + Duration::weeks(w as i64),
                        ..rec("2024-01-01", cats[c], y)
                    })
                    .collect();
                let weekly = aggregate_weekly(&records, None, &[]);
                let monthly = aggregate_monthly(&records, None, &[]);
                for m in &monthly {
                    let sum: usize = weekly
                        .iter()
                        .filter(|w| Month::of(w.week) == m.month)
                        .map(|w| w.predicted_total)
                        .sum();
                    prop_assert_eq!(m.predicted_total, sum);
                }
                let total: usize = labels.iter().map(|&(_, y, _)| y as usize).sum();
                prop_assert_eq!(monthly.iter().map(|m| m.predicted_total).sum::<usize>(), total);
            }
        }
    }
}
