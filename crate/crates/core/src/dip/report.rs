//! Tabular and JSON renderings of an [`EvaluationReport`].

use std::io::Write;

use crate::dip::{EvaluationEntry, EvaluationReport, GroupContribution, Scope};
use crate::error::Result;
use crate::features::{IndexSet, WindowConfig};
use crate::ingest::ImpactCategory;

/// Category column order of the published result tables.
pub const TABLE_ORDER: [ImpactCategory; 7] = [
    ImpactCategory::Agriculture,
    ImpactCategory::Water,
    ImpactCategory::Relief,
    ImpactCategory::Plants,
    ImpactCategory::Fire,
    ImpactCategory::Society,
    ImpactCategory::Tourism,
];

fn fmt4(x: f64) -> String {
    format!("{x:.4}")
}

/// Categories appearing in the report, in table order. Tourism is included
/// only when `include_low_support` is set.
pub fn table_categories(report: &EvaluationReport, include_low_support: bool) -> Vec<ImpactCategory> {
    TABLE_ORDER
        .iter()
        .copied()
        .filter(|c| include_low_support || !c.is_low_support())
        .filter(|c| report.entries.iter().any(|e| e.category == *c))
        .collect()
}

/// One row per (scope, index set, window), columns `<category>_0` and
/// `<category>_1` holding class-0 and class-1 F1. Cells without an entry are
/// blank.
pub fn write_table_csv<W: Write>(report: &EvaluationReport, include_low_support: bool, w: W) -> Result<()> {
    let cats = table_categories(report, include_low_support);
    let mut wtr = csv::Writer::from_writer(w);
    let mut header = vec!["scope".to_string(), "index_set".to_string(), "window".to_string()];
    for c in &cats {
        header.push(format!("{c}_0"));
        header.push(format!("{c}_1"));
    }
    wtr.write_record(&header)?;

    let mut rows: Vec<(Scope, IndexSet, WindowConfig)> = Vec::new();
    for e in &report.entries {
        let k = (e.scope, e.index_set, e.window);
        if !rows.contains(&k) {
            rows.push(k);
        }
    }
    for (scope, index_set, window) in rows {
        let mut rec = vec![scope.to_string(), index_set.to_string(), window.to_string()];
        for &c in &cats {
            let entry = report
                .entries
                .iter()
                .find(|e| e.scope == scope && e.index_set == index_set && e.window == window && e.category == c);
            match entry {
                Some(e) => {
                    rec.push(fmt4(e.class0.f1));
                    rec.push(fmt4(e.class1.f1));
                }
                None => {
                    rec.push(String::new());
                    rec.push(String::new());
                }
            }
        }
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Flat JSON array of entries.
pub fn write_entries_json<W: Write>(entries: &[EvaluationEntry], w: W) -> Result<()> {
    serde_json::to_writer_pretty(w, entries)?;
    Ok(())
}

pub fn write_groups_json<W: Write>(groups: &GroupContribution, w: W) -> Result<()> {
    serde_json::to_writer_pretty(w, groups)?;
    Ok(())
}
