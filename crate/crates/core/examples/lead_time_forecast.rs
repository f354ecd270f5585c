//! Lead-time forecasts, forecast ranges and monthly totals.
//!
//! Trains the planted category for every window, forecasts one target week
//! with each model, reports which panel weeks each forecast read, then
//! aggregates a season of one-week-lead forecasts by month.
//!
//!     cargo run --release --example lead_time_forecast

use drought_impacts::dip::{sweep, ExperimentPlan};
use drought_impacts::features::{IndexSet, WindowConfig};
use drought_impacts::forecast::{
    aggregate_monthly, forecast_range, forecast_week_logged, forecast_weeks, target_weeks,
    write_monthly_csv,
};
use drought_impacts::synthetic::{generate, SyntheticConfig, PLANTED_CATEGORY};

fn main() -> drought_impacts::Result<()> {
    let ds = generate(&SyntheticConfig::new(5, 160, 8))?.dataset()?;
    let plan = ExperimentPlan {
        categories: vec![PLANTED_CATEGORY],
        index_sets: vec![IndexSet::Dsci],
        windows: WindowConfig::all(),
        seed: 8,
        ..ExperimentPlan::default()
    };
    let models: Vec<_> = sweep(&ds, &plan)?.models.into_iter().map(|(_, m)| m).collect();

    let grid = ds.panel.grid();
    let target = grid.week(grid.n_weeks - 1) + chrono::Duration::weeks(1);
    println!("target week {target} (one week past the panel)");
    for m in &models {
        match forecast_week_logged(m, &ds.panel, &ds.graph, target) {
            Ok((recs, log)) => {
                let weeks = log.weeks();
                let impacts: u8 = recs.iter().filter_map(|r| r.label).sum();
                println!(
                    "  {}  lead {} wk  reads {}..={}  impacts {}",
                    m.layout.window,
                    m.layout.window.lead_weeks(),
                    weeks.first().unwrap(),
                    weeks.last().unwrap(),
                    impacts
                );
            }
            Err(e) => println!("  {}  {e}", m.layout.window),
        }
    }

    let range = forecast_range(&models, &ds.panel, &ds.graph, target, false)?;
    println!("range {}..={}: {:?}", range.min_total, range.max_total, range.totals_by_label());

    let season = target_weeks(&ds.panel, grid.week(100), grid.week(grid.n_weeks - 1))?;
    let records = forecast_weeks(&models[0], &ds.panel, &ds.graph, &season)?;
    let monthly = aggregate_monthly(&records, Some(&ds.panel), &[]);
    write_monthly_csv(&monthly, std::io::stdout())?;
    Ok(())
}
