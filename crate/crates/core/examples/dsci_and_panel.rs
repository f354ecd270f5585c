//! From raw drought-monitor areas and impact reports to a weekly panel.
//!
//!     cargo run --example dsci_and_panel

use chrono::NaiveDate;
use drought_impacts::ingest::{
    build_panel, compute_dsci, io, AdjacencyGraph, DroughtCategoryAreas, EsiObservation, Fips,
    ImpactCategory, ImpactReport, UsdmRow, WeekGrid,
};

fn date(s: &str) -> NaiveDate {
    s.parse().expect("valid date")
}

fn main() -> drought_impacts::Result<()> {
    // USDM publishes cumulative percentages (D0 includes D1..D4).
    let cumulative = DroughtCategoryAreas::from_cumulative([100.0, 80.0, 50.0, 20.0, 0.0])?;
    println!("categorical areas {:?} -> DSCI {}", cumulative.values(), compute_dsci(&cumulative));

    let grid = WeekGrid::new(date("2024-04-02"), 4);
    let bernalillo = Fips(35001);
    let sandoval = Fips(35043);
    let mut usdm = Vec::new();
    for (i, week) in grid.weeks().enumerate() {
        for (county, d4) in [(bernalillo, 10.0 * i as f64), (sandoval, 0.0)] {
            usdm.push(UsdmRow {
                county,
                week_start: week,
                areas: DroughtCategoryAreas::new([10.0, 10.0, 10.0, 10.0, d4])?,
            });
        }
    }
    let esi = vec![
        EsiObservation { county: bernalillo, date: date("2024-04-03"), value: -1.0 },
        EsiObservation { county: bernalillo, date: date("2024-04-05"), value: -2.0 },
    ];
    // A report spanning two weeks marks both.
    let reports = vec![ImpactReport::new(
        bernalillo,
        date("2024-04-12"),
        date("2024-04-18"),
        ImpactCategory::Fire,
    )?];

    let panel = build_panel(&usdm, &esi, &reports, grid, &[bernalillo, sandoval])?;
    io::write_panel(&panel, std::io::stdout())?;

    let graph = AdjacencyGraph::from_edges(&[(bernalillo, sandoval)], panel.counties())?;
    println!("\n{} neighbors: {:?}", bernalillo, graph.neighbors(bernalillo));
    Ok(())
}
