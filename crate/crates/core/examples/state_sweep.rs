//! State-pooled sweep on a synthetic panel with a planted agriculture rule.
//!
//! Trains one model per window for the planted category and prints the
//! results table, one row per window.
//!
//!     cargo run --release --example state_sweep

use drought_impacts::dip::{report, sweep, ExperimentPlan, Mode};
use drought_impacts::features::{IndexSet, WindowConfig};
use drought_impacts::synthetic::{generate, SyntheticConfig, PLANTED_CATEGORY};

fn main() -> drought_impacts::Result<()> {
    let data = generate(&SyntheticConfig::new(5, 200, 42))?;
    let ds = data.dataset()?;

    let plan = ExperimentPlan {
        categories: vec![PLANTED_CATEGORY],
        index_sets: vec![IndexSet::Dsci],
        windows: WindowConfig::all(),
        mode: Mode::StatePooled,
        seed: 42,
        ..ExperimentPlan::default()
    };
    let out = sweep(&ds, &plan)?;

    for e in &out.report.entries {
        println!(
            "{}  class-1 F1 {:.3}  (P {:.3}, R {:.3}, test rows {}){}",
            e.window,
            e.class1.f1,
            e.class1.precision,
            e.class1.recall,
            e.test_size,
            if e.acceptable { "" } else { "  below 0.50" }
        );
    }
    println!();
    report::write_table_csv(&out.report, false, std::io::stdout())?;
    Ok(())
}
