//! County-level models: each county is predicted by a model that never saw
//! its rows.
//!
//!     cargo run --release --example leave_one_county_out

use drought_impacts::dip::{sweep, ExperimentPlan, Mode};
use drought_impacts::features::{IndexSet, WindowConfig};
use drought_impacts::gbdt::TrainParams;
use drought_impacts::synthetic::{generate, SyntheticConfig, PLANTED_CATEGORY};

fn main() -> drought_impacts::Result<()> {
    let ds = generate(&SyntheticConfig::new(6, 80, 5))?.dataset()?;
    let plan = ExperimentPlan {
        categories: vec![PLANTED_CATEGORY],
        index_sets: vec![IndexSet::Dsci],
        windows: vec![WindowConfig::new(1)?],
        mode: Mode::LeaveOneCountyOut,
        seed: 5,
        train: TrainParams { num_rounds: 30, ..TrainParams::default() },
        ..ExperimentPlan::default()
    };
    let out = sweep(&ds, &plan)?;
    for ((task, audit), e) in out.audits.iter().zip(&out.report.entries) {
        let trained_on: Vec<String> = audit.counties.iter().map(|c| c.to_string()).collect();
        println!(
            "{}: class-1 F1 {:.3} on {} rows; trained on {}",
            task.scope,
            e.class1.f1,
            e.test_size,
            trained_on.join(" ")
        );
    }
    Ok(())
}
