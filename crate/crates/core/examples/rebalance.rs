//! Borderline-SMOTE followed by ENN on an imbalanced two-cluster set.
//!
//!     cargo run --release --example rebalance

use drought_impacts::features::FeatureMatrix;
use drought_impacts::resample::{borderline_smote, resample_pipeline, ResampleParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> drought_impacts::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for _ in 0..600 {
        rows.push(vec![Some(rng.gen_range(-2.0..2.0)), Some(rng.gen_range(-2.0..2.0))]);
        labels.push(0);
    }
    for _ in 0..30 {
        // the minority cluster overlaps the majority's edge
        rows.push(vec![Some(rng.gen_range(1.0..3.0)), Some(rng.gen_range(1.0..3.0))]);
        labels.push(1);
    }
    let train = FeatureMatrix::from_rows(&rows, &labels)?.into_train();
    let params = ResampleParams { seed: 3, ..ResampleParams::default() };

    let over = borderline_smote(&train, &params)?;
    println!(
        "borderline samples used: {}; synthetic rows: {}",
        over.borderline,
        over.parents.len()
    );
    if let Some(p) = over.parents.first() {
        println!("first synthetic row: rows {} -> {} at u = {:.3}", p.base, p.partner, p.factor);
    }

    let (_, report) = resample_pipeline(&train, &params, "demo")?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}
