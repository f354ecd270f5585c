//! Gradient boosting with native missing values.
//!
//! The single informative feature is missing for most positive rows, so the
//! trees have to learn where missing values go.
//!
//!     cargo run --release --example boosting

use drought_impacts::dip::f1_per_class;
use drought_impacts::features::FeatureMatrix;
use drought_impacts::gbdt::{fit_traced, gain_importance, TrainParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> drought_impacts::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for _ in 0..500 {
        let y: u8 = rng.gen_bool(0.3).into();
        let informative = if y == 1 && rng.gen_bool(0.9) { None } else { Some(rng.gen_range(0.0..1.0)) };
        rows.push(vec![informative, Some(rng.gen_range(0.0..1.0))]);
        labels.push(y);
    }
    let train = FeatureMatrix::from_rows(&rows, &labels)?.into_train();
    let params = TrainParams { num_rounds: 20, max_depth: 3, ..TrainParams::default() };
    let (model, losses) = fit_traced(&train, &params)?;

    println!("loss: {:.4} -> {:.4} over {} rounds", losses[0], losses[losses.len() - 1], params.num_rounds);
    let pred = model.predict_label(&train, 0.5)?;
    let m = f1_per_class(&pred, train.labels(), 1)?;
    println!("training class-1 F1 {:.3}", m.f1);
    println!("gain importance {:?}", gain_importance(&model));
    println!("first tree: {}", serde_json::to_string(&model.trees[0])?);
    Ok(())
}
