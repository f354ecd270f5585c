//! Lagged, neighbor-expanded feature rows.
//!
//! Builds the feature matrix for one category and window, prints the column
//! names of the first lag and exports the matrix as CSV plus a JSON
//! descriptor manifest.
//!
//!     cargo run --example feature_matrix -- [out_dir]

use std::fs::File;
use std::path::PathBuf;

use drought_impacts::features::{assemble_features, FeatureLayout, IndexSet, WindowConfig};
use drought_impacts::ingest::ImpactCategory;
use drought_impacts::synthetic::{generate, SyntheticConfig};

fn main() -> drought_impacts::Result<()> {
    let out: PathBuf = std::env::args().nth(1).unwrap_or_else(|| "target/feature_matrix".into()).into();
    std::fs::create_dir_all(&out)?;

    let ds = generate(&SyntheticConfig::new(4, 30, 1))?.dataset()?;
    let layout = FeatureLayout::new(
        ImpactCategory::Fire,
        IndexSet::DsciEsi,
        WindowConfig::new(6)?,
        ds.neighbor_slots(),
    );
    let m = assemble_features(&ds.panel, &ds.graph, &layout)?;

    println!("window {} with {} neighbor slots", layout.window, layout.neighbor_slots);
    println!("{} rows x {} columns, {} missing cells", m.n_rows(), m.n_cols(), m.count_missing());
    let per_lag = m.n_cols() / layout.window.lag_count();
    for d in &m.descriptors()[..per_lag] {
        println!("  {}", d.name());
    }

    m.write_csv(File::create(out.join("fire_dsci-esi_w6.csv"))?)?;
    m.write_manifest(File::create(out.join("fire_dsci-esi_w6.json"))?)?;
    println!("wrote {}", out.display());
    Ok(())
}
