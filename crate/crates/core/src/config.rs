//! TOML run configuration.
//!
//! ```toml
//! [data]
//! usdm = "usdm.csv"          # fips, week_start, d0..d4
//! usdm_cumulative = false
//! esi = "esi.csv"            # optional
//! dir = "dir.csv"            # impact reports
//! adjacency = "adjacency.csv"
//! # panel = "panel.csv"      # instead of usdm/esi/dir
//! start = "2005-01-04"       # optional, defaults to the first USDM week
//! end = "2024-12-31"         # optional, defaults to the last USDM week
//! counties = []              # optional, defaults to every USDM county
//!
//! [experiment]
//! categories = ["agriculture", "water", "fire", "plants", "relief", "society", "tourism"]
//! index_sets = ["esi", "dsci", "dsci+esi"]
//! windows = [1, 2, 3, 4, 5, 6, 7, 8]
//! mode = "state_pooled"      # or "leave_one_county_out"
//! seed = 0
//! test_fraction = 0.2
//! threshold = 0.5
//! include_low_support = false
//!
//! [features]
//! neighbor_impacts = "all_categories"
//!
//! [resample]
//! m_neighbors = 10
//! k_neighbors = 5
//! enn_k = 3
//!
//! [gbdt]
//! num_rounds = 100
//! max_depth = 6
//!
//! [forecast]
//! target = "2024-06-03"
//! from = "2024-01-01"
//! to = "2024-07-29"
//! exclude = ["plants"]
//! across_index_sets = false
//! ```
//!
//! Relative paths are resolved against the directory of the config file.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::dip::{Dataset, ExperimentPlan, Mode};
use crate::error::{Error, Result};
use crate::features::{FeatureOptions, IndexSet, WindowConfig};
use crate::gbdt::TrainParams;
use crate::ingest::{build_panel, io, AdjacencyGraph, Fips, ImpactCategory, WeekGrid};
use crate::resample::ResampleParams;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub usdm: Option<PathBuf>,
    pub usdm_cumulative: bool,
    pub esi: Option<PathBuf>,
    pub dir: Option<PathBuf>,
    pub adjacency: Option<PathBuf>,
    pub panel: Option<PathBuf>,
    pub start: Option<NaiveDate>,
    pub end: Option<NaiveDate>,
    pub counties: Vec<Fips>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub categories: Vec<ImpactCategory>,
    pub index_sets: Vec<IndexSet>,
    pub windows: Vec<WindowConfig>,
    pub mode: Mode,
    pub counties: Vec<Fips>,
    pub seed: u64,
    pub test_fraction: f64,
    pub threshold: f64,
    pub include_low_support: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let plan = ExperimentPlan::default();
        ExperimentConfig {
            categories: plan.categories,
            index_sets: plan.index_sets,
            windows: plan.windows,
            mode: plan.mode,
            counties: plan.counties,
            seed: plan.seed,
            test_fraction: plan.test_fraction,
            threshold: plan.threshold,
            include_low_support: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForecastConfig {
    pub target: Option<NaiveDate>,
    pub from: Option<NaiveDate>,
    pub to: Option<NaiveDate>,
    pub exclude: Vec<ImpactCategory>,
    pub across_index_sets: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub data: DataConfig,
    pub experiment: ExperimentConfig,
    pub features: FeatureOptions,
    pub resample: ResampleParams,
    pub gbdt: TrainParams,
    pub forecast: ForecastConfig,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a config file and resolves its relative paths. Also returns the
    /// raw bytes so callers can fingerprint the exact input.
    pub fn load(path: &Path) -> Result<(Self, Vec<u8>)> {
        let bytes = fs::read(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let text = std::str::from_utf8(&bytes)
            .map_err(|_| Error::Config(format!("{} is not UTF-8", path.display())))?;
        let mut cfg = Config::parse(text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.data.resolve(base);
        Ok((cfg, bytes))
    }

    /// The experiment plan, with `seed` overriding the configured one.
    pub fn plan(&self, seed: Option<u64>) -> ExperimentPlan {
        let e = &self.experiment;
        ExperimentPlan {
            categories: e.categories.clone(),
            index_sets: e.index_sets.clone(),
            windows: e.windows.clone(),
            mode: e.mode,
            counties: e.counties.clone(),
            seed: seed.unwrap_or(e.seed),
            test_fraction: e.test_fraction,
            threshold: e.threshold,
            features: self.features.clone(),
            resample: self.resample.clone(),
            train: self.gbdt.clone(),
        }
    }
}

impl DataConfig {
    fn resolve(&mut self, base: &Path) {
        for p in [
            &mut self.usdm,
            &mut self.esi,
            &mut self.dir,
            &mut self.adjacency,
            &mut self.panel,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }

    fn require<'a>(&self, p: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
        p.as_deref()
            .ok_or_else(|| Error::Config(format!("[data] {key} is required")))
    }

    /// Reads every input and builds the panel and adjacency graph.
    pub fn load_dataset(&self) -> Result<Dataset> {
        let adjacency = io::read_adjacency_file(self.require(&self.adjacency, "adjacency")?)?;
        let panel = if let Some(path) = &self.panel {
            io::read_panel_file(path)?
        } else {
            let usdm = io::read_usdm_file(self.require(&self.usdm, "usdm")?, self.usdm_cumulative)?;
            let reports = io::read_dir_file(self.require(&self.dir, "dir")?)?;
            let esi = match &self.esi {
                Some(p) => io::read_esi_file(p)?,
                None => Vec::new(),
            };
            let start = match self.start.or_else(|| usdm.iter().map(|r| r.week_start).min()) {
                Some(d) => d,
                None => return Err(Error::Invalid("USDM input has no rows".into())),
            };
            let end = self
                .end
                .or_else(|| usdm.iter().map(|r| r.week_start).max())
                .unwrap_or(start);
            let grid = WeekGrid::spanning(start, end)?;
            let counties: Vec<Fips> = if self.counties.is_empty() {
                let mut c: Vec<Fips> = usdm.iter().map(|r| r.county).collect();
                c.sort_unstable();
                c.dedup();
                c
            } else {
                self.counties.clone()
            };
            build_panel(&usdm, &esi, &reports, grid, &counties)?
        };
        let graph = AdjacencyGraph::from_edges(&adjacency, panel.counties())?;
        Ok(Dataset::new(panel, graph))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_missing_sections() {
        let cfg = Config::parse("[experiment]\nseed = 7\nwindows = [1, 8]\n").unwrap();
        assert_eq!(cfg.experiment.seed, 7);
        assert_eq!(cfg.experiment.windows.len(), 2);
        assert_eq!(cfg.experiment.categories.len(), 7);
        assert_eq!(cfg.gbdt, TrainParams::default());
        let plan = cfg.plan(Some(3));
        assert_eq!(plan.seed, 3);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_windows() {
        assert!(matches!(Config::parse("[experiment]\nwindow = [1]\n"), Err(Error::Config(_))));
        assert!(Config::parse("[experiment]\nwindows = [0]\n").is_err());
        assert!(Config::parse("[experiment]\nindex_sets = [\"dsci+esi\"]\nmode = \"leave_one_county_out\"\n").is_ok());
    }

    #[test]
    fn paths_resolve_against_config_dir() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        fs::write(&path, "[data]\nusdm = \"in/usdm.csv\"\npanel = \"/abs/panel.csv\"\n").unwrap();
        let (cfg, _) = Config::load(&path).unwrap();
        assert_eq!(cfg.data.usdm.unwrap(), dir.path().join("in/usdm.csv"));
        assert_eq!(cfg.data.panel.unwrap(), PathBuf::from("/abs/panel.csv"));
    }

    #[test]
    fn missing_file_names_path() {
        let err = Config::load(Path::new("/no/such/c.toml")).unwrap_err();
        assert!(err.is_validation());
        assert!(err.to_string().contains("/no/such/c.toml"));
    }
}
