//! The `dip` command line.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use clap::{Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::Config;
use crate::dip::{self, report, Dataset, Mode, SweepOutput, TrainedModel};
use crate::error::{Error, Result};
use crate::features::assemble_features;
use crate::forecast;
use crate::gbdt::gain_importance;
use crate::ingest::{io, ImpactCategory};

#[derive(Debug, Parser)]
#[command(name = "dip", version, about = "Drought impact prediction toolkit")]
pub struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides `experiment.seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Read and validate inputs; write a summary of the panel.
    Ingest,
    /// Write the weekly panel, optionally with feature matrices for the plan.
    PanelExport {
        /// Also write one feature matrix (CSV + manifest) per plan family.
        #[arg(long)]
        features: bool,
    },
    /// Train state-pooled models for every plan family.
    Train,
    /// Run the plan's sweep and write evaluation tables.
    Evaluate,
    /// Group and feature importance of the trained models.
    Importance,
    /// Forecast with every trained model.
    Forecast {
        /// Target week (overrides `forecast.target`).
        #[arg(long)]
        target: Option<NaiveDate>,
        #[arg(long)]
        from: Option<NaiveDate>,
        #[arg(long)]
        to: Option<NaiveDate>,
    },
    /// Range of total predicted impacts across windows.
    ForecastRange {
        #[arg(long)]
        target: Option<NaiveDate>,
        #[arg(long)]
        from: Option<NaiveDate>,
        #[arg(long)]
        to: Option<NaiveDate>,
        /// Take the range across index sets as well as windows.
        #[arg(long)]
        across_index_sets: bool,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Ingest => "ingest",
            Command::PanelExport { .. } => "panel-export",
            Command::Train => "train",
            Command::Evaluate => "evaluate",
            Command::Importance => "importance",
            Command::Forecast { .. } => "forecast",
            Command::ForecastRange { .. } => "forecast-range",
        }
    }
}

/// Parses `args` and runs the command. Returns the process exit code: 0 on
/// success, 1 for usage and validation errors, 2 for runtime failures.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                1
            } else {
                2
            }
        }
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Collects output files and writes them with a manifest at the end.
struct Outputs {
    root: PathBuf,
    files: Vec<(String, String)>,
}

impl Outputs {
    fn new(root: &Path) -> Result<Self> {
        fs::create_dir_all(root)?;
        Ok(Outputs {
            root: root.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn write(&mut self, rel: &str, f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
        let mut buf = Vec::new();
        f(&mut buf)?;
        let path = self.root.join(rel);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        fs::write(&path, &buf)?;
        self.files.push((rel.to_string(), sha256_hex(&buf)));
        log::info!("wrote {}", path.display());
        Ok(())
    }

    fn finish(mut self, command: &str, config_sha256: &str, seed: u64) -> Result<()> {
        #[derive(Serialize)]
        struct OutputFile {
            path: String,
            sha256: String,
        }
        #[derive(Serialize)]
        struct Manifest<'a> {
            tool: &'static str,
            version: &'static str,
            command: &'a str,
            config_sha256: &'a str,
            seed: u64,
            outputs: Vec<OutputFile>,
        }
        self.files.sort();
        let manifest = Manifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command,
            config_sha256,
            seed,
            outputs: self
                .files
                .into_iter()
                .map(|(path, sha256)| OutputFile { path, sha256 })
                .collect(),
        };
        let name = format!("manifest-{command}.json");
        let mut f = BufWriter::new(File::create(self.root.join(&name))?);
        serde_json::to_writer_pretty(&mut f, &manifest)?;
        f.write_all(b"\n")?;
        f.flush()?;
        Ok(())
    }
}

fn json_to<T: Serialize>(value: &T) -> impl FnOnce(&mut Vec<u8>) -> Result<()> + '_ {
    move |buf| {
        serde_json::to_writer_pretty(&mut *buf, value)?;
        buf.push(b'\n');
        Ok(())
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    let config_path = cli
        .config
        .as_deref()
        .ok_or_else(|| Error::Config("--config <FILE> is required".into()))?;
    let (cfg, raw) = Config::load(config_path)?;
    let config_sha = sha256_hex(&raw);
    let plan = cfg.plan(cli.seed);
    plan.validate()?;
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(Error::Config("--jobs must be at least 1".into()));
        }
        // fails only if a pool was already installed, e.g. by an earlier call
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }

    let ds = cfg.data.load_dataset()?;
    let mut out = Outputs::new(&cli.out)?;
    match &cli.command {
        Command::Ingest => ingest(&ds, &mut out)?,
        Command::PanelExport { features } => panel_export(&ds, &plan, *features, &mut out)?,
        Command::Train => {
            let plan = dip::ExperimentPlan {
                mode: Mode::StatePooled,
                ..plan.clone()
            };
            let sweep = dip::sweep(&ds, &plan)?;
            fail_if_all_failed(&sweep)?;
            for (task, model) in &sweep.models {
                out.write(&format!("models/{}.json", task.slug()), |b| model.write_json(b))?;
            }
            let resample: Vec<_> = sweep.report.entries.iter().map(|e| &e.resample).collect();
            out.write("resample.json", json_to(&resample))?;
            out.write("train_failures.json", json_to(&sweep.report.failures))?;
        }
        Command::Evaluate => {
            let sweep = dip::sweep(&ds, &plan)?;
            fail_if_all_failed(&sweep)?;
            let include = cfg.experiment.include_low_support;
            out.write("evaluation.csv", |b| report::write_table_csv(&sweep.report, include, b))?;
            out.write("evaluation.json", |b| report::write_entries_json(&sweep.report.entries, b))?;
            out.write("evaluation_failures.json", json_to(&sweep.report.failures))?;
            let groups: Vec<_> = sweep
                .report
                .entries
                .iter()
                .zip(&sweep.models)
                .map(|(e, (task, _))| GroupRow {
                    model: task.slug(),
                    groups: e.groups,
                })
                .collect();
            out.write("groups.json", json_to(&groups))?;
        }
        Command::Importance => importance(&cli.out, &mut out)?,
        Command::Forecast { target, from, to } => {
            let models = load_models(&cli.out)?;
            let targets = targets(&ds, &cfg, *target, *from, *to)?;
            let mut records = Vec::new();
            for m in &models {
                records.extend(forecast::forecast_weeks(m, &ds.panel, &ds.graph, &targets)?);
            }
            records.sort_by_key(|r| (r.target_week, r.category, r.window, r.county));
            out.write("forecast.csv", |b| forecast::write_forecast_csv(&records, b))?;
            // one series per window keeps the weekly and monthly totals comparable
            let lead: Vec<_> = match records.iter().map(|r| r.window).min() {
                Some(w) => records.iter().filter(|r| r.window == w).cloned().collect(),
                None => Vec::new(),
            };
            let exclude = &cfg.forecast.exclude;
            let weekly = forecast::aggregate_weekly(&lead, Some(&ds.panel), exclude);
            out.write("forecast_weekly.csv", |b| forecast::write_weekly_csv(&weekly, b))?;
            let monthly = forecast::aggregate_monthly(&lead, Some(&ds.panel), exclude);
            out.write("forecast_monthly.csv", |b| forecast::write_monthly_csv(&monthly, b))?;
        }
        Command::ForecastRange {
            target,
            from,
            to,
            across_index_sets,
        } => {
            let models = load_models(&cli.out)?;
            let across = *across_index_sets || cfg.forecast.across_index_sets;
            let mut ranges = Vec::new();
            for t in targets(&ds, &cfg, *target, *from, *to)? {
                ranges.push(forecast::forecast_range(&models, &ds.panel, &ds.graph, t, across)?);
            }
            out.write("forecast_range.csv", |b| forecast::write_range_csv(&ranges, b))?;
        }
    }
    out.finish(cli.command.name(), &config_sha, plan.seed)
}

#[derive(Serialize)]
struct GroupRow {
    model: String,
    groups: dip::GroupContribution,
}

fn fail_if_all_failed(sweep: &SweepOutput) -> Result<()> {
    if sweep.report.entries.is_empty() {
        let first = sweep
            .report
            .failures
            .first()
            .map(|f| format!("{}: {}", f.task, f.error))
            .unwrap_or_default();
        return Err(Error::Train(format!("every task failed; first: {first}")));
    }
    Ok(())
}

fn ingest(ds: &Dataset, out: &mut Outputs) -> Result<()> {
    #[derive(Serialize)]
    struct Summary {
        counties: usize,
        weeks: usize,
        first_week: Option<NaiveDate>,
        last_week: Option<NaiveDate>,
        rows: usize,
        esi_missing: usize,
        edges: usize,
        isolated_counties: usize,
        max_degree: usize,
        positives: BTreeMap<ImpactCategory, usize>,
    }
    let p = &ds.panel;
    let summary = Summary {
        counties: p.counties().len(),
        weeks: p.n_weeks(),
        first_week: (p.n_weeks() > 0).then(|| p.grid().start),
        last_week: p.grid().last(),
        rows: p.len(),
        esi_missing: p.records().iter().filter(|r| r.esi.is_none()).count(),
        edges: ds.graph.edge_count(),
        isolated_counties: p.counties().iter().filter(|&&c| ds.graph.degree(c) == 0).count(),
        max_degree: ds.neighbor_slots(),
        positives: ImpactCategory::ALL.iter().map(|&c| (c, p.positives(c))).collect(),
    };
    out.write("ingest.json", json_to(&summary))
}

fn panel_export(ds: &Dataset, plan: &dip::ExperimentPlan, features: bool, out: &mut Outputs) -> Result<()> {
    out.write("panel.csv", |b| io::write_panel(&ds.panel, b))?;
    if !features {
        return Ok(());
    }
    for &category in &plan.categories {
        for &index_set in &plan.index_sets {
            for &window in &plan.windows {
                let layout = crate::features::FeatureLayout::new(category, index_set, window, ds.neighbor_slots())
                    .with_options(plan.features.clone());
                let m = assemble_features(&ds.panel, &ds.graph, &layout)?;
                let stem = format!(
                    "features/{}_{}_w{}",
                    category,
                    index_set.name().replace('+', "-"),
                    window.start_lag()
                );
                out.write(&format!("{stem}.csv"), |b| m.write_csv(b))?;
                out.write(&format!("{stem}.json"), |b| m.write_manifest(b))?;
            }
        }
    }
    Ok(())
}

fn model_paths(root: &Path) -> Result<Vec<PathBuf>> {
    let dir = root.join("models");
    let entries = fs::read_dir(&dir).map_err(|e| {
        Error::Config(format!("cannot list {}: {e}; run `dip train` first", dir.display()))
    })?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Config(format!("no models in {}", dir.display())));
    }
    Ok(paths)
}

fn load_models(root: &Path) -> Result<Vec<TrainedModel>> {
    model_paths(root)?
        .iter()
        .map(|p| TrainedModel::read_json(BufReader::new(File::open(p)?)))
        .collect()
}

fn importance(root: &Path, out: &mut Outputs) -> Result<()> {
    #[derive(Serialize)]
    struct Row {
        model: String,
        splits: usize,
        groups: dip::GroupContribution,
        top_features: Vec<(String, f64)>,
    }
    let mut rows = Vec::new();
    for path in model_paths(root)? {
        let m = TrainedModel::read_json(BufReader::new(File::open(&path)?))?;
        let gains = gain_importance(&m.ensemble);
        let mut named: Vec<(String, f64)> = m
            .ensemble
            .descriptors
            .iter()
            .map(|d| d.name())
            .zip(gains)
            .filter(|(_, g)| *g > 0.0)
            .collect();
        named.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        named.truncate(20);
        rows.push(Row {
            model: path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default(),
            splits: m.ensemble.n_splits(),
            groups: dip::group_contribution(&m.ensemble),
            top_features: named,
        });
    }
    out.write("importance.json", json_to(&rows))
}

fn targets(
    ds: &Dataset,
    cfg: &Config,
    target: Option<NaiveDate>,
    from: Option<NaiveDate>,
    to: Option<NaiveDate>,
) -> Result<Vec<NaiveDate>> {
    if let Some(t) = target {
        return Ok(vec![t]);
    }
    match (from.or(cfg.forecast.from), to.or(cfg.forecast.to)) {
        (Some(a), Some(b)) => forecast::target_weeks(&ds.panel, a, b),
        (None, None) => cfg
            .forecast
            .target
            .map(|t| vec![t])
            .ok_or_else(|| Error::Config("no forecast target: set --target or [forecast] target".into())),
        _ => Err(Error::Config("forecast ranges need both `from` and `to`".into())),
    }
}
