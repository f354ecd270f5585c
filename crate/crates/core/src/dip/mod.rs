//! Experiment orchestration: per-task training pipelines, evaluation and the
//! category × index set × window sweep.
//!
//! A task trains one model for one impact category, index set and window. In
//! state-pooled mode the rows of all counties are pooled and split 80/20; in
//! leave-one-county-out mode each county is held out in turn and the model is
//! trained on the remaining counties. Either way the pipeline is
//! assemble → split → normalize (fit on train) → resample train → fit →
//! evaluate on the untouched held-out rows.

mod metrics;
pub mod report;

use std::collections::BTreeSet;
use std::fmt;
use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{
    assemble_features, split_train_test, FeatureGroup, FeatureLayout, FeatureMatrix,
    FeatureOptions, IndexSet, Normalizer, Origin, Partition, WindowConfig,
};
use crate::gbdt::{self, gain_importance, BoostedEnsemble, TrainParams};
use crate::ingest::{AdjacencyGraph, Fips, ImpactCategory, Panel};
use crate::resample::{resample_pipeline, ResampleParams, ResampleReport};

pub use metrics::{f1_per_class, ClassMetrics, ConfusionCounts};

/// Class-1 F1 below this is considered an unusable model.
pub const ACCEPTABLE_F1: f64 = 0.50;

/// Panel plus adjacency, shared read-only by every task.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub panel: Panel,
    pub graph: AdjacencyGraph,
}

impl Dataset {
    pub fn new(panel: Panel, graph: AdjacencyGraph) -> Self {
        Dataset { panel, graph }
    }

    /// Neighbor slots needed for this panel: its counties' maximum degree.
    pub fn neighbor_slots(&self) -> usize {
        self.panel
            .counties()
            .iter()
            .map(|&c| self.graph.degree(c))
            .max()
            .unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    StatePooled,
    LeaveOneCountyOut,
}

/// Evaluation scope of a report entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    State,
    County(Fips),
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scope::State => f.write_str("state"),
            Scope::County(c) => write!(f, "{c}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentPlan {
    pub categories: Vec<ImpactCategory>,
    pub index_sets: Vec<IndexSet>,
    pub windows: Vec<WindowConfig>,
    pub mode: Mode,
    /// Held-out counties for leave-one-county-out; all panel counties if
    /// empty.
    pub counties: Vec<Fips>,
    pub seed: u64,
    pub test_fraction: f64,
    pub threshold: f64,
    pub features: FeatureOptions,
    pub resample: ResampleParams,
    pub train: TrainParams,
}

impl Default for ExperimentPlan {
    fn default() -> Self {
        ExperimentPlan {
            categories: ImpactCategory::MODELED.to_vec(),
            index_sets: IndexSet::ALL.to_vec(),
            windows: WindowConfig::all(),
            mode: Mode::StatePooled,
            counties: Vec::new(),
            seed: 0,
            test_fraction: 0.2,
            threshold: 0.5,
            features: FeatureOptions::default(),
            resample: ResampleParams::default(),
            train: TrainParams::default(),
        }
    }
}

/// One unit of work in a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Task {
    pub category: ImpactCategory,
    pub index_set: IndexSet,
    pub window: WindowConfig,
    pub scope: Scope,
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}/{}/{}-8/{}",
            self.category,
            self.index_set,
            self.window.start_lag(),
            self.scope
        )
    }
}

impl Task {
    /// File-name friendly identifier.
    pub fn slug(&self) -> String {
        format!(
            "{}_{}_w{}_{}",
            self.category,
            self.index_set.name().replace('+', "-"),
            self.window.start_lag(),
            self.scope
        )
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for a task, a pure function of the global seed and the task identity.
pub fn task_seed(global: u64, task: &Task) -> u64 {
    let county = match task.scope {
        Scope::State => u64::MAX,
        Scope::County(c) => c.0 as u64,
    };
    [
        task.category.index() as u64,
        task.index_set as u64,
        task.window.start_lag() as u64,
        county,
    ]
    .iter()
    .fold(splitmix64(global), |acc, &v| splitmix64(acc ^ v))
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<()> {
        if self.categories.is_empty() || self.index_sets.is_empty() || self.windows.is_empty() {
            return Err(Error::Config(
                "plan needs at least one category, index set and window".into(),
            ));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::Config(format!(
                "test_fraction {} outside (0, 1)",
                self.test_fraction
            )));
        }
        self.resample.validate()?;
        self.train.validate()?;
        Ok(())
    }

    fn layout(&self, ds: &Dataset, category: ImpactCategory, index_set: IndexSet, window: WindowConfig) -> FeatureLayout {
        FeatureLayout::new(category, index_set, window, ds.neighbor_slots())
            .with_options(self.features.clone())
    }

    /// Task families (category, index set, window) in plan order.
    fn families(&self) -> Vec<(ImpactCategory, IndexSet, WindowConfig)> {
        let mut out = Vec::new();
        for &c in &self.categories {
            for &i in &self.index_sets {
                for &w in &self.windows {
                    out.push((c, i, w));
                }
            }
        }
        out
    }

    fn held_out(&self, ds: &Dataset) -> Vec<Fips> {
        if self.counties.is_empty() {
            ds.panel.counties().to_vec()
        } else {
            self.counties.clone()
        }
    }

    /// Every task of the plan, in report order.
    pub fn tasks(&self, ds: &Dataset) -> Vec<Task> {
        let scopes: Vec<Scope> = match self.mode {
            Mode::StatePooled => vec![Scope::State],
            Mode::LeaveOneCountyOut => self.held_out(ds).into_iter().map(Scope::County).collect(),
        };
        self.families()
            .into_iter()
            .flat_map(|(category, index_set, window)| {
                scopes.iter().map(move |&scope| Task {
                    category,
                    index_set,
                    window,
                    scope,
                })
            })
            .collect()
    }
}

/// Everything needed to score new rows: column layout, the normalizer fit on
/// training rows, the ensemble and the label threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub layout: FeatureLayout,
    pub normalizer: Normalizer,
    pub ensemble: BoostedEnsemble,
    pub threshold: f64,
}

impl TrainedModel {
    pub fn to_json(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        self.write_json(&mut buf)?;
        Ok(buf)
    }

    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer(w, self)?;
        Ok(())
    }

    pub fn read_json<R: Read>(r: R) -> Result<Self> {
        let m: TrainedModel = serde_json::from_reader(r)?;
        let expected = m.layout.descriptors();
        if m.ensemble.descriptors != expected || m.normalizer.mean.len() != expected.len() {
            return Err(Error::Layout("model file's layout, normalizer and ensemble disagree".into()));
        }
        Ok(m)
    }

    /// Normalizes `raw` (un-normalized features) and predicts labels.
    pub fn predict_raw(&self, raw: &FeatureMatrix) -> Result<Vec<u8>> {
        let z = self.normalizer.apply(raw)?;
        self.ensemble.predict_label(&z, self.threshold)
    }
}

/// Share of gain importance per feature group.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct GroupContribution {
    #[serde(rename = "DI")]
    pub di: f64,
    #[serde(rename = "IMPs")]
    pub imps: f64,
    #[serde(rename = "NEIGH_DI")]
    pub neigh_di: f64,
    #[serde(rename = "NEIGH_IMPs")]
    pub neigh_imps: f64,
}

impl GroupContribution {
    pub fn get(&self, g: FeatureGroup) -> f64 {
        match g {
            FeatureGroup::Di => self.di,
            FeatureGroup::Imps => self.imps,
            FeatureGroup::NeighDi => self.neigh_di,
            FeatureGroup::NeighImps => self.neigh_imps,
        }
    }

    fn slot(&mut self, g: FeatureGroup) -> &mut f64 {
        match g {
            FeatureGroup::Di => &mut self.di,
            FeatureGroup::Imps => &mut self.imps,
            FeatureGroup::NeighDi => &mut self.neigh_di,
            FeatureGroup::NeighImps => &mut self.neigh_imps,
        }
    }

    pub fn sum(&self) -> f64 {
        self.di + self.imps + self.neigh_di + self.neigh_imps
    }
}

/// Gain importance summed within each feature group and renormalized.
pub fn group_contribution(ensemble: &BoostedEnsemble) -> GroupContribution {
    let importance = gain_importance(ensemble);
    let mut out = GroupContribution::default();
    for (d, v) in ensemble.descriptors.iter().zip(&importance) {
        *out.slot(d.group) += v;
    }
    let total = out.sum();
    if total > 0.0 {
        for g in FeatureGroup::ALL {
            *out.slot(g) /= total;
        }
    } else {
        log::warn!("ensemble has no splits; group contribution is all zero");
    }
    out
}

/// Counties whose rows ended up in a training matrix, recorded right before
/// fitting.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingAudit {
    pub counties: BTreeSet<Fips>,
    pub rows: usize,
    pub synthetic_rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationEntry {
    pub category: ImpactCategory,
    pub index_set: IndexSet,
    pub window: WindowConfig,
    pub mode: Mode,
    pub scope: Scope,
    pub class0: ClassMetrics,
    pub class1: ClassMetrics,
    /// Training rows after resampling.
    pub train_size: usize,
    pub test_size: usize,
    pub resample: ResampleReport,
    pub groups: GroupContribution,
    /// Class-1 F1 reaches [`ACCEPTABLE_F1`].
    pub acceptable: bool,
}

#[derive(Debug, Clone)]
pub struct TaskOutcome {
    pub task: Task,
    pub entry: EvaluationEntry,
    pub model: TrainedModel,
    pub audit: TrainingAudit,
}

fn audit(train: &FeatureMatrix) -> TrainingAudit {
    TrainingAudit {
        counties: train.keys().iter().map(|k| k.county).collect(),
        rows: train.n_rows(),
        synthetic_rows: train.origins().iter().filter(|&&o| o == Origin::Synthetic).count(),
    }
}

/// Fails unless every row of `test` is an observed, test-tagged row.
fn check_test_rows(test: &FeatureMatrix) -> Result<()> {
    let bad = test
        .origins()
        .iter()
        .zip(test.partitions())
        .filter(|&(&o, &p)| o != Origin::Observed || p != Partition::Test)
        .count();
    if bad > 0 {
        return Err(Error::Leakage(format!(
            "{bad} evaluation rows are synthetic or not tagged as test data"
        )));
    }
    Ok(())
}

/// Fails if any training row belongs to `county`.
pub fn check_county_excluded(train: &FeatureMatrix, county: Fips) -> Result<()> {
    let n = train.keys().iter().filter(|k| k.county == county).count();
    if n > 0 {
        return Err(Error::Leakage(format!(
            "{n} training rows belong to held-out county {county}"
        )));
    }
    Ok(())
}

/// Normalize, resample, fit and evaluate one prepared train/test pair.
fn train_and_evaluate(
    plan: &ExperimentPlan,
    task: Task,
    mode: Mode,
    layout: FeatureLayout,
    train: FeatureMatrix,
    test: FeatureMatrix,
) -> Result<TaskOutcome> {
    let seed = task_seed(plan.seed, &task);
    let normalizer = Normalizer::fit(&train)?;
    let train_z = normalizer.apply(&train)?;
    let test_z = normalizer.apply(&test)?;

    let resample_params = ResampleParams {
        seed,
        ..plan.resample.clone()
    };
    let (balanced, resample_report) =
        resample_pipeline(&train_z, &resample_params, task.category.short_name())?;
    if let Scope::County(c) = task.scope {
        check_county_excluded(&balanced, c)?;
    }
    let train_audit = audit(&balanced);

    let train_params = TrainParams {
        seed,
        ..plan.train.clone()
    };
    let ensemble = gbdt::fit(&balanced, &train_params)?;

    check_test_rows(&test_z)?;
    let pred = ensemble.predict_label(&test_z, plan.threshold)?;
    let class1 = f1_per_class(&pred, test_z.labels(), 1)?;
    let class0 = f1_per_class(&pred, test_z.labels(), 0)?;
    let groups = group_contribution(&ensemble);

    let entry = EvaluationEntry {
        category: task.category,
        index_set: task.index_set,
        window: task.window,
        mode,
        scope: task.scope,
        class0,
        class1,
        train_size: balanced.n_rows(),
        test_size: test_z.n_rows(),
        resample: resample_report,
        groups,
        acceptable: class1.f1 >= ACCEPTABLE_F1,
    };
    Ok(TaskOutcome {
        task,
        entry,
        model: TrainedModel {
            layout,
            normalizer,
            ensemble,
            threshold: plan.threshold,
        },
        audit: train_audit,
    })
}

fn state_pooled_on(
    plan: &ExperimentPlan,
    task: Task,
    layout: FeatureLayout,
    matrix: &FeatureMatrix,
) -> Result<TaskOutcome> {
    let seed = task_seed(plan.seed, &task);
    let (train, test) = split_train_test(matrix, plan.test_fraction, seed)?;
    train_and_evaluate(plan, task, Mode::StatePooled, layout, train, test)
}

fn loco_on(
    plan: &ExperimentPlan,
    task: Task,
    layout: FeatureLayout,
    matrix: &FeatureMatrix,
    target: Fips,
) -> Result<TaskOutcome> {
    let keys = matrix.keys();
    let train_rows: Vec<usize> = (0..matrix.n_rows()).filter(|&r| keys[r].county != target).collect();
    let test_rows: Vec<usize> = (0..matrix.n_rows()).filter(|&r| keys[r].county == target).collect();
    if test_rows.is_empty() {
        return Err(Error::Invalid(format!("county {target} has no rows to evaluate")));
    }
    let train = matrix.select_rows(&train_rows).into_train();
    check_county_excluded(&train, target)?;
    let test = matrix.select_rows(&test_rows).into_test();
    train_and_evaluate(plan, task, Mode::LeaveOneCountyOut, layout, train, test)
}

/// State-pooled run of one (category, index set, window).
pub fn run_state_pooled(
    ds: &Dataset,
    plan: &ExperimentPlan,
    category: ImpactCategory,
    index_set: IndexSet,
    window: WindowConfig,
) -> Result<TaskOutcome> {
    let task = Task {
        category,
        index_set,
        window,
        scope: Scope::State,
    };
    let layout = plan.layout(ds, category, index_set, window);
    let matrix = assemble_features(&ds.panel, &ds.graph, &layout)?;
    state_pooled_on(plan, task, layout, &matrix).map_err(|e| e.in_task(task.to_string()))
}

/// Leave-one-county-out run holding out `target`.
pub fn run_leave_one_county_out(
    ds: &Dataset,
    plan: &ExperimentPlan,
    category: ImpactCategory,
    index_set: IndexSet,
    window: WindowConfig,
    target: Fips,
) -> Result<TaskOutcome> {
    if ds.panel.county_index(target).is_none() {
        return Err(Error::UnknownCounty(target));
    }
    let task = Task {
        category,
        index_set,
        window,
        scope: Scope::County(target),
    };
    let layout = plan.layout(ds, category, index_set, window);
    let matrix = assemble_features(&ds.panel, &ds.graph, &layout)?;
    loco_on(plan, task, layout, &matrix, target).map_err(|e| e.in_task(task.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskFailure {
    pub task: Task,
    pub error: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub entries: Vec<EvaluationEntry>,
    pub failures: Vec<TaskFailure>,
}

#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub report: EvaluationReport,
    /// Successful models in report order.
    pub models: Vec<(Task, TrainedModel)>,
    pub audits: Vec<(Task, TrainingAudit)>,
}

/// Runs every task of the plan. Tasks run in parallel; results are merged in
/// task order, so output does not depend on scheduling. A failing task is
/// recorded and the rest still run.
pub fn sweep(ds: &Dataset, plan: &ExperimentPlan) -> Result<SweepOutput> {
    plan.validate()?;
    if plan.mode == Mode::LeaveOneCountyOut {
        for c in plan.held_out(ds) {
            if ds.panel.county_index(c).is_none() {
                return Err(Error::UnknownCounty(c));
            }
        }
    }
    let tasks = plan.tasks(ds);
    let families = plan.families();
    let per_family = tasks.len() / families.len();

    let results: Vec<Vec<(Task, Result<TaskOutcome>)>> = families
        .par_iter()
        .enumerate()
        .map(|(fi, &(category, index_set, window))| {
            let family_tasks = &tasks[fi * per_family..(fi + 1) * per_family];
            let layout = plan.layout(ds, category, index_set, window);
            let matrix = match assemble_features(&ds.panel, &ds.graph, &layout) {
                Ok(m) => m,
                Err(e) => {
                    let msg = e.to_string();
                    return family_tasks
                        .iter()
                        .map(|&t| (t, Err(Error::Invalid(msg.clone()))))
                        .collect();
                }
            };
            family_tasks
                .par_iter()
                .map(|&task| {
                    let out = match task.scope {
                        Scope::State => state_pooled_on(plan, task, layout.clone(), &matrix),
                        Scope::County(c) => loco_on(plan, task, layout.clone(), &matrix, c),
                    };
                    (task, out)
                })
                .collect()
        })
        .collect();

    let mut output = SweepOutput {
        report: EvaluationReport::default(),
        models: Vec::new(),
        audits: Vec::new(),
    };
    for (task, res) in results.into_iter().flatten() {
        match res {
            Ok(o) => {
                output.report.entries.push(o.entry);
                output.models.push((task, o.model));
                output.audits.push((task, o.audit));
            }
            Err(e) => {
                log::warn!("task {task} failed: {e}");
                output.report.failures.push(TaskFailure {
                    task,
                    error: e.to_string(),
                });
            }
        }
    }
    Ok(output)
}
