//! Lagged, neighbor-expanded feature matrices with explicit missingness.
//!
//! Column layout is a pure function of the [`FeatureLayout`]: for each lag in
//! the window (ascending), the target county comes first and then each
//! neighbor slot in ascending FIPS order; within a source, drought indices
//! precede impact flags. Slots beyond a county's degree are fully masked.

use std::fmt;
use std::io::Write;

use chrono::NaiveDate;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{AdjacencyGraph, Fips, ImpactCategory, Panel, WeeklyCountyRecord};

/// Farthest lag, in weeks, any window reaches back.
pub const END_LAG: u8 = 8;

/// Feature window `a:8`: lags `a` through 8 weeks before the target week.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct WindowConfig {
    start_lag: u8,
}

impl WindowConfig {
    pub fn new(start_lag: u8) -> Result<Self> {
        if !(1..=END_LAG).contains(&start_lag) {
            return Err(Error::Invalid(format!(
                "window start lag {start_lag} outside 1..={END_LAG}"
            )));
        }
        Ok(WindowConfig { start_lag })
    }

    /// All eight windows, 1:8 through 8:8.
    pub fn all() -> Vec<WindowConfig> {
        (1..=END_LAG).map(|a| WindowConfig { start_lag: a }).collect()
    }

    pub fn start_lag(self) -> u8 {
        self.start_lag
    }

    /// Lead time in weeks of a forecast made with this window.
    pub fn lead_weeks(self) -> u8 {
        self.start_lag
    }

    pub fn lag_count(self) -> usize {
        (END_LAG - self.start_lag + 1) as usize
    }

    pub fn lags(self) -> impl Iterator<Item = u8> {
        self.start_lag..=END_LAG
    }
}

impl TryFrom<u8> for WindowConfig {
    type Error = Error;
    fn try_from(a: u8) -> Result<Self> {
        WindowConfig::new(a)
    }
}

impl From<WindowConfig> for u8 {
    fn from(w: WindowConfig) -> u8 {
        w.start_lag
    }
}

impl fmt::Display for WindowConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} : {}", self.start_lag, END_LAG)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DroughtIndex {
    Dsci,
    Esi,
}

impl DroughtIndex {
    pub fn name(self) -> &'static str {
        match self {
            DroughtIndex::Dsci => "dsci",
            DroughtIndex::Esi => "esi",
        }
    }

    fn read(self, rec: &WeeklyCountyRecord) -> Option<f64> {
        match self {
            DroughtIndex::Dsci => Some(rec.dsci),
            DroughtIndex::Esi => rec.esi,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum IndexSet {
    #[serde(rename = "dsci")]
    Dsci,
    #[serde(rename = "esi")]
    Esi,
    #[serde(rename = "dsci+esi")]
    DsciEsi,
}

impl IndexSet {
    pub const ALL: [IndexSet; 3] = [IndexSet::Esi, IndexSet::Dsci, IndexSet::DsciEsi];

    pub fn indices(self) -> &'static [DroughtIndex] {
        match self {
            IndexSet::Dsci => &[DroughtIndex::Dsci],
            IndexSet::Esi => &[DroughtIndex::Esi],
            IndexSet::DsciEsi => &[DroughtIndex::Dsci, DroughtIndex::Esi],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            IndexSet::Dsci => "dsci",
            IndexSet::Esi => "esi",
            IndexSet::DsciEsi => "dsci+esi",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "dsci" => Ok(IndexSet::Dsci),
            "esi" => Ok(IndexSet::Esi),
            "dsci+esi" | "dsci&esi" | "esi+dsci" | "combined" => Ok(IndexSet::DsciEsi),
            other => Err(Error::Invalid(format!("unknown index set {other:?}"))),
        }
    }
}

impl fmt::Display for IndexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The four feature groups used for contribution reporting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FeatureGroup {
    #[serde(rename = "DI")]
    Di,
    #[serde(rename = "IMPs")]
    Imps,
    #[serde(rename = "NEIGH_DI")]
    NeighDi,
    #[serde(rename = "NEIGH_IMPs")]
    NeighImps,
}

impl FeatureGroup {
    pub const ALL: [FeatureGroup; 4] = [
        FeatureGroup::Di,
        FeatureGroup::Imps,
        FeatureGroup::NeighDi,
        FeatureGroup::NeighImps,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FeatureGroup::Di => "DI",
            FeatureGroup::Imps => "IMPs",
            FeatureGroup::NeighDi => "NEIGH_DI",
            FeatureGroup::NeighImps => "NEIGH_IMPs",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Target,
    Neighbor(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variable {
    Index(DroughtIndex),
    Impact(ImpactCategory),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeatureDescriptor {
    pub group: FeatureGroup,
    pub source: Source,
    pub lag: u8,
    pub variable: Variable,
}

impl FeatureDescriptor {
    /// Column name `GROUP.source.lag.variable`, e.g. `NEIGH_DI.n2.3.dsci`.
    pub fn name(&self) -> String {
        let source = match self.source {
            Source::Target => "target".to_string(),
            Source::Neighbor(slot) => format!("n{slot}"),
        };
        let variable = match self.variable {
            Variable::Index(i) => i.name(),
            Variable::Impact(c) => c.short_name(),
        };
        format!("{}.{}.{}.{}", self.group.name(), source, self.lag, variable)
    }
}

/// Which impact categories appear in neighbor columns.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NeighborImpacts {
    #[default]
    AllCategories,
    TargetOnly,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureOptions {
    /// Impact categories used as (lagged) input columns.
    pub impact_categories: Vec<ImpactCategory>,
    pub neighbor_impacts: NeighborImpacts,
    /// Adds the target week itself (lag 0). Leaks same-week conditions and
    /// cannot be used for forecasting.
    pub include_lag0: bool,
}

impl Default for FeatureOptions {
    fn default() -> Self {
        FeatureOptions {
            impact_categories: ImpactCategory::MODELED.to_vec(),
            neighbor_impacts: NeighborImpacts::AllCategories,
            include_lag0: false,
        }
    }
}

/// Everything that determines a feature matrix's columns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureLayout {
    pub category: ImpactCategory,
    pub index_set: IndexSet,
    pub window: WindowConfig,
    pub neighbor_slots: usize,
    pub options: FeatureOptions,
}

impl FeatureLayout {
    pub fn new(
        category: ImpactCategory,
        index_set: IndexSet,
        window: WindowConfig,
        neighbor_slots: usize,
    ) -> Self {
        FeatureLayout {
            category,
            index_set,
            window,
            neighbor_slots,
            options: FeatureOptions::default(),
        }
    }

    pub fn with_options(mut self, options: FeatureOptions) -> Self {
        self.options = options;
        self
    }

    pub fn lags(&self) -> Vec<u8> {
        let mut lags = Vec::with_capacity(self.window.lag_count() + 1);
        if self.options.include_lag0 {
            lags.push(0);
        }
        lags.extend(self.window.lags());
        lags
    }

    fn neighbor_impact_categories(&self) -> Vec<ImpactCategory> {
        match self.options.neighbor_impacts {
            NeighborImpacts::AllCategories => self.options.impact_categories.clone(),
            NeighborImpacts::TargetOnly => vec![self.category],
        }
    }

    pub fn descriptors(&self) -> Vec<FeatureDescriptor> {
        let indices = self.index_set.indices();
        let neigh_cats = self.neighbor_impact_categories();
        let mut out = Vec::new();
        for lag in self.lags() {
            for &idx in indices {
                out.push(FeatureDescriptor {
                    group: FeatureGroup::Di,
                    source: Source::Target,
                    lag,
                    variable: Variable::Index(idx),
                });
            }
            for &cat in &self.options.impact_categories {
                out.push(FeatureDescriptor {
                    group: FeatureGroup::Imps,
                    source: Source::Target,
                    lag,
                    variable: Variable::Impact(cat),
                });
            }
            for slot in 0..self.neighbor_slots {
                for &idx in indices {
                    out.push(FeatureDescriptor {
                        group: FeatureGroup::NeighDi,
                        source: Source::Neighbor(slot),
                        lag,
                        variable: Variable::Index(idx),
                    });
                }
                for &cat in &neigh_cats {
                    out.push(FeatureDescriptor {
                        group: FeatureGroup::NeighImps,
                        source: Source::Neighbor(slot),
                        lag,
                        variable: Variable::Impact(cat),
                    });
                }
            }
        }
        out
    }

    pub fn n_cols(&self) -> usize {
        let per_target = self.index_set.indices().len() + self.options.impact_categories.len();
        let per_slot = self.index_set.indices().len() + self.neighbor_impact_categories().len();
        self.lags().len() * (per_target + self.neighbor_slots * per_slot)
    }

    /// Fills one row for the county at `county_idx` and target week offset
    /// `target` (which may lie past the panel end). `read` supplies records by
    /// (county index, week index) and is only called for weeks inside the
    /// layout's lags. Returns `None` when any lag falls outside `0..n_weeks`.
    pub(crate) fn fill_row<'p>(
        &self,
        panel: &Panel,
        graph: &AdjacencyGraph,
        county_idx: usize,
        target: i64,
        read: &dyn Fn(usize, usize) -> &'p WeeklyCountyRecord,
        values: &mut Vec<f64>,
        mask: &mut Vec<bool>,
    ) -> Option<()> {
        let n_weeks = panel.n_weeks() as i64;
        let lags = self.lags();
        if lags
            .iter()
            .any(|&l| {
                let week = target - i64::from(l);
                week < 0 || week >= n_weeks
            })
        {
            return None;
        }
        let county = panel.counties()[county_idx];
        let neighbors: Vec<Option<usize>> = graph
            .neighbors(county)
            .iter()
            .map(|&n| panel.county_index(n))
            .collect();
        let indices = self.index_set.indices();
        let neigh_cats = self.neighbor_impact_categories();

        let mut push = |v: Option<f64>| {
            values.push(v.unwrap_or(0.0));
            mask.push(v.is_none());
        };
        for lag in lags {
            let week = (target - i64::from(lag)) as usize;
            let rec = read(county_idx, week);
            for &idx in indices {
                push(idx.read(rec));
            }
            for &cat in &self.options.impact_categories {
                push(Some(rec.impacts.get(cat) as u8 as f64));
            }
            for slot in 0..self.neighbor_slots {
                match neighbors.get(slot).copied().flatten() {
                    Some(ni) => {
                        let nrec = read(ni, week);
                        for &idx in indices {
                            push(idx.read(nrec));
                        }
                        for &cat in &neigh_cats {
                            push(Some(nrec.impacts.get(cat) as u8 as f64));
                        }
                    }
                    None => {
                        for _ in 0..indices.len() + neigh_cats.len() {
                            push(None);
                        }
                    }
                }
            }
        }
        Some(())
    }
}

/// Identity of an instance: the county and the target week.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RowKey {
    pub county: Fips,
    pub week: NaiveDate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Origin {
    Observed,
    Synthetic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Partition {
    Unassigned,
    Train,
    Test,
}

/// Row-major instance matrix. A `true` mask entry means the value slot is
/// missing and must not be read.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    n_cols: usize,
    values: Vec<f64>,
    mask: Vec<bool>,
    labels: Vec<u8>,
    keys: Vec<RowKey>,
    origins: Vec<Origin>,
    partitions: Vec<Partition>,
    descriptors: Vec<FeatureDescriptor>,
}

impl FeatureMatrix {
    pub fn empty(descriptors: Vec<FeatureDescriptor>) -> Self {
        FeatureMatrix {
            n_cols: descriptors.len(),
            values: Vec::new(),
            mask: Vec::new(),
            labels: Vec::new(),
            keys: Vec::new(),
            origins: Vec::new(),
            partitions: Vec::new(),
            descriptors,
        }
    }

    /// Builds a matrix from plain rows; `None` cells are missing. Rows get
    /// placeholder keys and descriptors are anonymous target-county DSCI
    /// columns at lag 1.
    pub fn from_rows(rows: &[Vec<Option<f64>>], labels: &[u8]) -> Result<Self> {
        let n_cols = rows.first().map(Vec::len).unwrap_or(0);
        let descriptors = (0..n_cols)
            .map(|_| FeatureDescriptor {
                group: FeatureGroup::Di,
                source: Source::Target,
                lag: 1,
                variable: Variable::Index(DroughtIndex::Dsci),
            })
            .collect();
        let mut m = FeatureMatrix::empty(descriptors);
        if rows.len() != labels.len() {
            return Err(Error::Invalid("rows and labels differ in length".into()));
        }
        let epoch = NaiveDate::from_ymd_opt(1970, 1, 1).expect("valid date");
        for (i, (row, &y)) in rows.iter().zip(labels).enumerate() {
            if row.len() != n_cols {
                return Err(Error::Invalid(format!("row {i} has {} columns, expected {n_cols}", row.len())));
            }
            let values: Vec<f64> = row.iter().map(|v| v.unwrap_or(0.0)).collect();
            let mask: Vec<bool> = row.iter().map(Option::is_none).collect();
            let key = RowKey {
                county: Fips(i as u32),
                week: epoch,
            };
            m.push_row(&values, &mask, y, key, Origin::Observed)?;
        }
        Ok(m)
    }

    pub(crate) fn push_row(
        &mut self,
        values: &[f64],
        mask: &[bool],
        label: u8,
        key: RowKey,
        origin: Origin,
    ) -> Result<()> {
        if values.len() != self.n_cols || mask.len() != self.n_cols {
            return Err(Error::Layout(format!(
                "row has {} values, matrix has {} columns",
                values.len(),
                self.n_cols
            )));
        }
        if label > 1 {
            return Err(Error::Invalid(format!("label {label} is not 0 or 1")));
        }
        self.values.extend_from_slice(values);
        self.mask.extend_from_slice(mask);
        self.labels.push(label);
        self.keys.push(key);
        self.origins.push(origin);
        self.partitions.push(Partition::Unassigned);
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn value(&self, row: usize, col: usize) -> Option<f64> {
        let i = row * self.n_cols + col;
        (!self.mask[i]).then(|| self.values[i])
    }

    pub fn row_values(&self, row: usize) -> &[f64] {
        &self.values[row * self.n_cols..(row + 1) * self.n_cols]
    }

    pub fn row_mask(&self, row: usize) -> &[bool] {
        &self.mask[row * self.n_cols..(row + 1) * self.n_cols]
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn keys(&self) -> &[RowKey] {
        &self.keys
    }

    pub fn origins(&self) -> &[Origin] {
        &self.origins
    }

    pub fn partitions(&self) -> &[Partition] {
        &self.partitions
    }

    pub fn descriptors(&self) -> &[FeatureDescriptor] {
        &self.descriptors
    }

    pub fn class_counts(&self) -> [usize; 2] {
        let ones = self.labels.iter().filter(|&&y| y == 1).count();
        [self.labels.len() - ones, ones]
    }

    pub fn count_missing(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// New matrix holding `rows` in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> FeatureMatrix {
        let mut out = FeatureMatrix::empty(self.descriptors.clone());
        for &r in rows {
            out.values.extend_from_slice(self.row_values(r));
            out.mask.extend_from_slice(self.row_mask(r));
            out.labels.push(self.labels[r]);
            out.keys.push(self.keys[r]);
            out.origins.push(self.origins[r]);
            out.partitions.push(self.partitions[r]);
        }
        out
    }

    pub(crate) fn set_row_partition(&mut self, row: usize, p: Partition) {
        self.partitions[row] = p;
    }

    pub(crate) fn set_partition(&mut self, p: Partition) {
        self.partitions.iter_mut().for_each(|x| *x = p);
    }

    /// Tags every row as training data, e.g. when the whole matrix is the
    /// training fold of a leave-one-out run.
    pub fn into_train(mut self) -> Self {
        self.set_partition(Partition::Train);
        self
    }

    pub fn into_test(mut self) -> Self {
        self.set_partition(Partition::Test);
        self
    }


    /// Writes a CSV with `county, week`, one column per descriptor name and a
    /// final `label`. Missing cells are blank.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = vec!["county".to_string(), "week".to_string()];
        header.extend(self.descriptors.iter().map(FeatureDescriptor::name));
        header.push("label".into());
        wtr.write_record(&header)?;
        for r in 0..self.n_rows() {
            let mut rec = vec![self.keys[r].county.to_string(), self.keys[r].week.to_string()];
            rec.extend((0..self.n_cols).map(|c| {
                self.value(r, c).map(|v| v.to_string()).unwrap_or_default()
            }));
            rec.push(self.labels[r].to_string());
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// JSON manifest describing every column.
    pub fn write_manifest<W: Write>(&self, w: W) -> Result<()> {
        #[derive(Serialize)]
        struct Column<'a> {
            index: usize,
            name: String,
            #[serde(flatten)]
            descriptor: &'a FeatureDescriptor,
        }
        let cols: Vec<Column> = self
            .descriptors
            .iter()
            .enumerate()
            .map(|(index, d)| Column {
                index,
                name: d.name(),
                descriptor: d,
            })
            .collect();
        serde_json::to_writer_pretty(w, &cols)?;
        Ok(())
    }
}

/// Assembles one row per (county, target week) that has a full window of
/// history. Target weeks without eight prior weeks are skipped.
pub fn assemble_features(
    panel: &Panel,
    graph: &AdjacencyGraph,
    layout: &FeatureLayout,
) -> Result<FeatureMatrix> {
    let max_deg = panel
        .counties()
        .iter()
        .map(|&c| graph.degree(c))
        .max()
        .unwrap_or(0);
    if max_deg > layout.neighbor_slots {
        return Err(Error::Layout(format!(
            "a county has {max_deg} neighbors but the layout has {} slots",
            layout.neighbor_slots
        )));
    }
    let mut m = FeatureMatrix::empty(layout.descriptors());
    let read = |c: usize, w: usize| panel.get(c, w);
    let mut values = Vec::with_capacity(m.n_cols());
    let mut mask = Vec::with_capacity(m.n_cols());
    for ci in 0..panel.counties().len() {
        for t in END_LAG as usize..panel.n_weeks() {
            values.clear();
            mask.clear();
            if layout
                .fill_row(panel, graph, ci, t as i64, &read, &mut values, &mut mask)
                .is_none()
            {
                continue;
            }
            let rec = panel.get(ci, t);
            let label = rec.impacts.get(layout.category) as u8;
            let key = RowKey {
                county: rec.county,
                week: rec.week_start,
            };
            m.push_row(&values, &mask, label, key, Origin::Observed)?;
        }
    }
    Ok(m)
}

/// Stratified train/test split. Each class contributes
/// `round(n_class · test_fraction)` rows to the test part, clamped so both
/// parts keep at least one row of a class with two or more rows. A class with
/// fewer than two rows makes the split fall back to plain random sampling.
pub fn split_train_test(
    matrix: &FeatureMatrix,
    test_fraction: f64,
    seed: u64,
) -> Result<(FeatureMatrix, FeatureMatrix)> {
    if matrix.is_empty() {
        return Err(Error::Invalid("cannot split an empty matrix".into()));
    }
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Invalid(format!(
            "test fraction {test_fraction} outside (0, 1)"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = matrix.n_rows();
    let by_class: [Vec<usize>; 2] = [0u8, 1].map(|y| {
        (0..n).filter(|&r| matrix.labels[r] == y).collect()
    });
    let present: Vec<&Vec<usize>> = by_class.iter().filter(|v| !v.is_empty()).collect();
    let stratify = present.len() == 2 && present.iter().all(|v| v.len() >= 2);

    let mut is_test = vec![false; n];
    if stratify {
        for members in &by_class {
            let mut members = members.clone();
            members.shuffle(&mut rng);
            let k = ((members.len() as f64 * test_fraction).round() as usize)
                .clamp(1, members.len() - 1);
            for &r in &members[..k] {
                is_test[r] = true;
            }
        }
    } else {
        if present.len() == 2 {
            log::warn!("a class has fewer than 2 rows; split is not stratified");
        }
        let mut all: Vec<usize> = (0..n).collect();
        all.shuffle(&mut rng);
        let k = ((n as f64 * test_fraction).round() as usize).min(n.saturating_sub(1));
        for &r in &all[..k] {
            is_test[r] = true;
        }
    }
    let train_rows: Vec<usize> = (0..n).filter(|&r| !is_test[r]).collect();
    let test_rows: Vec<usize> = (0..n).filter(|&r| is_test[r]).collect();
    Ok((
        matrix.select_rows(&train_rows).into_train(),
        matrix.select_rows(&test_rows).into_test(),
    ))
}

/// Per-column z-score parameters fit on training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// Standard deviations at or below this (relative to the column scale) are
/// treated as zero.
const ZERO_STD: f64 = 1e-12;

impl Normalizer {
    /// Fits means and population standard deviations over non-missing
    /// entries. Rejects matrices containing rows tagged as test data.
    pub fn fit(train: &FeatureMatrix) -> Result<Self> {
        if train.partitions.iter().any(|&p| p == Partition::Test) {
            return Err(Error::Leakage("normalizer fit on a matrix containing test rows".into()));
        }
        let nc = train.n_cols;
        let mut sum = vec![0.0; nc];
        let mut count = vec![0usize; nc];
        for r in 0..train.n_rows() {
            let (vals, mask) = (train.row_values(r), train.row_mask(r));
            for c in 0..nc {
                if !mask[c] {
                    sum[c] += vals[c];
                    count[c] += 1;
                }
            }
        }
        let mean: Vec<f64> = (0..nc)
            .map(|c| if count[c] > 0 { sum[c] / count[c] as f64 } else { 0.0 })
            .collect();
        let mut ss = vec![0.0; nc];
        for r in 0..train.n_rows() {
            let (vals, mask) = (train.row_values(r), train.row_mask(r));
            for c in 0..nc {
                if !mask[c] {
                    let d = vals[c] - mean[c];
                    ss[c] += d * d;
                }
            }
        }
        let std = (0..nc)
            .map(|c| {
                if count[c] == 0 {
                    return 0.0;
                }
                let s = (ss[c] / count[c] as f64).sqrt();
                if s <= ZERO_STD * mean[c].abs().max(1.0) {
                    0.0
                } else {
                    s
                }
            })
            .collect();
        Ok(Normalizer { mean, std })
    }

    /// z-scores every observed entry; zero-variance columns map to 0. The
    /// mask is unchanged.
    pub fn apply(&self, matrix: &FeatureMatrix) -> Result<FeatureMatrix> {
        if matrix.n_cols != self.mean.len() {
            return Err(Error::Layout(format!(
                "normalizer has {} columns, matrix has {}",
                self.mean.len(),
                matrix.n_cols
            )));
        }
        let mut out = matrix.clone();
        self.apply_in_place(&mut out.values, &out.mask);
        Ok(out)
    }

    pub(crate) fn apply_in_place(&self, values: &mut [f64], mask: &[bool]) {
        let nc = self.mean.len();
        for (i, (v, &m)) in values.iter_mut().zip(mask).enumerate() {
            let c = i % nc;
            if m {
                continue;
            }
            *v = if self.std[c] > 0.0 {
                (*v - self.mean[c]) / self.std[c]
            } else {
                0.0
            };
        }
    }
}

/// Replaces every missing cell with `sentinel` and clears the mask. For
/// external baselines that cannot take missing values.
pub fn impute_sentinel(matrix: &FeatureMatrix, sentinel: f64) -> FeatureMatrix {
    let mut out = matrix.clone();
    for (v, m) in out.values.iter_mut().zip(out.mask.iter_mut()) {
        if *m {
            *v = sentinel;
            *m = false;
        }
    }
    out
}

/// Sentinel conventionally used for missing neighbor data by imputing models.
pub const DEFAULT_SENTINEL: f64 = -999.0;
