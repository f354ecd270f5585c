//! Training-set rebalancing: Borderline-SMOTE oversampling of the minority
//! class followed by Edited Nearest Neighbours cleaning of the majority class.
//!
//! Neighbor searches are exact and use [`masked_distance`], so structurally
//! missing neighbor slots neither count as zero nor bias toward rows with many
//! gaps. Ties in neighbor ranking go to the lower row index.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureMatrix, Origin, Partition};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceMode {
    /// Euclidean over jointly observed dimensions, rescaled to full width.
    Masked,
    /// Missing cells take this value and count as observed.
    Sentinel(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ResampleParams {
    /// Neighborhood size for the danger test.
    pub m_neighbors: usize,
    /// Minority neighbors considered as interpolation partners.
    pub k_neighbors: usize,
    pub enn_k: usize,
    pub distance: DistanceMode,
    pub seed: u64,
}

impl Default for ResampleParams {
    fn default() -> Self {
        ResampleParams {
            m_neighbors: 10,
            k_neighbors: 5,
            enn_k: 3,
            distance: DistanceMode::Masked,
            seed: 0,
        }
    }
}

impl ResampleParams {
    pub fn validate(&self) -> Result<()> {
        if self.k_neighbors < 1 || self.m_neighbors < self.k_neighbors {
            return Err(Error::Invalid(format!(
                "need m_neighbors >= k_neighbors >= 1, got m={} k={}",
                self.m_neighbors, self.k_neighbors
            )));
        }
        if self.enn_k % 2 == 0 {
            return Err(Error::Invalid(format!("enn_k must be odd, got {}", self.enn_k)));
        }
        Ok(())
    }
}

/// Euclidean distance over the dimensions observed in both rows, scaled by
/// `sqrt(D / D_obs)`. Infinite when the rows share no observed dimension.
pub fn masked_distance(x: &[f64], x_mask: &[bool], y: &[f64], y_mask: &[bool]) -> f64 {
    let mut sum = 0.0;
    let mut shared = 0usize;
    for i in 0..x.len() {
        if !x_mask[i] && !y_mask[i] {
            let d = x[i] - y[i];
            sum += d * d;
            shared += 1;
        }
    }
    if shared == 0 {
        return f64::INFINITY;
    }
    (sum * x.len() as f64 / shared as f64).sqrt()
}

/// Distance oracle over one matrix, honoring the configured mode.
struct Metric<'a> {
    matrix: &'a FeatureMatrix,
    imputed: Option<FeatureMatrix>,
}

impl<'a> Metric<'a> {
    fn new(matrix: &'a FeatureMatrix, mode: DistanceMode) -> Self {
        let imputed = match mode {
            DistanceMode::Masked => None,
            DistanceMode::Sentinel(s) => Some(crate::features::impute_sentinel(matrix, s)),
        };
        Metric { matrix, imputed }
    }

    fn dist(&self, a: usize, b: usize) -> f64 {
        let m = self.imputed.as_ref().unwrap_or(self.matrix);
        masked_distance(m.row_values(a), m.row_mask(a), m.row_values(b), m.row_mask(b))
    }

    /// The `k` rows of `candidates` nearest to `query` (never `query` itself),
    /// ordered by (distance, row index).
    fn nearest(&self, query: usize, candidates: &[usize], k: usize) -> Vec<usize> {
        let mut scored: Vec<(f64, usize)> = candidates
            .iter()
            .filter(|&&c| c != query)
            .map(|&c| (self.dist(query, c), c))
            .collect();
        let by_rank = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < scored.len() {
            scored.select_nth_unstable_by(k, by_rank);
            scored.truncate(k);
        }
        scored.sort_by(by_rank);
        scored.into_iter().map(|(_, i)| i).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DangerLabel {
    Safe,
    Danger,
    Noise,
}

/// Danger rule for a minority sample with `majority` of its `m` nearest
/// neighbors in the majority class.
pub fn danger_rule(majority: usize, m: usize) -> DangerLabel {
    if majority == m {
        DangerLabel::Noise
    } else if 2 * majority >= m {
        DangerLabel::Danger
    } else {
        DangerLabel::Safe
    }
}

fn minority_class(matrix: &FeatureMatrix) -> Result<Option<u8>> {
    let [zeros, ones] = matrix.class_counts();
    if zeros == 0 || ones == 0 {
        return Err(Error::Resample(format!(
            "need both classes present, got {zeros} zeros and {ones} ones"
        )));
    }
    Ok(match zeros.cmp(&ones) {
        std::cmp::Ordering::Less => Some(0),
        std::cmp::Ordering::Greater => Some(1),
        std::cmp::Ordering::Equal => None,
    })
}

/// Labels every row of class `minority` as SAFE, DANGER or NOISE from its
/// `m_neighbors` nearest neighbors among all rows. Returns `(row, label)`
/// pairs in row order.
pub fn classify_danger(
    matrix: &FeatureMatrix,
    params: &ResampleParams,
    minority: u8,
) -> Result<Vec<(usize, DangerLabel)>> {
    params.validate()?;
    let labels = matrix.labels();
    let minority_rows: Vec<usize> = (0..matrix.n_rows()).filter(|&r| labels[r] == minority).collect();
    if minority_rows.is_empty() {
        return Err(Error::Resample("minority class is empty".into()));
    }
    let metric = Metric::new(matrix, params.distance);
    let all: Vec<usize> = (0..matrix.n_rows()).collect();
    let m = params.m_neighbors.min(matrix.n_rows() - 1);
    Ok(minority_rows
        .par_iter()
        .map(|&r| {
            let nn = metric.nearest(r, &all, m);
            let majority = nn.iter().filter(|&&j| labels[j] != minority).count();
            (r, danger_rule(majority, m))
        })
        .collect())
}

/// Parents and interpolation factor of one synthetic row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticParents {
    pub base: usize,
    pub partner: usize,
    pub factor: f64,
}

#[derive(Debug, Clone)]
pub struct Oversampled {
    pub matrix: FeatureMatrix,
    /// Parallel to the appended synthetic rows.
    pub parents: Vec<SyntheticParents>,
    /// False when no DANGER sample existed and all minority rows were used.
    pub borderline: bool,
}

/// Borderline-SMOTE (variant 1). Appends synthetic minority rows until both
/// classes have equal counts. Parents cycle through DANGER samples in row
/// order; each synthetic row interpolates toward a random one of the parent's
/// `k_neighbors` nearest minority rows. A cell is missing in the synthetic row
/// iff it is missing in either parent. Without DANGER samples every minority
/// row serves as a parent (plain SMOTE).
pub fn borderline_smote(matrix: &FeatureMatrix, params: &ResampleParams) -> Result<Oversampled> {
    params.validate()?;
    let Some(minority) = minority_class(matrix)? else {
        return Ok(Oversampled {
            matrix: matrix.clone(),
            parents: Vec::new(),
            borderline: true,
        });
    };
    let labels = matrix.labels();
    let minority_rows: Vec<usize> = (0..matrix.n_rows()).filter(|&r| labels[r] == minority).collect();
    if minority_rows.len() < 2 {
        return Err(Error::Resample(format!(
            "only {} minority row; interpolation needs at least 2",
            minority_rows.len()
        )));
    }
    let [zeros, ones] = matrix.class_counts();
    let n_new = zeros.max(ones) - zeros.min(ones);

    let danger: Vec<usize> = classify_danger(matrix, params, minority)?
        .into_iter()
        .filter(|&(_, l)| l == DangerLabel::Danger)
        .map(|(r, _)| r)
        .collect();
    let borderline = !danger.is_empty();
    let bases = if borderline { danger } else { minority_rows.clone() };
    if !borderline {
        log::warn!("no DANGER samples; oversampling from all minority rows");
    }

    let metric = Metric::new(matrix, params.distance);
    let k = params.k_neighbors.min(minority_rows.len() - 1);
    let partners: Vec<Vec<usize>> = bases
        .par_iter()
        .map(|&b| metric.nearest(b, &minority_rows, k))
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut out = matrix.clone();
    let mut parents = Vec::with_capacity(n_new);
    let mut values = vec![0.0; matrix.n_cols()];
    let mut mask = vec![false; matrix.n_cols()];
    for i in 0..n_new {
        let slot = i % bases.len();
        let p = bases[slot];
        let q = partners[slot][rng.gen_range(0..partners[slot].len())];
        let u: f64 = rng.gen();
        let (pv, pm) = (matrix.row_values(p), matrix.row_mask(p));
        let (qv, qm) = (matrix.row_values(q), matrix.row_mask(q));
        for c in 0..values.len() {
            mask[c] = pm[c] || qm[c];
            values[c] = if mask[c] { 0.0 } else { pv[c] + u * (qv[c] - pv[c]) };
        }
        out.push_row(&values, &mask, minority, matrix.keys()[p], Origin::Synthetic)?;
        parents.push(SyntheticParents {
            base: p,
            partner: q,
            factor: u,
        });
    }
    let n = out.n_rows();
    let mut out_rows = out;
    // synthetic rows inherit the partition of the training set
    if let Some(&part) = matrix.partitions().first() {
        for r in matrix.n_rows()..n {
            out_rows.set_row_partition(r, part);
        }
    }
    Ok(Oversampled {
        matrix: out_rows,
        parents,
        borderline,
    })
}

/// Rows of class `clean_class` whose `enn_k` nearest neighbors (excluding
/// themselves) vote for the other class. All votes are computed against the
/// unmodified matrix.
pub fn enn_removals(
    matrix: &FeatureMatrix,
    params: &ResampleParams,
    clean_class: u8,
) -> Result<Vec<usize>> {
    params.validate()?;
    let n = matrix.n_rows();
    if n < 2 {
        return Ok(Vec::new());
    }
    let labels = matrix.labels();
    let metric = Metric::new(matrix, params.distance);
    let all: Vec<usize> = (0..n).collect();
    let k = params.enn_k.min(n - 1);
    let candidates: Vec<usize> = (0..n).filter(|&r| labels[r] == clean_class).collect();
    let flags: Vec<bool> = candidates
        .par_iter()
        .map(|&r| {
            let agree = metric
                .nearest(r, &all, k)
                .iter()
                .filter(|&&j| labels[j] == clean_class)
                .count();
            2 * agree < k
        })
        .collect();
    Ok(candidates
        .into_iter()
        .zip(flags)
        .filter(|&(_, drop)| drop)
        .map(|(r, _)| r)
        .collect())
}

/// Edited Nearest Neighbours restricted to `clean_class` rows; other rows are
/// never removed. Row order is preserved.
pub fn enn_clean(
    matrix: &FeatureMatrix,
    params: &ResampleParams,
    clean_class: u8,
) -> Result<FeatureMatrix> {
    let removed = enn_removals(matrix, params, clean_class)?;
    let mut drop = vec![false; matrix.n_rows()];
    for r in removed {
        drop[r] = true;
    }
    let keep: Vec<usize> = (0..matrix.n_rows()).filter(|&r| !drop[r]).collect();
    Ok(matrix.select_rows(&keep))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    #[serde(rename = "0")]
    pub zero: usize,
    #[serde(rename = "1")]
    pub one: usize,
}

impl From<[usize; 2]> for ClassCounts {
    fn from([zero, one]: [usize; 2]) -> Self {
        ClassCounts { zero, one }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResampleReport {
    pub category: String,
    pub original: ClassCounts,
    pub post_smote: ClassCounts,
    pub post_enn: ClassCounts,
}

/// Borderline-SMOTE then ENN on the original majority class. Only training
/// rows are accepted.
pub fn resample_pipeline(
    train: &FeatureMatrix,
    params: &ResampleParams,
    category: &str,
) -> Result<(FeatureMatrix, ResampleReport)> {
    if train.is_empty() {
        return Err(Error::Resample("training matrix is empty".into()));
    }
    if train.partitions().iter().any(|&p| p == Partition::Test) {
        return Err(Error::Leakage("resampling a matrix that contains test rows".into()));
    }
    let original = train.class_counts();
    let majority = if original[0] >= original[1] { 0 } else { 1 };
    let smoted = borderline_smote(train, params)?.matrix;
    let post_smote = smoted.class_counts();
    let cleaned = enn_clean(&smoted, params, majority)?;
    let report = ResampleReport {
        category: category.to_string(),
        original: original.into(),
        post_smote: post_smote.into(),
        post_enn: cleaned.class_counts().into(),
    };
    Ok((cleaned, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(points: &[(f64, f64)], labels: &[u8]) -> FeatureMatrix {
        let rows: Vec<Vec<Option<f64>>> = points.iter().map(|&(x, y)| vec![Some(x), Some(y)]).collect();
        FeatureMatrix::from_rows(&rows, labels).unwrap().into_train()
    }

    #[test]
    fn distance_examples() {
        let f = [false, false];
        assert_eq!(masked_distance(&[1.0, 2.0], &f, &[1.0, 2.0], &f), 0.0);
        assert_eq!(masked_distance(&[0.0, 0.0], &f, &[3.0, 4.0], &f), 5.0);
        let d = masked_distance(&[1.0, 0.0], &[false, true], &[4.0, 7.0], &f);
        assert!((d - 3.0 * 2f64.sqrt()).abs() < 1e-12);
        assert!((d - 4.2426).abs() < 1e-4);
        assert_eq!(
            masked_distance(&[1.0, 0.0], &[false, true], &[0.0, 7.0], &[true, false]),
            f64::INFINITY
        );
    }

    #[test]
    fn danger_rule_boundaries() {
        assert_eq!(danger_rule(0, 10), DangerLabel::Safe);
        assert_eq!(danger_rule(4, 10), DangerLabel::Safe);
        assert_eq!(danger_rule(5, 10), DangerLabel::Danger);
        assert_eq!(danger_rule(9, 10), DangerLabel::Danger);
        assert_eq!(danger_rule(10, 10), DangerLabel::Noise);
        assert_eq!(danger_rule(1, 2), DangerLabel::Danger);
    }

    #[test]
    fn classify_safe_and_noise() {
        // minority cluster at 0, one minority point buried in the majority at 100
        let mut pts = vec![(0.0, 0.0), (0.1, 0.0), (0.0, 0.1), (0.1, 0.1), (100.0, 100.0)];
        let mut labels = vec![1, 1, 1, 1, 1];
        for i in 0..6 {
            pts.push((100.0 + i as f64 * 0.01, 100.0));
            labels.push(0);
        }
        let m = matrix(&pts, &labels);
        let params = ResampleParams { m_neighbors: 3, k_neighbors: 1, ..Default::default() };
        let got = classify_danger(&m, &params, 1).unwrap();
        assert_eq!(got[0], (0, DangerLabel::Safe));
        assert_eq!(got[4], (4, DangerLabel::Noise));
    }

    #[test]
    fn classify_requires_minority() {
        let m = matrix(&[(0.0, 0.0), (1.0, 1.0)], &[0, 0]);
        assert!(classify_danger(&m, &ResampleParams::default(), 1).is_err());
    }

    #[test]
    fn balanced_input_is_noop() {
        let m = matrix(&[(0.0, 0.0), (1.0, 1.0), (2.0, 2.0), (3.0, 3.0)], &[0, 1, 0, 1]);
        let o = borderline_smote(&m, &ResampleParams::default()).unwrap();
        assert!(o.parents.is_empty());
        assert_eq!(o.matrix, m);
    }

    #[test]
    fn smote_balances_and_masks_union() {
        let rows = vec![
            vec![Some(0.0), Some(0.0)],
            vec![Some(1.0), None],
            vec![Some(0.5), Some(0.5)],
            vec![Some(0.6), Some(0.4)],
            vec![Some(0.4), Some(0.6)],
            vec![Some(0.55), Some(0.5)],
            vec![Some(5.0), Some(5.0)],
        ];
        let labels = [1, 1, 0, 0, 0, 0, 0];
        let m = FeatureMatrix::from_rows(&rows, &labels).unwrap().into_train();
        let params = ResampleParams { m_neighbors: 2, k_neighbors: 1, ..Default::default() };
        let o = borderline_smote(&m, &params).unwrap();
        assert_eq!(o.matrix.class_counts(), [5, 5]);
        for (i, sp) in o.parents.iter().enumerate() {
            let r = m.n_rows() + i;
            for c in 0..2 {
                let expect_missing = m.row_mask(sp.base)[c] || m.row_mask(sp.partner)[c];
                assert_eq!(o.matrix.row_mask(r)[c], expect_missing);
            }
            assert_eq!(o.matrix.origins()[r], Origin::Synthetic);
            assert_eq!(o.matrix.partitions()[r], Partition::Train);
        }
    }

    #[test]
    fn single_minority_row_is_an_error() {
        let m = matrix(&[(0.0, 0.0), (1.0, 1.0), (2.0, 2.0)], &[1, 0, 0]);
        assert!(borderline_smote(&m, &ResampleParams::default()).is_err());
    }

    #[test]
    fn enn_examples() {
        // majority row 0 surrounded by minority rows -> removed;
        // majority rows far away -> kept; minority row among majority -> kept
        let pts = [
            (0.0, 0.0),
            (0.1, 0.0),
            (0.0, 0.1),
            (-0.1, 0.0),
            (10.0, 10.0),
            (10.1, 10.0),
            (10.0, 10.1),
            (10.1, 10.1),
            (10.05, 10.05),
        ];
        let labels = [0, 1, 1, 1, 0, 0, 0, 0, 1];
        let m = matrix(&pts, &labels);
        let params = ResampleParams::default();
        assert_eq!(enn_removals(&m, &params, 0).unwrap(), vec![0]);
        let cleaned = enn_clean(&m, &params, 0).unwrap();
        assert_eq!(cleaned.n_rows(), 8);
        assert_eq!(cleaned.class_counts()[1], 4);
    }

    #[test]
    fn params_validated() {
        let bad = ResampleParams { enn_k: 2, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = ResampleParams { m_neighbors: 2, k_neighbors: 5, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn pipeline_rejects_test_rows_and_empty() {
        let m = FeatureMatrix::from_rows(&[vec![Some(1.0)], vec![Some(2.0)]], &[0, 1]).unwrap().into_test();
        assert!(matches!(
            resample_pipeline(&m, &ResampleParams::default(), "fire"),
            Err(Error::Leakage(_))
        ));
        let e = FeatureMatrix::empty(vec![]);
        assert!(resample_pipeline(&e, &ResampleParams::default(), "fire").is_err());
    }

    #[test]
    fn report_json_shape() {
        let r = ResampleReport {
            category: "agriculture".into(),
            original: [40481, 736].into(),
            post_smote: [40481, 40481].into(),
            post_enn: [40000, 40481].into(),
        };
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        assert_eq!(v["original"]["1"], 736);
        assert_eq!(v["post_smote"]["0"], 40481);
        assert_eq!(v["category"], "agriculture");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn row() -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
            (prop::collection::vec(-10.0f64..10.0, 4), prop::collection::vec(prop::bool::weighted(0.3), 4))
        }

        proptest! {
            #[test]
            fn distance_symmetric_nonnegative((x, xm) in row(), (y, ym) in row()) {
                let d = masked_distance(&x, &xm, &y, &ym);
                prop_assert!(d >= 0.0);
                let e = masked_distance(&y, &ym, &x, &xm);
                prop_assert!(d == e || (d.is_infinite() && e.is_infinite()));
                let none = vec![false; 4];
                prop_assert_eq!(masked_distance(&x, &none, &x, &none), 0.0);
            }

            #[test]
            fn smote_is_deterministic(seed in any::<u64>()) {
                let pts: Vec<(f64, f64)> = (0..30).map(|i| ((i % 7) as f64, (i / 7) as f64 * 0.3)).collect();
                let labels: Vec<u8> = (0..30).map(|i| (i % 5 == 0) as u8).collect();
                let m = matrix(&pts, &labels);
                let params = ResampleParams { seed, ..Default::default() };
                let a = resample_pipeline(&m, &params, "x").unwrap();
                let b = resample_pipeline(&m, &params, "x").unwrap();
                prop_assert_eq!(a.0, b.0);
                prop_assert_eq!(a.1, b.1);
            }

            #[test]
            fn smote_balances_inside_parent_box(
                pts in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 12..60),
                ones in 2usize..6,
                seed in any::<u64>(),
            ) {
                let labels: Vec<u8> = (0..pts.len()).map(|i| (i < ones) as u8).collect();
                let m = matrix(&pts, &labels);
                let over = borderline_smote(&m, &ResampleParams { seed, ..Default::default() }).unwrap();
                let [zeros, ones] = over.matrix.class_counts();
                prop_assert_eq!(zeros, ones);
                for (i, p) in over.parents.iter().enumerate() {
                    let row = over.matrix.row_values(m.n_rows() + i);
                    for c in 0..2 {
                        let (a, b) = (m.row_values(p.base)[c], m.row_values(p.partner)[c]);
                        prop_assert!(row[c] >= a.min(b) - 1e-9 && row[c] <= a.max(b) + 1e-9);
                    }
                }
            }

            #[test]
            fn enn_touches_only_clean_class(
                pts in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 4..60),
                labels in prop::collection::vec(0u8..2, 60),
                clean in 0u8..2,
            ) {
                let labels = &labels[..pts.len()];
                let m = matrix(&pts, labels);
                for r in enn_removals(&m, &ResampleParams::default(), clean).unwrap() {
                    prop_assert_eq!(labels[r], clean);
                }
            }
        }
    }
}
