use rayon::prelude::*;

use crate::features::FeatureMatrix;
use crate::gbdt::tree::Direction;
use crate::gbdt::TrainParams;

/// Best split found for a node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitCandidate {
    pub feature: usize,
    /// Observed values `< threshold` go left, the rest right.
    pub threshold: f64,
    /// Side taken by missing values.
    pub default: Direction,
    /// Objective gain, already reduced by `gamma`.
    pub gain: f64,
}

/// `½·[G_L²/(H_L+λ) + G_R²/(H_R+λ) − (G_L+G_R)²/(H_L+H_R+λ)] − γ`
pub fn split_gain(gl: f64, hl: f64, gr: f64, hr: f64, lambda: f64, gamma: f64) -> f64 {
    let score = |g: f64, h: f64| g * g / (h + lambda);
    0.5 * (score(gl, hl) + score(gr, hr) - score(gl + gr, hl + hr)) - gamma
}

/// Column-major copy of a matrix for fast per-feature scans.
pub(crate) struct Columns {
    n_rows: usize,
    values: Vec<f64>,
    missing: Vec<bool>,
}

impl Columns {
    pub(crate) fn from_matrix(m: &FeatureMatrix) -> Self {
        let (n, nc) = (m.n_rows(), m.n_cols());
        let mut values = vec![0.0; n * nc];
        let mut missing = vec![false; n * nc];
        for r in 0..n {
            let (v, mk) = (m.row_values(r), m.row_mask(r));
            for c in 0..nc {
                values[c * n + r] = v[c];
                missing[c * n + r] = mk[c];
            }
        }
        Columns {
            n_rows: n,
            values,
            missing,
        }
    }

    #[inline]
    pub(crate) fn get(&self, feature: usize, row: u32) -> Option<f64> {
        let i = feature * self.n_rows + row as usize;
        (!self.missing[i]).then(|| self.values[i])
    }

    #[inline]
    pub(crate) fn value_unchecked(&self, feature: usize, row: u32) -> f64 {
        self.values[feature * self.n_rows + row as usize]
    }

    /// Observed rows among `rows`, ordered by value (stable on ties).
    pub(crate) fn sorted_observed(&self, feature: usize, rows: &[u32]) -> Vec<u32> {
        let mut out: Vec<u32> = rows
            .iter()
            .copied()
            .filter(|&r| self.get(feature, r).is_some())
            .collect();
        out.sort_by(|&a, &b| {
            self.value_unchecked(feature, a)
                .total_cmp(&self.value_unchecked(feature, b))
        });
        out
    }
}

/// Midpoint between consecutive distinct values, nudged so that `lo` routes
/// left and `hi` routes right.
pub(crate) fn midpoint(lo: f64, hi: f64) -> f64 {
    let t = lo + (hi - lo) / 2.0;
    if t > lo {
        t
    } else {
        hi
    }
}

/// Keeps the earlier of two candidates unless the later one is strictly
/// better, which yields (feature, threshold, left-before-right) tie-breaking
/// when candidates are offered in that order.
fn better(current: Option<SplitCandidate>, next: SplitCandidate) -> Option<SplitCandidate> {
    match current {
        Some(c) if c.gain >= next.gain => Some(c),
        _ => Some(next),
    }
}

/// Scans one feature's sorted observed rows.
fn scan_feature(
    cols: &Columns,
    feature: usize,
    sorted: &[u32],
    totals: (f64, f64),
    grad: &[f64],
    hess: &[f64],
    params: &TrainParams,
) -> Option<SplitCandidate> {
    if sorted.len() < 2 {
        return None;
    }
    let (g_tot, h_tot) = totals;
    let (mut g_obs, mut h_obs) = (0.0, 0.0);
    for &r in sorted {
        g_obs += grad[r as usize];
        h_obs += hess[r as usize];
    }
    let (g_miss, h_miss) = (g_tot - g_obs, h_tot - h_obs);
    let mch = params.min_child_hessian;

    let mut best = None;
    let (mut gl, mut hl) = (0.0, 0.0);
    for i in 0..sorted.len() - 1 {
        let r = sorted[i];
        gl += grad[r as usize];
        hl += hess[r as usize];
        let v = cols.value_unchecked(feature, r);
        let next = cols.value_unchecked(feature, sorted[i + 1]);
        if next <= v {
            continue;
        }
        let threshold = midpoint(v, next);
        for default in [Direction::Left, Direction::Right] {
            let (g_left, h_left) = match default {
                Direction::Left => (gl + g_miss, hl + h_miss),
                Direction::Right => (gl, hl),
            };
            let (g_right, h_right) = (g_tot - g_left, h_tot - h_left);
            if h_left < mch || h_right < mch {
                continue;
            }
            let gain = split_gain(g_left, h_left, g_right, h_right, params.l2_reg, params.gamma);
            best = better(
                best,
                SplitCandidate {
                    feature,
                    threshold,
                    default,
                    gain,
                },
            );
        }
    }
    best
}

/// Work (rows × features) above which features are scanned in parallel.
const PARALLEL_WORK: usize = 1 << 15;

/// Best split over `features`, where `sorted[i]` holds the node's observed
/// rows for `features[i]` in value order. `None` when no split has positive
/// gain.
pub(crate) fn best_split_presorted(
    cols: &Columns,
    features: &[usize],
    sorted: &[Vec<u32>],
    totals: (f64, f64),
    grad: &[f64],
    hess: &[f64],
    params: &TrainParams,
) -> Option<SplitCandidate> {
    let scan = |i: usize| scan_feature(cols, features[i], &sorted[i], totals, grad, hess, params);
    let work: usize = sorted.iter().map(Vec::len).sum();
    let per_feature: Vec<Option<SplitCandidate>> = if work >= PARALLEL_WORK {
        (0..features.len()).into_par_iter().map(scan).collect()
    } else {
        (0..features.len()).map(scan).collect()
    };
    per_feature
        .into_iter()
        .flatten()
        .fold(None, better)
        .filter(|c| c.gain > 0.0)
}

/// Whether a node may be split at all.
pub(crate) fn splittable(n_rows: usize, h_sum: f64, params: &TrainParams) -> bool {
    n_rows >= 2 && h_sum >= 2.0 * params.min_child_hessian
}

/// Exact greedy search over every feature, every threshold between
/// consecutive distinct observed values and both default directions.
/// `grad` and `hess` are indexed by matrix row.
pub fn find_best_split(
    matrix: &FeatureMatrix,
    rows: &[usize],
    grad: &[f64],
    hess: &[f64],
    params: &TrainParams,
) -> Option<SplitCandidate> {
    let h_sum: f64 = rows.iter().map(|&r| hess[r]).sum();
    if !splittable(rows.len(), h_sum, params) {
        return None;
    }
    let g_sum: f64 = rows.iter().map(|&r| grad[r]).sum();
    let cols = Columns::from_matrix(matrix);
    let rows32: Vec<u32> = rows.iter().map(|&r| r as u32).collect();
    let features: Vec<usize> = (0..matrix.n_cols()).collect();
    let sorted: Vec<Vec<u32>> = features
        .iter()
        .map(|&f| cols.sorted_observed(f, &rows32))
        .collect();
    best_split_presorted(&cols, &features, &sorted, (g_sum, h_sum), grad, hess, params)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> TrainParams {
        TrainParams {
            l2_reg: 1.0,
            gamma: 0.0,
            min_child_hessian: 0.0,
            ..TrainParams::default()
        }
    }

    #[test]
    fn four_row_example() {
        let m = FeatureMatrix::from_rows(
            &[vec![Some(1.0)], vec![Some(2.0)], vec![Some(3.0)], vec![Some(4.0)]],
            &[0, 0, 1, 1],
        )
        .unwrap();
        let g = [-0.5, -0.5, 0.5, 0.5];
        let h = [0.25; 4];
        let s = find_best_split(&m, &[0, 1, 2, 3], &g, &h, &params()).unwrap();
        assert_eq!(s.feature, 0);
        assert_eq!(s.threshold, 2.5);
        assert_eq!(s.default, Direction::Left);
        assert!((s.gain - 2.0 / 3.0).abs() < 1e-12);
        assert!((s.gain - 0.6667).abs() < 1e-4);
    }

    #[test]
    fn pure_node_has_no_split() {
        let m = FeatureMatrix::from_rows(&[vec![Some(1.0)], vec![Some(2.0)], vec![Some(3.0)]], &[1, 1, 1]).unwrap();
        // identical gradients: any partition has gain <= 0
        let g = [-0.5; 3];
        let h = [0.25; 3];
        assert!(find_best_split(&m, &[0, 1, 2], &g, &h, &params()).is_none());
    }

    #[test]
    fn missing_routed_to_matching_side() {
        // missing rows share gradient sign with the high-value rows
        let rows = vec![
            vec![Some(1.0)],
            vec![Some(2.0)],
            vec![Some(3.0)],
            vec![Some(4.0)],
            vec![None],
            vec![None],
        ];
        let m = FeatureMatrix::from_rows(&rows, &[0, 0, 1, 1, 1, 1]).unwrap();
        let g = [0.5, 0.5, -0.5, -0.5, -0.5, -0.5];
        let h = [0.25; 6];
        let s = find_best_split(&m, &[0, 1, 2, 3, 4, 5], &g, &h, &params()).unwrap();
        assert_eq!(s.threshold, 2.5);
        assert_eq!(s.default, Direction::Right);
    }

    #[test]
    fn min_child_hessian_blocks_small_children() {
        let m = FeatureMatrix::from_rows(
            &[vec![Some(1.0)], vec![Some(2.0)], vec![Some(3.0)], vec![Some(4.0)]],
            &[0, 0, 1, 1],
        )
        .unwrap();
        let p = TrainParams { min_child_hessian: 1.0, ..params() };
        assert!(find_best_split(&m, &[0, 1, 2, 3], &[-0.5, -0.5, 0.5, 0.5], &[0.25; 4], &p).is_none());
    }

    #[test]
    fn midpoint_routes_endpoints() {
        let lo = 1.0f64;
        let hi = f64::from_bits(lo.to_bits() + 1);
        let t = midpoint(lo, hi);
        assert!(lo < t && hi >= t);
        assert_eq!(midpoint(2.0, 3.0), 2.5);
    }
}
