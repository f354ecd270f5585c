use serde::{Deserialize, Serialize};

use crate::gbdt::split::{best_split_presorted, splittable, Columns};
use crate::gbdt::TrainParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Left,
    Right,
}

/// Tree node, serialized as `{f, t, d, gain, l, r}` or `{w}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Node {
    Split {
        f: usize,
        t: f64,
        d: Direction,
        /// Loss reduction of the split (before the `gamma` penalty).
        gain: f64,
        l: Box<Node>,
        r: Box<Node>,
    },
    Leaf {
        w: f64,
    },
}

impl Node {
    /// Leaf weight reached by a row.
    pub fn predict(&self, values: &[f64], mask: &[bool]) -> f64 {
        let mut node = self;
        loop {
            match node {
                Node::Leaf { w } => return *w,
                Node::Split { f, t, d, l, r, .. } => {
                    let go_left = if mask[*f] {
                        *d == Direction::Left
                    } else {
                        values[*f] < *t
                    };
                    node = if go_left { l } else { r };
                }
            }
        }
    }

    pub(crate) fn visit_splits(&self, visit: &mut impl FnMut(usize, f64)) {
        if let Node::Split { f, gain, l, r, .. } = self {
            visit(*f, *gain);
            l.visit_splits(visit);
            r.visit_splits(visit);
        }
    }

    pub fn n_splits(&self) -> usize {
        let mut n = 0;
        self.visit_splits(&mut |_, _| n += 1);
        n
    }

    pub fn depth(&self) -> usize {
        match self {
            Node::Leaf { .. } => 0,
            Node::Split { l, r, .. } => 1 + l.depth().max(r.depth()),
        }
    }

    pub(crate) fn max_feature(&self) -> Option<usize> {
        let mut m = None;
        self.visit_splits(&mut |f, _| m = Some(m.map_or(f, |x: usize| x.max(f))));
        m
    }
}

/// Grows one tree depth-first on presorted feature lists.
pub(crate) struct TreeBuilder<'a> {
    pub cols: &'a Columns,
    pub features: &'a [usize],
    pub grad: &'a [f64],
    pub hess: &'a [f64],
    pub params: &'a TrainParams,
    /// Scratch flags indexed by row.
    pub goes_left: Vec<bool>,
}

impl TreeBuilder<'_> {
    /// `rows` are the node's rows, `sorted[i]` its observed rows for
    /// `features[i]` in value order.
    pub(crate) fn grow(&mut self, rows: Vec<u32>, sorted: Vec<Vec<u32>>, depth: usize) -> Node {
        let (g_sum, h_sum) = rows.iter().fold((0.0, 0.0), |(g, h), &r| {
            (g + self.grad[r as usize], h + self.hess[r as usize])
        });
        let leaf = Node::Leaf {
            w: -g_sum / (h_sum + self.params.l2_reg),
        };
        if depth >= self.params.max_depth || !splittable(rows.len(), h_sum, self.params) {
            return leaf;
        }
        let Some(split) = best_split_presorted(
            self.cols,
            self.features,
            &sorted,
            (g_sum, h_sum),
            self.grad,
            self.hess,
            self.params,
        ) else {
            return leaf;
        };

        for &r in &rows {
            self.goes_left[r as usize] = match self.cols.get(split.feature, r) {
                Some(v) => v < split.threshold,
                None => split.default == Direction::Left,
            };
        }
        let (left_rows, right_rows): (Vec<u32>, Vec<u32>) =
            rows.iter().partition(|&&r| self.goes_left[r as usize]);
        let mut left_sorted = Vec::with_capacity(sorted.len());
        let mut right_sorted = Vec::with_capacity(sorted.len());
        for list in sorted {
            let (a, b): (Vec<u32>, Vec<u32>) =
                list.into_iter().partition(|&r| self.goes_left[r as usize]);
            left_sorted.push(a);
            right_sorted.push(b);
        }
        drop(rows);
        let l = self.grow(left_rows, left_sorted, depth + 1);
        let r = self.grow(right_rows, right_sorted, depth + 1);
        Node::Split {
            f: split.feature,
            t: split.threshold,
            d: split.default,
            gain: split.gain + self.params.gamma,
            l: Box::new(l),
            r: Box::new(r),
        }
    }
}
