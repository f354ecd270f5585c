use std::io::{Read, Write};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureDescriptor, FeatureMatrix};
use crate::gbdt::split::Columns;
use crate::gbdt::tree::{Node, TreeBuilder};
use crate::gbdt::{grad_hess, logistic_loss, sigmoid, TrainParams};

/// Trained additive model: `p = sigmoid(base_score + η·Σ tree(x))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostedEnsemble {
    pub params: TrainParams,
    pub base_score: f64,
    pub trees: Vec<Node>,
    pub descriptors: Vec<FeatureDescriptor>,
}

impl BoostedEnsemble {
    pub fn n_features(&self) -> usize {
        self.descriptors.len()
    }

    pub fn n_splits(&self) -> usize {
        self.trees.iter().map(Node::n_splits).sum()
    }

    fn raw_score(&self, values: &[f64], mask: &[bool]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict(values, mask)).sum();
        self.base_score + self.params.learning_rate * sum
    }

    /// Probability for a single row given as values plus missing mask.
    pub fn predict_row(&self, values: &[f64], mask: &[bool]) -> Result<f64> {
        if values.len() != self.n_features() || mask.len() != self.n_features() {
            return Err(Error::Layout(format!(
                "row has {} columns, model expects {}",
                values.len(),
                self.n_features()
            )));
        }
        Ok(sigmoid(self.raw_score(values, mask)))
    }

    fn check_layout(&self, matrix: &FeatureMatrix) -> Result<()> {
        if matrix.descriptors() != self.descriptors.as_slice() {
            return Err(Error::Layout(format!(
                "matrix has {} columns that do not match the model's {}",
                matrix.n_cols(),
                self.n_features()
            )));
        }
        Ok(())
    }

    pub fn predict_proba(&self, matrix: &FeatureMatrix) -> Result<Vec<f64>> {
        self.check_layout(matrix)?;
        Ok((0..matrix.n_rows())
            .map(|r| sigmoid(self.raw_score(matrix.row_values(r), matrix.row_mask(r))))
            .collect())
    }

    /// Labels with `probability >= threshold`.
    pub fn predict_label(&self, matrix: &FeatureMatrix, threshold: f64) -> Result<Vec<u8>> {
        Ok(self
            .predict_proba(matrix)?
            .into_iter()
            .map(|p| (p >= threshold) as u8)
            .collect())
    }

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
        let m: BoostedEnsemble = serde_json::from_reader(r)?;
        m.validate()?;
        Ok(m)
    }

    fn validate(&self) -> Result<()> {
        for t in &self.trees {
            if let Some(f) = t.max_feature() {
                if f >= self.n_features() {
                    return Err(Error::Layout(format!(
                        "tree splits on feature {f} but the model has {} columns",
                        self.n_features()
                    )));
                }
            }
        }
        self.params.validate()
    }
}

/// Trains an ensemble. Fails when the labels contain a single class.
pub fn fit(train: &FeatureMatrix, params: &TrainParams) -> Result<BoostedEnsemble> {
    fit_traced(train, params).map(|(m, _)| m)
}

/// Like [`fit`], also returning the total training loss before the first
/// round and after every round.
pub fn fit_traced(train: &FeatureMatrix, params: &TrainParams) -> Result<(BoostedEnsemble, Vec<f64>)> {
    params.validate()?;
    let [neg, pos] = train.class_counts();
    if neg == 0 || pos == 0 {
        return Err(Error::Train(format!(
            "labels must contain both classes, got {neg} zeros and {pos} ones"
        )));
    }
    let n = train.n_rows();
    let y: Vec<f64> = train.labels().iter().map(|&l| l as f64).collect();
    let base_score = (pos as f64 / neg as f64).ln();
    let cols = Columns::from_matrix(train);
    let all_rows: Vec<u32> = (0..n as u32).collect();
    let all_features: Vec<usize> = (0..train.n_cols()).collect();
    let presorted: Vec<Vec<u32>> = all_features
        .iter()
        .map(|&f| cols.sorted_observed(f, &all_rows))
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut scores = vec![base_score; n];
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];
    let total_loss = |scores: &[f64]| -> f64 {
        y.iter().zip(scores).map(|(&yi, &s)| logistic_loss(yi, s)).sum()
    };
    let mut trace = vec![total_loss(&scores)];
    let mut trees = Vec::with_capacity(params.num_rounds);

    for _ in 0..params.num_rounds {
        for i in 0..n {
            let (g, h) = grad_hess(y[i], scores[i]);
            grad[i] = g;
            hess[i] = h;
        }

        let (rows, row_filter) = if params.row_subsample < 1.0 {
            let k = ((n as f64 * params.row_subsample).round() as usize).max(1);
            let mut keep = vec![false; n];
            for i in sample(&mut rng, n, k) {
                keep[i] = true;
            }
            let rows: Vec<u32> = all_rows.iter().copied().filter(|&r| keep[r as usize]).collect();
            (rows, Some(keep))
        } else {
            (all_rows.clone(), None)
        };
        let feature_idx: Vec<usize> = if params.col_subsample < 1.0 {
            let nf = all_features.len();
            let k = ((nf as f64 * params.col_subsample).round() as usize).max(1);
            let mut chosen = sample(&mut rng, nf, k).into_vec();
            chosen.sort_unstable();
            chosen
        } else {
            all_features.clone()
        };
        let sorted: Vec<Vec<u32>> = feature_idx
            .iter()
            .map(|&f| match &row_filter {
                Some(keep) => presorted[f].iter().copied().filter(|&r| keep[r as usize]).collect(),
                None => presorted[f].clone(),
            })
            .collect();

        let mut builder = TreeBuilder {
            cols: &cols,
            features: &feature_idx,
            grad: &grad,
            hess: &hess,
            params,
            goes_left: vec![false; n],
        };
        let tree = builder.grow(rows, sorted, 0);
        for (i, s) in scores.iter_mut().enumerate() {
            *s += params.learning_rate * tree.predict(train.row_values(i), train.row_mask(i));
        }
        trace.push(total_loss(&scores));
        trees.push(tree);
    }

    Ok((
        BoostedEnsemble {
            params: params.clone(),
            base_score,
            trees,
            descriptors: train.descriptors().to_vec(),
        },
        trace,
    ))
}

/// Per-feature split gain summed over splits, averaged over trees and
/// normalized to sum to 1. All zeros when the ensemble never splits.
pub fn gain_importance(model: &BoostedEnsemble) -> Vec<f64> {
    let mut totals = vec![0.0; model.n_features()];
    for t in &model.trees {
        t.visit_splits(&mut |f, gain| totals[f] += gain.max(0.0));
    }
    let n_trees = model.trees.len().max(1) as f64;
    totals.iter_mut().for_each(|v| *v /= n_trees);
    let sum: f64 = totals.iter().sum();
    if sum > 0.0 {
        totals.iter_mut().for_each(|v| *v /= sum);
    }
    totals
}
