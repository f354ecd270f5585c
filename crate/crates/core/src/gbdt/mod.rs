//! Gradient-boosted decision trees for binary classification.
//!
//! Second-order boosting on the logistic loss with exact greedy split
//! finding. Every split learns a default direction for missing values by
//! trying both sides, so matrices with masked cells train and predict without
//! imputation.

mod ensemble;
mod split;
mod tree;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use ensemble::{fit, fit_traced, gain_importance, BoostedEnsemble};
pub use split::{find_best_split, split_gain, SplitCandidate};
pub use tree::{Direction, Node};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainParams {
    pub num_rounds: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub l2_reg: f64,
    pub gamma: f64,
    pub min_child_hessian: f64,
    /// Fraction of rows sampled (without replacement) per tree.
    pub row_subsample: f64,
    /// Fraction of columns sampled per tree.
    pub col_subsample: f64,
    pub seed: u64,
}

impl Default for TrainParams {
    fn default() -> Self {
        TrainParams {
            num_rounds: 100,
            max_depth: 6,
            learning_rate: 0.3,
            l2_reg: 1.0,
            gamma: 0.0,
            min_child_hessian: 1.0,
            row_subsample: 1.0,
            col_subsample: 1.0,
            seed: 0,
        }
    }
}

impl TrainParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Invalid(msg));
        if self.num_rounds < 1 {
            return bad("num_rounds must be >= 1".into());
        }
        if self.max_depth < 1 {
            return bad("max_depth must be >= 1".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return bad(format!("learning_rate {} outside (0, 1]", self.learning_rate));
        }
        if !(self.l2_reg >= 0.0) || !(self.gamma >= 0.0) || !(self.min_child_hessian >= 0.0) {
            return bad("l2_reg, gamma and min_child_hessian must be >= 0".into());
        }
        for (name, v) in [("row_subsample", self.row_subsample), ("col_subsample", self.col_subsample)] {
            if !(v > 0.0 && v <= 1.0) {
                return bad(format!("{name} {v} outside (0, 1]"));
            }
        }
        Ok(())
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Logistic loss of raw score `score` against label `y`.
pub fn logistic_loss(y: f64, score: f64) -> f64 {
    // log(1 + e^s) - y·s, computed stably
    let softplus = if score > 0.0 {
        score + (-score).exp().ln_1p()
    } else {
        score.exp().ln_1p()
    };
    softplus - y * score
}

/// Gradient `p - y` and hessian `p·(1 - p)` of the logistic loss with respect
/// to the raw score.
pub fn grad_hess(y: f64, score: f64) -> (f64, f64) {
    let p = sigmoid(score);
    (p - y, p * (1.0 - p))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loss_matches_definition() {
        for &(y, s) in &[(0.0, 0.3), (1.0, -2.0), (1.0, 5.0), (0.0, -40.0)] {
            let p = sigmoid(s);
            let direct = -(y * p.ln() + (1.0 - y) * (1.0 - p).ln());
            assert!((logistic_loss(y, s) - direct).abs() < 1e-9, "y={y} s={s}");
        }
    }

    #[test]
    fn hessian_bounds() {
        for s in [-30.0, -1.0, 0.0, 0.5, 12.0] {
            let (g, h) = grad_hess(1.0, s);
            assert!(h > 0.0 && h <= 0.25);
            assert!(g > -1.0 && g <= 0.0);
        }
        assert_eq!(grad_hess(0.0, 0.0), (0.5, 0.25));
    }

    #[test]
    fn params_validation() {
        assert!(TrainParams::default().validate().is_ok());
        assert!(TrainParams { learning_rate: 0.0, ..Default::default() }.validate().is_err());
        assert!(TrainParams { max_depth: 0, ..Default::default() }.validate().is_err());
        assert!(TrainParams { l2_reg: -1.0, ..Default::default() }.validate().is_err());
        assert!(TrainParams { row_subsample: 1.5, ..Default::default() }.validate().is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn grad_hess_bounds(y in 0u8..2, s in -50.0f64..50.0) {
                let (g, h) = grad_hess(f64::from(y), s);
                prop_assert!((-1.0..=1.0).contains(&g));
                prop_assert!((0.0..=0.25).contains(&h));
                prop_assert!(logistic_loss(f64::from(y), s) >= 0.0);
            }

            #[test]
            fn unregularized_gain_is_nonnegative_and_symmetric(
                gl in -20.0f64..20.0, hl in 0.01f64..20.0,
                gr in -20.0f64..20.0, hr in 0.01f64..20.0,
                lambda in 0.0f64..5.0,
            ) {
                let g = split_gain(gl, hl, gr, hr, 0.0, 0.0);
                prop_assert!(g >= -1e-9 * (1.0 + g.abs()));
                let a = split_gain(gl, hl, gr, hr, lambda, 0.5);
                let b = split_gain(gr, hr, gl, hl, lambda, 0.5);
                prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()));
            }
        }
    }
}
