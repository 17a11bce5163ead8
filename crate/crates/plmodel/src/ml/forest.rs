//! Bagged ensemble of regression trees. Each tree trains on a bootstrap
//! resample drawn from its own deterministic random stream, so parallel
//! and serial training build the identical forest.

use super::tree::{dtr_train, DecisionTree, DtrConfig};
use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Forest hyperparameters. `feature_subsample` (off by default) gives each
/// tree a random sqrt-width subset of the features — an experimentation
/// knob; plain bagging over samples is the standard configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RfrConfig {
    pub n_estimators: usize,
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub bootstrap: bool,
    pub feature_subsample: bool,
}

impl Default for RfrConfig {
    fn default() -> Self {
        RfrConfig {
            n_estimators: 100,
            max_depth: 30,
            min_samples_split: 2,
            bootstrap: true,
            feature_subsample: false,
        }
    }
}

impl RfrConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_estimators < 1 {
            return Err(Error::Training("a forest needs at least one tree".into()));
        }
        self.tree_config().validate()
    }

    pub fn tree_config(&self) -> DtrConfig {
        DtrConfig {
            max_depth: self.max_depth,
            min_samples_split: self.min_samples_split,
        }
    }
}

/// One tree of the ensemble plus the feature subset it was trained on
/// (all features unless subsampling was enabled).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestTree {
    pub features: Vec<usize>,
    pub tree: DecisionTree,
}

impl ForestTree {
    fn project(&self, row: &[f64]) -> Vec<f64> {
        self.features.iter().map(|&j| row[j]).collect()
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.tree.predict_row(&self.project(row))
    }
}

/// A trained forest; prediction is the arithmetic mean of the trees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub trees: Vec<ForestTree>,
}

impl RandomForest {
    /// Mean of the individual tree predictions, summed in tree order.
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict_row(row)).sum();
        sum / self.trees.len() as f64
    }

    pub fn predict(&self, rows: &[Vec<f64>]) -> Vec<f64> {
        rows.iter().map(|r| self.predict_row(r)).collect()
    }
}

/// Trains a forest. Tree `t` draws its bootstrap (and feature subset, if
/// enabled) from a stream derived from `(seed, t)`, making the result
/// independent of scheduling.
pub fn rfr_train(x: &[Vec<f64>], y: &[f64], cfg: &RfrConfig, seed: u64) -> Result<RandomForest> {
    cfg.validate()?;
    if x.is_empty() {
        return Err(Error::Training("training set is empty".into()));
    }
    let n = x.len();
    let d = x[0].len();
    let tree_cfg = cfg.tree_config();

    let trees: Result<Vec<ForestTree>> = (0..cfg.n_estimators)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t as u64);
            let idx: Vec<usize> = if cfg.bootstrap {
                (0..n).map(|_| rng.gen_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            let features: Vec<usize> = if cfg.feature_subsample {
                let take = (d as f64).sqrt().ceil() as usize;
                let mut all: Vec<usize> = (0..d).collect();
                for i in 0..take {
                    let j = rng.gen_range(i..d);
                    all.swap(i, j);
                }
                let mut chosen = all[..take].to_vec();
                chosen.sort_unstable();
                chosen
            } else {
                (0..d).collect()
            };
            let xs: Vec<Vec<f64>> = idx
                .iter()
                .map(|&i| features.iter().map(|&j| x[i][j]).collect())
                .collect();
            let ys: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
            Ok(ForestTree {
                features,
                tree: dtr_train(&xs, &ys, &tree_cfg)?,
            })
        })
        .collect();
    Ok(RandomForest { trees: trees? })
}
