//! From-scratch regression models sharing one training, prediction, and
//! persistence interface.
//!
//! Feature handling differs by family and is recorded in every model
//! file: tree models split on raw physical features (thresholds stay
//! interpretable), while the neighbor and neural models consume min-max
//! normalized features through the normalizer fitted on their training
//! data.

pub mod forest;
pub mod knn;
pub mod mlp;
pub mod tree;

pub use forest::{rfr_train, ForestTree, RandomForest, RfrConfig};
pub use knn::{knn_fit, KnnConfig, KnnRegressor};
pub use mlp::{
    mlp_grad_check, mlp_init, mlp_train, mse_loss_and_gradient, EpochStats, Mlp, MlpConfig,
    MLP_WIDTHS,
};
pub use tree::{dtr_train, DecisionTree, DtrConfig, TreeNode};

use crate::dataset::Normalizer;
use crate::error::{Error, Result};
use crate::metrics::{overall_metrics, StratumMetrics};
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::str::FromStr;

const MODEL_FILE_VERSION: u32 = 1;

/// The four regressor families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Dtr,
    Rfr,
    Knn,
    Mlp,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [
        ModelKind::Dtr,
        ModelKind::Rfr,
        ModelKind::Knn,
        ModelKind::Mlp,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::Dtr => "dtr",
            ModelKind::Rfr => "rfr",
            ModelKind::Knn => "knn",
            ModelKind::Mlp => "mlp",
        }
    }

    /// Long display name used in report tables.
    pub fn label(&self) -> &'static str {
        match self {
            ModelKind::Dtr => "Decision Tree",
            ModelKind::Rfr => "Random Forest",
            ModelKind::Knn => "K-Nearest Neighbors",
            ModelKind::Mlp => "Neural Network (MLP)",
        }
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<ModelKind> {
        match s {
            "dtr" => Ok(ModelKind::Dtr),
            "rfr" => Ok(ModelKind::Rfr),
            "knn" => Ok(ModelKind::Knn),
            "mlp" => Ok(ModelKind::Mlp),
            other => Err(Error::Validation(format!(
                "unknown model type {other:?} (expected dtr, rfr, knn, or mlp)"
            ))),
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Bundled hyperparameters for all families plus the shared training
/// knobs, deserializable from a run-configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlConfig {
    pub dtr: DtrConfig,
    pub rfr: RfrConfig,
    pub knn: KnnConfig,
    pub mlp: MlpConfig,
    /// Fraction of the training set carved off (after shuffling) as the
    /// neural model's validation curve.
    pub mlp_validation_fraction: f64,
}

impl Default for MlConfig {
    fn default() -> Self {
        MlConfig {
            dtr: DtrConfig::default(),
            rfr: RfrConfig::default(),
            knn: KnnConfig::default(),
            mlp: MlpConfig::default(),
            mlp_validation_fraction: 0.15,
        }
    }
}

/// MLP hyperparameters as persisted: training config plus layer widths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpHyper {
    #[serde(flatten)]
    pub train: MlpConfig,
    pub widths: Vec<usize>,
    pub seed: u64,
}

/// Forest hyperparameters as persisted: config plus the training seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfrHyper {
    #[serde(flatten)]
    pub config: RfrConfig,
    pub seed: u64,
}

/// A trained model of any family, carrying everything prediction needs.
/// Serialization is the on-disk model-file format: a tagged JSON document
/// with `model_type`, `hyperparameters`, the fitted `normalizer`, and the
/// learned `parameters`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model_type", rename_all = "snake_case")]
pub enum TrainedModel {
    DecisionTree {
        hyperparameters: DtrConfig,
        normalizer: Normalizer,
        parameters: DecisionTree,
    },
    RandomForest {
        hyperparameters: RfrHyper,
        normalizer: Normalizer,
        parameters: RandomForest,
    },
    Knn {
        hyperparameters: KnnConfig,
        normalizer: Normalizer,
        parameters: KnnParameters,
    },
    Mlp {
        hyperparameters: MlpHyper,
        normalizer: Normalizer,
        parameters: Mlp,
    },
}

/// Stored KNN state: the normalized training matrix and raw targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnParameters {
    pub points: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    version: u32,
    #[serde(flatten)]
    model: TrainedModel,
}

impl TrainedModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            TrainedModel::DecisionTree { .. } => ModelKind::Dtr,
            TrainedModel::RandomForest { .. } => ModelKind::Rfr,
            TrainedModel::Knn { .. } => ModelKind::Knn,
            TrainedModel::Mlp { .. } => ModelKind::Mlp,
        }
    }

    /// Number of feature columns the model was fitted on, taken from the
    /// stored normalizer. Inputs of any other width are a schema mismatch.
    pub fn feature_width(&self) -> usize {
        match self {
            TrainedModel::DecisionTree { normalizer, .. }
            | TrainedModel::RandomForest { normalizer, .. }
            | TrainedModel::Knn { normalizer, .. }
            | TrainedModel::Mlp { normalizer, .. } => normalizer.width(),
        }
    }

    /// Predicts from one raw (unnormalized) feature row; each family
    /// applies its own feature handling.
    pub fn predict_row(&self, raw: &[f64]) -> Result<f64> {
        match self {
            TrainedModel::DecisionTree { parameters, .. } => Ok(parameters.predict_row(raw)),
            TrainedModel::RandomForest { parameters, .. } => Ok(parameters.predict_row(raw)),
            TrainedModel::Knn {
                hyperparameters,
                normalizer,
                parameters,
            } => {
                let model = KnnRegressor {
                    k: hyperparameters.k,
                    normalizer: normalizer.clone(),
                    points: parameters.points.clone(),
                    targets: parameters.targets.clone(),
                };
                model.predict_row(raw)
            }
            TrainedModel::Mlp {
                normalizer,
                parameters,
                ..
            } => parameters.forward(&normalizer.transform_row(raw)),
        }
    }

    /// Batch prediction over raw feature rows.
    pub fn predict(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
        // The KNN clone in predict_row would be wasteful per row; build
        // the runtime view once.
        if let TrainedModel::Knn {
            hyperparameters,
            normalizer,
            parameters,
        } = self
        {
            let model = KnnRegressor {
                k: hyperparameters.k,
                normalizer: normalizer.clone(),
                points: parameters.points.clone(),
                targets: parameters.targets.clone(),
            };
            return model.predict(rows);
        }
        rows.iter().map(|r| self.predict_row(r)).collect()
    }

    /// Canonical JSON for the model file: pretty-printed, stable field
    /// order, trailing newline. Identical models serialize to identical
    /// bytes.
    pub fn to_json_string(&self) -> Result<String> {
        let file = ModelFile {
            version: MODEL_FILE_VERSION,
            model: self.clone(),
        };
        let mut s = serde_json::to_string_pretty(&file)
            .map_err(|e| Error::Parse(format!("model serialization failed: {e}")))?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json_str(s: &str) -> Result<TrainedModel> {
        let file: ModelFile =
            serde_json::from_str(s).map_err(|e| Error::Schema(format!("model file: {e}")))?;
        if file.version != MODEL_FILE_VERSION {
            return Err(Error::Schema(format!(
                "unsupported model file version {} (expected {MODEL_FILE_VERSION})",
                file.version
            )));
        }
        Ok(file.model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::write_atomic(path, self.to_json_string()?.as_bytes())
    }

    pub fn load(path: &Path) -> Result<TrainedModel> {
        let text = std::fs::read_to_string(path)?;
        TrainedModel::from_json_str(&text)
    }
}

/// Trains one model family on raw features. The MLP also returns its
/// loss history through [`fit_mlp`]; this wrapper discards it.
pub fn fit_model(
    kind: ModelKind,
    x_raw: &[Vec<f64>],
    y: &[f64],
    cfg: &MlConfig,
    seed: u64,
) -> Result<TrainedModel> {
    match kind {
        ModelKind::Dtr => {
            let normalizer = Normalizer::fit(x_raw)?;
            Ok(TrainedModel::DecisionTree {
                hyperparameters: cfg.dtr,
                normalizer,
                parameters: dtr_train(x_raw, y, &cfg.dtr)?,
            })
        }
        ModelKind::Rfr => {
            let normalizer = Normalizer::fit(x_raw)?;
            Ok(TrainedModel::RandomForest {
                hyperparameters: RfrHyper {
                    config: cfg.rfr,
                    seed,
                },
                normalizer,
                parameters: rfr_train(x_raw, y, &cfg.rfr, seed)?,
            })
        }
        ModelKind::Knn => {
            let model = knn_fit(x_raw, y, &cfg.knn)?;
            Ok(TrainedModel::Knn {
                hyperparameters: cfg.knn,
                normalizer: model.normalizer,
                parameters: KnnParameters {
                    points: model.points,
                    targets: model.targets,
                },
            })
        }
        ModelKind::Mlp => Ok(fit_mlp(x_raw, y, cfg, seed)?.0),
    }
}

/// Trains the neural model: normalizes features, carves off the
/// validation fraction (tail of a seeded shuffle), runs Adam, and returns
/// the model plus its loss history.
pub fn fit_mlp(
    x_raw: &[Vec<f64>],
    y: &[f64],
    cfg: &MlConfig,
    seed: u64,
) -> Result<(TrainedModel, Vec<EpochStats>)> {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;

    if x_raw.is_empty() {
        return Err(Error::Training("training set is empty".into()));
    }
    let normalizer = Normalizer::fit(x_raw)?;
    let xn = normalizer.transform(x_raw);
    let n = xn.len();
    let width = xn[0].len();

    let mut idx: Vec<usize> = (0..n).collect();
    let n_val = if cfg.mlp_validation_fraction > 0.0 && n >= 2 {
        ((cfg.mlp_validation_fraction * n as f64).round() as usize).min(n - 1)
    } else {
        0
    };
    idx.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_f01d));
    let (val_idx, train_idx) = idx.split_at(n_val);
    let tx: Vec<Vec<f64>> = train_idx.iter().map(|&i| xn[i].clone()).collect();
    let ty: Vec<f64> = train_idx.iter().map(|&i| y[i]).collect();
    let vx: Vec<Vec<f64>> = val_idx.iter().map(|&i| xn[i].clone()).collect();
    let vy: Vec<f64> = val_idx.iter().map(|&i| y[i]).collect();

    let mut widths = vec![width];
    widths.extend_from_slice(&MLP_WIDTHS[1..]);
    let mut net = mlp_init(&widths, seed)?;
    let validation = if vx.is_empty() {
        None
    } else {
        Some((vx.as_slice(), vy.as_slice()))
    };
    let history = mlp_train(&mut net, &tx, &ty, validation, &cfg.mlp, seed)?;
    Ok((
        TrainedModel::Mlp {
            hyperparameters: MlpHyper {
                train: cfg.mlp,
                widths,
                seed,
            },
            normalizer,
            parameters: net,
        },
        history,
    ))
}

/// One fold's holdout metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldScore {
    pub fold: usize,
    #[serde(flatten)]
    pub metrics: StratumMetrics,
}

/// Cross-validation summary: per-fold metrics and their arithmetic means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub folds: Vec<FoldScore>,
    pub mean_rmse_db: f64,
    pub mean_mape_pct: f64,
    pub mean_msle: f64,
    /// Mean Pearson correlation, absent if any fold's is undefined.
    pub mean_rho: Option<f64>,
}

/// K-fold cross-validation: a fresh model per fold, trained on the other
/// k-1 folds and scored on the holdout.
pub fn cross_validate(
    kind: ModelKind,
    x_raw: &[Vec<f64>],
    y: &[f64],
    cfg: &MlConfig,
    k: usize,
    seed: u64,
) -> Result<CvReport> {
    let n = x_raw.len();
    if k < 2 {
        return Err(Error::Training(format!("k-fold needs k >= 2, got {k}")));
    }
    if k > n {
        return Err(Error::Training(format!(
            "cannot split {n} samples into {k} folds"
        )));
    }
    // Reuse the dataset partitioner on a lightweight index wrapper.
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
    let base = n / k;
    let extra = n % k;
    let mut folds_idx = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        folds_idx.push(idx[start..start + size].to_vec());
        start += size;
    }

    let mut folds = Vec::with_capacity(k);
    for f in 0..k {
        let val = &folds_idx[f];
        let train: Vec<usize> = folds_idx
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != f)
            .flat_map(|(_, v)| v.iter().copied())
            .collect();
        let tx: Vec<Vec<f64>> = train.iter().map(|&i| x_raw[i].clone()).collect();
        let ty: Vec<f64> = train.iter().map(|&i| y[i]).collect();
        let vx: Vec<Vec<f64>> = val.iter().map(|&i| x_raw[i].clone()).collect();
        let vy: Vec<f64> = val.iter().map(|&i| y[i]).collect();
        let model = fit_model(kind, &tx, &ty, cfg, seed)?;
        let pred = model.predict(&vx)?;
        folds.push(FoldScore {
            fold: f,
            metrics: overall_metrics(&vy, &pred)?,
        });
    }
    let kf = folds.len() as f64;
    let mean_rho = folds
        .iter()
        .map(|f| f.metrics.rho)
        .collect::<Option<Vec<f64>>>()
        .map(|rhos| rhos.iter().sum::<f64>() / kf);
    Ok(CvReport {
        mean_rmse_db: folds.iter().map(|f| f.metrics.rmse_db).sum::<f64>() / kf,
        mean_mape_pct: folds.iter().map(|f| f.metrics.mape_pct).sum::<f64>() / kf,
        mean_msle: folds.iter().map(|f| f.metrics.msle).sum::<f64>() / kf,
        mean_rho,
        folds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn toy(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                vec![
                    rng.gen_range(0.0..30.0),
                    rng.gen_range(20.0..45.0),
                    rng.gen_range(1.0..4.0),
                ]
            })
            .collect();
        let y: Vec<f64> = x
            .iter()
            .map(|r| 60.0 + 2.0 * r[0] + 0.5 * r[1] + 3.0 * r[2] + rng.gen_range(-1.0..1.0))
            .collect();
        (x, y)
    }

    #[test]
    fn model_kind_parses_and_displays() {
        for kind in ModelKind::ALL {
            assert_eq!(kind.name().parse::<ModelKind>().unwrap(), kind);
        }
        assert!("svm".parse::<ModelKind>().is_err());
    }

    #[test]
    fn every_family_round_trips_through_json_bit_exactly() {
        let (x, y) = toy(60, 3);
        let cfg = MlConfig {
            rfr: RfrConfig {
                n_estimators: 5,
                ..RfrConfig::default()
            },
            knn: KnnConfig { k: 5 },
            mlp: MlpConfig {
                epochs: 3,
                batch_size: 16,
                ..MlpConfig::default()
            },
            ..MlConfig::default()
        };
        let (qx, _) = toy(10, 4);
        for kind in ModelKind::ALL {
            let model = fit_model(kind, &x, &y, &cfg, 42).unwrap();
            let json = model.to_json_string().unwrap();
            let back = TrainedModel::from_json_str(&json).unwrap();
            assert_eq!(model, back, "{kind}: structural equality after reload");
            for q in &qx {
                let a = model.predict_row(q).unwrap();
                let b = back.predict_row(q).unwrap();
                assert_eq!(a.to_bits(), b.to_bits(), "{kind}: bit-exact predictions");
            }
            // The tagged layout carries the required sections.
            assert!(json.contains("\"version\": 1"));
            assert!(json.contains("\"model_type\""));
            assert!(json.contains("\"hyperparameters\""));
            assert!(json.contains("\"normalizer\""));
            assert!(json.contains("\"parameters\""));
            // Serialization itself is canonical.
            assert_eq!(json, back.to_json_string().unwrap());
        }
    }

    #[test]
    fn unsupported_version_is_a_schema_error() {
        let (x, y) = toy(20, 5);
        let model = fit_model(ModelKind::Dtr, &x, &y, &MlConfig::default(), 42).unwrap();
        let json = model.to_json_string().unwrap();
        let bumped = json.replace("\"version\": 1", "\"version\": 99");
        let err = TrainedModel::from_json_str(&bumped).unwrap_err();
        assert_eq!(err.exit_code(), 1);
        assert!(err.to_string().contains("version 99"), "{err}");
    }

    #[test]
    fn save_and_load_through_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let (x, y) = toy(30, 7);
        let cfg = MlConfig {
            knn: KnnConfig { k: 3 },
            ..MlConfig::default()
        };
        let model = fit_model(ModelKind::Knn, &x, &y, &cfg, 42).unwrap();
        model.save(&path).unwrap();
        let back = TrainedModel::load(&path).unwrap();
        assert_eq!(model, back);
        // Retraining and re-saving produces byte-identical files.
        let again = fit_model(ModelKind::Knn, &x, &y, &cfg, 42).unwrap();
        assert_eq!(
            model.to_json_string().unwrap(),
            again.to_json_string().unwrap()
        );
    }

    #[test]
    fn dtr_and_rfr_predict_on_raw_features_knn_mlp_normalize() {
        // Sanity on the documented feature-handling split: a tree trained
        // on raw features must keep raw-unit thresholds.
        let (x, y) = toy(40, 9);
        let model = fit_model(ModelKind::Dtr, &x, &y, &MlConfig::default(), 42).unwrap();
        let TrainedModel::DecisionTree { parameters, .. } = &model else {
            panic!("expected a tree");
        };
        let has_raw_threshold = parameters.nodes.iter().any(|n| {
            matches!(n, TreeNode::Split { threshold, .. } if *threshold > 1.5)
        });
        assert!(
            has_raw_threshold,
            "raw-unit thresholds should exceed the normalized [0,1] range"
        );
    }

    #[test]
    fn cross_validation_is_deterministic_and_averages_folds() {
        let (x, y) = toy(50, 11);
        let cfg = MlConfig::default();
        let a = cross_validate(ModelKind::Dtr, &x, &y, &cfg, 5, 42).unwrap();
        let b = cross_validate(ModelKind::Dtr, &x, &y, &cfg, 5, 42).unwrap();
        assert_eq!(a, b, "same seed, same folds, same report");
        assert_eq!(a.folds.len(), 5);
        let mean = a.folds.iter().map(|f| f.metrics.rmse_db).sum::<f64>() / 5.0;
        assert!((a.mean_rmse_db - mean).abs() < 1e-12);
        // Fold sizes differ by at most one.
        let sizes: Vec<usize> = a.folds.iter().map(|f| f.metrics.count).collect();
        let (lo, hi) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
        assert!(hi - lo <= 1, "{sizes:?}");
        assert_eq!(sizes.iter().sum::<usize>(), 50);
    }

    #[test]
    fn cross_validation_on_constant_targets_scores_zero_error() {
        let (x, _) = toy(24, 13);
        let y = vec![100.0; 24];
        let report = cross_validate(ModelKind::Dtr, &x, &y, &MlConfig::default(), 4, 42).unwrap();
        for f in &report.folds {
            assert_eq!(f.metrics.rmse_db, 0.0, "fold {}", f.fold);
        }
        assert_eq!(report.mean_rmse_db, 0.0);
        assert!(report.mean_rho.is_none(), "constant outputs have no correlation");
    }

    #[test]
    fn cross_validation_rejects_bad_k() {
        let (x, y) = toy(10, 15);
        assert_eq!(
            cross_validate(ModelKind::Dtr, &x, &y, &MlConfig::default(), 11, 42)
                .unwrap_err()
                .exit_code(),
            3
        );
        assert!(cross_validate(ModelKind::Dtr, &x, &y, &MlConfig::default(), 1, 42).is_err());
    }
}
