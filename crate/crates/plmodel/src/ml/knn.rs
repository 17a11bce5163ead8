//! K-nearest-neighbor regression with Manhattan distance over min-max
//! normalized features. Ties at the k-th distance break toward the lowest
//! training index, and neighbor targets average in index order, so every
//! prediction is reproducible to the bit.

use crate::dataset::Normalizer;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnnConfig {
    pub k: usize,
}

impl Default for KnnConfig {
    fn default() -> Self {
        KnnConfig { k: 30 }
    }
}

/// Fitted neighbor model: the normalizer and the normalized training
/// matrix with raw targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnRegressor {
    pub k: usize,
    pub normalizer: Normalizer,
    /// Training features after min-max normalization, row-aligned with
    /// `targets`.
    pub points: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
}

/// Manhattan distance: sum of absolute coordinate differences.
fn manhattan(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Fits the model: learns the normalizer from the raw training features
/// and stores the normalized matrix. Requires at least `k` samples.
pub fn knn_fit(x_raw: &[Vec<f64>], y: &[f64], cfg: &KnnConfig) -> Result<KnnRegressor> {
    if cfg.k < 1 {
        return Err(Error::Training("k must be at least 1".into()));
    }
    if x_raw.len() != y.len() {
        return Err(Error::Training(format!(
            "{} feature rows but {} targets",
            x_raw.len(),
            y.len()
        )));
    }
    if x_raw.len() < cfg.k {
        return Err(Error::Training(format!(
            "k = {} exceeds the {} training samples",
            cfg.k,
            x_raw.len()
        )));
    }
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(Error::Training(format!("target {i} is not finite")));
    }
    let normalizer = Normalizer::fit(x_raw)?;
    Ok(KnnRegressor {
        k: cfg.k,
        normalizer: normalizer.clone(),
        points: normalizer.transform(x_raw),
        targets: y.to_vec(),
    })
}

impl KnnRegressor {
    /// Predicts one raw feature row: normalize, rank training points by
    /// `(distance, index)`, and average the targets of the k nearest in
    /// ascending index order.
    pub fn predict_row(&self, raw: &[f64]) -> Result<f64> {
        self.predict_row_with(raw, &mut Vec::new())
    }

    /// [`predict_row`] with a caller-owned scratch ranking buffer, so bulk
    /// prediction does not reallocate one training-set-sized vector per
    /// query.
    fn predict_row_with(&self, raw: &[f64], ranked: &mut Vec<(f64, usize)>) -> Result<f64> {
        if raw.len() != self.normalizer.width() {
            return Err(Error::Validation(format!(
                "feature row has {} values, model expects {}",
                raw.len(),
                self.normalizer.width()
            )));
        }
        let q = self.normalizer.transform_row(raw);
        ranked.clear();
        ranked.extend(
            self.points
                .iter()
                .enumerate()
                .map(|(i, p)| (manhattan(&q, p), i)),
        );
        // Lexicographic (distance, index) order puts ties at the k-th
        // distance onto the lowest training index.
        ranked.select_nth_unstable_by(self.k - 1, |a, b| {
            a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1))
        });
        let mut chosen: Vec<usize> = ranked[..self.k].iter().map(|&(_, i)| i).collect();
        chosen.sort_unstable();
        let sum: f64 = chosen.iter().map(|&i| self.targets[i]).sum();
        Ok(sum / self.k as f64)
    }

    /// Batch prediction, parallel over query rows with one scratch buffer
    /// per worker. Each row's result is computed independently, so the
    /// output is identical to the serial row-by-row loop for any thread
    /// count.
    pub fn predict(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
        use rayon::prelude::*;
        rows.par_iter()
            .map_init(
                || Vec::with_capacity(self.points.len()),
                |scratch, r| self.predict_row_with(r, scratch),
            )
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fit(xs: &[Vec<f64>], ys: &[f64], k: usize) -> KnnRegressor {
        knn_fit(xs, ys, &KnnConfig { k }).unwrap()
    }

    /// Full-sort reference: rank every training point by (distance,
    /// index) with a complete stable sort, then average the first k
    /// targets in ascending index order.
    fn oracle_predict(model: &KnnRegressor, raw: &[f64]) -> f64 {
        let q = model.normalizer.transform_row(raw);
        let mut all: Vec<(f64, usize)> = model
            .points
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let d = p.iter().zip(&q).map(|(a, b)| (a - b).abs()).sum::<f64>();
                (d, i)
            })
            .collect();
        all.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        let mut idx: Vec<usize> = all[..model.k].iter().map(|&(_, i)| i).collect();
        idx.sort_unstable();
        idx.iter().map(|&i| model.targets[i]).sum::<f64>() / model.k as f64
    }

    #[test]
    fn two_point_line_nearest_and_mean() {
        let xs = vec![vec![0.0], vec![10.0]];
        let ys = [10.0, 20.0];
        let m1 = fit(&xs, &ys, 1);
        assert_eq!(m1.predict_row(&[1.0]).unwrap(), 10.0, "closer to x = 0");
        let m2 = fit(&xs, &ys, 2);
        assert_eq!(m2.predict_row(&[1.0]).unwrap(), 15.0, "mean of both");
    }

    #[test]
    fn matches_full_sort_oracle_bitwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let xs: Vec<Vec<f64>> = (0..200)
            .map(|_| {
                vec![
                    rng.gen_range(0.0..100.0),
                    rng.gen_range(-50.0..50.0),
                    (rng.gen_range(0..4) as f64), // quantized: forces distance ties
                ]
            })
            .collect();
        let ys: Vec<f64> = (0..200).map(|_| rng.gen_range(60.0..160.0)).collect();
        for &k in &[1, 5, 30, 200] {
            let m = fit(&xs, &ys, k);
            for _ in 0..25 {
                let q = vec![
                    rng.gen_range(0.0..100.0),
                    rng.gen_range(-50.0..50.0),
                    (rng.gen_range(0..4) as f64),
                ];
                let got = m.predict_row(&q).unwrap();
                let want = oracle_predict(&m, &q);
                assert_eq!(got.to_bits(), want.to_bits(), "k = {k}");
            }
        }
    }

    #[test]
    fn k_equal_n_returns_the_global_mean_everywhere() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let xs: Vec<Vec<f64>> = (0..64).map(|_| vec![rng.gen_range(0.0..9.0)]).collect();
        let ys: Vec<f64> = (0..64).map(|_| rng.gen_range(0.0..9.0)).collect();
        let m = fit(&xs, &ys, 64);
        let mean = ys.iter().sum::<f64>() / 64.0;
        for q in [-100.0, 0.0, 4.5, 1e6] {
            assert_eq!(
                m.predict_row(&[q]).unwrap().to_bits(),
                mean.to_bits(),
                "full neighborhood is the global mean regardless of query"
            );
        }
    }

    #[test]
    fn training_point_with_unique_features_is_its_own_nearest() {
        let xs = vec![vec![1.0, 4.0], vec![2.0, 2.0], vec![8.0, 1.0]];
        let ys = [11.0, 22.0, 33.0];
        let m = fit(&xs, &ys, 1);
        for (x, &y) in xs.iter().zip(&ys) {
            assert_eq!(m.predict_row(x).unwrap(), y);
        }
    }

    #[test]
    fn duplicate_points_tie_break_to_the_lowest_index() {
        let xs = vec![vec![5.0], vec![5.0], vec![9.0]];
        let ys = [1.0, 100.0, 7.0];
        let m = fit(&xs, &ys, 1);
        assert_eq!(
            m.predict_row(&[5.0]).unwrap(),
            1.0,
            "equal distances resolve to the earliest training sample"
        );
    }

    #[test]
    fn rescaling_a_raw_feature_consistently_leaves_predictions_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let xs: Vec<Vec<f64>> = (0..60)
            .map(|_| vec![rng.gen_range(0.0..10.0), rng.gen_range(0.0..1.0)])
            .collect();
        let ys: Vec<f64> = (0..60).map(|_| rng.gen_range(50.0..150.0)).collect();
        let scaled: Vec<Vec<f64>> = xs.iter().map(|r| vec![r[0] * 1000.0, r[1]]).collect();
        let m = fit(&xs, &ys, 7);
        let ms = fit(&scaled, &ys, 7);
        for _ in 0..20 {
            let q = vec![rng.gen_range(0.0..10.0), rng.gen_range(0.0..1.0)];
            let qs = vec![q[0] * 1000.0, q[1]];
            let a = m.predict_row(&q).unwrap();
            let b = ms.predict_row(&qs).unwrap();
            assert!(
                (a - b).abs() < 1e-9,
                "normalization must absorb the rescaling: {a} vs {b}"
            );
        }
    }

    #[test]
    fn k_larger_than_training_set_is_rejected_at_fit() {
        let xs = vec![vec![0.0], vec![1.0]];
        let err = knn_fit(&xs, &[1.0, 2.0], &KnnConfig { k: 3 }).unwrap_err();
        assert_eq!(err.exit_code(), 3);
        assert!(err.to_string().contains("k = 3"), "{err}");
    }

    #[test]
    fn width_mismatch_at_predict_is_a_validation_error() {
        let xs = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        let m = fit(&xs, &[1.0, 2.0], 1);
        let err = m.predict_row(&[0.5]).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
