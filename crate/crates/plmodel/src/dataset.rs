//! Feature datasets assembled from coverage sweeps: sample schema, CSV
//! persistence, train/test splitting, k-fold partitioning, and min-max
//! feature normalization.

use crate::error::{Error, Result};
use crate::raysim::{realize_coverage, trace_grid_geometry, CoverageGrid, SimConfig};
use crate::scene::{ReceiverGrid, Scene, TransmitterSite};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Model input features, in the column order fed to every regressor.
pub const FEATURE_NAMES: [&str; 8] = [
    "h_tx_m",
    "p_tx_dbm",
    "f_ghz",
    "distance_m",
    "elevation_deg",
    "los",
    "dlat_deg",
    "dlon_deg",
];

/// On-disk CSV schema. The features come first (after the site tag), then
/// bookkeeping columns, then the regression target.
pub const CSV_COLUMNS: [&str; 12] = [
    "site",
    "h_tx_m",
    "p_tx_dbm",
    "f_ghz",
    "distance_m",
    "elevation_deg",
    "los",
    "dlat_deg",
    "dlon_deg",
    "azimuth_deg",
    "p_rx_dbm",
    "pl_db",
];

/// One labeled link: transmitter configuration, receiver geometry, and
/// the simulated path loss.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub site: String,
    pub h_tx_m: f64,
    pub p_tx_dbm: f64,
    pub f_ghz: f64,
    /// 3-D transmitter-receiver separation.
    pub distance_m: f64,
    /// Elevation of the transmitter as seen from the receiver, degrees
    /// above the horizontal.
    pub elevation_deg: f64,
    pub los: bool,
    /// Receiver latitude minus transmitter latitude, degrees.
    pub dlat_deg: f64,
    /// Receiver longitude minus transmitter longitude, degrees.
    pub dlon_deg: f64,
    /// Bearing from transmitter to receiver, degrees clockwise from
    /// north, in `[0, 360)`.
    pub azimuth_deg: f64,
    pub p_rx_dbm: f64,
    pub pl_db: f64,
}

impl Sample {
    /// Feature vector in [`FEATURE_NAMES`] order; `los` encodes as 1/0.
    pub fn features(&self) -> Vec<f64> {
        vec![
            self.h_tx_m,
            self.p_tx_dbm,
            self.f_ghz,
            self.distance_m,
            self.elevation_deg,
            if self.los { 1.0 } else { 0.0 },
            self.dlat_deg,
            self.dlon_deg,
        ]
    }
}

/// An ordered collection of samples.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub samples: Vec<Sample>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Feature matrix in [`FEATURE_NAMES`] order, one row per sample.
    pub fn features(&self) -> Vec<Vec<f64>> {
        self.samples.iter().map(Sample::features).collect()
    }

    /// Regression targets (path loss in dB).
    pub fn targets(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.pl_db).collect()
    }

    /// Line-of-sight flags, aligned with rows.
    pub fn los_flags(&self) -> Vec<bool> {
        self.samples.iter().map(|s| s.los).collect()
    }

    pub fn merge(&mut self, other: Dataset) {
        self.samples.extend(other.samples);
    }

    /// Converts one realized coverage grid into samples, skipping cells
    /// without received power. `h_tx_m` is the antenna height above
    /// ground at the site.
    pub fn from_coverage(
        scene: &Scene,
        site_name: &str,
        h_tx_m: f64,
        cov: &CoverageGrid,
    ) -> Result<Dataset> {
        let (tx_lat, tx_lon) = scene.geodetic_from_local(cov.tx.xy())?;
        let mut samples = Vec::new();
        for cell in &cov.cells {
            let (p_rx, pl) = match (cell.p_rx_dbm, cell.path_loss_db) {
                (Some(p), Some(l)) => (p, l),
                _ => continue,
            };
            let dx = cell.x_m - cov.tx.x;
            let dy = cell.y_m - cov.tx.y;
            let horiz = dx.hypot(dy);
            let elevation_deg = (cov.tx.z - cell.z_m).atan2(horiz).to_degrees();
            let azimuth_deg = {
                let a = dx.atan2(dy).to_degrees();
                if a < 0.0 {
                    a + 360.0
                } else {
                    a
                }
            };
            samples.push(Sample {
                site: site_name.to_string(),
                h_tx_m,
                p_tx_dbm: cov.p_tx_dbm,
                f_ghz: cov.frequency_ghz,
                distance_m: cell.distance_3d_m,
                elevation_deg,
                los: cell.los,
                dlat_deg: cell.lat_deg - tx_lat,
                dlon_deg: cell.lon_deg - tx_lon,
                azimuth_deg,
                p_rx_dbm: p_rx,
                pl_db: pl,
            });
        }
        Ok(Dataset { samples })
    }

    /// Writes the dataset as CSV in [`CSV_COLUMNS`] order. Floats print
    /// in shortest round-trip form, so loading the file back reproduces
    /// every value bit-exactly.
    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            w.write_record(CSV_COLUMNS)
                .map_err(|e| Error::Io(std::io::Error::other(e)))?;
            for s in &self.samples {
                w.write_record([
                    s.site.clone(),
                    format!("{}", s.h_tx_m),
                    format!("{}", s.p_tx_dbm),
                    format!("{}", s.f_ghz),
                    format!("{}", s.distance_m),
                    format!("{}", s.elevation_deg),
                    if s.los { "1".into() } else { "0".into() },
                    format!("{}", s.dlat_deg),
                    format!("{}", s.dlon_deg),
                    format!("{}", s.azimuth_deg),
                    format!("{}", s.p_rx_dbm),
                    format!("{}", s.pl_db),
                ])
                .map_err(|e| Error::Io(std::io::Error::other(e)))?;
            }
            w.flush()?;
        }
        crate::write_atomic(path, &buf)
    }

    /// Loads a dataset CSV, insisting on the exact [`CSV_COLUMNS`] header
    /// and validating every row (finite positive path loss, binary `los`).
    /// Errors carry the 1-based data row number.
    pub fn load_csv(path: &Path) -> Result<Dataset> {
        let mut rdr = csv::Reader::from_path(path)
            .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        let headers = rdr
            .headers()
            .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?
            .clone();
        let got: Vec<&str> = headers.iter().collect();
        if got != CSV_COLUMNS {
            let missing: Vec<&str> = CSV_COLUMNS
                .iter()
                .filter(|c| !got.contains(c))
                .copied()
                .collect();
            let extra: Vec<&str> = got
                .iter()
                .filter(|c| !CSV_COLUMNS.contains(c))
                .copied()
                .collect();
            return Err(Error::Schema(format!(
                "{}: header mismatch (missing: [{}], unexpected: [{}])",
                path.display(),
                missing.join(", "),
                extra.join(", ")
            )));
        }

        let mut samples = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let row = i + 1;
            let rec = rec.map_err(|e| Error::Parse(format!("row {row}: {e}")))?;
            if rec.len() != CSV_COLUMNS.len() {
                return Err(Error::Parse(format!(
                    "row {row}: expected {} fields, found {}",
                    CSV_COLUMNS.len(),
                    rec.len()
                )));
            }
            let f = |idx: usize| -> Result<f64> {
                rec[idx].parse::<f64>().map_err(|_| {
                    Error::Parse(format!(
                        "row {row}: field \"{}\" is not a number: {:?}",
                        CSV_COLUMNS[idx], &rec[idx]
                    ))
                })
            };
            let los = match &rec[6] {
                "1" => true,
                "0" => false,
                other => {
                    return Err(Error::Validation(format!(
                        "row {row}: los must be 0 or 1, found {other:?}"
                    )))
                }
            };
            let pl_db = f(11)?;
            if !pl_db.is_finite() || pl_db <= 0.0 {
                return Err(Error::Validation(format!(
                    "row {row}: path loss must be finite and positive, found {pl_db}"
                )));
            }
            samples.push(Sample {
                site: rec[0].to_string(),
                h_tx_m: f(1)?,
                p_tx_dbm: f(2)?,
                f_ghz: f(3)?,
                distance_m: f(4)?,
                elevation_deg: f(5)?,
                los,
                dlat_deg: f(7)?,
                dlon_deg: f(8)?,
                azimuth_deg: f(9)?,
                p_rx_dbm: f(10)?,
                pl_db,
            });
        }
        Ok(Dataset { samples })
    }

    /// Splits into train and test sets by shuffling with a seeded
    /// generator; the test set takes `round(test_fraction * n)` samples.
    pub fn train_test_split(&self, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
        if !(0.0..1.0).contains(&test_fraction) {
            return Err(Error::Validation(format!(
                "test fraction must be in [0, 1), got {test_fraction}"
            )));
        }
        let n = self.samples.len();
        let n_test = (test_fraction * n as f64).round() as usize;
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let test = Dataset {
            samples: idx[..n_test].iter().map(|&i| self.samples[i].clone()).collect(),
        };
        let train = Dataset {
            samples: idx[n_test..].iter().map(|&i| self.samples[i].clone()).collect(),
        };
        Ok((train, test))
    }

    /// K-fold index partition after a seeded shuffle. Fold sizes differ by
    /// at most one. Returns `(train_indices, validation_indices)` pairs.
    pub fn kfold(&self, k: usize, seed: u64) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
        let n = self.samples.len();
        if k < 2 {
            return Err(Error::Training(format!("k-fold needs k >= 2, got {k}")));
        }
        if k > n {
            return Err(Error::Training(format!(
                "cannot split {n} samples into {k} folds"
            )));
        }
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        // First (n % k) folds take one extra sample.
        let base = n / k;
        let extra = n % k;
        let mut folds = Vec::with_capacity(k);
        let mut start = 0;
        for f in 0..k {
            let size = base + usize::from(f < extra);
            folds.push(idx[start..start + size].to_vec());
            start += size;
        }
        Ok((0..k)
            .map(|f| {
                let val = folds[f].clone();
                let train = folds
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != f)
                    .flat_map(|(_, v)| v.iter().copied())
                    .collect();
                (train, val)
            })
            .collect())
    }
}

/// Sweep axes for dataset generation: every combination of antenna
/// height, carrier frequency, and transmit power runs over the full grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub heights_m: Vec<f64>,
    pub frequencies_ghz: Vec<f64>,
    pub powers_w: Vec<f64>,
}

/// Runs a full parameter sweep for one site. Path geometry is traced once
/// per antenna height and re-realized per carrier and power, which keeps
/// the sweep orders of magnitude cheaper than independent runs. Sample
/// order is deterministic: heights, then frequencies, then powers, then
/// grid cells row-major.
pub fn sweep(
    scene: &Scene,
    site: &TransmitterSite,
    grid: &ReceiverGrid,
    cfg: &SimConfig,
    spec: &SweepSpec,
) -> Result<Dataset> {
    if spec.heights_m.is_empty() || spec.frequencies_ghz.is_empty() || spec.powers_w.is_empty() {
        return Err(Error::Validation("sweep axes must all be non-empty".into()));
    }
    let mut out = Dataset::default();
    for &h in &spec.heights_m {
        let site_h = TransmitterSite {
            height_agl_m: h,
            ..site.clone()
        };
        let geom = trace_grid_geometry(scene, &site_h, grid, cfg)?;
        for &f in &spec.frequencies_ghz {
            for &p_w in &spec.powers_w {
                let p_dbm = 10.0 * (1000.0 * p_w).log10();
                let cov = realize_coverage(scene, &geom, f, cfg.polarization, p_dbm, site.gain_dbi)?;
                out.merge(Dataset::from_coverage(scene, &site.name, h, &cov)?);
            }
        }
    }
    Ok(out)
}

/// Per-column min-max normalizer fitted on training features only.
/// Transforms map the training minimum to 0 and maximum to 1; constant
/// columns map to 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mins: Vec<f64>,
    pub maxs: Vec<f64>,
}

impl Normalizer {
    pub fn fit(rows: &[Vec<f64>]) -> Result<Normalizer> {
        let width = rows.first().map(|r| r.len()).ok_or_else(|| {
            Error::Training("cannot fit a normalizer on an empty feature matrix".into())
        })?;
        let mut mins = vec![f64::INFINITY; width];
        let mut maxs = vec![f64::NEG_INFINITY; width];
        for row in rows {
            if row.len() != width {
                return Err(Error::Training("ragged feature matrix".into()));
            }
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::Training(format!(
                        "non-finite feature value {v} in column {j}"
                    )));
                }
                mins[j] = mins[j].min(v);
                maxs[j] = maxs[j].max(v);
            }
        }
        Ok(Normalizer { mins, maxs })
    }

    pub fn width(&self) -> usize {
        self.mins.len()
    }

    pub fn transform_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .enumerate()
            .map(|(j, &v)| {
                let span = self.maxs[j] - self.mins[j];
                if span > 0.0 {
                    (v - self.mins[j]) / span
                } else {
                    0.0
                }
            })
            .collect()
    }

    pub fn transform(&self, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        rows.iter().map(|r| self.transform_row(r)).collect()
    }
}
