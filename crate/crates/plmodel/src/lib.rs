//! Path-loss modeling toolkit for suburban radio links.
//!
//! The crate covers an end-to-end workflow: synthesize a 2.5-D scene of
//! extruded buildings ([`scene`]), trace multipath propagation with a
//! deterministic image-method simulator ([`raysim`]), compute closed-form
//! baselines ([`empirical`]), assemble feature datasets ([`dataset`]),
//! train from-scratch regressors ([`ml`]), and score predictions with
//! line-of-sight-stratified error metrics ([`metrics`]). The [`pipeline`]
//! module chains all of it into a reproducible study.
//!
//! The primary interface is the `examples/` directory — each example is a
//! runnable walkthrough of one capability:
//!
//! - `scene_generation`: synthesize and validate a random suburban scene.
//! - `multipath_tracing`: trace reflections to a single receiver and
//!   inspect each path.
//! - `coverage_map`: sweep a receiver lattice and export CSV + PGM maps.
//! - `empirical_models`: free-space, fitted close-in, and 1.5 GHz hata-style
//!   suburban predictions side by side.
//! - `dataset_pipeline`: build, split, and normalize a training table.
//! - `train_and_evaluate`: fit tree, forest, and neighbor regressors and
//!   compare them against the baselines.
//! - `mlp_training`: train the neural regressor and watch convergence.
//! - `reproduce_study`: the full multi-site study at desk scale.
//!
//! A thin `plmodel` binary wraps the same entry points for shell use.
//!
//! Everything is deterministic: fixed-seed generators, ordered parallel
//! reductions, and shortest-round-trip float serialization make every
//! artifact byte-stable across runs and thread counts.

pub mod dataset;
pub mod empirical;
pub mod error;
pub mod geom;
pub mod metrics;
pub mod ml;
pub mod pipeline;
pub mod raysim;
pub mod scene;

pub use error::{Error, Result};

use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

/// Writes a file atomically: the bytes land in a temporary sibling first
/// and replace `path` with a single rename, so readers never observe a
/// half-written file. Parent directories are created as needed.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    static COUNTER: AtomicU64 = AtomicU64::new(0);
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let stem = path
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    let tmp = dir.join(format!(
        ".{stem}.{}.{}.tmp",
        std::process::id(),
        COUNTER.fetch_add(1, Ordering::Relaxed)
    ));
    if let Err(e) = std::fs::write(&tmp, bytes) {
        let _ = std::fs::remove_file(&tmp);
        return Err(e.into());
    }
    if let Err(e) = std::fs::rename(&tmp, path) {
        let _ = std::fs::remove_file(&tmp);
        return Err(e.into());
    }
    Ok(())
}
