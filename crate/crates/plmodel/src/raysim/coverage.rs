//! Coverage-grid sweeps. Path geometry is frequency- and power-independent,
//! so the expensive trace runs once per transmitter and the cheap field
//! summation re-runs per carrier — the key to affordable parameter sweeps.

use super::{
    path_loss_db, realize_path, received_power_dbm, GeomPath, PathTracer, Polarization, SimConfig,
};
use crate::error::{Error, Result};
use crate::geom::Point3;
use crate::scene::{ReceiverGrid, Scene, TransmitterSite};
use rayon::prelude::*;
use std::path::Path;

/// Traced geometry for one cell of the receiver lattice.
#[derive(Debug, Clone)]
pub struct CellGeometry {
    pub rx: Point3,
    pub distance_3d_m: f64,
    pub los: bool,
    pub paths: Vec<GeomPath>,
}

/// Frequency-independent tracing product: every valid path from one
/// transmitter to every grid cell. Cells are row-major with row 0 on the
/// south edge of the extent.
#[derive(Debug, Clone)]
pub struct GridGeometry {
    pub grid: ReceiverGrid,
    pub tx: Point3,
    pub n_cols: usize,
    pub n_rows: usize,
    pub cells: Vec<CellGeometry>,
}

/// Traces all paths from `site` to every cell of `grid`. The grid's own
/// `max_distance_m` caps path length (overriding the value in `cfg`), so
/// one simulator config can serve grids of different reach.
pub fn trace_grid_geometry(
    scene: &Scene,
    site: &TransmitterSite,
    grid: &ReceiverGrid,
    cfg: &SimConfig,
) -> Result<GridGeometry> {
    scene.validate()?;
    site.validate()?;
    grid.validate()?;
    let mut cfg = *cfg;
    cfg.max_distance_m = grid.max_distance_m;
    let tx = super::tx_position(scene, site);
    let tracer = PathTracer::new(scene, tx, &cfg)?;

    let n_cols = grid.n_cols();
    let n_rows = grid.n_rows();
    // Independent per-cell work over an indexed iterator: rayon's collect
    // preserves order, so the result is identical at any thread count.
    let cells: Vec<CellGeometry> = (0..n_rows * n_cols)
        .into_par_iter()
        .map(|idx| {
            let (iy, ix) = (idx / n_cols, idx % n_cols);
            let c = grid.cell_center(ix, iy);
            let ground = scene.terrain_elevation_at(c.x, c.y);
            let rx = Point3::new(c.x, c.y, ground + grid.rx_height_m);
            CellGeometry {
                rx,
                distance_3d_m: tx.dist(rx),
                los: tracer.line_of_sight(rx),
                paths: tracer.paths_to(rx),
            }
        })
        .collect();

    Ok(GridGeometry {
        grid: grid.clone(),
        tx,
        n_cols,
        n_rows,
        cells,
    })
}

/// One realized coverage cell. Power is absent where no path reaches the
/// receiver (blocked and out of reflective range, or beyond the cap).
#[derive(Debug, Clone)]
pub struct CoverageCell {
    pub x_m: f64,
    pub y_m: f64,
    pub z_m: f64,
    pub lat_deg: f64,
    pub lon_deg: f64,
    pub distance_3d_m: f64,
    pub los: bool,
    pub p_rx_dbm: Option<f64>,
    pub path_loss_db: Option<f64>,
}

/// Received power and path loss over a lattice at one carrier / transmit
/// power combination. Row-major, row 0 on the south edge.
#[derive(Debug, Clone)]
pub struct CoverageGrid {
    pub n_cols: usize,
    pub n_rows: usize,
    pub spacing_m: f64,
    pub frequency_ghz: f64,
    pub p_tx_dbm: f64,
    pub g_tx_dbi: f64,
    pub g_rx_dbi: f64,
    pub tx: Point3,
    pub cells: Vec<CoverageCell>,
}

impl CoverageGrid {
    pub fn cell(&self, ix: usize, iy: usize) -> &CoverageCell {
        &self.cells[iy * self.n_cols + ix]
    }

    /// Fraction of cells with any received power.
    pub fn covered_fraction(&self) -> f64 {
        if self.cells.is_empty() {
            return 0.0;
        }
        self.cells.iter().filter(|c| c.p_rx_dbm.is_some()).count() as f64
            / self.cells.len() as f64
    }
}

/// Realizes traced geometry into received power at carrier `f_ghz` with
/// transmit power `p_tx_dbm` and antenna gain `g_tx_dbi`.
pub fn realize_coverage(
    scene: &Scene,
    geom: &GridGeometry,
    f_ghz: f64,
    pol: Polarization,
    p_tx_dbm: f64,
    g_tx_dbi: f64,
) -> Result<CoverageGrid> {
    let g_rx = geom.grid.rx_gain_dbi;
    let cells: Result<Vec<CoverageCell>> = geom
        .cells
        .par_iter()
        .map(|cell| {
            let paths: Result<Vec<_>> = cell
                .paths
                .iter()
                .map(|g| realize_path(scene, g, f_ghz, pol))
                .collect();
            let paths = paths?;
            let p_rx = received_power_dbm(&paths, f_ghz, p_tx_dbm, g_tx_dbi, g_rx);
            let (lat, lon) = scene.geodetic_from_local(cell.rx.xy())?;
            Ok(CoverageCell {
                x_m: cell.rx.x,
                y_m: cell.rx.y,
                z_m: cell.rx.z,
                lat_deg: lat,
                lon_deg: lon,
                distance_3d_m: cell.distance_3d_m,
                los: cell.los,
                p_rx_dbm: p_rx,
                path_loss_db: p_rx.map(|p| path_loss_db(p_tx_dbm, g_tx_dbi, g_rx, p)),
            })
        })
        .collect();
    Ok(CoverageGrid {
        n_cols: geom.n_cols,
        n_rows: geom.n_rows,
        spacing_m: geom.grid.spacing_m,
        frequency_ghz: f_ghz,
        p_tx_dbm,
        g_tx_dbi,
        g_rx_dbi: g_rx,
        tx: geom.tx,
        cells: cells?,
    })
}

/// Traces and realizes in one call, using the site's own power and gain.
pub fn coverage(
    scene: &Scene,
    site: &TransmitterSite,
    grid: &ReceiverGrid,
    cfg: &SimConfig,
) -> Result<CoverageGrid> {
    let geom = trace_grid_geometry(scene, site, grid, cfg)?;
    realize_coverage(
        scene,
        &geom,
        cfg.frequency_ghz,
        cfg.polarization,
        site.power_dbm(),
        site.gain_dbi,
    )
}

/// Writes a coverage grid as CSV with columns
/// `x_m,y_m,lat,lon,distance_m,los,p_rx_dbm,pl_db`. Cells without power
/// leave the last two fields empty; `los` is `1`/`0`. Floats print in
/// shortest round-trip form, so reading the file back is bit-exact.
pub fn write_coverage_csv(cov: &CoverageGrid, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(["x_m", "y_m", "lat", "lon", "distance_m", "los", "p_rx_dbm", "pl_db"])
            .map_err(|e| Error::Io(std::io::Error::other(e)))?;
        for c in &cov.cells {
            w.write_record([
                format!("{}", c.x_m),
                format!("{}", c.y_m),
                format!("{}", c.lat_deg),
                format!("{}", c.lon_deg),
                format!("{}", c.distance_3d_m),
                if c.los { "1".into() } else { "0".into() },
                c.p_rx_dbm.map(|v| format!("{v}")).unwrap_or_default(),
                c.path_loss_db.map(|v| format!("{v}")).unwrap_or_default(),
            ])
            .map_err(|e| Error::Io(std::io::Error::other(e)))?;
        }
        w.flush()?;
    }
    crate::write_atomic(path, &buf)
}

/// Writes a binary PGM (P5) heat map of path loss. Present cells map
/// linearly from the grid's minimum loss (0, strongest) to its maximum
/// (254); uncovered cells render as 255. Rows are written north-up.
pub fn write_coverage_pgm(cov: &CoverageGrid, path: &Path) -> Result<()> {
    let present: Vec<f64> = cov.cells.iter().filter_map(|c| c.path_loss_db).collect();
    let (lo, hi) = present
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let span = (hi - lo).max(f64::MIN_POSITIVE);

    let mut buf = format!("P5\n{} {}\n255\n", cov.n_cols, cov.n_rows).into_bytes();
    for iy in (0..cov.n_rows).rev() {
        for ix in 0..cov.n_cols {
            let px = match cov.cell(ix, iy).path_loss_db {
                Some(v) if present.len() == 1 || hi == lo => {
                    let _ = v;
                    0u8
                }
                Some(v) => (((v - lo) / span) * 254.0).round().clamp(0.0, 254.0) as u8,
                None => 255u8,
            };
            buf.push(px);
        }
    }
    crate::write_atomic(path, &buf)
}
