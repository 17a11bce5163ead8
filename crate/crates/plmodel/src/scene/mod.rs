//! Scene model: a 2.5-D suburban site described by extruded building
//! footprints over terrain, with a material table and a geodetic anchor
//! that ties local metric coordinates to latitude/longitude.

mod generate;

pub use generate::{generate_scene, SceneGenSpec};

use crate::error::{Error, Result};
use crate::geom::{polygon_is_simple, signed_area_2x, Point2, Rect};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Mean-Earth radius for the equirectangular geodetic conversion, meters.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Local offsets are trusted only within this radius of the anchor.
pub const GEODETIC_VALIDITY_M: f64 = 100_000.0;

const SCENE_FILE_VERSION: u32 = 1;

/// Electromagnetic surface material. Conductivity may carry an optional
/// frequency exponent, in which case the effective value is
/// `conductivity_s_per_m * f_ghz^conductivity_exponent`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Material {
    pub name: String,
    pub rel_permittivity: f64,
    pub conductivity_s_per_m: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conductivity_exponent: Option<f64>,
}

impl Material {
    /// Effective conductivity in S/m at the given carrier frequency.
    pub fn conductivity_at(&self, f_ghz: f64) -> f64 {
        match self.conductivity_exponent {
            Some(e) => self.conductivity_s_per_m * f_ghz.powf(e),
            None => self.conductivity_s_per_m,
        }
    }

    /// Default concrete: relative permittivity 5.31 with a power-law
    /// conductivity fit, valid across the 1-10 GHz band simulated here.
    pub fn concrete() -> Material {
        Material {
            name: "concrete".into(),
            rel_permittivity: 5.31,
            conductivity_s_per_m: 0.0326,
            conductivity_exponent: Some(0.8095),
        }
    }
}

/// Terrain under the buildings. `Flat` is exact; `Grid` holds sampled
/// elevations on a regular cell grid (row-major, row 0 at `origin`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Terrain {
    Flat {
        elevation_m: f64,
        material: String,
    },
    Grid {
        origin: Point2,
        cell_size_m: f64,
        rows: usize,
        cols: usize,
        elevations_m: Vec<f64>,
        material: String,
    },
}

impl Terrain {
    pub fn material_name(&self) -> &str {
        match self {
            Terrain::Flat { material, .. } => material,
            Terrain::Grid { material, .. } => material,
        }
    }

    /// Ground elevation at a planar point. Grid terrain answers with the
    /// nearest cell sample; points outside the grid clamp to the border.
    pub fn elevation_at(&self, x: f64, y: f64) -> f64 {
        match self {
            Terrain::Flat { elevation_m, .. } => *elevation_m,
            Terrain::Grid {
                origin,
                cell_size_m,
                rows,
                cols,
                elevations_m,
                ..
            } => {
                let ci = (((x - origin.x) / cell_size_m).floor() as i64).clamp(0, *cols as i64 - 1);
                let ri = (((y - origin.y) / cell_size_m).floor() as i64).clamp(0, *rows as i64 - 1);
                elevations_m[ri as usize * cols + ci as usize]
            }
        }
    }

    pub fn is_flat(&self) -> bool {
        matches!(self, Terrain::Flat { .. })
    }
}

/// Extruded building: a simple counter-clockwise footprint polygon raised
/// `height_m` above the terrain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Building {
    pub footprint: Vec<Point2>,
    pub height_m: f64,
    pub material: String,
}

/// Geodetic anchor: the latitude/longitude of the local origin `(0, 0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoAnchor {
    pub lat_deg: f64,
    pub lon_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub anchor: GeoAnchor,
    pub bounds: Rect,
    pub materials: Vec<Material>,
    pub terrain: Terrain,
    pub buildings: Vec<Building>,
}

/// On-disk wrapper so the format can evolve behind a version gate.
#[derive(Debug, Serialize, Deserialize)]
struct SceneFile {
    version: u32,
    #[serde(flatten)]
    scene: Scene,
}

impl Scene {
    pub fn material(&self, name: &str) -> Option<&Material> {
        self.materials.iter().find(|m| m.name == name)
    }

    pub fn material_index(&self, name: &str) -> Option<usize> {
        self.materials.iter().position(|m| m.name == name)
    }

    pub fn terrain_elevation_at(&self, x: f64, y: f64) -> f64 {
        self.terrain.elevation_at(x, y)
    }

    /// Converts a local east/north offset in meters to latitude/longitude
    /// degrees using the equirectangular approximation around the anchor.
    pub fn geodetic_from_local(&self, p: Point2) -> Result<(f64, f64)> {
        if p.norm() > GEODETIC_VALIDITY_M {
            return Err(Error::Domain(format!(
                "point ({:.1}, {:.1}) is outside the {:.0} km geodetic validity radius",
                p.x,
                p.y,
                GEODETIC_VALIDITY_M / 1000.0
            )));
        }
        let lat = self.anchor.lat_deg + (p.y / EARTH_RADIUS_M).to_degrees();
        let lon = self.anchor.lon_deg
            + (p.x / (EARTH_RADIUS_M * self.anchor.lat_deg.to_radians().cos())).to_degrees();
        Ok((lat, lon))
    }

    /// Inverse of [`geodetic_from_local`](Self::geodetic_from_local).
    pub fn local_from_geodetic(&self, lat_deg: f64, lon_deg: f64) -> Result<Point2> {
        let y = (lat_deg - self.anchor.lat_deg).to_radians() * EARTH_RADIUS_M;
        let x = (lon_deg - self.anchor.lon_deg).to_radians()
            * EARTH_RADIUS_M
            * self.anchor.lat_deg.to_radians().cos();
        let p = Point2::new(x, y);
        if p.norm() > GEODETIC_VALIDITY_M {
            return Err(Error::Domain(format!(
                "({lat_deg}, {lon_deg}) is outside the geodetic validity radius of the anchor"
            )));
        }
        Ok(p)
    }

    /// Normalizes footprint winding to counter-clockwise in place.
    pub fn normalize_winding(&mut self) {
        for b in &mut self.buildings {
            if signed_area_2x(&b.footprint) < 0.0 {
                b.footprint.reverse();
            }
        }
    }

    /// Structural validation. Messages name the offending element.
    pub fn validate(&self) -> Result<()> {
        if !(self.bounds.min_x < self.bounds.max_x && self.bounds.min_y < self.bounds.max_y) {
            return Err(Error::Validation("scene bounds are empty".into()));
        }
        if self.materials.is_empty() {
            return Err(Error::Validation("material table is empty".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for m in &self.materials {
            if !seen.insert(m.name.as_str()) {
                return Err(Error::Validation(format!(
                    "duplicate material name \"{}\"",
                    m.name
                )));
            }
            if !(m.rel_permittivity >= 1.0 && m.rel_permittivity.is_finite()) {
                return Err(Error::Validation(format!(
                    "material \"{}\": rel_permittivity must be >= 1",
                    m.name
                )));
            }
            if !(m.conductivity_s_per_m >= 0.0 && m.conductivity_s_per_m.is_finite()) {
                return Err(Error::Validation(format!(
                    "material \"{}\": conductivity must be >= 0",
                    m.name
                )));
            }
        }
        let tm = self.terrain.material_name();
        if self.material(tm).is_none() {
            return Err(Error::Validation(format!(
                "terrain references unknown material \"{tm}\""
            )));
        }
        if let Terrain::Grid {
            cell_size_m,
            rows,
            cols,
            elevations_m,
            ..
        } = &self.terrain
        {
            if *cell_size_m <= 0.0 {
                return Err(Error::Validation("terrain cell size must be positive".into()));
            }
            if elevations_m.len() != rows * cols {
                return Err(Error::Validation(format!(
                    "terrain grid declares {rows}x{cols} cells but carries {} elevations",
                    elevations_m.len()
                )));
            }
            if elevations_m.iter().any(|e| !e.is_finite()) {
                return Err(Error::Validation("terrain elevations must be finite".into()));
            }
        }
        for (i, b) in self.buildings.iter().enumerate() {
            if b.footprint.len() < 3 {
                return Err(Error::Validation(format!(
                    "building {i}: footprint needs at least 3 vertices"
                )));
            }
            if !polygon_is_simple(&b.footprint) {
                return Err(Error::Validation(format!(
                    "building {i}: footprint polygon self-intersects or is degenerate"
                )));
            }
            let area2 = signed_area_2x(&b.footprint);
            if area2.abs() < 1e-9 {
                return Err(Error::Validation(format!("building {i}: footprint area is zero")));
            }
            if area2 < 0.0 {
                return Err(Error::Validation(format!(
                    "building {i}: footprint winding is clockwise (normalize on load)"
                )));
            }
            if !(b.height_m > 0.0 && b.height_m.is_finite()) {
                return Err(Error::Validation(format!(
                    "building {i}: height must be positive"
                )));
            }
            if self.material(&b.material).is_none() {
                return Err(Error::Validation(format!(
                    "building {i} references unknown material \"{}\"",
                    b.material
                )));
            }
            let bb = Rect::of_points(&b.footprint);
            if !self.bounds.contains_rect(&bb) {
                return Err(Error::Validation(format!(
                    "building {i}: footprint extends outside the scene bounds"
                )));
            }
        }
        Ok(())
    }

    /// Parses, normalizes winding, and validates a scene document.
    pub fn from_json_str(s: &str) -> Result<Scene> {
        let file: SceneFile = serde_json::from_str(s)
            .map_err(|e| Error::Parse(format!("scene document: {e}")))?;
        if file.version != SCENE_FILE_VERSION {
            return Err(Error::Schema(format!(
                "unsupported scene version {} (expected {})",
                file.version, SCENE_FILE_VERSION
            )));
        }
        let mut scene = file.scene;
        scene.normalize_winding();
        scene.validate()?;
        Ok(scene)
    }

    /// Canonical serialization: pretty JSON with a fixed field order and a
    /// trailing newline, so load -> save is byte-stable.
    pub fn to_json_string(&self) -> String {
        let file = SceneFile {
            version: SCENE_FILE_VERSION,
            scene: self.clone(),
        };
        let mut s = serde_json::to_string_pretty(&file).expect("scene serializes");
        s.push('\n');
        s
    }

    pub fn load(path: &Path) -> Result<Scene> {
        let text = std::fs::read_to_string(path)?;
        Scene::from_json_str(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::write_atomic(path, self.to_json_string().as_bytes())
    }
}

/// A fixed transmitter. `position` is in local meters; the antenna sits
/// `height_agl_m` above the terrain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransmitterSite {
    pub name: String,
    pub position: Point2,
    pub height_agl_m: f64,
    pub power_w: f64,
    pub gain_dbi: f64,
}

impl TransmitterSite {
    pub fn validate(&self) -> Result<()> {
        if !(self.height_agl_m > 0.0) {
            return Err(Error::Validation(format!(
                "site \"{}\": transmitter height must be positive",
                self.name
            )));
        }
        if !(self.power_w > 0.0) {
            return Err(Error::Validation(format!(
                "site \"{}\": transmit power must be positive",
                self.name
            )));
        }
        Ok(())
    }

    /// Transmit power in dBm: `10 log10(1000 * P_watts)`.
    pub fn power_dbm(&self) -> f64 {
        10.0 * (1000.0 * self.power_w).log10()
    }
}

/// Receiver lattice over a rectangular extent. Cell centers sit half a
/// spacing inside the extent edges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReceiverGrid {
    pub extent: Rect,
    pub spacing_m: f64,
    pub rx_height_m: f64,
    pub rx_gain_dbi: f64,
    pub max_distance_m: f64,
}

impl ReceiverGrid {
    pub fn validate(&self) -> Result<()> {
        if !(self.extent.min_x < self.extent.max_x && self.extent.min_y < self.extent.max_y) {
            return Err(Error::Validation("receiver grid extent is empty".into()));
        }
        if !(self.spacing_m > 0.0) {
            return Err(Error::Validation("receiver grid spacing must be positive".into()));
        }
        if !(self.rx_height_m > 0.0) {
            return Err(Error::Validation("receiver height must be positive".into()));
        }
        if !(self.max_distance_m > 0.0) {
            return Err(Error::Validation("max distance must be positive".into()));
        }
        Ok(())
    }

    pub fn n_cols(&self) -> usize {
        (((self.extent.max_x - self.extent.min_x) / self.spacing_m).floor() as usize).max(1)
    }

    pub fn n_rows(&self) -> usize {
        (((self.extent.max_y - self.extent.min_y) / self.spacing_m).floor() as usize).max(1)
    }

    /// Center of cell `(ix, iy)`; `iy` counts rows from the south edge.
    pub fn cell_center(&self, ix: usize, iy: usize) -> Point2 {
        Point2::new(
            self.extent.min_x + (ix as f64 + 0.5) * self.spacing_m,
            self.extent.min_y + (iy as f64 + 0.5) * self.spacing_m,
        )
    }
}
