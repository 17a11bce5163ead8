//! Deterministic multipath simulator: image-method path tracing over a
//! 2.5-D scene, Fresnel reflection coefficients, coherent field summation,
//! and coverage-grid sweeps.

mod coverage;
mod fresnel;
mod trace;

pub use coverage::{
    coverage, realize_coverage, trace_grid_geometry, write_coverage_csv, write_coverage_pgm,
    CoverageGrid, GridGeometry,
};
pub use fresnel::{complex_permittivity, fresnel_reflection, FieldPolarization};
pub use trace::{los_blocked, trace_geometry, GeomPath, PathTracer};

use crate::empirical::C_M_PER_S;
use crate::error::{Error, Result};
use crate::geom::Point3;
use crate::scene::{Scene, TransmitterSite};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Antenna polarization policy for reflection coefficients.
///
/// `SurfaceDependent` models a vertically polarized antenna: ground
/// bounces see the parallel (TM) coefficient, wall bounces the
/// perpendicular (TE) one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarization {
    Perpendicular,
    Parallel,
    #[default]
    SurfaceDependent,
}

/// Simulator configuration. `max_reflections` counts every bounce (ground
/// included); the default keeps it at 4, the deepest order the image
/// enumeration stays affordable at.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub max_reflections: usize,
    pub frequency_ghz: f64,
    pub max_distance_m: f64,
    pub polarization: Polarization,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            max_reflections: 4,
            frequency_ghz: 1.5,
            max_distance_m: 1500.0,
            polarization: Polarization::SurfaceDependent,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.1..=100.0).contains(&self.frequency_ghz) {
            return Err(Error::Validation(format!(
                "carrier frequency {} GHz outside the supported 0.1-100 GHz band",
                self.frequency_ghz
            )));
        }
        if !(self.max_distance_m > 0.0) {
            return Err(Error::Validation("max distance must be positive".into()));
        }
        Ok(())
    }
}

/// Surface class of one reflection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurfaceKind {
    Ground,
    Wall,
}

/// One bounce of a geometric path: which surface class, which material,
/// and the cosine of the incidence angle from the surface normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interaction {
    pub surface: SurfaceKind,
    pub material: usize,
    pub cos_incidence: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathKind {
    Direct,
    Reflected { order: usize },
}

/// A resolved propagation path at a specific carrier: geometry plus the
/// complex reflection coefficient of every bounce.
#[derive(Debug, Clone, PartialEq)]
pub struct RayPath {
    pub kind: PathKind,
    pub vertices: Vec<Point3>,
    pub length_m: f64,
    pub reflection_coeffs: Vec<Complex64>,
}

fn field_pol(surface: SurfaceKind, pol: Polarization) -> FieldPolarization {
    match pol {
        Polarization::Perpendicular => FieldPolarization::Perpendicular,
        Polarization::Parallel => FieldPolarization::Parallel,
        Polarization::SurfaceDependent => match surface {
            SurfaceKind::Ground => FieldPolarization::Parallel,
            SurfaceKind::Wall => FieldPolarization::Perpendicular,
        },
    }
}

/// Attaches reflection coefficients to a geometric path at carrier
/// `f_ghz`.
pub fn realize_path(
    scene: &Scene,
    geom: &GeomPath,
    f_ghz: f64,
    pol: Polarization,
) -> Result<RayPath> {
    let mut coeffs = Vec::with_capacity(geom.interactions.len());
    for inter in &geom.interactions {
        let material = scene.materials.get(inter.material).ok_or_else(|| {
            Error::Validation(format!("path references material index {}", inter.material))
        })?;
        let angle = inter.cos_incidence.clamp(-1.0, 1.0).acos();
        // Numerical grazing guard: the coefficient is continuous there.
        let angle = angle.min(std::f64::consts::FRAC_PI_2 - 1e-12);
        coeffs.push(fresnel_reflection(
            material,
            f_ghz,
            angle,
            field_pol(inter.surface, pol),
        )?);
    }
    Ok(RayPath {
        kind: if geom.interactions.is_empty() {
            PathKind::Direct
        } else {
            PathKind::Reflected {
                order: geom.interactions.len(),
            }
        },
        vertices: geom.vertices.clone(),
        length_m: geom.length_m,
        reflection_coeffs: coeffs,
    })
}

/// Traces every valid path between `tx` and `rx` and resolves reflection
/// coefficients at the carrier in `cfg`.
pub fn trace_paths(
    scene: &Scene,
    tx: Point3,
    rx: Point3,
    cfg: &SimConfig,
) -> Result<Vec<RayPath>> {
    let geoms = trace_geometry(scene, tx, rx, cfg)?;
    geoms
        .iter()
        .map(|g| realize_path(scene, g, cfg.frequency_ghz, cfg.polarization))
        .collect()
}

/// Coherent received power in dBm, or `None` when no path carries energy.
///
/// Each path contributes `(lambda / 4 pi L) * prod(Gamma) * exp(-j 2 pi L
/// / lambda)`; the power term is `20 log10 |sum|` on top of transmit power
/// and antenna gains. A sum cancelled below floating-point resolution
/// (relative to the total path amplitude) reports as absent rather than as
/// a spuriously deep fade.
pub fn received_power_dbm(
    paths: &[RayPath],
    f_ghz: f64,
    p_tx_dbm: f64,
    g_tx_dbi: f64,
    g_rx_dbi: f64,
) -> Option<f64> {
    if paths.is_empty() {
        return None;
    }
    let lambda = C_M_PER_S / (f_ghz * 1e9);
    let mut sum = Complex64::new(0.0, 0.0);
    let mut amp_total = 0.0;
    for p in paths {
        let mut a = Complex64::from_polar(
            lambda / (4.0 * std::f64::consts::PI * p.length_m),
            -2.0 * std::f64::consts::PI * p.length_m / lambda,
        );
        for g in &p.reflection_coeffs {
            a *= g;
        }
        amp_total += a.norm();
        sum += a;
    }
    let mag = sum.norm();
    if mag <= 1e-12 * amp_total || mag == 0.0 {
        return None;
    }
    Some(p_tx_dbm + g_tx_dbi + g_rx_dbi + 20.0 * mag.log10())
}

/// Link-budget path loss: `P_tx + G_tx + G_rx - P_rx`, all in dB terms.
pub fn path_loss_db(p_tx_dbm: f64, g_tx_dbi: f64, g_rx_dbi: f64, p_rx_dbm: f64) -> f64 {
    p_tx_dbm + g_tx_dbi + g_rx_dbi - p_rx_dbm
}

/// Antenna phase-center position of a site: terrain elevation plus the
/// antenna height above ground.
pub fn tx_position(scene: &Scene, site: &TransmitterSite) -> Point3 {
    let e = scene.terrain_elevation_at(site.position.x, site.position.y);
    Point3::new(site.position.x, site.position.y, e + site.height_agl_m)
}

/// Propagation outcome at one receiver location. Power is absent beyond
/// the distance cap or when no path reaches the receiver.
#[derive(Debug, Clone)]
pub struct PropagationResult {
    pub rx_position: Point3,
    pub distance_3d_m: f64,
    pub los: bool,
    pub paths: Vec<RayPath>,
    pub p_rx_dbm: Option<f64>,
    pub path_loss_db: Option<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::empirical::fspl_db;
    use crate::geom::{Point2, Rect};
    use crate::scene::{Building, GeoAnchor, Material, Scene, Terrain};

    fn open_scene() -> Scene {
        Scene {
            anchor: GeoAnchor { lat_deg: 22.3, lon_deg: 39.1 },
            bounds: Rect { min_x: -5000.0, min_y: -5000.0, max_x: 5000.0, max_y: 5000.0 },
            materials: vec![Material::concrete()],
            terrain: Terrain::Flat { elevation_m: 0.0, material: "concrete".into() },
            buildings: vec![],
        }
    }

    fn scene_with_box(min: (f64, f64), max: (f64, f64), h: f64) -> Scene {
        let mut s = open_scene();
        s.buildings.push(Building {
            footprint: vec![
                Point2::new(min.0, min.1),
                Point2::new(max.0, min.1),
                Point2::new(max.0, max.1),
                Point2::new(min.0, max.1),
            ],
            height_m: h,
            material: "concrete".into(),
        });
        s
    }

    fn cfg(order: usize) -> SimConfig {
        SimConfig {
            max_reflections: order,
            frequency_ghz: 1.5,
            max_distance_m: 5000.0,
            polarization: Polarization::SurfaceDependent,
        }
    }

    #[test]
    fn empty_scene_direct_only_at_order_zero() {
        let s = open_scene();
        let tx = Point3::new(0.0, 0.0, 10.0);
        let rx = Point3::new(100.0, 0.0, 1.5);
        let paths = trace_paths(&s, tx, rx, &cfg(0)).unwrap();
        assert_eq!(paths.len(), 1);
        assert_eq!(paths[0].kind, PathKind::Direct);
        assert!((paths[0].length_m - tx.dist(rx)).abs() < 1e-12);
        assert!(paths[0].reflection_coeffs.is_empty());
    }

    #[test]
    fn empty_scene_adds_ground_bounce_at_order_one() {
        let s = open_scene();
        let tx = Point3::new(0.0, 0.0, 10.0);
        let rx = Point3::new(100.0, 0.0, 1.5);
        let paths = trace_paths(&s, tx, rx, &cfg(1)).unwrap();
        assert_eq!(paths.len(), 2, "direct + ground bounce");
        let ground = &paths[1];
        assert_eq!(ground.kind, PathKind::Reflected { order: 1 });
        // Unfolded length: |image(tx) - rx| with tx mirrored to z = -10.
        let image = Point3::new(0.0, 0.0, -10.0);
        assert!((ground.length_m - image.dist(rx)).abs() < 1e-9);
        // The bounce point is on the ground plane.
        assert!(ground.vertices[1].z.abs() < 1e-9);
    }

    #[test]
    fn direct_path_respects_distance_cap() {
        let s = open_scene();
        let tx = Point3::new(0.0, 0.0, 10.0);
        let rx = Point3::new(2000.0, 0.0, 1.5);
        let mut c = cfg(0);
        c.max_distance_m = 1500.0;
        assert!(trace_paths(&s, tx, rx, &c).unwrap().is_empty());
    }

    #[test]
    fn wall_reflection_matches_fermat_oracle() {
        // Thin slab at x = 50..50.5; tx and rx on its -x side. The
        // single-bounce point on the x = 50 face must minimize total path
        // length (Fermat), found here by nested ternary search.
        let s = scene_with_box((50.0, -40.0), (50.5, 40.0), 15.0);
        let tx = Point3::new(0.0, -10.0, 8.0);
        let rx = Point3::new(5.0, 12.0, 2.0);
        let paths = trace_paths(&s, tx, rx, &cfg(1)).unwrap();
        let wall: Vec<&RayPath> = paths
            .iter()
            .filter(|p| p.kind == (PathKind::Reflected { order: 1 }) && p.vertices[1].z > 1e-6)
            .collect();
        assert_eq!(wall.len(), 1, "exactly one wall bounce: {paths:?}");
        let q = wall[0].vertices[1];
        assert!((q.x - 50.0).abs() < 1e-9, "bounce on the near face");

        // Oracle: minimize |tx-p| + |p-rx| over p = (50, y, z).
        let cost = |y: f64, z: f64| {
            let p = Point3::new(50.0, y, z);
            tx.dist(p) + p.dist(rx)
        };
        let mut ylo = -40.0;
        let mut yhi = 40.0;
        for _ in 0..200 {
            let y1 = ylo + (yhi - ylo) / 3.0;
            let y2 = yhi - (yhi - ylo) / 3.0;
            let best_z = |y: f64| {
                let (mut zlo, mut zhi) = (0.0, 15.0);
                for _ in 0..200 {
                    let z1 = zlo + (zhi - zlo) / 3.0;
                    let z2 = zhi - (zhi - zlo) / 3.0;
                    if cost(y, z1) < cost(y, z2) {
                        zhi = z2;
                    } else {
                        zlo = z1;
                    }
                }
                0.5 * (zlo + zhi)
            };
            if cost(y1, best_z(y1)) < cost(y2, best_z(y2)) {
                yhi = y2;
            } else {
                ylo = y1;
            }
        }
        let y_star = 0.5 * (ylo + yhi);
        let z_star = {
            let (mut zlo, mut zhi) = (0.0, 15.0);
            for _ in 0..200 {
                let z1 = zlo + (zhi - zlo) / 3.0;
                let z2 = zhi - (zhi - zlo) / 3.0;
                if cost(y_star, z1) < cost(y_star, z2) {
                    zhi = z2;
                } else {
                    zlo = z1;
                }
            }
            0.5 * (zlo + zhi)
        };
        assert!(
            (q.y - y_star).abs() < 1e-5 && (q.z - z_star).abs() < 1e-5,
            "bounce ({}, {}) vs oracle ({y_star}, {z_star})",
            q.y,
            q.z
        );
        assert!((wall[0].length_m - cost(y_star, z_star)).abs() < 1e-9);
    }

    #[test]
    fn specular_law_and_unfolded_length_hold() {
        let s = scene_with_box((30.0, -20.0), (45.0, 20.0), 12.0);
        let tx = Point3::new(0.0, 0.0, 9.0);
        let rx = Point3::new(10.0, 25.0, 1.5);
        let paths = trace_paths(&s, tx, rx, &cfg(2)).unwrap();
        assert!(paths.len() > 1, "expected reflections, got {}", paths.len());
        for p in &paths {
            // Segment-sum length must match the stored length.
            let mut sum = 0.0;
            for w in p.vertices.windows(2) {
                sum += w[0].dist(w[1]);
            }
            assert!((sum - p.length_m).abs() < 1e-9);
            // Specular law at every bounce: reflect the incoming direction
            // about the local normal and compare with the outgoing one.
            for j in 1..p.vertices.len() - 1 {
                let d_in = p.vertices[j].sub(p.vertices[j - 1]).normalized();
                let d_out = p.vertices[j + 1].sub(p.vertices[j]).normalized();
                // The bounce plane normal: ground (z) or a wall (from the
                // bisector of -d_in and d_out).
                let n = d_out.sub(d_in).normalized();
                let cos_in = -d_in.dot(n);
                let cos_out = d_out.dot(n);
                assert!(
                    (cos_in - cos_out).abs() < 1e-9,
                    "specular violation at bounce {j}: {cos_in} vs {cos_out}"
                );
            }
        }
    }

    #[test]
    fn blocked_direct_path_is_absent_and_los_false() {
        let s = scene_with_box((40.0, -10.0), (60.0, 10.0), 20.0);
        let tx = Point3::new(0.0, 0.0, 10.0);
        let rx = Point3::new(100.0, 0.0, 1.5);
        assert!(los_blocked(&s, tx, rx));
        let paths = trace_paths(&s, tx, rx, &cfg(0)).unwrap();
        assert!(paths.is_empty(), "no direct path through a 20 m slab");
        // Above the slab the segment clears. (At rx z = 35 the ray would
        // graze the top edge at exactly (40, 0, 20), which counts as
        // blocked; one meter higher it is properly clear.)
        let rx_high = Point3::new(100.0, 0.0, 36.0);
        assert!(!los_blocked(&s, tx, rx_high));
        let rx_graze = Point3::new(100.0, 0.0, 35.0);
        assert!(los_blocked(&s, tx, rx_graze), "edge touch counts as blocked");
    }

    #[test]
    fn los_blocking_matches_dense_sampling_oracle() {
        let s = scene_with_box((20.0, 5.0), (45.0, 30.0), 10.0);
        let inside_volume = |p: Point3| -> bool {
            p.x >= 20.0 && p.x <= 45.0 && p.y >= 5.0 && p.y <= 30.0 && p.z <= 10.0 && p.z >= 0.0
        };
        let cases = [
            (Point3::new(0.0, 0.0, 2.0), Point3::new(60.0, 35.0, 2.0)),
            (Point3::new(0.0, 0.0, 12.0), Point3::new(60.0, 35.0, 12.0)),
            (Point3::new(0.0, 40.0, 3.0), Point3::new(60.0, 40.0, 3.0)),
            (Point3::new(10.0, 17.0, 8.0), Point3::new(70.0, 17.0, 4.0)),
            (Point3::new(0.0, 0.0, 10.5), Point3::new(90.0, 50.0, 1.0)),
        ];
        for (a, b) in cases {
            let oracle = (0..=20_000).any(|i| inside_volume(a.lerp(b, i as f64 / 20_000.0)));
            assert_eq!(
                los_blocked(&s, a, b),
                oracle,
                "blocking mismatch for {a:?} -> {b:?}"
            );
        }
    }

    #[test]
    fn single_direct_path_reproduces_friis() {
        let s = open_scene();
        let tx = Point3::new(0.0, 0.0, 10.0);
        let rx = Point3::new(300.0, 40.0, 1.5);
        let c = cfg(0);
        let paths = trace_paths(&s, tx, rx, &c).unwrap();
        let p_rx = received_power_dbm(&paths, c.frequency_ghz, 36.99, 0.0, 2.1).unwrap();
        let pl = path_loss_db(36.99, 0.0, 2.1, p_rx);
        let expected = fspl_db(c.frequency_ghz, tx.dist(rx)).unwrap();
        assert!((pl - expected).abs() < 1e-9, "pl {pl} vs fspl {expected}");
    }

    #[test]
    fn coherent_sum_matches_independent_recompute() {
        // Synthetic two-path case checked against a from-scratch complex
        // sum with different operation order.
        let lambda = C_M_PER_S / 1.5e9;
        let mk = |len: f64, coeff: Complex64| RayPath {
            kind: PathKind::Reflected { order: 1 },
            vertices: vec![],
            length_m: len,
            reflection_coeffs: vec![coeff],
        };
        let paths = vec![
            mk(120.0 * lambda, Complex64::new(0.8, -0.1)),
            mk(133.25 * lambda, Complex64::new(-0.5, 0.2)),
        ];
        let got = received_power_dbm(&paths, 1.5, 30.0, 1.0, 2.0).unwrap();
        let mut acc = Complex64::new(0.0, 0.0);
        for p in paths.iter().rev() {
            let phase = -2.0 * std::f64::consts::PI * p.length_m / lambda;
            let amp = lambda / (4.0 * std::f64::consts::PI * p.length_m);
            acc += p.reflection_coeffs[0] * Complex64::new(phase.cos(), phase.sin()) * amp;
        }
        let expected = 33.0 + 20.0 * acc.norm().log10();
        assert!((got - expected).abs() < 1e-9);
    }

    #[test]
    fn perfect_cancellation_reports_absent_power() {
        // Two half-wave-offset paths with amplitudes matched through the
        // coefficients: the coherent sum collapses below floating-point
        // resolution and must report as no power.
        let lambda = C_M_PER_S / 1.5e9;
        let l1 = 100.0 * lambda;
        let l2 = 100.5 * lambda;
        let mk = |len: f64, g: f64| RayPath {
            kind: PathKind::Reflected { order: 1 },
            vertices: vec![],
            length_m: len,
            reflection_coeffs: vec![Complex64::new(g, 0.0)],
        };
        let paths = vec![mk(l1, 0.5), mk(l2, 0.5 * l2 / l1)];
        assert_eq!(received_power_dbm(&paths, 1.5, 30.0, 0.0, 0.0), None);
        assert_eq!(received_power_dbm(&[], 1.5, 30.0, 0.0, 0.0), None);
    }

    #[test]
    fn reciprocity_swapping_endpoints_preserves_path_loss() {
        // Box low enough (5 m) that the direct ray between the endpoints
        // passes over it, so both directions see the same path set.
        let s = scene_with_box((30.0, -15.0), (50.0, 15.0), 5.0);
        let c = cfg(2);
        let a = Point3::new(0.0, 0.0, 12.0);
        let b = Point3::new(80.0, 30.0, 1.5);
        let fwd = trace_paths(&s, a, b, &c).unwrap();
        let rev = trace_paths(&s, b, a, &c).unwrap();
        assert_eq!(fwd.len(), rev.len());
        let p_fwd = received_power_dbm(&fwd, c.frequency_ghz, 37.0, 0.0, 2.1).unwrap();
        let p_rev = received_power_dbm(&rev, c.frequency_ghz, 37.0, 2.1, 0.0).unwrap();
        let pl_fwd = path_loss_db(37.0, 0.0, 2.1, p_fwd);
        let pl_rev = path_loss_db(37.0, 2.1, 0.0, p_rev);
        assert!(
            (pl_fwd - pl_rev).abs() < 1e-9,
            "reciprocity broke: {pl_fwd} vs {pl_rev}"
        );
    }

    #[test]
    fn two_ray_far_field_slope_is_forty_db_per_decade() {
        let s = open_scene();
        let mut c = cfg(1);
        c.frequency_ghz = 1.0;
        c.max_distance_m = 60_000.0;
        let h_t = 10.0;
        let h_r = 1.5;
        let tx = Point3::new(0.0, 0.0, h_t);
        // Far beyond the breakpoint 4 h_t h_r / lambda (~200 m at 1 GHz).
        let mut pts = Vec::new();
        for i in 0..12 {
            let d = 4000.0 * 10f64.powf(i as f64 / 11.0); // 4 to 40 km
            let rx = Point3::new(d, 0.0, h_r);
            let paths = trace_paths(&s, tx, rx, &c).unwrap();
            assert_eq!(paths.len(), 2, "direct + ground at {d} m");
            let p_rx = received_power_dbm(&paths, c.frequency_ghz, 30.0, 0.0, 0.0).unwrap();
            pts.push((d.log10(), path_loss_db(30.0, 0.0, 0.0, p_rx)));
        }
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
            / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
        assert!((slope - 40.0).abs() < 1.0, "slope = {slope} dB/decade");
        // And the asymptote value: PL ~ 40 log d - 20 log(h_t h_r).
        let (lx, ly) = pts[pts.len() - 1];
        let asymptote = 40.0 * lx - 20.0 * (h_t * h_r).log10();
        assert!((ly - asymptote).abs() < 1.5, "PL {ly} vs asymptote {asymptote}");
    }

    #[test]
    fn path_ordering_is_by_order_then_length() {
        let s = scene_with_box((30.0, -15.0), (50.0, 15.0), 9.0);
        let paths = trace_paths(
            &s,
            Point3::new(0.0, 0.0, 12.0),
            Point3::new(80.0, 30.0, 1.5),
            &cfg(2),
        )
        .unwrap();
        for w in paths.windows(2) {
            let oa = match w[0].kind {
                PathKind::Direct => 0,
                PathKind::Reflected { order } => order,
            };
            let ob = match w[1].kind {
                PathKind::Direct => 0,
                PathKind::Reflected { order } => order,
            };
            assert!(oa < ob || (oa == ob && w[0].length_m <= w[1].length_m));
        }
    }

    #[test]
    fn sim_config_validates_frequency_band() {
        let mut c = SimConfig::default();
        c.frequency_ghz = 0.01;
        assert!(c.validate().is_err());
        c.frequency_ghz = 1.5;
        assert!(c.validate().is_ok());
    }
}
