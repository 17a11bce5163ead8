//! Image-method multipath tracer.
//!
//! Reflecting surfaces are the flat ground plane and every building wall
//! face. Candidate reflection sequences are enumerated once per
//! transmitter by mirroring it through face planes; for each receiver the
//! reflection points are recovered by backtracking the image chain and a
//! path survives only if every point lies on its finite face and every
//! segment clears the scene.

use crate::error::{Error, Result};
use crate::geom::{point_in_polygon, segment_intersection, Point2, Point3, Rect};
use crate::scene::{Scene, Terrain};

use super::{Interaction, SimConfig, SurfaceKind};

/// Tolerance for "on the face" membership tests, meters.
const FACE_TOL: f64 = 1e-9;
/// Strict-side margin for orientation tests, meters.
const SIDE_EPS: f64 = 1e-9;
/// Endpoints of reflected segments sit exactly on surfaces; visibility
/// tests pull them off by this absolute distance before testing.
const TRIM_M: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum FaceKind {
    Ground,
    Wall { building: usize },
}

#[derive(Debug, Clone)]
struct Face {
    kind: FaceKind,
    origin: Point3,
    /// Outward unit normal of the face plane.
    normal: Point3,
    /// Wall extent: horizontal unit vector along the edge and its length.
    u_dir: Point3,
    u_len: f64,
    z0: f64,
    z1: f64,
    material: usize,
}

impl Face {
    fn signed_dist(&self, p: Point3) -> f64 {
        self.normal.dot(p.sub(self.origin))
    }

    fn mirror(&self, p: Point3) -> Point3 {
        p.sub(self.normal.scale(2.0 * self.signed_dist(p)))
    }

    fn contains(&self, p: Point3) -> bool {
        match self.kind {
            FaceKind::Ground => true,
            FaceKind::Wall { .. } => {
                let u = p.sub(self.origin).dot(self.u_dir);
                u >= -FACE_TOL
                    && u <= self.u_len + FACE_TOL
                    && p.z >= self.z0 - FACE_TOL
                    && p.z <= self.z1 + FACE_TOL
            }
        }
    }

    /// Representative corner points used for reachability pruning.
    fn corners(&self) -> Vec<Point3> {
        match self.kind {
            FaceKind::Ground => Vec::new(),
            FaceKind::Wall { .. } => {
                let a = self.origin;
                let b = self.origin.add(self.u_dir.scale(self.u_len));
                vec![
                    Point3::new(a.x, a.y, self.z0),
                    Point3::new(b.x, b.y, self.z0),
                    Point3::new(b.x, b.y, self.z1),
                    Point3::new(a.x, a.y, self.z1),
                ]
            }
        }
    }
}

struct BuildingAccel {
    footprint: Vec<Point2>,
    bbox: Rect,
    base: f64,
    top: f64,
}

/// Precomputed blocking geometry for a scene.
pub(crate) struct SceneAccel {
    buildings: Vec<BuildingAccel>,
    flat_ground: Option<f64>,
    terrain: Terrain,
}

impl SceneAccel {
    pub(crate) fn new(scene: &Scene) -> SceneAccel {
        let buildings = scene
            .buildings
            .iter()
            .map(|b| {
                let centroid = {
                    let n = b.footprint.len() as f64;
                    let (sx, sy) = b
                        .footprint
                        .iter()
                        .fold((0.0, 0.0), |acc, p| (acc.0 + p.x, acc.1 + p.y));
                    (sx / n, sy / n)
                };
                let base = scene.terrain_elevation_at(centroid.0, centroid.1);
                BuildingAccel {
                    footprint: b.footprint.clone(),
                    bbox: Rect::of_points(&b.footprint),
                    base,
                    top: base + b.height_m,
                }
            })
            .collect();
        let flat_ground = match &scene.terrain {
            Terrain::Flat { elevation_m, .. } => Some(*elevation_m),
            Terrain::Grid { .. } => None,
        };
        SceneAccel {
            buildings,
            flat_ground,
            terrain: scene.terrain.clone(),
        }
    }

    /// True when segment `ab` crosses a building volume or dips below the
    /// terrain. Boundary touches count as blocked.
    fn blocked(&self, a: Point3, b: Point3) -> bool {
        // Terrain first (cheap).
        match self.flat_ground {
            Some(e) => {
                if a.z.min(b.z) < e + 1e-12 {
                    return true;
                }
            }
            None => {
                // Sampled terrain: walk the segment at quarter-cell steps.
                if let Terrain::Grid { cell_size_m, .. } = &self.terrain {
                    let len = a.dist(b);
                    let steps = ((len / (cell_size_m / 4.0)).ceil() as usize).clamp(1, 100_000);
                    for i in 0..=steps {
                        let t = i as f64 / steps as f64;
                        let p = a.lerp(b, t);
                        if p.z <= self.terrain.elevation_at(p.x, p.y) + 1e-12 {
                            return true;
                        }
                    }
                }
            }
        }

        let a2 = a.xy();
        let b2 = b.xy();
        let seg_box = Rect::of_points(&[a2, b2]).expand(FACE_TOL);
        let z_lo = a.z.min(b.z);
        for bld in &self.buildings {
            if z_lo > bld.top + FACE_TOL {
                continue;
            }
            if !seg_box.overlaps(&bld.bbox) {
                continue;
            }
            if segment_hits_volume(a, b, bld) {
                return true;
            }
        }
        false
    }

    /// Visibility for reflected-path segments whose endpoints lie exactly
    /// on reflecting surfaces: trims both ends before the blocking test.
    fn blocked_trimmed(&self, a: Point3, b: Point3) -> bool {
        let len = a.dist(b);
        if len <= 3.0 * TRIM_M {
            return false; // degenerate short hop; nothing can fit between
        }
        let t = TRIM_M / len;
        self.blocked(a.lerp(b, t), b.lerp(a, t))
    }
}

/// True when the 3-D segment enters (or touches) the extruded volume.
fn segment_hits_volume(a: Point3, b: Point3, bld: &BuildingAccel) -> bool {
    let a2 = a.xy();
    let b2 = b.xy();
    let n = bld.footprint.len();
    let planar_len = a2.dist(b2);
    let z_at = |t: f64| a.z + t * (b.z - a.z);
    let z_overlaps = |t0: f64, t1: f64| {
        let za = z_at(t0);
        let zb = z_at(t1);
        za.min(zb) <= bld.top + FACE_TOL && za.max(zb) >= bld.base - FACE_TOL
    };

    if planar_len < 1e-12 {
        // Vertical segment: inside the footprint iff the point is.
        return point_in_polygon(a2, &bld.footprint) && z_overlaps(0.0, 1.0);
    }

    // Parameters where the planar projection crosses or touches the
    // footprint boundary.
    let mut ts = vec![0.0, 1.0];
    for i in 0..n {
        let e0 = bld.footprint[i];
        let e1 = bld.footprint[(i + 1) % n];
        if let Some((t, _)) = segment_intersection(a2, b2, e0, e1) {
            // A touch with z inside the extrusion is a blocking contact.
            if z_at(t) >= bld.base - FACE_TOL && z_at(t) <= bld.top + FACE_TOL {
                return true;
            }
            ts.push(t);
        }
    }
    ts.sort_by(f64::total_cmp);
    for w in ts.windows(2) {
        let (t0, t1) = (w[0], w[1]);
        if t1 - t0 < 1e-12 {
            continue;
        }
        let tm = 0.5 * (t0 + t1);
        let mid = Point2::new(a2.x + tm * (b2.x - a2.x), a2.y + tm * (b2.y - a2.y));
        if point_in_polygon(mid, &bld.footprint) && z_overlaps(t0, t1) {
            return true;
        }
    }
    false
}

/// True when the direct segment from `a` to `b` is obstructed by any
/// building or by the terrain. Boundary touches count as blocked.
pub fn los_blocked(scene: &Scene, a: Point3, b: Point3) -> bool {
    SceneAccel::new(scene).blocked(a, b)
}

/// Geometric multipath: vertices, length, and per-bounce incidence data.
/// Frequency-independent, so one trace serves every carrier in a sweep.
#[derive(Debug, Clone)]
pub struct GeomPath {
    pub vertices: Vec<Point3>,
    pub length_m: f64,
    pub interactions: Vec<Interaction>,
}

impl GeomPath {
    pub fn order(&self) -> usize {
        self.interactions.len()
    }
}

#[derive(Debug)]
struct Sequence {
    faces: Vec<u16>,
    /// images[j] mirrors the transmitter through faces[0..=j].
    images: Vec<Point3>,
}

/// Per-transmitter tracer: face table, feasibility-pruned reflection
/// sequences, and precomputed image chains.
pub struct PathTracer {
    faces: Vec<Face>,
    sequences: Vec<Sequence>,
    accel: SceneAccel,
    tx: Point3,
    max_distance_m: f64,
}

fn collect_faces(scene: &Scene, accel: &SceneAccel) -> Vec<Face> {
    let mut faces = Vec::new();
    if let Terrain::Flat { elevation_m, material } = &scene.terrain {
        faces.push(Face {
            kind: FaceKind::Ground,
            origin: Point3::new(0.0, 0.0, *elevation_m),
            normal: Point3::new(0.0, 0.0, 1.0),
            u_dir: Point3::new(1.0, 0.0, 0.0),
            u_len: f64::INFINITY,
            z0: *elevation_m,
            z1: *elevation_m,
            material: scene.material_index(material).expect("validated"),
        });
    }
    for (bi, b) in scene.buildings.iter().enumerate() {
        let mat = scene.material_index(&b.material).expect("validated");
        let acc = &accel.buildings[bi];
        let n = b.footprint.len();
        for i in 0..n {
            let p0 = b.footprint[i];
            let p1 = b.footprint[(i + 1) % n];
            let d = p1.sub(p0);
            let len = d.norm();
            if len < 1e-9 {
                continue;
            }
            // CCW footprint: outward normal points right of the edge.
            let normal = Point3::new(d.y / len, -d.x / len, 0.0);
            faces.push(Face {
                kind: FaceKind::Wall { building: bi },
                origin: Point3::new(p0.x, p0.y, acc.base),
                normal,
                u_dir: Point3::new(d.x / len, d.y / len, 0.0),
                u_len: len,
                z0: acc.base,
                z1: acc.top,
                material: mat,
            });
        }
    }
    faces
}

/// Mutual reachability of two faces: each must expose some point strictly
/// on the outward side of the other's plane. Conservative (never prunes a
/// geometrically possible pair).
fn faces_mutually_visible(a: &Face, b: &Face) -> bool {
    let front_of = |f: &Face, other: &Face| -> bool {
        match other.kind {
            FaceKind::Ground => true, // infinite plane always has front points
            FaceKind::Wall { .. } => {
                if matches!(f.kind, FaceKind::Ground) {
                    // Vertical wall planes always intersect the ground plane.
                    true
                } else {
                    f.corners().iter().any(|&c| other.signed_dist(c) > SIDE_EPS)
                }
            }
        }
    };
    front_of(a, b) && front_of(b, a)
}

impl PathTracer {
    pub fn new(scene: &Scene, tx: Point3, cfg: &SimConfig) -> Result<PathTracer> {
        cfg.validate()?;
        let accel = SceneAccel::new(scene);
        let faces = collect_faces(scene, &accel);
        let nf = faces.len();

        let mut adj = vec![true; nf * nf];
        for i in 0..nf {
            for j in 0..nf {
                adj[i * nf + j] = i != j && faces_mutually_visible(&faces[i], &faces[j]);
            }
        }

        let mut sequences = Vec::new();
        // Depth-first enumeration with the unfolded-source side prune:
        // extending by face f is possible only when the current image lies
        // strictly on f's outward side.
        let mut stack_faces: Vec<u16> = Vec::new();
        let mut stack_images: Vec<Point3> = Vec::new();
        fn extend(
            faces: &[Face],
            adj: &[bool],
            nf: usize,
            tx: Point3,
            max_order: usize,
            stack_faces: &mut Vec<u16>,
            stack_images: &mut Vec<Point3>,
            out: &mut Vec<Sequence>,
        ) {
            if stack_faces.len() >= max_order {
                return;
            }
            let last = stack_faces.last().map(|&f| f as usize);
            let img = *stack_images.last().unwrap_or(&tx);
            for f in 0..nf {
                if let Some(l) = last {
                    if !adj[l * nf + f] {
                        continue;
                    }
                } else if faces[f].signed_dist(tx) <= SIDE_EPS {
                    continue;
                }
                if faces[f].signed_dist(img) <= SIDE_EPS {
                    continue;
                }
                stack_faces.push(f as u16);
                stack_images.push(faces[f].mirror(img));
                out.push(Sequence {
                    faces: stack_faces.clone(),
                    images: stack_images.clone(),
                });
                extend(faces, adj, nf, tx, max_order, stack_faces, stack_images, out);
                stack_faces.pop();
                stack_images.pop();
            }
        }
        extend(
            &faces,
            &adj,
            nf,
            tx,
            cfg.max_reflections,
            &mut stack_faces,
            &mut stack_images,
            &mut sequences,
        );

        Ok(PathTracer {
            faces,
            sequences,
            accel,
            tx,
            max_distance_m: cfg.max_distance_m,
        })
    }

    pub fn tx(&self) -> Point3 {
        self.tx
    }

    /// Direct visibility from the transmitter.
    pub fn line_of_sight(&self, rx: Point3) -> bool {
        !self.accel.blocked(self.tx, rx)
    }

    /// All valid paths to `rx`, deterministically ordered by reflection
    /// order, then length.
    pub fn paths_to(&self, rx: Point3) -> Vec<GeomPath> {
        let mut out = Vec::new();

        let direct_len = self.tx.dist(rx);
        if direct_len <= self.max_distance_m && !self.accel.blocked(self.tx, rx) {
            out.push(GeomPath {
                vertices: vec![self.tx, rx],
                length_m: direct_len,
                interactions: Vec::new(),
            });
        }

        'seq: for seq in &self.sequences {
            let k = seq.faces.len();
            let unfolded = seq.images[k - 1].dist(rx);
            if unfolded > self.max_distance_m {
                continue;
            }
            // Backtrack reflection points from the receiver.
            let mut pts = vec![Point3::new(0.0, 0.0, 0.0); k + 2];
            pts[0] = self.tx;
            pts[k + 1] = rx;
            for j in (1..=k).rev() {
                let face = &self.faces[seq.faces[j - 1] as usize];
                let p_next = pts[j + 1];
                let image = seq.images[j - 1];
                let s1 = face.signed_dist(p_next);
                let s2 = face.signed_dist(image);
                if s1 <= SIDE_EPS || s2 >= -SIDE_EPS {
                    continue 'seq;
                }
                let t = s1 / (s1 - s2);
                let q = p_next.lerp(image, t);
                if !face.contains(q) {
                    continue 'seq;
                }
                pts[j] = q;
            }
            // Both neighbors of every bounce must sit strictly on the
            // outward side of its face.
            for j in 1..=k {
                let face = &self.faces[seq.faces[j - 1] as usize];
                if face.signed_dist(pts[j - 1]) <= SIDE_EPS
                    || face.signed_dist(pts[j + 1]) <= SIDE_EPS
                {
                    continue 'seq;
                }
            }
            // Every physical segment must clear the scene.
            for j in 0..=k {
                if self.accel.blocked_trimmed(pts[j], pts[j + 1]) {
                    continue 'seq;
                }
            }

            let mut length = 0.0;
            for j in 0..=k {
                length += pts[j].dist(pts[j + 1]);
            }
            let mut interactions = Vec::with_capacity(k);
            for j in 1..=k {
                let face = &self.faces[seq.faces[j - 1] as usize];
                let dir_in = pts[j].sub(pts[j - 1]).normalized();
                let cos_inc = (-dir_in.dot(face.normal)).clamp(-1.0, 1.0);
                interactions.push(Interaction {
                    surface: match face.kind {
                        FaceKind::Ground => SurfaceKind::Ground,
                        FaceKind::Wall { .. } => SurfaceKind::Wall,
                    },
                    material: face.material,
                    cos_incidence: cos_inc,
                });
            }
            out.push(GeomPath {
                vertices: pts,
                length_m: length,
                interactions,
            });
        }

        out.sort_by(|a, b| {
            a.order()
                .cmp(&b.order())
                .then(a.length_m.total_cmp(&b.length_m))
        });
        // Drop geometric duplicates that distinct face sequences can
        // produce when scenes contain coplanar touching walls.
        out.dedup_by(|b, a| {
            a.order() == b.order()
                && (a.length_m - b.length_m).abs() < 1e-9
                && a.vertices.len() == b.vertices.len()
                && a.vertices
                    .iter()
                    .zip(&b.vertices)
                    .all(|(p, q)| p.dist(*q) < 1e-6)
        });
        out
    }
}

/// Traces every valid path between two endpoints. Convenience wrapper that
/// builds a [`PathTracer`] for a single query.
pub fn trace_geometry(
    scene: &Scene,
    tx: Point3,
    rx: Point3,
    cfg: &SimConfig,
) -> Result<Vec<GeomPath>> {
    scene.validate()?;
    if tx.dist(rx) < 1e-9 {
        return Err(Error::Validation(
            "transmitter and receiver coincide".into(),
        ));
    }
    Ok(PathTracer::new(scene, tx, cfg)?.paths_to(rx))
}
