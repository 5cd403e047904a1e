//! Spatial geometry for convex polyhedra: face-plane and edge-line distances
//! from an interior probe, and the corresponding vertex-sum ratios.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative tolerance (times the bounding-box diagonal) for face planarity and
/// vertex-vs-plane convexity.
pub const SHAPE_REL_TOL: f64 = 1e-9;
/// Absolute distance below which a probe counts as on a face plane.
pub const BOUNDARY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Geom3dError {
    #[error("polyhedron is not convex: {0}")]
    NotConvex(String),
    #[error("face {face} is not planar (deviation {deviation:e})")]
    NonPlanarFace { face: usize, deviation: f64 },
    #[error("bad topology: {0}")]
    BadTopology(String),
    #[error("coordinate of vertex {index} is not finite")]
    NonFinite { index: usize },
    #[error("probe {0} is not strictly inside the polyhedron")]
    ProbeNotInterior(Point3),
    #[error("circumradius must be positive, got {0}")]
    NonPositiveRadius(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Point3 { x, y, z }
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn dot(self, o: Point3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Point3) -> Point3 {
        Point3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn distance(self, o: Point3) -> f64 {
        (self - o).norm()
    }
}

impl From<[f64; 3]> for Point3 {
    fn from(a: [f64; 3]) -> Self {
        Point3::new(a[0], a[1], a[2])
    }
}

impl From<Point3> for [f64; 3] {
    fn from(p: Point3) -> Self {
        [p.x, p.y, p.z]
    }
}

impl fmt::Display for Point3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.x, self.y, self.z)
    }
}

impl Add for Point3 {
    type Output = Point3;
    fn add(self, o: Point3) -> Point3 {
        Point3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Point3 {
    type Output = Point3;
    fn sub(self, o: Point3) -> Point3 {
        Point3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Point3 {
    type Output = Point3;
    fn mul(self, s: f64) -> Point3 {
        Point3::new(self.x * s, self.y * s, self.z * s)
    }
}

/// Outward unit normal `normal` and offset such that the face plane is
/// `normal · x = offset`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Plane {
    pub normal: Point3,
    pub offset: f64,
}

impl Plane {
    /// Signed distance, negative on the interior side.
    pub fn signed_distance(&self, p: Point3) -> f64 {
        self.normal.dot(p) - self.offset
    }
}

/// A validated convex polyhedron. Face cycles are counterclockwise seen from
/// outside; edges are derived from the faces and sorted.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Polyhedron3D {
    vertices: Vec<Point3>,
    faces: Vec<Vec<usize>>,
    #[serde(skip)]
    planes: Vec<Plane>,
    #[serde(skip)]
    edges: Vec<(usize, usize)>,
}

impl Polyhedron3D {
    pub fn vertices(&self) -> &[Point3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[Vec<usize>] {
        &self.faces
    }

    pub fn planes(&self) -> &[Plane] {
        &self.planes
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn vertex_centroid(&self) -> Point3 {
        let s = self
            .vertices
            .iter()
            .fold(Point3::default(), |acc, &v| acc + v);
        s * (1.0 / self.vertices.len() as f64)
    }
}

/// File form: `{"vertices": [[x,y,z],...], "faces": [[i0,i1,i2,...],...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyhedronFile {
    pub vertices: Vec<Point3>,
    pub faces: Vec<Vec<usize>>,
}

impl TryFrom<PolyhedronFile> for Polyhedron3D {
    type Error = Geom3dError;
    fn try_from(f: PolyhedronFile) -> Result<Self, Self::Error> {
        validate_polyhedron(&f.vertices, &f.faces)
    }
}

impl From<&Polyhedron3D> for PolyhedronFile {
    fn from(p: &Polyhedron3D) -> Self {
        PolyhedronFile {
            vertices: p.vertices.clone(),
            faces: p.faces.clone(),
        }
    }
}

fn bbox_diagonal(pts: &[Point3]) -> f64 {
    let (mut lo, mut hi) = (pts[0], pts[0]);
    for p in pts {
        lo = Point3::new(lo.x.min(p.x), lo.y.min(p.y), lo.z.min(p.z));
        hi = Point3::new(hi.x.max(p.x), hi.y.max(p.y), hi.z.max(p.z));
    }
    hi.distance(lo)
}

/// Newell normal (unnormalized, area-weighted) of a polygon cycle.
fn newell_normal(pts: &[Point3]) -> Point3 {
    let n = pts.len();
    (0..n).fold(Point3::default(), |acc, i| {
        let (p, q) = (pts[i], pts[(i + 1) % n]);
        acc + Point3::new(
            (p.y - q.y) * (p.z + q.z),
            (p.z - q.z) * (p.x + q.x),
            (p.x - q.x) * (p.y + q.y),
        )
    })
}

pub fn validate_polyhedron(
    vertices: &[Point3],
    faces: &[Vec<usize>],
) -> Result<Polyhedron3D, Geom3dError> {
    if vertices.len() < 4 {
        return Err(Geom3dError::BadTopology(format!(
            "need at least 4 vertices, got {}",
            vertices.len()
        )));
    }
    if faces.len() < 4 {
        return Err(Geom3dError::BadTopology(format!(
            "need at least 4 faces, got {}",
            faces.len()
        )));
    }
    if let Some(index) = vertices.iter().position(|p| !p.is_finite()) {
        return Err(Geom3dError::NonFinite { index });
    }
    let tol = SHAPE_REL_TOL * bbox_diagonal(vertices);
    let centroid =
        vertices.iter().fold(Point3::default(), |acc, &v| acc + v) * (1.0 / vertices.len() as f64);

    let mut oriented = Vec::with_capacity(faces.len());
    let mut planes = Vec::with_capacity(faces.len());
    for (fi, face) in faces.iter().enumerate() {
        if face.len() < 3 {
            return Err(Geom3dError::BadTopology(format!(
                "face {fi} has {} vertices",
                face.len()
            )));
        }
        if let Some(&bad) = face.iter().find(|&&i| i >= vertices.len()) {
            return Err(Geom3dError::BadTopology(format!(
                "face {fi} references missing vertex {bad}"
            )));
        }
        let mut sorted = face.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != face.len() {
            return Err(Geom3dError::BadTopology(format!(
                "face {fi} repeats a vertex"
            )));
        }

        let pts: Vec<Point3> = face.iter().map(|&i| vertices[i]).collect();
        let raw = newell_normal(&pts);
        let len = raw.norm();
        if !(len > 0.0) {
            return Err(Geom3dError::NonPlanarFace {
                face: fi,
                deviation: f64::INFINITY,
            });
        }
        let mut normal = raw * (1.0 / len);
        let fc = pts.iter().fold(Point3::default(), |a, &p| a + p) * (1.0 / pts.len() as f64);
        let deviation = pts
            .iter()
            .map(|&p| normal.dot(p - fc).abs())
            .fold(0.0, f64::max);
        if deviation > tol {
            return Err(Geom3dError::NonPlanarFace {
                face: fi,
                deviation,
            });
        }
        let mut cycle = face.clone();
        if normal.dot(centroid - fc) > 0.0 {
            normal = normal * -1.0;
            cycle.reverse();
        }
        let plane = Plane {
            normal,
            offset: normal.dot(fc),
        };
        if -plane.signed_distance(centroid) <= tol {
            return Err(Geom3dError::NotConvex(format!(
                "face {fi} is degenerate: the solid has no thickness behind it"
            )));
        }
        if let Some(v) = vertices
            .iter()
            .position(|&v| plane.signed_distance(v) > tol)
        {
            return Err(Geom3dError::NotConvex(format!(
                "vertex {v} lies outside the plane of face {fi}"
            )));
        }
        oriented.push(cycle);
        planes.push(plane);
    }

    // Each undirected edge must appear in exactly two faces, once per direction.
    let mut directed: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for (fi, cycle) in oriented.iter().enumerate() {
        for j in 0..cycle.len() {
            let e = (cycle[j], cycle[(j + 1) % cycle.len()]);
            if directed.insert(e, fi).is_some() {
                return Err(Geom3dError::BadTopology(format!(
                    "directed edge {e:?} used twice"
                )));
            }
        }
    }
    let mut edges = Vec::new();
    for &(i, j) in directed.keys() {
        if !directed.contains_key(&(j, i)) {
            return Err(Geom3dError::BadTopology(format!(
                "edge ({i}, {j}) is not shared by exactly 2 faces"
            )));
        }
        if i < j {
            edges.push((i, j));
        }
    }
    let (n, r, m) = (
        vertices.len() as i64,
        edges.len() as i64,
        faces.len() as i64,
    );
    if n - r + m != 2 {
        return Err(Geom3dError::BadTopology(format!(
            "Euler check failed: n - r + m = {n} - {r} + {m} != 2"
        )));
    }
    Ok(Polyhedron3D {
        vertices: vertices.to_vec(),
        faces: oriented,
        planes,
        edges,
    })
}

/// Faces of the tetrahedron on vertices 0..4 (orientation fixed on validation).
pub const TETRA_FACES: [[usize; 3]; 4] = [[0, 1, 2], [0, 1, 3], [0, 2, 3], [1, 2, 3]];

/// Validates four points as a tetrahedron.
pub fn tetrahedron(points: [Point3; 4]) -> Result<Polyhedron3D, Geom3dError> {
    let faces: Vec<Vec<usize>> = TETRA_FACES.iter().map(|f| f.to_vec()).collect();
    validate_polyhedron(&points, &faces)
}

/// Regular tetrahedron centred at the origin.
pub fn regular_tetrahedron(circumradius: f64) -> Result<Polyhedron3D, Geom3dError> {
    if !(circumradius > 0.0) || !circumradius.is_finite() {
        return Err(Geom3dError::NonPositiveRadius(circumradius));
    }
    let s = circumradius / 3f64.sqrt();
    tetrahedron([
        Point3::new(s, s, s),
        Point3::new(s, -s, -s),
        Point3::new(-s, s, -s),
        Point3::new(-s, -s, s),
    ])
}

/// Axis-aligned cube `[-h, h]^3`.
pub fn cube(half_side: f64) -> Result<Polyhedron3D, Geom3dError> {
    let h = half_side;
    let vertices: Vec<Point3> = (0..8)
        .map(|i| {
            let c = |bit: usize| if i >> bit & 1 == 1 { h } else { -h };
            Point3::new(c(0), c(1), c(2))
        })
        .collect();
    let faces = vec![
        vec![0, 2, 3, 1],
        vec![4, 5, 7, 6],
        vec![0, 1, 5, 4],
        vec![2, 6, 7, 3],
        vec![0, 4, 6, 2],
        vec![1, 3, 7, 5],
    ];
    validate_polyhedron(&vertices, &faces)
}

pub fn contains_interior_3d(p: &Polyhedron3D, m: Point3) -> bool {
    m.is_finite()
        && p.planes
            .iter()
            .all(|pl| pl.signed_distance(m) < -BOUNDARY_TOL)
}

fn require_interior(p: &Polyhedron3D, m: Point3) -> Result<(), Geom3dError> {
    if contains_interior_3d(p, m) {
        Ok(())
    } else {
        Err(Geom3dError::ProbeNotInterior(m))
    }
}

pub fn vertex_distances_3d(p: &Polyhedron3D, m: Point3) -> Result<Vec<f64>, Geom3dError> {
    require_interior(p, m)?;
    Ok(p.vertices.iter().map(|&v| v.distance(m)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaceFoot {
    pub face: usize,
    pub foot: Point3,
    pub distance: f64,
    /// Whether the foot falls inside the face polygon (not just its plane).
    pub inside_face: bool,
}

/// Perpendicular distance from `m` to every face plane, in face order.
pub fn face_pedal(p: &Polyhedron3D, m: Point3) -> Result<Vec<f64>, Geom3dError> {
    require_interior(p, m)?;
    Ok(p.planes.iter().map(|pl| -pl.signed_distance(m)).collect())
}

/// [`face_pedal`] with feet and the inside-face flag.
pub fn face_feet(p: &Polyhedron3D, m: Point3) -> Result<Vec<FaceFoot>, Geom3dError> {
    require_interior(p, m)?;
    Ok(p.planes
        .iter()
        .zip(&p.faces)
        .enumerate()
        .map(|(face, (pl, cycle))| {
            let distance = -pl.signed_distance(m);
            let foot = m + pl.normal * distance;
            let k = cycle.len();
            let inside_face = (0..k).all(|j| {
                let (a, b) = (p.vertices[cycle[j]], p.vertices[cycle[(j + 1) % k]]);
                (b - a).cross(foot - a).dot(pl.normal) >= 0.0
            });
            FaceFoot {
                face,
                foot,
                distance,
                inside_face,
            }
        })
        .collect())
}

/// Distance from `m` to the infinite line through `a` and `b`.
pub fn point_line_distance(m: Point3, a: Point3, b: Point3) -> f64 {
    let u = b - a;
    u.cross(m - a).norm() / u.norm()
}

/// Distance from `m` to every edge line, in derived edge order.
pub fn edge_pedal(p: &Polyhedron3D, m: Point3) -> Result<Vec<f64>, Geom3dError> {
    require_interior(p, m)?;
    Ok(p.edges
        .iter()
        .map(|&(i, j)| point_line_distance(m, p.vertices[i], p.vertices[j]))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target3 {
    Faces,
    Edges,
}

impl fmt::Display for Target3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Target3::Faces => "faces",
            Target3::Edges => "edges",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioReport3 {
    pub sum_vertex: f64,
    pub sum_pedal: f64,
    pub ratio: f64,
    pub target: Target3,
    pub probe: Point3,
}

pub fn em_ratio_3d(
    p: &Polyhedron3D,
    m: Point3,
    target: Target3,
) -> Result<RatioReport3, Geom3dError> {
    let pedal = match target {
        Target3::Faces => face_pedal(p, m)?,
        Target3::Edges => edge_pedal(p, m)?,
    };
    let sum_vertex: f64 = vertex_distances_3d(p, m)?.iter().sum();
    let sum_pedal: f64 = pedal.iter().sum();
    Ok(RatioReport3 {
        sum_vertex,
        sum_pedal,
        ratio: sum_vertex / sum_pedal,
        target,
        probe: m,
    })
}
