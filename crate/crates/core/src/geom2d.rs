//! Planar geometry: validated convex polygons, perpendicular and oblique pedal
//! distances from an interior probe, and the Erdős–Mordell ratio
//! `Σ|MA_i| / Σ|MP_i|`.
//!
//! Pedal feet always lie on the supporting line of a side, never clamped to the
//! segment; the foot's parameter along the side is kept as metadata.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative tolerance for the strict-convexity cross-product test, scaled by
/// the squared bounding-box diagonal.
pub const CONVEXITY_REL_TOL: f64 = 1e-12;
/// Absolute distance below which a probe counts as on the boundary.
pub const BOUNDARY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Geom2dError {
    #[error("polygon needs at least 3 vertices, got {found}")]
    TooFewVertices { found: usize },
    #[error("vertex {index} repeats an earlier vertex")]
    DuplicateVertex { index: usize },
    #[error("polygon is not strictly convex at vertex {index}")]
    NotConvex { index: usize },
    #[error("coordinate {index} is not finite")]
    NonFinite { index: usize },
    #[error("probe ({x}, {y}) is not strictly inside the polygon")]
    ProbeNotInterior { x: f64, y: f64 },
    #[error("oblique angle {0}° must lie strictly between 0° and 180°")]
    DegenerateAngle(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn dot(self, o: Point2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, o: Point2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, o: Point2) -> f64 {
        (self - o).norm()
    }

    /// Counterclockwise rotation by `theta` radians.
    pub fn rotate(self, theta: f64) -> Point2 {
        let (s, c) = theta.sin_cos();
        Point2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }
}

impl From<[f64; 2]> for Point2 {
    fn from(a: [f64; 2]) -> Self {
        Point2::new(a[0], a[1])
    }
}

impl From<Point2> for [f64; 2] {
    fn from(p: Point2) -> Self {
        [p.x, p.y]
    }
}

impl fmt::Display for Point2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, o: Point2) -> Point2 {
        Point2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, o: Point2) -> Point2 {
        Point2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, s: f64) -> Point2 {
        Point2::new(self.x * s, self.y * s)
    }
}

/// A strictly convex polygon with counterclockwise vertex order.
///
/// Only obtainable through [`validate_polygon`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvexPolygon2D {
    vertices: Vec<Point2>,
}

impl ConvexPolygon2D {
    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Side `i` runs from vertex `i` to vertex `i + 1 (mod n)`.
    pub fn side(&self, i: usize) -> (Point2, Point2) {
        let n = self.vertices.len();
        (self.vertices[i], self.vertices[(i + 1) % n])
    }

    pub fn signed_area(&self) -> f64 {
        signed_area(&self.vertices)
    }

    pub fn vertex_centroid(&self) -> Point2 {
        let n = self.vertices.len() as f64;
        let s = self
            .vertices
            .iter()
            .fold(Point2::default(), |acc, &v| acc + v);
        s * (1.0 / n)
    }
}

/// File form of a polygon: `{"vertices": [[x, y], ...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolygonFile {
    pub vertices: Vec<Point2>,
}

impl TryFrom<PolygonFile> for ConvexPolygon2D {
    type Error = Geom2dError;
    fn try_from(f: PolygonFile) -> Result<Self, Self::Error> {
        validate_polygon(&f.vertices)
    }
}

impl From<&ConvexPolygon2D> for PolygonFile {
    fn from(p: &ConvexPolygon2D) -> Self {
        PolygonFile {
            vertices: p.vertices.clone(),
        }
    }
}

fn signed_area(pts: &[Point2]) -> f64 {
    let n = pts.len();
    0.5 * (0..n).map(|i| pts[i].cross(pts[(i + 1) % n])).sum::<f64>()
}

fn bbox_diagonal(pts: &[Point2]) -> f64 {
    let (mut lo, mut hi) = (pts[0], pts[0]);
    for p in pts {
        lo = Point2::new(lo.x.min(p.x), lo.y.min(p.y));
        hi = Point2::new(hi.x.max(p.x), hi.y.max(p.y));
    }
    hi.distance(lo)
}

/// Validates a convex polygon, reversing clockwise input.
pub fn validate_polygon(points: &[Point2]) -> Result<ConvexPolygon2D, Geom2dError> {
    let n = points.len();
    if n < 3 {
        return Err(Geom2dError::TooFewVertices { found: n });
    }
    if let Some(index) = points.iter().position(|p| !p.is_finite()) {
        return Err(Geom2dError::NonFinite { index });
    }
    let diag = bbox_diagonal(points);
    let dup_tol = CONVEXITY_REL_TOL * diag;
    for j in 1..n {
        if (0..j).any(|i| points[i].distance(points[j]) <= dup_tol) {
            return Err(Geom2dError::DuplicateVertex { index: j });
        }
    }

    let mut vertices = points.to_vec();
    if signed_area(&vertices) < 0.0 {
        vertices.reverse();
    }

    let cross_tol = CONVEXITY_REL_TOL * diag * diag;
    let mut turning = 0.0;
    for i in 0..n {
        let prev = vertices[(i + n - 1) % n];
        let cur = vertices[i];
        let next = vertices[(i + 1) % n];
        let (e0, e1) = (cur - prev, next - cur);
        let cross = e0.cross(e1);
        if cross <= cross_tol {
            let index = if signed_area(points) < 0.0 {
                n - 1 - i
            } else {
                i
            };
            return Err(Geom2dError::NotConvex { index });
        }
        turning += cross.atan2(e0.dot(e1));
    }
    // All left turns but winding more than once: a star polygon.
    if (turning - 2.0 * PI).abs() > 1e-6 {
        return Err(Geom2dError::NotConvex { index: 0 });
    }
    Ok(ConvexPolygon2D { vertices })
}

/// Regular `n`-gon centred at the origin with vertex 0 on the positive x-axis.
pub fn regular_polygon(n: usize, circumradius: f64) -> Result<ConvexPolygon2D, Geom2dError> {
    let pts: Vec<Point2> = (0..n)
        .map(|i| {
            let t = 2.0 * PI * i as f64 / n as f64;
            Point2::new(circumradius * t.cos(), circumradius * t.sin())
        })
        .collect();
    validate_polygon(&pts)
}

/// Signed distance from `m` to the supporting line of side `i`, positive on the
/// interior side.
fn signed_side_distance(a: Point2, b: Point2, m: Point2) -> f64 {
    let u = b - a;
    u.cross(m - a) / u.norm()
}

/// True iff `m` lies strictly inside, at least [`BOUNDARY_TOL`] from every side line.
pub fn contains_interior(poly: &ConvexPolygon2D, m: Point2) -> bool {
    if !m.is_finite() {
        return false;
    }
    (0..poly.len()).all(|i| {
        let (a, b) = poly.side(i);
        signed_side_distance(a, b, m) > BOUNDARY_TOL
    })
}

fn require_interior(poly: &ConvexPolygon2D, m: Point2) -> Result<(), Geom2dError> {
    if contains_interior(poly, m) {
        Ok(())
    } else {
        Err(Geom2dError::ProbeNotInterior { x: m.x, y: m.y })
    }
}

/// `|MA_i|` in vertex order.
pub fn vertex_distances(poly: &ConvexPolygon2D, m: Point2) -> Result<Vec<f64>, Geom2dError> {
    require_interior(poly, m)?;
    Ok(poly.vertices.iter().map(|&v| m.distance(v)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PedalEntry {
    pub side: usize,
    pub foot: Point2,
    pub distance: f64,
    /// Position of the foot along the side: 0 at `A_i`, 1 at `A_{i+1}`.
    pub t: f64,
}

impl PedalEntry {
    pub fn on_segment(&self) -> bool {
        (0.0..=1.0).contains(&self.t)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PedalSet {
    pub angle_deg: f64,
    pub entries: Vec<PedalEntry>,
}

impl PedalSet {
    pub fn distances(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.distance).collect()
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().map(|e| e.distance).sum()
    }
}

/// Feet of the perpendiculars from `m` onto every side line.
pub fn perpendicular_pedal(poly: &ConvexPolygon2D, m: Point2) -> Result<PedalSet, Geom2dError> {
    require_interior(poly, m)?;
    let entries = (0..poly.len())
        .map(|side| {
            let (a, b) = poly.side(side);
            let u = b - a;
            let t = (m - a).dot(u) / u.dot(u);
            PedalEntry {
                side,
                foot: a + u * t,
                distance: signed_side_distance(a, b, m),
                t,
            }
        })
        .collect();
    Ok(PedalSet {
        angle_deg: 90.0,
        entries,
    })
}

fn check_angle(angle_deg: f64) -> Result<f64, Geom2dError> {
    if angle_deg.is_finite() && angle_deg > 0.0 && angle_deg < 180.0 {
        Ok(angle_deg.to_radians())
    } else {
        Err(Geom2dError::DegenerateAngle(angle_deg))
    }
}

/// Oblique pedal set: `P_i` is on side line `i` such that the counterclockwise
/// angle from `A_i→A_{i+1}` to `P_i→M` equals `angle_deg`.
pub fn oblique_pedal(
    poly: &ConvexPolygon2D,
    m: Point2,
    angle_deg: f64,
) -> Result<PedalSet, Geom2dError> {
    let alpha = check_angle(angle_deg)?;
    require_interior(poly, m)?;
    let sin_alpha = alpha.sin();
    let entries = (0..poly.len())
        .map(|side| {
            let (a, b) = poly.side(side);
            let u = b - a;
            let len = u.norm();
            let h = signed_side_distance(a, b, m);
            let distance = h / sin_alpha;
            // P→M has direction û rotated by α; M sits on the left of the side.
            let dir = (u * (1.0 / len)).rotate(alpha);
            let foot = m - dir * distance;
            let t = (foot - a).dot(u) / (len * len);
            PedalEntry {
                side,
                foot,
                distance,
                t,
            }
        })
        .collect();
    Ok(PedalSet { angle_deg, entries })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioReport {
    pub sum_vertex: f64,
    pub sum_pedal: f64,
    pub ratio: f64,
    pub angle_deg: f64,
    pub probe: Point2,
}

/// `Σ|MA_i| / Σ|MP_i|` with pedals taken at `angle_deg` (90 for perpendicular).
pub fn em_ratio(
    poly: &ConvexPolygon2D,
    m: Point2,
    angle_deg: f64,
) -> Result<RatioReport, Geom2dError> {
    let pedal = if angle_deg == 90.0 {
        perpendicular_pedal(poly, m)?
    } else {
        oblique_pedal(poly, m, angle_deg)?
    };
    let sum_vertex: f64 = vertex_distances(poly, m)?.iter().sum();
    let sum_pedal = pedal.total();
    Ok(RatioReport {
        sum_vertex,
        sum_pedal,
        ratio: sum_vertex / sum_pedal,
        angle_deg,
        probe: m,
    })
}

/// The ratio a regular `n`-gon attains at its centre, `sec(π/n)`, scaled by
/// `sin α` for oblique pedals. Used as the conjectured floor.
pub fn regular_floor(n: usize, angle_deg: f64) -> f64 {
    angle_deg.to_radians().sin() / (PI / n as f64).cos()
}

#[cfg(test)]
mod tests {
    use super::*;

    const S3: f64 = 0.866_025_403_784_438_6; // √3/2

    fn tri() -> ConvexPolygon2D {
        validate_polygon(&[
            Point2::new(1.0, 0.0),
            Point2::new(-0.5, S3),
            Point2::new(-0.5, -S3),
        ])
        .unwrap()
    }

    fn square() -> ConvexPolygon2D {
        validate_polygon(&[
            Point2::new(-1.0, -1.0),
            Point2::new(1.0, -1.0),
            Point2::new(1.0, 1.0),
            Point2::new(-1.0, 1.0),
        ])
        .unwrap()
    }

    fn unit_square() -> ConvexPolygon2D {
        validate_polygon(&[
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 1.0),
        ])
        .unwrap()
    }

    #[test]
    fn clockwise_input_is_reversed() {
        let cw = validate_polygon(&[
            Point2::new(0.0, 0.0),
            Point2::new(0.0, 1.0),
            Point2::new(1.0, 1.0),
            Point2::new(1.0, 0.0),
        ])
        .unwrap();
        assert!(cw.signed_area() > 0.0);
        assert_eq!(cw.signed_area(), unit_square().signed_area());
        let mut set: Vec<[f64; 2]> = cw.vertices().iter().map(|&p| p.into()).collect();
        set.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(set, vec![[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]]);
    }

    #[test]
    fn rejects_bad_polygons() {
        let collinear = [
            Point2::new(0.0, 0.0),
            Point2::new(2.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 2.0),
        ];
        assert!(matches!(
            validate_polygon(&collinear),
            Err(Geom2dError::NotConvex { .. })
        ));
        assert_eq!(
            validate_polygon(&[Point2::new(0.0, 0.0), Point2::new(1.0, 0.0)]),
            Err(Geom2dError::TooFewVertices { found: 2 })
        );
        let dup = [
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(0.0, 1.0),
        ];
        assert_eq!(
            validate_polygon(&dup),
            Err(Geom2dError::DuplicateVertex { index: 2 })
        );
        let reflex = [
            Point2::new(0.0, 0.0),
            Point2::new(2.0, 0.0),
            Point2::new(1.0, 0.5),
            Point2::new(2.0, 2.0),
            Point2::new(0.0, 2.0),
        ];
        assert!(matches!(
            validate_polygon(&reflex),
            Err(Geom2dError::NotConvex { .. })
        ));
        let nan = [
            Point2::new(0.0, 0.0),
            Point2::new(f64::NAN, 0.0),
            Point2::new(0.0, 1.0),
        ];
        assert_eq!(
            validate_polygon(&nan),
            Err(Geom2dError::NonFinite { index: 1 })
        );
    }

    #[test]
    fn pentagram_is_not_convex() {
        let star: Vec<Point2> = (0..5)
            .map(|i| Point2::new(1.0, 0.0).rotate(4.0 * PI * i as f64 / 5.0))
            .collect();
        assert!(matches!(
            validate_polygon(&star),
            Err(Geom2dError::NotConvex { .. })
        ));
    }

    #[test]
    fn interior_test() {
        let sq = unit_square();
        assert!(contains_interior(&sq, Point2::new(0.5, 0.5)));
        assert!(!contains_interior(&sq, Point2::new(0.5, 0.0)));
        assert!(!contains_interior(&sq, Point2::new(2.0, 2.0)));
        assert!(!contains_interior(&sq, Point2::new(f64::NAN, 0.5)));
    }

    #[test]
    fn vertex_distance_fixtures() {
        for d in vertex_distances(&tri(), Point2::default()).unwrap() {
            assert!((d - 1.0).abs() < 1e-12);
        }
        for d in vertex_distances(&square(), Point2::default()).unwrap() {
            assert!((d - 2f64.sqrt()).abs() < 1e-12);
        }
        let skew = validate_polygon(&[
            Point2::new(0.0, 0.0),
            Point2::new(4.0, 0.0),
            Point2::new(0.0, 3.0),
        ])
        .unwrap();
        let d = vertex_distances(&skew, Point2::new(1.0, 1.0)).unwrap();
        // (1,1)→(0,0): √2, →(4,0): √(9+1), →(0,3): √(1+4)
        let expect = [2f64.sqrt(), 10f64.sqrt(), 5f64.sqrt()];
        for (a, b) in d.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(
            vertex_distances(&skew, Point2::new(5.0, 5.0)),
            Err(Geom2dError::ProbeNotInterior { x: 5.0, y: 5.0 })
        );
    }

    #[test]
    fn perpendicular_fixtures() {
        let p = perpendicular_pedal(&tri(), Point2::default()).unwrap();
        assert_eq!(p.angle_deg, 90.0);
        assert_eq!(p.entries.len(), 3);
        for e in &p.entries {
            assert!((e.distance - 0.5).abs() < 1e-12);
            assert!(e.on_segment());
        }
        let q = perpendicular_pedal(&square(), Point2::default()).unwrap();
        for e in &q.entries {
            assert!((e.distance - 1.0).abs() < 1e-12);
            assert!((e.t - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn foot_outside_segment_is_flagged() {
        let obtuse = validate_polygon(&[
            Point2::new(0.0, 0.0),
            Point2::new(10.0, 0.0),
            Point2::new(11.0, 1.0),
        ])
        .unwrap();
        let m = Point2::new(10.5, 0.7);
        let p = perpendicular_pedal(&obtuse, m).unwrap();
        assert!(p.entries.iter().any(|e| !e.on_segment()));
    }

    #[test]
    fn oblique_fixtures() {
        let sq = square();
        let o = oblique_pedal(&sq, Point2::default(), 30.0).unwrap();
        for e in &o.entries {
            assert!((e.distance - 2.0).abs() < 1e-12);
        }
        let m = Point2::new(0.3, -0.2);
        let perp = perpendicular_pedal(&sq, m).unwrap();
        let at90 = oblique_pedal(&sq, m, 90.0).unwrap();
        for (a, b) in perp.entries.iter().zip(&at90.entries) {
            assert!((a.distance - b.distance).abs() < 1e-12);
            assert!(a.foot.distance(b.foot) < 1e-12);
        }
        for bad in [0.0, 180.0, -5.0, 200.0, f64::NAN] {
            assert!(matches!(
                oblique_pedal(&sq, m, bad),
                Err(Geom2dError::DegenerateAngle(_))
            ));
        }
    }

    #[test]
    fn oblique_feet_lie_on_side_lines_at_the_stated_angle() {
        let sq = square();
        let m = Point2::new(0.4, 0.1);
        for alpha in [15.0, 60.0, 135.0] {
            let o = oblique_pedal(&sq, m, alpha).unwrap();
            for e in &o.entries {
                let (a, b) = sq.side(e.side);
                let u = b - a;
                assert!(u.cross(e.foot - a).abs() / u.norm() < 1e-12);
                let v = m - e.foot;
                let angle = u.cross(v).atan2(u.dot(v)).to_degrees();
                assert!((angle - alpha).abs() < 1e-9, "{angle} vs {alpha}");
            }
        }
    }

    #[test]
    fn ratio_fixtures() {
        let r = em_ratio(&tri(), Point2::default(), 90.0).unwrap();
        assert!((r.ratio - 2.0).abs() < 1e-9);
        let s = em_ratio(&square(), Point2::default(), 90.0).unwrap();
        assert!((s.ratio - 2f64.sqrt()).abs() < 1e-9);
        let o = em_ratio(&square(), Point2::default(), 30.0).unwrap();
        assert!((o.ratio - 2f64.sqrt() / 2.0).abs() < 1e-9);
    }

    #[test]
    fn skew_triangle_ratio_matches_desk_computation() {
        // Triangle (0,0),(4,0),(0,3), probe (1,1):
        // vertex sum √2 + √10 + √5; side lines y=0, 3x+4y=12, x=0 give
        // distances 1, |3+4-12|/5 = 1, 1.
        let skew = validate_polygon(&[
            Point2::new(0.0, 0.0),
            Point2::new(4.0, 0.0),
            Point2::new(0.0, 3.0),
        ])
        .unwrap();
        let r = em_ratio(&skew, Point2::new(1.0, 1.0), 90.0).unwrap();
        let expected = (2f64.sqrt() + 10f64.sqrt() + 5f64.sqrt()) / 3.0;
        assert!((r.ratio - expected).abs() < 1e-9);
        assert!((r.sum_pedal - 3.0).abs() < 1e-12);
    }

    #[test]
    fn regular_polygon_centre_hits_floor() {
        for n in 3..=12 {
            let p = regular_polygon(n, 1.7).unwrap();
            let r = em_ratio(&p, Point2::default(), 90.0).unwrap();
            assert!((r.ratio - regular_floor(n, 90.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn polygon_file_round_trip() {
        let json = r#"{"vertices": [[0,0],[1,0],[0,1]]}"#;
        let f: PolygonFile = serde_json::from_str(json).unwrap();
        let p = ConvexPolygon2D::try_from(f).unwrap();
        assert_eq!(p.len(), 3);
        let back = serde_json::to_string(&PolygonFile::from(&p)).unwrap();
        assert_eq!(back, r#"{"vertices":[[0.0,0.0],[1.0,0.0],[0.0,1.0]]}"#);
    }
}
