use std::f64::consts::PI;

use conjlab::fermat::{prime_positions, validate_triplet, Policy, SearchRecord};
use conjlab::geom2d::{
    em_ratio, perpendicular_pedal, validate_polygon, vertex_distances, ConvexPolygon2D, Point2,
};
use conjlab::geom3d::{em_ratio_3d, tetrahedron, Point3, Target3};
use conjlab::optimizer::KAZARINOFF_FLOOR;
use conjlab::store::{export_csv, read_values, RecordFile};
use proptest::prelude::*;

/// Vertices on an axis-aligned ellipse at sorted angles, plus a strictly
/// interior probe given by positive barycentric-style weights.
fn polygon_and_probe() -> impl Strategy<Value = (Vec<Point2>, Point2)> {
    (3usize..=8)
        .prop_flat_map(|n| {
            (
                prop::collection::vec(0.0..2.0 * PI, n),
                0.3f64..3.0,
                0.3f64..3.0,
                prop::collection::vec(0.05f64..1.0, n),
            )
        })
        .prop_filter_map("angles too close", |(mut angles, sx, sy, weights)| {
            angles.sort_by(f64::total_cmp);
            let n = angles.len();
            let min_gap = (0..n)
                .map(|i| {
                    let next = if i + 1 == n {
                        angles[0] + 2.0 * PI
                    } else {
                        angles[i + 1]
                    };
                    next - angles[i]
                })
                .fold(f64::INFINITY, f64::min);
            if !(0.05..=PI).contains(&min_gap) {
                return None;
            }
            let pts: Vec<Point2> = angles
                .iter()
                .map(|t| Point2::new(sx * t.cos(), sy * t.sin()))
                .collect();
            let total: f64 = weights.iter().sum();
            let probe = pts
                .iter()
                .zip(&weights)
                .fold(Point2::new(0.0, 0.0), |acc, (p, w)| acc + *p * (w / total));
            Some((pts, probe))
        })
}

fn polygon(pts: &[Point2]) -> ConvexPolygon2D {
    validate_polygon(pts).expect("generator yields convex polygons")
}

/// Distance from `m` to the line through `a`, `b` as twice-area over base.
fn line_distance(m: Point2, a: Point2, b: Point2) -> f64 {
    let (ux, uy) = (b.x - a.x, b.y - a.y);
    ((m.x - a.x) * uy - (m.y - a.y) * ux).abs() / ux.hypot(uy)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn termwise_domination_and_oracle_agreement((pts, m) in polygon_and_probe()) {
        let poly = polygon(&pts);
        let pedal = perpendicular_pedal(&poly, m).unwrap();
        let verts = vertex_distances(&poly, m).unwrap();
        let n = poly.len();
        for (i, e) in pedal.entries.iter().enumerate() {
            let (a, b) = (poly.vertices()[i], poly.vertices()[(i + 1) % n]);
            prop_assert!((e.distance - line_distance(m, a, b)).abs() < 1e-9);
            prop_assert!(e.distance <= verts[i] + 1e-12);
        }
        prop_assert!(em_ratio(&poly, m, 90.0).unwrap().ratio >= 1.0);
    }

    #[test]
    fn feet_are_orthogonal_to_sides((pts, m) in polygon_and_probe()) {
        let poly = polygon(&pts);
        let n = poly.len();
        for (i, e) in perpendicular_pedal(&poly, m).unwrap().entries.iter().enumerate() {
            let (a, b) = (poly.vertices()[i], poly.vertices()[(i + 1) % n]);
            let dot = (e.foot.x - m.x) * (b.x - a.x) + (e.foot.y - m.y) * (b.y - a.y);
            prop_assert!(dot.abs() < 1e-9, "side {i}: {dot}");
        }
    }

    #[test]
    fn oblique_identity((pts, m) in polygon_and_probe(), alpha in 1.0f64..179.0) {
        let poly = polygon(&pts);
        let perp = em_ratio(&poly, m, 90.0).unwrap().ratio;
        let obl = em_ratio(&poly, m, alpha).unwrap().ratio;
        prop_assert!((obl - alpha.to_radians().sin() * perp).abs() < 1e-9);
    }

    #[test]
    fn similarity_invariance(
        (pts, m) in polygon_and_probe(),
        theta in 0.0f64..2.0 * PI,
        scale in 0.1f64..10.0,
        dx in -50.0f64..50.0,
        dy in -50.0f64..50.0,
    ) {
        let map = |p: Point2| {
            let (s, c) = theta.sin_cos();
            Point2::new(scale * (c * p.x - s * p.y) + dx, scale * (s * p.x + c * p.y) + dy)
        };
        let moved: Vec<Point2> = pts.iter().copied().map(map).collect();
        let r0 = em_ratio(&polygon(&pts), m, 90.0).unwrap().ratio;
        let r1 = em_ratio(&polygon(&moved), map(m), 90.0).unwrap().ratio;
        prop_assert!((r0 - r1).abs() < 1e-9, "{r0} vs {r1}");
    }

    #[test]
    fn vertex_order_invariance((pts, m) in polygon_and_probe(), shift in 0usize..8) {
        let mut rotated = pts.clone();
        rotated.rotate_left(shift % pts.len());
        let a = em_ratio(&polygon(&pts), m, 90.0).unwrap();
        let b = em_ratio(&polygon(&rotated), m, 90.0).unwrap();
        prop_assert!((a.sum_vertex - b.sum_vertex).abs() < 1e-12);
        prop_assert!((a.sum_pedal - b.sum_pedal).abs() < 1e-12);
        let mut reversed = pts.clone();
        reversed.reverse();
        let c = em_ratio(&polygon(&reversed), m, 90.0).unwrap();
        prop_assert!((a.ratio - c.ratio).abs() < 1e-12);
    }

    #[test]
    fn triangle_floor_holds((pts, m) in polygon_and_probe()) {
        let poly = polygon(&pts);
        if poly.len() == 3 {
            prop_assert!(em_ratio(&poly, m, 90.0).unwrap().ratio >= 2.0 - 1e-9);
        }
    }

    #[test]
    fn random_tetrahedra_respect_the_face_floor(
        coords in prop::collection::vec(-1.0f64..1.0, 12),
        w in prop::collection::vec(0.05f64..1.0, 4),
    ) {
        let p = |i: usize| Point3::new(coords[3 * i], coords[3 * i + 1], coords[3 * i + 2]);
        let pts = [p(0), p(1), p(2), p(3)];
        let vol = (pts[1] - pts[0]).cross(pts[2] - pts[0]).dot(pts[3] - pts[0]).abs() / 6.0;
        prop_assume!(vol > 1e-3);
        let tet = tetrahedron(pts).unwrap();
        let total: f64 = w.iter().sum();
        let m = pts.iter().zip(&w).fold(Point3::new(0.0, 0.0, 0.0), |acc, (q, wi)| acc + *q * (wi / total));
        let faces = em_ratio_3d(&tet, m, Target3::Faces).unwrap();
        prop_assert!(faces.ratio >= KAZARINOFF_FLOOR - 1e-9, "ratio {}", faces.ratio);
        // Each edge distance is at most the mean of its endpoint distances and
        // every vertex meets three edges, so the edge ratio is at least 2/3.
        let edges = em_ratio_3d(&tet, m, Target3::Edges).unwrap();
        prop_assert!(edges.ratio >= 2.0 / 3.0);
    }

    #[test]
    fn search_records_are_consistent(a in 2i64..12, b in 2i64..6, c in -15i64..15, k_max in 0u32..6) {
        let Ok(t) = validate_triplet(a, b, c) else {
            return Ok(());
        };
        let rec = prime_positions(&t, k_max, &Policy::default());
        prop_assert!(rec.check_consistency().is_ok(), "{:?}", rec.check_consistency());
        prop_assert_eq!(rec.verdicts.len() as u32, k_max + 1);
    }
}

#[test]
fn records_round_trip_and_export_one_row_each() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("search.jsonl");
    let mut file = RecordFile::<SearchRecord>::create(&path).unwrap();
    let mut written = Vec::new();
    for (a, b, c) in [(2, 2, 1), (2, 3, -1), (3, 2, 5), (6, 2, 1), (2, 2, -9)] {
        let rec = prime_positions(&validate_triplet(a, b, c).unwrap(), 4, &Policy::default());
        file.append(rec.clone()).unwrap();
        written.push(rec);
    }
    let back = RecordFile::<SearchRecord>::open(&path).unwrap();
    assert_eq!(back.records(), written.as_slice());

    let values = read_values(&path).unwrap();
    let cols: Vec<String> = ["a", "b", "c", "k0", "prime_positions", "policy.trial_bound"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let table = export_csv(&values, &cols, false).unwrap();
    assert_eq!(table.lines().count(), written.len() + 1);
    assert!(table.lines().nth(3).unwrap().starts_with("3,2,5,,,100000"));
}
