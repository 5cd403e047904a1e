//! Nested derivative-free minimization of the Erdős–Mordell ratio.
//!
//! The inner loop moves the probe: it is written as a convex combination of the
//! shape's vertices with weights `softmax(z)` over unconstrained logits `z`, so
//! every candidate is strictly interior and Nelder–Mead needs no penalty terms.
//! The outer loop moves the shape: random convex samples refined by
//! Nelder–Mead on raw vertex coordinates, with invalid shapes scored `+∞`.
//!
//! Every restart owns an RNG derived from `hash(seed, domain, restart)`, and
//! restarts are reduced by `(ratio, restart index)`, so estimates are bitwise
//! identical whatever the execution strategy.

mod nelder_mead;

pub use nelder_mead::{nelder_mead, NelderMeadOptions, NelderMeadResult};

use std::f64::consts::PI;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::geom2d::{self, ConvexPolygon2D, Geom2dError, Point2, PolygonFile};
use crate::geom3d::{self, Geom3dError, Point3, Polyhedron3D, PolyhedronFile, Target3};
use crate::par::Execution;
use crate::store::Record;

/// Margin below a conjectured floor that turns an estimate into a counterexample.
pub const COUNTEREXAMPLE_MARGIN: f64 = 1e-3;
/// Kazarinoff's conjectured tetrahedron constant for face pedals, `2√2`.
pub const KAZARINOFF_FLOOR: f64 = 2.0 * std::f64::consts::SQRT_2;

const SAMPLER_RETRY_CAP: usize = 100_000;
const DOMAIN_INNER: u64 = 1;
const DOMAIN_OUTER_2D: u64 = 2;
const DOMAIN_OUTER_3D: u64 = 3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OptimizerError {
    #[error("objective is not finite at the start point")]
    ObjectiveNotFinite,
    #[error("no valid shape was evaluated within the budget")]
    BudgetTooSmall,
    #[error("invalid optimizer configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Geom2d(#[from] Geom2dError),
    #[error(transparent)]
    Geom3d(#[from] Geom3dError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub seed: u64,
    pub restarts: usize,
    pub inner_iterations: usize,
    pub outer_iterations: usize,
    pub simplex_tolerance: f64,
    /// Minimum initial simplex step per coordinate.
    pub shrink_floor: f64,
    #[serde(skip)]
    pub execution: Execution,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            seed: 0,
            restarts: 16,
            inner_iterations: 300,
            outer_iterations: 2000,
            simplex_tolerance: 1e-9,
            shrink_floor: 0.05,
            execution: Execution::default(),
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<(), OptimizerError> {
        let bad = |m: &str| Err(OptimizerError::InvalidConfig(m.into()));
        if self.restarts == 0 {
            return bad("restarts must be at least 1");
        }
        if self.inner_iterations == 0 || self.outer_iterations == 0 {
            return bad("iteration budgets must be positive");
        }
        if !(self.simplex_tolerance > 0.0) || !(self.shrink_floor > 0.0) {
            return bad("tolerances must be positive");
        }
        Ok(())
    }

    fn inner_options(&self) -> NelderMeadOptions {
        NelderMeadOptions {
            max_iterations: self.inner_iterations,
            tolerance: self.simplex_tolerance,
            step_floor: self.shrink_floor.max(0.5),
        }
    }

    fn outer_options(&self) -> NelderMeadOptions {
        NelderMeadOptions {
            max_iterations: self.outer_iterations,
            tolerance: self.simplex_tolerance,
            step_floor: self.shrink_floor,
        }
    }
}

/// RNG for one restart: ChaCha8 keyed by `sha256(seed ‖ domain ‖ index)`.
pub fn derive_rng(seed: u64, domain: u64, index: u64) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(domain.to_le_bytes());
    h.update(index.to_le_bytes());
    let digest = h.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(key)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    Polygon(ConvexPolygon2D),
    Polyhedron(Polyhedron3D),
}

impl Shape {
    fn vertex_count(&self) -> usize {
        match self {
            Shape::Polygon(p) => p.len(),
            Shape::Polyhedron(p) => p.vertices().len(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    Sides,
    Faces,
    Edges,
}

impl From<Target3> for Target {
    fn from(t: Target3) -> Self {
        match t {
            Target3::Faces => Target::Faces,
            Target3::Edges => Target::Edges,
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Target::Sides => "sides",
            Target::Faces => "faces",
            Target::Edges => "edges",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Probe {
    Plane(Point2),
    Space(Point3),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ShapeRecord {
    Polyhedron(PolyhedronFile),
    Polygon(PolygonFile),
}

impl From<&Shape> for ShapeRecord {
    fn from(s: &Shape) -> Self {
        match s {
            Shape::Polygon(p) => ShapeRecord::Polygon(p.into()),
            Shape::Polyhedron(p) => ShapeRecord::Polyhedron(p.into()),
        }
    }
}

impl TryFrom<&ShapeRecord> for Shape {
    type Error = OptimizerError;
    fn try_from(r: &ShapeRecord) -> Result<Self, Self::Error> {
        Ok(match r {
            ShapeRecord::Polygon(f) => Shape::Polygon(geom2d::validate_polygon(&f.vertices)?),
            ShapeRecord::Polyhedron(f) => {
                Shape::Polyhedron(geom3d::validate_polyhedron(&f.vertices, &f.faces)?)
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family3 {
    Tetrahedron,
    Mesh,
}

/// `n` for polygons, the family name for polyhedra.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ShapeClass {
    Vertices(usize),
    Family(Family3),
}

/// Ratio of `shape` at probe `m`, with pedals chosen by `target`.
pub fn evaluate(
    shape: &Shape,
    probe: Probe,
    angle_deg: f64,
    target: Target,
) -> Result<f64, OptimizerError> {
    match (shape, probe, target) {
        (Shape::Polygon(p), Probe::Plane(m), Target::Sides) => {
            Ok(geom2d::em_ratio(p, m, angle_deg)?.ratio)
        }
        (Shape::Polyhedron(p), Probe::Space(m), Target::Faces) => {
            Ok(geom3d::em_ratio_3d(p, m, Target3::Faces)?.ratio)
        }
        (Shape::Polyhedron(p), Probe::Space(m), Target::Edges) => {
            Ok(geom3d::em_ratio_3d(p, m, Target3::Edges)?.ratio)
        }
        _ => Err(OptimizerError::InvalidConfig(format!(
            "target {target} does not match the shape or probe"
        ))),
    }
}

fn check_target(shape: &Shape, target: Target) -> Result<(), OptimizerError> {
    match (shape, target) {
        (Shape::Polygon(_), Target::Sides)
        | (Shape::Polyhedron(_), Target::Faces | Target::Edges) => Ok(()),
        _ => Err(OptimizerError::InvalidConfig(format!(
            "target {target} does not apply to this shape"
        ))),
    }
}

/// Probe from logits `z` (the last vertex's logit is pinned at 0).
fn probe_from_logits(shape: &Shape, z: &[f64]) -> Probe {
    let top = z.iter().copied().fold(0.0, f64::max);
    let mut weights: Vec<f64> = z.iter().map(|&zi| (zi - top).exp()).collect();
    weights.push((-top).exp());
    let total: f64 = weights.iter().sum();
    match shape {
        Shape::Polygon(p) => {
            let m = p
                .vertices()
                .iter()
                .zip(&weights)
                .fold(Point2::default(), |acc, (&v, &w)| acc + v * (w / total));
            Probe::Plane(m)
        }
        Shape::Polyhedron(p) => {
            let m = p
                .vertices()
                .iter()
                .zip(&weights)
                .fold(Point3::default(), |acc, (&v, &w)| acc + v * (w / total));
            Probe::Space(m)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeMinimum {
    pub probe: Probe,
    pub min_ratio: f64,
    pub converged: bool,
    pub evaluations: u64,
}

/// One Nelder–Mead run over probe logits. Returns the best evaluation seen,
/// which is never worse than the start. Non-interior probes score `+∞`.
fn minimize_probe(
    shape: &Shape,
    angle_deg: f64,
    target: Target,
    start: &[f64],
    opts: &NelderMeadOptions,
) -> Option<ProbeMinimum> {
    let mut best: Option<(f64, Probe)> = None;
    let objective = |z: &[f64]| {
        let probe = probe_from_logits(shape, z);
        match evaluate(shape, probe, angle_deg, target) {
            Ok(r) if r.is_finite() => {
                if best.is_none_or(|(b, _)| r < b) {
                    best = Some((r, probe));
                }
                r
            }
            _ => f64::INFINITY,
        }
    };
    let result = nelder_mead(objective, start, opts).ok()?;
    let (min_ratio, probe) = best?;
    Some(ProbeMinimum {
        probe,
        min_ratio,
        converged: result.converged,
        evaluations: result.evaluations as u64,
    })
}

fn reduce_min<T, F>(items: Vec<T>, key: F) -> Option<T>
where
    F: Fn(&T) -> f64,
{
    // First minimal element wins, which keeps ties on the lowest restart index.
    items.into_iter().fold(None, |acc: Option<T>, x| match acc {
        Some(a) if key(&a) <= key(&x) => Some(a),
        _ => Some(x),
    })
}

/// Minimizes the ratio over interior probes of a fixed shape, taking the best
/// of `cfg.restarts` seeded restarts (restart 0 starts at the vertex centroid).
pub fn inner_min_probe(
    shape: &Shape,
    angle_deg: f64,
    target: Target,
    cfg: &OptimizerConfig,
) -> Result<ProbeMinimum, OptimizerError> {
    cfg.validate()?;
    check_target(shape, target)?;
    let dim = shape.vertex_count() - 1;
    let start0 = vec![0.0; dim];
    // Surfaces geometry errors (e.g. a degenerate angle) before searching.
    evaluate(shape, probe_from_logits(shape, &start0), angle_deg, target)?;
    let opts = cfg.inner_options();
    let runs = cfg.execution.map_indexed(cfg.restarts, |r| {
        let start = if r == 0 {
            start0.clone()
        } else {
            let mut rng = derive_rng(cfg.seed, DOMAIN_INNER, r as u64);
            (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect()
        };
        minimize_probe(shape, angle_deg, target, &start, &opts)
    });
    let evaluations = runs.iter().flatten().map(|m| m.evaluations).sum();
    let best = reduce_min(runs.into_iter().flatten().collect(), |m| m.min_ratio)
        .ok_or(OptimizerError::BudgetTooSmall)?;
    Ok(ProbeMinimum {
        evaluations,
        ..best
    })
}

/// Random convex `n`-gon: sorted uniform angles, radii in `[1 - spread, 1]`
/// with `spread` starting at 0.8 (radius floor 0.2) and narrowing on each
/// rejection, so large `n` still terminates.
pub fn sample_convex_polygon<R: Rng + ?Sized>(n: usize, rng: &mut R) -> ConvexPolygon2D {
    assert!(n >= 3, "a polygon needs at least 3 vertices");
    let mut spread = 0.8;
    for _ in 0..SAMPLER_RETRY_CAP {
        let mut angles: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
        angles.sort_by(f64::total_cmp);
        let pts: Vec<Point2> = angles
            .iter()
            .map(|&t| {
                let r = 1.0 - spread * rng.random::<f64>();
                Point2::new(r * t.cos(), r * t.sin())
            })
            .collect();
        if let Ok(p) = geom2d::validate_polygon(&pts) {
            return p;
        }
        spread *= 0.97;
    }
    unreachable!("convex polygon sampler exhausted its retry cap for n = {n}")
}

/// Random non-degenerate tetrahedron with vertices in `[-1, 1]^3`.
pub fn sample_tetrahedron<R: Rng + ?Sized>(rng: &mut R) -> Polyhedron3D {
    for _ in 0..SAMPLER_RETRY_CAP {
        let mut pt = || {
            Point3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            )
        };
        let pts = [pt(), pt(), pt(), pt()];
        let volume = (pts[1] - pts[0])
            .cross(pts[2] - pts[0])
            .dot(pts[3] - pts[0])
            .abs()
            / 6.0;
        if volume < 0.05 {
            continue;
        }
        if let Ok(t) = geom3d::tetrahedron(pts) {
            return t;
        }
    }
    unreachable!("tetrahedron sampler exhausted its retry cap")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantEstimate {
    pub n: ShapeClass,
    pub angle_deg: f64,
    pub target: Target,
    pub min_ratio: f64,
    pub shape: ShapeRecord,
    pub probe: Probe,
    pub seed: u64,
    pub restarts: usize,
    pub converged: bool,
    /// Conjectured lower bound this estimate is checked against, if any.
    pub floor: Option<f64>,
    pub counterexample: bool,
    pub evaluations: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<u64>,
}

impl ConstantEstimate {
    /// Re-evaluates the recorded argmin through the geometry engines.
    pub fn reevaluate(&self) -> Result<f64, OptimizerError> {
        let shape = Shape::try_from(&self.shape)?;
        evaluate(&shape, self.probe, self.angle_deg, self.target)
    }
}

impl Record for ConstantEstimate {
    const KIND: &'static str = "constant_estimate";
    type Key = String;
    fn key(&self) -> String {
        format!(
            "{:?}/{}/{}/{}",
            self.n, self.angle_deg, self.target, self.seed
        )
    }
}

#[derive(Debug, Clone)]
struct Candidate {
    ratio: f64,
    shape: Shape,
    probe: Probe,
    converged: bool,
    evaluations: u64,
}

/// Outer Nelder–Mead over flattened vertex coordinates; `build` turns a
/// coordinate vector into a validated shape or `None`.
fn refine_shape<B>(
    start_shape: Shape,
    coords: Vec<f64>,
    build: B,
    angle_deg: f64,
    target: Target,
    cfg: &OptimizerConfig,
) -> Option<Candidate>
where
    B: Fn(&[f64]) -> Option<Shape>,
{
    let inner = cfg.inner_options();
    let dim = start_shape.vertex_count() - 1;
    let zeros = vec![0.0; dim];
    let mut best: Option<Candidate> = None;
    let mut evaluations = 0u64;
    let consider = |shape: &Shape, m: ProbeMinimum, best: &mut Option<Candidate>| {
        if best.as_ref().is_none_or(|b| m.min_ratio < b.ratio) {
            *best = Some(Candidate {
                ratio: m.min_ratio,
                shape: shape.clone(),
                probe: m.probe,
                converged: false,
                evaluations: 0,
            });
        }
    };
    let outer = {
        let objective = |x: &[f64]| {
            let Some(shape) = build(x) else {
                return f64::INFINITY;
            };
            match minimize_probe(&shape, angle_deg, target, &zeros, &inner) {
                Some(m) => {
                    evaluations += m.evaluations;
                    let r = m.min_ratio;
                    consider(&shape, m, &mut best);
                    r
                }
                None => f64::INFINITY,
            }
        };
        nelder_mead(objective, &coords, &cfg.outer_options()).ok()
    };
    let mut best = best?;
    // Polish the probe on the best shape with a longer inner run.
    let polish = NelderMeadOptions {
        max_iterations: inner.max_iterations * 4,
        ..inner
    };
    if let Some(m) = minimize_probe(&best.shape, angle_deg, target, &zeros, &polish) {
        evaluations += m.evaluations;
        let shape = best.shape.clone();
        let mut slot = Some(best);
        consider(&shape, m, &mut slot);
        best = slot.expect("candidate present");
    }
    best.converged = outer.is_some_and(|r| r.converged);
    best.evaluations = evaluations;
    Some(best)
}

fn polygon_from_coords(x: &[f64]) -> Option<Shape> {
    let pts: Vec<Point2> = x.chunks_exact(2).map(|c| Point2::new(c[0], c[1])).collect();
    geom2d::validate_polygon(&pts).ok().map(Shape::Polygon)
}

fn tetra_from_coords(x: &[f64]) -> Option<Shape> {
    let p = |i: usize| Point3::new(x[3 * i], x[3 * i + 1], x[3 * i + 2]);
    geom3d::tetrahedron([p(0), p(1), p(2), p(3)])
        .ok()
        .map(Shape::Polyhedron)
}

fn finish(
    best: Candidate,
    n: ShapeClass,
    angle_deg: f64,
    target: Target,
    cfg: &OptimizerConfig,
    floor: Option<f64>,
    evaluations: u64,
) -> ConstantEstimate {
    let counterexample = floor.is_some_and(|f| best.ratio < f - COUNTEREXAMPLE_MARGIN);
    ConstantEstimate {
        n,
        angle_deg,
        target,
        min_ratio: best.ratio,
        shape: ShapeRecord::from(&best.shape),
        probe: best.probe,
        seed: cfg.seed,
        restarts: cfg.restarts,
        converged: best.converged,
        floor,
        counterexample,
        evaluations,
        timestamp: None,
    }
}

/// Smallest ratio found over convex `n`-gons and their interior probes.
///
/// The estimate is flagged as a counterexample when it falls more than
/// [`COUNTEREXAMPLE_MARGIN`] below `sin α · sec(π/n)`, the value of the
/// regular polygon's centre.
pub fn estimate_constant_2d(
    n: usize,
    angle_deg: f64,
    cfg: &OptimizerConfig,
) -> Result<ConstantEstimate, OptimizerError> {
    cfg.validate()?;
    if n < 3 {
        return Err(OptimizerError::InvalidConfig(format!(
            "polygons need n >= 3, got {n}"
        )));
    }
    if !(angle_deg > 0.0 && angle_deg < 180.0) {
        return Err(Geom2dError::DegenerateAngle(angle_deg).into());
    }
    let runs = cfg.execution.map_indexed(cfg.restarts, |r| {
        let mut rng = derive_rng(cfg.seed, DOMAIN_OUTER_2D, r as u64);
        let poly = sample_convex_polygon(n, &mut rng);
        let coords: Vec<f64> = poly.vertices().iter().flat_map(|p| [p.x, p.y]).collect();
        refine_shape(
            Shape::Polygon(poly),
            coords,
            polygon_from_coords,
            angle_deg,
            Target::Sides,
            cfg,
        )
    });
    let evaluations = runs.iter().flatten().map(|c| c.evaluations).sum();
    let best = reduce_min(runs.into_iter().flatten().collect(), |c| c.ratio)
        .ok_or(OptimizerError::BudgetTooSmall)?;
    Ok(finish(
        best,
        ShapeClass::Vertices(n),
        angle_deg,
        Target::Sides,
        cfg,
        Some(geom2d::regular_floor(n, angle_deg)),
        evaluations,
    ))
}

#[derive(Debug, Clone)]
pub enum Family3Input {
    /// Outer search over all tetrahedra.
    Tetrahedron,
    /// Inner minimization only, on a fixed user mesh.
    Mesh(Polyhedron3D),
}

/// Smallest face- or edge-target ratio found. For tetrahedra with face
/// pedals the estimate is checked against `2√2`.
pub fn estimate_constant_3d(
    family: &Family3Input,
    target: Target3,
    cfg: &OptimizerConfig,
) -> Result<ConstantEstimate, OptimizerError> {
    cfg.validate()?;
    let tgt = Target::from(target);
    match family {
        Family3Input::Mesh(mesh) => {
            let shape = Shape::Polyhedron(mesh.clone());
            let m = inner_min_probe(&shape, 90.0, tgt, cfg)?;
            let best = Candidate {
                ratio: m.min_ratio,
                shape,
                probe: m.probe,
                converged: m.converged,
                evaluations: m.evaluations,
            };
            Ok(finish(
                best,
                ShapeClass::Family(Family3::Mesh),
                90.0,
                tgt,
                cfg,
                None,
                m.evaluations,
            ))
        }
        Family3Input::Tetrahedron => {
            let runs = cfg.execution.map_indexed(cfg.restarts, |r| {
                let mut rng = derive_rng(cfg.seed, DOMAIN_OUTER_3D, r as u64);
                let tet = sample_tetrahedron(&mut rng);
                let coords: Vec<f64> = tet
                    .vertices()
                    .iter()
                    .flat_map(|p| [p.x, p.y, p.z])
                    .collect();
                refine_shape(
                    Shape::Polyhedron(tet),
                    coords,
                    tetra_from_coords,
                    90.0,
                    tgt,
                    cfg,
                )
            });
            let evaluations = runs.iter().flatten().map(|c| c.evaluations).sum();
            let best = reduce_min(runs.into_iter().flatten().collect(), |c| c.ratio)
                .ok_or(OptimizerError::BudgetTooSmall)?;
            let floor = (target == Target3::Faces).then_some(KAZARINOFF_FLOOR);
            Ok(finish(
                best,
                ShapeClass::Family(Family3::Tetrahedron),
                90.0,
                tgt,
                cfg,
                floor,
                evaluations,
            ))
        }
    }
}
