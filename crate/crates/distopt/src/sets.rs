//! Convex constraint sets with exact Euclidean projections, plus an
//! intersection projector used by the convergence diagnostics.
//!
//! The set menu is deliberately small — boxes, balls, scaled standard
//! simplices, and the full space — so that every projection is either
//! closed-form or a classical finite algorithm and the per-step cost of the
//! scheme stays auditable. Intersections are projected onto with Dykstra's
//! alternating method, which (unlike plain alternating projections) converges
//! to the exact Euclidean projection.

use crate::error::{Error, Result};
use crate::Vector;

#[derive(Debug, Clone, PartialEq)]
pub enum ConvexSet {
    /// Axis-aligned box `{ x : lower <= x <= upper }`.
    Box { lower: Vector, upper: Vector },
    /// Euclidean ball of positive radius.
    Ball { center: Vector, radius: f64 },
    /// Scaled standard simplex `{ x >= 0 : sum x = scale }`.
    Simplex { scale: f64, dim: usize },
    /// All of R^dim. Admitted for the learning parameter set only; never
    /// valid as an agent constraint set (those must be compact).
    FullSpace { dim: usize },
}

impl ConvexSet {
    pub fn dim(&self) -> usize {
        match self {
            ConvexSet::Box { lower, .. } => lower.len(),
            ConvexSet::Ball { center, .. } => center.len(),
            ConvexSet::Simplex { dim, .. } => *dim,
            ConvexSet::FullSpace { dim } => *dim,
        }
    }

    pub fn is_compact(&self) -> bool {
        !matches!(self, ConvexSet::FullSpace { .. })
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            ConvexSet::Box { .. } => "box",
            ConvexSet::Ball { .. } => "ball",
            ConvexSet::Simplex { .. } => "simplex",
            ConvexSet::FullSpace { .. } => "full_space",
        }
    }

    /// Structural validation: bounds ordered, radii and scales positive.
    pub fn validate(&self) -> Result<()> {
        match self {
            ConvexSet::Box { lower, upper } => {
                if lower.len() != upper.len() {
                    return Err(Error::DimensionMismatch {
                        context: "box bounds",
                        expected: lower.len(),
                        actual: upper.len(),
                    });
                }
                if lower.is_empty() {
                    return Err(Error::InvalidArgument("box dimension must be positive".into()));
                }
                for i in 0..lower.len() {
                    if lower[i] > upper[i] {
                        return Err(Error::InvalidArgument(format!(
                            "box bound lower[{i}] = {} exceeds upper[{i}] = {}",
                            lower[i], upper[i]
                        )));
                    }
                }
                Ok(())
            }
            ConvexSet::Ball { center, radius } => {
                if center.is_empty() {
                    return Err(Error::InvalidArgument("ball dimension must be positive".into()));
                }
                if !(*radius > 0.0) {
                    return Err(Error::InvalidArgument(format!(
                        "ball radius must be positive, got {radius}"
                    )));
                }
                Ok(())
            }
            ConvexSet::Simplex { scale, dim } => {
                if *dim == 0 {
                    return Err(Error::InvalidArgument("simplex dimension must be positive".into()));
                }
                if !(*scale > 0.0) {
                    return Err(Error::InvalidArgument(format!(
                        "simplex scale must be positive, got {scale}"
                    )));
                }
                Ok(())
            }
            ConvexSet::FullSpace { dim } => {
                if *dim == 0 {
                    return Err(Error::InvalidArgument("dimension must be positive".into()));
                }
                Ok(())
            }
        }
    }

    fn check_dim(&self, p: &Vector) -> Result<()> {
        if p.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "projection input",
                expected: self.dim(),
                actual: p.len(),
            });
        }
        Ok(())
    }

    /// Exact Euclidean projection of `p` onto the set.
    pub fn project(&self, p: &Vector) -> Result<Vector> {
        self.check_dim(p)?;
        Ok(match self {
            ConvexSet::Box { lower, upper } => {
                Vector::from_fn(p.len(), |i, _| p[i].max(lower[i]).min(upper[i]))
            }
            ConvexSet::Ball { center, radius } => {
                let offset = p - center;
                let dist = offset.norm();
                if dist <= *radius {
                    p.clone()
                } else {
                    center + offset * (radius / dist)
                }
            }
            ConvexSet::Simplex { scale, .. } => project_simplex(p, *scale),
            ConvexSet::FullSpace { .. } => p.clone(),
        })
    }

    /// Euclidean distance from `p` to the set.
    pub fn distance(&self, p: &Vector) -> Result<f64> {
        Ok((p - self.project(p)?).norm())
    }

    pub fn contains(&self, p: &Vector, tol: f64) -> Result<bool> {
        Ok(self.distance(p)? <= tol)
    }

    /// Exact diameter of a compact set.
    pub fn diameter(&self) -> Result<f64> {
        match self {
            ConvexSet::Box { lower, upper } => Ok((upper - lower).norm()),
            ConvexSet::Ball { radius, .. } => Ok(2.0 * radius),
            ConvexSet::Simplex { scale, dim } => {
                // Farthest vertex pair is (c e_i, c e_j); a 1-d simplex is a point.
                if *dim == 1 {
                    Ok(0.0)
                } else {
                    Ok(scale * 2.0_f64.sqrt())
                }
            }
            ConvexSet::FullSpace { .. } => {
                Err(Error::UnboundedSet("full space has no finite diameter".into()))
            }
        }
    }

    /// Extreme points for polytopal variants (box vertices, simplex
    /// vertices). Used to bound gradient norms exactly over those sets.
    pub fn extreme_points(&self) -> Result<Vec<Vector>> {
        match self {
            ConvexSet::Box { lower, upper } => {
                let n = lower.len();
                if n > 20 {
                    return Err(Error::Unsupported(format!(
                        "vertex enumeration for a {n}-dimensional box"
                    )));
                }
                let mut points = Vec::with_capacity(1 << n);
                for mask in 0..(1usize << n) {
                    points.push(Vector::from_fn(n, |i, _| {
                        if mask >> i & 1 == 1 {
                            upper[i]
                        } else {
                            lower[i]
                        }
                    }));
                }
                Ok(points)
            }
            ConvexSet::Simplex { scale, dim } => Ok((0..*dim)
                .map(|i| Vector::from_fn(*dim, |j, _| if i == j { *scale } else { 0.0 }))
                .collect()),
            ConvexSet::Ball { .. } => Err(Error::Unsupported(
                "a ball has infinitely many extreme points".into(),
            )),
            ConvexSet::FullSpace { .. } => {
                Err(Error::UnboundedSet("full space has no extreme points".into()))
            }
        }
    }
}

/// Sort-based projection onto `{ x >= 0 : sum x = scale }`.
fn project_simplex(p: &Vector, scale: f64) -> Vector {
    let n = p.len();
    let mut sorted: Vec<f64> = p.iter().copied().collect();
    sorted.sort_by(|a, b| b.partial_cmp(a).expect("non-finite coordinate"));
    let mut running = 0.0;
    let mut threshold = 0.0;
    for (j, &u) in sorted.iter().enumerate() {
        running += u;
        let candidate = (running - scale) / (j as f64 + 1.0);
        if u - candidate > 0.0 {
            threshold = candidate;
        }
    }
    Vector::from_fn(n, |i, _| (p[i] - threshold).max(0.0))
}

/// The agent constraint sets `X_1, ..., X_m` together with cached
/// intersection metadata. Construction verifies that every member is compact
/// and that the intersection is nonempty.
#[derive(Debug, Clone, PartialEq)]
pub struct SetFamily {
    sets: Vec<ConvexSet>,
    /// For all-box families: the componentwise intersection box.
    intersection_box: Option<(Vector, Vector)>,
}

/// Default sweep cap for the alternating projection loop.
pub const DEFAULT_MAX_SWEEPS: usize = 10_000;

impl SetFamily {
    pub fn new(sets: Vec<ConvexSet>) -> Result<Self> {
        if sets.is_empty() {
            return Err(Error::InvalidArgument("a set family needs at least one set".into()));
        }
        let dim = sets[0].dim();
        for (i, set) in sets.iter().enumerate() {
            set.validate()?;
            if !set.is_compact() {
                return Err(Error::InvalidArgument(format!(
                    "agent constraint set {i} must be compact; full_space is not"
                )));
            }
            if set.dim() != dim {
                return Err(Error::DimensionMismatch {
                    context: "set family member",
                    expected: dim,
                    actual: set.dim(),
                });
            }
        }
        let intersection_box = intersection_box_of(&sets);
        if let Some((lower, upper)) = &intersection_box {
            for i in 0..lower.len() {
                if lower[i] > upper[i] {
                    return Err(Error::Precondition(format!(
                        "intersection of the agent constraint sets is empty \
                         (coordinate {i}: max lower {} > min upper {}); \
                         feasibility requires a nonempty intersection",
                        lower[i], upper[i]
                    )));
                }
            }
        } else {
            // Mixed family: probe feasibility by projecting a point onto the
            // intersection. Failure to converge indicates an empty (or
            // practically empty) intersection.
            let probe = sets[0].project(&Vector::zeros(dim))?;
            dykstra_project(&sets, &probe, 1e-8, DEFAULT_MAX_SWEEPS).map_err(|e| {
                Error::Precondition(format!(
                    "intersection of the agent constraint sets appears empty; \
                     feasibility requires a nonempty intersection ({e})"
                ))
            })?;
        }
        Ok(Self { sets, intersection_box })
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.sets[0].dim()
    }

    pub fn set(&self, i: usize) -> &ConvexSet {
        &self.sets[i]
    }

    pub fn sets(&self) -> &[ConvexSet] {
        &self.sets
    }

    pub fn all_boxes(&self) -> bool {
        self.intersection_box.is_some()
    }

    /// The componentwise intersection box, when every member is a box.
    pub fn intersection_box(&self) -> Option<(&Vector, &Vector)> {
        self.intersection_box.as_ref().map(|(l, u)| (l, u))
    }

    /// Projection of `p` onto the intersection of all member sets.
    ///
    /// All-box families use the exact closed form; other families run
    /// Dykstra's alternating method until successive iterates move less than
    /// `tol` and the iterate is within `tol` of every member set.
    pub fn project_intersection(&self, p: &Vector, tol: f64, max_sweeps: usize) -> Result<Vector> {
        if p.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "intersection projection input",
                expected: self.dim(),
                actual: p.len(),
            });
        }
        if let Some((lower, upper)) = &self.intersection_box {
            return Ok(Vector::from_fn(p.len(), |i, _| p[i].max(lower[i]).min(upper[i])));
        }
        if self.sets.len() == 1 {
            return self.sets[0].project(p);
        }
        dykstra_project(&self.sets, p, tol, max_sweeps)
    }

    /// Greatest distance from `p` to any member set.
    pub fn max_distance(&self, p: &Vector) -> Result<f64> {
        let mut worst = 0.0_f64;
        for set in &self.sets {
            worst = worst.max(set.distance(p)?);
        }
        Ok(worst)
    }

    /// A ball `{ z : ||z - center|| <= delta }` contained in the interior of
    /// the intersection. Implemented for all-box families, where the
    /// midpoint of the intersection box and half its smallest side are exact.
    pub fn interior_ball(&self) -> Result<(Vector, f64)> {
        let (lower, upper) = self.intersection_box.as_ref().ok_or_else(|| {
            Error::Unsupported(
                "interior ball is only computed for all-box families; \
                 the related diagnostics are skipped otherwise"
                    .into(),
            )
        })?;
        let center = Vector::from_fn(lower.len(), |i, _| 0.5 * (lower[i] + upper[i]));
        let mut delta = f64::INFINITY;
        for i in 0..lower.len() {
            delta = delta.min(0.5 * (upper[i] - lower[i]));
        }
        if !(delta > 0.0) {
            return Err(Error::EmptyInterior(format!(
                "intersection box has a zero-length side (delta = {delta}); \
                 an interior point with positive clearance is required"
            )));
        }
        Ok((center, delta))
    }
}

fn intersection_box_of(sets: &[ConvexSet]) -> Option<(Vector, Vector)> {
    let dim = sets[0].dim();
    let mut lower = Vector::from_element(dim, f64::NEG_INFINITY);
    let mut upper = Vector::from_element(dim, f64::INFINITY);
    for set in sets {
        match set {
            ConvexSet::Box { lower: l, upper: u } => {
                for i in 0..dim {
                    lower[i] = lower[i].max(l[i]);
                    upper[i] = upper[i].min(u[i]);
                }
            }
            _ => return None,
        }
    }
    Some((lower, upper))
}

/// Dykstra's alternating projection onto the intersection of `sets`.
///
/// Converges to the exact Euclidean projection of `p` when the intersection
/// is nonempty. Terminates when a full sweep moves the iterate less than
/// `tol` and the iterate sits within `tol` of every set; otherwise fails
/// after `max_sweeps` sweeps, reporting the residual infeasibility.
pub fn dykstra_project(
    sets: &[ConvexSet],
    p: &Vector,
    tol: f64,
    max_sweeps: usize,
) -> Result<Vector> {
    if sets.is_empty() {
        return Err(Error::InvalidArgument("dykstra needs at least one set".into()));
    }
    let mut x = p.clone();
    let mut corrections = vec![Vector::zeros(p.len()); sets.len()];
    let mut residual = f64::INFINITY;
    for _sweep in 0..max_sweeps {
        let sweep_start = x.clone();
        for (s, set) in sets.iter().enumerate() {
            let shifted = &x + &corrections[s];
            let projected = set.project(&shifted)?;
            corrections[s] = shifted - &projected;
            x = projected;
        }
        let change = (&x - &sweep_start).norm();
        residual = 0.0;
        for set in sets {
            residual = residual.max(set.distance(&x)?);
        }
        if change < tol && residual <= tol {
            return Ok(x);
        }
    }
    Err(Error::ProjectionConvergence {
        sweeps: max_sweeps,
        residual,
    })
}
