//! Reference path geometry and trajectory metrics.
//!
//! The reference path is a single-period sine lane `y = A sin(2 pi x / L)`
//! spanning a fixed x-interval, with circular endpoint regions at both ends.
//! Everything downstream — carrot targets, heading errors, tracking error —
//! is built from the projection of a point onto this curve, so the projection
//! here is computed to well below live-tracking resolution (coarse scan plus
//! golden-section refinement).

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors produced by geometric queries.
#[derive(Debug, Error)]
pub enum GeometryError {
    /// The query target coincides with the pose position, so no bearing exists.
    #[error("degenerate target: target coincides with the pose position")]
    DegenerateTarget,
    /// Trajectory metrics need at least two samples.
    #[error("insufficient trajectory: need at least 2 points, got {0}")]
    InsufficientTrajectory(usize),
    /// A spec field is outside its valid range.
    #[error("invalid path spec: {0}")]
    InvalidSpec(String),
}

/// A point in arena coordinates, millimetres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    /// Euclidean distance to another point.
    pub fn distance_to(&self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Planar pose: position in millimetres, heading in degrees.
///
/// Heading follows the math convention: 0 deg points along +x and angles
/// grow counter-clockwise. Stored headings are kept in `(-180, 180]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose2D {
    pub x: f64,
    pub y: f64,
    pub heading_deg: f64,
}

impl Pose2D {
    pub fn new(x: f64, y: f64, heading_deg: f64) -> Self {
        Pose2D {
            x,
            y,
            heading_deg: normalize_deg(heading_deg),
        }
    }

    pub fn position(&self) -> Point {
        Point::new(self.x, self.y)
    }
}

/// Wrap an angle in degrees into `(-180, 180]`.
pub fn normalize_deg(angle_deg: f64) -> f64 {
    let mut r = angle_deg % 360.0;
    if r <= -180.0 {
        r += 360.0;
    } else if r > 180.0 {
        r -= 360.0;
    }
    r
}

/// Rectangular arena centred on the origin, millimetres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArenaSpec {
    pub width_mm: f64,
    pub height_mm: f64,
}

impl Default for ArenaSpec {
    fn default() -> Self {
        ArenaSpec {
            width_mm: 1200.0,
            height_mm: 600.0,
        }
    }
}

impl ArenaSpec {
    pub fn validate(&self) -> Result<(), GeometryError> {
        if !(self.width_mm > 0.0) || !(self.height_mm > 0.0) {
            return Err(GeometryError::InvalidSpec(
                "arena dimensions must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Whether a point lies inside the arena (boundary inclusive).
    pub fn contains(&self, p: Point) -> bool {
        p.x.abs() <= self.width_mm / 2.0 && p.y.abs() <= self.height_mm / 2.0
    }
}

/// Sine reference lane with circular endpoint regions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathSpec {
    /// Peak deviation of the lane from the arena midline.
    pub amplitude_mm: f64,
    /// Spatial period of the sine.
    pub wavelength_mm: f64,
    /// x coordinate where the lane starts.
    pub x_start_mm: f64,
    /// x coordinate where the lane ends.
    pub x_end_mm: f64,
    /// Radius of the origin and destination circles.
    pub endpoint_radius_mm: f64,
}

impl Default for PathSpec {
    fn default() -> Self {
        // One full period centred on the arena: sin(+-pi) = 0 at both ends.
        PathSpec {
            amplitude_mm: 170.0,
            wavelength_mm: 850.0,
            x_start_mm: -425.0,
            x_end_mm: 425.0,
            endpoint_radius_mm: 40.0,
        }
    }
}

impl PathSpec {
    pub fn validate(&self) -> Result<(), GeometryError> {
        if !(self.wavelength_mm > 0.0) {
            return Err(GeometryError::InvalidSpec(
                "wavelength must be positive".into(),
            ));
        }
        if !(self.x_end_mm > self.x_start_mm) {
            return Err(GeometryError::InvalidSpec(
                "x_end must exceed x_start".into(),
            ));
        }
        if !(self.endpoint_radius_mm > 0.0) {
            return Err(GeometryError::InvalidSpec(
                "endpoint radius must be positive".into(),
            ));
        }
        if !self.amplitude_mm.is_finite() || self.amplitude_mm < 0.0 {
            return Err(GeometryError::InvalidSpec(
                "amplitude must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }

    /// Lane point at a given x.
    pub fn point_at(&self, x: f64) -> Point {
        Point::new(
            x,
            self.amplitude_mm * (2.0 * std::f64::consts::PI * x / self.wavelength_mm).sin(),
        )
    }

    /// Lane slope dy/dx at a given x.
    pub fn slope_at(&self, x: f64) -> f64 {
        let k = 2.0 * std::f64::consts::PI / self.wavelength_mm;
        self.amplitude_mm * k * (k * x).cos()
    }

    /// Direction of travel along the lane (towards increasing x), degrees.
    pub fn tangent_deg(&self, x: f64) -> f64 {
        self.slope_at(x).atan2(1.0).to_degrees()
    }

    /// Start-circle centre.
    pub fn start_point(&self) -> Point {
        self.point_at(self.x_start_mm)
    }

    /// Destination-circle centre.
    pub fn end_point(&self) -> Point {
        self.point_at(self.x_end_mm)
    }

    /// Total arc length of the lane, by composite Simpson quadrature.
    pub fn arc_length_mm(&self) -> f64 {
        let n = 16_384; // even; error falls off as n^-4, far below 1e-6 mm here
        let a = self.x_start_mm;
        let b = self.x_end_mm;
        let h = (b - a) / n as f64;
        let f = |x: f64| self.slope_at(x).hypot(1.0);
        let mut acc = f(a) + f(b);
        for i in 1..n {
            let w = if i % 2 == 0 { 2.0 } else { 4.0 };
            acc += w * f(a + h * i as f64);
        }
        acc * h / 3.0
    }
}

/// Result of projecting a point onto the lane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    /// Closest point on the lane.
    pub foot: Point,
    /// Distance from the query point to `foot`.
    pub distance_mm: f64,
    /// x coordinate of `foot` (the lane is a function of x, so this is the
    /// natural curve parameter).
    pub x_mm: f64,
}

/// Project a point onto the lane: nearest lane point within the x-interval.
///
/// A coarse scan (wavelength/100 steps) brackets the minimum, then
/// golden-section search refines it to sub-nanometre parameter precision.
/// The scan is pruned by a rigorous bound: since distance to the lane is at
/// least `|p.x - x|`, no x farther from `p.x` than the best distance found
/// so far can host the minimum. Ties (points equidistant from two lobes)
/// resolve to the smaller x.
pub fn project_onto_path(spec: &PathSpec, p: Point) -> Projection {
    let step = spec.wavelength_mm / 100.0;
    let d2 = |x: f64| {
        let q = spec.point_at(x);
        let dx = p.x - q.x;
        let dy = p.y - q.y;
        dx * dx + dy * dy
    };
    // Seed the bound with the vertical candidate and both interval ends.
    let mut best_x = p.x.clamp(spec.x_start_mm, spec.x_end_mm);
    let mut best_d2 = d2(best_x);
    for x in [spec.x_start_mm, spec.x_end_mm] {
        let d = d2(x);
        if d < best_d2 {
            best_d2 = d;
            best_x = x;
        }
    }
    let half = best_d2.sqrt();
    let scan_lo = (p.x - half).max(spec.x_start_mm);
    let scan_hi = (p.x + half).min(spec.x_end_mm);
    let mut x = scan_lo;
    while x < scan_hi + step / 2.0 {
        let x_clamped = x.min(scan_hi);
        let d = d2(x_clamped);
        if d < best_d2 {
            best_d2 = d;
            best_x = x_clamped;
        }
        x += step;
    }

    // Refine inside the bracketing cell around the coarse argmin.
    let mut lo = (best_x - step).max(spec.x_start_mm);
    let mut hi = (best_x + step).min(spec.x_end_mm);
    let inv_phi = 0.5 * (5.0_f64.sqrt() - 1.0);
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = d2(x1);
    let mut f2 = d2(x2);
    while hi - lo > 1e-10 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = d2(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = d2(x2);
        }
    }
    let x_star = 0.5 * (lo + hi);
    let foot = spec.point_at(x_star);
    Projection {
        foot,
        distance_mm: p.distance_to(foot),
        x_mm: x_star,
    }
}

/// Carrot target ahead of a projection foot, in the direction of travel.
///
/// The carrot is the first lane point, forward of `foot`, whose chord
/// distance from `foot` equals `lookahead_mm`. When the remaining lane is
/// shorter than the lookahead, the carrot clamps to the lane end so the agent
/// aims at the destination over the final stretch. `foot` must lie on the
/// lane (use [`project_onto_path`]).
pub fn carrot_target(spec: &PathSpec, foot: Point, lookahead_mm: f64) -> Point {
    carrot_along(spec, foot, lookahead_mm, 1.0)
}

/// Carrot target for travel in the reversed direction (towards `x_start`).
pub fn carrot_target_reversed(spec: &PathSpec, foot: Point, lookahead_mm: f64) -> Point {
    carrot_along(spec, foot, lookahead_mm, -1.0)
}

fn carrot_along(spec: &PathSpec, foot: Point, lookahead_mm: f64, dir: f64) -> Point {
    let limit = if dir > 0.0 {
        spec.x_end_mm
    } else {
        spec.x_start_mm
    };
    let g = |x: f64| spec.point_at(x).distance_to(foot) - lookahead_mm;
    if g(limit) < 0.0 {
        // Remaining lane shorter than the lookahead: aim at the endpoint.
        return spec.point_at(limit);
    }
    // March towards the endpoint until the chord first reaches the lookahead,
    // then bisect inside that bracket.
    let step = spec.wavelength_mm / 200.0;
    let mut prev = foot.x;
    let mut cur = prev;
    loop {
        cur = if dir > 0.0 {
            (cur + step).min(limit)
        } else {
            (cur - step).max(limit)
        };
        if g(cur) >= 0.0 {
            break;
        }
        prev = cur;
    }
    let (mut lo, mut hi) = (prev, cur);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) >= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if (hi - lo).abs() < 1e-12 {
            break;
        }
    }
    spec.point_at(hi)
}

/// Signed heading error from a pose to a target, degrees in `(-180, 180]`.
///
/// Positive means the target lies to the agent's left (counter-clockwise).
pub fn heading_error(pose: &Pose2D, target: Point) -> Result<f64, GeometryError> {
    let dx = target.x - pose.x;
    let dy = target.y - pose.y;
    if dx.hypot(dy) < 1e-9 {
        return Err(GeometryError::DegenerateTarget);
    }
    let bearing = dy.atan2(dx).to_degrees();
    Ok(normalize_deg(bearing - pose.heading_deg))
}

/// Area enclosed between a trajectory and the lane, accumulated per lobe.
///
/// Each trajectory sample is projected onto the lane; consecutive samples and
/// their feet form quadrilaterals whose signed areas telescope into the
/// signed area of one lobe. Whenever the trajectory crosses the lane the
/// accumulated lobe area is flushed as an absolute contribution, so lobes on
/// opposite sides add up instead of cancelling.
pub fn area_between(trajectory: &[Point], spec: &PathSpec) -> Result<f64, GeometryError> {
    if trajectory.len() < 2 {
        return Err(GeometryError::InsufficientTrajectory(trajectory.len()));
    }
    let mut total = 0.0_f64;
    let mut lobe = 0.0_f64;
    let mut lobe_sign = 0.0_f64;
    let mut prev = trajectory[0];
    let mut prev_proj = project_onto_path(spec, prev);
    let first_side = side_of(spec, prev, &prev_proj);
    if first_side != 0.0 {
        lobe_sign = first_side;
    }
    for &p in &trajectory[1..] {
        let proj = project_onto_path(spec, p);
        let side = side_of(spec, p, &proj);
        if lobe_sign != 0.0 && side * lobe_sign < 0.0 {
            total += lobe.abs();
            lobe = 0.0;
            lobe_sign = side;
        } else if lobe_sign == 0.0 && side != 0.0 {
            lobe_sign = side;
        }
        lobe += quad_signed_area(prev, p, proj.foot, prev_proj.foot);
        prev = p;
        prev_proj = proj;
    }
    total += lobe.abs();
    Ok(total)
}

/// Which side of the lane a point lies on: +1 left of travel, -1 right,
/// 0 when on the lane within tolerance.
fn side_of(spec: &PathSpec, p: Point, proj: &Projection) -> f64 {
    let slope = spec.slope_at(proj.x_mm);
    // Tangent (1, slope); cross product with the offset vector.
    let cross = 1.0 * (p.y - proj.foot.y) - slope * (p.x - proj.foot.x);
    if cross.abs() < 1e-9 {
        0.0
    } else {
        cross.signum()
    }
}

/// Shoelace signed area of the quadrilateral (a, b, c, d) in order.
fn quad_signed_area(a: Point, b: Point, c: Point, d: Point) -> f64 {
    0.5 * ((a.x * b.y - b.x * a.y)
        + (b.x * c.y - c.x * b.y)
        + (c.x * d.y - d.x * c.y)
        + (d.x * a.y - a.x * d.y))
}
