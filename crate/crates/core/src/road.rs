//! Road centerline geometry and coordinate frames.
//!
//! The road is a planar curve parameterized by arc length. Lateral offsets
//! are positive to the RIGHT of the direction of travel, so in any body
//! frame the left lane boundary sits at negative y and numeric comparisons
//! `left < y < right` read naturally. A positive arc radius curves right
//! (toward positive y), negative curves left.

use crate::error::SimError;
use serde::{Deserialize, Serialize};

/// Smallest arc radius magnitude the geometry accepts, m.
pub const MIN_RADIUS: f64 = 50.0;

/// Position and tangent direction of a point on (or offset from) the road.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub pos: [f64; 2],
    /// Tangent angle from world +x toward +y, rad.
    pub heading: f64,
}

/// One stretch of a piecewise road: an arc, or a straight when `radius`
/// is omitted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArcSegment {
    /// Segment length along the centerline, m.
    pub length: f64,
    /// Signed radius, m; omitted for a straight segment.
    #[serde(default)]
    pub radius: Option<f64>,
}

/// Centerline shape.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RoadShape {
    #[default]
    Straight,
    Arc {
        /// Signed radius, m (positive curves right).
        radius: f64,
    },
    Piecewise { segments: Vec<ArcSegment> },
}

/// Road centerline plus the lane width shared by all lanes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RoadGeometry {
    pub shape: RoadShape,
    /// Lane width, m.
    pub lane_width: f64,
}

impl Default for RoadGeometry {
    fn default() -> Self {
        RoadGeometry { shape: RoadShape::Straight, lane_width: 3.5 }
    }
}

fn check_radius(r: f64) -> Result<(), SimError> {
    if !r.is_finite() || r.abs() < MIN_RADIUS {
        return Err(SimError::config(format!(
            "road: |radius| must be >= {MIN_RADIUS} m, got {r}"
        )));
    }
    Ok(())
}

impl RoadGeometry {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.lane_width <= 2.5 {
            return Err(SimError::config(format!(
                "road: lane_width must exceed 2.5 m, got {}",
                self.lane_width
            )));
        }
        match &self.shape {
            RoadShape::Straight => Ok(()),
            RoadShape::Arc { radius } => check_radius(*radius),
            RoadShape::Piecewise { segments } => {
                if segments.is_empty() {
                    return Err(SimError::config("road: piecewise shape needs segments"));
                }
                for seg in segments {
                    if seg.length <= 0.0 {
                        return Err(SimError::config("road: segment length must be > 0"));
                    }
                    if let Some(r) = seg.radius {
                        check_radius(r)?;
                    }
                }
                Ok(())
            }
        }
    }

    /// Centerline pose at arc length `s`. Before the first or beyond the
    /// last piecewise segment the end segment's curvature continues.
    pub fn pose(&self, s: f64) -> Pose {
        let origin = Pose { pos: [0.0, 0.0], heading: 0.0 };
        match &self.shape {
            RoadShape::Straight => advance(origin, 0.0, s),
            RoadShape::Arc { radius } => advance(origin, 1.0 / radius, s),
            RoadShape::Piecewise { segments } => {
                let mut pose = origin;
                let mut remaining = s;
                for (i, seg) in segments.iter().enumerate() {
                    let kappa = seg.radius.map_or(0.0, |r| 1.0 / r);
                    let last = i == segments.len() - 1;
                    if remaining <= seg.length || last {
                        return advance(pose, kappa, remaining);
                    }
                    pose = advance(pose, kappa, seg.length);
                    remaining -= seg.length;
                }
                pose
            }
        }
    }

    /// World position of the point at arc length `s`, offset `lat` to the
    /// right of the centerline.
    pub fn point_world(&self, s: f64, lat: f64) -> [f64; 2] {
        let p = self.pose(s);
        let n = right_normal(p.heading);
        [p.pos[0] + lat * n[0], p.pos[1] + lat * n[1]]
    }

    /// World velocity of a vehicle at arc length `s` moving at `speed` along
    /// its (offset) lane; the direction is the local tangent.
    pub fn velocity_world(&self, s: f64, speed: f64) -> [f64; 2] {
        let h = self.pose(s).heading;
        [speed * h.cos(), speed * h.sin()]
    }
}

/// Move `ds` along a curve of constant curvature `kappa` starting at `pose`.
fn advance(pose: Pose, kappa: f64, ds: f64) -> Pose {
    let (lx, ly, dh) = if kappa == 0.0 {
        (ds, 0.0, 0.0)
    } else {
        let r = 1.0 / kappa;
        let th = kappa * ds;
        (r * th.sin(), r * (1.0 - th.cos()), th)
    };
    let (sin_h, cos_h) = pose.heading.sin_cos();
    Pose {
        pos: [
            pose.pos[0] + cos_h * lx - sin_h * ly,
            pose.pos[1] + sin_h * lx + cos_h * ly,
        ],
        heading: pose.heading + dh,
    }
}

/// Unit vector pointing to the right of a heading.
pub fn right_normal(heading: f64) -> [f64; 2] {
    [-heading.sin(), heading.cos()]
}

/// Unit tangent of a heading.
pub fn tangent(heading: f64) -> [f64; 2] {
    [heading.cos(), heading.sin()]
}

/// World point expressed in the body frame anchored at `origin`
/// (x forward along the heading, y to the right).
pub fn to_frame(origin: &Pose, p: [f64; 2]) -> [f64; 2] {
    let d = [p[0] - origin.pos[0], p[1] - origin.pos[1]];
    let t = tangent(origin.heading);
    let n = right_normal(origin.heading);
    [d[0] * t[0] + d[1] * t[1], d[0] * n[0] + d[1] * n[1]]
}

/// Lateral position of an offset curve (e.g. a lane boundary) as a function
/// of forward distance in a body frame anchored on the centerline.
///
/// Straight and single-arc roads use closed forms; piecewise roads fall back
/// to dense sampling with linear interpolation.
pub struct LateralProfile {
    kind: ProfileKind,
}

enum ProfileKind {
    Straight { lat: f64 },
    /// Circle of radius |`radius` - `lat`| centered `radius` to the right of
    /// the frame origin, shifted `body_dx` forward.
    Arc { radius: f64, lat: f64, body_dx: f64 },
    Sampled { points: Vec<[f64; 2]> },
}

impl LateralProfile {
    /// Build the profile of the curve at lateral offset `lat`, seen from the
    /// frame sitting `body_dx` forward of the centerline point at `s_origin`
    /// (negative `body_dx` places the frame behind that point).
    pub fn new(geom: &RoadGeometry, s_origin: f64, body_dx: f64, lat: f64, x_max: f64) -> Self {
        let kind = match &geom.shape {
            RoadShape::Straight => ProfileKind::Straight { lat },
            RoadShape::Arc { radius } => ProfileKind::Arc { radius: *radius, lat, body_dx },
            RoadShape::Piecewise { .. } => {
                let center = geom.pose(s_origin);
                let t = tangent(center.heading);
                let origin = Pose {
                    pos: [center.pos[0] + body_dx * t[0], center.pos[1] + body_dx * t[1]],
                    heading: center.heading,
                };
                let step = 0.25;
                let start = body_dx.min(0.0) - 4.0;
                let n = ((x_max + 8.0 - start) / step).ceil() as usize;
                let mut points = Vec::with_capacity(n);
                for i in 0..n {
                    let ds = start + i as f64 * step;
                    let p = to_frame(&origin, geom.point_world(s_origin + ds, lat));
                    if points.last().is_none_or(|prev: &[f64; 2]| p[0] > prev[0]) {
                        points.push(p);
                    }
                }
                ProfileKind::Sampled { points }
            }
        };
        LateralProfile { kind }
    }

    /// Lateral offset of the curve at forward distance `x`, or `None` where
    /// the curve has no point at that distance.
    pub fn y_at(&self, x: f64) -> Option<f64> {
        match &self.kind {
            ProfileKind::Straight { lat } => Some(*lat),
            ProfileKind::Arc { radius, lat, body_dx } => {
                // The arc's center sits at frame coordinates (-body_dx, radius).
                let rho = radius - lat;
                let dx = x + body_dx;
                let under = rho * rho - dx * dx;
                if under <= 0.0 {
                    return None;
                }
                Some(radius - radius.signum() * under.sqrt())
            }
            ProfileKind::Sampled { points } => {
                let hi = points.partition_point(|p| p[0] <= x);
                if hi == 0 || hi >= points.len() {
                    return None;
                }
                let (a, b) = (points[hi - 1], points[hi]);
                let w = (x - a[0]) / (b[0] - a[0]);
                Some(a[1] + w * (b[1] - a[1]))
            }
        }
    }
}
