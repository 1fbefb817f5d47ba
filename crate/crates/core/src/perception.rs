//! Radar/camera front-target pipeline.
//!
//! Radar returns range/bearing/range-rate detections in the front-bumper
//! frame. The camera reports each lane boundary as a cubic polynomial in its
//! own frame, mounted a fixed distance behind the radar. Detections are
//! translated into the camera frame and tested strictly against the lane
//! boundaries; the nearest survivor ahead is the control target. Missing
//! lane lines are rebuilt from the visible one (or from a straight corridor
//! assumption) so target selection keeps working as the camera degrades.

use crate::error::SimError;
use crate::road::{to_frame, LateralProfile, RoadGeometry};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Sensor mounting and field-of-view description.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MountingGeometry {
    /// Longitudinal offset from the camera back to the radar, m; the radar
    /// sits at the front bumper, the camera this far behind it.
    pub dx_rc: f64,
    /// Radar half field of view, deg.
    pub fov_half_deg: f64,
    /// Radar maximum range, m.
    pub max_range: f64,
}

impl Default for MountingGeometry {
    fn default() -> Self {
        MountingGeometry { dx_rc: 2.0, fov_half_deg: 45.0, max_range: 100.0 }
    }
}

impl MountingGeometry {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.dx_rc >= 0.0 && self.max_range > 0.0) {
            return Err(SimError::config("mounting: dx_rc must be >= 0 and max_range > 0"));
        }
        if !(self.fov_half_deg > 0.0 && self.fov_half_deg <= 90.0) {
            return Err(SimError::config("mounting: fov_half_deg must be in (0, 90]"));
        }
        Ok(())
    }
}

/// Additive Gaussian radar measurement noise (1-sigma).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RadarNoise {
    /// Range noise, m.
    pub sigma_r: f64,
    /// Bearing noise, deg.
    pub sigma_alpha_deg: f64,
}

impl Default for RadarNoise {
    fn default() -> Self {
        RadarNoise { sigma_r: 0.0, sigma_alpha_deg: 0.0 }
    }
}

/// One radar return in polar form (front-bumper frame).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadarDetection {
    /// Id of the detected vehicle.
    pub id: usize,
    /// Range, m (> 0).
    pub r: f64,
    /// Bearing, rad, positive toward positive y (the right).
    pub alpha: f64,
    /// Range rate, m/s (positive opening).
    pub rdot: f64,
}

/// A detection in Cartesian form; `x` is forward in whichever frame the
/// detection currently lives in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CartesianDetection {
    pub id: usize,
    pub x: f64,
    pub y: f64,
    /// Relative speed carried over from the range rate, m/s.
    pub v_rel: f64,
}

/// Polar return to Cartesian coordinates in the same (radar) frame.
pub fn polar_to_cartesian(d: &RadarDetection) -> CartesianDetection {
    debug_assert!(d.r > 0.0, "radar range must be positive");
    CartesianDetection { id: d.id, x: d.r * d.alpha.cos(), y: d.r * d.alpha.sin(), v_rel: d.rdot }
}

/// Translate a radar-frame detection into the camera frame (pure
/// longitudinal shift; the lateral coordinate is unchanged).
pub fn to_camera_frame(d: &CartesianDetection, m: &MountingGeometry) -> CartesianDetection {
    CartesianDetection { x: d.x + m.dx_rc, ..*d }
}

/// Cubic lane-boundary polynomial in the camera frame: lateral offset as a
/// function of forward distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaneLinePoly {
    pub a0: f64,
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    /// False when the camera could not produce a usable fit.
    pub valid: bool,
    /// Forward distance the fit is based on, m.
    pub view_range: f64,
}

impl LaneLinePoly {
    /// Lateral boundary offset at forward distance `x`.
    pub fn eval(&self, x: f64) -> f64 {
        self.a0 + x * (self.a1 + x * (self.a2 + x * self.a3))
    }

    fn shifted(&self, dy: f64) -> LaneLinePoly {
        LaneLinePoly { a0: self.a0 + dy, ..*self }
    }

    fn flat(a0: f64, view_range: f64) -> LaneLinePoly {
        LaneLinePoly { a0, a1: 0.0, a2: 0.0, a3: 0.0, valid: true, view_range }
    }
}

/// Build a usable left/right boundary pair from whatever the camera saw.
/// A lone visible line is copied across at one lane width; with no line at
/// all, a straight corridor of one lane width is centered on the ego.
pub fn synthesize_boundaries(
    left: Option<&LaneLinePoly>,
    right: Option<&LaneLinePoly>,
    lane_width: f64,
    fallback_range: f64,
) -> (LaneLinePoly, LaneLinePoly) {
    let left = left.filter(|p| p.valid);
    let right = right.filter(|p| p.valid);
    match (left, right) {
        (Some(l), Some(r)) => (*l, *r),
        (Some(l), None) => (*l, l.shifted(lane_width)),
        (None, Some(r)) => (r.shifted(-lane_width), *r),
        (None, None) => (
            LaneLinePoly::flat(-lane_width / 2.0, fallback_range),
            LaneLinePoly::flat(lane_width / 2.0, fallback_range),
        ),
    }
}

/// Pick the control target: translate detections into the camera frame,
/// keep those strictly between the lane boundaries and ahead of the radar,
/// and return the nearest survivor (camera-frame coordinates).
pub fn select_in_lane_target(
    detections: &[RadarDetection],
    left: Option<&LaneLinePoly>,
    right: Option<&LaneLinePoly>,
    lane_width: f64,
    mounting: &MountingGeometry,
) -> Option<CartesianDetection> {
    let (lb, rb) = synthesize_boundaries(left, right, lane_width, mounting.max_range);
    let mut candidates: Vec<CartesianDetection> = detections
        .iter()
        .map(polar_to_cartesian)
        .filter(|d| d.x > 0.0)
        .map(|d| to_camera_frame(&d, mounting))
        .collect();
    candidates.sort_by(|a, b| a.x.partial_cmp(&b.x).unwrap());
    candidates
        .into_iter()
        .find(|d| lb.eval(d.x) < d.y && d.y < rb.eval(d.x))
}

/// Ego vehicle as the sensors see the world: front-bumper arc position and
/// speed, centered in its lane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ego {
    pub s: f64,
    pub v: f64,
}

/// Another vehicle in the scene. `s` is the front-bumper arc position and
/// `lat` the signed lane offset (positive right).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneVehicle {
    pub id: usize,
    pub s: f64,
    pub lat: f64,
    pub v: f64,
    pub length: f64,
}

/// Exact radar returns for every vehicle rear point inside the field of
/// view and range, plus optional Gaussian range/bearing noise.
pub fn simulate_radar<R: Rng>(
    geom: &RoadGeometry,
    ego: &Ego,
    vehicles: &[SceneVehicle],
    mounting: &MountingGeometry,
    noise: &RadarNoise,
    rng: &mut R,
) -> Vec<RadarDetection> {
    let ego_pose = geom.pose(ego.s);
    let ego_vel = geom.velocity_world(ego.s, ego.v);
    let fov = mounting.fov_half_deg.to_radians();
    let mut out = Vec::new();
    for veh in vehicles {
        let rear_s = veh.s - veh.length;
        let p_world = geom.point_world(rear_s, veh.lat);
        let local = to_frame(&ego_pose, p_world);
        let r = (local[0] * local[0] + local[1] * local[1]).sqrt();
        if r < 1e-9 || r > mounting.max_range {
            continue;
        }
        let alpha = local[1].atan2(local[0]);
        if alpha.abs() > fov {
            continue;
        }
        let v_world = geom.velocity_world(rear_s, veh.v);
        let rel_v = [v_world[0] - ego_vel[0], v_world[1] - ego_vel[1]];
        let rel_p = [p_world[0] - ego_pose.pos[0], p_world[1] - ego_pose.pos[1]];
        let rdot = (rel_p[0] * rel_v[0] + rel_p[1] * rel_v[1]) / r;
        let (r, alpha) = if noise.sigma_r > 0.0 || noise.sigma_alpha_deg > 0.0 {
            let zr: f64 = rng.sample(StandardNormal);
            let za: f64 = rng.sample(StandardNormal);
            (
                (r + noise.sigma_r * zr).max(0.1),
                alpha + noise.sigma_alpha_deg.to_radians() * za,
            )
        } else {
            (r, alpha)
        };
        out.push(RadarDetection { id: veh.id, r, alpha, rdot });
    }
    out
}

/// Sample the true boundary offsets in the camera frame at 1 m spacing and
/// least-squares fit a cubic per visible side. Returns (left, right).
pub fn simulate_camera(
    geom: &RoadGeometry,
    ego_s: f64,
    mounting: &MountingGeometry,
    fit_range: f64,
    left_visible: bool,
    right_visible: bool,
) -> (Option<LaneLinePoly>, Option<LaneLinePoly>) {
    let half = geom.lane_width / 2.0;
    let fit_side = |lat: f64| -> Option<LaneLinePoly> {
        let profile = LateralProfile::new(geom, ego_s, -mounting.dx_rc, lat, fit_range);
        let mut pts = Vec::new();
        for i in 0..=fit_range.floor() as usize {
            let x = i as f64;
            match profile.y_at(x) {
                Some(y) => pts.push([x, y]),
                None => break,
            }
        }
        let view_range = pts.last()?[0];
        let c = fit_cubic(&pts)?;
        Some(LaneLinePoly { a0: c[0], a1: c[1], a2: c[2], a3: c[3], valid: true, view_range })
    };
    (
        if left_visible { fit_side(-half) } else { None },
        if right_visible { fit_side(half) } else { None },
    )
}

/// Oracle selector working on ground-truth arc positions: nearest vehicle
/// whose rear is ahead of the ego and whose lane offset is strictly inside
/// the ego lane.
pub fn ground_truth_in_lane(ego: &Ego, vehicles: &[SceneVehicle], lane_width: f64) -> Option<usize> {
    vehicles
        .iter()
        .filter(|v| v.s - v.length > ego.s && v.lat.abs() < lane_width / 2.0)
        .min_by(|a, b| {
            let da = a.s - a.length - ego.s;
            let db = b.s - b.length - ego.s;
            da.partial_cmp(&db).unwrap()
        })
        .map(|v| v.id)
}

/// Least-squares cubic through `pts` (needs at least 4). The abscissa is
/// normalized before solving to keep the normal equations well conditioned.
fn fit_cubic(pts: &[[f64; 2]]) -> Option<[f64; 4]> {
    if pts.len() < 4 {
        return None;
    }
    let scale = pts.iter().fold(0.0f64, |m, p| m.max(p[0].abs()));
    if scale == 0.0 {
        return None;
    }
    let mut m = [[0.0f64; 5]; 4];
    for p in pts {
        let u = p[0] / scale;
        let pow = [1.0, u, u * u, u * u * u];
        for j in 0..4 {
            for k in 0..4 {
                m[j][k] += pow[j] * pow[k];
            }
            m[j][4] += pow[j] * p[1];
        }
    }
    let c = solve4(m)?;
    Some([c[0], c[1] / scale, c[2] / (scale * scale), c[3] / (scale * scale * scale)])
}

/// Solve a 4x4 system from its augmented matrix by Gaussian elimination
/// with partial pivoting.
fn solve4(mut m: [[f64; 5]; 4]) -> Option<[f64; 4]> {
    for col in 0..4 {
        let pivot = (col..4).max_by(|&a, &b| m[a][col].abs().partial_cmp(&m[b][col].abs()).unwrap())?;
        if m[pivot][col].abs() < 1e-12 {
            return None;
        }
        m.swap(col, pivot);
        for row in col + 1..4 {
            let f = m[row][col] / m[col][col];
            for k in col..5 {
                m[row][k] -= f * m[col][k];
            }
        }
    }
    let mut x = [0.0; 4];
    for row in (0..4).rev() {
        let mut acc = m[row][4];
        for k in row + 1..4 {
            acc -= m[row][k] * x[k];
        }
        x[row] = acc / m[row][row];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::road::RoadShape;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn det(id: usize, r: f64, alpha_deg: f64) -> RadarDetection {
        RadarDetection { id, r, alpha: alpha_deg.to_radians(), rdot: 0.0 }
    }

    #[test]
    fn polar_conversion_hand_values() {
        let c = polar_to_cartesian(&det(0, 10.0, 30.0));
        assert_abs_diff_eq!(c.x, 8.660254037844387, epsilon = 1e-12);
        assert_abs_diff_eq!(c.y, 4.999999999999999, epsilon = 1e-12);
        let c = polar_to_cartesian(&det(0, 50.0, -5.0));
        assert_abs_diff_eq!(c.x, 49.80973490458728, epsilon = 1e-12);
        assert_abs_diff_eq!(c.y, -4.357787137382909, epsilon = 1e-12);
    }

    #[test]
    fn polar_roundtrip_is_exact() {
        for r10 in 1..=60 {
            for a in -45..=45 {
                let d = det(0, r10 as f64 * 2.5, a as f64);
                let c = polar_to_cartesian(&d);
                let r_back = (c.x * c.x + c.y * c.y).sqrt();
                let a_back = c.y.atan2(c.x);
                assert_abs_diff_eq!(r_back, d.r, epsilon = 1e-12);
                assert_abs_diff_eq!(a_back, d.alpha, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn camera_frame_shift_is_longitudinal_only() {
        let m = MountingGeometry::default();
        let c = to_camera_frame(&CartesianDetection { id: 3, x: 30.0, y: -1.0, v_rel: 0.5 }, &m);
        assert_eq!((c.x, c.y, c.v_rel, c.id), (32.0, -1.0, 0.5, 3));
    }

    #[test]
    fn boundary_eval_hand_values() {
        let p = LaneLinePoly { a0: 1.75, a1: -0.01, a2: 1e-4, a3: 0.0, valid: true, view_range: 80.0 };
        assert_abs_diff_eq!(p.eval(20.0), 1.59, epsilon = 1e-12);
        let p = LaneLinePoly { a0: -1.75, a1: 0.0, a2: 2e-3, a3: 0.0, valid: true, view_range: 80.0 };
        assert_abs_diff_eq!(p.eval(40.0), 1.45, epsilon = 1e-12);
    }

    #[test]
    fn synthesis_keeps_a_full_pair_untouched() {
        let l = LaneLinePoly::flat(-1.7, 60.0);
        let r = LaneLinePoly::flat(1.8, 60.0);
        assert_eq!(synthesize_boundaries(Some(&l), Some(&r), 3.5, 100.0), (l, r));
    }

    #[test]
    fn synthesis_rebuilds_the_missing_side_one_lane_over() {
        let l = LaneLinePoly { a0: -1.75, a1: 0.02, a2: 1e-3, a3: -1e-6, valid: true, view_range: 70.0 };
        let (lb, rb) = synthesize_boundaries(Some(&l), None, 3.5, 100.0);
        assert_eq!(lb, l);
        assert_abs_diff_eq!(rb.a0 - lb.a0, 3.5);
        assert_eq!((rb.a1, rb.a2, rb.a3), (l.a1, l.a2, l.a3));

        let r = LaneLinePoly { a0: 1.75, a1: -0.01, a2: 0.0, a3: 0.0, valid: true, view_range: 70.0 };
        let (lb, rb) = synthesize_boundaries(None, Some(&r), 3.5, 100.0);
        assert_abs_diff_eq!(rb.a0 - lb.a0, 3.5);
        assert_eq!(lb.a1, r.a1);
    }

    #[test]
    fn synthesis_with_nothing_visible_centers_a_corridor() {
        let (lb, rb) = synthesize_boundaries(None, None, 3.5, 100.0);
        assert_abs_diff_eq!(lb.a0, -1.75);
        assert_abs_diff_eq!(rb.a0, 1.75);
        assert_abs_diff_eq!(rb.a0 - lb.a0, 3.5);
    }

    #[test]
    fn invalid_lines_count_as_missing() {
        let mut l = LaneLinePoly::flat(-1.75, 60.0);
        l.valid = false;
        let (lb, rb) = synthesize_boundaries(Some(&l), None, 3.5, 100.0);
        assert_abs_diff_eq!(rb.a0 - lb.a0, 3.5);
        assert_abs_diff_eq!(lb.a0, -1.75);
    }

    #[test]
    fn selection_takes_nearest_strictly_inside() {
        let m = MountingGeometry::default();
        let dets = vec![
            det(0, 60.0, 0.5),
            det(1, 25.0, 0.0),
            det(2, 20.0, 9.0),  // ~3.1 m lateral, next lane over
            det(3, 8.0, -80.0), // behind after conversion? no: x>0 but far left
        ];
        let picked = select_in_lane_target(&dets, None, None, 3.5, &m).unwrap();
        assert_eq!(picked.id, 1);
        assert_abs_diff_eq!(picked.x, 27.0, epsilon = 1e-12);
    }

    #[test]
    fn selection_is_strict_at_the_boundary() {
        let m = MountingGeometry::default();
        let on_edge = RadarDetection { id: 0, r: 1.75, alpha: std::f64::consts::FRAC_PI_2, rdot: 0.0 };
        // y = 1.75 sits exactly on the corridor edge; strictly-inside excludes it.
        assert!(select_in_lane_target(&[on_edge], None, None, 3.5, &m).is_none());
        let inside = det(1, 30.0, 0.0);
        let just_out = {
            let mut d = det(2, 10.0, 0.0);
            d.alpha = (1.7500001f64 / 10.0).asin();
            d
        };
        let picked = select_in_lane_target(&[inside, just_out], None, None, 3.5, &m).unwrap();
        assert_eq!(picked.id, 1);
    }

    #[test]
    fn selection_follows_curved_boundaries() {
        let m = MountingGeometry::default();
        // Boundaries curving right with a2 = 1/(2*250).
        let l = LaneLinePoly { a0: -1.75, a1: 0.0, a2: 0.002, a3: 0.0, valid: true, view_range: 80.0 };
        let r = LaneLinePoly { a0: 1.75, a1: 0.0, a2: 0.002, a3: 0.0, valid: true, view_range: 80.0 };
        // A vehicle 60 m out on the curve center: y ~ 60^2 * 0.002 = 7.2 m.
        let on_curve = RadarDetection { id: 0, r: (60.0f64.powi(2) + 7.2f64.powi(2)).sqrt(), alpha: (7.2f64).atan2(60.0), rdot: 0.0 };
        // A vehicle straight ahead at the same range is off lane on this curve.
        let straight_ahead = det(1, 60.0, 0.0);
        let picked = select_in_lane_target(&[straight_ahead, on_curve], Some(&l), Some(&r), 3.5, &m);
        assert_eq!(picked.unwrap().id, 0);
    }

    fn straight_scene() -> (RoadGeometry, Ego, Vec<SceneVehicle>) {
        let geom = RoadGeometry::default();
        let ego = Ego { s: 100.0, v: 10.0 };
        let vehicles = vec![
            SceneVehicle { id: 1, s: 134.8, lat: 0.0, v: 8.0, length: 4.8 },
            SceneVehicle { id: 2, s: 150.0, lat: 3.5, v: 12.0, length: 4.8 },
            SceneVehicle { id: 3, s: 260.0, lat: 0.0, v: 10.0, length: 4.8 },
        ];
        (geom, ego, vehicles)
    }

    #[test]
    fn radar_reports_exact_geometry_without_noise() {
        let (geom, ego, vehicles) = straight_scene();
        let m = MountingGeometry::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let dets = simulate_radar(&geom, &ego, &vehicles, &m, &RadarNoise::default(), &mut rng);
        // Vehicle 3 is 155.2 m out: beyond max range.
        assert_eq!(dets.len(), 2);
        assert_eq!(dets[0].id, 1);
        assert_abs_diff_eq!(dets[0].r, 30.0, epsilon = 1e-12);
        assert_abs_diff_eq!(dets[0].alpha, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(dets[0].rdot, -2.0, epsilon = 1e-12);
        assert_eq!(dets[1].id, 2);
        let expect_r = (45.2f64.powi(2) + 3.5f64.powi(2)).sqrt();
        assert_abs_diff_eq!(dets[1].r, expect_r, epsilon = 1e-12);
    }

    #[test]
    fn radar_drops_targets_outside_the_fov() {
        let geom = RoadGeometry::default();
        let ego = Ego { s: 0.0, v: 0.0 };
        let beside = vec![SceneVehicle { id: 1, s: 6.0, lat: 3.5, v: 0.0, length: 4.8 }];
        let m = MountingGeometry::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        // Rear point at x = 1.2, y = 3.5: bearing ~71 deg.
        let dets = simulate_radar(&geom, &ego, &beside, &m, &RadarNoise::default(), &mut rng);
        assert!(dets.is_empty());
    }

    #[test]
    fn radar_noise_is_reproducible_per_seed() {
        let (geom, ego, vehicles) = straight_scene();
        let m = MountingGeometry::default();
        let noise = RadarNoise { sigma_r: 0.25, sigma_alpha_deg: 0.5 };
        let run = |seed: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            simulate_radar(&geom, &ego, &vehicles, &m, &noise, &mut rng)
        };
        assert_eq!(run(9), run(9));
        let (a, b) = (run(9), run(10));
        assert!(a.iter().zip(&b).any(|(x, y)| x.r != y.r));
    }

    #[test]
    fn camera_reports_straight_lines_exactly() {
        let geom = RoadGeometry::default();
        let m = MountingGeometry::default();
        let (left, right) = simulate_camera(&geom, 55.0, &m, 80.0, true, true);
        let (left, right) = (left.unwrap(), right.unwrap());
        assert!(left.valid && right.valid);
        assert_abs_diff_eq!(left.a0, -1.75, epsilon = 1e-9);
        assert_abs_diff_eq!(right.a0, 1.75, epsilon = 1e-9);
        for x in [0.0, 40.0, 80.0] {
            assert_abs_diff_eq!(left.eval(x), -1.75, epsilon = 1e-9);
            assert_abs_diff_eq!(right.eval(x), 1.75, epsilon = 1e-9);
        }
        assert_abs_diff_eq!(left.view_range, 80.0);
    }

    #[test]
    fn camera_curvature_coefficient_tracks_the_arc() {
        let geom = RoadGeometry { shape: RoadShape::Arc { radius: 250.0 }, ..Default::default() };
        let m = MountingGeometry::default();
        let (left, right) = simulate_camera(&geom, 300.0, &m, 80.0, true, true);
        for line in [left.unwrap(), right.unwrap()] {
            let a2_ideal = 1.0 / (2.0 * 250.0);
            assert!(
                (line.a2 - a2_ideal).abs() < 0.1 * a2_ideal,
                "a2 = {}, ideal {}",
                line.a2,
                a2_ideal
            );
        }
    }

    #[test]
    fn camera_respects_visibility_flags() {
        let geom = RoadGeometry::default();
        let m = MountingGeometry::default();
        let (left, right) = simulate_camera(&geom, 0.0, &m, 80.0, false, true);
        assert!(left.is_none());
        assert!(right.is_some());
    }

    #[test]
    fn oracle_picks_nearest_in_lane_ahead() {
        let (_, ego, vehicles) = straight_scene();
        assert_eq!(ground_truth_in_lane(&ego, &vehicles, 3.5), Some(1));
        // Exactly on the half-width is out of lane (strict test).
        let edge = vec![SceneVehicle { id: 7, s: 130.0, lat: 1.75, v: 0.0, length: 4.8 }];
        assert_eq!(ground_truth_in_lane(&ego, &edge, 3.5), None);
        // A vehicle overlapping the ego (rear not ahead) is ignored.
        let overlap = vec![SceneVehicle { id: 8, s: 102.0, lat: 0.0, v: 0.0, length: 4.8 }];
        assert_eq!(ground_truth_in_lane(&ego, &overlap, 3.5), None);
    }

    #[test]
    fn pipeline_agrees_with_oracle_on_a_clean_scene() {
        let (geom, ego, vehicles) = straight_scene();
        let m = MountingGeometry::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let dets = simulate_radar(&geom, &ego, &vehicles, &m, &RadarNoise::default(), &mut rng);
        let (left, right) = simulate_camera(&geom, ego.s, &m, 80.0, true, true);
        let picked = select_in_lane_target(&dets, left.as_ref(), right.as_ref(), geom.lane_width, &m);
        assert_eq!(picked.map(|d| d.id), ground_truth_in_lane(&ego, &vehicles, geom.lane_width));
    }

    #[test]
    fn cubic_fit_recovers_exact_polynomials() {
        let truth = [0.4, -0.02, 3e-4, -2e-6];
        let pts: Vec<[f64; 2]> = (0..=60)
            .map(|i| {
                let x = i as f64;
                [x, truth[0] + truth[1] * x + truth[2] * x * x + truth[3] * x * x * x]
            })
            .collect();
        let c = fit_cubic(&pts).unwrap();
        for k in 0..4 {
            assert_abs_diff_eq!(c[k], truth[k], epsilon = 1e-9);
        }
        assert!(fit_cubic(&pts[..3]).is_none());
    }
}
