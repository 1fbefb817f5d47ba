//! Intelligent Driver Model lead vehicle and recorded-trace replay.
//!
//! The lead vehicle either follows the IDM free/following law toward a
//! scheduled set speed, or replays a recorded `t,v,a` speed trace with
//! linear interpolation.

use crate::error::SimError;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// IDM parameters. `v0` is the set speed unless a schedule overrides it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IdmParams {
    /// Set speed, m/s.
    pub v0: f64,
    /// Standstill jam distance, m.
    pub s0: f64,
    /// Desired time gap, s.
    pub t_gap: f64,
    /// Maximum comfortable acceleration, m/s^2.
    pub a_max: f64,
    /// Comfortable braking deceleration (positive), m/s^2.
    pub b_comf: f64,
    /// Free-road acceleration exponent.
    pub delta: f64,
    /// Hard braking floor (positive); output never goes below `-b_hard`.
    pub b_hard: f64,
}

impl Default for IdmParams {
    fn default() -> Self {
        IdmParams {
            v0: 15.0,
            s0: 2.0,
            t_gap: 1.0,
            a_max: 1.5,
            b_comf: 2.0,
            delta: 4.0,
            b_hard: 4.0,
        }
    }
}

impl IdmParams {
    /// Set speed with a small floor so a zero set speed still brakes smoothly
    /// instead of dividing by zero.
    pub fn v0_eff(&self) -> f64 {
        self.v0.max(0.1)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.s0 > 0.0 && self.t_gap > 0.0 && self.a_max > 0.0 && self.b_comf > 0.0) {
            return Err(SimError::config("idm: s0, t_gap, a_max, b_comf must be > 0"));
        }
        if self.b_hard < self.b_comf {
            return Err(SimError::config("idm: b_hard must be >= b_comf"));
        }
        if self.v0 < 0.0 || self.delta <= 0.0 {
            return Err(SimError::config("idm: v0 must be >= 0 and delta > 0"));
        }
        Ok(())
    }
}

/// Desired dynamic gap `s*` for host speed `v` and approach rate `dv`
/// (host speed minus target speed, positive when closing).
pub fn idm_desired_gap(v: f64, dv: f64, p: &IdmParams) -> f64 {
    let dynamic = v * p.t_gap + v * dv / (2.0 * (p.a_max * p.b_comf).sqrt());
    p.s0 + dynamic.max(0.0)
}

/// IDM acceleration for host speed `v`, clearance `gap` (may be infinite on a
/// free road) and approach rate `dv`. Output is clamped to `-b_hard` below.
pub fn idm_acceleration(v: f64, gap: f64, dv: f64, p: &IdmParams) -> Result<f64, SimError> {
    if gap <= 0.0 {
        return Err(SimError::config(format!(
            "idm: non-positive gap {gap} (vehicle overlap)"
        )));
    }
    let s_star = idm_desired_gap(v, dv, p);
    let free = (v / p.v0_eff()).powf(p.delta);
    let interaction = (s_star / gap).powi(2);
    let a = p.a_max * (1.0 - free - interaction);
    Ok(a.max(-p.b_hard))
}

/// Closed-form equilibrium clearance at constant speed `v` behind a leader
/// at the same speed. Only defined for `v < v0_eff`.
pub fn equilibrium_gap(v: f64, p: &IdmParams) -> Result<f64, SimError> {
    let free = (v / p.v0_eff()).powf(p.delta);
    if free >= 1.0 {
        return Err(SimError::config(format!(
            "idm: no equilibrium at v = {v} (at or above set speed)"
        )));
    }
    Ok(idm_desired_gap(v, 0.0, p) / (1.0 - free).sqrt())
}

/// Piecewise-constant set-speed schedule: each entry takes effect at its time.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SetSpeedSchedule {
    pub entries: Vec<SetSpeedEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetSpeedEntry {
    /// Time the set speed takes effect, s.
    pub t: f64,
    /// Set speed from that time on, m/s.
    pub v: f64,
}

impl SetSpeedSchedule {
    pub fn validate(&self) -> Result<(), SimError> {
        for pair in self.entries.windows(2) {
            if pair[1].t <= pair[0].t {
                return Err(SimError::config("speed schedule times must strictly increase"));
            }
        }
        if self.entries.iter().any(|e| e.v < 0.0) {
            return Err(SimError::config("speed schedule speeds must be >= 0"));
        }
        Ok(())
    }

    /// Set speed active at time `t`; `fallback` applies before the first entry.
    pub fn set_speed_at(&self, t: f64, fallback: f64) -> f64 {
        let mut v = fallback;
        for e in &self.entries {
            if e.t <= t {
                v = e.v;
            } else {
                break;
            }
        }
        v
    }
}

/// A recorded lead-speed trace sampled from a drive, replayed by
/// linear interpolation with end clamping.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayTrace {
    samples: Vec<ReplaySample>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplaySample {
    pub t: f64,
    pub v: f64,
    pub a: f64,
}

impl ReplayTrace {
    pub fn new(samples: Vec<ReplaySample>) -> Result<Self, SimError> {
        if samples.is_empty() {
            return Err(SimError::Empty("replay trace has no samples".into()));
        }
        for pair in samples.windows(2) {
            if pair[1].t <= pair[0].t {
                return Err(SimError::config("replay trace times must strictly increase"));
            }
        }
        if samples.iter().any(|s| s.v < 0.0) {
            return Err(SimError::config("replay trace speeds must be >= 0"));
        }
        if samples.iter().any(|s| !(s.t.is_finite() && s.v.is_finite() && s.a.is_finite())) {
            return Err(SimError::config("replay trace contains non-finite values"));
        }
        Ok(ReplayTrace { samples })
    }

    /// Load a `t,v,a` CSV file.
    pub fn load(path: &Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text).map_err(|e| {
            SimError::config(format!("{}: {e}", path.display()))
        })
    }

    /// Parse `t,v,a` CSV text.
    pub fn parse(text: &str) -> Result<Self, SimError> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, header)) if header.trim() == "t,v,a" => {}
            _ => return Err(SimError::config("replay trace must start with header `t,v,a`")),
        }
        let mut samples = Vec::new();
        for (idx, line) in lines {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split(',');
            let mut take = |name: &str| -> Result<f64, SimError> {
                fields
                    .next()
                    .ok_or_else(|| SimError::config(format!("line {}: missing {name}", idx + 1)))?
                    .trim()
                    .parse::<f64>()
                    .map_err(|_| SimError::config(format!("line {}: bad {name} value", idx + 1)))
            };
            let (t, v, a) = (take("t")?, take("v")?, take("a")?);
            if fields.next().is_some() {
                return Err(SimError::config(format!("line {}: expected 3 fields", idx + 1)));
            }
            samples.push(ReplaySample { t, v, a });
        }
        ReplayTrace::new(samples)
    }

    pub fn duration(&self) -> f64 {
        self.samples.last().unwrap().t
    }

    pub fn first_speed(&self) -> f64 {
        self.samples[0].v
    }

    /// Speed and acceleration at time `t`, linearly interpolated and clamped
    /// to the first/last sample outside the recorded range.
    pub fn sample(&self, t: f64) -> (f64, f64) {
        let s = &self.samples;
        if t <= s[0].t {
            return (s[0].v, s[0].a);
        }
        if t >= s[s.len() - 1].t {
            let last = s[s.len() - 1];
            return (last.v, last.a);
        }
        let hi = s.partition_point(|p| p.t <= t);
        let (lo, hi) = (s[hi - 1], s[hi]);
        let w = (t - lo.t) / (hi.t - lo.t);
        (lo.v + w * (hi.v - lo.v), lo.a + w * (hi.a - lo.a))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn highway() -> IdmParams {
        IdmParams { v0: 33.33, ..IdmParams::default() }
    }

    #[test]
    fn desired_gap_matches_hand_value() {
        let p = highway();
        assert_relative_eq!(idm_desired_gap(10.0, 2.0, &p), 17.773502691896258, epsilon = 1e-12);
    }

    #[test]
    fn desired_gap_floors_dynamic_term_at_zero() {
        let p = highway();
        assert_abs_diff_eq!(idm_desired_gap(5.0, -100.0, &p), p.s0);
    }

    #[test]
    fn accel_at_desired_gap_leaves_only_free_term() {
        let p = highway();
        let gap = idm_desired_gap(10.0, 2.0, &p);
        let a = idm_acceleration(10.0, gap, 2.0, &p).unwrap();
        let expect = -p.a_max * (10.0 / p.v0_eff()).powf(p.delta);
        assert_relative_eq!(a, expect, epsilon = 1e-12);
    }

    #[test]
    fn free_road_uses_only_speed_term() {
        let p = highway();
        let a = idm_acceleration(10.0, f64::INFINITY, 0.0, &p).unwrap();
        assert_relative_eq!(a, p.a_max * (1.0 - (10.0f64 / 33.33).powf(4.0)), epsilon = 1e-12);
    }

    #[test]
    fn zero_set_speed_brakes_at_hard_limit() {
        let p = IdmParams { v0: 0.0, ..IdmParams::default() };
        let a = idm_acceleration(5.556, f64::INFINITY, 0.0, &p).unwrap();
        assert_abs_diff_eq!(a, -p.b_hard);
    }

    #[test]
    fn non_positive_gap_is_an_error() {
        let p = highway();
        assert!(idm_acceleration(10.0, 0.0, 0.0, &p).is_err());
        assert!(idm_acceleration(10.0, -1.0, 0.0, &p).is_err());
    }

    #[test]
    fn equilibrium_gap_at_20_kmh() {
        let p = highway();
        assert_relative_eq!(equilibrium_gap(5.556, &p).unwrap(), 7.55891891363408, epsilon = 1e-9);
    }

    #[test]
    fn equilibrium_gap_zeroes_idm_accel() {
        let p = highway();
        for v in [2.0, 5.556, 10.0, 20.0] {
            let gap = equilibrium_gap(v, &p).unwrap();
            let a = idm_acceleration(v, gap, 0.0, &p).unwrap();
            assert_abs_diff_eq!(a, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn equilibrium_needs_headroom_below_set_speed() {
        let p = highway();
        assert!(equilibrium_gap(33.33, &p).is_err());
        assert!(equilibrium_gap(40.0, &p).is_err());
    }

    #[test]
    fn follower_converges_to_equilibrium_gap() {
        let p = highway();
        let v_lead = 10.0;
        let dt = 0.01;
        let mut x_lead = 50.0;
        let (mut x, mut v) = (0.0, v_lead);
        for _ in 0..120_000 {
            let gap = x_lead - x;
            let a = idm_acceleration(v, gap, v - v_lead, &p).unwrap();
            v = (v + a * dt).max(0.0);
            x += v * dt;
            x_lead += v_lead * dt;
        }
        let s_eq = equilibrium_gap(v_lead, &p).unwrap();
        assert_relative_eq!(x_lead - x, s_eq, max_relative = 5e-3);
    }

    #[test]
    fn schedule_switches_at_entry_times() {
        let s = SetSpeedSchedule {
            entries: vec![
                SetSpeedEntry { t: 0.0, v: 5.556 },
                SetSpeedEntry { t: 20.0, v: 6.944 },
                SetSpeedEntry { t: 35.0, v: 0.0 },
            ],
        };
        s.validate().unwrap();
        assert_abs_diff_eq!(s.set_speed_at(-1.0, 15.0), 15.0);
        assert_abs_diff_eq!(s.set_speed_at(0.0, 15.0), 5.556);
        assert_abs_diff_eq!(s.set_speed_at(19.99, 15.0), 5.556);
        assert_abs_diff_eq!(s.set_speed_at(20.0, 15.0), 6.944);
        assert_abs_diff_eq!(s.set_speed_at(100.0, 15.0), 0.0);
    }

    #[test]
    fn schedule_rejects_non_increasing_times() {
        let s = SetSpeedSchedule {
            entries: vec![SetSpeedEntry { t: 5.0, v: 1.0 }, SetSpeedEntry { t: 5.0, v: 2.0 }],
        };
        assert!(s.validate().is_err());
    }

    #[test]
    fn replay_parses_and_interpolates() {
        let trace = ReplayTrace::parse("t,v,a\n0,10,0\n2,12,1\n4,12,0\n").unwrap();
        assert_abs_diff_eq!(trace.duration(), 4.0);
        assert_abs_diff_eq!(trace.first_speed(), 10.0);
        let (v, a) = trace.sample(1.0);
        assert_abs_diff_eq!(v, 11.0);
        assert_abs_diff_eq!(a, 0.5);
        let (v, _) = trace.sample(2.0);
        assert_abs_diff_eq!(v, 12.0);
    }

    #[test]
    fn replay_clamps_outside_recorded_range() {
        let trace = ReplayTrace::parse("t,v,a\n1,10,0.5\n2,12,1\n").unwrap();
        assert_eq!(trace.sample(0.0), (10.0, 0.5));
        assert_eq!(trace.sample(99.0), (12.0, 1.0));
    }

    #[test]
    fn replay_rejects_bad_input() {
        assert!(ReplayTrace::parse("time,speed,acc\n0,1,0\n").is_err());
        assert!(ReplayTrace::parse("t,v,a\n0,1\n").is_err());
        assert!(ReplayTrace::parse("t,v,a\n0,1,0,9\n").is_err());
        assert!(ReplayTrace::parse("t,v,a\n0,x,0\n").is_err());
        assert!(ReplayTrace::parse("t,v,a\n1,1,0\n1,2,0\n").is_err());
        assert!(ReplayTrace::parse("t,v,a\n0,-1,0\n").is_err());
        assert!(ReplayTrace::parse("t,v,a\n").is_err());
    }

    #[test]
    fn accel_never_increases_with_approach_rate() {
        let p = highway();
        let mut prev = f64::INFINITY;
        for i in 0..200 {
            let dv = -10.0 + i as f64 * 0.1;
            let a = idm_acceleration(12.0, 30.0, dv, &p).unwrap();
            assert!(a <= prev + 1e-12);
            prev = a;
        }
    }
}
