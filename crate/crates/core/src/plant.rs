//! Longitudinal vehicle plant and low-level acceleration tracking.
//!
//! Two low-level models are supported: an ideal first-order lag standing in
//! for the whole closed inner loop, and a gain-scheduled PI force controller
//! driving a point-mass force balance through an actuator lag.

use crate::error::SimError;
use serde::{Deserialize, Serialize};

/// Point-mass plant parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlantParams {
    /// Vehicle mass, kg.
    pub mass: f64,
    /// Aerodynamic drag coefficient, N per (m/s)^2.
    pub drag_coeff: f64,
    /// Rolling resistance coefficient (fraction of weight).
    pub rolling_coeff: f64,
    /// Gravitational acceleration, m/s^2.
    pub gravity: f64,
    /// Drive/brake actuator lag time constant, s.
    pub actuator_lag: f64,
    /// Largest braking force (negative), N.
    pub force_min: f64,
    /// Largest drive force, N.
    pub force_max: f64,
}

impl Default for PlantParams {
    fn default() -> Self {
        PlantParams {
            mass: 1650.0,
            drag_coeff: 0.39,
            rolling_coeff: 0.01,
            gravity: 9.81,
            actuator_lag: 0.2,
            force_min: -8000.0,
            force_max: 4000.0,
        }
    }
}

impl PlantParams {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.mass > 0.0 && self.gravity > 0.0 && self.actuator_lag > 0.0) {
            return Err(SimError::config("plant: mass, gravity, actuator_lag must be > 0"));
        }
        if self.drag_coeff < 0.0 || self.rolling_coeff < 0.0 {
            return Err(SimError::config("plant: resistance coefficients must be >= 0"));
        }
        if self.force_min >= self.force_max {
            return Err(SimError::config("plant: force_min must be below force_max"));
        }
        Ok(())
    }
}

/// Exact zero-order-hold update of a first-order lag toward `target`:
/// the state after `dt` with the input held constant.
pub fn ideal_lag_update(state: f64, target: f64, tau: f64, dt: f64) -> f64 {
    state + (1.0 - (-dt / tau).exp()) * (target - state)
}

/// Acceleration from the longitudinal force balance.
pub fn plant_accel(v: f64, force: f64, p: &PlantParams) -> f64 {
    (force - p.drag_coeff * v * v - p.rolling_coeff * p.mass * p.gravity) / p.mass
}

/// One point of the PI gain schedule: gains in effect at speed `v`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainPoint {
    pub v: f64,
    pub kp: f64,
    pub ki: f64,
}

/// Speed-scheduled PI gains, linearly interpolated between points and
/// clamped to the first/last point outside the covered range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GainSchedule {
    pub points: Vec<GainPoint>,
}

impl Default for GainSchedule {
    fn default() -> Self {
        GainSchedule {
            points: vec![
                GainPoint { v: 5.0, kp: 0.5, ki: 1.0 },
                GainPoint { v: 15.0, kp: 0.7, ki: 1.4 },
                GainPoint { v: 25.0, kp: 0.9, ki: 1.8 },
            ],
        }
    }
}

impl GainSchedule {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.points.is_empty() {
            return Err(SimError::config("gain schedule needs at least one point"));
        }
        for pair in self.points.windows(2) {
            if pair[1].v <= pair[0].v {
                return Err(SimError::config("gain schedule speeds must strictly increase"));
            }
        }
        if self.points.iter().any(|p| p.kp <= 0.0 || p.ki < 0.0) {
            return Err(SimError::config("gain schedule needs kp > 0 and ki >= 0"));
        }
        Ok(())
    }

    /// Interpolated (kp, ki) at speed `v`.
    pub fn gains_at(&self, v: f64) -> (f64, f64) {
        let pts = &self.points;
        if v <= pts[0].v {
            return (pts[0].kp, pts[0].ki);
        }
        if v >= pts[pts.len() - 1].v {
            let last = pts[pts.len() - 1];
            return (last.kp, last.ki);
        }
        let hi = pts.partition_point(|p| p.v <= v);
        let (lo, hi) = (pts[hi - 1], pts[hi]);
        let w = (v - lo.v) / (hi.v - lo.v);
        (lo.kp + w * (hi.kp - lo.kp), lo.ki + w * (hi.ki - lo.ki))
    }
}

/// Gain-scheduled PI loop converting an acceleration error into a force
/// request. Integration is suspended while the force request saturates.
#[derive(Debug, Clone, PartialEq)]
pub struct PiLowLevel {
    pub schedule: GainSchedule,
    /// Integrator clamp, m/s^2 of accumulated error.
    pub integrator_limit: f64,
    integral: f64,
}

impl PiLowLevel {
    pub fn new(schedule: GainSchedule, integrator_limit: f64) -> Result<Self, SimError> {
        schedule.validate()?;
        if integrator_limit <= 0.0 {
            return Err(SimError::config("pi: integrator_limit must be > 0"));
        }
        Ok(PiLowLevel { schedule, integrator_limit, integral: 0.0 })
    }

    pub fn integral(&self) -> f64 {
        self.integral
    }

    /// One controller step; returns the saturated force request.
    pub fn step(&mut self, a_des: f64, a_meas: f64, v: f64, dt: f64, plant: &PlantParams) -> f64 {
        let err = a_des - a_meas;
        let (kp, ki) = self.schedule.gains_at(v);
        let raw = plant.mass * (kp * err + ki * (self.integral + err * dt));
        let saturated_high = raw > plant.force_max;
        let saturated_low = raw < plant.force_min;
        if !(saturated_high && err > 0.0) && !(saturated_low && err < 0.0) {
            self.integral = (self.integral + err * dt)
                .clamp(-self.integrator_limit, self.integrator_limit);
        }
        let force = plant.mass * (kp * err + ki * self.integral);
        force.clamp(plant.force_min, plant.force_max)
    }
}
