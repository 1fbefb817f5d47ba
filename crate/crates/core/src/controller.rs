//! Constant-time-headway spacing controller.
//!
//! The upper loop turns a gap measurement into a desired acceleration: a PD
//! term on the spacing error, plus (in cooperative mode) a filtered
//! feedforward of the target vehicle's broadcast acceleration. The filter is
//! the lag-lead `(tau*s + 1) / (t_hw*s + 1)`, which inverts the low-level
//! closed loop so the feedforward path cancels target accelerations that the
//! radar-only PD loop would only react to after the gap has already changed.

use crate::error::SimError;
use crate::plant::ideal_lag_update;
use serde::{Deserialize, Serialize};

/// Constant-time-headway spacing policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpacingPolicy {
    /// Desired time headway, s.
    pub t_hw: f64,
    /// Standstill clearance, m.
    pub d0: f64,
    /// Length of the target vehicle, m.
    pub target_length: f64,
}

impl Default for SpacingPolicy {
    fn default() -> Self {
        SpacingPolicy { t_hw: 1.0, d0: 2.0, target_length: 4.8 }
    }
}

impl SpacingPolicy {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.t_hw > 0.0 && self.d0 > 0.0 && self.target_length > 0.0) {
            return Err(SimError::config("spacing policy: t_hw, d0, target_length must be > 0"));
        }
        Ok(())
    }
}

/// PD gains of the spacing loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpperGains {
    pub kp: f64,
    pub kd: f64,
}

/// Gains from a single bandwidth knob: `kd = w_k`, `kp = w_k^2`, placing the
/// spacing-loop poles at the chosen bandwidth.
pub fn gains_from_bandwidth(w_k: f64) -> Result<UpperGains, SimError> {
    if w_k <= 0.0 {
        return Err(SimError::config(format!("bandwidth w_k must be > 0, got {w_k}")));
    }
    Ok(UpperGains { kp: w_k * w_k, kd: w_k })
}

/// Gap the policy asks for at the current host speed.
pub fn desired_spacing(policy: &SpacingPolicy, v_host: f64) -> f64 {
    v_host * policy.t_hw + policy.d0
}

/// Spacing error: measured clearance minus desired spacing.
pub fn spacing_error(policy: &SpacingPolicy, gap: f64, v_host: f64) -> f64 {
    gap - desired_spacing(policy, v_host)
}

/// Spacing error rate from relative speed (target minus host) and host
/// acceleration; the headway term makes the derivative consistent with the
/// speed-dependent setpoint.
pub fn spacing_error_rate(policy: &SpacingPolicy, v_rel: f64, a_host: f64) -> f64 {
    v_rel - policy.t_hw * a_host
}

/// PD feedback command.
pub fn pd_command(gains: &UpperGains, e: f64, e_dot: f64) -> f64 {
    gains.kp * e + gains.kd * e_dot
}

/// Discrete realization of `(tau*s + 1) / (t_hw*s + 1)` as a first-order
/// state plus a direct feedthrough term.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedforwardFilter {
    tau: f64,
    t_hw: f64,
    state: f64,
}

impl FeedforwardFilter {
    pub fn new(tau: f64, t_hw: f64) -> Result<Self, SimError> {
        if !(tau > 0.0 && t_hw > 0.0) {
            return Err(SimError::config("feedforward filter: tau and t_hw must be > 0"));
        }
        Ok(FeedforwardFilter { tau, t_hw, state: 0.0 })
    }

    /// Output for the current input, then advance the internal state by `dt`
    /// with the input held (exact zero-order-hold discretization).
    pub fn step(&mut self, input: f64, dt: f64) -> f64 {
        let blend = self.tau / self.t_hw;
        let y = blend * input + (1.0 - blend) * self.state;
        self.state = ideal_lag_update(self.state, input, self.t_hw, dt);
        y
    }

    pub fn reset(&mut self) {
        self.state = 0.0;
    }
}

/// Spacing controller operating mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControllerMode {
    /// Radar-only PD loop.
    Acc,
    /// PD loop plus broadcast-acceleration feedforward.
    Cacc,
}

/// Gap and relative-speed measurement of the target ahead.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    /// Clearance to the target's rear, m.
    pub gap: f64,
    /// Target speed minus host speed, m/s.
    pub v_rel: f64,
}

/// One controller step's outputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpperOutput {
    /// Desired acceleration after saturation, m/s^2.
    pub a_des: f64,
    /// Spacing error, absent while holding speed without a target.
    pub e: Option<f64>,
    /// Spacing error rate, absent while holding speed.
    pub e_dot: Option<f64>,
    /// Feedforward component actually added to the command.
    pub ff: f64,
    /// True when no target was available and the speed hold took over.
    pub speed_hold: bool,
}

/// Upper spacing loop with saturation and a speed-hold fallback for the
/// no-target case.
#[derive(Debug, Clone, PartialEq)]
pub struct UpperController {
    pub mode: ControllerMode,
    pub policy: SpacingPolicy,
    pub gains: UpperGains,
    /// Command floor, m/s^2.
    pub a_min: f64,
    /// Command ceiling, m/s^2.
    pub a_max: f64,
    /// Set speed used when no target is in lane, m/s.
    pub cruise_speed: f64,
    /// Proportional speed-hold gain, 1/s.
    pub cruise_gain: f64,
    filter: FeedforwardFilter,
}

impl UpperController {
    pub fn new(
        mode: ControllerMode,
        policy: SpacingPolicy,
        gains: UpperGains,
        filter_tau: f64,
        a_min: f64,
        a_max: f64,
        cruise_speed: f64,
    ) -> Result<Self, SimError> {
        policy.validate()?;
        if a_min >= a_max {
            return Err(SimError::config("upper controller: a_min must be below a_max"));
        }
        if cruise_speed < 0.0 {
            return Err(SimError::config("upper controller: cruise_speed must be >= 0"));
        }
        let filter = FeedforwardFilter::new(filter_tau, policy.t_hw)?;
        Ok(UpperController { mode, policy, gains, a_min, a_max, cruise_speed, cruise_gain: 0.5, filter })
    }

    /// One step at period `dt`. `ff_input` is the latest broadcast target
    /// acceleration; a lost or stale channel passes `None`, which drives the
    /// feedforward path with zero.
    pub fn step(
        &mut self,
        meas: Option<Measurement>,
        v_host: f64,
        a_host: f64,
        ff_input: Option<f64>,
        dt: f64,
    ) -> Result<UpperOutput, SimError> {
        if !v_host.is_finite() || !a_host.is_finite() {
            return Err(SimError::NonFinite(format!(
                "upper controller host state v={v_host} a={a_host}"
            )));
        }
        let ff_out = match self.mode {
            ControllerMode::Cacc => self.filter.step(ff_input.unwrap_or(0.0), dt),
            ControllerMode::Acc => 0.0,
        };
        match meas {
            Some(m) => {
                if !m.gap.is_finite() || !m.v_rel.is_finite() {
                    return Err(SimError::NonFinite(format!(
                        "upper controller measurement gap={} v_rel={}",
                        m.gap, m.v_rel
                    )));
                }
                let e = spacing_error(&self.policy, m.gap, v_host);
                let e_dot = spacing_error_rate(&self.policy, m.v_rel, a_host);
                let a_des = (pd_command(&self.gains, e, e_dot) + ff_out)
                    .clamp(self.a_min, self.a_max);
                Ok(UpperOutput { a_des, e: Some(e), e_dot: Some(e_dot), ff: ff_out, speed_hold: false })
            }
            None => {
                let a_des = (self.cruise_gain * (self.cruise_speed - v_host))
                    .clamp(self.a_min, self.a_max);
                Ok(UpperOutput { a_des, e: None, e_dot: None, ff: 0.0, speed_hold: true })
            }
        }
    }
}
