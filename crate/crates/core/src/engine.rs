//! Fixed-step simulation loop.
//!
//! One step runs, in order: broadcasts, camera frames, radar frames,
//! controller evaluations, trace recording, then kinematic integration and
//! the collision check. Sensors and the channel tick at their own periods
//! (integer multiples of dt) and hold their outputs in between. Everything
//! downstream of the seed is deterministic, so a rerun reproduces the trace
//! byte for byte.

use crate::channel::{Bsm, V2vChannel};
use crate::controller::{gains_from_bandwidth, Measurement, SpacingPolicy, UpperController};
use crate::error::SimError;
use crate::idm::{idm_acceleration, IdmParams, ReplayTrace, SetSpeedSchedule};
use crate::perception::{
    select_in_lane_target, simulate_camera, simulate_radar, Ego, LaneLinePoly, SceneVehicle,
};
use crate::plant::{ideal_lag_update, plant_accel, PiLowLevel};
use crate::scenario::{
    FollowerConfig, LeadDriver, LowLevelMode, MeasurementMode, PerceptionConfig, ScenarioConfig,
};
use crate::trace::{Trace, TraceRecord, VehicleRecord};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Traffic ids start here so they never collide with platoon indices.
pub const TRAFFIC_ID_BASE: usize = 1000;

/// One vehicle's kinematic state. `x` is the front-bumper arc position; `a`
/// is the acceleration actually applied over the step that led here.
#[derive(Debug, Clone, Copy)]
struct VehState {
    x: f64,
    v: f64,
    a: f64,
    length: f64,
}

enum LeadSim {
    Idm {
        params: IdmParams,
        schedule: SetSpeedSchedule,
        /// Virtual stop line engaged while the scheduled set speed is zero.
        stop_line: Option<f64>,
    },
    Replay { trace: ReplayTrace },
}

enum LowLevelSim {
    IdealLag { tau: f64 },
    Pi { pi: PiLowLevel, force_actual: f64 },
}

struct FollowerSim {
    cfg: FollowerConfig,
    ctl: UpperController,
    low: LowLevelSim,
    /// Radar-frame-held gap measurement (perception mode only).
    held_meas: Option<Measurement>,
    held_target: Option<usize>,
    lane_left: Option<LaneLinePoly>,
    lane_right: Option<LaneLinePoly>,
}

/// Per-step controller outputs kept around for the trace record.
#[derive(Debug, Clone, Copy, Default)]
struct StepOutputs {
    a_des: f64,
    e: Option<f64>,
    ff: Option<f64>,
    target: Option<usize>,
    bsm_age: Option<f64>,
}

fn period_steps(period: f64, dt: f64) -> usize {
    ((period / dt).round() as usize).max(1)
}

fn build_lead(cfg: &ScenarioConfig) -> Result<(LeadSim, f64), SimError> {
    match cfg.lead.driver {
        LeadDriver::Idm => Ok((
            LeadSim::Idm { params: cfg.lead.idm, schedule: cfg.lead.schedule(), stop_line: None },
            cfg.lead.v_init,
        )),
        LeadDriver::Replay => {
            let path = cfg.lead.trace.as_ref().expect("validated");
            let trace = ReplayTrace::load(path)?;
            let v0 = trace.first_speed();
            Ok((LeadSim::Replay { trace }, v0))
        }
    }
}

fn build_follower(f: &FollowerConfig, pred_length: f64) -> Result<FollowerSim, SimError> {
    let policy = SpacingPolicy { t_hw: f.t_hw, d0: f.d0, target_length: pred_length };
    let ctl = UpperController::new(
        f.mode,
        policy,
        gains_from_bandwidth(f.w_k)?,
        f.tau,
        f.a_min,
        f.a_max,
        f.cruise_speed,
    )?;
    let low = match f.low_level {
        LowLevelMode::IdealLag => LowLevelSim::IdealLag { tau: f.tau },
        LowLevelMode::Pi => LowLevelSim::Pi {
            pi: PiLowLevel::new(f.pi_gains.clone(), f.integrator_limit)?,
            force_actual: 0.0,
        },
    };
    Ok(FollowerSim {
        cfg: f.clone(),
        ctl,
        low,
        held_meas: None,
        held_target: None,
        lane_left: None,
        lane_right: None,
    })
}

/// Scene around follower `self_idx`: every other platoon vehicle in-lane
/// plus configured traffic at its constant-speed position for time `t`.
fn build_scene(
    states: &[VehState],
    self_idx: usize,
    percep: &PerceptionConfig,
    t: f64,
) -> Vec<SceneVehicle> {
    let mut scene: Vec<SceneVehicle> = states
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != self_idx)
        .map(|(i, s)| SceneVehicle { id: i, s: s.x, lat: 0.0, v: s.v, length: s.length })
        .collect();
    scene.extend(percep.traffic.iter().enumerate().map(|(i, tr)| SceneVehicle {
        id: TRAFFIC_ID_BASE + i,
        s: tr.s + tr.v * t,
        lat: tr.lat,
        v: tr.v,
        length: tr.length,
    }));
    scene
}

/// Run one scenario to completion (or first collision) and return the trace.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<Trace, SimError> {
    cfg.validate()?;
    let dt = cfg.sim.dt;
    let n_records = cfg.sim.n_records();

    let (mut lead, lead_v0) = build_lead(cfg)?;
    let mut states = vec![VehState { x: 0.0, v: lead_v0, a: 0.0, length: cfg.lead.length }];
    let mut followers = Vec::with_capacity(cfg.followers.len());
    for f in &cfg.followers {
        let pred = *states.last().unwrap();
        let gap = f.gap_init.unwrap_or(f.t_hw * f.v_init + f.d0);
        states.push(VehState {
            x: pred.x - pred.length - gap,
            v: f.v_init,
            a: 0.0,
            length: f.length,
        });
        followers.push(build_follower(f, pred.length)?);
    }
    let n_veh = states.len();

    let mut channel = match &cfg.channel {
        Some(p) => Some((V2vChannel::new(*p, cfg.sim.seed)?, period_steps(p.period, dt))),
        None => None,
    };
    let percep = cfg.perception.as_ref();
    let percep_rates = percep.map(|p| {
        (period_steps(p.radar_period, dt), period_steps(p.camera_period, dt))
    });
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.sim.seed);

    let mut records = Vec::with_capacity(n_records);
    let mut collided = false;

    for k in 0..n_records {
        let t = k as f64 * dt;

        if let Some((chan, bsm_steps)) = &mut channel {
            if k % *bsm_steps == 0 {
                let seq = (k / *bsm_steps) as u64;
                for (i, s) in states.iter().enumerate() {
                    chan.broadcast(&Bsm {
                        sender_id: i,
                        seq,
                        t_sent: t,
                        accel: s.a,
                        speed: s.v,
                        position: s.x,
                    });
                }
            }
        }

        if let (Some(p), Some((radar_steps, camera_steps))) = (percep, percep_rates) {
            for (j, f) in followers.iter_mut().enumerate() {
                if f.cfg.measurement != MeasurementMode::Perception {
                    continue;
                }
                let ego_state = states[j + 1];
                if k % camera_steps == 0 {
                    let (l, r) = simulate_camera(
                        &p.road,
                        ego_state.x,
                        &p.mounting,
                        p.fit_range,
                        p.left_visible,
                        p.right_visible,
                    );
                    f.lane_left = l;
                    f.lane_right = r;
                }
                if k % radar_steps == 0 {
                    let scene = build_scene(&states, j + 1, p, t);
                    let ego = Ego { s: ego_state.x, v: ego_state.v };
                    let dets =
                        simulate_radar(&p.road, &ego, &scene, &p.mounting, &p.noise, &mut rng);
                    let sel = select_in_lane_target(
                        &dets,
                        f.lane_left.as_ref(),
                        f.lane_right.as_ref(),
                        p.road.lane_width,
                        &p.mounting,
                    );
                    f.held_meas = sel.map(|d| Measurement {
                        gap: d.x - p.mounting.dx_rc,
                        v_rel: d.v_rel,
                    });
                    f.held_target = sel.map(|d| d.id);
                }
            }
        }

        let mut outputs = vec![StepOutputs::default(); n_veh];

        let lead_a_des = match &mut lead {
            LeadSim::Idm { params, schedule, stop_line } => {
                let v0 = schedule.set_speed_at(t, params.v0);
                if v0 <= 0.0 {
                    // A zero set speed means stop. The free-road term alone
                    // never reaches zero, so the driver brakes toward a
                    // virtual stop line placed one comfortable braking
                    // distance ahead at the moment the command arrives; the
                    // interaction term then shapes a smooth ramp-in/ramp-out
                    // deceleration. Below walking pace the asymptote is cut
                    // short and the vehicle parks exactly.
                    let s = states[0];
                    let line = *stop_line.get_or_insert(
                        s.x + s.v * s.v / (2.0 * params.b_comf) + params.s0,
                    );
                    if s.v <= 0.1 {
                        if s.v > 0.0 {
                            -params.b_comf
                        } else {
                            0.0
                        }
                    } else {
                        idm_acceleration(s.v, (line - s.x).max(0.01), s.v, params)?
                    }
                } else {
                    *stop_line = None;
                    let p = IdmParams { v0, ..*params };
                    idm_acceleration(states[0].v, f64::INFINITY, 0.0, &p)?
                }
            }
            LeadSim::Replay { trace } => trace.sample(t).1,
        };
        outputs[0].a_des = lead_a_des;

        for (j, f) in followers.iter_mut().enumerate() {
            let idx = j + 1;
            let (host, pred) = (states[idx], states[j]);
            let meas = match f.cfg.measurement {
                MeasurementMode::Truth => Some(Measurement {
                    gap: pred.x - pred.length - host.x,
                    v_rel: pred.v - host.v,
                }),
                MeasurementMode::Perception => f.held_meas,
            };
            let mut ff_input = None;
            let mut bsm_age = None;
            if f.cfg.mode == crate::controller::ControllerMode::Cacc {
                if let Some((chan, _)) = &mut channel {
                    if let Some((accel, age)) = chan.latest_accel(j, t) {
                        bsm_age = Some(age);
                        if age <= chan.params.stale_timeout {
                            ff_input = Some(accel);
                        }
                    }
                }
            }
            let out = f.ctl.step(meas, host.v, host.a, ff_input, dt)?;
            outputs[idx] = StepOutputs {
                a_des: out.a_des,
                e: out.e,
                ff: Some(out.ff),
                target: match f.cfg.measurement {
                    MeasurementMode::Truth => Some(j),
                    MeasurementMode::Perception => f.held_target,
                },
                bsm_age,
            };
        }

        let vehicles = states
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let gap = (i > 0).then(|| states[i - 1].x - states[i - 1].length - s.x);
                VehicleRecord {
                    x: s.x,
                    v: s.v,
                    a: s.a,
                    a_des: outputs[i].a_des,
                    gap,
                    h: gap.and_then(|g| crate::metrics::time_headway(g, s.v)),
                    e: outputs[i].e,
                    ff: outputs[i].ff,
                    target: outputs[i].target,
                    bsm_age: outputs[i].bsm_age,
                }
            })
            .collect();
        records.push(TraceRecord { t, vehicles });

        if collided || k == n_records - 1 {
            break;
        }

        let lead_v_next = match &mut lead {
            LeadSim::Idm { .. } => (states[0].v + lead_a_des * dt).max(0.0),
            LeadSim::Replay { trace } => trace.sample(t + dt).0.max(0.0),
        };
        integrate_to(&mut states[0], lead_v_next, dt);

        for (j, f) in followers.iter_mut().enumerate() {
            let idx = j + 1;
            let a_des = outputs[idx].a_des;
            let host = states[idx];
            let a_cmd = match &mut f.low {
                LowLevelSim::IdealLag { tau } => ideal_lag_update(host.a, a_des, *tau, dt),
                LowLevelSim::Pi { pi, force_actual } => {
                    let force_req = pi.step(a_des, host.a, host.v, dt, &f.cfg.plant);
                    *force_actual =
                        ideal_lag_update(*force_actual, force_req, f.cfg.plant.actuator_lag, dt);
                    plant_accel(host.v, *force_actual, &f.cfg.plant)
                }
            };
            let v_next = (host.v + a_cmd * dt).max(0.0);
            integrate_to(&mut states[idx], v_next, dt);
        }

        collided = (1..n_veh).any(|i| states[i - 1].x - states[i - 1].length - states[i].x <= 0.0);
    }

    Ok(Trace {
        dt,
        records,
        collided,
        headway_targets: cfg.followers.iter().map(|f| f.t_hw).collect(),
    })
}

/// Advance one vehicle to its next speed; the stored acceleration becomes
/// whatever was actually realized, including the no-reverse clamp, so the
/// lag state and broadcast accel never report braking that did not happen.
fn integrate_to(s: &mut VehState, v_next: f64, dt: f64) {
    s.a = (v_next - s.v) / dt;
    s.v = v_next;
    s.x += v_next * dt;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ChannelParams;
    use crate::controller::ControllerMode;
    use crate::scenario::{LeadConfig, SimConfig};
    use approx::assert_abs_diff_eq;

    fn cruise_cfg(duration: f64) -> ScenarioConfig {
        // Lead holds its set speed; follower starts in equilibrium.
        ScenarioConfig {
            sim: SimConfig { dt: 0.01, duration, seed: 7 },
            lead: LeadConfig {
                v_init: 10.0,
                idm: IdmParams { v0: 10.0, ..IdmParams::default() },
                ..LeadConfig::default()
            },
            followers: vec![FollowerConfig { v_init: 10.0, ..FollowerConfig::default() }],
            ..ScenarioConfig::default()
        }
    }

    fn stop_cfg() -> ScenarioConfig {
        let mut cfg = cruise_cfg(40.0);
        cfg.lead.set_speed = vec![crate::idm::SetSpeedEntry { t: 10.0, v: 0.0 }];
        cfg
    }

    #[test]
    fn record_count_includes_both_endpoints() {
        let mut cfg = cruise_cfg(30.0);
        cfg.sim.dt = 0.01;
        let trace = run_scenario(&cfg).unwrap();
        assert_eq!(trace.records.len(), 3001);
        assert_abs_diff_eq!(trace.records.last().unwrap().t, 30.0, epsilon = 1e-9);
    }

    #[test]
    fn equilibrium_start_stays_put() {
        let trace = run_scenario(&cruise_cfg(20.0)).unwrap();
        for rec in &trace.records {
            let e = rec.vehicles[1].e.unwrap();
            assert!(e.abs() < 1e-6, "t={} e={}", rec.t, e);
            assert_abs_diff_eq!(rec.vehicles[1].gap.unwrap(), 12.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn kinematic_consistency_through_a_full_stop() {
        let trace = run_scenario(&stop_cfg()).unwrap();
        assert!(!trace.collided);
        for pair in trace.records.windows(2) {
            for i in 0..2 {
                let dx = pair[1].vehicles[i].x - pair[0].vehicles[i].x;
                assert!(
                    (dx - pair[1].vehicles[i].v * trace.dt).abs() < 1e-12,
                    "t={} veh{}",
                    pair[1].t,
                    i
                );
            }
        }
        // The lead actually stops and nobody reverses.
        assert!(trace.records.last().unwrap().vehicles[0].v == 0.0);
        assert!(trace.records.iter().all(|r| r.vehicles.iter().all(|v| v.v >= 0.0)));
    }

    #[test]
    fn identical_seeds_reproduce_the_trace_bytes() {
        let mut cfg = stop_cfg();
        cfg.channel = Some(ChannelParams { jitter: 0.01, loss_prob: 0.3, ..Default::default() });
        cfg.followers[0].mode = ControllerMode::Cacc;
        let mut a = Vec::new();
        run_scenario(&cfg).unwrap().write_csv(&mut a).unwrap();
        let mut b = Vec::new();
        run_scenario(&cfg).unwrap().write_csv(&mut b).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn collision_sets_the_flag_and_ends_the_trace() {
        let mut cfg = cruise_cfg(40.0);
        // Tailgating start, hard lead stop, and a follower too weak to brake.
        cfg.followers[0].gap_init = Some(1.0);
        cfg.followers[0].a_min = -0.5;
        cfg.lead.set_speed = vec![crate::idm::SetSpeedEntry { t: 2.0, v: 0.0 }];
        let trace = run_scenario(&cfg).unwrap();
        assert!(trace.collided);
        assert!(trace.records.len() < cfg.sim.n_records());
        assert!(trace.records.last().unwrap().vehicles[1].gap.unwrap() <= 0.0);
    }

    #[test]
    fn cacc_followers_see_broadcast_ages() {
        let mut cfg = cruise_cfg(5.0);
        cfg.channel = Some(ChannelParams::default());
        cfg.followers[0].mode = ControllerMode::Cacc;
        let trace = run_scenario(&cfg).unwrap();
        // Before the first delivery (latency 0.02) the age column is empty.
        assert!(trace.records[0].vehicles[1].bsm_age.is_none());
        let rec = &trace.records[500];
        let age = rec.vehicles[1].bsm_age.unwrap();
        assert!(age >= 0.02 && age <= 0.12 + 1e-9, "age = {age}");
    }

    #[test]
    fn perception_measurement_tracks_truth_on_a_straight_road() {
        let mut truth_cfg = stop_cfg();
        truth_cfg.sim.duration = 25.0;
        let mut percep_cfg = truth_cfg.clone();
        percep_cfg.followers[0].measurement = MeasurementMode::Perception;
        percep_cfg.perception = Some(PerceptionConfig::default());

        let t_truth = run_scenario(&truth_cfg).unwrap();
        let t_percep = run_scenario(&percep_cfg).unwrap();
        assert!(!t_percep.collided);
        for (ra, rb) in t_truth.records.iter().zip(&t_percep.records) {
            let (ga, gb) = (ra.vehicles[1].gap.unwrap(), rb.vehicles[1].gap.unwrap());
            assert!((ga - gb).abs() < 0.25, "t={} truth={} percep={}", ra.t, ga, gb);
        }
        // The radar-selected target is the platoon lead.
        assert_eq!(t_percep.records[100].vehicles[1].target, Some(0));
    }

    #[test]
    fn replay_lead_follows_its_samples() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("lead.csv");
        std::fs::write(&path, "t,v,a\n0,5,0\n10,10,0.5\n20,10,0\n").unwrap();
        let mut cfg = cruise_cfg(15.0);
        cfg.lead.driver = LeadDriver::Replay;
        cfg.lead.trace = Some(path);
        cfg.followers[0].v_init = 5.0;
        let trace = run_scenario(&cfg).unwrap();
        assert_abs_diff_eq!(trace.records[0].vehicles[0].v, 5.0, epsilon = 1e-12);
        // At t = 10 the ramp tops out at 10 m/s.
        let rec = &trace.records[1000];
        assert_abs_diff_eq!(rec.vehicles[0].v, 10.0, epsilon = 1e-9);
        assert!(!trace.collided);
    }

    #[test]
    fn speed_hold_kicks_in_with_no_target_in_range() {
        let mut cfg = cruise_cfg(10.0);
        cfg.followers[0].measurement = MeasurementMode::Perception;
        cfg.followers[0].gap_init = Some(200.0); // beyond radar range
        cfg.followers[0].cruise_speed = 12.0;
        cfg.followers[0].v_init = 10.0;
        cfg.perception = Some(PerceptionConfig::default());
        let trace = run_scenario(&cfg).unwrap();
        let rec = trace.records.last().unwrap();
        assert!(rec.vehicles[1].target.is_none());
        assert!(rec.vehicles[1].e.is_none());
        // Held speed climbs toward the cruise set point.
        assert!(rec.vehicles[1].v > 11.0, "v = {}", rec.vehicles[1].v);
    }
}
