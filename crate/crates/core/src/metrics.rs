//! Run quality metrics: headway tracking, spacing errors, string stability.
//!
//! All metrics skip an initial startup window (5 s by default) so transients
//! from imperfect initial conditions do not pollute steady-state numbers.

use crate::error::SimError;
use crate::trace::Trace;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

/// Speed below which time headway is treated as undefined, m/s.
pub const HEADWAY_MIN_SPEED: f64 = 1.0;

/// Default startup interval excluded from metrics, s.
pub const DEFAULT_WINDOW_START: f64 = 5.0;

/// Default settling threshold on |spacing error|, m.
pub const DEFAULT_SETTLE_THRESHOLD: f64 = 0.05;

/// Signal norm used for amplification ratios.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalNorm {
    /// Peak magnitude.
    #[default]
    LInf,
    /// Root sum of squares over the window.
    L2,
}

/// Time headway `gap / v`, undefined below walking pace.
pub fn time_headway(gap: f64, v_host: f64) -> Option<f64> {
    (v_host >= HEADWAY_MIN_SPEED).then(|| gap / v_host)
}

fn window_records(trace: &Trace, window_start: f64) -> impl Iterator<Item = &crate::trace::TraceRecord> {
    trace.records.iter().filter(move |r| r.t >= window_start)
}

/// RMS of `h - target` for follower `veh` over defined-headway samples in
/// the window. Errors when no sample has a defined headway.
pub fn headway_rmse(trace: &Trace, veh: usize, target: f64, window_start: f64) -> Result<f64, SimError> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for rec in window_records(trace, window_start) {
        if let Some(h) = rec.vehicles[veh].h {
            sum += (h - target) * (h - target);
            n += 1;
        }
    }
    if n == 0 {
        return Err(SimError::Empty(format!(
            "headway rmse: vehicle {veh} has no defined-headway samples in the window"
        )));
    }
    Ok((sum / n as f64).sqrt())
}

/// Largest |spacing error| of follower `veh` in the window.
pub fn max_abs_spacing_error(trace: &Trace, veh: usize, window_start: f64) -> Result<f64, SimError> {
    let worst = window_records(trace, window_start)
        .filter_map(|r| r.vehicles[veh].e)
        .fold(f64::NEG_INFINITY, |m, e| m.max(e.abs()));
    if worst.is_finite() {
        Ok(worst)
    } else {
        Err(SimError::Empty(format!("vehicle {veh} has no spacing-error samples in the window")))
    }
}

fn error_norm(trace: &Trace, veh: usize, norm: SignalNorm, window_start: f64) -> f64 {
    let errs = window_records(trace, window_start).filter_map(|r| r.vehicles[veh].e);
    match norm {
        SignalNorm::LInf => errs.fold(0.0, |m: f64, e| m.max(e.abs())),
        SignalNorm::L2 => errs.map(|e| e * e).sum::<f64>().sqrt(),
    }
}

/// Spacing-error amplification down the chain: one ratio
/// `|e_(i+1)| / |e_i|` per consecutive follower pair. A pair of exactly-zero
/// signals gives 0; amplification out of silence gives infinity.
pub fn amplification_ratios(
    trace: &Trace,
    norm: SignalNorm,
    window_start: f64,
) -> Result<Vec<f64>, SimError> {
    let n = trace.n_vehicles();
    if n < 3 {
        return Err(SimError::config(format!(
            "amplification ratios need at least 2 followers, trace has {}",
            n.saturating_sub(1)
        )));
    }
    let norms: Vec<f64> = (1..n).map(|veh| error_norm(trace, veh, norm, window_start)).collect();
    Ok(norms
        .windows(2)
        .map(|pair| {
            if pair[0] == 0.0 {
                if pair[1] == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            } else {
                pair[1] / pair[0]
            }
        })
        .collect())
}

/// Whether the run collided, and the smallest clearance any follower saw
/// (over the whole trace, startup included).
pub fn collision_and_min_gap(trace: &Trace) -> Result<(bool, f64), SimError> {
    if trace.n_vehicles() < 2 {
        return Err(SimError::config("collision metric needs at least one follower"));
    }
    let min_gap = trace
        .records
        .iter()
        .flat_map(|r| r.vehicles.iter().filter_map(|v| v.gap))
        .fold(f64::INFINITY, f64::min);
    Ok((trace.collided, min_gap))
}

/// Earliest time after which |e| stays below `threshold` for the rest of the
/// run, for follower `veh`. `None` if it is still above at the end.
pub fn settle_time(trace: &Trace, veh: usize, threshold: f64, window_start: f64) -> Option<f64> {
    let mut settle = None;
    let mut settled = true;
    for rec in window_records(trace, window_start) {
        match rec.vehicles[veh].e {
            Some(e) if e.abs() >= threshold => {
                settled = false;
                settle = None;
            }
            _ => {
                if !settled || settle.is_none() {
                    settle = Some(rec.t);
                    settled = true;
                }
            }
        }
    }
    if settled {
        settle
    } else {
        None
    }
}

/// Aggregated run metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub collided: bool,
    pub min_gap: f64,
    /// Pooled RMS headway deviation across all followers, s.
    pub headway_rmse: f64,
    pub max_abs_spacing_error: f64,
    /// Latest follower settle time, s; `None` if any follower never settles.
    pub settle_time: Option<f64>,
    /// Empty unless the trace has at least two followers.
    pub amplification_ratios: Vec<f64>,
}

impl MetricsReport {
    pub fn compute(
        trace: &Trace,
        window_start: f64,
        norm: SignalNorm,
        settle_threshold: f64,
    ) -> Result<Self, SimError> {
        let n = trace.n_vehicles();
        if n < 2 {
            return Err(SimError::config("metrics need at least one follower"));
        }
        if trace.headway_targets.len() != n - 1 {
            return Err(SimError::config("metrics: trace is missing headway targets"));
        }
        let (collided, min_gap) = collision_and_min_gap(trace)?;
        let mut sum = 0.0;
        let mut count = 0usize;
        for rec in window_records(trace, window_start) {
            for veh in 1..n {
                if let Some(h) = rec.vehicles[veh].h {
                    let d = h - trace.headway_targets[veh - 1];
                    sum += d * d;
                    count += 1;
                }
            }
        }
        if count == 0 {
            return Err(SimError::Empty("metrics: no defined-headway samples in the window".into()));
        }
        let max_abs = (1..n)
            .map(|veh| max_abs_spacing_error(trace, veh, window_start))
            .collect::<Result<Vec<_>, _>>()?
            .into_iter()
            .fold(0.0, f64::max);
        let settle = (1..n)
            .map(|veh| settle_time(trace, veh, settle_threshold, window_start))
            .try_fold(0.0f64, |acc, s| s.map(|s| acc.max(s)));
        let ratios = if n >= 3 {
            amplification_ratios(trace, norm, window_start)?
        } else {
            Vec::new()
        };
        Ok(MetricsReport {
            collided,
            min_gap,
            headway_rmse: (sum / count as f64).sqrt(),
            max_abs_spacing_error: max_abs,
            settle_time: settle,
            amplification_ratios: ratios,
        })
    }

    /// Flat `key = value` text block.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "collided = {}", self.collided);
        let _ = writeln!(s, "min_gap_m = {:.6}", self.min_gap);
        let _ = writeln!(s, "headway_rmse_s = {:.6}", self.headway_rmse);
        let _ = writeln!(s, "max_abs_spacing_error_m = {:.6}", self.max_abs_spacing_error);
        match self.settle_time {
            Some(t) => {
                let _ = writeln!(s, "settle_time_s = {t:.6}");
            }
            None => {
                let _ = writeln!(s, "settle_time_s = none");
            }
        }
        for (i, r) in self.amplification_ratios.iter().enumerate() {
            let _ = writeln!(s, "amplification_ratio_{} = {r:.6}", i + 1);
        }
        s
    }
}
