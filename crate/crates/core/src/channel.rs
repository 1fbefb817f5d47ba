//! Broadcast vehicle-to-vehicle channel.
//!
//! Senders broadcast basic safety messages at a fixed period; the channel
//! applies latency, bounded jitter and random loss, then hands receivers the
//! most recent delivered message per sender. Loss and jitter are pure
//! functions of `(seed, sender, seq)`, so a rerun with the same seed sees the
//! exact same channel realization regardless of call order.

use crate::error::SimError;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

/// Basic safety message: one periodic state broadcast from a vehicle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bsm {
    pub sender_id: usize,
    /// Per-sender sequence number, consecutive from 0.
    pub seq: u64,
    /// Transmit time, s.
    pub t_sent: f64,
    /// Sender acceleration, m/s^2.
    pub accel: f64,
    /// Sender speed, m/s.
    pub speed: f64,
    /// Sender position along the road, m.
    pub position: f64,
}

/// Channel timing and reliability parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelParams {
    /// Broadcast period, s.
    pub period: f64,
    /// Nominal one-way latency, s.
    pub latency: f64,
    /// Uniform jitter half-width added to the latency, s.
    pub jitter: f64,
    /// Probability a message is lost.
    pub loss_prob: f64,
    /// Age beyond which a received acceleration is no longer trusted, s.
    pub stale_timeout: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        ChannelParams { period: 0.1, latency: 0.02, jitter: 0.0, loss_prob: 0.0, stale_timeout: 0.5 }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.period > 0.0 && self.stale_timeout > 0.0) {
            return Err(SimError::config("channel: period and stale_timeout must be > 0"));
        }
        if self.latency < 0.0 {
            return Err(SimError::config("channel: latency must be >= 0"));
        }
        if !(0.0..=self.latency).contains(&self.jitter) {
            return Err(SimError::config("channel: jitter must satisfy 0 <= jitter <= latency"));
        }
        if !(0.0..=1.0).contains(&self.loss_prob) {
            return Err(SimError::config("channel: loss_prob must be in [0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Delivery {
    seq: u64,
    t_sent: f64,
    t_deliver: f64,
    accel: f64,
}

#[derive(Debug, Clone, Default)]
struct SenderQueue {
    pending: VecDeque<Delivery>,
    delivered: Option<Delivery>,
    last_scheduled: f64,
}

/// Broadcast channel state for all senders.
#[derive(Debug, Clone)]
pub struct V2vChannel {
    pub params: ChannelParams,
    seed: u64,
    queues: Vec<SenderQueue>,
}

/// SplitMix64 finalizer; a stable stateless mixer for per-message draws.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Uniform draw in [0, 1) from the message identity and a stream tag.
fn unit_draw(seed: u64, sender: usize, seq: u64, tag: u64) -> f64 {
    let h = mix(mix(mix(seed ^ tag) ^ sender as u64) ^ seq);
    (h >> 11) as f64 / (1u64 << 53) as f64
}

const TAG_LOSS: u64 = 0x6c6f7373;
const TAG_JITTER: u64 = 0x6a697474;

impl V2vChannel {
    pub fn new(params: ChannelParams, seed: u64) -> Result<Self, SimError> {
        params.validate()?;
        Ok(V2vChannel { params, seed, queues: Vec::new() })
    }

    fn queue_mut(&mut self, sender: usize) -> &mut SenderQueue {
        if self.queues.len() <= sender {
            self.queues.resize_with(sender + 1, SenderQueue::default);
        }
        &mut self.queues[sender]
    }

    /// Submit one broadcast. The message is either dropped or scheduled for
    /// delivery at `t_sent + latency + jitter`, re-ordered so deliveries from
    /// one sender never go backwards in time.
    pub fn broadcast(&mut self, bsm: &Bsm) {
        let p = self.params;
        if unit_draw(self.seed, bsm.sender_id, bsm.seq, TAG_LOSS) < p.loss_prob {
            return;
        }
        let jitter = (2.0 * unit_draw(self.seed, bsm.sender_id, bsm.seq, TAG_JITTER) - 1.0) * p.jitter;
        let q = self.queue_mut(bsm.sender_id);
        let t_deliver = (bsm.t_sent + p.latency + jitter).max(q.last_scheduled);
        q.last_scheduled = t_deliver;
        q.pending.push_back(Delivery { seq: bsm.seq, t_sent: bsm.t_sent, t_deliver, accel: bsm.accel });
    }

    /// Most recent delivered acceleration from `sender` and its age, or
    /// `None` if nothing has arrived yet. Clocks passed for one sender must
    /// be non-decreasing across calls.
    pub fn latest_accel(&mut self, sender: usize, receiver_clock: f64) -> Option<(f64, f64)> {
        let q = self.queue_mut(sender);
        while let Some(front) = q.pending.front() {
            if front.t_deliver <= receiver_clock {
                q.delivered = Some(*front);
                q.pending.pop_front();
            } else {
                break;
            }
        }
        q.delivered.map(|d| (d.accel, receiver_clock - d.t_sent))
    }

    /// Like `latest_accel` but hides messages older than `stale_timeout`.
    pub fn fresh_accel(&mut self, sender: usize, receiver_clock: f64) -> Option<f64> {
        let stale = self.params.stale_timeout;
        self.latest_accel(sender, receiver_clock)
            .filter(|&(_, age)| age <= stale)
            .map(|(a, _)| a)
    }
}
