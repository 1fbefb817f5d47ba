//! Longitudinal platoon simulation library.
//!
//! Simulates a string of vehicles on a road: a lead vehicle driven by a
//! car-following model or a replayed speed trace, and followers closing a
//! constant-time-headway spacing loop in ACC mode (radar only) or CACC mode
//! (radar plus a feedforward term fed by broadcast V2V messages). Everything
//! is fixed-step and seeded, so a run is reproducible byte for byte.

pub mod channel;
pub mod controller;
pub mod engine;
pub mod error;
pub mod idm;
pub mod metrics;
pub mod perception;
pub mod plant;
pub mod plot;
pub mod road;
pub mod scenario;
pub mod trace;

pub use error::SimError;
