//! Simulation trace records and their CSV form.
//!
//! One record per control step, one column group per vehicle. Fields that do
//! not apply (the lead has no gap; headway is undefined near standstill) are
//! written as empty CSV cells. Numeric cells use fixed 6-decimal formatting
//! and lines end with a bare LF so identical runs produce identical bytes.

use crate::error::SimError;
use std::io::{BufRead, Write};

/// Per-vehicle signals at one time step.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VehicleRecord {
    /// Front-bumper position along the road, m.
    pub x: f64,
    /// Speed, m/s.
    pub v: f64,
    /// Acceleration applied over the step ending at this sample, m/s^2.
    pub a: f64,
    /// Commanded (desired) acceleration, m/s^2.
    pub a_des: f64,
    /// True clearance to the vehicle ahead, m.
    pub gap: Option<f64>,
    /// Time headway, s; absent near standstill.
    pub h: Option<f64>,
    /// Spacing error, m.
    pub e: Option<f64>,
    /// Feedforward acceleration added to the command, m/s^2.
    pub ff: Option<f64>,
    /// Id of the selected target vehicle.
    pub target: Option<usize>,
    /// Age of the newest received broadcast, s.
    pub bsm_age: Option<f64>,
}

/// One simulation step across all vehicles.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub t: f64,
    pub vehicles: Vec<VehicleRecord>,
}

/// A complete run: vehicle 0 is the lead, the rest follow in order.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    /// Step size, s.
    pub dt: f64,
    pub records: Vec<TraceRecord>,
    /// True when the run ended in a collision (some follower gap <= 0).
    pub collided: bool,
    /// Spacing-policy headway target per follower (vehicles 1..), s.
    pub headway_targets: Vec<f64>,
}

const FIELDS: [&str; 10] =
    ["x_m", "v_mps", "a_mps2", "ades_mps2", "gap_m", "h_s", "e_m", "ff_mps2", "target", "bsmage_s"];

fn opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |v| format!("{v:.6}"))
}

impl Trace {
    pub fn n_vehicles(&self) -> usize {
        self.records.first().map_or(0, |r| r.vehicles.len())
    }

    /// CSV header for `n` vehicles.
    pub fn csv_header(n: usize) -> String {
        let mut cols = vec!["t_s".to_string()];
        for i in 0..n {
            for f in FIELDS {
                cols.push(format!("veh{i}_{f}"));
            }
        }
        cols.join(",")
    }

    /// Write the whole trace as CSV.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<(), SimError> {
        if self.records.is_empty() {
            return Err(SimError::Empty("trace has no records to write".into()));
        }
        let n = self.n_vehicles();
        writeln!(w, "{}", Self::csv_header(n))?;
        for rec in &self.records {
            let mut line = format!("{:.6}", rec.t);
            for veh in &rec.vehicles {
                line.push_str(&format!(
                    ",{:.6},{:.6},{:.6},{:.6},{},{},{},{},{},{}",
                    veh.x,
                    veh.v,
                    veh.a,
                    veh.a_des,
                    opt(veh.gap),
                    opt(veh.h),
                    opt(veh.e),
                    opt(veh.ff),
                    veh.target.map_or(String::new(), |t| t.to_string()),
                    opt(veh.bsm_age),
                ));
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    /// Read a trace back from CSV. The collision flag and headway targets are
    /// not part of the file format and come back empty.
    pub fn read_csv<R: BufRead>(r: R) -> Result<Trace, SimError> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| SimError::Empty("trace csv is empty".into()))??;
        let cols = header.split(',').count();
        if cols < 1 + FIELDS.len() || (cols - 1) % FIELDS.len() != 0 {
            return Err(SimError::config(format!("trace csv: unexpected column count {cols}")));
        }
        let n = (cols - 1) / FIELDS.len();
        if header != Self::csv_header(n) {
            return Err(SimError::config("trace csv: header does not match schema"));
        }
        let mut records = Vec::new();
        for (idx, line) in lines.enumerate() {
            let line = line?;
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != cols {
                return Err(SimError::config(format!(
                    "trace csv line {}: expected {cols} fields, got {}",
                    idx + 2,
                    fields.len()
                )));
            }
            let num = |s: &str| -> Result<f64, SimError> {
                s.parse::<f64>().map_err(|_| {
                    SimError::config(format!("trace csv line {}: bad number `{s}`", idx + 2))
                })
            };
            let onum = |s: &str| -> Result<Option<f64>, SimError> {
                if s.is_empty() { Ok(None) } else { num(s).map(Some) }
            };
            let t = num(fields[0])?;
            let mut vehicles = Vec::with_capacity(n);
            for i in 0..n {
                let f = &fields[1 + i * FIELDS.len()..1 + (i + 1) * FIELDS.len()];
                vehicles.push(VehicleRecord {
                    x: num(f[0])?,
                    v: num(f[1])?,
                    a: num(f[2])?,
                    a_des: num(f[3])?,
                    gap: onum(f[4])?,
                    h: onum(f[5])?,
                    e: onum(f[6])?,
                    ff: onum(f[7])?,
                    target: if f[8].is_empty() {
                        None
                    } else {
                        Some(f[8].parse::<usize>().map_err(|_| {
                            SimError::config(format!(
                                "trace csv line {}: bad target `{}`",
                                idx + 2,
                                f[8]
                            ))
                        })?)
                    },
                    bsm_age: onum(f[9])?,
                });
            }
            records.push(TraceRecord { t, vehicles });
        }
        if records.is_empty() {
            return Err(SimError::Empty("trace csv has no data rows".into()));
        }
        let dt = if records.len() > 1 { records[1].t - records[0].t } else { 0.0 };
        Ok(Trace { dt, records, collided: false, headway_targets: Vec::new() })
    }
}
