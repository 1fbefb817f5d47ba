//! Static SVG charts for simulation traces.
//!
//! Three panels mirror the usual presentation of a platoon run: speed,
//! time headway, and gap, each against time. Rendering is plain string
//! assembly with fixed formatting, so identical traces produce identical
//! bytes.

use std::path::{Path, PathBuf};

use crate::error::SimError;
use crate::trace::Trace;

const WIDTH: f64 = 860.0;
const HEIGHT: f64 = 480.0;
const MARGIN_L: f64 = 64.0;
const MARGIN_R: f64 = 16.0;
const MARGIN_T: f64 = 28.0;
const MARGIN_B: f64 = 46.0;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

/// One named curve, possibly broken into segments where the quantity
/// is undefined (headway near standstill, for example).
#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub segments: Vec<Vec<(f64, f64)>>,
    /// Dashed reference lines and similar.
    pub dashed: bool,
}

impl Series {
    pub fn continuous(label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Series { label: label.into(), segments: vec![points], dashed: false }
    }

    fn points(&self) -> impl Iterator<Item = &(f64, f64)> {
        self.segments.iter().flatten()
    }
}

fn nice_step(range: f64, target_ticks: f64) -> f64 {
    let raw = range / target_ticks;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let mult = if norm <= 1.0 {
        1.0
    } else if norm <= 2.0 {
        2.0
    } else if norm <= 2.5 {
        2.5
    } else if norm <= 5.0 {
        5.0
    } else {
        10.0
    };
    mult * mag
}

fn step_decimals(step: f64) -> usize {
    if step >= 1.0 {
        0
    } else if step >= 0.1 {
        1
    } else if step >= 0.01 {
        2
    } else {
        3
    }
}

fn fmt(x: f64, dp: usize) -> String {
    let s = format!("{x:.dp$}");
    // "-0" and "-0.0" read worse than "0".
    if s.trim_start_matches('-').chars().all(|c| c == '0' || c == '.') {
        s.trim_start_matches('-').to_string()
    } else {
        s
    }
}

fn px(x: f64) -> String {
    format!("{x:.2}")
}

struct Axis {
    min: f64,
    max: f64,
    step: f64,
}

fn axis_for(values: impl Iterator<Item = f64>) -> Axis {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in values {
        if v.is_finite() {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    if !lo.is_finite() {
        lo = 0.0;
        hi = 1.0;
    }
    if hi - lo < 1e-9 {
        lo -= 1.0;
        hi += 1.0;
    }
    let step = nice_step(hi - lo, 6.0);
    let min = (lo / step).floor() * step;
    let max = (hi / step).ceil() * step;
    Axis { min, max, step }
}

impl Axis {
    fn ticks(&self) -> Vec<f64> {
        let n = ((self.max - self.min) / self.step).round() as usize;
        (0..=n).map(|i| self.min + i as f64 * self.step).collect()
    }
}

/// Render one chart as a self-contained SVG document.
///
/// Fails when no series carries a finite point.
pub fn render_chart(
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[Series],
) -> Result<String, SimError> {
    let any_point = series.iter().any(|s| s.points().any(|p| p.0.is_finite() && p.1.is_finite()));
    if !any_point {
        return Err(SimError::Empty(format!("chart '{title}' has no data")));
    }

    let xa = axis_for(series.iter().flat_map(|s| s.points().map(|p| p.0)));
    let ya = axis_for(series.iter().flat_map(|s| s.points().map(|p| p.1)));

    let x0 = MARGIN_L;
    let y0 = MARGIN_T;
    let pw = WIDTH - MARGIN_L - MARGIN_R;
    let ph = HEIGHT - MARGIN_T - MARGIN_B;
    let sx = |v: f64| x0 + (v - xa.min) / (xa.max - xa.min) * pw;
    let sy = |v: f64| y0 + ph - (v - ya.min) / (ya.max - ya.min) * ph;

    let mut out = String::with_capacity(16 * 1024);
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"monospace\" font-size=\"12\">\n"
    ));
    out.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");

    let xdp = step_decimals(xa.step);
    for t in xa.ticks() {
        let x = px(sx(t));
        out.push_str(&format!(
            "<line x1=\"{x}\" y1=\"{}\" x2=\"{x}\" y2=\"{}\" stroke=\"#e0e0e0\"/>\n",
            px(y0),
            px(y0 + ph)
        ));
        out.push_str(&format!(
            "<text x=\"{x}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
            px(y0 + ph + 18.0),
            fmt(t, xdp)
        ));
    }
    let ydp = step_decimals(ya.step);
    for t in ya.ticks() {
        let y = px(sy(t));
        out.push_str(&format!(
            "<line x1=\"{}\" y1=\"{y}\" x2=\"{}\" y2=\"{y}\" stroke=\"#e0e0e0\"/>\n",
            px(x0),
            px(x0 + pw)
        ));
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n",
            px(x0 - 6.0),
            px(sy(t) + 4.0),
            fmt(t, ydp)
        ));
    }

    out.push_str(&format!(
        "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#333\"/>\n",
        px(x0),
        px(y0),
        px(pw),
        px(ph)
    ));
    out.push_str(&format!(
        "<text x=\"{}\" y=\"18\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n",
        px(x0 + pw / 2.0),
        title
    ));
    out.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
        px(x0 + pw / 2.0),
        px(HEIGHT - 10.0),
        x_label
    ));
    out.push_str(&format!(
        "<text x=\"16\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">{}</text>\n",
        px(y0 + ph / 2.0),
        px(y0 + ph / 2.0),
        y_label
    ));

    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let dash = if s.dashed { " stroke-dasharray=\"6 4\"" } else { "" };
        for seg in &s.segments {
            let finite: Vec<&(f64, f64)> =
                seg.iter().filter(|p| p.0.is_finite() && p.1.is_finite()).collect();
            if finite.len() < 2 {
                continue;
            }
            let pts: Vec<String> =
                finite.iter().map(|p| format!("{},{}", px(sx(p.0)), px(sy(p.1)))).collect();
            out.push_str(&format!(
                "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.3\"{dash} points=\"{}\"/>\n",
                pts.join(" ")
            ));
        }
    }

    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let y = y0 + 14.0 + i as f64 * 16.0;
        out.push_str(&format!(
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{color}\" stroke-width=\"2\"/>\n",
            px(x0 + 8.0),
            px(y - 4.0),
            px(x0 + 26.0),
            px(y - 4.0)
        ));
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\">{}</text>\n",
            px(x0 + 32.0),
            px(y),
            s.label
        ));
    }

    out.push_str("</svg>\n");
    Ok(out)
}

fn prefix(label: &str) -> String {
    if label.is_empty() {
        String::new()
    } else {
        format!("{label} ")
    }
}

fn speed_series(runs: &[(&str, &Trace)]) -> Vec<Series> {
    let mut out = Vec::new();
    for (label, trace) in runs {
        for i in 0..trace.n_vehicles() {
            let name = if i == 0 {
                format!("{}lead", prefix(label))
            } else {
                format!("{}follower {i}", prefix(label))
            };
            let pts = trace.records.iter().map(|r| (r.t, r.vehicles[i].v)).collect();
            out.push(Series::continuous(name, pts));
        }
    }
    out
}

fn optional_series(
    runs: &[(&str, &Trace)],
    what: &str,
    get: impl Fn(&crate::trace::VehicleRecord) -> Option<f64>,
) -> Vec<Series> {
    let mut out = Vec::new();
    for (label, trace) in runs {
        for i in 1..trace.n_vehicles() {
            let mut segments = Vec::new();
            let mut cur: Vec<(f64, f64)> = Vec::new();
            for r in &trace.records {
                match get(&r.vehicles[i]) {
                    Some(v) => cur.push((r.t, v)),
                    None => {
                        if !cur.is_empty() {
                            segments.push(std::mem::take(&mut cur));
                        }
                    }
                }
            }
            if !cur.is_empty() {
                segments.push(cur);
            }
            out.push(Series {
                label: format!("{}{} {}", prefix(label), what, i),
                segments,
                dashed: false,
            });
        }
    }
    out
}

/// Write `speed.svg`, `headway.svg`, and `gap.svg` for one or more runs.
///
/// Passing several labeled runs overlays them, which is how an ACC/CACC
/// comparison is drawn. Returns the written paths.
pub fn emit_plots(runs: &[(&str, &Trace)], dir: &Path) -> Result<Vec<PathBuf>, SimError> {
    if runs.is_empty() {
        return Err(SimError::Empty("no traces to plot".into()));
    }
    for (label, trace) in runs {
        if trace.records.is_empty() {
            return Err(SimError::Empty(format!("trace '{label}' has no records")));
        }
    }

    let mut headway = optional_series(runs, "headway", |v| v.h);
    let mut targets: Vec<f64> = runs
        .iter()
        .flat_map(|(_, t)| t.headway_targets.iter().copied())
        .collect();
    targets.sort_by(f64::total_cmp);
    targets.dedup();
    let t_end = runs
        .iter()
        .filter_map(|(_, t)| t.records.last().map(|r| r.t))
        .fold(0.0f64, f64::max);
    for target in targets {
        headway.push(Series {
            label: format!("target {}", fmt(target, 2)),
            segments: vec![vec![(0.0, target), (t_end, target)]],
            dashed: true,
        });
    }

    let charts = [
        ("speed.svg", render_chart("speed", "time (s)", "speed (m/s)", &speed_series(runs))?),
        ("headway.svg", render_chart("time headway", "time (s)", "headway (s)", &headway)?),
        (
            "gap.svg",
            render_chart(
                "gap to predecessor",
                "time (s)",
                "gap (m)",
                &optional_series(runs, "gap", |v| v.gap),
            )?,
        ),
    ];

    std::fs::create_dir_all(dir)?;
    let mut paths = Vec::new();
    for (name, svg) in charts {
        let path = dir.join(name);
        std::fs::write(&path, svg)?;
        paths.push(path);
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ChannelParams;
    use crate::controller::ControllerMode;
    use crate::engine::run_scenario;
    use crate::idm::SetSpeedEntry;
    use crate::scenario::{FollowerConfig, LeadConfig, ScenarioConfig, SimConfig};

    fn short_run(mode: ControllerMode) -> Trace {
        let cfg = ScenarioConfig {
            sim: SimConfig { dt: 0.01, duration: 8.0, seed: 7 },
            lead: LeadConfig {
                v_init: 0.0,
                set_speed: vec![SetSpeedEntry { t: 4.0, v: 0.0 }],
                ..Default::default()
            },
            followers: vec![FollowerConfig { mode, ..Default::default() }],
            channel: Some(ChannelParams::default()),
            ..Default::default()
        };
        run_scenario(&cfg).unwrap()
    }

    #[test]
    fn chart_needs_data() {
        let s = [Series::continuous("x", vec![])];
        assert!(render_chart("t", "x", "y", &s).is_err());
    }

    #[test]
    fn chart_contains_axis_labels_and_series() {
        let s = [Series::continuous("speed", vec![(0.0, 1.0), (1.0, 2.0), (2.0, 1.5)])];
        let svg = render_chart("demo", "time (s)", "speed (m/s)", &s).unwrap();
        assert!(svg.contains("time (s)"));
        assert!(svg.contains("speed (m/s)"));
        assert!(svg.contains("<polyline"));
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn identical_traces_render_identical_bytes() {
        let a = short_run(ControllerMode::Acc);
        let b = short_run(ControllerMode::Acc);
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        emit_plots(&[("acc", &a)], dir_a.path()).unwrap();
        emit_plots(&[("acc", &b)], dir_b.path()).unwrap();
        for name in ["speed.svg", "headway.svg", "gap.svg"] {
            let bytes_a = std::fs::read(dir_a.path().join(name)).unwrap();
            let bytes_b = std::fs::read(dir_b.path().join(name)).unwrap();
            assert_eq!(bytes_a, bytes_b, "{name} differs between identical runs");
        }
    }

    #[test]
    fn overlay_writes_all_panels() {
        let acc = short_run(ControllerMode::Acc);
        let cacc = short_run(ControllerMode::Cacc);
        let dir = tempfile::tempdir().unwrap();
        let paths = emit_plots(&[("acc", &acc), ("cacc", &cacc)], dir.path()).unwrap();
        assert_eq!(paths.len(), 3);
        let headway = std::fs::read_to_string(dir.path().join("headway.svg")).unwrap();
        assert!(headway.contains("acc headway 1"));
        assert!(headway.contains("cacc headway 1"));
        assert!(headway.contains("target 1"));
    }

    #[test]
    fn undefined_headway_splits_the_polyline() {
        // The run ends in a stop, so headway goes undefined and back in
        // the next launch would split. Build a trace by hand instead.
        let mut trace = short_run(ControllerMode::Acc);
        let n = trace.records.len();
        for r in trace.records.iter_mut().skip(n / 2).take(50) {
            r.vehicles[1].h = None;
        }
        let series = optional_series(&[("", &trace)], "headway", |v| v.h);
        assert!(series[0].segments.len() >= 2);
    }

    #[test]
    fn empty_trace_is_an_error() {
        let mut trace = short_run(ControllerMode::Acc);
        trace.records.clear();
        let dir = tempfile::tempdir().unwrap();
        assert!(emit_plots(&[("x", &trace)], dir.path()).is_err());
    }
}
