//! Command-line front end: single runs, ACC/CACC comparison, platoon
//! chains, perception scoring, and target-headway sweeps.
//!
//! Exit codes: 0 success, 1 configuration or I/O error, 2 a run ended in
//! a collision (outputs are still written).

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use platoon_core::controller::ControllerMode;
use platoon_core::engine::{run_scenario, TRAFFIC_ID_BASE};
use platoon_core::error::SimError;
use platoon_core::metrics::MetricsReport;
use platoon_core::perception::{ground_truth_in_lane, Ego, SceneVehicle};
use platoon_core::plot::emit_plots;
use platoon_core::scenario::{parse_scenario, MeasurementMode, ScenarioConfig};
use platoon_core::trace::Trace;

#[derive(Parser)]
#[command(
    name = "platoon-sim",
    version,
    about = "Longitudinal platoon simulator: ACC/CACC followers behind scripted leads"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,

    /// Override the scenario's RNG seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output root; a per-scenario directory is created inside.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Suppress the stdout summary.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one scenario as configured.
    Run { scenario: PathBuf },

    /// Run the same scenario with every follower in ACC then CACC mode,
    /// against the identical lead realization, and overlay the results.
    Compare { scenario: PathBuf },

    /// Replicate the first follower into an n-vehicle chain.
    Platoon {
        scenario: PathBuf,
        /// Number of followers in the chain.
        #[arg(long)]
        n: usize,
    },

    /// Score camera/radar target selection against the ground-truth oracle.
    Perception { scenario: PathBuf },

    /// Re-run the scenario at several target time headways.
    Sweep {
        scenario: PathBuf,
        /// Comma-separated headways in seconds, e.g. 0.6,0.8,1.0.
        #[arg(long = "t-hw", value_delimiter = ',', required = true)]
        t_hw: Vec<f64>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(&cli) {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

/// Returns whether any executed run ended in a collision.
fn dispatch(cli: &Cli) -> Result<bool, SimError> {
    match &cli.cmd {
        Cmd::Run { scenario } => cmd_run(cli, scenario),
        Cmd::Compare { scenario } => cmd_compare(cli, scenario),
        Cmd::Platoon { scenario, n } => cmd_platoon(cli, scenario, *n),
        Cmd::Perception { scenario } => cmd_perception(cli, scenario),
        Cmd::Sweep { scenario, t_hw } => cmd_sweep(cli, scenario, t_hw),
    }
}

fn load(cli: &Cli, path: &Path) -> Result<ScenarioConfig, SimError> {
    let mut cfg = parse_scenario(path)?;
    if let Some(seed) = cli.seed {
        cfg.sim.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output.dir = out.clone();
    }
    Ok(cfg)
}

fn out_dir(cfg: &ScenarioConfig, scenario: &Path, sub: &str) -> Result<PathBuf, SimError> {
    let stem = scenario
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| SimError::config("scenario path has no usable file name"))?;
    let dir = cfg.output.dir.join(stem).join(sub);
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn write_trace(trace: &Trace, path: &Path) -> Result<(), SimError> {
    let w = BufWriter::new(File::create(path)?);
    trace.write_csv(w)
}

fn report(cfg: &ScenarioConfig, trace: &Trace) -> Result<MetricsReport, SimError> {
    MetricsReport::compute(
        trace,
        cfg.metrics.window_start,
        cfg.metrics.norm,
        cfg.metrics.settle_threshold,
    )
}

fn say(cli: &Cli, text: &str) {
    if !cli.quiet {
        println!("{text}");
    }
}

fn cmd_run(cli: &Cli, scenario: &Path) -> Result<bool, SimError> {
    let cfg = load(cli, scenario)?;
    let dir = out_dir(&cfg, scenario, "run")?;
    let trace = run_scenario(&cfg)?;
    write_trace(&trace, &dir.join("trace.csv"))?;
    let rep = report(&cfg, &trace)?;
    std::fs::write(dir.join("metrics.txt"), rep.to_text())?;
    if cfg.output.plots {
        emit_plots(&[("", &trace)], &dir)?;
    }
    say(cli, &format!("wrote {}", dir.display()));
    say(cli, rep.to_text().trim_end());
    Ok(trace.collided)
}

fn with_mode(cfg: &ScenarioConfig, mode: ControllerMode) -> ScenarioConfig {
    let mut out = cfg.clone();
    for f in &mut out.followers {
        f.mode = mode;
    }
    out
}

fn cmd_compare(cli: &Cli, scenario: &Path) -> Result<bool, SimError> {
    let cfg = load(cli, scenario)?;
    let dir = out_dir(&cfg, scenario, "compare")?;
    let acc_trace = run_scenario(&with_mode(&cfg, ControllerMode::Acc))?;
    let cacc_trace = run_scenario(&with_mode(&cfg, ControllerMode::Cacc))?;
    write_trace(&acc_trace, &dir.join("acc.csv"))?;
    write_trace(&cacc_trace, &dir.join("cacc.csv"))?;
    let acc = report(&cfg, &acc_trace)?;
    let cacc = report(&cfg, &cacc_trace)?;
    std::fs::write(dir.join("metrics_acc.txt"), acc.to_text())?;
    std::fs::write(dir.join("metrics_cacc.txt"), cacc.to_text())?;
    std::fs::write(dir.join("compare.txt"), compare_text(&acc, &cacc))?;
    emit_plots(&[("acc", &acc_trace), ("cacc", &cacc_trace)], &dir)?;

    say(cli, &format!("wrote {}", dir.display()));
    say(cli, compare_text(&acc, &cacc).trim_end());
    Ok(acc_trace.collided || cacc_trace.collided)
}

fn compare_text(acc: &MetricsReport, cacc: &MetricsReport) -> String {
    let mut s = String::new();
    let mut row = |key: &str, a: f64, c: f64| {
        s.push_str(&format!("{key}_acc = {a:.6}\n"));
        s.push_str(&format!("{key}_cacc = {c:.6}\n"));
        s.push_str(&format!("{key}_delta = {:.6}\n", c - a));
    };
    row("headway_rmse_s", acc.headway_rmse, cacc.headway_rmse);
    row(
        "max_abs_spacing_error_m",
        acc.max_abs_spacing_error,
        cacc.max_abs_spacing_error,
    );
    row("min_gap_m", acc.min_gap, cacc.min_gap);
    s.push_str(&format!("collided_acc = {}\n", acc.collided));
    s.push_str(&format!("collided_cacc = {}\n", cacc.collided));
    s
}

fn cmd_platoon(cli: &Cli, scenario: &Path, n: usize) -> Result<bool, SimError> {
    let mut cfg = load(cli, scenario)?;
    if n == 0 {
        return Err(SimError::config("--n must be at least 1"));
    }
    let template = cfg.followers[0].clone();
    cfg.followers = vec![template; n];
    let dir = out_dir(&cfg, scenario, "platoon")?;
    let trace = run_scenario(&cfg)?;
    write_trace(&trace, &dir.join("trace.csv"))?;
    let rep = report(&cfg, &trace)?;
    std::fs::write(dir.join("metrics.txt"), rep.to_text())?;
    if cfg.output.plots {
        emit_plots(&[("", &trace)], &dir)?;
    }
    say(cli, &format!("wrote {}", dir.display()));
    say(cli, rep.to_text().trim_end());
    Ok(trace.collided)
}

fn cmd_perception(cli: &Cli, scenario: &Path) -> Result<bool, SimError> {
    let cfg = load(cli, scenario)?;
    let percep = cfg
        .perception
        .clone()
        .ok_or_else(|| SimError::config("scenario has no [perception] section"))?;
    let follower = cfg
        .followers
        .iter()
        .position(|f| f.measurement == MeasurementMode::Perception)
        .ok_or_else(|| SimError::config("no follower uses perception measurement"))?;
    let veh = follower + 1;

    let dir = out_dir(&cfg, scenario, "perception")?;
    let trace = run_scenario(&cfg)?;
    let radar_steps = ((percep.radar_period / cfg.sim.dt).round() as usize).max(1);

    let mut lengths = vec![cfg.lead.length];
    lengths.extend(cfg.followers.iter().map(|f| f.length));

    let mut frames = String::from("t,selected,oracle,agree\n");
    let mut total = 0usize;
    let mut agreed = 0usize;
    for (k, rec) in trace.records.iter().enumerate() {
        if k % radar_steps != 0 {
            continue;
        }
        let ego = Ego { s: rec.vehicles[veh].x, v: rec.vehicles[veh].v };
        let mut scene: Vec<SceneVehicle> = rec
            .vehicles
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != veh)
            .map(|(i, v)| SceneVehicle { id: i, s: v.x, lat: 0.0, v: v.v, length: lengths[i] })
            .collect();
        scene.extend(percep.traffic.iter().enumerate().map(|(i, tr)| SceneVehicle {
            id: TRAFFIC_ID_BASE + i,
            s: tr.s + tr.v * rec.t,
            lat: tr.lat,
            v: tr.v,
            length: tr.length,
        }));
        let oracle = ground_truth_in_lane(&ego, &scene, percep.road.lane_width);
        let selected = rec.vehicles[veh].target;
        let agree = selected == oracle;
        total += 1;
        agreed += agree as usize;
        let fmt_id = |id: Option<usize>| id.map(|i| i.to_string()).unwrap_or_default();
        frames.push_str(&format!(
            "{:.2},{},{},{}\n",
            rec.t,
            fmt_id(selected),
            fmt_id(oracle),
            agree as u8
        ));
    }

    let agreement = agreed as f64 / total as f64;
    let summary = format!("frames = {total}\nagreement = {agreement:.6}\n");
    std::fs::write(dir.join("frames.csv"), frames)?;
    std::fs::write(dir.join("perception.txt"), &summary)?;
    say(cli, &format!("wrote {}", dir.display()));
    say(cli, summary.trim_end());
    Ok(trace.collided)
}

fn cmd_sweep(cli: &Cli, scenario: &Path, t_hw: &[f64]) -> Result<bool, SimError> {
    let cfg = load(cli, scenario)?;
    if let Some(bad) = t_hw.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(SimError::config(format!("sweep headway {bad} must be positive")));
    }
    let dir = out_dir(&cfg, scenario, "sweep")?;

    let mut table = String::from("t_hw_s,headway_rmse_s,max_abs_spacing_error_m,min_gap_m,collided\n");
    let mut any_collision = false;
    for &headway in t_hw {
        let mut point = cfg.clone();
        for f in &mut point.followers {
            f.t_hw = headway;
        }
        let trace = run_scenario(&point)?;
        let rep = report(&point, &trace)?;
        any_collision |= rep.collided;
        table.push_str(&format!(
            "{headway},{:.6},{:.6},{:.6},{}\n",
            rep.headway_rmse, rep.max_abs_spacing_error, rep.min_gap, rep.collided
        ));
    }
    std::fs::write(dir.join("sweep.csv"), &table)?;
    say(cli, &format!("wrote {}", dir.display()));
    say(cli, table.trim_end());
    Ok(any_collision)
}
