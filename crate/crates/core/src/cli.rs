//! The `simulate` command: resolve a scenario, run the fluid model and the
//! requested oracles, write CSV traces and a JSON report.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, ValueEnum};
use serde::Serialize;
use thiserror::Error;

use crate::engine::{equilibrium_problem, simulate, Run, SimConfig, SimError, StaticLink};
use crate::oracle::equilibrium::{equilibrium_queue, EquilibriumError};
use crate::oracle::packet::{packet_sim, PacketConfig, PacketError, PacketRun};
use crate::protocol::Protocol;
use crate::scenario::{load_scenario, preset, preset_text, CrossProfile, InitMode, Scenario, ScenarioError};

pub const CONSERVATION_LIMIT: f64 = 2.0;
pub const IDENTITY_LIMIT: f64 = 1e-6;
pub const STATIC_LINK_LIMIT: f64 = 2.0;
/// Fraction of the bottleneck capacity.
pub const ACK_LIMIT: f64 = 0.01;
pub const QUEUE_RMS_LIMIT: f64 = 0.05;
pub const PERIOD_COUNT_LIMIT: f64 = 1.0;
pub const SILENCE_LIMIT: f64 = 0.05;
pub const EQUILIBRIUM_LIMIT: f64 = 0.01;
/// Sample step of the packet oracle and of `counts.csv`.
pub const COARSE_DT: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Default)]
pub enum OracleMode {
    #[default]
    None,
    Packet,
    Equilibrium,
    Both,
}

impl OracleMode {
    fn packet(self) -> bool {
        matches!(self, OracleMode::Packet | OracleMode::Both)
    }

    fn equilibrium(self) -> bool {
        matches!(self, OracleMode::Equilibrium | OracleMode::Both)
    }
}

#[derive(Debug, Clone, Parser)]
#[command(name = "simulate", version, about = "Fluid-flow simulation of window-based congestion control")]
pub struct Args {
    /// Scenario file (TOML) or preset name.
    pub scenario: String,
    /// Integration step, seconds.
    #[arg(long)]
    pub dt: Option<f64>,
    /// Simulated time, seconds.
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Reference models to run alongside the fluid model.
    #[arg(long, value_enum, default_value_t = OracleMode::None)]
    pub oracle: OracleMode,
    /// Output directory [default: out/NAME, NAME being the scenario name].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Start from an empty network or from the equilibrium of the initial windows.
    #[arg(long)]
    pub init: Option<InitMode>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("`{0}` is neither a preset nor a readable scenario file")]
    NotFound(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("packet oracle: {0}")]
    Packet(#[from] PacketError),
    #[error("equilibrium oracle: {0}")]
    Equilibrium(#[from] EquilibriumError),
    #[error("writing {path}: {message}")]
    Output { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    NotApplicable,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub limit: Option<f64>,
    #[serde(skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

impl Check {
    fn bound(name: &str, value: f64, limit: f64, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            status: if value <= limit { Status::Pass } else { Status::Fail },
            value: Some(value),
            limit: Some(limit),
            detail: detail.into(),
        }
    }

    fn not_applicable(name: &str, reason: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            status: Status::NotApplicable,
            value: None,
            limit: None,
            detail: reason.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UserSummary {
    pub name: String,
    pub final_window: f64,
    pub min_ack_buffer: f64,
    pub final_ack_buffer: f64,
    pub send_resumes: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Runtime {
    pub fluid_s: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub packet_s: Option<f64>,
    pub total_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub scenario: String,
    pub dt: f64,
    pub horizon: f64,
    pub init: InitMode,
    pub steps: usize,
    pub files: BTreeMap<String, String>,
    pub checks: Vec<Check>,
    pub metrics: BTreeMap<String, f64>,
    pub users: Vec<UserSummary>,
    pub runtime: Runtime,
}

impl RunReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != Status::Fail)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Preset name or path to a scenario file.
pub fn resolve(spec: &str) -> Result<Scenario, CliError> {
    if preset_text(spec).is_some() {
        return Ok(preset(spec)?);
    }
    let path = Path::new(spec);
    if path.is_file() {
        return Ok(load_scenario(path)?);
    }
    Err(CliError::NotFound(spec.to_string()))
}

/// Runs the command and returns its exit status.
pub fn main_with(args: Args) -> i32 {
    match run(&args) {
        Ok(report) => {
            print_summary(&report);
            if report.passed() {
                0
            } else {
                1
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn print_summary(report: &RunReport) {
    println!(
        "{}: {} steps of {} s in {:.2} s",
        report.scenario, report.steps, report.dt, report.runtime.total_s
    );
    for c in &report.checks {
        let status = match c.status {
            Status::Pass => "pass",
            Status::Fail => "FAIL",
            Status::NotApplicable => "n/a",
        };
        match (c.value, c.limit) {
            (Some(v), Some(l)) => println!("  {status:4} {} = {v:.3e} (limit {l:e})", c.name),
            _ => println!("  {status:4} {} ({})", c.name, c.detail),
        }
    }
    for (name, path) in &report.files {
        println!("  wrote {name}: {path}");
    }
}

pub fn run(args: &Args) -> Result<RunReport, CliError> {
    let clock = Instant::now();
    let mut scenario = resolve(&args.scenario)?;
    if let Some(dt) = args.dt {
        scenario.run.dt = dt;
    }
    if let Some(h) = args.horizon {
        scenario.run.horizon = h;
    }
    if let Some(init) = args.init {
        scenario.run.init = init;
    }
    let config = SimConfig::from_scenario(&scenario);
    let fluid = simulate(&scenario, &config)?;

    let packet = if args.oracle.packet() && !has_fast(&scenario) {
        let t = Instant::now();
        let cfg = PacketConfig {
            horizon: fluid.horizon(),
            sample_dt: COARSE_DT,
            init: config.init,
            log_events: true,
        };
        Some((packet_sim(&scenario, &cfg)?, t.elapsed().as_secs_f64()))
    } else {
        None
    };

    let out = args
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("out").join(&scenario.name));
    fs::create_dir_all(&out).map_err(|e| output_err(&out, e))?;

    let mut files = BTreeMap::new();
    let traces_path = out.join("traces.csv");
    write_traces(&fluid, &traces_path)?;
    files.insert("traces".to_string(), traces_path.display().to_string());
    let counts_path = out.join("counts.csv");
    write_counts(&fluid, packet.as_ref().map(|p| &p.0), &counts_path)?;
    files.insert("counts".to_string(), counts_path.display().to_string());
    if let Some((p, _)) = &packet {
        let path = out.join("packet.csv");
        write_packet(&fluid, p, &path)?;
        files.insert("packet".to_string(), path.display().to_string());
    }

    let mut metrics = BTreeMap::new();
    let mut checks = fluid_checks(&fluid, &mut metrics);
    if args.oracle.packet() {
        match &packet {
            Some((p, _)) => checks.extend(packet_checks(&fluid, p, &mut metrics)),
            None => checks.push(Check::not_applicable(
                "packet_oracle",
                "the packet oracle replays window schedules only (FAST user present)",
            )),
        }
    }
    if args.oracle.equilibrium() {
        checks.extend(equilibrium_checks(&fluid, &mut metrics));
    }

    let users = fluid
        .users()
        .iter()
        .zip(fluid.network().users())
        .map(|(u, node)| UserSummary {
            name: node.name.clone(),
            final_window: u.w(),
            min_ack_buffer: u.buffer_trace().iter().map(|(_, p)| p).fold(0.0, f64::min),
            final_ack_buffer: u.pi(),
            send_resumes: u.resumes().to_vec(),
        })
        .collect();

    let report = RunReport {
        scenario: scenario.name.clone(),
        dt: config.dt,
        horizon: fluid.horizon(),
        init: config.init,
        steps: fluid.steps(),
        files,
        checks,
        metrics,
        users,
        runtime: Runtime {
            fluid_s: fluid.elapsed().as_secs_f64(),
            packet_s: packet.as_ref().map(|p| p.1),
            total_s: clock.elapsed().as_secs_f64(),
        },
    };
    let report_path = out.join("report.json");
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    fs::write(&report_path, json + "\n").map_err(|e| output_err(&report_path, e))?;
    let mut report = report;
    report
        .files
        .insert("report".to_string(), report_path.display().to_string());
    Ok(report)
}

fn has_fast(s: &Scenario) -> bool {
    s.users.iter().any(|u| matches!(u.protocol, Protocol::Fast { .. }))
}

fn output_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Output {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>, CliError> {
    let file = File::create(path).map_err(|e| output_err(path, e))?;
    Ok(csv::Writer::from_writer(BufWriter::new(file)))
}

fn fmt(v: f64) -> String {
    format!("{v}")
}

/// One row per engine grid time, one column per signal.
pub fn write_traces(run: &Run, path: &Path) -> Result<(), CliError> {
    let traces = run.traces();
    let mut w = csv_writer(path)?;
    let err = |e: csv::Error| output_err(path, e);
    let mut header = vec!["time [s]".to_string()];
    header.extend(traces.signals.iter().map(|s| format!("{} [{}]", s.name, s.unit)));
    w.write_record(&header).map_err(err)?;
    let mut row = Vec::with_capacity(header.len());
    for &t in &traces.times {
        row.clear();
        row.push(fmt(t));
        for s in &traces.signals {
            row.push(fmt(s.at(t).unwrap_or(f64::NAN)));
        }
        w.write_record(&row).map_err(err)?;
    }
    w.flush().map_err(|e| output_err(path, e))?;
    Ok(())
}

fn flow_names(run: &Run) -> Vec<Vec<String>> {
    let net = run.network();
    net.queues()
        .iter()
        .map(|q| {
            q.flows
                .iter()
                .map(|f| match *f {
                    crate::topology::FlowRef::User(i) => net.users()[i].name.clone(),
                    crate::topology::FlowRef::Cross(k) => net.cross()[k].name.clone(),
                })
                .collect()
        })
        .collect()
}

/// Per-queue, per-flow cumulative input and output counts every
/// [`COARSE_DT`], with the packet oracle's counts when it ran.
pub fn write_counts(run: &Run, packet: Option<&PacketRun>, path: &Path) -> Result<(), CliError> {
    let names = flow_names(run);
    let mut w = csv_writer(path)?;
    let err = |e: csv::Error| output_err(path, e);
    let mut header = vec!["time [s]".to_string()];
    for (j, q) in run.network().queues().iter().enumerate() {
        for who in &names[j] {
            header.push(format!("in:{}:{who} [pkt]", q.name));
            header.push(format!("out:{}:{who} [pkt]", q.name));
        }
    }
    if packet.is_some() {
        for (j, q) in run.network().queues().iter().enumerate() {
            for who in &names[j] {
                header.push(format!("packet_in:{}:{who} [pkt]", q.name));
                header.push(format!("packet_out:{}:{who} [pkt]", q.name));
            }
        }
    }
    w.write_record(&header).map_err(err)?;
    let rows = (run.horizon() / COARSE_DT).round() as usize;
    for k in 0..=rows {
        let t = (k as f64 * COARSE_DT).min(run.horizon());
        let mut row = vec![fmt(t)];
        for q in run.queues() {
            for l in 0..q.flows() {
                row.push(fmt(q.arrivals(l).count_at(t).unwrap_or(f64::NAN)));
                row.push(fmt(q.departures(l).count_at(t).unwrap_or(f64::NAN)));
            }
        }
        if let Some(p) = packet {
            for j in 0..p.arrivals.len() {
                for l in 0..p.arrivals[j].len() {
                    let idx = k.min(p.times.len() - 1);
                    row.push(fmt(p.arrivals[j][l][idx]));
                    row.push(fmt(p.departures[j][l][idx]));
                }
            }
        }
        w.write_record(&row).map_err(err)?;
    }
    w.flush().map_err(|e| output_err(path, e))?;
    Ok(())
}

/// Packet oracle samples: queue lengths, windows and flight sizes.
pub fn write_packet(run: &Run, packet: &PacketRun, path: &Path) -> Result<(), CliError> {
    let net = run.network();
    let mut w = csv_writer(path)?;
    let err = |e: csv::Error| output_err(path, e);
    let mut header = vec!["time [s]".to_string()];
    header.extend(net.queues().iter().map(|q| format!("q:{} [pkt]", q.name)));
    for u in net.users() {
        header.push(format!("w:{} [pkt]", u.name));
        header.push(format!("flight:{} [pkt]", u.name));
    }
    w.write_record(&header).map_err(err)?;
    for (k, &t) in packet.times.iter().enumerate() {
        let mut row = vec![fmt(t)];
        row.extend(packet.queue_len.iter().map(|q| fmt(q[k])));
        for i in 0..net.users().len() {
            row.push(fmt(packet.window[i][k]));
            row.push(fmt(packet.flight[i][k]));
        }
        w.write_record(&row).map_err(err)?;
    }
    w.flush().map_err(|e| output_err(path, e))?;
    Ok(())
}

/// Checks that need only the fluid run.
pub fn fluid_checks(run: &Run, metrics: &mut BTreeMap<String, f64>) -> Vec<Check> {
    let mut checks = Vec::new();
    let cons = run.conservation();
    metrics.insert("conservation.user_gap_pkt".into(), cons.user_gap);
    metrics.insert("conservation.queue_gap_pkt".into(), cons.queue_gap);
    metrics.insert("conservation.min_in_queue_pkt".into(), cons.min_in_queue);
    if run.users().is_empty() {
        checks.push(Check::not_applicable("conservation_users", "no users"));
    } else {
        checks.push(Check::bound(
            "conservation_users",
            cons.user_gap,
            CONSERVATION_LIMIT,
            "max |sent - flight - acked|, packets",
        ));
    }
    checks.push(Check::bound(
        "conservation_queues",
        cons.queue_gap.max(-cons.min_in_queue),
        CONSERVATION_LIMIT,
        "max |sum of per-flow content - q| and negative per-flow content, packets",
    ));

    let ids = run.operator_identities();
    metrics.insert("identity.g_of_f_s".into(), ids.g_of_f);
    metrics.insert("identity.fixed_point_s".into(), ids.fixed_point);
    metrics.insert("identity.fifo_s".into(), ids.fifo);
    metrics.insert("identity.points".into(), ids.points as f64);
    if ids.points == 0 {
        checks.push(Check::not_applicable("operator_identities", "queues never congested"));
    } else {
        checks.push(Check::bound(
            "operator_identities",
            ids.g_of_f.max(ids.fixed_point),
            IDENTITY_LIMIT,
            "max |g(f(t)) - t| and |g(t) + tau(g(t)) - t| on congested points, seconds",
        ));
    }

    let mut ack_worst: Option<f64> = None;
    for (i, c) in run.network().circuits().iter().enumerate() {
        let name = &run.network().users()[i].name;
        let capacity = c
            .queues
            .iter()
            .map(|&j| run.network().queues()[j].capacity)
            .fold(f64::INFINITY, f64::min);
        let rel = run.ack_identity(i) / capacity;
        metrics.insert(format!("ack_identity.{name}"), rel);
        if c.queues.len() == 1 {
            ack_worst = Some(ack_worst.unwrap_or(0.0).max(rel));
        }
    }
    match ack_worst {
        Some(v) => checks.push(Check::bound(
            "ack_identity",
            v,
            ACK_LIMIT,
            "max cell residual of the ACK flow over single-queue circuits, fraction of capacity",
        )),
        None => checks.push(Check::not_applicable(
            "ack_identity",
            "no single-queue circuits; multi-queue residuals are listed in metrics",
        )),
    }

    match run.static_link_check() {
        StaticLink::Deviation { packets, at } => {
            metrics.insert("static_link.max_dev_pkt".into(), packets);
            checks.push(Check::bound(
                "static_link",
                packets,
                STATIC_LINK_LIMIT,
                format!("largest deviation at t = {at}"),
            ));
        }
        StaticLink::NotApplicable(reason) => checks.push(Check::not_applicable("static_link", reason)),
    }

    for (j, q) in run.queues().iter().enumerate() {
        let name = &run.network().queues()[j].name;
        metrics.insert(format!("final_tau.{name}"), q.tau());
    }
    checks
}

/// Mean squared difference between the fluid queue and the packet queue on
/// the packet sample grid.
pub fn queue_rms(run: &Run, packet: &PacketRun, queue: usize, t0: f64, t1: f64) -> f64 {
    let q = run.queues()[queue].queue_trace();
    let (mut sum, mut n) = (0.0, 0usize);
    for (k, &t) in packet.times.iter().enumerate() {
        if t < t0 - 1e-12 || t > t1 + 1e-12 {
            continue;
        }
        let d = q.eval(t).unwrap_or(f64::NAN) - packet.queue_len[queue][k];
        sum += d * d;
        n += 1;
    }
    (sum / n.max(1) as f64).sqrt()
}

/// Fluid silence following the first window decrease of `user`: from the
/// first cell without sending to the resume time.
pub fn fluid_silence(run: &Run, user: usize) -> Option<(f64, f64)> {
    let u = &run.users()[user];
    let resume = *u.resumes().first()?;
    let dt = run.config().dt;
    let mut start = None;
    for (t, v) in u.sending_trace().iter() {
        // The cell holding the resume sends its remainder.
        if t + dt > resume {
            break;
        }
        if v > 0.0 {
            start = None;
        } else if start.is_none() {
            start = Some(t);
        }
    }
    start.map(|s| (s, resume))
}

fn window_drop(scenario: &Scenario, user: usize) -> Option<f64> {
    match &scenario.users[user].protocol {
        Protocol::Schedule(s) => {
            let mut prev = s.initial();
            for &(t, w) in s.steps() {
                if w < prev {
                    return Some(t);
                }
                prev = w;
            }
            None
        }
        Protocol::Fast { .. } => None,
    }
}

/// Comparisons against the packet oracle.
pub fn packet_checks(run: &Run, packet: &PacketRun, metrics: &mut BTreeMap<String, f64>) -> Vec<Check> {
    let mut checks = Vec::new();
    let scenario = run.scenario();
    let h = run.horizon();
    let end_eq = equilibrium_queue(&equilibrium_problem(scenario, run.network(), h)).ok();

    let mut worst: f64 = 0.0;
    for (j, info) in run.network().queues().iter().enumerate() {
        let rms = queue_rms(run, packet, j, 0.0, h);
        let norm = end_eq
            .as_ref()
            .map(|e| e.q[j])
            .filter(|&q| q > 1.0)
            .unwrap_or_else(|| {
                let n = packet.queue_len[j].len().max(1) as f64;
                (packet.queue_len[j].iter().sum::<f64>() / n).max(1.0)
            });
        metrics.insert(format!("packet.queue_rms_pkt.{}", info.name), rms);
        metrics.insert(format!("packet.queue_rms_rel.{}", info.name), rms / norm);
        worst = worst.max(rms / norm);
    }
    checks.push(Check::bound(
        "packet_queue_rms",
        worst,
        QUEUE_RMS_LIMIT,
        "RMS of fluid minus packet queue, relative to the final equilibrium queue",
    ));

    match packet.fifo_holds() {
        Some(true) => checks.push(Check::bound("packet_fifo", 0.0, 0.0, "")),
        Some(false) => checks.push(Check::bound("packet_fifo", 1.0, 0.0, "out-of-order departure")),
        None => checks.push(Check::not_applicable("packet_fifo", "event log disabled")),
    }

    let period = scenario.cross.iter().find_map(|x| match x.profile {
        CrossProfile::Square { period, .. } => Some(period),
        _ => None,
    });
    match period {
        Some(period) => {
            let mut worst: f64 = 0.0;
            for (j, q) in run.queues().iter().enumerate() {
                for l in 0..q.flows() {
                    let mut a = 0.0;
                    while a + period <= h + 1e-9 {
                        let b = a + period;
                        let fluid = q.departures(l).count_at(b).unwrap_or(f64::NAN)
                            - q.departures(l).count_at(a).unwrap_or(f64::NAN);
                        let pk = packet.departed_between(j, l, a, b);
                        worst = worst.max((fluid - pk).abs());
                        a = b;
                    }
                }
            }
            metrics.insert("packet.period_count_dev_pkt".into(), worst);
            checks.push(Check::bound(
                "packet_period_counts",
                worst,
                PERIOD_COUNT_LIMIT,
                "per-flow output packets per cross-traffic period",
            ));
        }
        None => checks.push(Check::not_applicable(
            "packet_period_counts",
            "no periodic cross-traffic",
        )),
    }

    let mut silence_worst: Option<f64> = None;
    for i in 0..run.users().len() {
        let name = &run.network().users()[i].name;
        let (Some(drop), Some((s0, s1))) = (window_drop(scenario, i), fluid_silence(run, i)) else {
            continue;
        };
        let Some((p0, p1)) = packet.silence(i, drop - 0.01) else {
            continue;
        };
        let (fluid, pk) = (s1 - s0, p1 - p0);
        let rel = (fluid - pk).abs() / pk;
        metrics.insert(format!("silence.fluid_s.{name}"), fluid);
        metrics.insert(format!("silence.packet_s.{name}"), pk);
        let j = run.network().circuits()[i].queues[0];
        let pre = run.queues()[j].q_at(drop).unwrap_or(f64::NAN).max(1.0);
        let drain = queue_rms(run, packet, j, drop, s1.max(p1)) / pre;
        metrics.insert(format!("silence.drain_rms_rel.{name}"), drain);
        silence_worst = Some(silence_worst.unwrap_or(0.0).max(rel).max(drain));
    }
    match silence_worst {
        Some(v) => checks.push(Check::bound(
            "packet_silence",
            v,
            SILENCE_LIMIT,
            "relative silence duration and queue-drain RMS after a window decrease",
        )),
        None => checks.push(Check::not_applicable("packet_silence", "no window decrease silences a user")),
    }
    checks
}

/// Segments of constant inputs: window steps and cross-traffic changes.
fn segments(scenario: &Scenario, horizon: f64) -> Vec<(f64, f64)> {
    let mut cuts = scenario.step_times();
    for x in &scenario.cross {
        if let CrossProfile::Steps { steps, .. } = &x.profile {
            cuts.extend(steps.iter().map(|&(t, _)| t));
        }
    }
    cuts.retain(|&t| t > 0.0 && t < horizon);
    cuts.push(horizon);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut out = Vec::new();
    let mut a = 0.0;
    for b in cuts {
        out.push((a, b));
        a = b;
    }
    out
}

/// Steady-state delays and rates at the end of every segment of constant
/// inputs, against the equilibrium solver.
pub fn equilibrium_checks(run: &Run, metrics: &mut BTreeMap<String, f64>) -> Vec<Check> {
    let scenario = run.scenario();
    if run.users().is_empty()
        || scenario
            .cross
            .iter()
            .any(|x| matches!(x.profile, CrossProfile::Square { .. }))
    {
        return vec![Check::not_applicable(
            "equilibrium",
            "needs users and piecewise-constant inputs",
        )];
    }
    let dt = run.config().dt;
    let mut worst: f64 = 0.0;
    for (k, (a, b)) in segments(scenario, run.horizon()).into_iter().enumerate() {
        // Stop short of the step cell, which carries the step's burst.
        let b = b - 2.0 * dt;
        let width = (0.1 * (b - a)).min(0.5);
        let w0 = b - width;
        let probe = b;
        let eq = match equilibrium_queue(&equilibrium_problem(scenario, run.network(), probe)) {
            Ok(eq) => eq,
            Err(e) => {
                return vec![Check::not_applicable("equilibrium", e.to_string())];
            }
        };
        for (j, info) in run.network().queues().iter().enumerate() {
            let tau = run.mean_tau(j, w0, b);
            let c = info.capacity;
            metrics.insert(format!("equilibrium.segment{k}.tau.{}", info.name), tau);
            metrics.insert(format!("equilibrium.segment{k}.tau_star.{}", info.name), eq.tau[j]);
            // Queues below one packet are compared in packets.
            let dev = if eq.tau[j] * c >= 1.0 {
                (tau - eq.tau[j]).abs() / eq.tau[j]
            } else {
                (tau - eq.tau[j]).abs() * c * EQUILIBRIUM_LIMIT
            };
            worst = worst.max(dev);
        }
        for (i, u) in run.users().iter().enumerate() {
            let name = &run.network().users()[i].name;
            // Whole round trips: FIFO replays the rate pattern every RTT.
            let rtt = run.backward_composition(i, b).map(|s| b - s).unwrap_or(f64::NAN);
            let span = rtt * (width / rtt).floor().max(1.0);
            let rate = u.sent().passed(b, b - span).unwrap_or(f64::NAN) / span;
            metrics.insert(format!("equilibrium.segment{k}.rate.{name}"), rate);
            metrics.insert(format!("equilibrium.segment{k}.rate_star.{name}"), eq.rates[i]);
            worst = worst.max((rate - eq.rates[i]).abs() / eq.rates[i].max(1e-12));
        }
    }
    vec![Check::bound(
        "equilibrium",
        worst,
        EQUILIBRIUM_LIMIT,
        "relative deviation of mean tau and sending rate from the solver at the end of each segment",
    )]
}
