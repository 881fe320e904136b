//! One line per acceptance criterion. Exits non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::thread;

use fluidnet::cli::{fluid_silence, queue_rms};
use fluidnet::engine::{equilibrium_problem, simulate, Run, SimConfig, StaticLink};
use fluidnet::oracle::equilibrium::equilibrium_queue;
use fluidnet::oracle::packet::{packet_sim, PacketConfig, PacketRun};
use fluidnet::scenario::{preset, CrossProfile, InitMode, Scenario};

const PAPER: [&str; 8] = [
    "scenario1", "scenario2", "scenario3", "scenario4", "scenario5", "scenario6", "scenario7", "scenario8",
];
const ALL: [&str; 11] = [
    "scenario1", "scenario2", "scenario3", "scenario4", "scenario5", "scenario6", "scenario7", "scenario8",
    "squarewave", "staticlink", "fast2",
];

struct Line {
    n: usize,
    pass: bool,
    text: String,
}

fn line(n: usize, pass: bool, text: String) -> Line {
    Line { n, pass, text }
}

fn run_with(s: &Scenario, dt: f64, init: InitMode) -> Run {
    let cfg = SimConfig {
        dt,
        horizon: s.run.horizon,
        init,
    };
    simulate(s, &cfg).unwrap_or_else(|e| panic!("{}: {e}", s.name))
}

fn packet_of(run: &Run) -> PacketRun {
    packet_sim(run.scenario(), &PacketConfig::new(run.horizon(), run.config().init)).unwrap()
}

/// Windows `[a, b]` ending just before each input change and at the horizon.
fn steady_windows(s: &Scenario, dt: f64) -> Vec<(f64, f64)> {
    let mut ends = s.step_times();
    ends.retain(|&t| t > 0.0 && t < s.run.horizon);
    ends.push(s.run.horizon);
    let mut start = 0.0;
    ends.into_iter()
        .map(|e| {
            let b = e - 2.0 * dt;
            let a = b - (0.1 * (b - start)).min(0.5);
            start = e;
            (a, b)
        })
        .collect()
}

/// Mean tau per queue and the solver's tau at the end of each window.
fn equilibria(run: &Run) -> Vec<(Vec<f64>, Vec<f64>)> {
    let s = run.scenario();
    steady_windows(s, run.config().dt)
        .into_iter()
        .map(|(a, b)| {
            let eq = equilibrium_queue(&equilibrium_problem(s, run.network(), b)).unwrap();
            let measured = (0..run.queues().len()).map(|j| run.mean_tau(j, a, b)).collect();
            (measured, eq.tau)
        })
        .collect()
}

fn criterion1() -> Line {
    let results: Vec<(String, f64, f64)> = thread::scope(|sc| {
        let handles: Vec<_> = PAPER[..6]
            .iter()
            .map(|name| {
                sc.spawn(move || {
                    let s = preset(name).unwrap();
                    let run = run_with(&s, 1e-4, InitMode::Cold);
                    let mut worst: f64 = 0.0;
                    for (measured, star) in equilibria(&run) {
                        for (m, t) in measured.iter().zip(&star) {
                            worst = worst.max((m - t).abs() / t);
                        }
                    }
                    (name.to_string(), worst, run.elapsed().as_secs_f64())
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let worst = results.iter().map(|r| r.1).fold(0.0, f64::max);
    let slowest = results.iter().map(|r| r.2).fold(0.0, f64::max);
    line(
        1,
        worst < 0.01 && slowest < 60.0,
        format!(
            "scenario equilibria from cold start: max relative tau error {:.3e} (< 1e-2), slowest run {slowest:.2} s (< 60 s)",
            worst
        ),
    )
}

fn criterion2(runs: &BTreeMap<&str, Run>, packets: &BTreeMap<&str, PacketRun>) -> Line {
    let mut worst = (0.0, String::new());
    for name in PAPER {
        let run = &runs[name];
        let eq = equilibrium_queue(&equilibrium_problem(run.scenario(), run.network(), run.horizon())).unwrap();
        for j in 0..run.queues().len() {
            let rel = queue_rms(run, &packets[name], j, 0.0, run.horizon()) / eq.q[j];
            if rel > worst.0 {
                worst = (rel, format!("{name}/{}", run.network().queues()[j].name));
            }
        }
    }
    line(
        2,
        worst.0 <= 0.05,
        format!("fluid vs packet queue RMS: worst {:.3e} of post-step equilibrium queue at {} (<= 5e-2)", worst.0, worst.1),
    )
}

fn criterion3(runs: &BTreeMap<&str, Run>, packets: &BTreeMap<&str, PacketRun>) -> Line {
    let run = &runs["squarewave"];
    let packet = &packets["squarewave"];
    let period = match run.scenario().cross[0].profile {
        CrossProfile::Square { period, .. } => period,
        _ => unreachable!("squarewave preset uses square profiles"),
    };
    let q = &run.queues()[0];
    let mut worst: f64 = 0.0;
    let mut periods = 0;
    for p in 0..10 {
        let (a, b) = (p as f64 * period, (p + 1) as f64 * period);
        for l in 0..q.flows() {
            let fluid = q.departures(l).count_at(b).unwrap() - q.departures(l).count_at(a).unwrap();
            worst = worst.max((fluid - packet.departed_between(0, l, a, b)).abs());
        }
        periods += 1;
    }
    line(
        3,
        worst <= 1.0 && periods == 10,
        format!("square-wave per-flow output per period: max difference {worst:.3} packets over {periods} periods (<= 1)"),
    )
}

fn criterion4(runs: &BTreeMap<&str, Run>, packets: &BTreeMap<&str, PacketRun>) -> Line {
    let mut ok = true;
    let mut parts = Vec::new();
    for name in ["scenario7", "scenario8"] {
        let run = &runs[name];
        let packet = &packets[name];
        let u = &run.users()[0];
        let drop = run.scenario().step_times()[0];
        let Some((s0, s1)) = fluid_silence(run, 0) else {
            ok = false;
            parts.push(format!("{name}: no fluid silence"));
            continue;
        };
        let dt = run.config().dt;
        let silent = u
            .sending_trace()
            .iter()
            .filter(|&(t, _)| t >= s0 && t + dt <= s1)
            .all(|(_, v)| v == 0.0);
        let starts_at_drop = (s0 - (drop - dt)).abs() < 1e-9;
        let pi_ok = u.buffer_trace().iter().all(|(_, p)| p <= 0.0);
        let pi_back = u.pi() == 0.0;
        let (p0, p1) = packet.silence(0, drop - 0.01).unwrap();
        let dur = ((s1 - s0) - (p1 - p0)).abs() / (p1 - p0);
        let j = run.network().circuits()[0].queues[0];
        let pre = run.queues()[j].q_at(drop).unwrap();
        let drain = queue_rms(run, packet, j, drop, s1.max(p1)) / pre;
        ok &= silent && starts_at_drop && pi_ok && pi_back && dur <= 0.05 && drain <= 0.05;
        parts.push(format!(
            "{name}: silent {silent}, pi<=0 {pi_ok}, silence {:.4} s vs packet {:.4} s ({dur:.2e}), drain RMS {drain:.2e}",
            s1 - s0,
            p1 - p0
        ));
    }
    line(4, ok, format!("window decrease: {} (<= 5e-2)", parts.join("; ")))
}

fn criterion5(runs: &BTreeMap<&str, Run>) -> Line {
    let dev = match runs["staticlink"].static_link_check() {
        StaticLink::Deviation { packets, .. } => packets,
        StaticLink::NotApplicable(_) => f64::INFINITY,
    };
    let cold = {
        let s = preset("staticlink").unwrap();
        run_with(&s, 1e-4, InitMode::Cold)
    };
    let mut na = Vec::new();
    for (label, run) in [
        ("heterogeneous delays", &runs["scenario1"]),
        ("cross-traffic", &runs["scenario8"]),
        ("ACK-retaining", &runs["scenario7"]),
        ("not always congested", &cold),
    ] {
        na.push((label, matches!(run.static_link_check(), StaticLink::NotApplicable(_))));
    }
    let all_na = na.iter().all(|x| x.1);
    line(
        5,
        dev <= 2.0 && all_na,
        format!(
            "static-link reduction: max deviation {dev:.3e} packets (<= 2); not applicable on {}",
            na.iter().map(|(l, b)| format!("{l}={b}")).collect::<Vec<_>>().join(", ")
        ),
    )
}

fn criterion6(runs: &BTreeMap<&str, Run>) -> Line {
    let (mut gf, mut fp, mut points) = (0.0f64, 0.0f64, 0);
    for run in runs.values() {
        let ids = run.operator_identities();
        gf = gf.max(ids.g_of_f);
        fp = fp.max(ids.fixed_point);
        points += ids.points;
    }
    line(
        6,
        gf <= 1e-6 && fp <= 1e-6 && points > 0,
        format!("operator identities over {points} congested points: |g(f(t))-t| {gf:.2e} s, |g+tau(g)-t| {fp:.2e} s (<= 1e-6)"),
    )
}

fn criterion7(runs: &BTreeMap<&str, Run>) -> Line {
    let (mut user, mut queue, mut min_in) = (0.0f64, 0.0f64, f64::INFINITY);
    for run in runs.values() {
        let c = run.conservation();
        user = user.max(c.user_gap);
        queue = queue.max(c.queue_gap);
        min_in = min_in.min(c.min_in_queue);
    }
    line(
        7,
        user <= 2.0 && queue <= 2.0 && min_in >= -2.0,
        format!("conservation: user gap {user:.2e}, queue gap {queue:.2e}, min per-flow content {min_in:.2} packets (within 2)"),
    )
}

fn criterion8(runs: &BTreeMap<&str, Run>) -> Line {
    let mut worst: f64 = 0.0;
    for name in ["scenario1", "scenario2"] {
        let run = &runs[name];
        let c = run.network().queues()[0].capacity;
        for i in 0..run.users().len() {
            worst = worst.max(run.ack_identity(i) / c);
        }
    }
    line(8, worst < 0.01, format!("ACK-flow identity on scenarios 1-2: max residual {worst:.3e} of capacity (< 1e-2)"))
}

fn criterion9(runs: &BTreeMap<&str, Run>) -> Line {
    let names: Vec<&str> = ALL.iter().copied().filter(|n| *n != "squarewave").collect();
    let results: Vec<f64> = thread::scope(|sc| {
        let handles: Vec<_> = names
            .iter()
            .map(|&name| {
                let coarse = &runs[name];
                sc.spawn(move || {
                    let s = preset(name).unwrap();
                    let fine = run_with(&s, 5e-5, s.run.init);
                    let mut worst: f64 = 0.0;
                    for ((a, b), (fa, fb)) in steady_windows(&s, 1e-4).into_iter().zip(steady_windows(&s, 5e-5)) {
                        for j in 0..coarse.queues().len() {
                            let x = coarse.mean_tau(j, a, b);
                            let y = fine.mean_tau(j, fa, fb);
                            worst = worst.max((x - y).abs() / x.abs().max(1e-12));
                        }
                    }
                    worst
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let worst = results.iter().copied().fold(0.0, f64::max);
    line(
        9,
        worst < 0.005,
        format!("dt 1e-4 -> 5e-5: max relative change of steady-state tau {worst:.3e} over {} presets (< 5e-3)", names.len()),
    )
}

fn criterion10(runs: &BTreeMap<&str, Run>) -> Line {
    let run = &runs["fast2"];
    let s = run.scenario();
    let c = run.network().queues()[0].capacity;
    let alpha = match &s.users[0].protocol {
        fluidnet::protocol::Protocol::Fast { params, .. } => params.alpha,
        _ => unreachable!("fast2 preset runs FAST"),
    };
    let n = s.users.len() as f64;
    let h = run.horizon();
    let tau = run.mean_tau(0, h - 1.0, h);
    let tau_star = n * alpha / c;
    let mut rate_err: f64 = 0.0;
    for (i, u) in run.users().iter().enumerate() {
        let rtt = h - run.backward_composition(i, h).unwrap();
        let span = rtt * (1.0 / rtt).floor();
        let rate = u.sent().passed(h, h - span).unwrap() / span;
        rate_err = rate_err.max((rate - alpha / tau).abs() / (alpha / tau));
    }
    let tau_err = (tau - tau_star).abs() / tau_star;
    line(
        10,
        tau_err <= 0.02 && rate_err <= 0.02,
        format!("FAST equilibrium: tau {tau:.6} s vs N alpha / c = {tau_star:.6} s ({tau_err:.2e}), rates vs alpha / tau {rate_err:.2e} (<= 2e-2)"),
    )
}

fn main() {
    let (runs, packets): (BTreeMap<&str, Run>, BTreeMap<&str, PacketRun>) = thread::scope(|sc| {
        let handles: Vec<_> = ALL
            .iter()
            .map(|&name| {
                sc.spawn(move || {
                    let s = preset(name).unwrap();
                    let run = run_with(&s, s.run.dt, s.run.init);
                    let packet = (name != "fast2").then(|| packet_of(&run));
                    (name, run, packet)
                })
            })
            .collect();
        let mut runs = BTreeMap::new();
        let mut packets = BTreeMap::new();
        for h in handles {
            let (name, run, packet) = h.join().unwrap();
            runs.insert(name, run);
            if let Some(p) = packet {
                packets.insert(name, p);
            }
        }
        (runs, packets)
    });

    let lines = vec![
        criterion1(),
        criterion2(&runs, &packets),
        criterion3(&runs, &packets),
        criterion4(&runs, &packets),
        criterion5(&runs),
        criterion6(&runs),
        criterion7(&runs),
        criterion8(&runs),
        criterion9(&runs),
        criterion10(&runs),
    ];
    let mut failed = 0;
    for l in &lines {
        println!("criterion {}: {} {}", l.n, if l.pass { "PASS" } else { "FAIL" }, l.text);
        failed += usize::from(!l.pass);
    }
    println!("{} of {} criteria pass", lines.len() - failed, lines.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
