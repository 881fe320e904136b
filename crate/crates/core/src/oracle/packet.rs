//! Packet-level discrete-event simulator of the same scenarios.
//!
//! Queues serve one packet every `1 / c` in FIFO order, channels are pure
//! delays and users keep at most `w` packets unacknowledged, sending one
//! packet per ACK. Cross-traffic packet `n` arrives when the fluid
//! cumulative cross count reaches `n - 1/2`.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};
use std::io::Write;

use thiserror::Error;

use crate::history::Trajectory;
use crate::oracle::equilibrium::{equilibrium_queue, EquilibriumError, EquilibriumProblem, EquilibriumUser, UserLaw};
use crate::protocol::Protocol;
use crate::scenario::{CrossProfile, InitMode, Scenario};
use crate::topology::{build_network, FlowRef, Network, TopologyError};

#[derive(Debug, Error)]
pub enum PacketError {
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Equilibrium(#[from] EquilibriumError),
    #[error("user {0} runs FAST; the packet simulator only replays window schedules")]
    Unsupported(String),
    #[error("horizon {horizon} and sample step {sample_dt} must be positive")]
    BadConfig { horizon: f64, sample_dt: f64 },
    #[error("event log: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, PacketError>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PacketConfig {
    pub horizon: f64,
    pub sample_dt: f64,
    pub init: InitMode,
    pub log_events: bool,
}

impl PacketConfig {
    pub fn new(horizon: f64, init: InitMode) -> Self {
        Self {
            horizon,
            sample_dt: 1e-3,
            init,
            log_events: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PacketEventKind {
    Send { user: usize },
    Arrive { queue: usize },
    Depart { queue: usize },
    Ack { user: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PacketEvent {
    pub t: f64,
    pub packet: u64,
    pub flow: FlowRef,
    pub kind: PacketEventKind,
}

/// Sampled output of a packet run.
#[derive(Debug, Clone)]
pub struct PacketRun {
    pub times: Vec<f64>,
    /// Packets in each queue, including the one in service.
    pub queue_len: Vec<Vec<f64>>,
    pub window: Vec<Vec<f64>>,
    pub flight: Vec<Vec<f64>>,
    pub sent: Vec<Vec<f64>>,
    /// Cumulative arrivals and departures per queue and flow slot, counted
    /// from time 0. Departures include the transmitted fraction of the
    /// packet in service.
    pub arrivals: Vec<Vec<Vec<f64>>>,
    pub departures: Vec<Vec<Vec<f64>>>,
    pub send_times: Vec<Vec<f64>>,
    pub events: Option<Vec<PacketEvent>>,
}

impl PacketRun {
    pub fn queue_trace(&self, queue: usize) -> Trajectory {
        let mut tr = Trajectory::with_capacity(self.queue_len[queue][0], self.times.len());
        for (&t, &v) in self.times.iter().zip(&self.queue_len[queue]) {
            tr.record(t, v).expect("increasing sample times");
        }
        tr
    }

    /// Longest gap between consecutive sends of `user` that starts at or
    /// after `after`, as `(last send before, first send after)`.
    pub fn silence(&self, user: usize, after: f64) -> Option<(f64, f64)> {
        let s = &self.send_times[user];
        let from = s.partition_point(|&t| t < after).saturating_sub(1);
        s[from..]
            .windows(2)
            .map(|w| (w[0], w[1]))
            .max_by(|a, b| (a.1 - a.0).total_cmp(&(b.1 - b.0)))
    }

    /// Packets of one flow that left `queue` during `[t0, t1)`, from the
    /// sampled counters.
    pub fn departed_between(&self, queue: usize, slot: usize, t0: f64, t1: f64) -> f64 {
        let at = |t: f64| {
            let k = self.times.partition_point(|&s| s < t - 1e-12);
            self.departures[queue][slot][k.min(self.times.len() - 1)]
        };
        at(t1) - at(t0)
    }

    /// Checks that every queue released packets in arrival order. Packets
    /// placed inside a queue at start are logged with their (negative)
    /// arrival times first.
    pub fn fifo_holds(&self) -> Option<bool> {
        let events = self.events.as_ref()?;
        let queues = self.queue_len.len();
        let mut order: Vec<VecDeque<u64>> = vec![VecDeque::new(); queues];
        for e in events {
            match e.kind {
                PacketEventKind::Arrive { queue } => order[queue].push_back(e.packet),
                PacketEventKind::Depart { queue } => {
                    if order[queue].pop_front() != Some(e.packet) {
                        return Some(false);
                    }
                }
                _ => {}
            }
        }
        Some(true)
    }

    pub fn write_events(&self, out: &mut impl Write) -> Result<()> {
        writeln!(out, "time_s,packet,flow,event,element")?;
        for e in self.events.iter().flatten() {
            let flow = match e.flow {
                FlowRef::User(i) => format!("user{i}"),
                FlowRef::Cross(k) => format!("cross{k}"),
            };
            let (kind, at) = match e.kind {
                PacketEventKind::Send { user } => ("send", user),
                PacketEventKind::Arrive { queue } => ("arrive", queue),
                PacketEventKind::Depart { queue } => ("depart", queue),
                PacketEventKind::Ack { user } => ("ack", user),
            };
            writeln!(out, "{},{},{},{},{}", e.t, e.packet, flow, kind, at)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
struct Packet {
    id: u64,
    flow: FlowRef,
    slot: usize,
    hop: usize,
}

#[derive(Debug, Clone, Copy)]
enum Action {
    Arrive { queue: usize, packet: Packet },
    Depart { queue: usize },
    Ack { user: usize },
    Window { user: usize, w: f64 },
    Cross { k: usize, n: i64 },
}

#[derive(Debug, Clone, Copy)]
struct Event {
    t: f64,
    seq: u64,
    action: Action,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    // Reversed so the heap pops the earliest event.
    fn cmp(&self, other: &Self) -> Ordering {
        other.t.total_cmp(&self.t).then(other.seq.cmp(&self.seq))
    }
}

struct Sim<'a> {
    scenario: &'a Scenario,
    net: Network,
    heap: BinaryHeap<Event>,
    seq: u64,
    next_id: u64,
    fifo: Vec<VecDeque<Packet>>,
    /// Start and end of the current service, per queue.
    service: Vec<(f64, f64)>,
    window: Vec<f64>,
    flight: Vec<f64>,
    sent: Vec<f64>,
    arrived: Vec<Vec<f64>>,
    departed: Vec<Vec<f64>>,
    send_times: Vec<Vec<f64>>,
    events: Option<Vec<PacketEvent>>,
    horizon: f64,
}

impl Sim<'_> {
    fn push(&mut self, t: f64, action: Action) {
        if t <= self.horizon {
            self.seq += 1;
            self.heap.push(Event { t, seq: self.seq, action });
        }
    }

    fn log(&mut self, t: f64, packet: &Packet, kind: PacketEventKind) {
        if let Some(ev) = self.events.as_mut() {
            ev.push(PacketEvent {
                t,
                packet: packet.id,
                flow: packet.flow,
                kind,
            });
        }
    }

    fn new_packet(&mut self, flow: FlowRef, queue: usize, hop: usize) -> Packet {
        self.next_id += 1;
        Packet {
            id: self.next_id,
            flow,
            slot: slot_of(&self.net, queue, flow),
            hop,
        }
    }

    fn try_send(&mut self, user: usize, t: f64) {
        while self.flight[user] + 1.0 <= self.window[user] + 1e-9 {
            self.flight[user] += 1.0;
            self.sent[user] += 1.0;
            self.send_times[user].push(t);
            let c = &self.net.circuits()[user];
            let (first, d0) = (c.queues[0], c.delays[0]);
            let p = self.new_packet(FlowRef::User(user), first, 0);
            self.log(t, &p, PacketEventKind::Send { user });
            self.push(t + d0, Action::Arrive { queue: first, packet: p });
        }
    }

    fn arrive(&mut self, queue: usize, p: Packet, t: f64) {
        self.arrived[queue][p.slot] += 1.0;
        self.log(t, &p, PacketEventKind::Arrive { queue });
        self.fifo[queue].push_back(p);
        if self.fifo[queue].len() == 1 {
            let c = self.net.queues()[queue].capacity;
            self.serve(queue, t, t + 1.0 / c);
        }
    }

    fn depart(&mut self, queue: usize, t: f64) {
        let p = self.fifo[queue].pop_front().expect("departure from a busy queue");
        self.departed[queue][p.slot] += 1.0;
        self.log(t, &p, PacketEventKind::Depart { queue });
        if !self.fifo[queue].is_empty() {
            let c = self.net.queues()[queue].capacity;
            self.serve(queue, t, t + 1.0 / c);
        }
        self.forward(p, t);
    }

    fn serve(&mut self, queue: usize, from: f64, until: f64) {
        self.service[queue] = (from, until);
        self.push(until, Action::Depart { queue });
    }

    /// Departures of one flow slot including the served part of the head.
    fn departed_at(&self, queue: usize, slot: usize, t: f64) -> f64 {
        let done = self.departed[queue][slot];
        match self.fifo[queue].front() {
            Some(p) if p.slot == slot => {
                let (a, b) = self.service[queue];
                done + ((t - a) / (b - a)).clamp(0.0, 1.0)
            }
            _ => done,
        }
    }

    /// Moves a packet that just left its current queue to the next element.
    fn forward(&mut self, p: Packet, t: f64) {
        if let FlowRef::User(i) = p.flow {
            let c = &self.net.circuits()[i];
            let hop = p.hop + 1;
            if hop < c.queues.len() {
                let next = c.queues[hop];
                let delay = c.delays[hop];
                let moved = Packet {
                    slot: slot_of(&self.net, next, p.flow),
                    hop,
                    ..p
                };
                self.push(t + delay, Action::Arrive { queue: next, packet: moved });
            } else {
                let delay = c.backward_delay();
                self.push(t + delay, Action::Ack { user: i });
            }
        }
    }

    fn cross_count(&self, k: usize, t: f64) -> f64 {
        let x = &self.net.cross()[k];
        self.net.queues()[x.queue].capacity * self.scenario.cross[k].profile.cumulative(t)
    }

    /// Time at which cross flow `k` reaches count `n - 1/2`, searching
    /// forward from `from`.
    fn cross_time(&self, k: usize, n: i64, from: f64) -> Option<f64> {
        let target = n as f64 - 0.5;
        let mut lo = from;
        let mut step = 1e-3;
        let mut hi = from + step;
        while self.cross_count(k, hi) < target {
            if hi > self.horizon {
                return None;
            }
            lo = hi;
            step *= 2.0;
            hi = lo + step;
        }
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if self.cross_count(k, mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-13 * hi.abs().max(1.0) {
                break;
            }
        }
        Some(hi)
    }

    fn schedule_cross(&mut self, k: usize, n: i64, from: f64) {
        if let Some(t) = self.cross_time(k, n, from) {
            self.push(t, Action::Cross { k, n });
        }
    }
}

fn slot_of(net: &Network, queue: usize, flow: FlowRef) -> usize {
    net.queues()[queue]
        .flows
        .iter()
        .position(|&f| f == flow)
        .expect("flow attached to queue")
}

/// Runs the packet model of `scenario`.
pub fn packet_sim(scenario: &Scenario, config: &PacketConfig) -> Result<PacketRun> {
    let PacketConfig {
        horizon,
        sample_dt,
        init,
        log_events,
    } = *config;
    if !(horizon > 0.0 && sample_dt > 0.0 && horizon.is_finite()) {
        return Err(PacketError::BadConfig { horizon, sample_dt });
    }
    let mut schedules = Vec::new();
    for u in &scenario.users {
        match &u.protocol {
            Protocol::Schedule(s) => schedules.push(s.clone()),
            Protocol::Fast { .. } => return Err(PacketError::Unsupported(u.name.clone())),
        }
    }
    let net = build_network(&scenario.network_spec())?;
    let nq = net.queues().len();
    let nu = net.users().len();
    let slots: Vec<usize> = net.queues().iter().map(|q| q.flows.len()).collect();
    let mut sim = Sim {
        scenario,
        heap: BinaryHeap::new(),
        seq: 0,
        next_id: 0,
        fifo: vec![VecDeque::new(); nq],
        service: vec![(0.0, 0.0); nq],
        window: schedules.iter().map(|s| s.initial()).collect(),
        flight: vec![0.0; nu],
        sent: vec![0.0; nu],
        arrived: slots.iter().map(|&n| vec![0.0; n]).collect(),
        departed: slots.iter().map(|&n| vec![0.0; n]).collect(),
        send_times: vec![Vec::new(); nu],
        events: log_events.then(Vec::new),
        horizon,
        net,
    };

    match init {
        InitMode::Cold => {
            for i in 0..nu {
                sim.try_send(i, 0.0);
            }
            for k in 0..sim.net.cross().len() {
                sim.schedule_cross(k, 1, 0.0);
            }
        }
        InitMode::Equilibrium => place_equilibrium(&mut sim)?,
    }
    for (i, s) in schedules.iter().enumerate() {
        for &(t, w) in s.steps() {
            sim.push(t, Action::Window { user: i, w });
        }
    }

    let samples = (horizon / sample_dt).round() as usize;
    let mut run = PacketRun {
        times: Vec::with_capacity(samples + 1),
        queue_len: vec![Vec::with_capacity(samples + 1); nq],
        window: vec![Vec::with_capacity(samples + 1); nu],
        flight: vec![Vec::with_capacity(samples + 1); nu],
        sent: vec![Vec::with_capacity(samples + 1); nu],
        arrivals: slots.iter().map(|&n| vec![Vec::with_capacity(samples + 1); n]).collect(),
        departures: slots.iter().map(|&n| vec![Vec::with_capacity(samples + 1); n]).collect(),
        send_times: Vec::new(),
        events: None,
    };
    let mut next_sample = 0usize;
    let mut take_samples = |sim: &Sim, until: f64, run: &mut PacketRun| {
        while next_sample <= samples && next_sample as f64 * sample_dt < until {
            let ts = next_sample as f64 * sample_dt;
            run.times.push(ts);
            for j in 0..nq {
                run.queue_len[j].push(sim.fifo[j].len() as f64);
                for l in 0..slots[j] {
                    run.arrivals[j][l].push(sim.arrived[j][l]);
                    run.departures[j][l].push(sim.departed_at(j, l, ts));
                }
            }
            for i in 0..nu {
                run.window[i].push(sim.window[i]);
                run.flight[i].push(sim.flight[i]);
                run.sent[i].push(sim.sent[i]);
            }
            next_sample += 1;
        }
    };

    while let Some(ev) = sim.heap.pop() {
        take_samples(&sim, ev.t, &mut run);
        let t = ev.t;
        match ev.action {
            Action::Arrive { queue, packet } => sim.arrive(queue, packet, t),
            Action::Depart { queue } => sim.depart(queue, t),
            Action::Ack { user } => {
                sim.flight[user] -= 1.0;
                if let Some(log) = sim.events.as_mut() {
                    log.push(PacketEvent {
                        t,
                        packet: 0,
                        flow: FlowRef::User(user),
                        kind: PacketEventKind::Ack { user },
                    });
                }
                sim.try_send(user, t);
            }
            Action::Window { user, w } => {
                sim.window[user] = w;
                sim.try_send(user, t);
            }
            Action::Cross { k, n } => {
                let queue = sim.net.cross()[k].queue;
                let p = sim.new_packet(FlowRef::Cross(k), queue, 0);
                sim.arrive(queue, p, t);
                sim.schedule_cross(k, n + 1, t);
            }
        }
    }
    take_samples(&sim, f64::INFINITY, &mut run);
    run.send_times = sim.send_times;
    run.events = sim.events;
    Ok(run)
}

/// Puts every packet where the fluid equilibrium says it is at time 0: each
/// user has `w` packets out, sent evenly at its equilibrium rate, and each
/// queue holds the cross-traffic of its last `tau` seconds.
fn place_equilibrium(sim: &mut Sim) -> Result<()> {
    let net = &sim.net;
    let mut cross = vec![0.0; net.queues().len()];
    for (k, x) in net.cross().iter().enumerate() {
        cross[x.queue] += sim.scenario.cross[k].profile.fraction_at(0.0);
    }
    let problem = EquilibriumProblem {
        capacities: net.queues().iter().map(|q| q.capacity).collect(),
        cross,
        users: net
            .circuits()
            .iter()
            .map(|c| EquilibriumUser {
                law: UserLaw::Window(sim.window[c.user]),
                prop_delay: c.total_delay(),
                route: c.queues.clone(),
            })
            .collect(),
    };
    let eq = equilibrium_queue(&problem)?;

    // (arrival time, packet) per queue for packets already inside at 0.
    let mut inside: Vec<Vec<(f64, Packet)>> = vec![Vec::new(); net.queues().len()];
    let circuits = net.circuits().to_vec();
    for c in &circuits {
        let i = c.user;
        let x = eq.rates[i];
        let count = (sim.window[i] + 1e-9).floor() as usize;
        if x <= 0.0 {
            continue;
        }
        for n in (1..=count).rev() {
            let s = -(n as f64 - 0.5) / x;
            sim.flight[i] += 1.0;
            sim.send_times[i].push(s);
            let mut t = s;
            let mut placed = false;
            for (h, &j) in c.queues.iter().enumerate() {
                let arrive = t + c.delays[h];
                let p = sim.new_packet(FlowRef::User(i), j, h);
                if arrive > 0.0 {
                    sim.push(arrive, Action::Arrive { queue: j, packet: p });
                    placed = true;
                    break;
                }
                let leave = arrive + eq.tau[j];
                if leave > 0.0 {
                    inside[j].push((arrive, p));
                    placed = true;
                    break;
                }
                t = leave;
            }
            if !placed {
                sim.push(t + c.backward_delay(), Action::Ack { user: i });
            }
        }
    }
    for k in 0..sim.net.cross().len() {
        let j = sim.net.cross()[k].queue;
        let rate = sim.net.queues()[j].capacity * sim.scenario.cross[k].profile.fraction_at(0.0);
        let mut first_future = 1;
        if rate > 0.0 {
            let mut n = 0i64;
            loop {
                let a = (n as f64 - 0.5) / rate;
                if a <= -eq.tau[j] {
                    break;
                }
                let p = sim.new_packet(FlowRef::Cross(k), j, 0);
                inside[j].push((a, p));
                n -= 1;
            }
        } else if matches!(sim.scenario.cross[k].profile, CrossProfile::Constant { .. }) {
            first_future = i64::MAX;
        }
        if first_future != i64::MAX {
            sim.schedule_cross(k, first_future, 0.0);
        }
    }
    for (j, mut packets) in inside.into_iter().enumerate() {
        packets.sort_by(|a, b| a.0.total_cmp(&b.0));
        let c = sim.net.queues()[j].capacity;
        if let Some(&(a, _)) = packets.first() {
            // The head is in service and leaves when the fluid says it does.
            let leave = (a + eq.tau[j]).max(0.0).min(1.0 / c);
            sim.serve(j, leave - 1.0 / c, leave);
        }
        for (a, p) in packets {
            sim.next_id += 1;
            let p = Packet { id: sim.next_id, ..p };
            sim.log(a, &p, PacketEventKind::Arrive { queue: j });
            sim.fifo[j].push_back(p);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::WindowSchedule;
    use crate::scenario::{CrossSpec, QueueSpec, RunSettings, UserSpec};
    use crate::topology::ChannelDecl;

    fn single(w: f64, steps: Vec<(f64, f64)>, c: f64, tf: f64, tb: f64) -> Scenario {
        Scenario {
            name: "single".into(),
            description: String::new(),
            queues: vec![QueueSpec {
                name: "b".into(),
                capacity: c,
                packet_bytes: None,
            }],
            users: vec![UserSpec {
                name: "u".into(),
                route: vec!["b".into()],
                protocol: Protocol::Schedule(WindowSchedule::new(w, steps).unwrap()),
            }],
            channels: vec![
                ChannelDecl {
                    from: "u+".into(),
                    to: "b-".into(),
                    delay: tf,
                },
                ChannelDecl {
                    from: "b+".into(),
                    to: "u-".into(),
                    delay: tb,
                },
            ],
            cross: vec![],
            run: RunSettings {
                dt: 1e-4,
                horizon: 1.0,
                init: InitMode::Equilibrium,
            },
        }
    }

    #[test]
    fn window_limited_throughput() {
        // w = 10, RTT 0.1 s, plenty of capacity: 100 pkt/s.
        let s = single(10.0, vec![], 1e4, 0.05, 0.05);
        let run = packet_sim(&s, &PacketConfig::new(2.0, InitMode::Cold)).unwrap();
        let sent = run.sent[0].last().unwrap();
        // Ten rounds of 0.1 s per second, the first at 0.
        assert!((sent - 200.0).abs() <= 1.0, "{sent}");
        assert!(run.flight[0].iter().all(|&f| f <= 10.0));
    }

    #[test]
    fn congested_queue_holds_window_minus_pipe() {
        // w = 100, c = 500, T = 0.1: q = w - cT = 50.
        let s = single(100.0, vec![], 500.0, 0.05, 0.05);
        for init in [InitMode::Cold, InitMode::Equilibrium] {
            let run = packet_sim(&s, &PacketConfig::new(3.0, init)).unwrap();
            let tail = &run.queue_len[0][2500..];
            let mean = tail.iter().sum::<f64>() / tail.len() as f64;
            assert!((mean - 50.0).abs() < 1.0, "{init:?} {mean}");
        }
    }

    #[test]
    fn equilibrium_start_is_stationary() {
        let s = single(100.0, vec![], 500.0, 0.05, 0.05);
        let run = packet_sim(&s, &PacketConfig::new(1.0, InitMode::Equilibrium)).unwrap();
        let (lo, hi) = run.queue_len[0]
            .iter()
            .fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
        assert!(lo >= 49.0 && hi <= 51.0, "{lo} {hi}");
        assert!(run.flight[0].iter().all(|&f| (f - 100.0).abs() <= 1.0));
    }

    #[test]
    fn halving_pauses_the_sender() {
        let s = single(500.0, vec![(1.0, 250.0)], 1000.0, 0.075, 0.075);
        let run = packet_sim(&s, &PacketConfig::new(2.0, InitMode::Equilibrium)).unwrap();
        let (a, b) = run.silence(0, 0.9).unwrap();
        // 250 ACKs at c = 1000.
        assert!((a - 1.0).abs() < 2e-3, "{a}");
        assert!((b - a - 0.251).abs() < 2e-3, "{}", b - a);
    }

    #[test]
    fn fifo_and_event_log() {
        let mut s = single(40.0, vec![(0.2, 80.0)], 500.0, 0.01, 0.01);
        s.cross.push(CrossSpec {
            name: "x".into(),
            queue: "b".into(),
            profile: CrossProfile::Constant { fraction: 0.3 },
        });
        let cfg = PacketConfig {
            log_events: true,
            ..PacketConfig::new(0.5, InitMode::Equilibrium)
        };
        let run = packet_sim(&s, &cfg).unwrap();
        assert_eq!(run.fifo_holds(), Some(true));
        let mut buf = Vec::new();
        run.write_events(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("time_s,packet,flow,event,element\n"));
        assert!(text.lines().count() > 100);
        // Cross-traffic arrives at 0.3 c.
        let x = run.arrivals[0][1].last().unwrap();
        assert!((x - 75.0).abs() <= 1.0, "{x}");
    }

    #[test]
    fn fast_is_rejected() {
        let mut s = single(10.0, vec![], 100.0, 0.05, 0.05);
        s.users[0].protocol = Protocol::Fast {
            params: crate::protocol::FastParams::new(0.5, 10.0).unwrap(),
            initial: 10.0,
        };
        assert!(matches!(
            packet_sim(&s, &PacketConfig::new(1.0, InitMode::Cold)),
            Err(PacketError::Unsupported(_))
        ));
    }
}
