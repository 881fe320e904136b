//! Fixed-step causal integration of the whole network.
//!
//! Time runs on the grid `t_k = k dt`. One tick computes every counter at
//! `t_{k+1}` from data at earlier times, plus same-tick upstream values where
//! a channel is shorter than `dt` (see [`Network::tick_order`]):
//!
//! - ACKs: the return channel's delayed read of the last queue's departures;
//! - sends: the controller's window and the ACK budget through the buffer;
//! - queues: delayed reads of upstream counters, then the queue step.
//!
//! Afterwards every user's flight size is evaluated from the backward maps.

use std::time::{Duration, Instant};

use thiserror::Error;

use crate::history::{HistoryError, Trajectory};
use crate::oracle::equilibrium::{
    equilibrium_queue, Equilibrium, EquilibriumError, EquilibriumProblem, EquilibriumUser, UserLaw,
};
use crate::protocol::{Controller, Protocol};
use crate::queue::{QueueState, EPS_Q};
use crate::scenario::{InitMode, Scenario};
use crate::topology::{build_network, FlowRef, Network, TickNode, TopologyError};
use crate::user::UserState;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error("configuration: {0}")]
    Config(String),
    #[error("equilibrium initialization: {0}")]
    Init(#[from] EquilibriumError),
    #[error("{block} at t = {t}: {message}")]
    Block { block: String, t: f64, message: String },
}

pub type Result<T> = std::result::Result<T, SimError>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub dt: f64,
    pub horizon: f64,
    pub init: InitMode,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 1e-4,
            horizon: 10.0,
            init: InitMode::Equilibrium,
        }
    }
}

impl SimConfig {
    pub fn from_scenario(scenario: &Scenario) -> Self {
        Self {
            dt: scenario.run.dt,
            horizon: scenario.run.horizon,
            init: scenario.run.init,
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Upstream {
    Send(usize),
    Queue { queue: usize, slot: usize },
    Cross(usize),
}

#[derive(Debug, Clone, Copy)]
struct Feed {
    upstream: Upstream,
    delay: f64,
}

/// Result of the static-link comparison.
#[derive(Debug, Clone, PartialEq)]
pub enum StaticLink {
    /// Largest `|c tau(t) - sum w(t - T_f) + c (T_f + T_b)|` and where.
    Deviation { packets: f64, at: f64 },
    NotApplicable(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct IdentityReport {
    /// `max |g(f(t)) - t|`, seconds.
    pub g_of_f: f64,
    /// `max |g(t) + tau(g(t)) - t|`, seconds.
    pub fixed_point: f64,
    /// `max |g(t) - s(t)|` where `s(t)` is the arrival time recovered from
    /// the departure counter, seconds.
    pub fifo: f64,
    /// Grid points checked.
    pub points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ConservationReport {
    /// `max |sent - flight - acked|` over users and grid points, packets.
    pub user_gap: f64,
    /// `max |sum_l (A_l - D_l) - q|` over queues and grid points, packets.
    pub queue_gap: f64,
    /// Smallest per-flow queue content seen, packets.
    pub min_in_queue: f64,
}

/// Named signal on the engine grid.
#[derive(Debug, Clone)]
pub struct Signal {
    pub name: String,
    pub unit: &'static str,
    pub trajectory: Trajectory,
    /// Cell averages held over `[t_k, t_{k+1})` rather than point samples.
    pub hold: bool,
}

impl Signal {
    pub fn at(&self, t: f64) -> std::result::Result<f64, HistoryError> {
        if self.hold {
            match self.trajectory.last_time() {
                Some(last) if t >= last => Ok(self.trajectory.last_value().unwrap()),
                _ => self.trajectory.eval_hold(t),
            }
        } else {
            self.trajectory.eval(t)
        }
    }
}

/// All recorded signals, in a fixed order.
#[derive(Debug, Clone)]
pub struct TraceSet {
    pub times: Vec<f64>,
    pub signals: Vec<Signal>,
}

impl TraceSet {
    pub fn get(&self, name: &str) -> Option<&Signal> {
        self.signals.iter().find(|s| s.name == name)
    }

    pub fn names(&self) -> Vec<&str> {
        self.signals.iter().map(|s| s.name.as_str()).collect()
    }
}

/// A finished simulation with its histories.
#[derive(Debug, Clone)]
pub struct Run {
    scenario: Scenario,
    network: Network,
    config: SimConfig,
    steps: usize,
    users: Vec<UserState>,
    queues: Vec<QueueState>,
    feeds: Vec<Vec<Feed>>,
    ack_feeds: Vec<Feed>,
    flight: Vec<Trajectory>,
    initial: Option<Equilibrium>,
    elapsed: Duration,
}

fn block_err<E: std::fmt::Display>(block: impl Into<String>, t: f64) -> impl FnOnce(E) -> SimError {
    let block = block.into();
    move |e| SimError::Block {
        block,
        t,
        message: e.to_string(),
    }
}

/// Equilibrium problem for the windows in force at `t`; FAST users enter
/// with their own law.
pub fn equilibrium_problem(scenario: &Scenario, network: &Network, t: f64) -> EquilibriumProblem {
    build_problem(scenario, network, t, |p| match p {
        Protocol::Schedule(s) => UserLaw::Window(s.window_at(t)),
        Protocol::Fast { params, .. } => UserLaw::Fast { alpha: params.alpha },
    })
}

fn build_problem(
    scenario: &Scenario,
    network: &Network,
    t: f64,
    law: impl Fn(&Protocol) -> UserLaw,
) -> EquilibriumProblem {
    let mut cross = vec![0.0; network.queues().len()];
    for (k, x) in network.cross().iter().enumerate() {
        cross[x.queue] += scenario.cross[k].profile.fraction_at(t);
    }
    EquilibriumProblem {
        capacities: network.queues().iter().map(|q| q.capacity).collect(),
        cross,
        users: network
            .circuits()
            .iter()
            .map(|c| EquilibriumUser {
                law: law(&scenario.users[c.user].protocol),
                prop_delay: c.total_delay(),
                route: c.queues.clone(),
            })
            .collect(),
    }
}

/// Runs the fluid model of `scenario` under `config`.
pub fn simulate(scenario: &Scenario, config: &SimConfig) -> Result<Run> {
    let clock = Instant::now();
    let SimConfig { dt, horizon, init } = *config;
    if !(dt.is_finite() && dt > 0.0) || !(horizon.is_finite() && horizon > 0.0) {
        return Err(SimError::Config(format!("dt = {dt}, horizon = {horizon}")));
    }
    let network = build_network(&scenario.network_spec())?;
    if let Some(d) = scenario
        .channels
        .iter()
        .map(|c| c.delay)
        .filter(|&d| d > 0.0)
        .min_by(f64::total_cmp)
    {
        if dt > d / 10.0 * (1.0 + 1e-9) {
            return Err(SimError::Config(format!(
                "dt = {dt} exceeds a tenth of the shortest channel delay {d}"
            )));
        }
    }
    let order = network.tick_order(dt)?;
    let steps = (horizon / dt).round() as usize;

    let nq = network.queues().len();
    let mut feeds: Vec<Vec<Feed>> = vec![Vec::new(); nq];
    for (j, info) in network.queues().iter().enumerate() {
        for flow in &info.flows {
            let feed = match *flow {
                FlowRef::Cross(k) => Feed {
                    upstream: Upstream::Cross(k),
                    delay: 0.0,
                },
                FlowRef::User(i) => {
                    let c = &network.circuits()[i];
                    let h = c.hop_of(j).expect("queue is on the user's route");
                    let upstream = if h == 0 {
                        Upstream::Send(i)
                    } else {
                        let prev = c.queues[h - 1];
                        Upstream::Queue {
                            queue: prev,
                            slot: slot_of(&network, prev, FlowRef::User(i)),
                        }
                    };
                    Feed {
                        upstream,
                        delay: c.delays[h],
                    }
                }
            };
            feeds[j].push(feed);
        }
    }
    let ack_feeds: Vec<Feed> = network
        .circuits()
        .iter()
        .map(|c| {
            let last = *c.queues.last().expect("non-empty route");
            Feed {
                upstream: Upstream::Queue {
                    queue: last,
                    slot: slot_of(&network, last, FlowRef::User(c.user)),
                },
                delay: c.backward_delay(),
            }
        })
        .collect();

    let mut controllers: Vec<Controller> = scenario.users.iter().map(|u| Controller::new(u.protocol.clone())).collect();
    let (users, queues, initial) = match init {
        InitMode::Cold => {
            let users = (0..network.users().len()).map(|_| UserState::new(0.0)).collect();
            let queues = network
                .queues()
                .iter()
                .map(|q| QueueState::new(q.capacity, q.flows.len(), 0.0))
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(block_err("init", 0.0))?;
            (users, queues, None)
        }
        InitMode::Equilibrium => {
            let problem = build_problem(scenario, &network, 0.0, |p| UserLaw::Window(p.initial_window()));
            let eq = equilibrium_queue(&problem)?;
            let users = (0..network.users().len())
                .map(|i| UserState::with_history(0.0, problem.users[i].law_window(), eq.rates[i]))
                .collect();
            let mut queues = Vec::with_capacity(nq);
            for (j, info) in network.queues().iter().enumerate() {
                let mut counts = Vec::with_capacity(info.flows.len());
                let mut rates = Vec::with_capacity(info.flows.len());
                for flow in &info.flows {
                    match *flow {
                        FlowRef::User(i) => {
                            let c = &network.circuits()[i];
                            let h = c.hop_of(j).unwrap();
                            let elapsed = c.forward_offsets[h] + c.queues[..h].iter().map(|&m| eq.tau[m]).sum::<f64>();
                            counts.push(-eq.rates[i] * elapsed);
                            rates.push(eq.rates[i]);
                        }
                        FlowRef::Cross(k) => {
                            counts.push(0.0);
                            rates.push(info.capacity * scenario.cross[k].profile.fraction_at(0.0));
                        }
                    }
                }
                let q = QueueState::with_history(info.capacity, 0.0, eq.q[j], &counts, &rates)
                    .map_err(block_err(format!("init queue {}", info.name), 0.0))?;
                queues.push(q);
            }
            (users, queues, Some(eq))
        }
    };

    let mut run = Run {
        scenario: scenario.clone(),
        network,
        config: *config,
        steps,
        users,
        queues,
        feeds,
        ack_feeds,
        flight: Vec::new(),
        initial,
        elapsed: Duration::ZERO,
    };
    for i in 0..run.users.len() {
        let f = run.flight_size(i, 0.0).map_err(block_err(format!("flight {}", run.user_name(i)), 0.0))?;
        let mut tr = Trajectory::with_capacity(f, steps + 1);
        tr.record(0.0, f).map_err(block_err("flight", 0.0))?;
        run.flight.push(tr);
    }

    let mut acks = vec![0.0; run.users.len()];
    let prop: Vec<f64> = run.network.circuits().iter().map(|c| c.total_delay()).collect();
    for k in 0..steps {
        let t0 = k as f64 * dt;
        let t1 = (k + 1) as f64 * dt;
        for node in &order {
            match *node {
                TickNode::Ack(i) => {
                    let feed = run.ack_feeds[i];
                    acks[i] = run
                        .read(feed, t1)
                        .map_err(block_err(format!("ack {}", run.user_name(i)), t1))?;
                }
                TickNode::Send(i) => {
                    let tau_back = if controllers[i].needs_measurement() {
                        run.tau_back(i, t0)
                            .map_err(block_err(format!("measure {}", run.user_name(i)), t0))?
                    } else {
                        0.0
                    };
                    let w = controllers[i]
                        .advance(t1, dt, tau_back, prop[i])
                        .map_err(block_err(format!("protocol {}", run.user_name(i)), t1))?;
                    run.users[i]
                        .step(t1, w, acks[i])
                        .map_err(block_err(format!("user {}", run.user_name(i)), t1))?;
                }
                TickNode::Queue(j) => {
                    for t in substeps(&run.feeds[j], t0, t1, dt) {
                        let counts = run.feeds[j]
                            .iter()
                            .map(|&f| run.read(f, t))
                            .collect::<Result<Vec<f64>>>()?;
                        let name = &run.network.queues()[j].name;
                        run.queues[j]
                            .step(t, &counts)
                            .map_err(block_err(format!("queue {name}"), t))?;
                    }
                }
            }
        }
        for i in 0..run.users.len() {
            let f = run
                .flight_size(i, t1)
                .map_err(block_err(format!("flight {}", run.user_name(i)), t1))?;
            run.flight[i].record(t1, f).map_err(block_err("flight", t1))?;
        }
    }
    run.elapsed = clock.elapsed();
    Ok(run)
}

/// Sub-cells shorter than this fraction of `dt` are merged.
const SUBSTEP_TOL: f64 = 1e-6;

/// Step ends for one queue cell `(t0, t1]`: upstream counters are linear
/// between grid points, so a delayed feed has its kinks at `k dt + delay`.
/// Stepping the queue there keeps its arrival counters exact.
fn substeps(feeds: &[Feed], t0: f64, t1: f64, dt: f64) -> Vec<f64> {
    let tol = SUBSTEP_TOL * dt;
    let mut cuts: Vec<f64> = feeds
        .iter()
        .filter(|f| f.delay > 0.0 && !matches!(f.upstream, Upstream::Cross(_)))
        .map(|f| (((t0 - f.delay) / dt).floor() + 1.0) * dt + f.delay)
        .filter(|&t| t > t0 + tol && t < t1 - tol)
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|a, b| *a - *b < tol);
    cuts.push(t1);
    cuts
}

fn slot_of(network: &Network, queue: usize, flow: FlowRef) -> usize {
    network.queues()[queue]
        .flows
        .iter()
        .position(|&f| f == flow)
        .expect("flow is attached to the queue")
}

impl EquilibriumUser {
    fn law_window(&self) -> f64 {
        match self.law {
            UserLaw::Window(w) => w,
            UserLaw::Fast { .. } => 0.0,
        }
    }
}

impl Run {
    /// Cumulative count delivered by a feed at `t`.
    fn read(&self, feed: Feed, t: f64) -> Result<f64> {
        let at = t - feed.delay;
        let v = match feed.upstream {
            Upstream::Send(i) => self.users[i].sent().count_at(at).map_err(|e| e.to_string()),
            Upstream::Queue { queue, slot } => self.queues[queue].departed_at(slot, at).map_err(|e| e.to_string()),
            Upstream::Cross(k) => {
                let x = &self.network.cross()[k];
                Ok(self.network.queues()[x.queue].capacity * self.scenario.cross[k].profile.cumulative(at))
            }
        };
        v.map_err(|message| SimError::Block {
            block: "channel read".into(),
            t,
            message,
        })
    }

    fn user_name(&self, i: usize) -> &str {
        &self.network.users()[i].name
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn horizon(&self) -> f64 {
        self.steps as f64 * self.config.dt
    }

    pub fn elapsed(&self) -> Duration {
        self.elapsed
    }

    pub fn users(&self) -> &[UserState] {
        &self.users
    }

    pub fn queues(&self) -> &[QueueState] {
        &self.queues
    }

    /// Fixed point the run was initialized at, if any.
    pub fn initial_equilibrium(&self) -> Option<&Equilibrium> {
        self.initial.as_ref()
    }

    /// Flight size trace of one user, from the backward maps.
    pub fn flight_trace(&self, user: usize) -> &Trajectory {
        &self.flight[user]
    }

    pub fn grid(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.steps).map(move |k| k as f64 * self.config.dt)
    }

    /// `B_C(t)`: send time of what is acknowledged at `t`.
    pub fn backward_composition(&self, user: usize, t: f64) -> std::result::Result<f64, crate::queue::QueueError> {
        let c = &self.network.circuits()[user];
        let mut y = t - c.backward_delay();
        for h in (0..c.queues.len()).rev() {
            y = self.queues[c.queues[h]].backward_time(y)? - c.delays[h];
        }
        Ok(y)
    }

    /// Flight size `S(t) - S(B_C(t))`.
    pub fn flight_size(&self, user: usize, t: f64) -> std::result::Result<f64, crate::queue::QueueError> {
        let b = self.backward_composition(user, t)?;
        Ok(crate::user::flight_size(self.users[user].sent(), b, t)?)
    }

    /// Queueing delay seen by what is acknowledged at `t`, summed along the
    /// circuit: `t - B_C(t) - T`.
    pub fn tau_back(&self, user: usize, t: f64) -> std::result::Result<f64, crate::queue::QueueError> {
        let b = self.backward_composition(user, t)?;
        let total = self.network.circuits()[user].total_delay();
        Ok((t - b - total).max(0.0))
    }

    /// Time-average of `tau` over `[t0, t1]`.
    pub fn mean_tau(&self, queue: usize, t0: f64, t1: f64) -> f64 {
        let q = &self.queues[queue];
        let packets = q.queue_trace().integrate(t0, t1).unwrap_or(f64::NAN);
        packets / (t1 - t0) / q.capacity()
    }

    /// Time-average of `q` over `[t0, t1]`.
    pub fn mean_q(&self, queue: usize, t0: f64, t1: f64) -> f64 {
        self.mean_tau(queue, t0, t1) * self.queues[queue].capacity()
    }

    /// Operator identities on congested grid points with positive input.
    pub fn operator_identities(&self) -> IdentityReport {
        let mut rep = IdentityReport::default();
        let dt = self.config.dt;
        for q in &self.queues {
            let qs = q.queue_trace();
            for (k, (t, len)) in qs.iter().enumerate() {
                if k == 0 || len <= EPS_Q {
                    continue;
                }
                // f must be strictly increasing on both sides of t.
                let before = t - SUBSTEP_TOL * dt;
                let after = t + SUBSTEP_TOL * dt;
                // Rates below this are interpolation round-off, not input.
                let floor = 1e-6 * q.capacity();
                let feeding = |s: f64| q.input_rate_at(s).map(|r| r > floor).unwrap_or(false);
                if !feeding(before) || (t < q.time() && !feeding(after)) {
                    continue;
                }
                if q.mode_trace().eval_hold(before).unwrap_or(0.0) < 0.5 {
                    continue;
                }
                let f = t + len / q.capacity();
                if let Ok(g) = q.backward_time(f) {
                    rep.g_of_f = rep.g_of_f.max((g - t).abs());
                }
                if let Ok(g) = q.backward_time(t) {
                    let tau = q.tau_at(g).unwrap_or(f64::NAN);
                    rep.fixed_point = rep.fixed_point.max((g + tau - t).abs());
                    if let Ok(s) = q.departure_origin(t) {
                        rep.fifo = rep.fifo.max((g - s).abs());
                    }
                }
                rep.points += 1;
            }
        }
        rep
    }

    /// Packet conservation on every grid point.
    pub fn conservation(&self) -> ConservationReport {
        let mut rep = ConservationReport {
            min_in_queue: f64::INFINITY,
            ..Default::default()
        };
        for (i, u) in self.users.iter().enumerate() {
            for (t, f) in self.flight[i].iter() {
                let gap = u.outstanding(t).map(|o| (o - f).abs()).unwrap_or(f64::INFINITY);
                rep.user_gap = rep.user_gap.max(gap);
            }
        }
        for q in &self.queues {
            for (t, len) in q.queue_trace().iter() {
                let mut inside = 0.0;
                for l in 0..q.flows() {
                    let held = q.arrivals(l).count_at(t).unwrap_or(f64::NAN) - q.departures(l).count_at(t).unwrap_or(f64::NAN);
                    rep.min_in_queue = rep.min_in_queue.min(held);
                    inside += held;
                }
                rep.queue_gap = rep.queue_gap.max((inside - len).abs());
            }
        }
        if rep.min_in_queue == f64::INFINITY {
            rep.min_in_queue = 0.0;
        }
        rep
    }

    /// Largest ACK-flow residual of one user, in the integrated form over
    /// each cell: `|dK - (S(B(t1)) - S(B(t0)))| / dt`, packets per second.
    pub fn ack_identity(&self, user: usize) -> f64 {
        let u = &self.users[user];
        let dt = self.config.dt;
        let mut worst: f64 = 0.0;
        let mut prev: Option<(f64, f64)> = None;
        for t in self.grid() {
            let sb = match self.backward_composition(user, t) {
                Ok(b) => u.sent().count_at(b).unwrap_or(f64::NAN),
                Err(_) => f64::NAN,
            };
            let k = u.acked().count_at(t).unwrap_or(f64::NAN);
            if let Some((pk, psb)) = prev {
                let r = ((k - pk) - (sb - psb)).abs() / dt;
                worst = worst.max(if r.is_nan() { f64::INFINITY } else { r });
            }
            prev = Some((k, sb));
        }
        worst
    }

    /// Static-link model comparison. Applies to one shared queue, identical
    /// forward and backward delays, no cross-traffic, a queue congested
    /// throughout and users that never enter ACK-retaining mode.
    pub fn static_link_check(&self) -> StaticLink {
        let na = |s: &str| StaticLink::NotApplicable(s.to_string());
        if self.queues.len() != 1 || self.users.is_empty() {
            return na("needs exactly one queue and at least one user");
        }
        if !self.network.cross().is_empty() {
            return na("cross-traffic present");
        }
        let circuits = self.network.circuits();
        let (tf, tb) = (circuits[0].forward_delay(), circuits[0].backward_delay());
        if circuits
            .iter()
            .any(|c| (c.forward_delay() - tf).abs() > 1e-12 || (c.backward_delay() - tb).abs() > 1e-12)
        {
            return na("heterogeneous propagation delays");
        }
        let q = &self.queues[0];
        if q.queue_trace().iter().any(|(_, v)| v <= EPS_Q) || q.mode_trace().iter().any(|(_, m)| m < 0.5) {
            return na("queue not congested throughout");
        }
        if self.users.iter().any(|u| u.buffer_trace().iter().any(|(_, p)| p != 0.0)) {
            return na("a user entered ACK-retaining mode");
        }
        let c = q.capacity();
        let mut worst = (0.0, 0.0);
        for (t, len) in q.queue_trace().iter() {
            let sum_w: f64 = self
                .users
                .iter()
                .map(|u| u.window_trace().eval(t - tf).unwrap_or(f64::NAN))
                .sum();
            let dev = (len - (sum_w - c * (tf + tb))).abs();
            if !(dev <= worst.0) {
                worst = (dev, t);
            }
        }
        StaticLink::Deviation {
            packets: worst.0,
            at: worst.1,
        }
    }

    /// Every recorded signal on the engine grid.
    pub fn traces(&self) -> TraceSet {
        let mut signals = Vec::new();
        let point = |name: String, unit, trajectory: Trajectory| Signal {
            name,
            unit,
            trajectory,
            hold: false,
        };
        let held = |name: String, unit, trajectory: Trajectory| Signal {
            name,
            unit,
            trajectory,
            hold: true,
        };
        for (j, q) in self.queues.iter().enumerate() {
            let b = &self.network.queues()[j].name;
            signals.push(point(format!("q:{b}"), "pkt", q.queue_trace().clone()));
            let mut tau = Trajectory::new(q.queue_trace().initial_value() / q.capacity());
            for (t, v) in q.queue_trace().iter() {
                tau.record(t, v / q.capacity()).expect("same grid");
            }
            signals.push(point(format!("tau:{b}"), "s", tau));
            signals.push(held(format!("r:{b}"), "pkt/s", q.service_trace().clone()));
            signals.push(held(format!("eta:{b}"), "pkt/s", rate_of(q.total_arrivals().trajectory(), q.total_arrivals().prehistory_rate())));
            for (l, flow) in self.network.queues()[j].flows.iter().enumerate() {
                let who = match *flow {
                    FlowRef::User(i) => self.network.users()[i].name.clone(),
                    FlowRef::Cross(k) => self.network.cross()[k].name.clone(),
                };
                signals.push(held(format!("in:{b}:{who}"), "pkt/s", q.input_trace(l).clone()));
                signals.push(held(
                    format!("out:{b}:{who}"),
                    "pkt/s",
                    rate_of(q.departures(l).trajectory(), q.departures(l).prehistory_rate()),
                ));
            }
        }
        for (i, u) in self.users.iter().enumerate() {
            let n = &self.network.users()[i].name;
            signals.push(point(format!("w:{n}"), "pkt", u.window_trace().clone()));
            signals.push(point(format!("pi:{n}"), "pkt", u.buffer_trace().clone()));
            signals.push(point(format!("flight:{n}"), "pkt", self.flight[i].clone()));
            signals.push(held(format!("send:{n}"), "pkt/s", u.sending_trace().clone()));
            signals.push(held(format!("ack:{n}"), "pkt/s", u.ack_trace().clone()));
            signals.push(point(format!("active:{n}"), "1", u.active_trace().clone()));
        }
        TraceSet {
            times: self.grid().collect(),
            signals,
        }
    }
}

/// Cell-average rates of a cumulative counter, one sample per cell start.
fn rate_of(counter: &Trajectory, initial: f64) -> Trajectory {
    let mut out = Trajectory::with_capacity(initial, counter.len());
    for w in counter.times().windows(2).zip(counter.values().windows(2)) {
        let (ts, vs) = w;
        out.record(ts[0], (vs[1] - vs[0]) / (ts[1] - ts[0])).expect("increasing grid");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::WindowSchedule;
    use crate::scenario::{parse_scenario, QueueSpec, RunSettings, UserSpec};
    use crate::topology::ChannelDecl;

    fn single(w: f64, steps: Vec<(f64, f64)>, c: f64, tf: f64, tb: f64, horizon: f64, init: InitMode) -> Scenario {
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
                dt: 1e-3,
                horizon,
                init,
            },
        }
    }

    #[test]
    fn ample_capacity_gives_window_over_rtt() {
        let s = single(10.0, vec![], 1000.0, 0.05, 0.05, 2.0, InitMode::Equilibrium);
        let run = simulate(&s, &SimConfig::from_scenario(&s)).unwrap();
        let u = &run.users()[0];
        assert!((u.sent().passed(2.0, 1.0).unwrap() - 100.0).abs() < 1e-6);
        assert_eq!(run.queues()[0].q(), 0.0);
        assert!((run.flight_trace(0).last_value().unwrap() - 10.0).abs() < 1e-9);
    }

    #[test]
    fn cold_start_settles_at_window_over_rtt() {
        let s = single(10.0, vec![], 1000.0, 0.05, 0.05, 2.0, InitMode::Cold);
        let run = simulate(&s, &SimConfig::from_scenario(&s)).unwrap();
        let u = &run.users()[0];
        assert!((u.sent().passed(2.0, 1.0).unwrap() - 100.0).abs() < 1e-6);
        let cons = run.conservation();
        assert!(cons.user_gap < 1e-6, "{cons:?}");
    }

    #[test]
    fn congested_single_user_matches_closed_form() {
        // w = 100, T = 0.1, c = 500: tau = w / c - T = 0.1.
        let s = single(100.0, vec![], 500.0, 0.05, 0.05, 3.0, InitMode::Cold);
        let run = simulate(&s, &SimConfig::from_scenario(&s)).unwrap();
        let tau = run.mean_tau(0, 2.5, 3.0);
        assert!((tau - 0.1).abs() < 1e-3, "{tau}");
    }

    #[test]
    fn static_link_single_user_constant_window() {
        let s = single(100.0, vec![], 500.0, 0.02, 0.03, 1.0, InitMode::Equilibrium);
        let run = simulate(&s, &SimConfig::from_scenario(&s)).unwrap();
        match run.static_link_check() {
            StaticLink::Deviation { packets, .. } => assert!(packets < 1e-6, "{packets}"),
            other => panic!("{other:?}"),
        }
        // tau = (w - c T) / c.
        assert!((run.queues()[0].tau() - (100.0 - 500.0 * 0.05) / 500.0).abs() < 1e-9);
    }

    #[test]
    fn halving_silences_the_sender() {
        let s = single(500.0, vec![(1.0, 250.0)], 1000.0, 0.075, 0.075, 2.0, InitMode::Equilibrium);
        let run = simulate(&s, &SimConfig::from_scenario(&s)).unwrap();
        let u = &run.users()[0];
        assert!(u.buffer_trace().iter().all(|(_, p)| p <= 0.0));
        // The drop shares its cell with one cell of ACKs at c.
        assert!((u.buffer_trace().eval(1.0).unwrap() + 249.0).abs() < 1e-9);
        let resume = u.resumes()[0];
        assert!((resume - 1.249).abs() < 1e-9, "{resume}");
        for (t, v) in u.sending_trace().iter() {
            if t >= 1.0 - 1e-9 && t < resume - 1e-3 {
                assert_eq!(v, 0.0, "sending at {t}");
            }
        }
        assert!(matches!(run.static_link_check(), StaticLink::NotApplicable(_)));
    }

    #[test]
    fn zero_traffic_stays_zero() {
        let s = single(0.0, vec![], 100.0, 0.01, 0.01, 0.5, InitMode::Cold);
        let run = simulate(&s, &SimConfig::from_scenario(&s)).unwrap();
        let traces = run.traces();
        for sig in &traces.signals {
            if sig.name.starts_with("active") {
                continue;
            }
            assert!(sig.trajectory.iter().all(|(_, v)| v == 0.0), "{}", sig.name);
        }
    }

    #[test]
    fn deterministic() {
        let s = single(120.0, vec![(0.3, 80.0), (0.6, 200.0)], 500.0, 0.02, 0.03, 1.0, InitMode::Equilibrium);
        let a = simulate(&s, &SimConfig::from_scenario(&s)).unwrap().traces();
        let b = simulate(&s, &SimConfig::from_scenario(&s)).unwrap().traces();
        for (x, y) in a.signals.iter().zip(&b.signals) {
            assert_eq!(x.trajectory, y.trajectory, "{}", x.name);
        }
    }

    #[test]
    fn dt_must_resolve_channels() {
        let s = single(10.0, vec![], 100.0, 0.001, 0.001, 0.1, InitMode::Cold);
        let cfg = SimConfig {
            dt: 1e-3,
            ..SimConfig::from_scenario(&s)
        };
        assert!(matches!(simulate(&s, &cfg), Err(SimError::Config(_))));
    }

    #[test]
    fn cross_traffic_attaches_without_users() {
        let text = r#"
name = "x"
[[queue]]
name = "b"
capacity_pps = 100
[[cross_traffic]]
name = "x"
queue = "b"
profile = { kind = "constant", fraction = 1.5 }
[run]
dt_s = 0.01
horizon_s = 1.0
init = "cold"
"#;
        let s = parse_scenario(text).unwrap();
        let run = simulate(&s, &SimConfig::from_scenario(&s)).unwrap();
        assert!((run.queues()[0].q() - 50.0).abs() < 1e-9);
    }
}
