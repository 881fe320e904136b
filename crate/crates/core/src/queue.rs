//! FIFO integrator queue.
//!
//! Input flows are cell averages: the arrival counter of every flow is known
//! on the engine grid and is linear in between. Under that zero-order hold
//! the queue length is exactly `q' = max(q + (lambda - c) dt, 0)`, with the
//! emptying instant located inside the cell when it happens.
//!
//! Per-flow departures are kept in counter form: everything that left by `t`
//! arrived before the time `s` at which the aggregate arrival counter reaches
//! the aggregate departure count, so `D_l(t) = A_l(s)`. This is the integrated
//! form of the output flow separation and conserves packets per flow exactly.
//! The pointwise forms (`backward_rate`, `output_flows`) read the same
//! histories.

use thiserror::Error;

use crate::history::{HistoryError, PacketCounter, Trajectory};

/// A queue holding at most this many packets counts as empty.
pub const EPS_Q: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QueueError {
    #[error(transparent)]
    History(#[from] HistoryError),
    #[error("negative input on flow {flow} at t = {t}: {value} packets")]
    NegativeInput { flow: usize, t: f64, value: f64 },
    #[error("expected {expected} input flows, got {got}")]
    FlowCount { expected: usize, got: usize },
    #[error("step from t = {from} to t = {to} is not forward in time")]
    BadStep { from: f64, to: f64 },
    #[error("invertibility violation at t = {t}: queue congested with zero total input")]
    InvertibilityViolation { t: f64 },
    #[error("bad initial state: {0}")]
    BadInit(String),
}

pub type Result<T> = std::result::Result<T, QueueError>;

/// What happened during one [`QueueState::step`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    /// Packets that left the queue during the cell.
    pub departed: f64,
    /// Total input rate over the cell.
    pub input_rate: f64,
    /// Mode of the cell per the congestion predicate.
    pub congested: bool,
    /// Instant at which the queue ran empty inside the cell.
    pub emptied_at: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct QueueState {
    capacity: f64,
    q: f64,
    time: f64,
    tau0: f64,
    forward: Trajectory,
    queue_len: Trajectory,
    service: Trajectory,
    mode: Trajectory,
    inputs: Vec<Trajectory>,
    arrivals: Vec<PacketCounter>,
    total_arrivals: PacketCounter,
    total_departures: PacketCounter,
    departures: Vec<PacketCounter>,
    stalls: Vec<f64>,
}

impl QueueState {
    /// Empty queue with `flows` idle inputs at `start`.
    pub fn new(capacity: f64, flows: usize, start: f64) -> Result<Self> {
        Self::with_history(capacity, start, 0.0, &vec![0.0; flows], &vec![0.0; flows])
    }

    /// Queue holding `q0` packets at `start` after a constant past: flow `l`
    /// has arrived `counts[l]` packets by `start` at constant rate `rates[l]`.
    pub fn with_history(
        capacity: f64,
        start: f64,
        q0: f64,
        counts: &[f64],
        rates: &[f64],
    ) -> Result<Self> {
        if !(capacity.is_finite() && capacity > 0.0) {
            return Err(QueueError::BadInit(format!("capacity {capacity}")));
        }
        if counts.len() != rates.len() {
            return Err(QueueError::FlowCount {
                expected: counts.len(),
                got: rates.len(),
            });
        }
        if !(q0.is_finite() && q0 >= 0.0) || rates.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
            return Err(QueueError::BadInit(format!("q0 = {q0}, rates = {rates:?}")));
        }
        let q0 = if q0 <= EPS_Q { 0.0 } else { q0 };
        let tau0 = q0 / capacity;
        let total_rate: f64 = rates.iter().sum();
        let total_count: f64 = counts.iter().sum();
        let congested = q0 > EPS_Q || total_rate > capacity;
        let out_rate = if congested { capacity } else { total_rate };

        let mut forward = Trajectory::new(start + tau0);
        forward.record(start, start + tau0)?;
        let mut queue_len = Trajectory::new(q0);
        queue_len.record(start, q0)?;
        let arrivals: Vec<PacketCounter> = counts
            .iter()
            .zip(rates)
            .map(|(&n, &r)| PacketCounter::new(start, n, r))
            .collect();
        let departures = counts
            .iter()
            .zip(rates)
            .map(|(&n, &r)| PacketCounter::new(start, n - r * tau0, r))
            .collect();
        Ok(Self {
            capacity,
            q: q0,
            time: start,
            tau0,
            forward,
            queue_len,
            service: Trajectory::new(out_rate),
            mode: Trajectory::new(if congested { 1.0 } else { 0.0 }),
            inputs: rates.iter().map(|&r| Trajectory::new(r)).collect(),
            arrivals,
            total_arrivals: PacketCounter::new(start, total_count, total_rate),
            total_departures: PacketCounter::new(start, total_count - q0, out_rate),
            departures,
            stalls: Vec::new(),
        })
    }

    pub fn capacity(&self) -> f64 {
        self.capacity
    }

    pub fn flows(&self) -> usize {
        self.arrivals.len()
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn tau(&self) -> f64 {
        self.q / self.capacity
    }

    /// Congestion flag at the current time from the queue content alone; the
    /// input clause is decided per cell by [`QueueState::step`].
    pub fn congested(&self) -> bool {
        self.q > EPS_Q
    }

    /// Samples `(t, t + tau(t))` of the forward map.
    pub fn forward(&self) -> &Trajectory {
        &self.forward
    }

    pub fn queue_trace(&self) -> &Trajectory {
        &self.queue_len
    }

    /// Aggregate output rate, one cell average per cell start.
    pub fn service_trace(&self) -> &Trajectory {
        &self.service
    }

    /// 1 for congested cells, 0 otherwise, one sample per cell start.
    pub fn mode_trace(&self) -> &Trajectory {
        &self.mode
    }

    /// Input rate of one flow, one cell average per cell start.
    pub fn input_trace(&self, flow: usize) -> &Trajectory {
        &self.inputs[flow]
    }

    pub fn arrivals(&self, flow: usize) -> &PacketCounter {
        &self.arrivals[flow]
    }

    pub fn departures(&self, flow: usize) -> &PacketCounter {
        &self.departures[flow]
    }

    pub fn total_arrivals(&self) -> &PacketCounter {
        &self.total_arrivals
    }

    pub fn total_departures(&self) -> &PacketCounter {
        &self.total_departures
    }

    /// Cell start times where the queue was congested with no input at all,
    /// i.e. where the forward map is flat and not invertible.
    pub fn stalls(&self) -> &[f64] {
        &self.stalls
    }

    /// Advances to `t_next` given every flow's cumulative arrival count at
    /// `t_next`.
    pub fn step(&mut self, t_next: f64, counts: &[f64]) -> Result<StepOutcome> {
        let dt = t_next - self.time;
        if !(dt > 0.0) || !t_next.is_finite() {
            return Err(QueueError::BadStep {
                from: self.time,
                to: t_next,
            });
        }
        if counts.len() != self.arrivals.len() {
            return Err(QueueError::FlowCount {
                expected: self.arrivals.len(),
                got: counts.len(),
            });
        }
        let mut increments = Vec::with_capacity(counts.len());
        for (l, (&n, a)) in counts.iter().zip(&self.arrivals).enumerate() {
            let last = a.last_count();
            let inc = n - last;
            if !inc.is_finite() || inc < -1e-9 * last.abs().max(1.0) {
                return Err(QueueError::NegativeInput {
                    flow: l,
                    t: t_next,
                    value: inc,
                });
            }
            increments.push(inc.max(0.0));
        }
        let total: f64 = increments.iter().sum();
        let lambda = total / dt;
        let c = self.capacity;
        let congested = self.q > EPS_Q || lambda > c;
        let (q_next, emptied_at) = if !congested {
            (0.0, None)
        } else {
            let raw = self.q + (lambda - c) * dt;
            if raw > EPS_Q {
                (raw, None)
            } else if self.q > EPS_Q {
                (0.0, Some(self.time + self.q / (c - lambda)))
            } else {
                (0.0, None)
            }
        };
        let departed = (self.q + total - q_next).max(0.0);

        for (l, inc) in increments.iter().enumerate() {
            self.inputs[l].record(self.time, inc / dt)?;
            let n = self.arrivals[l].last_count() + inc;
            self.arrivals[l].record(t_next, n)?;
        }
        self.mode.record(self.time, if congested { 1.0 } else { 0.0 })?;
        // Round-off over a short sub-cell can push the rate past c.
        self.service.record(self.time, (departed / dt).min(c))?;
        if congested && total == 0.0 {
            self.stalls.push(self.time);
        }
        let n = self.total_arrivals.last_count() + total;
        self.total_arrivals.record(t_next, n)?;
        let d0 = self.total_departures.last_count();
        // The forward map and the departure counter have a kink where the
        // queue runs empty; keep it so both stay exact inside the cell.
        if let Some(e) = emptied_at.filter(|&e| e > self.time && e < t_next) {
            self.total_departures.record(e, d0 + self.q + lambda * (e - self.time))?;
            self.forward.record(e, e)?;
        }
        let d = d0 + departed;
        self.total_departures.record(t_next, d)?;

        self.q = q_next;
        self.time = t_next;
        self.forward.record(t_next, t_next + q_next / c)?;
        self.queue_len.record(t_next, q_next)?;
        let s = self.arrival_time_of(d)?;
        for l in 0..self.arrivals.len() {
            let n = self.arrivals[l].count_at(s)?;
            // Interpolation rounding must not make a counter step backwards.
            let n = n.max(self.departures[l].last_count());
            self.departures[l].record(t_next, n)?;
        }
        Ok(StepOutcome {
            departed,
            input_rate: lambda,
            congested,
            emptied_at,
        })
    }

    /// [`QueueState::step`] with constant input rates over `dt`.
    pub fn step_rates(&mut self, dt: f64, rates: &[f64]) -> Result<StepOutcome> {
        if rates.len() != self.arrivals.len() {
            return Err(QueueError::FlowCount {
                expected: self.arrivals.len(),
                got: rates.len(),
            });
        }
        let counts: Vec<f64> = self
            .arrivals
            .iter()
            .zip(rates)
            .map(|(a, &r)| a.last_count() + r * dt)
            .collect();
        self.step(self.time + dt, &counts)
    }

    /// Time at which the aggregate arrival counter reaches `level`; left edge
    /// where the counter is flat.
    fn arrival_time_of(&self, level: f64) -> Result<f64> {
        let tr = self.total_arrivals.trajectory();
        let (t0, n0) = (tr.times()[0], tr.values()[0]);
        if level < n0 {
            let rate = self.total_arrivals.prehistory_rate();
            return Ok(if rate > 0.0 { t0 - (n0 - level) / rate } else { t0 });
        }
        let hi = self.total_arrivals.last_count();
        if level > hi {
            if level - hi <= 1e-9 * hi.abs().max(1.0) {
                return Ok(self.time);
            }
            return Err(HistoryError::OutOfRange { y: level, lo: n0, hi }.into());
        }
        Ok(tr.invert_monotone(level)?)
    }

    /// Arrival time of the last packet to have departed by `t`.
    pub fn departure_origin(&self, t: f64) -> Result<f64> {
        let level = self.total_departures.count_at(t)?;
        self.arrival_time_of(level)
    }

    /// Cumulative departures of one flow at any `t` up to the current time.
    pub fn departed_at(&self, flow: usize, t: f64) -> Result<f64> {
        let level = self.total_departures.count_at(t)?;
        let s = self.arrival_time_of(level)?;
        Ok(self.arrivals[flow].count_at(s)?)
    }

    /// Queue length at `t`, linear between grid points.
    pub fn q_at(&self, t: f64) -> Result<f64> {
        Ok(self.queue_len.eval(t)?)
    }

    /// `tau(t)`, read off the forward map so that it keeps the emptying
    /// kinks the grid trace of `q` does not have.
    pub fn tau_at(&self, t: f64) -> Result<f64> {
        if t < self.forward.times()[0] {
            return Ok(self.tau0);
        }
        Ok(self.forward.eval(t)? - t)
    }

    /// `f(t) = t + tau(t)`.
    pub fn forward_time(&self, t: f64) -> Result<f64> {
        Ok(t + self.tau_at(t)?)
    }

    /// `g(t)`, the arrival time of what leaves at `t`.
    pub fn backward_time(&self, t: f64) -> Result<f64> {
        let first = self.forward.values()[0];
        if t < first {
            return Ok(t - self.tau0);
        }
        match self.forward.invert_monotone(t) {
            Err(HistoryError::OutOfRange { y, hi, .. }) if y > hi => Err(HistoryError::FutureRead {
                t,
                last: self.time,
            }
            .into()),
            other => Ok(other?),
        }
    }

    /// Hold read of a cell-average input; at or past the last sample this is
    /// the left limit at the current time.
    fn input_at(&self, flow: usize, s: f64) -> Result<f64> {
        let tr = &self.inputs[flow];
        match tr.last_time() {
            Some(last) if s >= last => Ok(tr.last_value().unwrap()),
            _ => Ok(tr.eval_hold(s)?),
        }
    }

    fn congested_at(&self, s: f64) -> Result<bool> {
        let v = match self.mode.last_time() {
            Some(last) if s >= last => self.mode.last_value().unwrap(),
            _ => self.mode.eval_hold(s)?,
        };
        Ok(v > 0.5)
    }

    /// Total input rate at `s`.
    pub fn input_rate_at(&self, s: f64) -> Result<f64> {
        let mut total = 0.0;
        for l in 0..self.inputs.len() {
            total += self.input_at(l, s)?;
        }
        Ok(total)
    }

    /// Right derivative of `g`: `c / sum(phi(b-, g(t)))` when congested at
    /// `g(t)`, 1 otherwise.
    pub fn backward_rate(&self, t: f64) -> Result<f64> {
        let s = self.backward_time(t)?;
        if !self.congested_at(s)? {
            return Ok(1.0);
        }
        let total = self.input_rate_at(s)?;
        if total <= 0.0 {
            return Err(QueueError::InvertibilityViolation { t });
        }
        Ok(self.capacity / total)
    }

    /// Per-flow output rates at `t`: `g'(t) phi_l(b-, g(t))`.
    pub fn output_flows(&self, t: f64) -> Result<Vec<f64>> {
        let s = self.backward_time(t)?;
        let rate = self.backward_rate(t)?;
        (0..self.inputs.len())
            .map(|l| Ok(rate * self.input_at(l, s)?))
            .collect()
    }
}
