//! Window-to-flow conversion under ACK-clocking.
//!
//! While the user is active it sends what comes back plus what the window
//! grows by. When the window shrinks faster than ACKs arrive the difference
//! goes into a virtual ACK buffer `pi <= 0`, and sending stays off until
//! enough ACKs have been absorbed to bring `pi` back to zero.
//!
//! The engine works with cell budgets: over one cell the window changes by
//! `dw` and `dk` ACKs arrive, so `dw + dk` packets may be sent once `pi` has
//! been refilled. [`absorb`] is that rule; the rate forms below are the same
//! thing per unit time.

use crate::history::{PacketCounter, Result, Trajectory};

/// `T_i(t) = [pi = 0] and [wdot + ack >= 0]`.
pub fn is_active(pi: f64, wdot: f64, ack_rate: f64) -> bool {
    pi == 0.0 && wdot + ack_rate >= 0.0
}

/// Sending rate: `wdot + ack` when active, 0 otherwise.
pub fn sending_flow(pi: f64, wdot: f64, ack_rate: f64) -> f64 {
    if is_active(pi, wdot, ack_rate) {
        wdot + ack_rate
    } else {
        0.0
    }
}

/// `d pi / dt`: 0 when active, `wdot + ack` otherwise.
pub fn ack_buffer_rate(pi: f64, wdot: f64, ack_rate: f64) -> f64 {
    if is_active(pi, wdot, ack_rate) {
        0.0
    } else {
        wdot + ack_rate
    }
}

/// Result of spending a budget against the ACK buffer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Absorb {
    pub pi: f64,
    /// Packets sent.
    pub sent: f64,
    /// Fraction of the budget spent refilling `pi` before sending resumed,
    /// when that happened inside this budget.
    pub resumed_at: Option<f64>,
}

/// Spends `budget` packets (window change plus ACKs received) against the
/// buffer `pi`. A negative budget, such as a window drop, deepens `pi`.
pub fn absorb(pi: f64, budget: f64) -> Absorb {
    let level = pi + budget;
    let resumed_at = if pi < 0.0 && level > 0.0 {
        Some(-pi / budget)
    } else {
        None
    };
    Absorb {
        pi: level.min(0.0),
        sent: level.max(0.0),
        resumed_at,
    }
}

/// One step of the buffer with constant `wdot` and ACK rate over `dt`; the
/// buffer is clamped at zero and the rest of the step is spent sending.
pub fn ack_buffer_step(pi: f64, wdot: f64, ack_rate: f64, dt: f64) -> Absorb {
    absorb(pi, (wdot + ack_rate) * dt)
}

/// Instantaneous window change `dw`: a rise is a burst, a drop goes into
/// the buffer.
pub fn window_impulse(pi: f64, dw: f64) -> Absorb {
    absorb(pi, dw)
}

/// Flight size from the sending counter: packets sent in `[b, t]` where `b`
/// is the circuit's backward time of `t`.
pub fn flight_size(sent: &PacketCounter, backward: f64, t: f64) -> Result<f64> {
    sent.passed(t, backward)
}

/// Pointwise ACK-flow residual `|ack - B' phi(u+, B)|`.
pub fn ack_identity_residual(ack_rate: f64, backward_rate: f64, sending_at_backward: f64) -> f64 {
    (ack_rate - backward_rate * sending_at_backward).abs()
}

/// State of one user.
#[derive(Debug, Clone)]
pub struct UserState {
    w: f64,
    pi: f64,
    time: f64,
    sent: PacketCounter,
    acked: PacketCounter,
    sending: Trajectory,
    ack: Trajectory,
    window: Trajectory,
    buffer: Trajectory,
    active: Trajectory,
    resumes: Vec<f64>,
}

impl UserState {
    /// Idle user: nothing sent, window not yet opened.
    pub fn new(start: f64) -> Self {
        Self::with_history(start, 0.0, 0.0)
    }

    /// User that has been sending at `rate` with `w` packets in flight.
    pub fn with_history(start: f64, w: f64, rate: f64) -> Self {
        let mut window = Trajectory::new(w);
        window.record(start, w).expect("finite start");
        let mut buffer = Trajectory::new(0.0);
        buffer.record(start, 0.0).expect("finite start");
        let mut active = Trajectory::new(1.0);
        active.record(start, 1.0).expect("finite start");
        Self {
            w,
            pi: 0.0,
            time: start,
            sent: PacketCounter::new(start, 0.0, rate),
            acked: PacketCounter::new(start, -w, rate),
            sending: Trajectory::new(rate),
            ack: Trajectory::new(rate),
            window,
            buffer,
            active,
            resumes: Vec::new(),
        }
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn w(&self) -> f64 {
        self.w
    }

    pub fn pi(&self) -> f64 {
        self.pi
    }

    pub fn is_active(&self) -> bool {
        self.pi == 0.0
    }

    pub fn sent(&self) -> &PacketCounter {
        &self.sent
    }

    pub fn acked(&self) -> &PacketCounter {
        &self.acked
    }

    /// Sending rate, one cell average per cell start.
    pub fn sending_trace(&self) -> &Trajectory {
        &self.sending
    }

    /// ACK rate, one cell average per cell start.
    pub fn ack_trace(&self) -> &Trajectory {
        &self.ack
    }

    pub fn window_trace(&self) -> &Trajectory {
        &self.window
    }

    pub fn buffer_trace(&self) -> &Trajectory {
        &self.buffer
    }

    pub fn active_trace(&self) -> &Trajectory {
        &self.active
    }

    /// Times at which sending resumed after the buffer refilled.
    pub fn resumes(&self) -> &[f64] {
        &self.resumes
    }

    /// Sent minus acknowledged.
    pub fn outstanding(&self, t: f64) -> Result<f64> {
        Ok(self.sent.count_at(t)? - self.acked.count_at(t)?)
    }

    /// Advances one cell to `t_next`, where the window is `w_next` and the
    /// ACK counter reads `acked_next`.
    pub fn step(&mut self, t_next: f64, w_next: f64, acked_next: f64) -> Result<Absorb> {
        let dt = t_next - self.time;
        let dk = (acked_next - self.acked.last_count()).max(0.0);
        let out = absorb(self.pi, (w_next - self.w) + dk);
        if let Some(frac) = out.resumed_at {
            self.resumes.push(self.time + frac * dt);
        }
        self.sending.record(self.time, out.sent / dt)?;
        self.ack.record(self.time, dk / dt)?;
        let s = self.sent.last_count() + out.sent;
        self.sent.record(t_next, s)?;
        let k = self.acked.last_count() + dk;
        self.acked.record(t_next, k)?;
        self.w = w_next;
        self.pi = out.pi;
        self.time = t_next;
        self.window.record(t_next, w_next)?;
        self.buffer.record(t_next, out.pi)?;
        self.active.record(t_next, if out.pi == 0.0 { 1.0 } else { 0.0 })?;
        Ok(out)
    }
}
