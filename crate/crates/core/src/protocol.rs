//! Window controllers: fixed schedules and the continuous FAST model.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A step scheduled at `t_s` counts as applied for reads at `t_s - STEP_TOL`
/// or later, so grid times computed as `k * dt` still hit it.
pub const STEP_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProtocolError {
    #[error("FAST needs gamma > 0 and alpha > 0, got gamma = {gamma}, alpha = {alpha}")]
    BadFastParams { gamma: f64, alpha: f64 },
    #[error("FAST needs a positive propagation delay, got {0}")]
    BadDelay(f64),
    #[error("window schedule times must be strictly increasing ({prev} then {next})")]
    UnorderedSchedule { prev: f64, next: f64 },
    #[error("window {0} is negative or not finite")]
    BadWindow(f64),
}

pub type Result<T> = std::result::Result<T, ProtocolError>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FastParams {
    pub gamma: f64,
    /// Packets the user aims to keep queued.
    pub alpha: f64,
}

impl FastParams {
    pub fn new(gamma: f64, alpha: f64) -> Result<Self> {
        if !(gamma > 0.0 && alpha > 0.0 && gamma.is_finite() && alpha.is_finite()) {
            return Err(ProtocolError::BadFastParams { gamma, alpha });
        }
        Ok(Self { gamma, alpha })
    }
}

/// `gamma (-tau / (T + tau) w + alpha)`.
pub fn fast_wdot(w: f64, tau_back: f64, prop_delay: f64, params: FastParams) -> Result<f64> {
    if !(prop_delay > 0.0) {
        return Err(ProtocolError::BadDelay(prop_delay));
    }
    let tau = tau_back.max(0.0);
    Ok(params.gamma * (-tau / (prop_delay + tau) * w + params.alpha))
}

/// Piecewise-constant window.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSchedule {
    initial: f64,
    steps: Vec<(f64, f64)>,
}

impl WindowSchedule {
    /// `steps` are `(time, new window)` pairs.
    pub fn new(initial: f64, steps: Vec<(f64, f64)>) -> Result<Self> {
        if !(initial.is_finite() && initial >= 0.0) {
            return Err(ProtocolError::BadWindow(initial));
        }
        for pair in steps.windows(2) {
            if !(pair[1].0 > pair[0].0) {
                return Err(ProtocolError::UnorderedSchedule {
                    prev: pair[0].0,
                    next: pair[1].0,
                });
            }
        }
        if let Some(&(_, w)) = steps.iter().find(|(_, w)| !(w.is_finite() && *w >= 0.0)) {
            return Err(ProtocolError::BadWindow(w));
        }
        Ok(Self { initial, steps })
    }

    pub fn constant(w: f64) -> Result<Self> {
        Self::new(w, Vec::new())
    }

    pub fn initial(&self) -> f64 {
        self.initial
    }

    pub fn steps(&self) -> &[(f64, f64)] {
        &self.steps
    }

    pub fn window_at(&self, t: f64) -> f64 {
        let n = self.steps.partition_point(|&(at, _)| at <= t + STEP_TOL);
        if n == 0 {
            self.initial
        } else {
            self.steps[n - 1].1
        }
    }

    /// Window at `t` and the jump of the steps falling in the cell
    /// `(t - dt, t]`, if any. Between steps the derivative is zero.
    pub fn scheduled_wdot(&self, t: f64, dt: f64) -> (f64, Option<f64>) {
        let w = self.window_at(t);
        let before = self.window_at(t - dt);
        let jump = (w != before).then_some(w - before);
        (w, jump)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Protocol {
    Schedule(WindowSchedule),
    Fast { params: FastParams, initial: f64 },
}

impl Protocol {
    pub fn initial_window(&self) -> f64 {
        match self {
            Protocol::Schedule(s) => s.initial(),
            Protocol::Fast { initial, .. } => *initial,
        }
    }
}

/// Protocol plus its internal state.
#[derive(Debug, Clone)]
pub struct Controller {
    protocol: Protocol,
    z: f64,
}

impl Controller {
    pub fn new(protocol: Protocol) -> Self {
        let z = protocol.initial_window();
        Self { protocol, z }
    }

    pub fn protocol(&self) -> &Protocol {
        &self.protocol
    }

    /// True when the window depends on measurements.
    pub fn needs_measurement(&self) -> bool {
        matches!(self.protocol, Protocol::Fast { .. })
    }

    /// Window at `t_next`, one explicit step of length `dt` from the current
    /// state using the measurement taken at the start of the step.
    pub fn advance(&mut self, t_next: f64, dt: f64, tau_back: f64, prop_delay: f64) -> Result<f64> {
        match &self.protocol {
            Protocol::Schedule(s) => {
                self.z = s.window_at(t_next);
            }
            Protocol::Fast { params, .. } => {
                let wdot = fast_wdot(self.z, tau_back, prop_delay, *params)?;
                self.z = (self.z + dt * wdot).max(0.0);
            }
        }
        Ok(self.z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fast_examples() {
        let p = FastParams::new(0.5, 200.0).unwrap();
        assert_eq!(fast_wdot(1000.0, 0.0, 0.1, p).unwrap(), 100.0);
        let v = fast_wdot(1000.0, 0.01, 0.1, p).unwrap();
        assert!((v - 0.5 * (-1000.0 / 11.0 + 200.0)).abs() < 1e-12);
        assert!((v - 54.545454).abs() < 1e-5);
        assert!(fast_wdot(10.0, 0.0, 0.0, p).is_err());
        assert!(FastParams::new(0.0, 1.0).is_err());
    }

    #[test]
    fn fast_sign_flips_at_equilibrium_window() {
        let p = FastParams::new(0.5, 200.0).unwrap();
        let (tau, t) = (0.04, 0.1);
        let w_star = p.alpha * (t + tau) / tau;
        assert!(fast_wdot(w_star, tau, t, p).unwrap().abs() < 1e-9);
        assert!(fast_wdot(w_star - 1.0, tau, t, p).unwrap() > 0.0);
        assert!(fast_wdot(w_star + 1.0, tau, t, p).unwrap() < 0.0);
        // Affine in w.
        let a = fast_wdot(0.0, tau, t, p).unwrap();
        let b = fast_wdot(100.0, tau, t, p).unwrap();
        let c = fast_wdot(200.0, tau, t, p).unwrap();
        assert!((c - b - (b - a)).abs() < 1e-9);
    }

    #[test]
    fn schedules() {
        let s = WindowSchedule::new(50.0, vec![(3.0, 150.0)]).unwrap();
        assert_eq!(s.window_at(2.9999), 50.0);
        assert_eq!(s.window_at(3.0), 150.0);
        assert_eq!(s.scheduled_wdot(3.0, 1e-4), (150.0, Some(100.0)));
        assert_eq!(s.scheduled_wdot(3.0001, 1e-4), (150.0, None));
        assert_eq!(s.scheduled_wdot(1.0, 1e-4), (50.0, None));

        let halve = WindowSchedule::new(500.0, vec![(5.0, 250.0)]).unwrap();
        assert_eq!(halve.scheduled_wdot(5.0, 1e-4), (250.0, Some(-250.0)));

        let flat = WindowSchedule::constant(10.0).unwrap();
        for k in 0..100 {
            assert_eq!(flat.scheduled_wdot(k as f64 * 0.1, 0.1), (10.0, None));
        }
        assert!(WindowSchedule::new(1.0, vec![(2.0, 1.0), (2.0, 3.0)]).is_err());
    }

    #[test]
    fn step_lands_on_grid_time() {
        let s = WindowSchedule::new(50.0, vec![(3.0, 150.0)]).unwrap();
        let dt = 1e-4;
        let hits: Vec<usize> = (1..=40000)
            .filter(|&k| s.scheduled_wdot(k as f64 * dt, dt).1.is_some())
            .collect();
        assert_eq!(hits, vec![30000]);
    }
}
