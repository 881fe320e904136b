//! Lossless constant-delay channels.
//!
//! A channel only shifts its input in time, so it has no state of its own:
//! everything is a delayed read of the upstream history.

use crate::history::{PacketCounter, Result, Trajectory};

/// `phi(eps(E), t) = phi(beta(E), t - T)`.
pub fn channel_output(input: &Trajectory, delay: f64, t: f64) -> Result<f64> {
    input.eval(t - delay)
}

/// Packets inside the channel at `t`: the input integrated over `[t - T, t]`.
pub fn channel_in_transit(input: &Trajectory, delay: f64, t: f64) -> Result<f64> {
    input.integrate(t - delay, t)
}

/// Cumulative count at the channel output, `N_out(t) = N_in(t - T)`.
pub fn delayed_count(input: &PacketCounter, delay: f64, t: f64) -> Result<f64> {
    input.count_at(t - delay)
}
