//! Sampled signal histories.
//!
//! A [`Trajectory`] is an append-only list of `(time, value)` samples with a
//! constant pre-history. It answers the delayed reads, integrals and
//! monotone-map inversions the delay operators need. A [`PacketCounter`]
//! wraps a cumulative packet count `N_x(t)` so that `N_x(t, t0)` is a plain
//! difference.

use thiserror::Error;

/// Reads this far past the last sample are clamped onto it. Grid times are
/// computed as `k * dt`, so a delayed read at `t - d` can land a few ulps
/// after the sample it is meant to hit.
pub const CAUSALITY_SLACK: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HistoryError {
    #[error("sample at t = {t} does not come after the last sample at t = {last} (engine ordering bug)")]
    NonMonotone { t: f64, last: f64 },
    #[error("non-finite sample ({value}) at t = {t}")]
    NonFinite { t: f64, value: f64 },
    #[error("read at t = {t} is in the future of the last sample at t = {last} (causality violation)")]
    FutureRead { t: f64, last: f64 },
    #[error("integration bounds reversed: [{t0}, {t1}]")]
    ReversedBounds { t0: f64, t1: f64 },
    #[error("value {y} outside recorded range [{lo}, {hi}]")]
    OutOfRange { y: f64, lo: f64, hi: f64 },
    #[error("read at t = {t} precedes retained history starting at t = {from}")]
    Pruned { t: f64, from: f64 },
    #[error("trajectory has no samples")]
    Empty,
}

pub type Result<T> = std::result::Result<T, HistoryError>;

/// Time-indexed scalar signal with linear interpolation between samples and a
/// constant value before the first sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    times: Vec<f64>,
    values: Vec<f64>,
    initial_value: f64,
    retained_from: Option<f64>,
}

impl Trajectory {
    pub fn new(initial_value: f64) -> Self {
        Self {
            times: Vec::new(),
            values: Vec::new(),
            initial_value,
            retained_from: None,
        }
    }

    pub fn with_capacity(initial_value: f64, capacity: usize) -> Self {
        Self {
            times: Vec::with_capacity(capacity),
            values: Vec::with_capacity(capacity),
            initial_value,
            retained_from: None,
        }
    }

    /// Builds a trajectory from sample pairs; times must be strictly increasing.
    pub fn from_samples(initial_value: f64, samples: &[(f64, f64)]) -> Result<Self> {
        let mut traj = Self::with_capacity(initial_value, samples.len());
        for &(t, v) in samples {
            traj.record(t, v)?;
        }
        Ok(traj)
    }

    pub fn initial_value(&self) -> f64 {
        self.initial_value
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn first_time(&self) -> Option<f64> {
        self.times.first().copied()
    }

    pub fn last_time(&self) -> Option<f64> {
        self.times.last().copied()
    }

    pub fn last_value(&self) -> Option<f64> {
        self.values.last().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.times.iter().copied().zip(self.values.iter().copied())
    }

    /// Appends a sample. Past queries are unaffected.
    pub fn record(&mut self, t: f64, value: f64) -> Result<()> {
        if !t.is_finite() || !value.is_finite() {
            return Err(HistoryError::NonFinite { t, value });
        }
        if let Some(last) = self.last_time() {
            if t <= last {
                return Err(HistoryError::NonMonotone { t, last });
            }
        }
        self.times.push(t);
        self.values.push(value);
        Ok(())
    }

    /// Clamps `t` onto the last sample when it overshoots by at most
    /// [`CAUSALITY_SLACK`], rejects genuine future reads.
    fn check_read(&self, t: f64) -> Result<f64> {
        if let Some(from) = self.retained_from {
            if t < from - CAUSALITY_SLACK {
                return Err(HistoryError::Pruned { t, from });
            }
        }
        match self.last_time() {
            Some(last) if t > last => {
                if t - last <= CAUSALITY_SLACK {
                    Ok(last)
                } else {
                    Err(HistoryError::FutureRead { t, last })
                }
            }
            _ => Ok(t),
        }
    }

    /// Linear interpolation; `initial_value` before the first sample.
    pub fn eval(&self, t: f64) -> Result<f64> {
        let t = self.check_read(t)?;
        let idx = self.times.partition_point(|&s| s <= t);
        if idx == 0 {
            return Ok(self.initial_value);
        }
        let (t0, v0) = (self.times[idx - 1], self.values[idx - 1]);
        if t0 == t || idx == self.times.len() {
            return Ok(v0);
        }
        let (t1, v1) = (self.times[idx], self.values[idx]);
        Ok(v0 + (v1 - v0) * (t - t0) / (t1 - t0))
    }

    /// Sample-and-hold read: the value of the last sample at or before `t`.
    /// This is the right-continuous reading of a signal whose sample at
    /// `t_k` holds over `[t_k, t_{k+1})`.
    pub fn eval_hold(&self, t: f64) -> Result<f64> {
        let t = self.check_read(t)?;
        let idx = self.times.partition_point(|&s| s <= t);
        if idx == 0 {
            Ok(self.initial_value)
        } else {
            Ok(self.values[idx - 1])
        }
    }

    /// Trapezoidal quadrature over `[t0, t1]` on the sample grid; partial end
    /// cells use the interpolated value.
    pub fn integrate(&self, t0: f64, t1: f64) -> Result<f64> {
        if t1 < t0 {
            return Err(HistoryError::ReversedBounds { t0, t1 });
        }
        let t1 = self.check_read(t1)?;
        self.check_read(t0)?;
        if t1 <= t0 {
            return Ok(0.0);
        }
        let first = match self.first_time() {
            Some(first) => first,
            None => return Ok(self.initial_value * (t1 - t0)),
        };
        let mut total = 0.0;
        let mut a = t0;
        if a < first {
            let end = t1.min(first);
            total += self.initial_value * (end - a);
            a = end;
            if a >= t1 {
                return Ok(total);
            }
        }
        // a >= first from here on.
        let mut prev_t = a;
        let mut prev_v = self.eval(a)?;
        let start = self.times.partition_point(|&s| s <= a);
        for i in start..self.times.len() {
            let s = self.times[i];
            if s >= t1 {
                break;
            }
            let v = self.values[i];
            total += 0.5 * (prev_v + v) * (s - prev_t);
            prev_t = s;
            prev_v = v;
        }
        let end_v = self.eval(t1)?;
        total += 0.5 * (prev_v + end_v) * (t1 - prev_t);
        Ok(total)
    }

    /// Inverts a nondecreasing sampled map: returns `x` with `eval(x) = y`.
    /// Where the map is flat at level `y`, the left edge of the flat interval
    /// is returned.
    pub fn invert_monotone(&self, y: f64) -> Result<f64> {
        if self.is_empty() {
            return Err(HistoryError::Empty);
        }
        let lo = self.values[0];
        let hi = *self.values.last().unwrap();
        if y < lo || y > hi {
            return Err(HistoryError::OutOfRange { y, lo, hi });
        }
        let idx = self.values.partition_point(|&v| v < y);
        if idx == 0 {
            return Ok(self.times[0]);
        }
        let (t1, v1) = (self.times[idx], self.values[idx]);
        if v1 == y {
            return Ok(t1);
        }
        let (t0, v0) = (self.times[idx - 1], self.values[idx - 1]);
        Ok(t0 + (y - v0) / (v1 - v0) * (t1 - t0))
    }

    /// Drops samples strictly older than `t`, keeping the one sample needed
    /// to interpolate at `t`. Reads before the retained window then fail
    /// with [`HistoryError::Pruned`] instead of hitting the pre-history.
    pub fn prune_before(&mut self, t: f64) {
        let idx = self.times.partition_point(|&s| s <= t);
        if idx <= 1 {
            return;
        }
        let cut = idx - 1;
        self.times.drain(..cut);
        self.values.drain(..cut);
        self.retained_from = Some(self.times[0]);
    }
}

/// Cumulative packet count `N_x(t)` at one node.
///
/// Before the first sample the count is extrapolated linearly with
/// `prehistory_rate`, i.e. the flow is taken as constant at that rate.
#[derive(Debug, Clone, PartialEq)]
pub struct PacketCounter {
    cumulative: Trajectory,
    prehistory_rate: f64,
}

impl PacketCounter {
    /// Counter whose first sample is `count` at `start`.
    pub fn new(start: f64, count: f64, prehistory_rate: f64) -> Self {
        let mut cumulative = Trajectory::new(count);
        cumulative
            .record(start, count)
            .expect("a single finite sample is always valid");
        Self {
            cumulative,
            prehistory_rate,
        }
    }

    /// Cumulative count of a flow trajectory on its own sample grid,
    /// consistent with [`Trajectory::integrate`].
    pub fn from_flow(flow: &Trajectory) -> Result<Self> {
        let first = flow.first_time().ok_or(HistoryError::Empty)?;
        let mut counter = Self::new(first, 0.0, flow.initial_value());
        let mut total = 0.0;
        let mut prev: Option<(f64, f64)> = None;
        for (t, v) in flow.iter() {
            if let Some((pt, pv)) = prev {
                total += 0.5 * (pv + v) * (t - pt);
                counter.record(t, total)?;
            }
            prev = Some((t, v));
        }
        Ok(counter)
    }

    pub fn record(&mut self, t: f64, count: f64) -> Result<()> {
        self.cumulative.record(t, count)
    }

    pub fn prehistory_rate(&self) -> f64 {
        self.prehistory_rate
    }

    pub fn trajectory(&self) -> &Trajectory {
        &self.cumulative
    }

    pub fn last_time(&self) -> f64 {
        self.cumulative.last_time().expect("counter always has a sample")
    }

    pub fn last_count(&self) -> f64 {
        self.cumulative.last_value().expect("counter always has a sample")
    }

    /// `N_x(t)`.
    pub fn count_at(&self, t: f64) -> Result<f64> {
        let first = self.cumulative.times[0];
        if t < first {
            if let Some(from) = self.cumulative.retained_from {
                return Err(HistoryError::Pruned { t, from });
            }
            return Ok(self.cumulative.values[0] - self.prehistory_rate * (first - t));
        }
        self.cumulative.eval(t)
    }

    /// `N_x(t, t0)`: packets that passed between `t0` and `t`.
    pub fn passed(&self, t: f64, t0: f64) -> Result<f64> {
        if t < t0 {
            return Err(HistoryError::ReversedBounds { t0, t1: t });
        }
        Ok(self.count_at(t)? - self.count_at(t0)?)
    }

    pub fn prune_before(&mut self, t: f64) {
        self.cumulative.prune_before(t);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ramp() -> Trajectory {
        let samples: Vec<(f64, f64)> = (0..=10).map(|k| (k as f64 * 0.1, k as f64 * 10.0)).collect();
        Trajectory::from_samples(0.0, &samples).unwrap()
    }

    #[test]
    fn record_then_eval_exact() {
        let mut traj = Trajectory::new(0.0);
        traj.record(0.0, 5.0).unwrap();
        assert_eq!(traj.eval(0.0).unwrap(), 5.0);
    }

    #[test]
    fn record_out_of_order_rejected() {
        let mut traj = Trajectory::new(0.0);
        traj.record(2.0, 1.0).unwrap();
        assert!(matches!(traj.record(1.0, 1.0), Err(HistoryError::NonMonotone { .. })));
        assert!(matches!(traj.record(2.0, 1.0), Err(HistoryError::NonMonotone { .. })));
    }

    #[test]
    fn interpolation_midpoint() {
        let traj = Trajectory::from_samples(0.0, &[(0.0, 0.0), (1.0, 10.0)]).unwrap();
        assert_eq!(traj.eval(0.5).unwrap(), 5.0);
        let traj = Trajectory::from_samples(0.0, &[(0.0, 0.0), (2.0, 4.0)]).unwrap();
        assert_eq!(traj.eval(1.5).unwrap(), 3.0);
    }

    #[test]
    fn prehistory_and_constants() {
        let traj = Trajectory::from_samples(7.0, &[(1.0, 100.0), (2.0, 100.0)]).unwrap();
        assert_eq!(traj.eval(0.5).unwrap(), 7.0);
        assert_eq!(traj.eval(-3.0).unwrap(), 7.0);
        for t in [1.0, 1.25, 1.9, 2.0] {
            assert_eq!(traj.eval(t).unwrap(), 100.0);
        }
    }

    #[test]
    fn future_read_rejected_but_slack_clamped() {
        let traj = Trajectory::from_samples(0.0, &[(0.0, 1.0), (1.0, 2.0)]).unwrap();
        assert!(matches!(traj.eval(1.5), Err(HistoryError::FutureRead { .. })));
        assert_eq!(traj.eval(1.0 + 1e-12).unwrap(), 2.0);
    }

    #[test]
    fn hold_reads_left_sample() {
        let traj = Trajectory::from_samples(3.0, &[(0.0, 1.0), (1.0, 2.0)]).unwrap();
        assert_eq!(traj.eval_hold(-0.1).unwrap(), 3.0);
        assert_eq!(traj.eval_hold(0.0).unwrap(), 1.0);
        assert_eq!(traj.eval_hold(0.99).unwrap(), 1.0);
        assert_eq!(traj.eval_hold(1.0).unwrap(), 2.0);
    }

    #[test]
    fn integrate_examples() {
        let constant = Trajectory::from_samples(100.0, &[(0.0, 100.0), (0.25, 100.0), (0.5, 100.0)]).unwrap();
        assert!((constant.integrate(0.0, 0.5).unwrap() - 50.0).abs() < 1e-12);
        assert_eq!(constant.integrate(0.3, 0.3).unwrap(), 0.0);
        let ramp = Trajectory::from_samples(0.0, &[(0.0, 0.0), (1.0, 100.0)]).unwrap();
        assert!((ramp.integrate(0.0, 1.0).unwrap() - 50.0).abs() < 1e-12);
        assert!(matches!(ramp.integrate(1.0, 0.0), Err(HistoryError::ReversedBounds { .. })));
    }

    #[test]
    fn integrate_partial_cells_and_prehistory() {
        let traj = ramp();
        // Ramp v = 100 t: integral over [0.05, 0.95] = 50 (0.95^2 - 0.05^2).
        let exact = 50.0 * (0.95f64.powi(2) - 0.05f64.powi(2));
        assert!((traj.integrate(0.05, 0.95).unwrap() - exact).abs() < 1e-9);
        let pre = Trajectory::from_samples(2.0, &[(1.0, 2.0), (2.0, 2.0)]).unwrap();
        assert!((pre.integrate(0.0, 2.0).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn invert_examples() {
        let identity = Trajectory::from_samples(0.0, &[(0.0, 0.0), (10.0, 10.0)]).unwrap();
        assert!((identity.invert_monotone(3.2).unwrap() - 3.2).abs() < 1e-12);

        let samples: Vec<(f64, f64)> = (0..=40).map(|k| {
            let t = k as f64 * 0.1;
            (t, 1.5 * t)
        }).collect();
        let linear = Trajectory::from_samples(0.0, &samples).unwrap();
        assert!((linear.invert_monotone(3.0).unwrap() - 2.0).abs() < 1e-12);

        let flat = Trajectory::from_samples(0.0, &[(0.0, 0.0), (1.0, 5.0), (1.5, 5.0), (2.0, 5.0), (3.0, 8.0)]).unwrap();
        assert_eq!(flat.invert_monotone(5.0).unwrap(), 1.0);

        assert!(matches!(flat.invert_monotone(9.0), Err(HistoryError::OutOfRange { .. })));
        assert!(matches!(Trajectory::new(0.0).invert_monotone(0.0), Err(HistoryError::Empty)));
    }

    #[test]
    fn pruning_keeps_recent_reads() {
        let mut traj = ramp();
        traj.prune_before(0.45);
        assert_eq!(traj.first_time(), Some(0.4));
        assert!((traj.eval(0.45).unwrap() - 45.0).abs() < 1e-9);
        assert!(matches!(traj.eval(0.1), Err(HistoryError::Pruned { .. })));
    }

    #[test]
    fn counter_basics() {
        let mut counter = PacketCounter::new(0.0, 0.0, 100.0);
        counter.record(1.0, 100.0).unwrap();
        counter.record(2.0, 250.0).unwrap();
        assert_eq!(counter.passed(1.0, 1.0).unwrap(), 0.0);
        assert!((counter.passed(2.0, 0.0).unwrap() - 250.0).abs() < 1e-12);
        // Linear pre-history at 100 pkt/s.
        assert!((counter.passed(0.0, -0.5).unwrap() - 50.0).abs() < 1e-12);
        assert!(counter.passed(0.0, 1.0).is_err());
    }

    #[test]
    fn counter_from_flow_matches_integrate() {
        let traj = ramp();
        let counter = PacketCounter::from_flow(&traj).unwrap();
        for &(a, b) in &[(0.0, 1.0), (0.1, 0.7), (0.0, 0.3)] {
            let direct = traj.integrate(a, b).unwrap();
            let counted = counter.passed(b, a).unwrap();
            assert!((direct - counted).abs() < 1e-9, "{a} {b}: {direct} vs {counted}");
        }
    }

    proptest! {
        #[test]
        fn eval_exact_on_grid(steps in prop::collection::vec((1e-3f64..1.0, -50.0f64..50.0), 1..40)) {
            let mut t = 0.0;
            let mut traj = Trajectory::new(0.0);
            let mut samples = Vec::new();
            for (dt, v) in steps {
                t += dt;
                traj.record(t, v).unwrap();
                samples.push((t, v));
            }
            for (t, v) in samples {
                prop_assert_eq!(traj.eval(t).unwrap(), v);
            }
        }

        #[test]
        fn invert_round_trip(increments in prop::collection::vec((1e-3f64..1.0, 0.0f64..5.0), 2..60), frac in 0.0f64..1.0) {
            let mut t = 0.0;
            let mut y = 0.0;
            let mut traj = Trajectory::new(0.0);
            traj.record(t, y).unwrap();
            for (dt, dy) in increments {
                t += dt;
                y += dy;
                traj.record(t, y).unwrap();
            }
            let target = frac * y;
            let x = traj.invert_monotone(target).unwrap();
            let back = traj.eval(x).unwrap();
            prop_assert!((back - target).abs() <= 1e-9 * target.abs().max(1.0));
        }

        #[test]
        fn integrate_additive(values in prop::collection::vec(0.0f64..100.0, 3..50), a in 0.0f64..1.0, b in 0.0f64..1.0, c in 0.0f64..1.0) {
            let n = values.len();
            let samples: Vec<(f64, f64)> = values.iter().enumerate().map(|(k, &v)| (k as f64, v)).collect();
            let traj = Trajectory::from_samples(values[0], &samples).unwrap();
            let span = (n - 1) as f64;
            let mut pts = [a * span, b * span, c * span];
            pts.sort_by(f64::total_cmp);
            let whole = traj.integrate(pts[0], pts[2]).unwrap();
            let split = traj.integrate(pts[0], pts[1]).unwrap() + traj.integrate(pts[1], pts[2]).unwrap();
            prop_assert!((whole - split).abs() <= 1e-9 * whole.abs().max(1.0));
            prop_assert!(whole >= 0.0);
        }
    }
}
