//! Steady state of window-controlled users over a network of FIFO queues.
//!
//! At equilibrium a congested queue serves exactly its available capacity
//! `c_j (1 - delta_j)`, every user in flight holds its window, and user `i`
//! sends at `x_i = w_i / (T_i + sum of tau on its route)`. FAST users instead
//! hold `alpha_i` packets queued, so `x_i = alpha_i / sum of tau`.
//!
//! The solver sweeps the queues Gauss-Seidel style. For one queue with the
//! others fixed the load is strictly decreasing in its own delay, so a
//! safeguarded Newton iteration inside a bisection bracket finds the root.

use thiserror::Error;

pub const MAX_SWEEPS: usize = 100_000;
pub const RESIDUAL_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EquilibriumError {
    #[error("no convergence after {iterations} sweeps (residual {residual} pkt/s)")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("cross-traffic takes {fraction} of queue {queue}, nothing left for users")]
    Infeasible { queue: usize, fraction: f64 },
    #[error("bad problem: {0}")]
    BadProblem(String),
}

pub type Result<T> = std::result::Result<T, EquilibriumError>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UserLaw {
    /// Fixed window, packets.
    Window(f64),
    /// FAST with target queued packets `alpha`.
    Fast { alpha: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumUser {
    pub law: UserLaw,
    /// Round-trip propagation delay, seconds.
    pub prop_delay: f64,
    /// Queue indices along the route.
    pub route: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumProblem {
    /// Packets per second.
    pub capacities: Vec<f64>,
    /// Fraction of each capacity taken by cross-traffic.
    pub cross: Vec<f64>,
    pub users: Vec<EquilibriumUser>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Equilibrium {
    /// Queueing delay per queue, seconds.
    pub tau: Vec<f64>,
    /// Queue length per queue, packets.
    pub q: Vec<f64>,
    /// Sending rate per user, packets per second.
    pub rates: Vec<f64>,
    /// Window per user at the fixed point.
    pub windows: Vec<f64>,
    pub sweeps: usize,
    /// Largest capacity residual, packets per second.
    pub residual: f64,
}

impl EquilibriumProblem {
    fn validate(&self) -> Result<()> {
        let nq = self.capacities.len();
        if self.cross.len() != nq {
            return Err(EquilibriumError::BadProblem(format!(
                "{} capacities but {} cross fractions",
                nq,
                self.cross.len()
            )));
        }
        for (j, (&c, &d)) in self.capacities.iter().zip(&self.cross).enumerate() {
            if !(c.is_finite() && c > 0.0) || !(d.is_finite() && d >= 0.0) {
                return Err(EquilibriumError::BadProblem(format!("queue {j}: c = {c}, delta = {d}")));
            }
            if d >= 1.0 {
                return Err(EquilibriumError::Infeasible { queue: j, fraction: d });
            }
        }
        for (i, u) in self.users.iter().enumerate() {
            let bad_law = match u.law {
                UserLaw::Window(w) => !(w.is_finite() && w >= 0.0),
                UserLaw::Fast { alpha } => !(alpha.is_finite() && alpha > 0.0),
            };
            if bad_law || !(u.prop_delay.is_finite() && u.prop_delay > 0.0) || u.route.is_empty() {
                return Err(EquilibriumError::BadProblem(format!("user {i}: {u:?}")));
            }
            if let Some(&j) = u.route.iter().find(|&&j| j >= nq) {
                return Err(EquilibriumError::BadProblem(format!("user {i} routes through queue {j}")));
            }
        }
        Ok(())
    }

    fn available(&self, j: usize) -> f64 {
        self.capacities[j] * (1.0 - self.cross[j])
    }

    fn route_delay(&self, i: usize, tau: &[f64]) -> f64 {
        self.users[i].route.iter().map(|&j| tau[j]).sum()
    }

    fn rate(&self, i: usize, queued: f64) -> f64 {
        let u = &self.users[i];
        match u.law {
            UserLaw::Window(w) => w / (u.prop_delay + queued),
            UserLaw::Fast { alpha } => {
                if queued > 0.0 {
                    alpha / queued
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    /// User load on queue `j` minus its available capacity.
    fn excess(&self, j: usize, tau: &[f64]) -> f64 {
        let load: f64 = self
            .users
            .iter()
            .enumerate()
            .filter(|(_, u)| u.route.contains(&j))
            .map(|(i, _)| self.rate(i, self.route_delay(i, tau)))
            .sum();
        load - self.available(j)
    }

    fn residual(&self, j: usize, tau: &[f64]) -> f64 {
        let e = self.excess(j, tau);
        if tau[j] > 0.0 {
            e.abs()
        } else {
            e.max(0.0)
        }
    }

    /// Delay of queue `j` balancing its load with the other delays fixed.
    fn solve_one(&self, j: usize, tau: &mut [f64]) {
        let users: Vec<(usize, f64)> = self
            .users
            .iter()
            .enumerate()
            .filter(|(_, u)| u.route.contains(&j))
            .map(|(i, u)| (i, u.route.iter().filter(|&&k| k != j).map(|&k| tau[k]).sum()))
            .collect();
        let avail = self.available(j);
        let h = |x: f64| -> (f64, f64) {
            let mut value = -avail;
            let mut slope = 0.0;
            for &(i, others) in &users {
                let u = &self.users[i];
                let (num, den) = match u.law {
                    UserLaw::Window(w) => (w, u.prop_delay + others + x),
                    UserLaw::Fast { alpha } => (alpha, others + x),
                };
                if den <= 0.0 {
                    return (f64::INFINITY, f64::NEG_INFINITY);
                }
                value += num / den;
                slope -= num / (den * den);
            }
            (value, slope)
        };
        if h(0.0).0 <= 0.0 {
            tau[j] = 0.0;
            return;
        }
        let mass: f64 = users
            .iter()
            .map(|&(i, _)| match self.users[i].law {
                UserLaw::Window(w) => w,
                UserLaw::Fast { alpha } => alpha,
            })
            .sum();
        let (mut lo, mut hi) = (0.0, mass / avail);
        let mut x = tau[j].clamp(lo, hi);
        for _ in 0..200 {
            let (v, s) = h(x);
            if v.abs() <= 1e-13 * avail {
                break;
            }
            if v > 0.0 {
                lo = x;
            } else {
                hi = x;
            }
            let newton = x - v / s;
            x = if newton.is_finite() && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if hi - lo <= 1e-15 * hi.max(1e-300) {
                break;
            }
        }
        tau[j] = x;
    }
}

/// Solves for queueing delays and per-user rates at steady state.
pub fn equilibrium_queue(problem: &EquilibriumProblem) -> Result<Equilibrium> {
    problem.validate()?;
    let nq = problem.capacities.len();
    let mut tau = vec![0.0; nq];
    let mut sweeps = 0;
    let mut residual = f64::INFINITY;
    while sweeps < MAX_SWEEPS {
        sweeps += 1;
        for j in 0..nq {
            problem.solve_one(j, &mut tau);
        }
        let converged = (0..nq).all(|j| problem.residual(j, &tau) <= RESIDUAL_TOL * problem.capacities[j]);
        residual = (0..nq).map(|j| problem.residual(j, &tau)).fold(0.0, f64::max);
        if converged {
            break;
        }
    }
    if residual.is_nan() || (0..nq).any(|j| problem.residual(j, &tau) > RESIDUAL_TOL * problem.capacities[j]) {
        return Err(EquilibriumError::NonConvergence {
            iterations: sweeps,
            residual,
        });
    }
    let rates: Vec<f64> = (0..problem.users.len())
        .map(|i| problem.rate(i, problem.route_delay(i, &tau)))
        .collect();
    let windows = rates
        .iter()
        .zip(&problem.users)
        .enumerate()
        .map(|(i, (x, u))| x * (u.prop_delay + problem.route_delay(i, &tau)))
        .collect();
    let q = tau.iter().zip(&problem.capacities).map(|(t, c)| t * c).collect();
    Ok(Equilibrium {
        tau,
        q,
        rates,
        windows,
        sweeps,
        residual,
    })
}

/// Single fixed-window bottleneck by plain bisection on
/// `sum w_i / (T_i + tau) = c`.
pub fn bisect_single_bottleneck(users: &[(f64, f64)], available: f64) -> f64 {
    let load = |tau: f64| users.iter().map(|&(w, t)| w / (t + tau)).sum::<f64>();
    if load(0.0) <= available {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0, users.iter().map(|&(w, _)| w).sum::<f64>() / available);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if load(mid) > available {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
