//! Scenario files.
//!
//! One TOML format. Every dimensional key carries its unit in the name
//! (`capacity_mbps`, `capacity_pps`, `delay_ms`, `delay_s`, `at_s`, ...);
//! parsing normalizes to packets and seconds. A scenario looks like:
//!
//! ```toml
//! name = "two-users"
//!
//! [[queue]]
//! name = "b"
//! capacity_mbps = 100.0
//! packet_bytes = 1250
//!
//! [[user]]
//! name = "u1"
//! route = ["b"]
//! protocol = { kind = "schedule", initial = 400, steps = [{ at_s = 2.0, window = 600 }] }
//!
//! [[channel]]
//! from = "u1+"
//! to = "b-"
//! delay_ms = 20
//!
//! [[channel]]
//! from = "b+"
//! to = "u1-"
//! delay_ms = 30
//!
//! [[cross_traffic]]
//! name = "x"
//! queue = "b"
//! profile = { kind = "constant", fraction = 0.2 }
//!
//! [run]
//! dt_s = 1e-4
//! horizon_s = 4.0
//! init = "equilibrium"
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::protocol::{FastParams, Protocol, ProtocolError, WindowSchedule};
use crate::topology::{ChannelDecl, CrossDecl, NetworkSpec, QueueDecl, UserDecl};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{0}")]
    Syntax(String),
    #[error("{field}: {message}")]
    Invalid { field: String, message: String },
    #[error("{field}: {source}")]
    Protocol {
        field: String,
        #[source]
        source: ProtocolError,
    },
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, ScenarioError>;

fn invalid(field: impl Into<String>, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid {
        field: field.into(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitMode {
    /// Empty queues, nothing in flight; windows open as a burst at `t = 0`.
    Cold,
    /// Constant past at the fixed point of the initial windows.
    #[default]
    Equilibrium,
}

impl std::str::FromStr for InitMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "cold" => Ok(InitMode::Cold),
            "equilibrium" => Ok(InitMode::Equilibrium),
            other => Err(format!("unknown init mode `{other}` (cold|equilibrium)")),
        }
    }
}

/// Cross-traffic load as a fraction of the queue capacity.
#[derive(Debug, Clone, PartialEq)]
pub enum CrossProfile {
    Constant { fraction: f64 },
    /// `mean + amplitude` over the first half of each period, `mean -
    /// amplitude` over the second. A negative amplitude flips the phase.
    Square { mean: f64, amplitude: f64, period: f64 },
    Steps { initial: f64, steps: Vec<(f64, f64)> },
}

impl CrossProfile {
    /// Fraction at `t`; before 0 the profile is held at its value at 0.
    pub fn fraction_at(&self, t: f64) -> f64 {
        let t = t.max(0.0);
        match self {
            CrossProfile::Constant { fraction } => *fraction,
            CrossProfile::Square {
                mean,
                amplitude,
                period,
            } => {
                if t.rem_euclid(*period) < 0.5 * period {
                    mean + amplitude
                } else {
                    mean - amplitude
                }
            }
            CrossProfile::Steps { initial, steps } => steps
                .iter()
                .take_while(|(at, _)| *at <= t)
                .last()
                .map_or(*initial, |(_, f)| *f),
        }
    }

    /// `int_0^t fraction`, negative for `t < 0`.
    pub fn cumulative(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return self.fraction_at(0.0) * t;
        }
        match self {
            CrossProfile::Constant { fraction } => fraction * t,
            CrossProfile::Square {
                mean,
                amplitude,
                period,
            } => {
                let full = (t / period).floor();
                let r = t - full * period;
                let half = 0.5 * period;
                let partial = if r < half {
                    (mean + amplitude) * r
                } else {
                    (mean + amplitude) * half + (mean - amplitude) * (r - half)
                };
                full * mean * period + partial
            }
            CrossProfile::Steps { initial, steps } => {
                let mut total = 0.0;
                let mut at = 0.0;
                let mut level = *initial;
                for &(s, f) in steps {
                    if s >= t {
                        break;
                    }
                    if s > at {
                        total += level * (s - at);
                        at = s;
                    }
                    level = f;
                }
                total + level * (t - at)
            }
        }
    }

    fn validate(&self, field: &str) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        match self {
            CrossProfile::Constant { fraction } if !ok(*fraction) => {
                Err(invalid(field, format!("fraction {fraction} must be >= 0")))
            }
            CrossProfile::Square {
                mean,
                amplitude,
                period,
            } => {
                if !(period.is_finite() && *period > 0.0) {
                    return Err(invalid(field, format!("period_s {period} must be > 0")));
                }
                if !ok(mean - amplitude) || !ok(mean + amplitude) {
                    return Err(invalid(field, "square wave must stay nonnegative"));
                }
                Ok(())
            }
            CrossProfile::Steps { initial, steps } => {
                if !ok(*initial) || steps.iter().any(|(_, f)| !ok(*f)) {
                    return Err(invalid(field, "fractions must be >= 0"));
                }
                if steps.windows(2).any(|p| !(p[1].0 > p[0].0)) || steps.iter().any(|(s, _)| !(*s >= 0.0)) {
                    return Err(invalid(field, "step times must be >= 0 and strictly increasing"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueueSpec {
    pub name: String,
    /// Packets per second.
    pub capacity: f64,
    /// Packet size the capacity was converted with, if given in bit/s.
    pub packet_bytes: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserSpec {
    pub name: String,
    pub route: Vec<String>,
    pub protocol: Protocol,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossSpec {
    pub name: String,
    pub queue: String,
    pub profile: CrossProfile,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSettings {
    pub dt: f64,
    pub horizon: f64,
    pub init: InitMode,
}

/// A validated scenario in packets and seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub description: String,
    pub queues: Vec<QueueSpec>,
    pub users: Vec<UserSpec>,
    pub channels: Vec<ChannelDecl>,
    pub cross: Vec<CrossSpec>,
    pub run: RunSettings,
}

impl Scenario {
    pub fn network_spec(&self) -> NetworkSpec {
        NetworkSpec {
            users: self
                .users
                .iter()
                .map(|u| UserDecl {
                    name: u.name.clone(),
                    route: u.route.clone(),
                })
                .collect(),
            queues: self
                .queues
                .iter()
                .map(|q| QueueDecl {
                    name: q.name.clone(),
                    capacity: q.capacity,
                })
                .collect(),
            channels: self.channels.clone(),
            cross: self
                .cross
                .iter()
                .map(|x| CrossDecl {
                    name: x.name.clone(),
                    queue: x.queue.clone(),
                })
                .collect(),
        }
    }

    /// Times of all scheduled window changes, sorted.
    pub fn step_times(&self) -> Vec<f64> {
        let mut times: Vec<f64> = self
            .users
            .iter()
            .filter_map(|u| match &u.protocol {
                Protocol::Schedule(s) => Some(s.steps().iter().map(|&(t, _)| t)),
                Protocol::Fast { .. } => None,
            })
            .flatten()
            .collect();
        times.sort_by(f64::total_cmp);
        times.dedup();
        times
    }

    pub fn to_toml(&self) -> String {
        let file = ScenarioFile {
            name: self.name.clone(),
            description: self.description.clone(),
            queues: self
                .queues
                .iter()
                .map(|q| QueueFile {
                    name: q.name.clone(),
                    capacity_mbps: None,
                    capacity_pps: Some(q.capacity),
                    packet_bytes: q.packet_bytes,
                })
                .collect(),
            users: self
                .users
                .iter()
                .map(|u| UserFile {
                    name: u.name.clone(),
                    route: u.route.clone(),
                    protocol: match &u.protocol {
                        Protocol::Schedule(s) => ProtocolFile::Schedule {
                            initial: s.initial(),
                            steps: s
                                .steps()
                                .iter()
                                .map(|&(at_s, window)| WindowStepFile { at_s, window })
                                .collect(),
                        },
                        Protocol::Fast { params, initial } => ProtocolFile::Fast {
                            gamma: params.gamma,
                            alpha: params.alpha,
                            initial: *initial,
                        },
                    },
                })
                .collect(),
            channels: self
                .channels
                .iter()
                .map(|c| ChannelFile {
                    from: c.from.clone(),
                    to: c.to.clone(),
                    delay_ms: None,
                    delay_s: Some(c.delay),
                })
                .collect(),
            cross: self
                .cross
                .iter()
                .map(|x| CrossFile {
                    name: x.name.clone(),
                    queue: x.queue.clone(),
                    profile: match &x.profile {
                        CrossProfile::Constant { fraction } => ProfileFile::Constant { fraction: *fraction },
                        CrossProfile::Square {
                            mean,
                            amplitude,
                            period,
                        } => ProfileFile::Square {
                            mean: *mean,
                            amplitude: *amplitude,
                            period_s: *period,
                        },
                        CrossProfile::Steps { initial, steps } => ProfileFile::Steps {
                            initial: *initial,
                            steps: steps
                                .iter()
                                .map(|&(at_s, fraction)| FractionStepFile { at_s, fraction })
                                .collect(),
                        },
                    },
                })
                .collect(),
            run: RunFile {
                dt_s: self.run.dt,
                horizon_s: self.run.horizon,
                init: self.run.init,
            },
        };
        toml::to_string(&file).expect("scenario serializes")
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    description: String,
    #[serde(rename = "queue", default)]
    queues: Vec<QueueFile>,
    #[serde(rename = "user", default)]
    users: Vec<UserFile>,
    #[serde(rename = "channel", default)]
    channels: Vec<ChannelFile>,
    #[serde(rename = "cross_traffic", default, skip_serializing_if = "Vec::is_empty")]
    cross: Vec<CrossFile>,
    run: RunFile,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct QueueFile {
    name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    capacity_mbps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    capacity_pps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    packet_bytes: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct UserFile {
    name: String,
    route: Vec<String>,
    protocol: ProtocolFile,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum ProtocolFile {
    Schedule {
        initial: f64,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        steps: Vec<WindowStepFile>,
    },
    Fast {
        gamma: f64,
        alpha: f64,
        initial: f64,
    },
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WindowStepFile {
    at_s: f64,
    window: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChannelFile {
    from: String,
    to: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    delay_ms: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    delay_s: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CrossFile {
    name: String,
    queue: String,
    profile: ProfileFile,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum ProfileFile {
    Constant {
        fraction: f64,
    },
    Square {
        mean: f64,
        amplitude: f64,
        period_s: f64,
    },
    Steps {
        initial: f64,
        #[serde(default)]
        steps: Vec<FractionStepFile>,
    },
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FractionStepFile {
    at_s: f64,
    fraction: f64,
}

fn default_dt() -> f64 {
    1e-4
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunFile {
    #[serde(default = "default_dt")]
    dt_s: f64,
    horizon_s: f64,
    #[serde(default)]
    init: InitMode,
}

/// Parses and validates a scenario.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let file: ScenarioFile = toml::from_str(text).map_err(|e| ScenarioError::Syntax(e.to_string()))?;
    normalize(file)
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_scenario(&text)
}

fn one_unit(field: &str, options: [(&str, Option<f64>); 2]) -> Result<(usize, f64)> {
    match options {
        [(_, Some(v)), (_, None)] => Ok((0, v)),
        [(_, None), (_, Some(v))] => Ok((1, v)),
        [(a, Some(_)), (b, Some(_))] => Err(invalid(field, format!("give only one of {a} or {b}"))),
        [(a, None), (b, None)] => Err(invalid(field, format!("missing unit: set {a} or {b}"))),
    }
}

fn normalize(file: ScenarioFile) -> Result<Scenario> {
    let mut queues = Vec::with_capacity(file.queues.len());
    for (j, q) in file.queues.iter().enumerate() {
        let field = format!("queue[{j}] `{}`", q.name);
        let (unit, v) = one_unit(&field, [("capacity_mbps", q.capacity_mbps), ("capacity_pps", q.capacity_pps)])?;
        let capacity = if unit == 0 {
            let bytes = q
                .packet_bytes
                .ok_or_else(|| invalid(&field, "capacity_mbps needs packet_bytes"))?;
            if !(bytes > 0.0) {
                return Err(invalid(&field, "packet_bytes must be > 0"));
            }
            v * 1e6 / (8.0 * bytes)
        } else {
            v
        };
        if !(capacity.is_finite() && capacity > 0.0) {
            return Err(invalid(&field, format!("capacity must be > 0, got {capacity}")));
        }
        queues.push(QueueSpec {
            name: q.name.clone(),
            capacity,
            packet_bytes: q.packet_bytes,
        });
    }

    let mut users = Vec::with_capacity(file.users.len());
    for (i, u) in file.users.iter().enumerate() {
        let field = format!("user[{i}] `{}`", u.name);
        let wrap = |source| ScenarioError::Protocol {
            field: field.clone(),
            source,
        };
        let protocol = match &u.protocol {
            ProtocolFile::Schedule { initial, steps } => Protocol::Schedule(
                WindowSchedule::new(*initial, steps.iter().map(|s| (s.at_s, s.window)).collect()).map_err(wrap)?,
            ),
            ProtocolFile::Fast {
                gamma,
                alpha,
                initial,
            } => {
                if !(initial.is_finite() && *initial >= 0.0) {
                    return Err(wrap(ProtocolError::BadWindow(*initial)));
                }
                Protocol::Fast {
                    params: FastParams::new(*gamma, *alpha).map_err(wrap)?,
                    initial: *initial,
                }
            }
        };
        users.push(UserSpec {
            name: u.name.clone(),
            route: u.route.clone(),
            protocol,
        });
    }

    let mut channels = Vec::with_capacity(file.channels.len());
    for (k, c) in file.channels.iter().enumerate() {
        let field = format!("channel[{k}] {} -> {}", c.from, c.to);
        let (unit, v) = one_unit(&field, [("delay_ms", c.delay_ms), ("delay_s", c.delay_s)])?;
        let delay = if unit == 0 { v * 1e-3 } else { v };
        if !(delay.is_finite() && delay >= 0.0) {
            return Err(invalid(&field, format!("delay must be >= 0, got {delay}")));
        }
        channels.push(ChannelDecl {
            from: c.from.clone(),
            to: c.to.clone(),
            delay,
        });
    }

    let mut cross = Vec::with_capacity(file.cross.len());
    for (k, x) in file.cross.iter().enumerate() {
        let field = format!("cross_traffic[{k}] `{}`", x.name);
        let profile = match &x.profile {
            ProfileFile::Constant { fraction } => CrossProfile::Constant { fraction: *fraction },
            ProfileFile::Square {
                mean,
                amplitude,
                period_s,
            } => CrossProfile::Square {
                mean: *mean,
                amplitude: *amplitude,
                period: *period_s,
            },
            ProfileFile::Steps { initial, steps } => CrossProfile::Steps {
                initial: *initial,
                steps: steps.iter().map(|s| (s.at_s, s.fraction)).collect(),
            },
        };
        profile.validate(&field)?;
        cross.push(CrossSpec {
            name: x.name.clone(),
            queue: x.queue.clone(),
            profile,
        });
    }

    let run = RunSettings {
        dt: file.run.dt_s,
        horizon: file.run.horizon_s,
        init: file.run.init,
    };
    if !(run.dt.is_finite() && run.dt > 0.0) {
        return Err(invalid("run.dt_s", "must be > 0"));
    }
    if !(run.horizon.is_finite() && run.horizon > 0.0) {
        return Err(invalid("run.horizon_s", "must be > 0"));
    }

    let scenario = Scenario {
        name: file.name,
        description: file.description,
        queues,
        users,
        channels,
        cross,
        run,
    };
    crate::topology::build_network(&scenario.network_spec())
        .map_err(|e| invalid("topology", e.to_string()))?;
    Ok(scenario)
}

/// Built-in scenarios, by name.
pub const PRESETS: &[(&str, &str)] = &[
    ("scenario1", include_str!("../presets/scenario1.toml")),
    ("scenario2", include_str!("../presets/scenario2.toml")),
    ("scenario3", include_str!("../presets/scenario3.toml")),
    ("scenario4", include_str!("../presets/scenario4.toml")),
    ("scenario5", include_str!("../presets/scenario5.toml")),
    ("scenario6", include_str!("../presets/scenario6.toml")),
    ("scenario7", include_str!("../presets/scenario7.toml")),
    ("scenario8", include_str!("../presets/scenario8.toml")),
    ("squarewave", include_str!("../presets/squarewave.toml")),
    ("staticlink", include_str!("../presets/staticlink.toml")),
    ("fast2", include_str!("../presets/fast2.toml")),
];

pub fn preset_text(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

pub fn preset(name: &str) -> Result<Scenario> {
    let text = preset_text(name).ok_or_else(|| ScenarioError::UnknownPreset(name.to_string()))?;
    parse_scenario(text)
}
