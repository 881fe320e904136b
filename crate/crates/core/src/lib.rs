//! Fluid-flow simulation of window-based congestion control.
//!
//! [`engine::simulate`] runs a [`scenario::Scenario`] on a fixed grid. The
//! [`oracle`] module holds two independent references: an equilibrium
//! solver and a packet-level discrete-event simulator. The `simulate`
//! binary wraps all of it, see [`cli`].

pub mod channel;
pub mod cli;
pub mod engine;
pub mod history;
pub mod oracle;
pub mod protocol;
pub mod queue;
pub mod scenario;
pub mod topology;
pub mod user;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/counters.md")]
    mod counters {}
    #[doc = include_str!("../../../book/src/channels.md")]
    mod channels {}
    #[doc = include_str!("../../../book/src/queues.md")]
    mod queues {}
    #[doc = include_str!("../../../book/src/users.md")]
    mod users {}
    #[doc = include_str!("../../../book/src/scenarios.md")]
    mod scenarios {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/equilibrium.md")]
    mod equilibrium {}
    #[doc = include_str!("../../../book/src/packet.md")]
    mod packet {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
