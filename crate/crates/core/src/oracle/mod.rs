//! Independent references for the fluid engine: a steady-state solver and a
//! packet-level discrete-event simulator.

pub mod equilibrium;
pub mod packet;

pub use equilibrium::{equilibrium_queue, Equilibrium, EquilibriumError, EquilibriumProblem, EquilibriumUser, UserLaw};

pub use packet::{packet_sim, PacketConfig, PacketError, PacketEvent, PacketEventKind, PacketRun};
