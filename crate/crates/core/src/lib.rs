//! Multipath routing for MPTCP over a software-defined switch fabric.
//!
//! * [`wire`]: packet model and the binary handshake frame codec.
//! * [`netgraph`]: topologies, path enumeration and cyclic path sets.
//! * [`controller`]: the session-table driven multipath controller and the
//!   single-path baselines.
//! * [`sim`]: deterministic fluid simulation of hosts, switches and links.
//! * [`scenario`]: the scenario file format driving [`sim::run`].

pub mod controller;
pub mod netgraph;
pub mod scenario;
pub mod sim;
pub mod wire;
