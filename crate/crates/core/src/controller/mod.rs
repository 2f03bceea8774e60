//! Reactive flow-rule controllers.
//!
//! Every controller receives a [`PacketInEvent`] when a switch has no rule
//! for a packet and answers with a [`Decision`]: the route chosen for that
//! packet's 5-tuple and the flow rules that realize it. [`Smoc`] groups MPTCP
//! subflows into sessions and spreads them over path sets; the two baselines
//! always pick one path per host pair.

mod smoc;

use std::fmt;
use std::net::Ipv4Addr;

use thiserror::Error;

use crate::netgraph::{
    shortest_path, spanning_tree, GraphError, Host, HostId, Path, PortId, SwitchId, Topology,
};
use crate::wire::{classify, EndpointPair, Packet, PacketClass};

pub use smoc::{
    handle_packet_in, Connection, PendingCapable, PendingJoin, SessionTables, Smoc, SmocConfig,
};

/// A table miss reported by a switch.
#[derive(Debug, Clone, PartialEq)]
pub struct PacketInEvent {
    pub switch: SwitchId,
    pub in_port: PortId,
    pub packet: Packet,
    /// Simulation time in seconds; only used for entry expiry.
    pub time: f64,
}

/// Exact 5-tuple match (TCP implied) forwarding out of one port.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FlowRule {
    pub switch: SwitchId,
    pub matches: EndpointPair,
    pub out_port: PortId,
}

impl fmt::Display for FlowRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[{}]->{}", self.switch, self.matches, self.out_port)
    }
}

/// One mutation of the session tables, kept for audit and tests.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TableDelta {
    PendingCapableInsert {
        endpoints: EndpointPair,
        key: u64,
    },
    PendingCapableReuse {
        endpoints: EndpointPair,
    },
    PendingCapableRemove {
        endpoints: EndpointPair,
    },
    PendingCapableExpired {
        endpoints: EndpointPair,
    },
    PendingJoinInsert {
        endpoints: EndpointPair,
        peer_key: u64,
    },
    PendingJoinReuse {
        endpoints: EndpointPair,
    },
    PendingJoinRemove {
        endpoints: EndpointPair,
    },
    PendingJoinExpired {
        endpoints: EndpointPair,
    },
    ConnectionInsert {
        key: u64,
        peer_key: u64,
    },
    ConnectionExpired {
        key: u64,
    },
}

impl fmt::Display for TableDelta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TableDelta::PendingCapableInsert { endpoints, key } => {
                write!(f, "pending_capable+{endpoints}@0x{key:016x}")
            }
            TableDelta::PendingCapableReuse { endpoints } => {
                write!(f, "pending_capable={endpoints}")
            }
            TableDelta::PendingCapableRemove { endpoints } => {
                write!(f, "pending_capable-{endpoints}")
            }
            TableDelta::PendingCapableExpired { endpoints } => {
                write!(f, "pending_capable~{endpoints}")
            }
            TableDelta::PendingJoinInsert {
                endpoints,
                peer_key,
            } => {
                write!(f, "pending_join+{endpoints}@0x{peer_key:016x}")
            }
            TableDelta::PendingJoinReuse { endpoints } => write!(f, "pending_join={endpoints}"),
            TableDelta::PendingJoinRemove { endpoints } => write!(f, "pending_join-{endpoints}"),
            TableDelta::PendingJoinExpired { endpoints } => write!(f, "pending_join~{endpoints}"),
            TableDelta::ConnectionInsert { key, peer_key } => {
                write!(f, "mptcp_connections+0x{key:016x}>0x{peer_key:016x}")
            }
            TableDelta::ConnectionExpired { key } => write!(f, "mptcp_connections~0x{key:016x}"),
        }
    }
}

/// Non-fatal conditions that made a controller fall back to the shortest
/// path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ControllerWarning {
    /// MP_JOIN names a key with no established session.
    UnknownSession { peer_key: u64 },
    /// A new session presented a key already in use.
    KeyCollision { key: u64 },
    /// A reply arrived with no matching pending entry.
    NoPendingEntry,
    /// The session's path set does not join this packet's attachment switches.
    PathSetMismatch { key: u64 },
}

impl fmt::Display for ControllerWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ControllerWarning::UnknownSession { peer_key } => {
                write!(f, "unknown_session@0x{peer_key:016x}")
            }
            ControllerWarning::KeyCollision { key } => write!(f, "key_collision@0x{key:016x}"),
            ControllerWarning::NoPendingEntry => f.write_str("no_pending_entry"),
            ControllerWarning::PathSetMismatch { key } => {
                write!(f, "path_set_mismatch@0x{key:016x}")
            }
        }
    }
}

/// A controller's answer to one packet-in.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub class: PacketClass,
    pub route: Path,
    /// Position of `route` in the path set it was drawn from; `None` when the
    /// route did not come from a path set.
    pub path_index: Option<usize>,
    /// One rule per switch of `route`, in route order.
    pub rules: Vec<FlowRule>,
    pub table_delta: Vec<TableDelta>,
    pub warnings: Vec<ControllerWarning>,
}

impl Decision {
    /// `key=value` audit record. Values never contain spaces; lists are
    /// `;`-separated and `-` marks an empty list.
    pub fn audit_line(&self, controller: &str, ev: &PacketInEvent) -> String {
        fn list<T: fmt::Display>(items: &[T]) -> String {
            if items.is_empty() {
                "-".to_string()
            } else {
                items
                    .iter()
                    .map(|i| i.to_string())
                    .collect::<Vec<_>>()
                    .join(";")
            }
        }
        let index = self
            .path_index
            .map_or_else(|| "-".to_string(), |i| i.to_string());
        format!(
            "t={:.6} controller={} switch={} in_port={} class={} match={} route={} index={} rules={} delta={} warn={}",
            ev.time,
            controller,
            ev.switch,
            ev.in_port,
            self.class,
            ev.packet.endpoints,
            self.route,
            index,
            self.rules.len(),
            list(&self.table_delta),
            list(&self.warnings),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ControllerError {
    #[error("no host with ip {0}")]
    UnknownHost(Ipv4Addr),
    #[error("host {host} is not attached to {switch}")]
    HostNotOnPath { host: HostId, switch: SwitchId },
    #[error("invalid route {0}")]
    InvalidRoute(Path),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Common interface of the multipath controller and the baselines.
pub trait Controller {
    fn name(&self) -> &'static str;

    fn handle_packet_in(
        &mut self,
        topo: &Topology,
        ev: &PacketInEvent,
    ) -> Result<Decision, ControllerError>;
}

/// Hosts owning the packet's source and destination addresses.
pub(crate) fn endpoint_hosts<'t>(
    topo: &'t Topology,
    e: &EndpointPair,
) -> Result<(&'t Host, &'t Host), ControllerError> {
    let src = topo
        .host_by_ip(e.src_ip)
        .ok_or(ControllerError::UnknownHost(e.src_ip))?;
    let dst = topo
        .host_by_ip(e.dst_ip)
        .ok_or(ControllerError::UnknownHost(e.dst_ip))?;
    Ok((src, dst))
}

/// Flow rules forwarding `matches` along `route`: every switch points at the
/// next hop, the last one at `dst_host`.
pub fn install_path(
    topo: &Topology,
    route: &Path,
    matches: EndpointPair,
    src_host: &HostId,
    dst_host: &HostId,
) -> Result<Vec<FlowRule>, ControllerError> {
    if !route.is_valid_in(topo) {
        return Err(ControllerError::InvalidRoute(route.clone()));
    }
    for (host, switch) in [(src_host, route.first()), (dst_host, route.last())] {
        let attached = topo.host(host).map(|h| &h.switch);
        if attached != Some(switch) {
            return Err(ControllerError::HostNotOnPath {
                host: host.clone(),
                switch: switch.clone(),
            });
        }
    }
    let hops = route.switches();
    let rules = hops
        .iter()
        .enumerate()
        .map(|(i, sw)| {
            let out_port = match hops.get(i + 1) {
                Some(next) => topo.port_toward_switch(sw, next),
                None => topo.port_toward_host(sw, dst_host),
            }
            .expect("route validated against topology");
            FlowRule {
                switch: sw.clone(),
                matches,
                out_port,
            }
        })
        .collect();
    Ok(rules)
}

fn stateless_decision(
    topo: &Topology,
    routing: &Topology,
    ev: &PacketInEvent,
) -> Result<Decision, ControllerError> {
    let (src, dst) = endpoint_hosts(topo, &ev.packet.endpoints)?;
    let route = shortest_path(routing, &src.switch, &dst.switch)?;
    let rules = install_path(topo, &route, ev.packet.endpoints, &src.id, &dst.id)?;
    Ok(Decision {
        class: classify(&ev.packet),
        route,
        path_index: None,
        rules,
        table_delta: Vec::new(),
        warnings: Vec::new(),
    })
}

/// Routes every flow over the unique path of the breadth-first spanning
/// tree, MPTCP or not.
#[derive(Debug, Default, Clone)]
pub struct SpanningTreeController {
    // (source topology, its spanning tree)
    cached: Option<(Topology, Topology)>,
}

impl SpanningTreeController {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Controller for SpanningTreeController {
    fn name(&self) -> &'static str {
        "stp"
    }

    fn handle_packet_in(
        &mut self,
        topo: &Topology,
        ev: &PacketInEvent,
    ) -> Result<Decision, ControllerError> {
        if self.cached.as_ref().map(|(src, _)| src) != Some(topo) {
            self.cached = Some((topo.clone(), spanning_tree(topo)));
        }
        let (_, tree) = self.cached.as_ref().expect("set above");
        stateless_decision(topo, tree, ev)
    }
}

/// Routes every flow over the minimum-hop path.
#[derive(Debug, Default, Clone, Copy)]
pub struct ShortestPathController;

impl Controller for ShortestPathController {
    fn name(&self) -> &'static str {
        "spf"
    }

    fn handle_packet_in(
        &mut self,
        topo: &Topology,
        ev: &PacketInEvent,
    ) -> Result<Decision, ControllerError> {
        stateless_decision(topo, topo, ev)
    }
}

/// Controller selector as written in scenario files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ControllerKind {
    Smoc,
    SpanningTree,
    ShortestPath,
}

impl ControllerKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ControllerKind::Smoc => "smoc",
            ControllerKind::SpanningTree => "stp",
            ControllerKind::ShortestPath => "spf",
        }
    }

    pub fn build(&self) -> Box<dyn Controller + Send> {
        match self {
            ControllerKind::Smoc => Box::new(Smoc::default()),
            ControllerKind::SpanningTree => Box::new(SpanningTreeController::new()),
            ControllerKind::ShortestPath => Box::new(ShortestPathController),
        }
    }
}

impl std::str::FromStr for ControllerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "smoc" => Ok(ControllerKind::Smoc),
            "stp" => Ok(ControllerKind::SpanningTree),
            "spf" => Ok(ControllerKind::ShortestPath),
            other => Err(format!(
                "unknown controller `{other}` (expected smoc, stp or spf)"
            )),
        }
    }
}

impl fmt::Display for ControllerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}
