use std::collections::BTreeMap;

use log::{debug, warn};

use super::{
    endpoint_hosts, install_path, Controller, ControllerError, ControllerWarning, Decision,
    PacketInEvent, TableDelta,
};
use crate::netgraph::{
    compute_path_set, shortest_path, Host, Path, PathSet, PathSetOptions, Topology,
};
use crate::wire::{classify, EndpointPair, MptcpOption, PacketClass};

/// First SYN of a session, waiting for the listener's SYN/ACK.
#[derive(Debug, Clone, PartialEq)]
pub struct PendingCapable {
    pub initiator_key: u64,
    /// Initiator to listener.
    pub path_set: PathSet,
    /// Route handed to the SYN, replayed on retransmission.
    pub route: Path,
    pub created: f64,
}

/// MP_JOIN SYN waiting for its SYN/ACK. The path sets themselves live in
/// `mptcp_connections`; the entry records which keys lead to them.
#[derive(Debug, Clone, PartialEq)]
pub struct PendingJoin {
    /// Key carried by the SYN: the listener side of the new subflow.
    pub peer_key: u64,
    /// Key of the joining side, whose path set carries the reply.
    pub reply_key: u64,
    pub route: Path,
    pub created: f64,
}

/// Established session half, keyed by the key of one endpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct Connection {
    pub peer_key: u64,
    /// Runs toward the owner of the key this entry is stored under.
    pub path_set: PathSet,
    pub last_used: f64,
}

/// The three tables tracking handshakes and established sessions.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SessionTables {
    pub pending_capable: BTreeMap<EndpointPair, PendingCapable>,
    pub pending_join: BTreeMap<EndpointPair, PendingJoin>,
    pub mptcp_connections: BTreeMap<u64, Connection>,
}

impl SessionTables {
    pub fn is_empty(&self) -> bool {
        self.pending_capable.is_empty()
            && self.pending_join.is_empty()
            && self.mptcp_connections.is_empty()
    }

    /// Drop entries older than the configured lifetimes.
    pub fn expire(&mut self, now: f64, cfg: &SmocConfig, delta: &mut Vec<TableDelta>) {
        if let Some(ttl) = cfg.pending_ttl {
            self.pending_capable.retain(|ep, e| {
                let keep = now - e.created <= ttl;
                if !keep {
                    delta.push(TableDelta::PendingCapableExpired { endpoints: *ep });
                }
                keep
            });
            self.pending_join.retain(|ep, e| {
                let keep = now - e.created <= ttl;
                if !keep {
                    delta.push(TableDelta::PendingJoinExpired { endpoints: *ep });
                }
                keep
            });
        }
        if let Some(ttl) = cfg.connection_ttl {
            self.mptcp_connections.retain(|key, c| {
                let keep = now - c.last_used <= ttl;
                if !keep {
                    delta.push(TableDelta::ConnectionExpired { key: *key });
                }
                keep
            });
        }
    }

    fn key_in_use(&self, key: u64, except: Option<&EndpointPair>) -> bool {
        self.mptcp_connections.contains_key(&key)
            || self
                .pending_capable
                .iter()
                .any(|(ep, e)| e.initiator_key == key && Some(ep) != except)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SmocConfig {
    pub path_options: PathSetOptions,
    /// Lifetime of unanswered pending entries, in seconds. `None` keeps them
    /// forever.
    pub pending_ttl: Option<f64>,
    /// Idle lifetime of established connections. `None` keeps them forever;
    /// FIN and RST never remove them.
    pub connection_ttl: Option<f64>,
}

/// The multipath controller: session tables plus configuration.
#[derive(Debug, Clone, Default)]
pub struct Smoc {
    pub tables: SessionTables,
    pub config: SmocConfig,
}

impl Smoc {
    pub fn new(config: SmocConfig) -> Self {
        Self {
            tables: SessionTables::default(),
            config,
        }
    }
}

impl Controller for Smoc {
    fn name(&self) -> &'static str {
        "smoc"
    }

    fn handle_packet_in(
        &mut self,
        topo: &Topology,
        ev: &PacketInEvent,
    ) -> Result<Decision, ControllerError> {
        handle_packet_in(&mut self.tables, topo, ev, &self.config)
    }
}

// Route choice before flow rules are attached.
struct Choice {
    route: Path,
    index: Option<usize>,
}

/// Process one packet-in against the session tables.
///
/// MP_CAPABLE SYNs open a pending session with a fresh initiator-to-listener
/// path set; the SYN/ACK completes it, adding a listener-to-initiator set and
/// one `mptcp_connections` entry per key. MP_JOIN SYNs draw the next path
/// from the set toward the owner of the key they carry and their SYN/ACKs
/// draw from the set toward the joining side. Anything else, and any lookup
/// miss, takes the shortest path.
pub fn handle_packet_in(
    tables: &mut SessionTables,
    topo: &Topology,
    ev: &PacketInEvent,
    cfg: &SmocConfig,
) -> Result<Decision, ControllerError> {
    let packet = &ev.packet;
    let class = classify(packet);
    let (src, dst) = endpoint_hosts(topo, &packet.endpoints)?;
    let mut delta = Vec::new();
    let mut warnings = Vec::new();

    tables.expire(ev.time, cfg, &mut delta);

    let choice = match (class, packet.mptcp) {
        (PacketClass::MpCapableSyn, Some(MptcpOption::MpCapable { key })) => capable_syn(
            tables,
            topo,
            ev,
            key,
            src,
            dst,
            cfg,
            &mut delta,
            &mut warnings,
        )?,
        (PacketClass::MpCapableSynAck, Some(MptcpOption::MpCapable { key })) => capable_syn_ack(
            tables,
            topo,
            ev,
            key,
            src,
            dst,
            cfg,
            &mut delta,
            &mut warnings,
        )?,
        (PacketClass::MpJoinSyn, Some(MptcpOption::MpJoin { peer_key })) => {
            join_syn(tables, ev, peer_key, src, dst, &mut delta, &mut warnings)
        }
        (PacketClass::MpJoinSynAck, _) => {
            join_syn_ack(tables, ev, src, dst, &mut delta, &mut warnings)
        }
        _ => None,
    };

    let choice = match choice {
        Some(c) => c,
        None => Choice {
            route: shortest_path(topo, &src.switch, &dst.switch)?,
            index: None,
        },
    };
    for w in &warnings {
        warn!("smoc: {} on {} ({})", w, packet.endpoints, class);
    }
    let rules = install_path(topo, &choice.route, packet.endpoints, &src.id, &dst.id)?;
    let decision = Decision {
        class,
        route: choice.route,
        path_index: choice.index,
        rules,
        table_delta: delta,
        warnings,
    };
    debug!("{}", decision.audit_line("smoc", ev));
    Ok(decision)
}

#[allow(clippy::too_many_arguments)]
fn capable_syn(
    tables: &mut SessionTables,
    topo: &Topology,
    ev: &PacketInEvent,
    key: u64,
    src: &Host,
    dst: &Host,
    cfg: &SmocConfig,
    delta: &mut Vec<TableDelta>,
    warnings: &mut Vec<ControllerWarning>,
) -> Result<Option<Choice>, ControllerError> {
    let endpoints = ev.packet.endpoints;
    if let Some(entry) = tables.pending_capable.get(&endpoints) {
        if entry.initiator_key == key {
            // Retransmission: same answer, cursor untouched.
            delta.push(TableDelta::PendingCapableReuse { endpoints });
            return Ok(Some(Choice {
                route: entry.route.clone(),
                index: entry.path_set.last_issued().map(|(i, _)| i),
            }));
        }
    }
    if tables.key_in_use(key, Some(&endpoints)) {
        warnings.push(ControllerWarning::KeyCollision { key });
        return Ok(None);
    }
    if tables.pending_capable.remove(&endpoints).is_some() {
        delta.push(TableDelta::PendingCapableRemove { endpoints });
    }
    if tables.pending_join.remove(&endpoints).is_some() {
        delta.push(TableDelta::PendingJoinRemove { endpoints });
    }

    let mut path_set = compute_path_set(topo, &src.switch, &dst.switch, cfg.path_options)?;
    let route = path_set.next_path().clone();
    let index = path_set.last_issued().map(|(i, _)| i);
    tables.pending_capable.insert(
        endpoints,
        PendingCapable {
            initiator_key: key,
            path_set,
            route: route.clone(),
            created: ev.time,
        },
    );
    delta.push(TableDelta::PendingCapableInsert { endpoints, key });
    Ok(Some(Choice { route, index }))
}

#[allow(clippy::too_many_arguments)]
fn capable_syn_ack(
    tables: &mut SessionTables,
    topo: &Topology,
    ev: &PacketInEvent,
    responder_key: u64,
    src: &Host,
    dst: &Host,
    cfg: &SmocConfig,
    delta: &mut Vec<TableDelta>,
    warnings: &mut Vec<ControllerWarning>,
) -> Result<Option<Choice>, ControllerError> {
    let opening = ev.packet.endpoints.reversed();
    let Some(pending) = tables.pending_capable.get(&opening) else {
        warnings.push(ControllerWarning::NoPendingEntry);
        return Ok(None);
    };
    let initiator_key = pending.initiator_key;
    if responder_key == initiator_key || tables.key_in_use(responder_key, Some(&opening)) {
        warnings.push(ControllerWarning::KeyCollision { key: responder_key });
        return Ok(None);
    }

    // Listener to initiator: this packet's own direction.
    let mut toward_initiator = compute_path_set(topo, &src.switch, &dst.switch, cfg.path_options)?;
    let pending = tables
        .pending_capable
        .remove(&opening)
        .expect("checked above");
    delta.push(TableDelta::PendingCapableRemove { endpoints: opening });

    let route = toward_initiator.next_path().clone();
    let index = toward_initiator.last_issued().map(|(i, _)| i);
    tables.mptcp_connections.insert(
        initiator_key,
        Connection {
            peer_key: responder_key,
            path_set: toward_initiator,
            last_used: ev.time,
        },
    );
    tables.mptcp_connections.insert(
        responder_key,
        Connection {
            peer_key: initiator_key,
            path_set: pending.path_set,
            last_used: ev.time,
        },
    );
    delta.push(TableDelta::ConnectionInsert {
        key: initiator_key,
        peer_key: responder_key,
    });
    delta.push(TableDelta::ConnectionInsert {
        key: responder_key,
        peer_key: initiator_key,
    });
    Ok(Some(Choice { route, index }))
}

// Draw the next path from `key`'s set if it runs between the given hosts.
fn draw(
    tables: &mut SessionTables,
    key: u64,
    src: &Host,
    dst: &Host,
    now: f64,
    warnings: &mut Vec<ControllerWarning>,
) -> Option<Choice> {
    let conn = tables.mptcp_connections.get_mut(&key)?;
    if conn.path_set.source() != &src.switch || conn.path_set.target() != &dst.switch {
        warnings.push(ControllerWarning::PathSetMismatch { key });
        return None;
    }
    conn.last_used = now;
    let route = conn.path_set.next_path().clone();
    Some(Choice {
        route,
        index: conn.path_set.last_issued().map(|(i, _)| i),
    })
}

fn join_syn(
    tables: &mut SessionTables,
    ev: &PacketInEvent,
    peer_key: u64,
    src: &Host,
    dst: &Host,
    delta: &mut Vec<TableDelta>,
    warnings: &mut Vec<ControllerWarning>,
) -> Option<Choice> {
    let endpoints = ev.packet.endpoints;
    if let Some(entry) = tables.pending_join.get(&endpoints) {
        if entry.peer_key == peer_key {
            delta.push(TableDelta::PendingJoinReuse { endpoints });
            let index = tables
                .mptcp_connections
                .get(&peer_key)
                .and_then(|c| c.path_set.last_issued())
                .filter(|(_, p)| **p == entry.route)
                .map(|(i, _)| i);
            return Some(Choice {
                route: entry.route.clone(),
                index,
            });
        }
    }
    let Some(reply_key) = tables.mptcp_connections.get(&peer_key).map(|c| c.peer_key) else {
        warnings.push(ControllerWarning::UnknownSession { peer_key });
        return None;
    };
    let choice = draw(tables, peer_key, src, dst, ev.time, warnings)?;

    if tables.pending_capable.remove(&endpoints).is_some() {
        delta.push(TableDelta::PendingCapableRemove { endpoints });
    }
    tables.pending_join.insert(
        endpoints,
        PendingJoin {
            peer_key,
            reply_key,
            route: choice.route.clone(),
            created: ev.time,
        },
    );
    delta.push(TableDelta::PendingJoinInsert {
        endpoints,
        peer_key,
    });
    Some(choice)
}

fn join_syn_ack(
    tables: &mut SessionTables,
    ev: &PacketInEvent,
    src: &Host,
    dst: &Host,
    delta: &mut Vec<TableDelta>,
    warnings: &mut Vec<ControllerWarning>,
) -> Option<Choice> {
    let opening = ev.packet.endpoints.reversed();
    let Some(pending) = tables.pending_join.remove(&opening) else {
        warnings.push(ControllerWarning::NoPendingEntry);
        return None;
    };
    delta.push(TableDelta::PendingJoinRemove { endpoints: opening });
    if !tables.mptcp_connections.contains_key(&pending.reply_key) {
        warnings.push(ControllerWarning::UnknownSession {
            peer_key: pending.reply_key,
        });
        return None;
    }
    draw(tables, pending.reply_key, src, dst, ev.time, warnings)
}
