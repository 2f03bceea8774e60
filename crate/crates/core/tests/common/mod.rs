//! Independent reference implementations shared by the integration suites.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::Rng;
use smoc_core::netgraph::{parse_topology, Path, SwitchId, Topology, TopologyBuilder};

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

pub fn fixture(name: &str) -> Topology {
    parse_topology(&std::fs::read_to_string(fixture_path(name)).unwrap()).unwrap()
}

/// Connected graph on 2..=max_n switches with shuffled single-letter ids:
/// a random tree plus each remaining pair with probability `extra`.
pub fn random_topology<R: Rng>(rng: &mut R, max_n: usize, extra: f64) -> Topology {
    let n = rng.random_range(2..=max_n);
    let mut names: Vec<String> = ('a'..='z').map(|c| c.to_string()).collect();
    names.shuffle(rng);
    names.truncate(n);
    let mut b = TopologyBuilder::new();
    for s in &names {
        b.switch(s.as_str()).unwrap();
    }
    let mut edges = BTreeSet::new();
    for i in 1..n {
        let j = rng.random_range(0..i);
        edges.insert((j, i));
    }
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(extra) {
                edges.insert((i, j));
            }
        }
    }
    for (i, j) in edges {
        let cap = rng.random_range(1..=10) as f64 * 10.0;
        b.link(names[i].as_str(), names[j].as_str(), cap).unwrap();
    }
    b.build().unwrap()
}

fn linked(topo: &Topology, a: &SwitchId, b: &SwitchId) -> bool {
    topo.capacity(a, b).is_some()
}

/// Every simple path from s1 to s2: try every ordering of every subset of
/// the other switches and keep the ones whose consecutive pairs are linked.
pub fn brute_force_simple_paths(topo: &Topology, s1: &SwitchId, s2: &SwitchId) -> Vec<Path> {
    let inner: Vec<SwitchId> = topo
        .switches()
        .iter()
        .filter(|s| *s != s1 && *s != s2)
        .cloned()
        .collect();
    let mut out = Vec::new();
    let mut seq = Vec::new();
    fn rec(
        topo: &Topology,
        inner: &[SwitchId],
        used: &mut Vec<bool>,
        seq: &mut Vec<SwitchId>,
        s1: &SwitchId,
        s2: &SwitchId,
        out: &mut Vec<Path>,
    ) {
        let mut full = vec![s1.clone()];
        full.extend(seq.iter().cloned());
        full.push(s2.clone());
        if full.windows(2).all(|w| linked(topo, &w[0], &w[1])) {
            out.push(Path::new(full));
        }
        for i in 0..inner.len() {
            if !used[i] {
                used[i] = true;
                seq.push(inner[i].clone());
                rec(topo, inner, used, seq, s1, s2, out);
                seq.pop();
                used[i] = false;
            }
        }
    }
    let mut used = vec![false; inner.len()];
    rec(topo, &inner, &mut used, &mut seq, s1, s2, &mut out);
    out.sort();
    out
}

fn edge_set(p: &Path) -> BTreeSet<(SwitchId, SwitchId)> {
    p.switches()
        .windows(2)
        .map(|w| {
            if w[0] < w[1] {
                (w[0].clone(), w[1].clone())
            } else {
                (w[1].clone(), w[0].clone())
            }
        })
        .collect()
}

/// Reference path set: the shortest, lexicographically first path, then the
/// others stably sorted by (shared edges, hop count) over lexicographic order.
pub fn oracle_path_set(topo: &Topology, s1: &SwitchId, s2: &SwitchId) -> Vec<Path> {
    let mut all = brute_force_simple_paths(topo, s1, s2);
    let min_len = all.iter().map(|p| p.switches().len()).min().unwrap();
    let primary_pos = all
        .iter()
        .position(|p| p.switches().len() == min_len)
        .unwrap();
    let primary = all.remove(primary_pos);
    let pe = edge_set(&primary);
    all.sort_by_key(|p| (edge_set(p).intersection(&pe).count(), p.switches().len()));
    let mut set = vec![primary];
    set.extend(all);
    set
}

/// Max-min fair rates by repeatedly fixing the most constrained link: the
/// link whose residual capacity divided among its unfixed flows is smallest
/// fixes all of those flows at that share.
pub fn water_fill_oracle(flows: &[Path], topo: &Topology) -> Vec<f64> {
    let links: Vec<BTreeSet<(SwitchId, SwitchId)>> = flows.iter().map(edge_set).collect();
    let mut all_links: BTreeMap<(SwitchId, SwitchId), f64> = BTreeMap::new();
    for ls in &links {
        for l in ls {
            all_links.insert(l.clone(), topo.capacity(&l.0, &l.1).unwrap());
        }
    }
    let mut rate: Vec<Option<f64>> = links
        .iter()
        .map(|l| {
            if l.is_empty() {
                Some(f64::INFINITY)
            } else {
                None
            }
        })
        .collect();
    loop {
        let mut best: Option<(f64, &(SwitchId, SwitchId))> = None;
        for (l, cap) in &all_links {
            let fixed: f64 = (0..flows.len())
                .filter(|&i| links[i].contains(l))
                .filter_map(|i| rate[i])
                .sum();
            let open = (0..flows.len())
                .filter(|&i| links[i].contains(l) && rate[i].is_none())
                .count();
            if open == 0 {
                continue;
            }
            let share = (cap - fixed) / open as f64;
            if best.is_none_or(|(s, _)| share < s) {
                best = Some((share, l));
            }
        }
        let Some((share, l)) = best else { break };
        for i in 0..flows.len() {
            if rate[i].is_none() && links[i].contains(l) {
                rate[i] = Some(share);
            }
        }
    }
    rate.into_iter().map(|r| r.unwrap()).collect()
}

use smoc_core::controller::{Controller, Decision, PacketInEvent};
use smoc_core::wire::{EndpointPair, MptcpOption, Packet, TcpFlags};

pub const INITIATOR_KEY: u64 = 0x1111_2222_3333_4444;
pub const LISTENER_KEY: u64 = 0x5555_6666_7777_8888;

/// Packet-in as raised by the switch the sending host hangs off.
pub fn host_event(
    topo: &Topology,
    endpoints: EndpointPair,
    tcp_flags: TcpFlags,
    mptcp: Option<MptcpOption>,
    time: f64,
) -> PacketInEvent {
    let host = topo.host_by_ip(endpoints.src_ip).expect("known source");
    PacketInEvent {
        switch: host.switch.clone(),
        in_port: topo.port_toward_host(&host.switch, &host.id).unwrap(),
        packet: Packet {
            endpoints,
            tcp_flags,
            mptcp,
            payload_len: 0,
        },
        time,
    }
}

/// The packet-ins of one session between two hosts: the MP_CAPABLE exchange,
/// then an MP_JOIN exchange for each extra subflow, then one data segment.
pub fn session_events(
    topo: &Topology,
    initiator: &str,
    listener: &str,
    subflows: u16,
) -> Vec<PacketInEvent> {
    let i = topo.host(&initiator.into()).unwrap().ip;
    let l = topo.host(&listener.into()).unwrap().ip;
    let mut out = Vec::new();
    let mut t = 0.0;
    for k in 0..subflows {
        let fwd = EndpointPair::new(i, 40000 + k, l, 5001);
        let (syn, reply) = if k == 0 {
            (
                MptcpOption::MpCapable { key: INITIATOR_KEY },
                MptcpOption::MpCapable { key: LISTENER_KEY },
            )
        } else {
            (
                MptcpOption::MpJoin {
                    peer_key: LISTENER_KEY,
                },
                MptcpOption::MpJoin {
                    peer_key: INITIATOR_KEY,
                },
            )
        };
        out.push(host_event(topo, fwd, TcpFlags::SYN, Some(syn), t));
        t += 0.001;
        out.push(host_event(
            topo,
            fwd.reversed(),
            TcpFlags::SYN | TcpFlags::ACK,
            Some(reply),
            t,
        ));
        t += 0.001;
    }
    let data = EndpointPair::new(i, 40000, l, 5001);
    let mut ack = host_event(topo, data, TcpFlags::ACK, None, t);
    ack.packet.payload_len = 1460;
    out.push(ack);
    out
}

/// Feed events to a controller, collecting decisions and audit lines.
pub fn drive(
    topo: &Topology,
    controller: &mut dyn Controller,
    events: &[PacketInEvent],
) -> Vec<(Decision, String)> {
    events
        .iter()
        .map(|ev| {
            let d = controller.handle_packet_in(topo, ev).unwrap();
            let line = d.audit_line(controller.name(), ev);
            (d, line)
        })
        .collect()
}

/// Compare against a checked-in file; `SMOC_BLESS=1` rewrites it instead.
pub fn check_golden(name: &str, actual: &str) -> Result<(), String> {
    let path = fixture_path("traces").join(name);
    if std::env::var_os("SMOC_BLESS").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, actual).unwrap();
        return Ok(());
    }
    let expected =
        std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    if expected == actual {
        Ok(())
    } else {
        Err(format!(
            "{} differs:\n--- expected\n{expected}--- actual\n{actual}",
            path.display()
        ))
    }
}
