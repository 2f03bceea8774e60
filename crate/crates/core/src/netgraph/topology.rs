use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt;
use std::net::Ipv4Addr;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SwitchId(String);

impl SwitchId {
    pub fn new(id: impl Into<String>) -> Self {
        SwitchId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for SwitchId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for SwitchId {
    fn from(s: &str) -> Self {
        SwitchId::new(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HostId(String);

impl HostId {
    pub fn new(id: impl Into<String>) -> Self {
        HostId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for HostId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for HostId {
    fn from(s: &str) -> Self {
        HostId::new(s)
    }
}

/// Switch port number. Ports are numbered from 1: first one port per
/// neighboring switch in id order, then one per attached host in id order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PortId(pub u16);

impl fmt::Display for PortId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// What sits on the far side of a switch port.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PortPeer {
    Switch(SwitchId),
    Host(HostId),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub a: SwitchId,
    pub b: SwitchId,
    pub capacity: f64,
}

impl fmt::Display for Link {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.a, self.b)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Host {
    pub id: HostId,
    pub switch: SwitchId,
    pub ip: Ipv4Addr,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TopologyError {
    #[error("duplicate switch {0}")]
    DuplicateSwitch(String),
    #[error("unknown switch {0}")]
    UnknownSwitch(String),
    #[error("self-loop on switch {0}")]
    SelfLoop(String),
    #[error("duplicate link {0}-{1}")]
    DuplicateLink(String, String),
    #[error("link capacity must be positive and finite, got {0}")]
    BadCapacity(f64),
    #[error("duplicate host {0}")]
    DuplicateHost(String),
    #[error("ip {0} is already assigned")]
    DuplicateIp(Ipv4Addr),
    #[error("topology has no switches")]
    Empty,
    #[error("topology is not connected: {0} unreachable from {1}")]
    Disconnected(String, String),
}

/// Incremental constructor for [`Topology`]. Switches must be declared
/// before links or hosts reference them.
#[derive(Debug, Default, Clone)]
pub struct TopologyBuilder {
    switches: BTreeMap<SwitchId, ()>,
    links: BTreeMap<(SwitchId, SwitchId), f64>,
    hosts: BTreeMap<HostId, Host>,
    ips: HashMap<Ipv4Addr, HostId>,
}

impl TopologyBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn switch(&mut self, id: impl Into<SwitchId>) -> Result<&mut Self, TopologyError> {
        let id = id.into();
        if self.switches.insert(id.clone(), ()).is_some() {
            return Err(TopologyError::DuplicateSwitch(id.0));
        }
        Ok(self)
    }

    pub fn link(
        &mut self,
        a: impl Into<SwitchId>,
        b: impl Into<SwitchId>,
        capacity: f64,
    ) -> Result<&mut Self, TopologyError> {
        let (a, b) = (a.into(), b.into());
        for s in [&a, &b] {
            if !self.switches.contains_key(s) {
                return Err(TopologyError::UnknownSwitch(s.0.clone()));
            }
        }
        if a == b {
            return Err(TopologyError::SelfLoop(a.0));
        }
        if !(capacity.is_finite() && capacity > 0.0) {
            return Err(TopologyError::BadCapacity(capacity));
        }
        let key = if a < b { (a, b) } else { (b, a) };
        if self.links.contains_key(&key) {
            return Err(TopologyError::DuplicateLink(key.0 .0, key.1 .0));
        }
        self.links.insert(key, capacity);
        Ok(self)
    }

    pub fn host(
        &mut self,
        id: impl Into<HostId>,
        switch: impl Into<SwitchId>,
        ip: Ipv4Addr,
    ) -> Result<&mut Self, TopologyError> {
        let (id, switch) = (id.into(), switch.into());
        if !self.switches.contains_key(&switch) {
            return Err(TopologyError::UnknownSwitch(switch.0));
        }
        if self.hosts.contains_key(&id) {
            return Err(TopologyError::DuplicateHost(id.0));
        }
        if self.ips.contains_key(&ip) {
            return Err(TopologyError::DuplicateIp(ip));
        }
        self.ips.insert(ip, id.clone());
        self.hosts.insert(id.clone(), Host { id, switch, ip });
        Ok(self)
    }

    pub fn build(&self) -> Result<Topology, TopologyError> {
        if self.switches.is_empty() {
            return Err(TopologyError::Empty);
        }
        let switches: Vec<SwitchId> = self.switches.keys().cloned().collect();
        let index: HashMap<SwitchId, usize> = switches
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect();

        let mut adj = vec![Vec::new(); switches.len()];
        let mut capacity = BTreeMap::new();
        for ((a, b), &cap) in &self.links {
            let (ia, ib) = (index[a], index[b]);
            adj[ia].push(ib);
            adj[ib].push(ia);
            capacity.insert((ia.min(ib), ia.max(ib)), cap);
        }
        for n in &mut adj {
            n.sort_unstable();
        }

        let mut ports: Vec<Vec<PortPeer>> = adj
            .iter()
            .map(|n| {
                n.iter()
                    .map(|&j| PortPeer::Switch(switches[j].clone()))
                    .collect()
            })
            .collect();
        for host in self.hosts.values() {
            ports[index[&host.switch]].push(PortPeer::Host(host.id.clone()));
        }

        let topo = Topology {
            switches,
            index,
            adj,
            capacity,
            hosts: self.hosts.clone(),
            host_by_ip: self.ips.iter().map(|(ip, h)| (*ip, h.clone())).collect(),
            ports,
        };
        if let Some(unreached) = topo.first_unreachable() {
            return Err(TopologyError::Disconnected(
                topo.switches[unreached].0.clone(),
                topo.switches[0].0.clone(),
            ));
        }
        Ok(topo)
    }
}

/// Undirected, connected switch graph with capacity-labeled links and host
/// attachment points. Immutable once built.
///
/// Switches are held in id order; the dense indices used by the path
/// algorithms preserve that order, so comparing index sequences is the same
/// as comparing switch-id sequences.
#[derive(Debug, Clone)]
pub struct Topology {
    switches: Vec<SwitchId>,
    index: HashMap<SwitchId, usize>,
    adj: Vec<Vec<usize>>,
    capacity: BTreeMap<(usize, usize), f64>,
    hosts: BTreeMap<HostId, Host>,
    host_by_ip: HashMap<Ipv4Addr, HostId>,
    ports: Vec<Vec<PortPeer>>,
}

impl PartialEq for Topology {
    fn eq(&self, other: &Self) -> bool {
        self.switches == other.switches
            && self.capacity == other.capacity
            && self.hosts == other.hosts
    }
}

impl Topology {
    pub fn builder() -> TopologyBuilder {
        TopologyBuilder::new()
    }

    pub fn switches(&self) -> &[SwitchId] {
        &self.switches
    }

    pub fn contains_switch(&self, id: &SwitchId) -> bool {
        self.index.contains_key(id)
    }

    /// Links in (a, b) id order with a < b.
    pub fn links(&self) -> impl Iterator<Item = Link> + '_ {
        self.capacity.iter().map(|(&(a, b), &capacity)| Link {
            a: self.switches[a].clone(),
            b: self.switches[b].clone(),
            capacity,
        })
    }

    pub fn link_count(&self) -> usize {
        self.capacity.len()
    }

    pub fn capacity(&self, a: &SwitchId, b: &SwitchId) -> Option<f64> {
        let (ia, ib) = (*self.index.get(a)?, *self.index.get(b)?);
        self.capacity.get(&(ia.min(ib), ia.max(ib))).copied()
    }

    pub fn neighbors(&self, s: &SwitchId) -> impl Iterator<Item = &SwitchId> + '_ {
        let n: &[usize] = match self.index.get(s) {
            Some(&i) => &self.adj[i],
            None => &[],
        };
        n.iter().map(|&j| &self.switches[j])
    }

    pub fn hosts(&self) -> impl Iterator<Item = &Host> + '_ {
        self.hosts.values()
    }

    pub fn host(&self, id: &HostId) -> Option<&Host> {
        self.hosts.get(id)
    }

    pub fn host_by_ip(&self, ip: Ipv4Addr) -> Option<&Host> {
        self.host_by_ip.get(&ip).and_then(|h| self.hosts.get(h))
    }

    /// Port map of a switch, ordered by port number starting at 1.
    pub fn ports(&self, s: &SwitchId) -> Option<impl Iterator<Item = (PortId, &PortPeer)> + '_> {
        let i = *self.index.get(s)?;
        Some(
            self.ports[i]
                .iter()
                .enumerate()
                .map(|(k, peer)| (PortId(k as u16 + 1), peer)),
        )
    }

    pub fn port_peer(&self, s: &SwitchId, port: PortId) -> Option<&PortPeer> {
        let i = *self.index.get(s)?;
        self.ports[i].get((port.0 as usize).checked_sub(1)?)
    }

    pub fn port_toward_switch(&self, s: &SwitchId, next: &SwitchId) -> Option<PortId> {
        let (i, j) = (*self.index.get(s)?, *self.index.get(next)?);
        let k = self.adj[i].binary_search(&j).ok()?;
        Some(PortId(k as u16 + 1))
    }

    pub fn port_toward_host(&self, s: &SwitchId, host: &HostId) -> Option<PortId> {
        let i = *self.index.get(s)?;
        let k = self.ports[i]
            .iter()
            .position(|p| matches!(p, PortPeer::Host(h) if h == host))?;
        Some(PortId(k as u16 + 1))
    }

    pub(crate) fn idx(&self, s: &SwitchId) -> Option<usize> {
        self.index.get(s).copied()
    }

    pub(crate) fn id(&self, i: usize) -> &SwitchId {
        &self.switches[i]
    }

    pub(crate) fn adj(&self, i: usize) -> &[usize] {
        &self.adj[i]
    }

    pub(crate) fn capacity_idx(&self, a: usize, b: usize) -> Option<f64> {
        self.capacity.get(&(a.min(b), a.max(b))).copied()
    }

    fn first_unreachable(&self) -> Option<usize> {
        let mut seen = vec![false; self.switches.len()];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(u) = queue.pop_front() {
            for &v in &self.adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        seen.iter().position(|s| !s)
    }
}

/// Line-numbered parse failure in a topology or scenario file.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("line {line}: {message}")]
pub struct ParseError {
    /// 1-based line number; 0 when the error concerns the file as a whole.
    pub line: usize,
    pub message: String,
}

impl ParseError {
    pub fn new(line: usize, message: impl Into<String>) -> Self {
        Self {
            line,
            message: message.into(),
        }
    }
}

/// Significant lines of a `format=1` text file: comments and blank lines
/// are dropped, and the version header is checked and consumed.
pub(crate) fn significant_lines(
    text: &str,
) -> Result<impl Iterator<Item = (usize, Vec<&str>)> + '_, ParseError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty())
        .peekable();
    match lines.peek() {
        Some((_, "format=1")) => {
            lines.next();
        }
        Some((n, l)) if l.starts_with("format=") => {
            return Err(ParseError::new(*n, format!("unsupported version `{l}`")))
        }
        Some((n, _)) => return Err(ParseError::new(*n, "missing `format=1` header")),
        None => return Err(ParseError::new(0, "empty file")),
    }
    Ok(lines.map(|(n, l)| (n, l.split_whitespace().collect())))
}

/// Parse the line-oriented topology format:
///
/// ```text
/// format=1
/// switch <id>
/// link <id1> <id2> <capacity>
/// host <id> <switch> <ip>
/// ```
///
/// `#` starts a comment.
pub fn parse_topology(text: &str) -> Result<Topology, ParseError> {
    let mut b = TopologyBuilder::new();
    for (n, words) in significant_lines(text)? {
        let res = match words.as_slice() {
            ["switch", id] => b.switch(*id).map(drop),
            ["link", a, c, cap] => {
                let cap: f64 = cap
                    .parse()
                    .map_err(|_| ParseError::new(n, format!("bad capacity `{cap}`")))?;
                b.link(*a, *c, cap).map(drop)
            }
            ["host", id, sw, ip] => {
                let ip: Ipv4Addr = ip
                    .parse()
                    .map_err(|_| ParseError::new(n, format!("bad ip `{ip}`")))?;
                b.host(*id, *sw, ip).map(drop)
            }
            [kw @ ("switch" | "link" | "host"), ..] => {
                return Err(ParseError::new(
                    n,
                    format!("wrong number of fields for `{kw}`"),
                ))
            }
            [kw, ..] => return Err(ParseError::new(n, format!("unknown directive `{kw}`"))),
            [] => unreachable!(),
        };
        res.map_err(|e| ParseError::new(n, e.to_string()))?;
    }
    b.build().map_err(|e| ParseError::new(0, e.to_string()))
}

/// Inverse of [`parse_topology`], in canonical order.
pub fn format_topology(topo: &Topology) -> String {
    let mut out = String::from("format=1\n");
    for s in topo.switches() {
        out.push_str(&format!("switch {s}\n"));
    }
    for l in topo.links() {
        out.push_str(&format!("link {} {} {}\n", l.a, l.b, l.capacity));
    }
    for h in topo.hosts() {
        out.push_str(&format!("host {} {} {}\n", h.id, h.switch, h.ip));
    }
    out
}
