//! Deterministic discrete-time fluid simulation of the switch fabric.
//!
//! Each step: pending flow rules whose install delay has elapsed become
//! active; sessions due to start send their handshakes; subflows whose
//! forward and reverse rules are fully active become established; the
//! established subflows share link capacity max-min fairly; the step is
//! recorded.
//!
//! Handshake segments travel hop by hop through the flow tables. On a miss
//! the switch raises a packet-in, the controller's rules are scheduled for
//! activation after the install delay, and the segment itself is carried
//! along the decided route right away (the controller sends it back out), so
//! the whole handshake completes within the starting step. Only the SYN and
//! SYN/ACK of each subflow reach the controller; data never does. Handshake
//! segments carry no payload and consume no bandwidth.

mod fabric;
mod maxmin;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::controller::{Controller, ControllerKind, FlowRule, PacketInEvent};
use crate::netgraph::{HostId, Link, Path, PortId, PortPeer, SwitchId, Topology};
use crate::wire::{EndpointPair, MptcpOption, Packet, TcpFlags};

pub use fabric::{Delivery, SwitchState};
pub use maxmin::maxmin_allocate;

/// First source port handed to subflows; incremented per subflow.
pub const FIRST_SOURCE_PORT: u16 = 40000;
/// Listener port of every session.
pub const LISTEN_PORT: u16 = 5001;

const DATA_PAYLOAD: u16 = 1460;
const EPS: f64 = 1e-9;

/// One MPTCP session driven to saturation between two hosts.
#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    pub id: u32,
    pub initiator: HostId,
    pub listener: HostId,
    pub initiator_key: u64,
    pub listener_key: u64,
    /// Number of subflows to open, the first one included.
    pub subflows: usize,
    /// Start time in simulated seconds.
    pub start_time: f64,
}

/// Session parameters before keys are assigned.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionSpec {
    pub id: u32,
    pub initiator: HostId,
    pub listener: HostId,
    pub subflows: usize,
    pub start_time: f64,
}

/// Draw distinct, non-zero keys for every session from `seed`.
pub fn assign_keys(specs: &[SessionSpec], seed: u64) -> Vec<Session> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut used = std::collections::BTreeSet::new();
    let mut fresh = || loop {
        let k: u64 = rng.random();
        if k != 0 && used.insert(k) {
            return k;
        }
    };
    specs
        .iter()
        .map(|s| Session {
            id: s.id,
            initiator: s.initiator.clone(),
            listener: s.listener.clone(),
            initiator_key: fresh(),
            listener_key: fresh(),
            subflows: s.subflows,
            start_time: s.start_time,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    /// Step length in seconds.
    pub step: f64,
    /// Last recorded time in seconds; steps run from 0 through `duration`.
    pub duration: f64,
    /// Delay between a controller decision and its rules becoming active.
    pub install_delay: f64,
    /// Seeds session key generation.
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            step: 0.5,
            duration: 10.0,
            install_delay: 0.0,
            seed: 1,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.step.is_finite() && self.step > 0.0) {
            return Err(SimError::Config(format!(
                "step must be positive, got {}",
                self.step
            )));
        }
        if !(self.duration.is_finite() && self.duration >= 0.0) {
            return Err(SimError::Config(format!(
                "duration must be non-negative, got {}",
                self.duration
            )));
        }
        if !(self.install_delay.is_finite() && self.install_delay >= 0.0) {
            return Err(SimError::Config(format!(
                "install_delay must be non-negative, got {}",
                self.install_delay
            )));
        }
        Ok(())
    }

    pub fn step_count(&self) -> usize {
        (self.duration / self.step + EPS).floor() as usize + 1
    }

    /// Steps between a decision and the activation of its rules.
    pub fn delay_steps(&self) -> usize {
        ticks_ceil(self.install_delay, self.step)
    }

    pub fn time_of(&self, tick: usize) -> f64 {
        tick as f64 * self.step
    }
}

fn ticks_ceil(t: f64, step: f64) -> usize {
    ((t / step - EPS).ceil()).max(0.0) as usize
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("link {link} carries {load} over capacity {capacity} at t={time}")]
    CapacityViolation {
        link: String,
        load: f64,
        capacity: f64,
        time: f64,
    },
    #[error("packet {0} looped in the fabric")]
    ForwardingLoop(EndpointPair),
    #[error("packet {0} delivered to the wrong host {1}")]
    Misdelivered(EndpointPair, HostId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubflowState {
    Handshaking,
    Established,
    Blocked,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Subflow {
    /// Initiator to listener.
    pub endpoints: EndpointPair,
    pub session: u32,
    pub index: usize,
    /// Forward data path, known once established.
    pub route: Option<Path>,
    pub state: SubflowState,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesPoint {
    pub time: f64,
    /// Aggregate rate per session, in session order.
    pub session_rates: Vec<f64>,
    /// Load per link, in [`ThroughputSeries::links`] order.
    pub link_utilization: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThroughputSeries {
    pub session_ids: Vec<u32>,
    pub links: Vec<Link>,
    pub points: Vec<SeriesPoint>,
}

impl ThroughputSeries {
    /// CSV with a `# format=1` comment line, then a header of `time`, one
    /// `session_<id>` column per session and one `link_<a>-<b>` per link.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("# format=1\ntime");
        for id in &self.session_ids {
            let _ = write!(out, ",session_{id}");
        }
        for l in &self.links {
            let _ = write!(out, ",link_{l}");
        }
        out.push('\n');
        for p in &self.points {
            let _ = write!(out, "{:.6}", p.time);
            for v in p.session_rates.iter().chain(&p.link_utilization) {
                let _ = write!(out, ",{v:.6}");
            }
            out.push('\n');
        }
        out
    }

    pub fn session_series(&self, id: u32) -> Option<Vec<f64>> {
        let col = self.session_ids.iter().position(|&s| s == id)?;
        Some(self.points.iter().map(|p| p.session_rates[col]).collect())
    }

    /// Sum over sessions, per step.
    pub fn aggregate(&self) -> Vec<f64> {
        self.points
            .iter()
            .map(|p| p.session_rates.iter().sum())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionSummary {
    pub id: u32,
    /// Rate at the final step.
    pub steady_aggregate: f64,
    /// First time the rate was positive.
    pub onset: Option<f64>,
    /// First time from which the rate stays at its final value.
    pub time_to_steady: f64,
    pub established_subflows: usize,
    pub blocked_subflows: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub controller: String,
    pub step: f64,
    pub duration: f64,
    pub install_delay: f64,
    pub steps: usize,
    pub sessions: Vec<SessionSummary>,
}

impl RunSummary {
    pub fn total_steady_aggregate(&self) -> f64 {
        self.sessions.iter().map(|s| s.steady_aggregate).sum()
    }

    /// `format=1` header, then `key=value` lines.
    pub fn to_text(&self) -> String {
        let mut out = String::from("format=1\n");
        let _ = writeln!(out, "controller={}", self.controller);
        let _ = writeln!(
            out,
            "steps={} step={:.6} duration={:.6} install_delay={:.6}",
            self.steps, self.step, self.duration, self.install_delay
        );
        for s in &self.sessions {
            let onset = s
                .onset
                .map_or_else(|| "-".to_string(), |t| format!("{t:.6}"));
            let _ = writeln!(
                out,
                "session={} steady_aggregate={:.6} onset={} time_to_steady={:.6} established={} blocked={}",
                s.id, s.steady_aggregate, onset, s.time_to_steady, s.established_subflows, s.blocked_subflows
            );
        }
        let _ = writeln!(
            out,
            "total_steady_aggregate={:.6}",
            self.total_steady_aggregate()
        );
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub series: ThroughputSeries,
    pub summary: RunSummary,
    pub subflows: Vec<Subflow>,
    /// One audit line per controller decision or error, in order.
    pub audit: Vec<String>,
}

/// Run a scenario with a freshly built controller of the given kind.
pub fn run(
    topo: &Topology,
    sessions: &[Session],
    controller: ControllerKind,
    cfg: &SimConfig,
) -> Result<RunOutput, SimError> {
    let mut c = controller.build();
    run_with(topo, sessions, c.as_mut(), cfg)
}

/// Run a scenario against an existing controller instance.
pub fn run_with(
    topo: &Topology,
    sessions: &[Session],
    controller: &mut dyn Controller,
    cfg: &SimConfig,
) -> Result<RunOutput, SimError> {
    cfg.validate()?;
    validate_sessions(topo, sessions, cfg)?;
    let mut fabric = Fabric::new(topo, controller, cfg);
    let mut order: Vec<usize> = (0..sessions.len()).collect();
    order.sort_by_key(|&i| sessions[i].id);

    let links: Vec<Link> = topo.links().collect();
    let link_pos: BTreeMap<(SwitchId, SwitchId), usize> = links
        .iter()
        .enumerate()
        .map(|(i, l)| ((l.a.clone(), l.b.clone()), i))
        .collect();

    let mut next_port = FIRST_SOURCE_PORT;
    let mut subflows: Vec<Subflow> = Vec::new();
    let mut points = Vec::with_capacity(cfg.step_count());

    for tick in 0..cfg.step_count() {
        fabric.tick = tick;
        fabric.activate_due();

        for &si in &order {
            let s = &sessions[si];
            if ticks_ceil(s.start_time, cfg.step) == tick {
                fabric.start_session(s, &mut next_port, &mut subflows)?;
            }
        }

        for sf in subflows
            .iter_mut()
            .filter(|f| f.state == SubflowState::Handshaking)
        {
            if let Some(route) =
                fabric.established_route(&sessions[sf.session_index(sessions)], sf)?
            {
                sf.route = Some(route);
                sf.state = SubflowState::Established;
            }
        }

        let active: Vec<(usize, Path)> = subflows
            .iter()
            .enumerate()
            .filter(|(_, f)| f.state == SubflowState::Established)
            .map(|(i, f)| {
                (
                    i,
                    f.route.clone().expect("established subflows have routes"),
                )
            })
            .collect();
        let rates = maxmin_allocate(&active, topo);

        let mut session_rates = vec![0.0; sessions.len()];
        let mut link_utilization = vec![0.0; links.len()];
        for (i, path) in &active {
            let r = rates[i];
            session_rates[subflows[*i].session_index(sessions)] += r;
            for (a, b) in path.edges() {
                link_utilization[link_pos[&(a.clone(), b.clone())]] += r;
            }
        }
        let time = cfg.time_of(tick);
        for (l, &load) in links.iter().zip(&link_utilization) {
            if load > l.capacity * (1.0 + EPS) {
                return Err(SimError::CapacityViolation {
                    link: l.to_string(),
                    load,
                    capacity: l.capacity,
                    time,
                });
            }
        }
        points.push(SeriesPoint {
            time,
            session_rates: order.iter().map(|&i| session_rates[i]).collect(),
            link_utilization,
        });
    }

    let series = ThroughputSeries {
        session_ids: order.iter().map(|&i| sessions[i].id).collect(),
        links,
        points,
    };
    let summary = summarize(&series, &subflows, fabric.controller.name(), cfg);
    Ok(RunOutput {
        series,
        summary,
        subflows,
        audit: fabric.audit,
    })
}

impl Subflow {
    fn session_index(&self, sessions: &[Session]) -> usize {
        sessions
            .iter()
            .position(|s| s.id == self.session)
            .expect("subflow belongs to a known session")
    }
}

fn validate_sessions(
    topo: &Topology,
    sessions: &[Session],
    cfg: &SimConfig,
) -> Result<(), SimError> {
    let mut ids = std::collections::BTreeSet::new();
    let mut keys = std::collections::BTreeSet::new();
    for s in sessions {
        let err = |m: String| Err(SimError::Config(format!("session {}: {m}", s.id)));
        if !ids.insert(s.id) {
            return err("duplicate session id".into());
        }
        if s.subflows == 0 {
            return err("needs at least one subflow".into());
        }
        let (Some(a), Some(b)) = (topo.host(&s.initiator), topo.host(&s.listener)) else {
            return err(format!("unknown host {} or {}", s.initiator, s.listener));
        };
        if a.switch == b.switch {
            return err("hosts share a switch, so no link bounds the rate".into());
        }
        if s.initiator_key == s.listener_key {
            return err("initiator and listener keys must differ".into());
        }
        for k in [s.initiator_key, s.listener_key] {
            if !keys.insert(k) {
                return err(format!("key 0x{k:016x} reused"));
            }
        }
        if !(s.start_time.is_finite() && s.start_time >= 0.0) {
            return err(format!("bad start time {}", s.start_time));
        }
        if s.start_time > cfg.duration + EPS {
            return err(format!(
                "start time {} is after the end of the run ({})",
                s.start_time, cfg.duration
            ));
        }
    }
    let total: usize = sessions.iter().map(|s| s.subflows).sum();
    if total > (u16::MAX - FIRST_SOURCE_PORT) as usize + 1 {
        return Err(SimError::Config(format!(
            "{total} subflows exceed the source port range"
        )));
    }
    Ok(())
}

struct Fabric<'a> {
    topo: &'a Topology,
    controller: &'a mut dyn Controller,
    switches: BTreeMap<SwitchId, SwitchState>,
    // (activation tick, rule), in decision order
    pending: Vec<(usize, FlowRule)>,
    delay_steps: usize,
    cfg: &'a SimConfig,
    tick: usize,
    audit: Vec<String>,
}

enum Walk {
    Delivered(Path),
    Miss { switch: SwitchId, in_port: PortId },
}

impl<'a> Fabric<'a> {
    fn new(topo: &'a Topology, controller: &'a mut dyn Controller, cfg: &'a SimConfig) -> Self {
        let switches = topo
            .switches()
            .iter()
            .map(|s| (s.clone(), SwitchState::new(topo, s).expect("switch exists")))
            .collect();
        Self {
            topo,
            controller,
            switches,
            pending: Vec::new(),
            delay_steps: cfg.delay_steps(),
            cfg,
            tick: 0,
            audit: Vec::new(),
        }
    }

    fn activate_due(&mut self) {
        let tick = self.tick;
        let (due, later): (Vec<_>, Vec<_>) = std::mem::take(&mut self.pending)
            .into_iter()
            .partition(|(t, _)| *t <= tick);
        self.pending = later;
        for (_, rule) in due {
            self.switches
                .get_mut(&rule.switch)
                .expect("rules target known switches")
                .install(rule);
        }
    }

    // Follow active rules from the sender's switch until the packet reaches
    // a host or misses.
    fn walk(&self, p: &Packet, from: &HostId, to: &HostId) -> Result<Walk, SimError> {
        let src = self.topo.host(from).expect("validated");
        let mut sw = src.switch.clone();
        let mut in_port = self.topo.port_toward_host(&sw, from).expect("attached");
        let mut walked = vec![sw.clone()];
        loop {
            match self.switches[&sw].deliver(p) {
                Delivery::Miss => {
                    return Ok(Walk::Miss {
                        switch: sw,
                        in_port,
                    });
                }
                Delivery::Forward(port) => match self.topo.port_peer(&sw, port) {
                    Some(PortPeer::Host(h)) if h == to => {
                        return Ok(Walk::Delivered(Path::new(walked)))
                    }
                    Some(PortPeer::Host(h)) => {
                        return Err(SimError::Misdelivered(p.endpoints, h.clone()))
                    }
                    Some(PortPeer::Switch(next)) => {
                        if walked.contains(next) {
                            return Err(SimError::ForwardingLoop(p.endpoints));
                        }
                        in_port = self.topo.port_toward_switch(next, &sw).expect("linked");
                        sw = next.clone();
                        walked.push(sw.clone());
                    }
                    None => return Err(SimError::ForwardingLoop(p.endpoints)),
                },
            }
        }
    }

    /// Send a handshake segment, consulting the controller on a miss.
    /// `Ok(false)` means the controller refused and the subflow is blocked.
    fn send_handshake(&mut self, p: Packet, from: &HostId, to: &HostId) -> Result<bool, SimError> {
        let (switch, in_port) = match self.walk(&p, from, to)? {
            Walk::Delivered(_) => return Ok(true),
            Walk::Miss { switch, in_port } => (switch, in_port),
        };
        let ev = PacketInEvent {
            switch,
            in_port,
            packet: p,
            time: self.cfg.time_of(self.tick),
        };
        let name = self.controller.name();
        match self.controller.handle_packet_in(self.topo, &ev) {
            Ok(decision) => {
                self.audit.push(decision.audit_line(name, &ev));
                if !decision.route.switches().contains(&ev.switch) {
                    warn!(
                        "route {} skips the reporting switch {}",
                        decision.route, ev.switch
                    );
                }
                let at = self.tick + self.delay_steps;
                for rule in decision.rules {
                    if at <= self.tick {
                        self.switches
                            .get_mut(&rule.switch)
                            .expect("known")
                            .install(rule);
                    } else {
                        self.pending.push((at, rule));
                    }
                }
                Ok(true)
            }
            Err(e) => {
                warn!("{name}: {e} for {}", p.endpoints);
                self.audit.push(format!(
                    "t={:.6} controller={} switch={} in_port={} match={} error={}",
                    ev.time,
                    name,
                    ev.switch,
                    ev.in_port,
                    p.endpoints,
                    e.to_string().replace(' ', "_")
                ));
                Ok(false)
            }
        }
    }

    fn start_session(
        &mut self,
        s: &Session,
        next_port: &mut u16,
        subflows: &mut Vec<Subflow>,
    ) -> Result<(), SimError> {
        let a = self.topo.host(&s.initiator).expect("validated");
        let b = self.topo.host(&s.listener).expect("validated");
        let mut opened = false;
        for k in 0..s.subflows {
            let endpoints = EndpointPair::new(a.ip, *next_port, b.ip, LISTEN_PORT);
            *next_port = next_port.wrapping_add(1);
            let (syn_opt, ack_opt) = if k == 0 {
                (
                    MptcpOption::MpCapable {
                        key: s.initiator_key,
                    },
                    MptcpOption::MpCapable {
                        key: s.listener_key,
                    },
                )
            } else {
                (
                    MptcpOption::MpJoin {
                        peer_key: s.listener_key,
                    },
                    MptcpOption::MpJoin {
                        peer_key: s.initiator_key,
                    },
                )
            };
            // Joins need an open session.
            let ok = (k == 0 || opened)
                && self.send_handshake(
                    handshake(endpoints, TcpFlags::SYN, syn_opt),
                    &a.id,
                    &b.id,
                )?
                && self.send_handshake(
                    handshake(endpoints.reversed(), TcpFlags::SYN | TcpFlags::ACK, ack_opt),
                    &b.id,
                    &a.id,
                )?;
            if k == 0 {
                opened = ok;
            }
            subflows.push(Subflow {
                endpoints,
                session: s.id,
                index: k,
                route: None,
                state: if ok {
                    SubflowState::Handshaking
                } else {
                    SubflowState::Blocked
                },
            });
        }
        Ok(())
    }

    /// Forward data path if rules in both directions are active end to end.
    fn established_route(&self, s: &Session, sf: &Subflow) -> Result<Option<Path>, SimError> {
        let data = Packet {
            endpoints: sf.endpoints,
            tcp_flags: TcpFlags::ACK,
            mptcp: None,
            payload_len: DATA_PAYLOAD,
        };
        let ack = Packet {
            endpoints: sf.endpoints.reversed(),
            payload_len: 0,
            ..data
        };
        let Walk::Delivered(route) = self.walk(&data, &s.initiator, &s.listener)? else {
            return Ok(None);
        };
        match self.walk(&ack, &s.listener, &s.initiator)? {
            Walk::Delivered(_) => Ok(Some(route)),
            Walk::Miss { .. } => Ok(None),
        }
    }
}

fn handshake(endpoints: EndpointPair, flags: TcpFlags, opt: MptcpOption) -> Packet {
    Packet {
        endpoints,
        tcp_flags: flags,
        mptcp: Some(opt),
        payload_len: 0,
    }
}

fn summarize(
    series: &ThroughputSeries,
    subflows: &[Subflow],
    controller: &str,
    cfg: &SimConfig,
) -> RunSummary {
    let sessions = series
        .session_ids
        .iter()
        .map(|&id| {
            let rates = series.session_series(id).expect("known session");
            let last = rates.last().copied().unwrap_or(0.0);
            let same = |r: f64| (r - last).abs() <= EPS * last.abs().max(1.0);
            let settled_from = rates.iter().rposition(|&r| !same(r)).map_or(0, |i| i + 1);
            let count = |state| {
                subflows
                    .iter()
                    .filter(|f| f.session == id && f.state == state)
                    .count()
            };
            SessionSummary {
                id,
                steady_aggregate: last,
                onset: rates.iter().position(|&r| r > 0.0).map(|i| cfg.time_of(i)),
                time_to_steady: cfg.time_of(settled_from),
                established_subflows: count(SubflowState::Established),
                blocked_subflows: count(SubflowState::Blocked),
            }
        })
        .collect();
    RunSummary {
        controller: controller.to_string(),
        step: cfg.step,
        duration: cfg.duration,
        install_delay: cfg.install_delay,
        steps: series.points.len(),
        sessions,
    }
}
