//! Scenario files: which controller to run, simulation timing, and the
//! sessions to open.
//!
//! ```text
//! format=1
//! controller smoc            # smoc | stp | spf
//! step 0.5
//! duration 10
//! install_delay 0
//! seed 1
//! session <id> <src_host> <dst_host> <subflows> <start_time>
//! ```
//!
//! `step`, `duration`, `install_delay` and `seed` default to
//! [`SimConfig::default`]; `controller` and at least one `session` are
//! required.

use std::collections::BTreeSet;

use crate::controller::ControllerKind;
use crate::netgraph::{significant_lines, HostId, ParseError, Topology};
use crate::sim::{assign_keys, run, RunOutput, Session, SessionSpec, SimConfig, SimError};

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub controller: ControllerKind,
    pub config: SimConfig,
    pub sessions: Vec<SessionSpec>,
    // 1-based line of each session, for error reporting.
    session_lines: Vec<usize>,
}

impl Scenario {
    pub fn new(controller: ControllerKind, config: SimConfig, sessions: Vec<SessionSpec>) -> Self {
        Self {
            controller,
            config,
            session_lines: vec![0; sessions.len()],
            sessions,
        }
    }

    /// Check host references against a topology.
    pub fn resolve(&self, topo: &Topology) -> Result<(), ParseError> {
        for (s, &line) in self.sessions.iter().zip(&self.session_lines) {
            for h in [&s.initiator, &s.listener] {
                if topo.host(h).is_none() {
                    return Err(ParseError::new(line, format!("unknown host `{h}`")));
                }
            }
            if s.initiator == s.listener {
                return Err(ParseError::new(line, "a session needs two distinct hosts"));
            }
        }
        Ok(())
    }

    /// Sessions with keys drawn from the scenario seed.
    pub fn sessions(&self) -> Vec<Session> {
        assign_keys(&self.sessions, self.config.seed)
    }

    pub fn run(&self, topo: &Topology) -> Result<RunOutput, SimError> {
        run(topo, &self.sessions(), self.controller, &self.config)
    }
}

pub fn parse_scenario(text: &str) -> Result<Scenario, ParseError> {
    let mut controller = None;
    let mut config = SimConfig::default();
    let mut sessions = Vec::new();
    let mut session_lines = Vec::new();
    let mut seen = BTreeSet::new();
    let mut ids = BTreeSet::new();

    fn num<T: std::str::FromStr>(n: usize, what: &str, v: &str) -> Result<T, ParseError> {
        v.parse()
            .map_err(|_| ParseError::new(n, format!("bad {what} `{v}`")))
    }

    for (n, words) in significant_lines(text)? {
        let kw = words[0];
        if kw != "session" && !seen.insert(kw.to_string()) {
            return Err(ParseError::new(n, format!("duplicate `{kw}`")));
        }
        match words.as_slice() {
            ["controller", c] => {
                controller = Some(c.parse().map_err(|e: String| ParseError::new(n, e))?)
            }
            ["step", v] => config.step = num(n, "step", v)?,
            ["duration", v] => config.duration = num(n, "duration", v)?,
            ["install_delay", v] => config.install_delay = num(n, "install_delay", v)?,
            ["seed", v] => config.seed = num(n, "seed", v)?,
            ["session", id, src, dst, subflows, start] => {
                let id: u32 = num(n, "session id", id)?;
                if !ids.insert(id) {
                    return Err(ParseError::new(n, format!("duplicate session id {id}")));
                }
                let subflows: usize = num(n, "subflow count", subflows)?;
                if subflows == 0 {
                    return Err(ParseError::new(n, "subflow count must be at least 1"));
                }
                let start_time: f64 = num(n, "start time", start)?;
                if !(start_time.is_finite() && start_time >= 0.0) {
                    return Err(ParseError::new(n, format!("bad start time `{start}`")));
                }
                sessions.push(SessionSpec {
                    id,
                    initiator: HostId::new(*src),
                    listener: HostId::new(*dst),
                    subflows,
                    start_time,
                });
                session_lines.push(n);
            }
            [kw @ ("controller" | "step" | "duration" | "install_delay" | "seed" | "session"), ..] => {
                return Err(ParseError::new(
                    n,
                    format!("wrong number of fields for `{kw}`"),
                ))
            }
            [kw, ..] => return Err(ParseError::new(n, format!("unknown directive `{kw}`"))),
            [] => unreachable!(),
        }
    }

    let controller = controller.ok_or_else(|| ParseError::new(0, "missing `controller`"))?;
    if sessions.is_empty() {
        return Err(ParseError::new(0, "no sessions"));
    }
    config
        .validate()
        .map_err(|e| ParseError::new(0, e.to_string()))?;
    for (s, &line) in sessions.iter().zip(&session_lines) {
        if s.start_time > config.duration {
            return Err(ParseError::new(
                line,
                format!(
                    "start time {} is after duration {}",
                    s.start_time, config.duration
                ),
            ));
        }
    }
    Ok(Scenario {
        controller,
        config,
        sessions,
        session_lines,
    })
}
