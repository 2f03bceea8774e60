use std::collections::BTreeMap;

use crate::controller::FlowRule;
use crate::netgraph::{PortId, PortPeer, SwitchId, Topology};
use crate::wire::{EndpointPair, Packet};

/// Outcome of a flow-table lookup.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Delivery {
    Forward(PortId),
    Miss,
}

/// One switch: its port map and exact-match flow table.
#[derive(Debug, Clone)]
pub struct SwitchState {
    pub id: SwitchId,
    pub ports: BTreeMap<PortId, PortPeer>,
    flow_table: BTreeMap<EndpointPair, FlowRule>,
}

impl SwitchState {
    pub fn new(topo: &Topology, id: &SwitchId) -> Option<Self> {
        let ports = topo
            .ports(id)?
            .map(|(port, peer)| (port, peer.clone()))
            .collect();
        Some(Self {
            id: id.clone(),
            ports,
            flow_table: BTreeMap::new(),
        })
    }

    /// Add a rule, replacing any rule for the same 5-tuple.
    pub fn install(&mut self, rule: FlowRule) {
        debug_assert_eq!(rule.switch, self.id);
        self.flow_table.insert(rule.matches, rule);
    }

    pub fn rules(&self) -> impl Iterator<Item = &FlowRule> + '_ {
        self.flow_table.values()
    }

    pub fn rule_count(&self) -> usize {
        self.flow_table.len()
    }

    /// Exact 5-tuple lookup; rules are directional.
    pub fn deliver(&self, p: &Packet) -> Delivery {
        match self.flow_table.get(&p.endpoints) {
            Some(rule) => Delivery::Forward(rule.out_port),
            None => Delivery::Miss,
        }
    }
}
