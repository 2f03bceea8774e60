//! Switch topology, path enumeration and path-set construction.

mod paths;
mod topology;

pub use paths::{
    all_simple_paths, compute_path_set, shared_edges, shortest_path, spanning_tree, GraphError,
    Path, PathSet, PathSetOptions,
};
pub(crate) use topology::significant_lines;
pub use topology::{
    format_topology, parse_topology, Host, HostId, Link, ParseError, PortId, PortPeer, SwitchId,
    Topology, TopologyBuilder, TopologyError,
};
