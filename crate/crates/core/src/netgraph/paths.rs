use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use thiserror::Error;

use super::topology::{SwitchId, Topology, TopologyBuilder};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("unknown switch {0}")]
    UnknownSwitch(SwitchId),
    #[error("no path from {0} to {1}")]
    NoPath(SwitchId, SwitchId),
}

/// Simple path through the switch graph, listed switch by switch.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Path(Vec<SwitchId>);

impl Path {
    pub fn new(switches: Vec<SwitchId>) -> Self {
        Path(switches)
    }

    pub fn switches(&self) -> &[SwitchId] {
        &self.0
    }

    pub fn first(&self) -> &SwitchId {
        &self.0[0]
    }

    pub fn last(&self) -> &SwitchId {
        &self.0[self.0.len() - 1]
    }

    /// Number of links traversed.
    pub fn hop_len(&self) -> usize {
        self.0.len().saturating_sub(1)
    }

    /// Undirected edges, each as an ordered (lower, higher) pair.
    pub fn edges(&self) -> impl Iterator<Item = (&SwitchId, &SwitchId)> + '_ {
        self.0.windows(2).map(|w| {
            if w[0] <= w[1] {
                (&w[0], &w[1])
            } else {
                (&w[1], &w[0])
            }
        })
    }

    /// Non-empty, no repeated switch, consecutive switches linked.
    pub fn is_valid_in(&self, topo: &Topology) -> bool {
        if self.0.is_empty() || !self.0.iter().all(|s| topo.contains_switch(s)) {
            return false;
        }
        let distinct: BTreeSet<_> = self.0.iter().collect();
        distinct.len() == self.0.len()
            && self
                .0
                .windows(2)
                .all(|w| topo.capacity(&w[0], &w[1]).is_some())
    }

    fn from_indices(topo: &Topology, idx: &[usize]) -> Self {
        Path(idx.iter().map(|&i| topo.id(i).clone()).collect())
    }
}

impl fmt::Display for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

impl<S: Into<SwitchId>> FromIterator<S> for Path {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        Path(iter.into_iter().map(Into::into).collect())
    }
}

fn lookup(topo: &Topology, s: &SwitchId) -> Result<usize, GraphError> {
    topo.idx(s)
        .ok_or_else(|| GraphError::UnknownSwitch(s.clone()))
}

/// Minimum-hop path from `s1` to `s2`; among equal-length paths the
/// lexicographically smallest switch sequence wins.
///
/// Breadth-first search visiting neighbors in id order reaches every node
/// first through the lexicographically smallest of its shortest paths, so
/// recording the first parent is enough.
pub fn shortest_path(topo: &Topology, s1: &SwitchId, s2: &SwitchId) -> Result<Path, GraphError> {
    let (from, to) = (lookup(topo, s1)?, lookup(topo, s2)?);
    let n = topo.switches().len();
    let mut parent = vec![usize::MAX; n];
    parent[from] = from;
    let mut queue = VecDeque::from([from]);
    while let Some(u) = queue.pop_front() {
        if u == to {
            break;
        }
        for &v in topo.adj(u) {
            if parent[v] == usize::MAX {
                parent[v] = u;
                queue.push_back(v);
            }
        }
    }
    if parent[to] == usize::MAX {
        return Err(GraphError::NoPath(s1.clone(), s2.clone()));
    }
    let mut idx = vec![to];
    let mut cur = to;
    while cur != from {
        cur = parent[cur];
        idx.push(cur);
    }
    idx.reverse();
    Ok(Path::from_indices(topo, &idx))
}

/// Every simple path from `s1` to `s2` with at most `max_hops` links, in
/// lexicographic switch-sequence order.
///
/// `s1 == s2` yields the single zero-hop path.
pub fn all_simple_paths(
    topo: &Topology,
    s1: &SwitchId,
    s2: &SwitchId,
    max_hops: usize,
) -> Result<Vec<Path>, GraphError> {
    Ok(
        simple_paths_idx(topo, lookup(topo, s1)?, lookup(topo, s2)?, max_hops)
            .iter()
            .map(|p| Path::from_indices(topo, p))
            .collect(),
    )
}

// Depth-first with sorted neighbor lists. A path that reaches the target
// stops there, so no emitted path is a prefix of another and DFS order is
// lexicographic order.
fn simple_paths_idx(topo: &Topology, from: usize, to: usize, max_hops: usize) -> Vec<Vec<usize>> {
    if from == to {
        return vec![vec![from]];
    }
    let mut out = Vec::new();
    let mut on_path = vec![false; topo.switches().len()];
    let mut stack = vec![from];
    on_path[from] = true;
    // Explicit stack of neighbor cursors avoids recursion depth concerns.
    let mut cursors = vec![0usize];
    while let Some(cursor) = cursors.last_mut() {
        let u = *stack.last().unwrap();
        let nbrs = topo.adj(u);
        if *cursor >= nbrs.len() || stack.len() > max_hops {
            cursors.pop();
            on_path[stack.pop().unwrap()] = false;
            continue;
        }
        let v = nbrs[*cursor];
        *cursor += 1;
        if on_path[v] {
            continue;
        }
        if v == to {
            let mut p = stack.clone();
            p.push(v);
            out.push(p);
            continue;
        }
        stack.push(v);
        on_path[v] = true;
        cursors.push(0);
    }
    out
}

/// Number of undirected edges two paths have in common.
pub fn shared_edges(p: &Path, q: &Path) -> usize {
    let pe: BTreeSet<_> = p.edges().collect();
    q.edges().collect::<BTreeSet<_>>().intersection(&pe).count()
}

/// Bounds on path-set enumeration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PathSetOptions {
    /// Longest alternate path considered, in links.
    pub max_hops: usize,
    /// Largest path set kept, primary included. Alternates beyond it are
    /// dropped from the tail of the sorted order.
    pub max_paths: usize,
}

impl Default for PathSetOptions {
    fn default() -> Self {
        Self {
            max_hops: 16,
            max_paths: 64,
        }
    }
}

impl PathSetOptions {
    pub fn unbounded() -> Self {
        Self {
            max_hops: usize::MAX,
            max_paths: usize::MAX,
        }
    }
}

/// Ordered, cyclically consumed list of paths between two switches.
///
/// The first path is the primary (shortest) path; the rest are alternates
/// ordered by edges shared with the primary, then hop count, then switch
/// sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathSet {
    paths: Vec<Path>,
    cursor: usize,
    last: Option<usize>,
}

impl PathSet {
    /// Wrap an already ordered list. Panics on an empty list.
    pub fn from_paths(paths: Vec<Path>) -> Self {
        assert!(!paths.is_empty(), "a path set needs at least one path");
        Self {
            paths,
            cursor: 0,
            last: None,
        }
    }

    pub fn paths(&self) -> &[Path] {
        &self.paths
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn primary(&self) -> &Path {
        &self.paths[0]
    }

    /// Index the next call to [`PathSet::next_path`] will return.
    pub fn cursor(&self) -> usize {
        self.cursor
    }

    /// Index and path most recently handed out.
    pub fn last_issued(&self) -> Option<(usize, &Path)> {
        self.last.map(|i| (i, &self.paths[i]))
    }

    /// Return the path under the cursor and advance it, wrapping around.
    pub fn next_path(&mut self) -> &Path {
        let i = self.cursor;
        self.cursor = (i + 1) % self.paths.len();
        self.last = Some(i);
        &self.paths[i]
    }

    pub fn source(&self) -> &SwitchId {
        self.paths[0].first()
    }

    pub fn target(&self) -> &SwitchId {
        self.paths[0].last()
    }
}

/// Primary path plus alternates sorted by (shared edges with primary,
/// hop count, switch sequence), all ascending.
pub fn compute_path_set(
    topo: &Topology,
    s1: &SwitchId,
    s2: &SwitchId,
    opts: PathSetOptions,
) -> Result<PathSet, GraphError> {
    let primary = shortest_path(topo, s1, s2)?;
    let (from, to) = (lookup(topo, s1)?, lookup(topo, s2)?);

    let primary_idx: Vec<usize> = primary
        .switches()
        .iter()
        .map(|s| topo.idx(s).unwrap())
        .collect();
    let primary_edges: BTreeSet<(usize, usize)> = idx_edges(&primary_idx).collect();

    let mut alternates: Vec<(usize, Vec<usize>)> = simple_paths_idx(topo, from, to, opts.max_hops)
        .into_iter()
        .filter(|p| *p != primary_idx)
        .map(|p| {
            let shared = idx_edges(&p).filter(|e| primary_edges.contains(e)).count();
            (shared, p)
        })
        .collect();
    alternates.sort_by(|(sa, pa), (sb, pb)| {
        sa.cmp(sb)
            .then(pa.len().cmp(&pb.len()))
            .then_with(|| pa.cmp(pb))
    });
    alternates.truncate(opts.max_paths.max(1) - 1);

    let mut paths = Vec::with_capacity(alternates.len() + 1);
    paths.push(primary);
    paths.extend(alternates.iter().map(|(_, p)| Path::from_indices(topo, p)));
    Ok(PathSet::from_paths(paths))
}

fn idx_edges(p: &[usize]) -> impl Iterator<Item = (usize, usize)> + '_ {
    p.windows(2).map(|w| (w[0].min(w[1]), w[0].max(w[1])))
}

/// Breadth-first spanning tree rooted at the smallest switch id, neighbors
/// taken in id order. Hosts and the capacities of retained links carry over.
pub fn spanning_tree(topo: &Topology) -> Topology {
    let n = topo.switches().len();
    let mut b = TopologyBuilder::new();
    for s in topo.switches() {
        b.switch(s.clone()).expect("ids are unique");
    }
    let mut seen = vec![false; n];
    seen[0] = true;
    let mut queue = VecDeque::from([0usize]);
    while let Some(u) = queue.pop_front() {
        for &v in topo.adj(u) {
            if !seen[v] {
                seen[v] = true;
                queue.push_back(v);
                let cap = topo.capacity_idx(u, v).expect("adjacent");
                b.link(topo.id(u).clone(), topo.id(v).clone(), cap)
                    .expect("tree edges are unique");
            }
        }
    }
    for h in topo.hosts() {
        b.host(h.id.clone(), h.switch.clone(), h.ip)
            .expect("hosts are unique");
    }
    b.build()
        .expect("spanning tree of a connected graph is connected")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netgraph::parse_topology;

    fn graph(switches: &[&str], links: &[(&str, &str)]) -> Topology {
        let mut b = TopologyBuilder::new();
        for s in switches {
            b.switch(*s).unwrap();
        }
        for (x, y) in links {
            b.link(*x, *y, 100.0).unwrap();
        }
        b.build().unwrap()
    }

    fn diamond() -> Topology {
        graph(
            &["a", "b", "c", "d"],
            &[("a", "b"), ("b", "d"), ("a", "c"), ("c", "d"), ("a", "d")],
        )
    }

    fn chain() -> Topology {
        graph(&["a", "b", "c"], &[("a", "b"), ("b", "c")])
    }

    fn p(s: &str) -> Path {
        s.split(',').collect()
    }

    fn sid(s: &str) -> SwitchId {
        SwitchId::new(s)
    }

    #[test]
    fn shortest_path_examples() {
        assert_eq!(
            shortest_path(&diamond(), &sid("a"), &sid("d")).unwrap(),
            p("a,d")
        );
        assert_eq!(
            shortest_path(&diamond(), &sid("b"), &sid("b")).unwrap(),
            p("b")
        );
        assert_eq!(
            shortest_path(&chain(), &sid("a"), &sid("c")).unwrap(),
            p("a,b,c")
        );
        assert_eq!(
            shortest_path(&chain(), &sid("a"), &sid("z")),
            Err(GraphError::UnknownSwitch(sid("z")))
        );
    }

    #[test]
    fn shortest_path_tie_break_is_lexicographic() {
        // Square a-b-d, a-c-d: both 2 hops, b sorts before c.
        let g = graph(
            &["a", "b", "c", "d"],
            &[("a", "c"), ("c", "d"), ("a", "b"), ("b", "d")],
        );
        assert_eq!(shortest_path(&g, &sid("a"), &sid("d")).unwrap(), p("a,b,d"));
        assert_eq!(shortest_path(&g, &sid("d"), &sid("a")).unwrap(), p("d,b,a"));
    }

    #[test]
    fn simple_path_examples() {
        assert_eq!(
            all_simple_paths(&diamond(), &sid("a"), &sid("d"), 8).unwrap(),
            vec![p("a,b,d"), p("a,c,d"), p("a,d")]
        );
        assert_eq!(
            all_simple_paths(&chain(), &sid("a"), &sid("c"), 8).unwrap(),
            vec![p("a,b,c")]
        );
        let k4 = graph(
            &["a", "b", "c", "d"],
            &[
                ("a", "b"),
                ("a", "c"),
                ("a", "d"),
                ("b", "c"),
                ("b", "d"),
                ("c", "d"),
            ],
        );
        for (x, y) in [("a", "d"), ("b", "c"), ("d", "a")] {
            assert_eq!(all_simple_paths(&k4, &sid(x), &sid(y), 8).unwrap().len(), 5);
        }
        assert_eq!(
            all_simple_paths(&k4, &sid("a"), &sid("d"), 1).unwrap(),
            vec![p("a,d")]
        );
        assert_eq!(
            all_simple_paths(&k4, &sid("a"), &sid("d"), 2)
                .unwrap()
                .len(),
            3
        );
    }

    #[test]
    fn shared_edge_counts() {
        assert_eq!(shared_edges(&p("a,b,d"), &p("a,b,c,d")), 1);
        assert_eq!(shared_edges(&p("a,b,c,d"), &p("a,b,d")), 1);
        assert_eq!(shared_edges(&p("a,b,c,d"), &p("a,b,c,d")), 3);
        assert_eq!(shared_edges(&p("a,b,d"), &p("a,c,d")), 0);
        // direction does not matter
        assert_eq!(shared_edges(&p("a,b,c"), &p("c,b,a")), 2);
    }

    #[test]
    fn path_set_examples() {
        let ps = compute_path_set(&diamond(), &sid("a"), &sid("d"), Default::default()).unwrap();
        assert_eq!(ps.paths(), &[p("a,d"), p("a,b,d"), p("a,c,d")]);

        let g = graph(
            &["a", "b", "c", "d"],
            &[("a", "b"), ("b", "d"), ("b", "c"), ("c", "d")],
        );
        let ps = compute_path_set(&g, &sid("a"), &sid("d"), Default::default()).unwrap();
        assert_eq!(ps.paths(), &[p("a,b,d"), p("a,b,c,d")]);
        assert_eq!(shared_edges(&ps.paths()[0], &ps.paths()[1]), 1);

        let ps = compute_path_set(&chain(), &sid("a"), &sid("c"), Default::default()).unwrap();
        assert_eq!(ps.len(), 1);
    }

    #[test]
    fn path_set_cap_truncates_alternates() {
        let opts = PathSetOptions {
            max_hops: 16,
            max_paths: 2,
        };
        let ps = compute_path_set(&diamond(), &sid("a"), &sid("d"), opts).unwrap();
        assert_eq!(ps.paths(), &[p("a,d"), p("a,b,d")]);
        let opts = PathSetOptions {
            max_hops: 1,
            max_paths: 64,
        };
        let ps = compute_path_set(&diamond(), &sid("a"), &sid("d"), opts).unwrap();
        assert_eq!(ps.paths(), &[p("a,d")]);
    }

    #[test]
    fn next_path_cycles() {
        let mut ps =
            compute_path_set(&diamond(), &sid("a"), &sid("d"), Default::default()).unwrap();
        assert_eq!(ps.last_issued(), None);
        let got: Vec<Path> = (0..4).map(|_| ps.next_path().clone()).collect();
        assert_eq!(got, vec![p("a,d"), p("a,b,d"), p("a,c,d"), p("a,d")]);
        assert_eq!(ps.last_issued(), Some((0, &p("a,d"))));

        let mut single = PathSet::from_paths(vec![p("a,b,c")]);
        for _ in 0..3 {
            assert_eq!(single.next_path(), &p("a,b,c"));
        }
    }

    #[test]
    fn spanning_tree_examples() {
        let t = spanning_tree(&diamond());
        // BFS from a takes a-b, a-c, a-d.
        let links: Vec<String> = t.links().map(|l| l.to_string()).collect();
        assert_eq!(links, ["a-b", "a-c", "a-d"]);

        let c = chain();
        assert_eq!(spanning_tree(&c), c);
    }

    #[test]
    fn spanning_tree_keeps_hosts() {
        let t = parse_topology(
            "format=1\nswitch a\nswitch b\nswitch c\nlink a b 10\nlink b c 10\nlink a c 10\nhost h c 10.0.0.3\n",
        )
        .unwrap();
        let tree = spanning_tree(&t);
        assert_eq!(tree.link_count(), 2);
        assert_eq!(tree.host(&"h".into()).unwrap().switch, sid("c"));
    }
}
