use std::collections::{BTreeMap, HashMap};

use crate::netgraph::{Path, SwitchId, Topology};

/// Max-min fair rates for flows pinned to paths, by progressive filling.
///
/// All unfrozen flows grow at the same pace until some link runs out of
/// headroom; flows crossing a saturated link freeze at their current rate and
/// the rest keep growing. Link capacity is shared by both directions.
///
/// A flow whose path crosses no link (a single-switch path) has no
/// bottleneck and is given `f64::INFINITY`. If two entries share an id the
/// later one wins in the result.
///
/// Every path must be valid in `topo`.
pub fn maxmin_allocate<K: Ord + Clone>(flows: &[(K, Path)], topo: &Topology) -> BTreeMap<K, f64> {
    let mut link_ids: HashMap<(&SwitchId, &SwitchId), usize> = HashMap::new();
    let mut remaining: Vec<f64> = Vec::new();
    let flow_links: Vec<Vec<usize>> = flows
        .iter()
        .map(|(_, path)| {
            path.edges()
                .map(|(a, b)| {
                    *link_ids.entry((a, b)).or_insert_with(|| {
                        remaining.push(topo.capacity(a, b).expect("path valid in topology"));
                        remaining.len() - 1
                    })
                })
                .collect()
        })
        .collect();
    let capacity = remaining.clone();

    let mut rate = vec![0.0f64; flows.len()];
    let mut frozen: Vec<bool> = flow_links.iter().map(|l| l.is_empty()).collect();
    for (i, links) in flow_links.iter().enumerate() {
        if links.is_empty() {
            rate[i] = f64::INFINITY;
        }
    }

    let mut users = vec![0usize; remaining.len()];
    while frozen.iter().any(|f| !f) {
        users.iter_mut().for_each(|u| *u = 0);
        for (i, links) in flow_links.iter().enumerate() {
            if !frozen[i] {
                for &l in links {
                    users[l] += 1;
                }
            }
        }
        let step = users
            .iter()
            .zip(&remaining)
            .filter(|(&u, _)| u > 0)
            .map(|(&u, &r)| r / u as f64)
            .fold(f64::INFINITY, f64::min);

        for (i, links) in flow_links.iter().enumerate() {
            if !frozen[i] {
                rate[i] += step;
                for &l in links {
                    remaining[l] -= step;
                }
            }
        }
        let saturated: Vec<bool> = remaining
            .iter_mut()
            .zip(&capacity)
            .zip(&users)
            .map(|((r, &c), &u)| {
                let full = u > 0 && *r <= c * 1e-12;
                if full {
                    *r = 0.0;
                }
                full
            })
            .collect();
        for (i, links) in flow_links.iter().enumerate() {
            if !frozen[i] && links.iter().any(|&l| saturated[l]) {
                frozen[i] = true;
            }
        }
    }

    flows
        .iter()
        .zip(rate)
        .map(|((k, _), r)| (k.clone(), r))
        .collect()
}
