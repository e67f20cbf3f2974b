use super::plan::min_extra_topics;
use super::{AttackError, AttackGadget};
use crate::ids::{PeerId, Topic};
use crate::topology::Topology;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, VecDeque};

const INF: u32 = u32::MAX / 4;

/// Split-node flow network: node `v` becomes `2v` (in) and `2v + 1` (out).
struct FlowNet {
    head: Vec<Vec<usize>>,
    to: Vec<usize>,
    cap: Vec<u32>,
}

impl FlowNet {
    fn new(n: usize) -> Self {
        FlowNet {
            head: vec![Vec::new(); n],
            to: Vec::new(),
            cap: Vec::new(),
        }
    }

    fn arc(&mut self, a: usize, b: usize, c: u32) {
        self.head[a].push(self.to.len());
        self.to.push(b);
        self.cap.push(c);
        self.head[b].push(self.to.len());
        self.to.push(a);
        self.cap.push(0);
    }

    /// Augments along shortest paths until `limit` units flow or none remain.
    fn max_flow(&mut self, s: usize, t: usize, limit: u32) -> u32 {
        let mut flow = 0;
        while flow < limit {
            let mut via = vec![usize::MAX; self.head.len()];
            let mut seen = vec![false; self.head.len()];
            seen[s] = true;
            let mut q = VecDeque::from([s]);
            while let Some(u) = q.pop_front() {
                if u == t {
                    break;
                }
                for &e in &self.head[u] {
                    let v = self.to[e];
                    if !seen[v] && self.cap[e] > 0 {
                        seen[v] = true;
                        via[v] = e;
                        q.push_back(v);
                    }
                }
            }
            if !seen[t] {
                break;
            }
            let mut push = INF;
            let mut v = t;
            while v != s {
                let e = via[v];
                push = push.min(self.cap[e]);
                v = self.to[e ^ 1];
            }
            let mut v = t;
            while v != s {
                let e = via[v];
                self.cap[e] -= push;
                self.cap[e ^ 1] += push;
                v = self.to[e ^ 1];
            }
            flow += push;
        }
        flow
    }

    fn residual_reach(&self, s: usize) -> Vec<bool> {
        let mut seen = vec![false; self.head.len()];
        seen[s] = true;
        let mut q = VecDeque::from([s]);
        while let Some(u) = q.pop_front() {
            for &e in &self.head[u] {
                let v = self.to[e];
                if !seen[v] && self.cap[e] > 0 {
                    seen[v] = true;
                    q.push_back(v);
                }
            }
        }
        seen
    }
}

fn closed_neighborhood(topo: &Topology, set: &BTreeSet<PeerId>) -> BTreeSet<PeerId> {
    let mut out = set.clone();
    for p in set {
        out.extend(topo.neighbors(p).cloned());
    }
    out
}

/// Smallest set of nodes outside `victims` whose removal disconnects `victims`
/// from at least one other node. Ties break toward the target of lowest degree.
pub fn min_vertex_cut(topo: &Topology, victims: &BTreeSet<PeerId>) -> Result<BTreeSet<PeerId>, AttackError> {
    if victims.is_empty() {
        return Err(AttackError::EmptyVictims);
    }
    if let Some(p) = victims.iter().find(|p| !topo.contains(p)) {
        return Err(AttackError::UnknownPeer(p.clone()));
    }
    let nbhd = closed_neighborhood(topo, victims);
    let mut targets: Vec<&PeerId> = topo.nodes().filter(|p| !nbhd.contains(*p)).collect();
    if targets.is_empty() {
        return Err(AttackError::NoCut);
    }
    targets.sort_by_key(|p| (topo.degree(p), (*p).clone()));

    let index: BTreeMap<&PeerId, usize> = topo.nodes().enumerate().map(|(i, p)| (p, i)).collect();
    let names: Vec<&PeerId> = topo.nodes().collect();
    let n = names.len();
    let source = 2 * n;
    let build = || {
        let mut net = FlowNet::new(2 * n + 1);
        for (i, p) in names.iter().enumerate() {
            let c = if victims.contains(*p) { INF } else { 1 };
            net.arc(2 * i, 2 * i + 1, c);
            for q in topo.neighbors(p) {
                net.arc(2 * i + 1, 2 * index[q], INF);
            }
        }
        for v in victims {
            net.arc(source, 2 * index[v], INF);
        }
        net
    };

    let mut best: Option<(u32, BTreeSet<PeerId>)> = None;
    for t in targets {
        let limit = best.as_ref().map_or(INF, |(f, _)| *f);
        let mut net = build();
        let flow = net.max_flow(source, 2 * index[t], limit);
        if flow >= limit {
            continue;
        }
        let reach = net.residual_reach(source);
        let cut = (0..n)
            .filter(|&i| reach[2 * i] && !reach[2 * i + 1])
            .map(|i| names[i].clone())
            .collect();
        best = Some((flow, cut));
    }
    Ok(best.expect("at least one target").1)
}

/// True when `cut` avoids `victims` and leaves some node unreachable from them.
pub fn separates(topo: &Topology, victims: &BTreeSet<PeerId>, cut: &BTreeSet<PeerId>) -> bool {
    if victims.is_empty() || !victims.is_disjoint(cut) {
        return false;
    }
    let rest = topo.without(cut);
    let reached = rest.reachable_from(victims.iter());
    rest.node_count() > reached.len()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PartitionPlan {
    /// The peers being cut off.
    pub isolated: BTreeSet<PeerId>,
    pub cut: BTreeSet<PeerId>,
    pub attacked_topics: BTreeSet<Topic>,
    /// Subnet topics every attacker keeps serving, beyond the attacked ones.
    pub extra_topics: u64,
    pub gadgets: Vec<AttackGadget>,
}

/// Cuts `victims` off with a minimum vertex cut whose members block the first
/// `attacked` subnet topics toward every honest neighbor.
pub fn synth_partition_attack(
    topo: &Topology,
    victims: &BTreeSet<PeerId>,
    subnets: &[Topic],
    attacked: u64,
) -> Result<PartitionPlan, AttackError> {
    let total = subnets.len() as u64;
    let extra_topics = min_extra_topics(attacked, total).ok_or(AttackError::Unsolvable { attacked, total })?;
    let cut = min_vertex_cut(topo, victims)?;
    let attacked_topics: BTreeSet<Topic> = subnets.iter().take(attacked as usize).cloned().collect();
    let gadgets = cut
        .iter()
        .flat_map(|x| {
            topo.neighbors(x)
                .filter(|v| !cut.contains(*v))
                .map(|v| AttackGadget::new(x.clone(), v.clone(), &attacked_topics))
                .collect::<Vec<_>>()
        })
        .collect();
    Ok(PartitionPlan {
        isolated: victims.clone(),
        cut,
        attacked_topics,
        extra_topics,
        gadgets,
    })
}
