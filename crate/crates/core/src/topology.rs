//! Undirected peer graphs: loading, statistics and synthetic generation.

use crate::ids::PeerId;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum TopologyError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("self-loop on {0}")]
    SelfLoop(PeerId),
    #[error("edge references unknown node {0}")]
    UnknownNode(PeerId),
    #[error("cannot read topology: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Topology {
    adj: BTreeMap<PeerId, BTreeSet<PeerId>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TopologyStats {
    pub nodes: usize,
    pub edges: usize,
    pub min_degree: usize,
    pub max_degree: usize,
    pub avg_degree: f64,
    /// `None` when the graph is disconnected.
    pub diameter: Option<usize>,
    pub components: usize,
}

impl Topology {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node(&mut self, p: impl Into<PeerId>) {
        self.adj.entry(p.into()).or_default();
    }

    /// Adds an undirected edge, creating missing endpoints. Duplicates are ignored.
    pub fn add_edge(&mut self, a: impl Into<PeerId>, b: impl Into<PeerId>) -> Result<bool, TopologyError> {
        let (a, b) = (a.into(), b.into());
        if a == b {
            return Err(TopologyError::SelfLoop(a));
        }
        let fresh = self.adj.entry(a.clone()).or_default().insert(b.clone());
        self.adj.entry(b).or_default().insert(a);
        Ok(fresh)
    }

    pub fn from_edges<I, A, B>(edges: I) -> Result<Self, TopologyError>
    where
        I: IntoIterator<Item = (A, B)>,
        A: Into<PeerId>,
        B: Into<PeerId>,
    {
        let mut t = Self::new();
        for (a, b) in edges {
            t.add_edge(a, b)?;
        }
        Ok(t)
    }

    /// A path `n0 - n1 - ... - n{k-1}`.
    pub fn path(names: &[&str]) -> Self {
        let mut t = Self::new();
        for n in names {
            t.add_node(*n);
        }
        for w in names.windows(2) {
            t.add_edge(w[0], w[1]).expect("distinct names");
        }
        t
    }

    pub fn complete(names: &[&str]) -> Self {
        let mut t = Self::new();
        for (i, a) in names.iter().enumerate() {
            t.add_node(*a);
            for b in &names[i + 1..] {
                t.add_edge(*a, *b).expect("distinct names");
            }
        }
        t
    }

    pub fn contains(&self, p: &PeerId) -> bool {
        self.adj.contains_key(p)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &PeerId> {
        self.adj.keys()
    }

    pub fn node_count(&self) -> usize {
        self.adj.len()
    }

    pub fn neighbors(&self, p: &PeerId) -> impl Iterator<Item = &PeerId> {
        self.adj.get(p).into_iter().flatten()
    }

    pub fn degree(&self, p: &PeerId) -> usize {
        self.adj.get(p).map_or(0, BTreeSet::len)
    }

    pub fn has_edge(&self, a: &PeerId, b: &PeerId) -> bool {
        self.adj.get(a).is_some_and(|n| n.contains(b))
    }

    /// Each undirected edge once, smaller endpoint first.
    pub fn edges(&self) -> impl Iterator<Item = (&PeerId, &PeerId)> {
        self.adj
            .iter()
            .flat_map(|(a, ns)| ns.iter().filter(move |b| a < *b).map(move |b| (a, b)))
    }

    pub fn edge_count(&self) -> usize {
        self.adj.values().map(BTreeSet::len).sum::<usize>() / 2
    }

    /// Subgraph without the given nodes.
    pub fn without(&self, removed: &BTreeSet<PeerId>) -> Topology {
        let adj = self
            .adj
            .iter()
            .filter(|(p, _)| !removed.contains(*p))
            .map(|(p, ns)| (p.clone(), ns.difference(removed).cloned().collect()))
            .collect();
        Topology { adj }
    }

    /// Nodes reachable from any of `sources`, sources included.
    pub fn reachable_from<'a>(&self, sources: impl IntoIterator<Item = &'a PeerId>) -> BTreeSet<PeerId> {
        let mut seen: BTreeSet<PeerId> = BTreeSet::new();
        let mut queue: VecDeque<PeerId> = VecDeque::new();
        for s in sources {
            if self.contains(s) && seen.insert(s.clone()) {
                queue.push_back(s.clone());
            }
        }
        while let Some(p) = queue.pop_front() {
            for q in self.neighbors(&p) {
                if seen.insert(q.clone()) {
                    queue.push_back(q.clone());
                }
            }
        }
        seen
    }

    pub fn components(&self) -> Vec<BTreeSet<PeerId>> {
        let mut left: BTreeSet<PeerId> = self.adj.keys().cloned().collect();
        let mut out = Vec::new();
        while let Some(start) = left.iter().next().cloned() {
            let comp = self.reachable_from([&start]);
            for p in &comp {
                left.remove(p);
            }
            out.push(comp);
        }
        out
    }

    fn eccentricity(&self, p: &PeerId) -> (usize, usize) {
        let mut dist: BTreeMap<&PeerId, usize> = BTreeMap::new();
        let mut queue = VecDeque::from([p]);
        dist.insert(p, 0);
        let mut far = 0;
        while let Some(x) = queue.pop_front() {
            let d = dist[x];
            far = far.max(d);
            for y in self.neighbors(x) {
                if !dist.contains_key(y) {
                    dist.insert(y, d + 1);
                    queue.push_back(y);
                }
            }
        }
        (far, dist.len())
    }

    pub fn stats(&self) -> TopologyStats {
        let degrees: Vec<usize> = self.adj.values().map(BTreeSet::len).collect();
        let n = degrees.len();
        let components = self.components().len();
        let diameter = if components == 1 {
            Some(self.adj.keys().map(|p| self.eccentricity(p).0).max().unwrap_or(0))
        } else {
            None
        };
        TopologyStats {
            nodes: n,
            edges: self.edge_count(),
            min_degree: degrees.iter().copied().min().unwrap_or(0),
            max_degree: degrees.iter().copied().max().unwrap_or(0),
            avg_degree: if n == 0 {
                0.0
            } else {
                degrees.iter().sum::<usize>() as f64 / n as f64
            },
            diameter,
            components,
        }
    }

    /// One `a b` pair per line; isolated nodes on their own line.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        for (p, ns) in &self.adj {
            if ns.is_empty() {
                out.push_str(p.as_str());
                out.push('\n');
            }
        }
        for (a, b) in self.edges() {
            out.push_str(&format!("{a} {b}\n"));
        }
        out
    }
}

/// Parses the edge-list format: `a b` per line, `#` starts a comment, a lone name
/// declares an isolated node.
pub fn parse_edge_list(text: &str) -> Result<Topology, TopologyError> {
    let mut t = Topology::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let malformed = |message: String| TopologyError::Malformed { line: i + 1, message };
        match fields[..] {
            [a] => t.add_node(a),
            [a, b] => {
                if a == b {
                    return Err(malformed(format!("self-loop on {a}")));
                }
                t.add_edge(a, b)?;
            }
            _ => {
                return Err(malformed(format!(
                    "expected `nodeA nodeB`, found {} fields",
                    fields.len()
                )))
            }
        }
    }
    Ok(t)
}

pub fn load_topology(path: impl AsRef<Path>) -> Result<Topology, TopologyError> {
    parse_edge_list(&std::fs::read_to_string(path)?)
}

/// Node names used by the generator: `n000`, `n001`, ...
pub fn synth_node_name(i: usize, n: usize) -> String {
    let width = n.saturating_sub(1).to_string().len().max(1);
    format!("n{i:0width$}")
}

/// Connected random graph on `n` nodes with a skewed degree sequence whose mean is
/// close to `target_avg_degree`. About one node in eight gets a small target degree.
pub fn synth_topology(n: usize, target_avg_degree: f64, seed: u64) -> Topology {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let names: Vec<PeerId> = (0..n).map(|i| PeerId::from(synth_node_name(i, n))).collect();
    let mut t = Topology::new();
    for p in &names {
        t.add_node(p.clone());
    }
    if n < 2 {
        return t;
    }
    let target = target_avg_degree.clamp(0.0, (n - 1) as f64);

    // expected degrees: a low-degree minority plus a Pareto(2.5) tail
    let low_share = 0.125;
    let low_mean = 2.5_f64.min(target);
    let alpha = 2.5;
    let tail_mean = ((target - low_share * low_mean) / (1.0 - low_share)).max(1.0);
    let xmin = tail_mean * (alpha - 1.0) / alpha;
    let weights: Vec<f64> = (0..n)
        .map(|_| {
            if rng.gen_bool(low_share) {
                rng.gen_range(1..=4) as f64
            } else {
                let u: f64 = rng.gen_range(f64::EPSILON..1.0);
                (xmin * u.powf(-1.0 / alpha)).min((n - 1) as f64)
            }
        })
        .collect();

    // Chung-Lu, with the scale tuned so the realized mean lands near the target
    let total: f64 = weights.iter().sum();
    let mut scale = 1.0;
    let mut best: Option<Topology> = None;
    for _ in 0..6 {
        let mut g = t.clone();
        for i in 0..n {
            for j in i + 1..n {
                let p = (scale * weights[i] * weights[j] / total).min(1.0);
                if rng.gen_bool(p) {
                    g.add_edge(names[i].clone(), names[j].clone()).expect("i != j");
                }
            }
        }
        connect_components(&mut g, &mut rng);
        let avg = g.stats().avg_degree;
        let close = (avg - target).abs() <= 0.05 * target;
        best = Some(g);
        if close || avg == 0.0 {
            break;
        }
        scale *= target / avg;
    }
    let mut g = best.expect("at least one attempt");
    let want_edges = (target * n as f64 / 2.0).round() as usize;
    let max_edges = n * (n - 1) / 2;
    while g.edge_count() < want_edges.min(max_edges) && (g.stats().avg_degree) < 0.95 * target {
        let i = rng.gen_range(0..n);
        let j = rng.gen_range(0..n);
        if i != j {
            g.add_edge(names[i].clone(), names[j].clone()).expect("i != j");
        }
    }
    g
}

/// Links every minor component to the largest one with a single edge.
fn connect_components(g: &mut Topology, rng: &mut ChaCha8Rng) {
    let mut comps = g.components();
    if comps.len() <= 1 {
        return;
    }
    comps.sort_by(|a, b| b.len().cmp(&a.len()).then(a.iter().next().cmp(&b.iter().next())));
    let main: Vec<PeerId> = comps[0].iter().cloned().collect();
    for comp in &comps[1..] {
        let from = comp.iter().next().expect("non-empty component").clone();
        let to = main[rng.gen_range(0..main.len())].clone();
        g.add_edge(from, to).expect("different components");
    }
}
