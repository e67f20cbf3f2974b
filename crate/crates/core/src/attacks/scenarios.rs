use super::cut::{synth_partition_attack, PartitionPlan};
use super::plan::{attacked_subnets, plan_subnet_count, PlanMode, PlanTarget};
use super::script::{gen_attack_events, run_attack, AttackGadget, AttackKind, AttackScript};
use super::validate::{validate_attack, AttackReport};
use super::AttackError;
use crate::config::{eth_with_subnets, Twp};
use crate::ids::{PeerId, Topic};
use crate::network::{subscribe_all, RunOutcome, Simulation, Trace};
use crate::topology::{synth_topology, Topology, TopologyStats};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scenario {
    #[serde(rename = "eth-throttle-ag1")]
    EthThrottleAg1,
    #[serde(rename = "eth-block-ag1")]
    EthBlockAg1,
    #[serde(rename = "eth-block-ag2")]
    EthBlockAg2,
    #[serde(rename = "eth-block-ag3")]
    EthBlockAg3,
    #[serde(rename = "eclipse")]
    Eclipse,
    #[serde(rename = "partition")]
    Partition,
}

impl Scenario {
    pub const ALL: [Scenario; 6] = [
        Scenario::EthThrottleAg1,
        Scenario::EthBlockAg1,
        Scenario::EthBlockAg2,
        Scenario::EthBlockAg3,
        Scenario::Eclipse,
        Scenario::Partition,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::EthThrottleAg1 => "eth-throttle-ag1",
            Scenario::EthBlockAg1 => "eth-block-ag1",
            Scenario::EthBlockAg2 => "eth-block-ag2",
            Scenario::EthBlockAg3 => "eth-block-ag3",
            Scenario::Eclipse => "eclipse",
            Scenario::Partition => "partition",
        }
    }

    pub fn kind(self) -> AttackKind {
        match self {
            Scenario::EthThrottleAg1 => AttackKind::Throttle,
            Scenario::EthBlockAg1 | Scenario::EthBlockAg2 | Scenario::EthBlockAg3 => AttackKind::Block,
            Scenario::Eclipse => AttackKind::Eclipse,
            Scenario::Partition => AttackKind::Partition,
        }
    }

    /// Subnet topics each attacker blocks.
    pub fn attacked_count(self) -> u64 {
        match self {
            Scenario::EthBlockAg2 => 2,
            Scenario::EthBlockAg3 | Scenario::Eclipse => 3,
            _ => 1,
        }
    }

    fn blocked_rate(self) -> u64 {
        u64::from(self == Scenario::EthThrottleAg1)
    }

    fn default_rounds(self) -> u64 {
        match self {
            Scenario::Eclipse | Scenario::Partition => 40,
            _ => 60,
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Scenario::ALL.into_iter().find(|x| x.name() == s).ok_or_else(|| {
            let names: Vec<_> = Scenario::ALL.iter().map(|x| x.name()).collect();
            format!("unknown scenario {s:?}, expected one of {}", names.join(", "))
        })
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioOptions {
    pub seed: u64,
    pub rounds: Option<u64>,
    /// Messages per round on every topic the attacker still serves.
    pub f: u64,
    pub max_steps: u64,
    /// Replaces the synthesized graph for eclipse and partition runs.
    pub topology: Option<Topology>,
    pub nodes: usize,
    pub avg_degree: f64,
    /// Upper bound on subnet topics the planner may ask for.
    pub max_subnets: u64,
}

impl Default for ScenarioOptions {
    fn default() -> Self {
        ScenarioOptions {
            seed: 1,
            rounds: None,
            f: 10,
            max_steps: 20_000_000,
            topology: None,
            nodes: 200,
            avg_degree: 10.0,
            max_subnets: 64,
        }
    }
}

/// Everything a scenario run produced. The trace is kept out of the JSON form.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ScenarioRun {
    pub scenario: Scenario,
    pub seed: u64,
    pub fingerprint: String,
    pub subnets: u64,
    pub rounds: u64,
    pub f: u64,
    pub b: u64,
    pub topology: TopologyStats,
    pub attackers: BTreeSet<PeerId>,
    pub victims: BTreeSet<PeerId>,
    pub attacked_topics: BTreeSet<Topic>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub partition: Option<PartitionPlan>,
    pub script_events: usize,
    pub steps: u64,
    pub outcome: RunOutcome,
    pub report: AttackReport,
    #[serde(skip)]
    pub trace: Trace,
}

impl ScenarioRun {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario runs serialize")
    }
}

fn subnet_topics(twp: &Twp, attacked: &BTreeSet<Topic>) -> Vec<Topic> {
    let mut topics: Vec<Topic> = attacked.iter().cloned().collect();
    topics.extend(twp.topics.keys().filter(|t| !attacked.contains(*t)).cloned());
    topics
}

/// Lowest-degree-first: closest to degree 4, then smallest degree, then id.
fn pick_eclipse_victim(topo: &Topology) -> Option<PeerId> {
    topo.nodes()
        .min_by_key(|p| (topo.degree(p).abs_diff(4), topo.degree(p), (*p).clone()))
        .cloned()
}

fn bfs_prefix(topo: &Topology, start: &PeerId, k: usize) -> BTreeSet<PeerId> {
    let mut order = vec![start.clone()];
    let mut seen: BTreeSet<PeerId> = order.iter().cloned().collect();
    let mut i = 0;
    while i < order.len() && order.len() < k {
        let next: Vec<PeerId> = topo.neighbors(&order[i]).filter(|q| !seen.contains(*q)).cloned().collect();
        for q in next {
            if seen.insert(q.clone()) {
                order.push(q);
            }
        }
        i += 1;
    }
    order.into_iter().take(k).collect()
}

fn highest_degree<'a>(topo: &Topology, among: impl Iterator<Item = &'a PeerId>) -> Option<PeerId> {
    among
        .max_by_key(|p| (topo.degree(p), std::cmp::Reverse((*p).clone())))
        .cloned()
}

/// Builds, runs and validates one of the built-in attacks.
pub fn run_scenario(scenario: Scenario, opts: &ScenarioOptions) -> Result<ScenarioRun, AttackError> {
    let i = scenario.attacked_count();
    let b = scenario.blocked_rate();
    let subnets = plan_subnet_count(i, opts.f, b, PlanMode::Conservative, PlanTarget::AtCap, opts.max_subnets)
        .ok_or(AttackError::Unsolvable { attacked: i, total: opts.max_subnets })?;
    let twp = eth_with_subnets(subnets as usize);
    let attacked = attacked_subnets(i);
    let topics = subnet_topics(&twp, &attacked);
    let rounds = opts.rounds.unwrap_or(scenario.default_rounds());

    let mut partition = None;
    let mut background = Vec::new();
    let (topo, gadgets) = match scenario.kind() {
        AttackKind::Throttle | AttackKind::Block => {
            let topo = opts.topology.clone().unwrap_or_else(|| Topology::complete(&["A", "C", "V"]));
            let (a, v) = (PeerId::from("A"), PeerId::from("V"));
            for p in [&a, &v] {
                if !topo.has_edge(&a, &v) || !topo.contains(p) {
                    return Err(AttackError::UnknownPeer(p.clone()));
                }
            }
            (topo, vec![AttackGadget::new(a, v, &attacked)])
        }
        AttackKind::Eclipse => {
            let topo = opts
                .topology
                .clone()
                .unwrap_or_else(|| synth_topology(opts.nodes, opts.avg_degree, opts.seed));
            let victim = pick_eclipse_victim(&topo).ok_or(AttackError::EmptyVictims)?;
            let attackers: BTreeSet<PeerId> = topo.neighbors(&victim).cloned().collect();
            let gadgets = attackers
                .iter()
                .map(|x| AttackGadget::new(x.clone(), victim.clone(), &attacked))
                .collect();
            let honest = topo.nodes().filter(|p| **p != victim && !attackers.contains(*p));
            if let Some(publisher) = highest_degree(&topo, honest) {
                background.push((publisher, background_topics(&attacked, &topics)));
            }
            (topo, gadgets)
        }
        AttackKind::Partition => {
            let topo = opts
                .topology
                .clone()
                .unwrap_or_else(|| synth_topology(12, 3.0, opts.seed));
            let start = topo
                .nodes()
                .min_by_key(|p| (topo.degree(p), (*p).clone()))
                .cloned()
                .ok_or(AttackError::EmptyVictims)?;
            let side = bfs_prefix(&topo, &start, 3);
            let subnet_list: Vec<Topic> = (1..=subnets)
                .map(|k| Topic::from(format!("{}{k}", crate::config::ETH_SUBNET_PREFIX)))
                .collect();
            let plan = synth_partition_attack(&topo, &side, &subnet_list, i)?;
            let rest = topo.without(&plan.cut);
            let near = rest.reachable_from(side.iter());
            let far: Vec<&PeerId> = rest.nodes().filter(|p| !near.contains(*p)).collect();
            let publish = background_topics(&attacked, &topics);
            for group in [near.iter().collect::<Vec<_>>(), far] {
                if let Some(p) = highest_degree(&topo, group.into_iter()) {
                    background.push((p, publish.clone()));
                }
            }
            let gadgets = plan.gadgets.clone();
            partition = Some(plan);
            (topo, gadgets)
        }
    };

    let subs = subscribe_all(&topo, &twp);
    let mut sim = Simulation::from_topology(&topo, &subs, &twp, opts.seed)?;
    sim.max_steps = opts.max_steps;
    let mut script = gen_attack_events(scenario.kind(), &gadgets, &topics, rounds, opts.f, b)?;
    script.background = background;
    let outcome = run_attack(&mut sim, &script)?;
    let report = validate_attack(&sim.trace, &sim.group, &script, &topo, &twp)?;

    Ok(ScenarioRun {
        scenario,
        seed: opts.seed,
        fingerprint: twp.fingerprint(),
        subnets,
        rounds,
        f: opts.f,
        b,
        topology: topo.stats(),
        attackers: script.attackers(),
        victims: script.victims(),
        attacked_topics: attacked,
        partition,
        script_events: script.events.len(),
        steps: sim.steps(),
        outcome,
        report,
        trace: sim.trace,
    })
}

/// Each attacked topic plus the first topic the attackers still serve.
fn background_topics(attacked: &BTreeSet<Topic>, topics: &[Topic]) -> Vec<Topic> {
    let mut out: Vec<Topic> = attacked.iter().cloned().collect();
    out.extend(topics.iter().find(|t| !attacked.contains(*t)).cloned());
    out
}

/// The script a scenario would run, without running it.
pub fn scenario_script(scenario: Scenario, opts: &ScenarioOptions) -> Result<AttackScript, AttackError> {
    let i = scenario.attacked_count();
    let b = scenario.blocked_rate();
    let subnets = plan_subnet_count(i, opts.f, b, PlanMode::Conservative, PlanTarget::AtCap, opts.max_subnets)
        .ok_or(AttackError::Unsolvable { attacked: i, total: opts.max_subnets })?;
    let twp = eth_with_subnets(subnets as usize);
    let attacked = attacked_subnets(i);
    let gadget = AttackGadget::new("A", "V", &attacked);
    gen_attack_events(
        scenario.kind(),
        &[gadget],
        &subnet_topics(&twp, &attacked),
        opts.rounds.unwrap_or(scenario.default_rounds()),
        opts.f,
        b,
    )
}
