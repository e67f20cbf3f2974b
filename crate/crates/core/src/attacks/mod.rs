//! Attack synthesis and validation: gadgets, event scripts, topic-count planning,
//! vertex cuts and the built-in scenarios.

mod cut;
mod plan;
mod scenarios;
mod script;
mod validate;

pub use crate::topology::{load_topology, parse_edge_list, synth_topology, Topology, TopologyStats};
pub use cut::{min_vertex_cut, separates, synth_partition_attack, PartitionPlan};
pub use plan::{
    attacked_subnets, estimate_attacker_score, generic_extra_topics, max_topic_deficit, max_topic_reward, min_extra_topics, plan_honest_topics, plan_subnet_count, PlanMode, PlanTarget,
};
pub use scenarios::{run_scenario, scenario_script, Scenario, ScenarioOptions, ScenarioRun};
pub use script::{gen_attack_events, run_attack, AttackGadget, AttackKind, AttackScript, BACKGROUND_MID_BASE, SCRIPT_MID_BASE};
pub use validate::{validate_attack, AttackReport, CacheCheck, GadgetVerdict};

use crate::ids::{PeerId, Topic};

#[derive(Debug, thiserror::Error)]
pub enum AttackError {
    #[error("b must be 0 or 1, got {0}")]
    BadBlockRate(u64),
    #[error("f must be at least 1")]
    ZeroHonestRate,
    #[error("attacked topic {0} is not among the script topics")]
    UnknownTopic(Topic),
    #[error("peer {0} is not in the topology")]
    UnknownPeer(PeerId),
    #[error("victim set is empty")]
    EmptyVictims,
    #[error("no vertex cut separates the victims: their neighborhood covers the graph")]
    NoCut,
    #[error("no topic count satisfies the attack bound for {attacked} attacked of {total} topics")]
    Unsolvable { attacked: u64, total: u64 },
    #[error("trace does not match the script: {0}")]
    Mismatch(String),
    #[error(transparent)]
    Network(#[from] crate::network::NetworkError),
}
