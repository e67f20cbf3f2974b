//! Built-in parameter sets.
//!
//! Weights, topic weights, caps and `D` come from published deployments. The
//! per-topic caps, decays, thresholds and quanta that those deployments do not pin
//! down are chosen here and kept fixed; the counterexample fixtures depend on them.

use super::{defaults, GlobalParams, TopicParams, Twp};
use crate::ids::Topic;
use crate::rational::{int, parse, Rational};
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

/// Subnet topics in the Eth preset are named `SUB1`, `SUB2`, ...
pub const ETH_SUBNET_PREFIX: &str = "SUB";

fn q(s: &str) -> Rational {
    parse(s).expect("preset literal")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Eth,
    /// Eth with the alternative 37.72 topic cap.
    EthCap3772,
    Filecoin,
    Pathological,
    Good,
}

impl Preset {
    pub const ALL: [Preset; 5] = [
        Preset::Eth,
        Preset::EthCap3772,
        Preset::Filecoin,
        Preset::Pathological,
        Preset::Good,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Eth => "eth",
            Preset::EthCap3772 => "eth-37.72",
            Preset::Filecoin => "filecoin",
            Preset::Pathological => "pathological",
            Preset::Good => "good",
        }
    }

    pub fn build(self) -> Twp {
        match self {
            Preset::Eth => eth(),
            Preset::EthCap3772 => eth_topic_cap_variant(),
            Preset::Filecoin => filecoin(),
            Preset::Pathological => pathological(),
            Preset::Good => good(),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Preset::ALL.iter().map(|p| p.name()).collect();
                format!("unknown preset {s:?}, expected one of {}", names.join(", "))
            })
    }
}

#[allow(clippy::too_many_arguments)]
fn topic(
    weight: &str,
    w1: &str,
    w2: &str,
    w3: &str,
    w4: &str,
    quantum: u64,
    fmd_cap: &str,
    fmd_decay: &str,
    mmd_decay: &str,
    threshold: &str,
    mmd_cap: &str,
    activation: u64,
) -> TopicParams {
    TopicParams {
        topic_weight: q(weight),
        time_in_mesh_weight: q(w1),
        first_message_deliveries_weight: q(w2),
        mesh_message_deliveries_weight: q(w3),
        mesh_failure_penalty_weight: q(w3),
        invalid_message_deliveries_weight: q(w4),
        time_in_mesh_quantum: quantum,
        time_in_mesh_cap: int(300),
        first_message_deliveries_cap: q(fmd_cap),
        first_message_deliveries_decay: q(fmd_decay),
        mesh_message_deliveries_decay: q(mmd_decay),
        mesh_failure_penalty_decay: q(mmd_decay),
        invalid_message_deliveries_decay: q("0.9971"),
        mesh_message_deliveries_threshold: q(threshold),
        mesh_message_deliveries_cap: q(mmd_cap),
        activation_window: activation,
        mesh_message_deliveries_window: 0,
        d: 8,
        d_low: 6,
        d_hi: 12,
        d_lazy: Some(6),
    }
}

fn global(
    w5: &str,
    w6: &str,
    w7: &str,
    topic_cap: &str,
    ip_threshold: u64,
    thresholds: [&str; 4],
) -> GlobalParams {
    GlobalParams {
        app_specific_weight: q(w5),
        ip_colocation_weight: q(w6),
        behaviour_penalty_weight: q(w7),
        topic_cap: q(topic_cap),
        ip_colocation_threshold: ip_threshold,
        behaviour_penalty_threshold: int(6),
        behaviour_penalty_decay: q("0.9857"),
        decay_to_zero: defaults::decay_to_zero(),
        decay_interval_ticks: 1,
        prune_backoff_ticks: 60,
        unsubscribe_backoff_ticks: 10,
        flood_publish: true,
        gossip_factor: defaults::gossip_factor(),
        heartbeat_interval_ticks: 1,
        fanout_ttl_ticks: 60,
        seen_ttl_ticks: 120,
        retain_score_ticks: 0,
        mcache_len: 6,
        mcache_gossip: 3,
        dscore: 6,
        dout: 2,
        gossip_threshold: q(thresholds[0]),
        publish_threshold: q(thresholds[1]),
        graylist_threshold: q(thresholds[2]),
        opportunistic_graft_threshold: q(thresholds[3]),
        square_invalid_deliveries: false,
        penalize_any_mesh_removal: false,
        iwant_failure_probability: int(1),
        iwant_timeout_ticks: 1,
        opportunistic_graft_peers: 2,
    }
}

fn eth_blocks() -> TopicParams {
    topic(
        "0.8", "0.0324", "1", "-0.717", "-140.45", 1, "23", "0.9928", "0.9928", "10", "100", 20,
    )
}

fn eth_agg() -> TopicParams {
    topic(
        "0.5", "0.0324", "0.128", "-0.064", "-140.45", 1, "178", "0.8659", "0.9646", "10",
        "100", 32,
    )
}

fn eth_subnet() -> TopicParams {
    topic(
        "0.33", "0.0324", "0.95", "-37.55", "-4544", 10, "24", "0.9928", "0.9646", "2", "24", 3,
    )
}

/// Eth preset with `subnets` subnet topics `SUB1..SUBn` next to `BLOCKS` and `AGG`.
pub fn eth_with_subnets(subnets: usize) -> Twp {
    let mut topics = BTreeMap::new();
    topics.insert(Topic::from("BLOCKS"), eth_blocks());
    topics.insert(Topic::from("AGG"), eth_agg());
    for k in 1..=subnets {
        topics.insert(Topic::from(format!("{ETH_SUBNET_PREFIX}{k}")), eth_subnet());
    }
    Twp {
        global: global(
            "1",
            "-35.11",
            "-15.92",
            "32.72",
            10,
            ["-4000", "-8000", "-16000", "5"],
        ),
        topics,
    }
}

pub fn eth() -> Twp {
    eth_with_subnets(3)
}

pub fn eth_topic_cap_variant() -> Twp {
    let mut twp = eth();
    twp.global.topic_cap = q("37.72");
    twp
}

pub fn filecoin() -> Twp {
    let mut messages = topic(
        "1", "2.78", "0.5", "0", "-1000", 1, "100", "0.5", "0.5", "0", "0", 0,
    );
    messages.time_in_mesh_cap = int(3600);
    messages.invalid_message_deliveries_decay = q("0.9994");
    let mut blocks = topic(
        "1", "0.027", "5", "0", "-1000", 1, "10", "0.998", "0.5", "0", "0", 0,
    );
    blocks.time_in_mesh_cap = int(3600);
    blocks.invalid_message_deliveries_decay = q("0.9994");
    let mut g = global("1", "-100", "-10", "0", 5, ["-500", "-1000", "-2500", "3.5"]);
    g.behaviour_penalty_decay = q("0.9987");
    g.mcache_len = 5;
    Twp {
        global: g,
        topics: [
            (Topic::from("MESSAGES"), messages),
            (Topic::from("BLOCKS"), blocks),
        ]
        .into_iter()
        .collect(),
    }
}

pub fn pathological() -> Twp {
    let mut tp = topic(
        "40", "10", "10", "-1", "-1", 1, "100", "0.9", "0.9", "10", "100", 5,
    );
    tp.time_in_mesh_cap = int(100);
    tp.d = 5;
    tp.d_low = 4;
    tp.d_hi = 10;
    tp.d_lazy = Some(5);
    let mut g = global("10", "-1", "-1", "5", 10, ["-4000", "-8000", "-16000", "5"]);
    g.dscore = 4;
    Twp {
        global: g,
        topics: (1..=5)
            .map(|k| (Topic::from(format!("PATH{k}")), tp.clone()))
            .collect(),
    }
}

pub fn good() -> Twp {
    let mut tp = topic(
        "0.5", "0.027", "5", "-1000", "-1000", 1, "16", "0.9", "0.9", "4", "16", 10,
    );
    tp.time_in_mesh_cap = int(100);
    let mut g = global("1", "-100", "-10", "100", 10, ["-4000", "-8000", "-16000", "5"]);
    g.behaviour_penalty_decay = q("0.9");
    Twp {
        global: g,
        topics: [(Topic::from("GOOD1"), tp.clone()), (Topic::from("GOOD2"), tp)]
            .into_iter()
            .collect(),
    }
}
