//! Score-function and protocol parameters.

mod presets;
mod validate;

pub use presets::{
    eth, eth_topic_cap_variant, eth_with_subnets, filecoin, good, pathological, Preset,
    ETH_SUBNET_PREFIX,
};
pub use validate::{validate_config, Finding, Severity, ValidationReport};

use crate::ids::Topic;
use crate::rational::{serde_q, Rational};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Per-topic weights, caps, decays and mesh degrees.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct TopicParams {
    #[serde(with = "serde_q")]
    pub topic_weight: Rational,
    #[serde(rename = "w1", with = "serde_q")]
    pub time_in_mesh_weight: Rational,
    #[serde(rename = "w2", with = "serde_q")]
    pub first_message_deliveries_weight: Rational,
    #[serde(rename = "w3", with = "serde_q")]
    pub mesh_message_deliveries_weight: Rational,
    #[serde(rename = "w3b", with = "serde_q")]
    pub mesh_failure_penalty_weight: Rational,
    #[serde(rename = "w4", with = "serde_q")]
    pub invalid_message_deliveries_weight: Rational,
    /// Heartbeat ticks per time-in-mesh quantum.
    pub time_in_mesh_quantum: u64,
    #[serde(with = "serde_q")]
    pub time_in_mesh_cap: Rational,
    #[serde(with = "serde_q")]
    pub first_message_deliveries_cap: Rational,
    #[serde(with = "serde_q")]
    pub first_message_deliveries_decay: Rational,
    #[serde(with = "serde_q")]
    pub mesh_message_deliveries_decay: Rational,
    #[serde(with = "serde_q")]
    pub mesh_failure_penalty_decay: Rational,
    #[serde(with = "serde_q")]
    pub invalid_message_deliveries_decay: Rational,
    #[serde(with = "serde_q")]
    pub mesh_message_deliveries_threshold: Rational,
    #[serde(with = "serde_q")]
    pub mesh_message_deliveries_cap: Rational,
    /// Measured in time-in-mesh quanta.
    pub activation_window: u64,
    /// Ticks after a first delivery during which mesh duplicates still count.
    #[serde(default)]
    pub mesh_message_deliveries_window: u64,
    #[serde(rename = "D", default = "defaults::d")]
    pub d: usize,
    #[serde(rename = "Dlow", default = "defaults::d_low")]
    pub d_low: usize,
    #[serde(rename = "Dhi", default = "defaults::d_hi")]
    pub d_hi: usize,
    /// Defaults to `D` when absent.
    #[serde(rename = "Dlazy", default, skip_serializing_if = "Option::is_none")]
    pub d_lazy: Option<usize>,
}

impl TopicParams {
    pub fn d_lazy(&self) -> usize {
        self.d_lazy.unwrap_or(self.d)
    }

    /// Mesh time (in ticks) that must be exceeded before delivery deficits count.
    pub fn activation_ticks(&self) -> u64 {
        self.activation_window * self.time_in_mesh_quantum
    }
}

/// Parameters shared by every topic.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct GlobalParams {
    #[serde(rename = "w5", with = "serde_q")]
    pub app_specific_weight: Rational,
    #[serde(rename = "w6", with = "serde_q")]
    pub ip_colocation_weight: Rational,
    #[serde(rename = "w7", with = "serde_q")]
    pub behaviour_penalty_weight: Rational,
    #[serde(with = "serde_q")]
    pub topic_cap: Rational,
    pub ip_colocation_threshold: u64,
    #[serde(with = "serde_q")]
    pub behaviour_penalty_threshold: Rational,
    #[serde(with = "serde_q")]
    pub behaviour_penalty_decay: Rational,
    #[serde(with = "serde_q", default = "defaults::decay_to_zero")]
    pub decay_to_zero: Rational,
    #[serde(default = "defaults::one")]
    pub decay_interval_ticks: u64,
    #[serde(default = "defaults::prune_backoff")]
    pub prune_backoff_ticks: u64,
    #[serde(default = "defaults::unsubscribe_backoff")]
    pub unsubscribe_backoff_ticks: u64,
    #[serde(default = "defaults::yes")]
    pub flood_publish: bool,
    #[serde(with = "serde_q", default = "defaults::gossip_factor")]
    pub gossip_factor: Rational,
    #[serde(default = "defaults::one")]
    pub heartbeat_interval_ticks: u64,
    #[serde(rename = "fanoutTTLTicks", default = "defaults::fanout_ttl")]
    pub fanout_ttl_ticks: u64,
    #[serde(rename = "seenTTLTicks", default = "defaults::seen_ttl")]
    pub seen_ttl_ticks: u64,
    #[serde(default)]
    pub retain_score_ticks: u64,
    #[serde(default = "defaults::mcache_len")]
    pub mcache_len: usize,
    #[serde(default = "defaults::mcache_gossip")]
    pub mcache_gossip: usize,
    #[serde(default = "defaults::dscore")]
    pub dscore: usize,
    #[serde(default = "defaults::dout")]
    pub dout: usize,
    #[serde(with = "serde_q")]
    pub gossip_threshold: Rational,
    #[serde(with = "serde_q")]
    pub publish_threshold: Rational,
    #[serde(with = "serde_q")]
    pub graylist_threshold: Rational,
    #[serde(with = "serde_q")]
    pub opportunistic_graft_threshold: Rational,
    /// Square the invalid-delivery indicator like the reference implementation does.
    #[serde(rename = "squareP4", default)]
    pub square_invalid_deliveries: bool,
    /// Apply the prune penalty whenever a mesh member is removed, not only on our own prunes.
    #[serde(default)]
    pub penalize_any_mesh_removal: bool,
    /// Probability that an unanswered IWANT is counted against the peer.
    #[serde(with = "serde_q", default = "defaults::one_q")]
    pub iwant_failure_probability: Rational,
    #[serde(default = "defaults::one")]
    pub iwant_timeout_ticks: u64,
    #[serde(default = "defaults::opportunistic_graft_peers")]
    pub opportunistic_graft_peers: usize,
}

/// Topic parameters plus the global parameters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Twp {
    pub global: GlobalParams,
    pub topics: BTreeMap<Topic, TopicParams>,
}

impl Twp {
    pub fn topic(&self, t: &Topic) -> Option<&TopicParams> {
        self.topics.get(t)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Short stable digest of the canonical JSON, used to tag reports.
    pub fn fingerprint(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        // FNV-1a, 64 bit
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in canonical.bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        format!("{h:016x}")
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("config parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("no topics defined")]
    NoTopics,
    #[error("invalid config: {0}")]
    Invalid(ValidationReport),
}

/// Parses a JSON config document. With `strict`, any validation finding is an error;
/// otherwise only hard type errors are.
pub fn parse_config(text: &str, strict: bool) -> Result<Twp, ConfigError> {
    let twp: Twp = serde_json::from_str(text).map_err(|e| ConfigError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    if twp.topics.is_empty() {
        return Err(ConfigError::NoTopics);
    }
    let report = validate_config(&twp, strict);
    if report.has_errors() {
        return Err(ConfigError::Invalid(report));
    }
    Ok(twp)
}

pub(crate) mod defaults {
    use crate::rational::{ratio, Rational};

    pub fn d() -> usize {
        6
    }
    pub fn d_low() -> usize {
        4
    }
    pub fn d_hi() -> usize {
        12
    }
    pub fn decay_to_zero() -> Rational {
        ratio(1, 100)
    }
    pub fn one() -> u64 {
        1
    }
    pub fn one_q() -> Rational {
        ratio(1, 1)
    }
    pub fn prune_backoff() -> u64 {
        60
    }
    pub fn unsubscribe_backoff() -> u64 {
        10
    }
    pub fn yes() -> bool {
        true
    }
    pub fn gossip_factor() -> Rational {
        ratio(1, 4)
    }
    pub fn fanout_ttl() -> u64 {
        60
    }
    pub fn seen_ttl() -> u64 {
        120
    }
    pub fn mcache_len() -> usize {
        5
    }
    pub fn mcache_gossip() -> usize {
        3
    }
    pub fn dscore() -> usize {
        4
    }
    pub fn dout() -> usize {
        2
    }
    pub fn opportunistic_graft_peers() -> usize {
        2
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.findings.iter().map(|x| x.to_string()).collect();
        f.write_str(&parts.join("; "))
    }
}
