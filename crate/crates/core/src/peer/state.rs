use crate::ids::{MessageId, PeerId, Topic};
use crate::rational::{serde_q, serde_q_map, Rational};
use crate::score::CounterMaps;
use num_traits::Zero;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, VecDeque};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NeighborInfo {
    /// We initiated the connection.
    pub outbound: bool,
}

/// What a peer knows about its neighbors' topics, plus its meshes and fanouts.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NbrTopicState {
    pub neighbors: BTreeMap<PeerId, NeighborInfo>,
    pub nbr_subs: BTreeMap<PeerId, BTreeSet<Topic>>,
    pub mesh: BTreeMap<Topic, BTreeSet<PeerId>>,
    pub fanout: BTreeMap<Topic, BTreeSet<PeerId>>,
    pub last_pub: BTreeMap<Topic, u64>,
    /// Tick until which the neighbor may not be grafted on the topic.
    pub backoff_until: BTreeMap<PeerId, BTreeMap<Topic, u64>>,
}

impl NbrTopicState {
    pub fn in_mesh(&self, t: &Topic, q: &PeerId) -> bool {
        self.mesh.get(t).is_some_and(|m| m.contains(q))
    }

    pub fn in_fanout(&self, t: &Topic, q: &PeerId) -> bool {
        self.fanout.get(t).is_some_and(|m| m.contains(q))
    }

    pub fn mesh_of(&self, t: &Topic) -> impl Iterator<Item = &PeerId> {
        self.mesh.get(t).into_iter().flatten()
    }

    pub fn subscribed(&self, q: &PeerId, t: &Topic) -> bool {
        self.nbr_subs.get(q).is_some_and(|s| s.contains(t))
    }

    pub fn backed_off(&self, q: &PeerId, t: &Topic, now: u64) -> bool {
        self.backoff_until
            .get(q)
            .and_then(|m| m.get(t))
            .is_some_and(|until| now < *until)
    }

    pub fn set_backoff(&mut self, q: &PeerId, t: &Topic, until: u64) {
        self.backoff_until
            .entry(q.clone())
            .or_default()
            .insert(t.clone(), until);
    }

    pub fn is_outbound(&self, q: &PeerId) -> bool {
        self.neighbors.get(q).is_some_and(|n| n.outbound)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CachedMessage {
    pub mid: MessageId,
    pub topic: Topic,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeenEntry {
    pub age: u64,
    pub topic: Topic,
    pub first_tick: u64,
    /// Neighbors that delivered this message, first deliverer included.
    pub deliverers: BTreeSet<PeerId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PendingIwant {
    pub topic: Topic,
    pub age: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequestStats {
    pub iwant_sent: u64,
    pub iwant_received: u64,
    pub served: u64,
    pub not_served: u64,
    pub timed_out: u64,
}

/// Message caches and outstanding requests.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MsgsState {
    /// History windows, newest first.
    pub mcache: VecDeque<Vec<CachedMessage>>,
    pub seen: BTreeMap<MessageId, SeenEntry>,
    pub pending_iwants: BTreeMap<PeerId, BTreeMap<MessageId, PendingIwant>>,
    pub stats: RequestStats,
}

impl Default for MsgsState {
    fn default() -> Self {
        Self {
            mcache: VecDeque::from([Vec::new()]),
            seen: BTreeMap::new(),
            pending_iwants: BTreeMap::new(),
            stats: RequestStats::default(),
        }
    }
}

impl MsgsState {
    pub fn cached(&self, mid: MessageId) -> Option<&CachedMessage> {
        self.mcache.iter().flatten().find(|m| m.mid == mid)
    }

    pub fn cache(&mut self, mid: MessageId, topic: &Topic) {
        self.mcache
            .front_mut()
            .expect("mcache always has a current window")
            .push(CachedMessage {
                mid,
                topic: topic.clone(),
            });
    }

    pub fn is_pending(&self, mid: MessageId) -> bool {
        self.pending_iwants.values().any(|m| m.contains_key(&mid))
    }

    /// Mids currently held in the cache or the seen set, by topic.
    pub fn known_mids(&self) -> BTreeSet<(Topic, MessageId)> {
        let mut out: BTreeSet<(Topic, MessageId)> = self
            .mcache
            .iter()
            .flatten()
            .map(|m| (m.topic.clone(), m.mid))
            .collect();
        out.extend(self.seen.iter().map(|(mid, e)| (e.topic.clone(), *mid)));
        out
    }
}

/// Score of one neighbor as seen at a heartbeat.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NeighborScore {
    #[serde(with = "serde_q")]
    pub total: Rational,
    pub topics: BTreeMap<Topic, TopicSnapshot>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TopicSnapshot {
    #[serde(with = "serde_q")]
    pub score: Rational,
    #[serde(with = "serde_q")]
    pub mesh_time: Rational,
}

/// Neighbor scores refreshed by one heartbeat.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreSnapshot {
    pub tick: u64,
    pub scores: BTreeMap<PeerId, NeighborScore>,
}

/// Complete local state of one peer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeerState {
    pub id: PeerId,
    pub subs: BTreeSet<Topic>,
    pub known_topics: BTreeSet<Topic>,
    pub nts: NbrTopicState,
    pub msgs: MsgsState,
    pub counters: CounterMaps,
    #[serde(with = "serde_q_map")]
    pub nbr_scores: BTreeMap<PeerId, Rational>,
    /// Address label per neighbor, used for colocation counting.
    pub ip_of: BTreeMap<PeerId, String>,
    pub tick: u64,
}

impl PeerState {
    pub fn new(id: impl Into<PeerId>) -> Self {
        Self {
            id: id.into(),
            subs: BTreeSet::new(),
            known_topics: BTreeSet::new(),
            nts: NbrTopicState::default(),
            msgs: MsgsState::default(),
            counters: CounterMaps::default(),
            nbr_scores: BTreeMap::new(),
            ip_of: BTreeMap::new(),
            tick: 0,
        }
    }

    pub fn score_of(&self, q: &PeerId) -> Rational {
        self.nbr_scores.get(q).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn is_neighbor(&self, q: &PeerId) -> bool {
        self.nts.neighbors.contains_key(q)
    }

    pub fn neighbors(&self) -> impl Iterator<Item = &PeerId> {
        self.nts.neighbors.keys()
    }

    /// Topics we know of but do not subscribe to.
    pub fn unsubscribed_topics(&self) -> impl Iterator<Item = &Topic> {
        self.known_topics.difference(&self.subs)
    }

    pub fn mesh(&self, t: &Topic) -> BTreeSet<PeerId> {
        self.nts.mesh.get(t).cloned().unwrap_or_default()
    }

    pub fn fanout(&self, t: &Topic) -> BTreeSet<PeerId> {
        self.nts.fanout.get(t).cloned().unwrap_or_default()
    }
}
