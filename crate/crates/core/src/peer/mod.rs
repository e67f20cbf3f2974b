//! The per-peer state machine.

mod event;
mod heartbeat;
mod state;

pub use event::{Event, Payload};
pub use state::{
    CachedMessage, MsgsState, NbrTopicState, NeighborInfo, NeighborScore, PeerState,
    PendingIwant, RequestStats, ScoreSnapshot, SeenEntry, TopicSnapshot,
};

use crate::config::Twp;
use crate::ids::{MessageId, PeerId, Topic};
use crate::oracle::Oracle;
use crate::rational::{self, Rational};
use num_traits::{One, Signed};
use serde::Serialize;

/// Result of applying one event to a peer.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Transition {
    /// Always `SND` events from this peer, in emission order.
    pub emitted: Vec<Event>,
    pub notes: Vec<String>,
    /// Present after a heartbeat when requested.
    pub snapshot: Option<ScoreSnapshot>,
}

impl Transition {
    fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }
}

/// Applies `ev` to a copy of `ps` and returns the new state with what it emitted.
pub fn ps_trx(ps: &PeerState, ev: &Event, twp: &Twp, oracle: &mut Oracle) -> (PeerState, Transition) {
    let mut next = ps.clone();
    let tr = next.apply(ev, twp, oracle, true);
    (next, tr)
}

impl PeerState {
    /// In-place transition. `snapshot` controls whether heartbeats report scores.
    pub fn apply(&mut self, ev: &Event, twp: &Twp, oracle: &mut Oracle, snapshot: bool) -> Transition {
        let mut tr = Transition::default();
        if ev.actor() != &self.id {
            tr.note(format!("event for {} applied to {}; ignored", ev.actor(), self.id));
            return tr;
        }
        match ev {
            Event::Send { to, msg, .. } => self.on_send(to, msg),
            Event::Receive { from, msg, .. } => self.on_receive(from, msg, twp, &mut tr),
            Event::Join { topic, .. } => self.on_join(topic, twp, oracle, &mut tr),
            Event::Leave { topic, .. } => self.on_leave(topic, twp, &mut tr),
            Event::Connect { other, .. } => self.on_connect(other, &mut tr),
            Event::Heartbeat { .. } => {
                tr.snapshot = self.heartbeat(twp, oracle, &mut tr, snapshot);
            }
            Event::Publish { topic, mid, .. } => self.on_publish(topic, *mid, twp, oracle, &mut tr),
        }
        tr
    }

    fn emit(&self, tr: &mut Transition, to: &PeerId, msg: Payload) {
        tr.emitted.push(Event::send(&self.id, to, msg));
    }

    fn remember(&mut self, mid: MessageId, topic: &Topic, from: Option<&PeerId>) {
        let deliverers = from.into_iter().cloned().collect();
        self.msgs.seen.insert(
            mid,
            SeenEntry {
                age: 0,
                topic: topic.clone(),
                first_tick: self.tick,
                deliverers,
            },
        );
        self.msgs.cache(mid, topic);
    }

    /// Marks a message as already known without caching it for gossip.
    pub fn mark_seen(&mut self, mid: MessageId, topic: &Topic) {
        if !self.msgs.seen.contains_key(&mid) {
            self.msgs.seen.insert(
                mid,
                SeenEntry {
                    age: 0,
                    topic: topic.clone(),
                    first_tick: self.tick,
                    deliverers: Default::default(),
                },
            );
        }
    }

    /// Sender-side bookkeeping: messages we originate become ours.
    fn on_send(&mut self, _to: &PeerId, msg: &Payload) {
        if let Payload::Full {
            topic,
            mid,
            valid: true,
        } = msg
        {
            if !self.msgs.seen.contains_key(mid) {
                self.remember(*mid, topic, None);
            }
        }
    }

    fn on_receive(&mut self, from: &PeerId, msg: &Payload, twp: &Twp, tr: &mut Transition) {
        if !self.is_neighbor(from) {
            tr.note(format!("{} ignored {msg} from unknown neighbor {from}", self.id));
            return;
        }
        if msg.is_control() && self.score_of(from) < twp.global.graylist_threshold {
            tr.note(format!("{} ignored {msg} from graylisted {from}", self.id));
            return;
        }
        if let Some(t) = msg.topic() {
            if !twp.topics.contains_key(t) {
                tr.note(format!("{} ignored {msg}: topic {t} not configured", self.id));
                return;
            }
        }
        match msg {
            Payload::Full { topic, mid, valid } => self.handle_full(from, topic, *mid, *valid, twp, tr),
            Payload::Ihave { topic, mids } => self.handle_ihave(from, topic, mids, twp, tr),
            Payload::Iwant { mids } => self.handle_iwant(from, mids, twp, tr),
            Payload::Graft { topic } => self.handle_graft(from, topic, twp, tr),
            Payload::Prune { topic, backoff } => self.handle_prune(from, topic, *backoff, twp),
            Payload::Sub { topic } => {
                self.nts
                    .nbr_subs
                    .entry(from.clone())
                    .or_default()
                    .insert(topic.clone());
                self.known_topics.insert(topic.clone());
            }
            Payload::Unsub { topic } => {
                if let Some(s) = self.nts.nbr_subs.get_mut(from) {
                    s.remove(topic);
                }
                self.drop_from_mesh(from, topic, twp);
                if let Some(f) = self.nts.fanout.get_mut(topic) {
                    f.remove(from);
                }
                let until = self.tick + twp.global.unsubscribe_backoff_ticks;
                self.nts.set_backoff(from, topic, until);
            }
        }
    }

    pub(crate) fn handle_full(
        &mut self,
        from: &PeerId,
        topic: &Topic,
        mid: MessageId,
        valid: bool,
        twp: &Twp,
        tr: &mut Transition,
    ) {
        let tp = &twp.topics[topic];
        let in_mesh = self.nts.in_mesh(topic, from);
        if !valid {
            self.counters
                .topic_counters_mut(from, topic)
                .invalid_message_deliveries += Rational::one();
            return;
        }
        if let Some(entry) = self.msgs.seen.get_mut(&mid) {
            let near = self.tick - entry.first_tick <= tp.mesh_message_deliveries_window;
            let fresh = entry.deliverers.insert(from.clone());
            if in_mesh && near && fresh {
                let tc = self.counters.topic_counters_mut(from, topic);
                tc.mesh_message_deliveries = rational::min(
                    &(&tc.mesh_message_deliveries + Rational::one()),
                    &tp.mesh_message_deliveries_cap,
                );
            }
            return;
        }
        self.remember(mid, topic, Some(from));
        {
            let tc = self.counters.topic_counters_mut(from, topic);
            tc.first_message_deliveries = rational::min(
                &(&tc.first_message_deliveries + Rational::one()),
                &tp.first_message_deliveries_cap,
            );
            if in_mesh {
                tc.mesh_message_deliveries = rational::min(
                    &(&tc.mesh_message_deliveries + Rational::one()),
                    &tp.mesh_message_deliveries_cap,
                );
            }
        }
        for pending in self.msgs.pending_iwants.values_mut() {
            pending.remove(&mid);
        }
        self.msgs.pending_iwants.retain(|_, m| !m.is_empty());
        let targets = if self.subs.contains(topic) {
            self.mesh(topic)
        } else {
            self.fanout(topic)
        };
        for q in targets.iter().filter(|q| *q != from) {
            self.emit(tr, q, Payload::full(topic, mid));
        }
    }

    fn handle_ihave(
        &mut self,
        from: &PeerId,
        topic: &Topic,
        mids: &[MessageId],
        twp: &Twp,
        tr: &mut Transition,
    ) {
        if !self.subs.contains(topic) || self.score_of(from) < twp.global.gossip_threshold {
            return;
        }
        let mut want: Vec<MessageId> = mids
            .iter()
            .copied()
            .filter(|m| !self.msgs.seen.contains_key(m) && !self.msgs.is_pending(*m))
            .collect();
        want.sort_unstable();
        want.dedup();
        if want.is_empty() {
            return;
        }
        let pending = self.msgs.pending_iwants.entry(from.clone()).or_default();
        for m in &want {
            pending.insert(
                *m,
                PendingIwant {
                    topic: topic.clone(),
                    age: 0,
                },
            );
        }
        self.msgs.stats.iwant_sent += 1;
        self.emit(tr, from, Payload::Iwant { mids: want });
    }

    fn handle_iwant(&mut self, from: &PeerId, mids: &[MessageId], twp: &Twp, tr: &mut Transition) {
        self.msgs.stats.iwant_received += 1;
        if self.score_of(from) < twp.global.gossip_threshold {
            return;
        }
        for mid in mids {
            match self.msgs.cached(*mid).cloned() {
                Some(m) => {
                    self.msgs.stats.served += 1;
                    self.emit(tr, from, Payload::full(&m.topic, m.mid));
                }
                None => self.msgs.stats.not_served += 1,
            }
        }
    }

    fn handle_graft(&mut self, from: &PeerId, topic: &Topic, twp: &Twp, tr: &mut Transition) {
        let gp = &twp.global;
        if self.nts.in_mesh(topic, from) {
            return;
        }
        let prune = Payload::Prune {
            topic: topic.clone(),
            backoff: gp.prune_backoff_ticks,
        };
        if self.nts.backed_off(from, topic, self.tick) {
            self.counters.global_counters_mut(from).behaviour_penalty += Rational::one();
            self.nts
                .set_backoff(from, topic, self.tick + gp.prune_backoff_ticks);
            self.emit(tr, from, prune);
        } else if self.score_of(from).is_negative() {
            self.nts
                .set_backoff(from, topic, self.tick + gp.prune_backoff_ticks);
            self.emit(tr, from, prune);
        } else if !self.subs.contains(topic) {
            self.emit(tr, from, prune);
        } else {
            self.add_to_mesh(from, topic);
        }
    }

    fn handle_prune(&mut self, from: &PeerId, topic: &Topic, backoff: u64, twp: &Twp) {
        self.drop_from_mesh(from, topic, twp);
        self.nts.set_backoff(from, topic, self.tick + backoff);
    }

    pub(crate) fn add_to_mesh(&mut self, q: &PeerId, topic: &Topic) {
        self.nts
            .mesh
            .entry(topic.clone())
            .or_default()
            .insert(q.clone());
        if let Some(f) = self.nts.fanout.get_mut(topic) {
            f.remove(q);
        }
        self.counters.topic_counters_mut(q, topic).mesh_time = rational::zero();
    }

    /// Removal initiated by the neighbor (PRUNE or UNSUB).
    fn drop_from_mesh(&mut self, q: &PeerId, topic: &Topic, twp: &Twp) {
        let removed = self
            .nts
            .mesh
            .get_mut(topic)
            .is_some_and(|m| m.remove(q));
        if removed {
            if twp.global.penalize_any_mesh_removal {
                self.penalize_removal(q, topic, twp);
            }
            self.counters.topic_counters_mut(q, topic).mesh_time = rational::zero();
        }
    }

    pub(crate) fn penalize_removal(&mut self, q: &PeerId, topic: &Topic, twp: &Twp) {
        let tp = &twp.topics[topic];
        let tc = self.counters.topic_counters_mut(q, topic);
        *tc = crate::score::apply_prune_penalty(tc, tp);
    }

    pub(crate) fn graft_candidates(&self, topic: &Topic) -> Vec<PeerId> {
        self.neighbors()
            .filter(|q| {
                self.nts.subscribed(q, topic)
                    && !self.nts.in_mesh(topic, q)
                    && !self.nts.backed_off(q, topic, self.tick)
                    && !self.score_of(q).is_negative()
            })
            .cloned()
            .collect()
    }

    fn on_join(&mut self, topic: &Topic, twp: &Twp, oracle: &mut Oracle, tr: &mut Transition) {
        let Some(tp) = twp.topics.get(topic) else {
            tr.note(format!("{} cannot join unconfigured topic {topic}", self.id));
            return;
        };
        if !self.subs.insert(topic.clone()) {
            tr.note(format!("{} already subscribed to {topic}", self.id));
            return;
        }
        self.known_topics.insert(topic.clone());
        let nbrs: Vec<PeerId> = self.neighbors().cloned().collect();
        for q in &nbrs {
            self.emit(tr, q, Payload::Sub { topic: topic.clone() });
        }
        let fanout = self.nts.fanout.remove(topic).unwrap_or_default();
        self.nts.last_pub.remove(topic);
        let mut added: Vec<PeerId> = fanout
            .into_iter()
            .filter(|q| {
                !self.score_of(q).is_negative() && !self.nts.backed_off(q, topic, self.tick)
            })
            .take(tp.d)
            .collect();
        if added.len() < tp.d {
            let pool: Vec<PeerId> = self
                .graft_candidates(topic)
                .into_iter()
                .filter(|q| !added.contains(q))
                .collect();
            added.extend(oracle.choose_k(&pool, tp.d - added.len()));
        }
        self.nts.mesh.entry(topic.clone()).or_default();
        added.sort();
        for q in &added {
            self.add_to_mesh(q, topic);
            self.emit(tr, q, Payload::Graft { topic: topic.clone() });
        }
    }

    fn on_leave(&mut self, topic: &Topic, twp: &Twp, tr: &mut Transition) {
        if !self.subs.remove(topic) {
            tr.note(format!("{} is not subscribed to {topic}", self.id));
            return;
        }
        let nbrs: Vec<PeerId> = self.neighbors().cloned().collect();
        for q in &nbrs {
            self.emit(tr, q, Payload::Unsub { topic: topic.clone() });
        }
        let backoff = twp.global.unsubscribe_backoff_ticks;
        for q in self.nts.mesh.remove(topic).unwrap_or_default() {
            self.counters.topic_counters_mut(&q, topic).mesh_time = rational::zero();
            self.nts.set_backoff(&q, topic, self.tick + backoff);
            self.emit(
                tr,
                &q,
                Payload::Prune {
                    topic: topic.clone(),
                    backoff,
                },
            );
        }
    }

    fn on_connect(&mut self, other: &PeerId, tr: &mut Transition) {
        if other == &self.id {
            tr.note(format!("{} cannot connect to itself", self.id));
            return;
        }
        if self.is_neighbor(other) {
            tr.note(format!("{} already connected to {other}", self.id));
            return;
        }
        self.nts
            .neighbors
            .insert(other.clone(), NeighborInfo { outbound: true });
        self.ip_of
            .entry(other.clone())
            .or_insert_with(|| other.to_string());
        let subs: Vec<Topic> = self.subs.iter().cloned().collect();
        for t in subs {
            self.emit(tr, other, Payload::Sub { topic: t });
        }
    }

    fn on_publish(
        &mut self,
        topic: &Topic,
        mid: MessageId,
        twp: &Twp,
        oracle: &mut Oracle,
        tr: &mut Transition,
    ) {
        let Some(tp) = twp.topics.get(topic) else {
            tr.note(format!("{} cannot publish to unconfigured topic {topic}", self.id));
            return;
        };
        if self.msgs.seen.contains_key(&mid) {
            tr.note(format!("{} already has message {mid}", self.id));
            return;
        }
        self.known_topics.insert(topic.clone());
        self.remember(mid, topic, None);
        let gp = &twp.global;
        let publishable = |ps: &PeerState, q: &PeerId| {
            ps.nts.subscribed(q, topic) && ps.score_of(q) >= gp.publish_threshold
        };
        let targets: Vec<PeerId> = if gp.flood_publish {
            self.neighbors()
                .filter(|q| publishable(self, q))
                .cloned()
                .collect()
        } else if self.subs.contains(topic) {
            self.mesh(topic).into_iter().collect()
        } else {
            let current = self.fanout(topic);
            if current.is_empty() {
                let pool: Vec<PeerId> = self
                    .neighbors()
                    .filter(|q| publishable(self, q))
                    .cloned()
                    .collect();
                let chosen = oracle.choose_k(&pool, tp.d);
                self.nts
                    .fanout
                    .insert(topic.clone(), chosen.iter().cloned().collect());
            }
            self.nts.last_pub.insert(topic.clone(), self.tick);
            self.fanout(topic).into_iter().collect()
        };
        for q in &targets {
            self.emit(tr, q, Payload::full(topic, mid));
        }
    }
}
