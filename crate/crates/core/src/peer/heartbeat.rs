use super::{NeighborScore, Payload, PeerState, ScoreSnapshot, TopicSnapshot, Transition};
use crate::config::Twp;
use crate::ids::{MessageId, PeerId, Topic};
use crate::oracle::Oracle;
use crate::rational::{self, Rational};
use crate::score::{self, calc_score};
use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive};
use std::collections::{BTreeMap, BTreeSet};

impl PeerState {
    pub(super) fn heartbeat(
        &mut self,
        twp: &Twp,
        oracle: &mut Oracle,
        tr: &mut Transition,
        want_snapshot: bool,
    ) -> Option<ScoreSnapshot> {
        self.advance_clock(twp, oracle);
        if self.tick % twp.global.decay_interval_ticks == 0 {
            self.decay_all(twp);
        }
        self.refresh_scores(twp);
        let snapshot = want_snapshot.then(|| self.snapshot(twp));
        let topics: Vec<Topic> = self.subs.iter().cloned().collect();
        for t in &topics {
            self.maintain_mesh(t, twp, oracle, tr);
        }
        for t in &topics {
            self.opportunistic_graft(t, twp, oracle, tr);
        }
        self.maintain_fanout(twp, oracle);
        self.emit_gossip(twp, oracle, tr);
        self.msgs.mcache.push_front(Vec::new());
        self.msgs.mcache.truncate(twp.global.mcache_len);
        snapshot
    }

    fn advance_clock(&mut self, twp: &Twp, oracle: &mut Oracle) {
        self.tick += 1;
        let members: Vec<(Topic, PeerId)> = self
            .nts
            .mesh
            .iter()
            .flat_map(|(t, m)| m.iter().map(move |q| (t.clone(), q.clone())))
            .collect();
        for (t, q) in members {
            self.counters.topic_counters_mut(&q, &t).mesh_time += Rational::one();
        }

        let ttl = twp.global.seen_ttl_ticks;
        for e in self.msgs.seen.values_mut() {
            e.age += 1;
        }
        self.msgs.seen.retain(|_, e| e.age <= ttl);

        let timeout = twp.global.iwant_timeout_ticks;
        let mut expired: Vec<(PeerId, Topic)> = Vec::new();
        for (q, pending) in self.msgs.pending_iwants.iter_mut() {
            for p in pending.values_mut() {
                p.age += 1;
            }
            pending.retain(|_, p| {
                if p.age >= timeout {
                    expired.push((q.clone(), p.topic.clone()));
                    false
                } else {
                    true
                }
            });
        }
        self.msgs.pending_iwants.retain(|_, m| !m.is_empty());
        for (q, t) in expired {
            self.msgs.stats.timed_out += 1;
            if oracle.bernoulli(&twp.global.iwant_failure_probability) {
                self.counters.topic_counters_mut(&q, &t).mesh_failure_penalty += Rational::one();
                self.counters.global_counters_mut(&q).behaviour_penalty += Rational::one();
            }
        }
    }

    fn decay_all(&mut self, twp: &Twp) {
        for (_, per_topic) in self.counters.topic.iter_mut() {
            for (t, tc) in per_topic.iter_mut() {
                if let Some(tp) = twp.topics.get(t) {
                    score::decay_topic_counters(tc, tp, &twp.global);
                }
            }
        }
        for gc in self.counters.global.values_mut() {
            score::decay_global_counters(gc, &twp.global);
        }
    }

    fn refresh_scores(&mut self, twp: &Twp) {
        let mut by_ip: BTreeMap<&str, u64> = BTreeMap::new();
        for q in self.nts.neighbors.keys() {
            *by_ip.entry(self.ip_label(q)).or_default() += 1;
        }
        let counts: Vec<(PeerId, u64)> = self
            .nts
            .neighbors
            .keys()
            .map(|q| (q.clone(), by_ip[self.ip_label(q)]))
            .collect();
        for (q, n) in counts {
            self.counters.global_counters_mut(&q).ip_colocation_count = n;
        }
        let scores: BTreeMap<PeerId, Rational> = self
            .nts
            .neighbors
            .keys()
            .map(|q| (q.clone(), calc_score(q, &self.counters, twp)))
            .collect();
        self.nbr_scores = scores;
    }

    fn ip_label<'a>(&'a self, q: &'a PeerId) -> &'a str {
        self.ip_of.get(q).map(String::as_str).unwrap_or(q.as_str())
    }

    fn snapshot(&self, twp: &Twp) -> ScoreSnapshot {
        let mut scores = BTreeMap::new();
        for q in self.nts.neighbors.keys() {
            let mut topics = BTreeMap::new();
            for (t, tp) in &twp.topics {
                let tc = self.counters.topic_counters(q, t);
                if tc.is_zero() && !self.nts.in_mesh(t, q) {
                    continue;
                }
                topics.insert(
                    t.clone(),
                    TopicSnapshot {
                        score: score::topic_score(tc, tp, &twp.global),
                        mesh_time: tc.mesh_time.clone(),
                    },
                );
            }
            scores.insert(
                q.clone(),
                NeighborScore {
                    total: self.score_of(q),
                    topics,
                },
            );
        }
        ScoreSnapshot {
            tick: self.tick,
            scores,
        }
    }

    fn prune(&mut self, q: &PeerId, t: &Topic, twp: &Twp, tr: &mut Transition) {
        if let Some(m) = self.nts.mesh.get_mut(t) {
            m.remove(q);
        }
        self.penalize_removal(q, t, twp);
        self.counters.topic_counters_mut(q, t).mesh_time = rational::zero();
        let backoff = twp.global.prune_backoff_ticks;
        self.nts.set_backoff(q, t, self.tick + backoff);
        self.emit(
            tr,
            q,
            Payload::Prune {
                topic: t.clone(),
                backoff,
            },
        );
    }

    fn graft(&mut self, q: &PeerId, t: &Topic, tr: &mut Transition) {
        self.add_to_mesh(q, t);
        self.emit(tr, q, Payload::Graft { topic: t.clone() });
    }

    fn maintain_mesh(&mut self, t: &Topic, twp: &Twp, oracle: &mut Oracle, tr: &mut Transition) {
        let tp = &twp.topics[t];
        let gp = &twp.global;

        let negative: Vec<PeerId> = self
            .nts
            .mesh_of(t)
            .filter(|q| self.score_of(q).is_negative())
            .cloned()
            .collect();
        for q in &negative {
            self.prune(q, t, twp, tr);
        }

        let size = self.nts.mesh_of(t).count();
        if size < tp.d_low {
            let pool = self.graft_candidates(t);
            for q in oracle.choose_k(&pool, tp.d - size) {
                self.graft(&q, t, tr);
            }
        }

        let members: Vec<PeerId> = self.nts.mesh_of(t).cloned().collect();
        if members.len() > tp.d_hi {
            let target = tp.d_hi;
            let mut by_score = members.clone();
            by_score.sort_by(|a, b| self.score_of(b).cmp(&self.score_of(a)).then(a.cmp(b)));
            let mut keep: BTreeSet<PeerId> = by_score.iter().take(gp.dscore.min(target)).cloned().collect();
            let rest: Vec<PeerId> = members.iter().filter(|q| !keep.contains(*q)).cloned().collect();
            let outbound_kept = keep.iter().filter(|q| self.nts.is_outbound(q)).count();
            if outbound_kept < gp.dout {
                let outbound_rest: Vec<PeerId> = rest
                    .iter()
                    .filter(|q| self.nts.is_outbound(q))
                    .cloned()
                    .collect();
                let room = target - keep.len();
                keep.extend(oracle.choose_k(&outbound_rest, (gp.dout - outbound_kept).min(room)));
            }
            let rest: Vec<PeerId> = members.iter().filter(|q| !keep.contains(*q)).cloned().collect();
            keep.extend(oracle.choose_k(&rest, target - keep.len()));
            for q in members.iter().filter(|q| !keep.contains(*q)) {
                self.prune(q, t, twp, tr);
            }
        }
    }

    fn opportunistic_graft(&mut self, t: &Topic, twp: &Twp, oracle: &mut Oracle, tr: &mut Transition) {
        let mut scores: Vec<Rational> = self.nts.mesh_of(t).map(|q| self.score_of(q)).collect();
        if scores.len() < 2 {
            return;
        }
        scores.sort();
        let median = scores[scores.len() / 2].clone();
        if median >= twp.global.opportunistic_graft_threshold {
            return;
        }
        let pool: Vec<PeerId> = self
            .graft_candidates(t)
            .into_iter()
            .filter(|q| self.score_of(q) > median)
            .collect();
        for q in oracle.choose_k(&pool, twp.global.opportunistic_graft_peers) {
            self.graft(&q, t, tr);
        }
    }

    fn maintain_fanout(&mut self, twp: &Twp, oracle: &mut Oracle) {
        let gp = &twp.global;
        let stale: Vec<Topic> = self
            .nts
            .last_pub
            .iter()
            .filter(|(_, last)| **last + gp.fanout_ttl_ticks < self.tick)
            .map(|(t, _)| t.clone())
            .collect();
        for t in stale {
            self.nts.last_pub.remove(&t);
            self.nts.fanout.remove(&t);
        }
        let topics: Vec<Topic> = self.nts.fanout.keys().cloned().collect();
        for t in topics {
            let Some(tp) = twp.topics.get(&t) else { continue };
            let keep: BTreeSet<PeerId> = self
                .fanout(&t)
                .into_iter()
                .filter(|q| self.nts.subscribed(q, &t) && self.score_of(q) >= gp.publish_threshold)
                .collect();
            let mut next = keep.clone();
            if keep.len() < tp.d {
                let pool: Vec<PeerId> = self
                    .neighbors()
                    .filter(|q| {
                        !keep.contains(*q)
                            && self.nts.subscribed(q, &t)
                            && self.score_of(q) >= gp.publish_threshold
                    })
                    .cloned()
                    .collect();
                next.extend(oracle.choose_k(&pool, tp.d - keep.len()));
            }
            self.nts.fanout.insert(t, next);
        }
    }

    fn emit_gossip(&mut self, twp: &Twp, oracle: &mut Oracle, tr: &mut Transition) {
        let gp = &twp.global;
        let mut by_topic: BTreeMap<Topic, BTreeSet<MessageId>> = BTreeMap::new();
        for m in self.msgs.mcache.iter().take(gp.mcache_gossip).flatten() {
            by_topic.entry(m.topic.clone()).or_default().insert(m.mid);
        }
        for (t, mids) in by_topic {
            let relevant = self.subs.contains(&t) || self.nts.fanout.contains_key(&t);
            let Some(tp) = twp.topics.get(&t) else { continue };
            if !relevant {
                continue;
            }
            let pool: Vec<PeerId> = self
                .neighbors()
                .filter(|q| {
                    self.nts.subscribed(q, &t)
                        && !self.nts.in_mesh(&t, q)
                        && !self.nts.in_fanout(&t, q)
                        && self.score_of(q) >= gp.gossip_threshold
                })
                .cloned()
                .collect();
            if pool.is_empty() {
                continue;
            }
            let by_factor = (&gp.gossip_factor * Rational::from_integer(BigInt::from(pool.len())))
                .floor()
                .to_integer()
                .to_usize()
                .unwrap_or(0);
            let count = tp.d_lazy().max(by_factor);
            let mids: Vec<MessageId> = mids.into_iter().collect();
            for q in oracle.choose_k(&pool, count) {
                self.emit(
                    tr,
                    &q,
                    Payload::Ihave {
                        topic: t.clone(),
                        mids: mids.clone(),
                    },
                );
            }
        }
    }
}
